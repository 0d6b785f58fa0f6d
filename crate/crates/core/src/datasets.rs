//! Benchmark dataset loading, WK3l alignment symmetrization, splitting and
//! summary statistics.
//!
//! Every family is read from one pinned on-disk layout of tab-separated files
//! with integer identifiers:
//!
//! | file | format | notes |
//! | --- | --- | --- |
//! | `triples_1`, `triples_2` | `head<TAB>relation<TAB>tail` | required |
//! | `ent_ids_1`, `ent_ids_2` | `id<TAB>label` | required, defines the entity set |
//! | `rel_ids_1`, `rel_ids_2` | `id<TAB>label` | optional relation labels |
//! | `sup_ent_ids`, `ref_ent_ids` | `left_id<TAB>right_id` | official train / test split |
//! | `ent_links` | `left_id<TAB>right_id` | unsplit alignment (DBP15k full) |
//! | `ent_links_1to2`, `ent_links_2to1` | `src_id<TAB>dst_id` | WK3l directed entity maps |
//! | `triple_links` | `h1 r1 t1 h2 r2 t2` (tab-separated) | WK3l aligned triples |
//! | `attrs_1`, `attrs_2` | `entity_id<TAB>predicate` | optional attributes |
//! | `manifest.sha256` | `sha256sum` output | optional checksum pin |

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{AlignedPair, AlignmentSet, AttributeTable, GraphPair, KnowledgeGraph, Role, Triple};
use crate::linalg::DenseMatrix;

pub const MANIFEST_FILE: &str = "manifest.sha256";
pub const ATTRIBUTE_VOCABULARY: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetFamily {
    #[serde(rename = "dbp15k-full")]
    Dbp15kFull,
    #[serde(rename = "dbp15k-jape")]
    Dbp15kJape,
    #[serde(rename = "wk3l-15k")]
    Wk3l15k,
    #[serde(rename = "wk3l-120k")]
    Wk3l120k,
    #[serde(rename = "dwy100k")]
    Dwy100k,
}

impl DatasetFamily {
    pub const ALL: [DatasetFamily; 5] = [
        DatasetFamily::Dbp15kFull,
        DatasetFamily::Dbp15kJape,
        DatasetFamily::Wk3l15k,
        DatasetFamily::Wk3l120k,
        DatasetFamily::Dwy100k,
    ];

    pub fn subsets(&self) -> &'static [&'static str] {
        match self {
            DatasetFamily::Dbp15kFull | DatasetFamily::Dbp15kJape => &["fr-en", "ja-en", "zh-en"],
            DatasetFamily::Wk3l15k | DatasetFamily::Wk3l120k => &["en-de", "en-fr"],
            DatasetFamily::Dwy100k => &["dbp-wd", "dbp-yg"],
        }
    }

    pub fn is_wk3l(&self) -> bool {
        matches!(self, DatasetFamily::Wk3l15k | DatasetFamily::Wk3l120k)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetFamily::Dbp15kFull => "dbp15k-full",
            DatasetFamily::Dbp15kJape => "dbp15k-jape",
            DatasetFamily::Wk3l15k => "wk3l-15k",
            DatasetFamily::Wk3l120k => "wk3l-120k",
            DatasetFamily::Dwy100k => "dwy100k",
        }
    }
}

impl fmt::Display for DatasetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['_', ' '], "-");
        DatasetFamily::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown dataset family '{s}'")))
    }
}

/// Canonical subset name: lower case, `-` separated; DWY100k accepts `wd`/`yg`.
pub fn canonical_subset(family: DatasetFamily, subset: &str) -> Result<String> {
    let mut s = subset.to_ascii_lowercase().replace('_', "-");
    if family == DatasetFamily::Dwy100k && !s.starts_with("dbp-") {
        s = format!("dbp-{s}");
    }
    if family.subsets().contains(&s.as_str()) {
        Ok(s)
    } else {
        Err(Error::Config(format!(
            "subset '{subset}' does not exist for {family} (expected one of {:?})",
            family.subsets()
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub family: DatasetFamily,
    pub subset: String,
    pub root: PathBuf,
}

impl DatasetDescriptor {
    pub fn new(family: DatasetFamily, subset: &str, root: impl Into<PathBuf>) -> Result<Self> {
        Ok(Self {
            family,
            subset: canonical_subset(family, subset)?,
            root: root.into(),
        })
    }

    /// `<data_root>/<family>/<subset>`
    pub fn under(data_root: &Path, family: DatasetFamily, subset: &str) -> Result<Self> {
        let subset = canonical_subset(family, subset)?;
        let root = data_root.join(family.name()).join(&subset);
        Ok(Self {
            family,
            subset,
            root,
        })
    }

    /// `family:subset`
    pub fn key(&self) -> String {
        format!("{}:{}", self.family, self.subset)
    }

    pub fn is_available(&self) -> bool {
        self.root.join("triples_1").is_file()
    }
}

// ---------------------------------------------------------------------------
// line-level parsing

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Calls `f(line_number, columns)` for every line; rejects blank lines.
fn for_each_record(
    path: &Path,
    columns: usize,
    mut f: impl FnMut(usize, Vec<&str>) -> Result<()>,
) -> Result<usize> {
    let reader = open(path)?;
    let mut count = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            return Err(parse_err(path, lineno, "blank line"));
        }
        let cols: Vec<&str> = if columns == 2 {
            line.splitn(2, '\t').collect()
        } else {
            line.split('\t').collect()
        };
        if cols.len() != columns {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {columns} tab-separated columns, found {}", cols.len()),
            ));
        }
        f(lineno, cols)?;
        count += 1;
    }
    Ok(count)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_id(path: &Path, line: usize, s: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| parse_err(path, line, format!("'{s}' is not a non-negative integer id")))
}

struct IdMap {
    dense: HashMap<u64, usize>,
    labels: BTreeMap<usize, String>,
}

fn read_id_map(path: &Path) -> Result<IdMap> {
    let mut dense = HashMap::new();
    let mut labels = BTreeMap::new();
    for_each_record(path, 2, |line, cols| {
        let raw = parse_id(path, line, cols[0])?;
        let idx = dense.len();
        if dense.insert(raw, idx).is_some() {
            return Err(parse_err(path, line, format!("duplicate id {raw}")));
        }
        labels.insert(idx, cols[1].to_string());
        Ok(())
    })?;
    Ok(IdMap { dense, labels })
}

fn lookup(map: &IdMap, path: &Path, line: usize, raw: u64) -> Result<usize> {
    map.dense
        .get(&raw)
        .copied()
        .ok_or_else(|| parse_err(path, line, format!("dangling entity id {raw}")))
}

fn read_graph(dir: &Path, side: u8) -> Result<KnowledgeGraph> {
    let ents = read_id_map(&dir.join(format!("ent_ids_{side}")))?;
    let triples_path = dir.join(format!("triples_{side}"));
    let mut raw_triples = Vec::new();
    let mut raw_relations = std::collections::BTreeSet::new();
    let n = for_each_record(&triples_path, 3, |line, cols| {
        let h = lookup(&ents, &triples_path, line, parse_id(&triples_path, line, cols[0])?)?;
        let r = parse_id(&triples_path, line, cols[1])?;
        let t = lookup(&ents, &triples_path, line, parse_id(&triples_path, line, cols[2])?)?;
        raw_relations.insert(r);
        raw_triples.push((h, r, t));
        Ok(())
    })?;
    if n == 0 {
        return Err(Error::Dataset(format!(
            "{}: triple file is empty",
            triples_path.display()
        )));
    }
    let rel_index: HashMap<u64, usize> = raw_relations
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, i))
        .collect();
    let triples = raw_triples
        .into_iter()
        .map(|(h, r, t)| Triple::new(h, rel_index[&r], t))
        .collect();

    let rel_path = dir.join(format!("rel_ids_{side}"));
    let relation_labels = if rel_path.is_file() {
        let mut labels = BTreeMap::new();
        for_each_record(&rel_path, 2, |line, cols| {
            let raw = parse_id(&rel_path, line, cols[0])?;
            if let Some(&i) = rel_index.get(&raw) {
                labels.insert(i, cols[1].to_string());
            }
            Ok(())
        })?;
        Some(labels)
    } else {
        None
    };

    Ok(KnowledgeGraph {
        entity_count: ents.dense.len(),
        relation_count: rel_index.len(),
        triples,
        entity_labels: Some(ents.labels),
        relation_labels,
    })
}

fn read_links(path: &Path, from: &IdMap, to: &IdMap) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for_each_record(path, 2, |line, cols| {
        let a = lookup(from, path, line, parse_id(path, line, cols[0])?)?;
        let b = lookup(to, path, line, parse_id(path, line, cols[1])?)?;
        out.push((a, b));
        Ok(())
    })?;
    Ok(out)
}

fn read_triple_links(path: &Path, left: &IdMap, right: &IdMap) -> Result<Vec<(Triple, Triple)>> {
    let mut out = Vec::new();
    for_each_record(path, 6, |line, c| {
        let id = |s: &str| parse_id(path, line, s);
        let l = Triple::new(
            lookup(left, path, line, id(c[0])?)?,
            id(c[1])? as usize,
            lookup(left, path, line, id(c[2])?)?,
        );
        let r = Triple::new(
            lookup(right, path, line, id(c[3])?)?,
            id(c[4])? as usize,
            lookup(right, path, line, id(c[5])?)?,
        );
        out.push((l, r));
        Ok(())
    })?;
    Ok(out)
}

fn read_attributes(path: &Path, ents: &IdMap, vocabulary: usize) -> Result<AttributeTable> {
    let mut rows: Vec<(usize, String)> = Vec::new();
    let mut freq: HashMap<String, usize> = HashMap::new();
    for_each_record(path, 2, |line, cols| {
        let e = lookup(ents, path, line, parse_id(path, line, cols[0])?)?;
        let p = cols[1].to_string();
        *freq.entry(p.clone()).or_default() += 1;
        rows.push((e, p));
        Ok(())
    })?;
    let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(vocabulary);
    let columns: Vec<String> = ranked.into_iter().map(|(p, _)| p).collect();
    let col_of: HashMap<&str, usize> = columns
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let mut features = DenseMatrix::zeros(ents.dense.len(), columns.len());
    for (e, p) in &rows {
        if let Some(&j) = col_of.get(p.as_str()) {
            features.set(*e, j, 1.0);
        }
    }
    Ok(AttributeTable { features, columns })
}

// ---------------------------------------------------------------------------
// manifest

fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Files the pinned layout requires for a family (alignment files excluded).
fn required_files(family: DatasetFamily) -> Vec<&'static str> {
    let mut v = vec!["triples_1", "triples_2", "ent_ids_1", "ent_ids_2"];
    if family.is_wk3l() {
        v.extend(["ent_links_1to2", "ent_links_2to1", "triple_links"]);
    }
    v
}

fn layout_files(desc: &DatasetDescriptor) -> Vec<String> {
    let mut files: Vec<String> = required_files(desc.family)
        .into_iter()
        .map(String::from)
        .collect();
    for optional in [
        "rel_ids_1",
        "rel_ids_2",
        "sup_ent_ids",
        "ref_ent_ids",
        "ent_links",
        "attrs_1",
        "attrs_2",
    ] {
        if desc.root.join(optional).is_file() {
            files.push(optional.to_string());
        }
    }
    files
}

/// Writes `manifest.sha256` pinning every layout file currently present.
pub fn write_manifest(desc: &DatasetDescriptor) -> Result<PathBuf> {
    let path = desc.root.join(MANIFEST_FILE);
    let mut out = String::new();
    for name in layout_files(desc) {
        out.push_str(&format!("{}  {}\n", sha256_file(&desc.root.join(&name))?, name));
    }
    std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Checks the manifest, if any: every listed checksum must match and every
/// present layout file must be listed.
pub fn verify_manifest(desc: &DatasetDescriptor) -> Result<bool> {
    let path = desc.root.join(MANIFEST_FILE);
    if !path.is_file() {
        return Ok(false);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut listed = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let (sum, name) = line
            .split_once("  ")
            .ok_or_else(|| parse_err(&path, i + 1, "expected '<sha256>  <file>'"))?;
        let actual = sha256_file(&desc.root.join(name))?;
        if actual != sum {
            return Err(Error::Dataset(format!(
                "{}: checksum mismatch for {name} (manifest {sum}, actual {actual})",
                desc.root.display()
            )));
        }
        listed.insert(name.to_string());
    }
    for name in layout_files(desc) {
        if !listed.contains(&name) {
            return Err(Error::Dataset(format!(
                "{}: {name} is not pinned by {MANIFEST_FILE}",
                desc.root.display()
            )));
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// loading

/// A loaded pair plus alignment provenance that the pair itself does not keep.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub descriptor: DatasetDescriptor,
    pub pair: GraphPair,
    /// WK3l only: sizes of the two directed entity maps.
    pub directed_alignments: Option<(usize, usize)>,
    pub symmetrized: bool,
}

pub fn load(desc: &DatasetDescriptor) -> Result<GraphPair> {
    load_with_info(desc).map(|d| d.pair)
}

pub fn load_with_info(desc: &DatasetDescriptor) -> Result<LoadedDataset> {
    canonical_subset(desc.family, &desc.subset)?;
    if !desc.root.is_dir() {
        return Err(Error::Dataset(format!(
            "{}: dataset directory {} does not exist",
            desc.key(),
            desc.root.display()
        )));
    }
    for f in required_files(desc.family) {
        if !desc.root.join(f).is_file() {
            return Err(Error::Dataset(format!(
                "{}: required file {} is missing",
                desc.key(),
                desc.root.join(f).display()
            )));
        }
    }
    verify_manifest(desc)?;

    let dir = &desc.root;
    let left = read_graph(dir, 1)?;
    let right = read_graph(dir, 2)?;
    let ents_l = read_id_map(&dir.join("ent_ids_1"))?;
    let ents_r = read_id_map(&dir.join("ent_ids_2"))?;

    let mut directed = None;
    let mut symmetrized = false;
    let alignment = if desc.family.is_wk3l() {
        let l2r = read_links(&dir.join("ent_links_1to2"), &ents_l, &ents_r)?;
        let r2l = read_links(&dir.join("ent_links_2to1"), &ents_r, &ents_l)?;
        let tl = read_triple_links(&dir.join("triple_links"), &ents_l, &ents_r)?;
        directed = Some((l2r.len(), r2l.len()));
        symmetrized = true;
        symmetrize_wk3l(&l2r, &r2l, &tl, &left, &right)
    } else if dir.join("sup_ent_ids").is_file() && dir.join("ref_ent_ids").is_file() {
        let mut a = AlignmentSet::from_pairs(
            read_links(&dir.join("sup_ent_ids"), &ents_l, &ents_r)?,
            Role::Train,
        );
        a.pairs.extend(
            AlignmentSet::from_pairs(read_links(&dir.join("ref_ent_ids"), &ents_l, &ents_r)?, Role::Test)
                .pairs,
        );
        a
    } else if dir.join("ent_links").is_file() {
        AlignmentSet::from_pairs(read_links(&dir.join("ent_links"), &ents_l, &ents_r)?, Role::Train)
    } else {
        return Err(Error::Dataset(format!(
            "{}: no alignment files (expected sup_ent_ids + ref_ent_ids, or ent_links)",
            desc.key()
        )));
    };

    let mut pair = GraphPair::new(left, right, alignment);
    let (al, ar) = (dir.join("attrs_1"), dir.join("attrs_2"));
    if al.is_file() && ar.is_file() {
        pair.attributes_left = Some(read_attributes(&al, &ents_l, ATTRIBUTE_VOCABULARY)?);
        pair.attributes_right = Some(read_attributes(&ar, &ents_r, ATTRIBUTE_VOCABULARY)?);
    }

    let violations = crate::graph::validate_pair(&pair);
    if let Some(v) = violations.first() {
        return Err(Error::Dataset(format!(
            "{}: {} invariant violations, first: {v}",
            desc.key(),
            violations.len()
        )));
    }
    Ok(LoadedDataset {
        descriptor: desc.clone(),
        pair,
        directed_alignments: directed,
        symmetrized,
    })
}

const SOURCE_L2R: u8 = 1;
const SOURCE_R2L: u8 = 2;
const SOURCE_HEAD: u8 = 4;
const SOURCE_TAIL: u8 = 8;

/// Union of both directed entity maps and the head/head, tail/tail pairs of
/// aligned triples, reduced to a one-to-one matching.
///
/// `right_to_left` is given in its file orientation `(right, left)`. Conflicts
/// keep the pair supported by the most distinct sources, then the
/// lexicographically smallest `(left label, right label)`.
pub fn symmetrize_wk3l(
    left_to_right: &[(usize, usize)],
    right_to_left: &[(usize, usize)],
    triple_links: &[(Triple, Triple)],
    left: &KnowledgeGraph,
    right: &KnowledgeGraph,
) -> AlignmentSet {
    let mut sources: HashMap<(usize, usize), u8> = HashMap::new();
    for &p in left_to_right {
        *sources.entry(p).or_default() |= SOURCE_L2R;
    }
    for &(r, l) in right_to_left {
        *sources.entry((l, r)).or_default() |= SOURCE_R2L;
    }
    for (a, b) in triple_links {
        *sources.entry((a.head, b.head)).or_default() |= SOURCE_HEAD;
        *sources.entry((a.tail, b.tail)).or_default() |= SOURCE_TAIL;
    }
    let label = |g: &KnowledgeGraph, i: usize| -> String {
        g.entity_label(i)
            .map(str::to_string)
            .unwrap_or_else(|| format!("{i:020}"))
    };
    let mut candidates: Vec<((usize, usize), u32, String, String)> = sources
        .into_iter()
        .map(|(p, s)| (p, s.count_ones(), label(left, p.0), label(right, p.1)))
        .collect();
    candidates.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| a.2.cmp(&b.2))
            .then_with(|| a.3.cmp(&b.3))
            .then_with(|| a.0.cmp(&b.0))
    });
    let mut used_l = HashSet::new();
    let mut used_r = HashSet::new();
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for ((l, r), ..) in candidates {
        if !used_l.contains(&l) && !used_r.contains(&r) {
            used_l.insert(l);
            used_r.insert(r);
            kept.push((l, r));
        }
    }
    kept.sort_unstable();
    AlignmentSet::from_pairs(kept, Role::Train)
}

// ---------------------------------------------------------------------------
// splitting

/// Seeded train / validation (/ test) split.
///
/// If the alignment already carries a test split, only the train pairs are
/// re-partitioned into train and validation. Otherwise `train_fraction` of
/// all pairs become train and the rest test first.
pub fn split(
    alignment: &AlignmentSet,
    train_fraction: f64,
    val_fraction_of_train: f64,
    seed: u64,
) -> Result<AlignmentSet> {
    for (name, f) in [
        ("train fraction", train_fraction),
        ("validation fraction", val_fraction_of_train),
    ] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("{name} must be in (0, 1), got {f}")));
        }
    }
    if alignment.is_empty() {
        return Err(Error::Invalid("cannot split an empty alignment".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = alignment.clone();
    let official = out.pairs.iter().any(|p| p.role != Role::Train);

    let mut train_idx: Vec<usize> = if official {
        // re-partition the shipped train split only
        out.pairs
            .iter_mut()
            .enumerate()
            .filter_map(|(i, p)| match p.role {
                Role::Validation => {
                    p.role = Role::Train;
                    Some(i)
                }
                Role::Train => Some(i),
                Role::Test => None,
            })
            .collect()
    } else {
        let mut all: Vec<usize> = (0..out.len()).collect();
        all.shuffle(&mut rng);
        let n_train = (all.len() as f64 * train_fraction).round() as usize;
        for &i in &all[n_train..] {
            out.pairs[i].role = Role::Test;
        }
        all.truncate(n_train);
        all
    };
    train_idx.sort_unstable();
    train_idx.shuffle(&mut rng);
    let n_val = (train_idx.len() as f64 * val_fraction_of_train).round() as usize;
    for &i in &train_idx[..n_val] {
        out.pairs[i].role = Role::Validation;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// statistics

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideStatistics {
    pub triples: usize,
    pub entities: usize,
    pub relations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub left: SideStatistics,
    pub right: SideStatistics,
    pub alignments: usize,
    pub symmetrized_alignments: Option<usize>,
    pub directed_alignments: Option<(usize, usize)>,
}

fn side_stats(g: &KnowledgeGraph) -> SideStatistics {
    SideStatistics {
        triples: g.triples.len(),
        entities: g.entity_count,
        relations: g.relation_count,
    }
}

pub fn statistics(pair: &GraphPair) -> DatasetStatistics {
    DatasetStatistics {
        left: side_stats(&pair.left),
        right: side_stats(&pair.right),
        alignments: pair.alignment.len(),
        symmetrized_alignments: None,
        directed_alignments: None,
    }
}

impl LoadedDataset {
    pub fn statistics(&self) -> DatasetStatistics {
        let mut s = statistics(&self.pair);
        if self.symmetrized {
            s.symmetrized_alignments = Some(s.alignments);
            s.directed_alignments = self.directed_alignments;
        }
        s
    }
}

impl fmt::Display for DatasetStatistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:>10} {:>10} {:>10}", "graph", "triples", "entities", "relations")?;
        for (name, s) in [("left", &self.left), ("right", &self.right)] {
            writeln!(
                f,
                "{:<6} {:>10} {:>10} {:>10}",
                name, s.triples, s.entities, s.relations
            )?;
        }
        match (self.directed_alignments, self.symmetrized_alignments) {
            (Some((a, b)), Some(sym)) => {
                writeln!(f, "alignments: {a} / {b} directed, {sym} symmetrized")
            }
            _ => writeln!(f, "alignments: {}", self.alignments),
        }
    }
}

/// Published sizes of every benchmark: `(left, right, alignments)`, where WK3l
/// alignments are `(left directed, right directed, symmetrized)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceStatistics {
    pub left: SideStatistics,
    pub right: SideStatistics,
    pub alignments: usize,
    pub directed_alignments: Option<(usize, usize)>,
}

const fn side(triples: usize, entities: usize, relations: usize) -> SideStatistics {
    SideStatistics {
        triples,
        entities,
        relations,
    }
}

pub fn reference_statistics(family: DatasetFamily, subset: &str) -> Option<ReferenceStatistics> {
    use DatasetFamily::*;
    let r = |l, r, a, d| ReferenceStatistics {
        left: l,
        right: r,
        alignments: a,
        directed_alignments: d,
    };
    Some(match (family, subset) {
        (Dbp15kFull, "fr-en") => r(side(192_191, 66_858, 1_379), side(278_590, 105_889, 2_209), 15_000, None),
        (Dbp15kFull, "ja-en") => r(side(164_373, 65_744, 2_043), side(233_319, 95_680, 2_096), 15_000, None),
        (Dbp15kFull, "zh-en") => r(side(153_929, 66_469, 2_830), side(237_674, 98_125, 2_317), 15_000, None),
        (Dbp15kJape, "fr-en") => r(side(105_998, 19_661, 903), side(115_722, 19_993, 1_208), 15_000, None),
        (Dbp15kJape, "ja-en") => r(side(77_214, 19_814, 1_299), side(93_484, 19_780, 1_153), 15_000, None),
        (Dbp15kJape, "zh-en") => r(side(70_414, 19_388, 1_701), side(95_142, 19_572, 1_323), 15_000, None),
        (Wk3l15k, "en-de") => r(side(209_041, 15_127, 1_841), side(144_244, 14_603, 596), 10_383, Some((1_289, 1_140))),
        (Wk3l15k, "en-fr") => r(side(203_356, 15_170, 2_228), side(169_329, 15_393, 2_422), 8_024, Some((2_498, 3_812))),
        (Wk3l120k, "en-de") => r(side(624_659, 67_650, 2_393), side(389_554, 61_942, 861), 50_280, Some((6_173, 4_820))),
        (Wk3l120k, "en-fr") => r(side(1_375_406, 119_749, 3_109), side(760_497, 118_592, 2_336), 87_836, Some((36_749, 36_013))),
        (Dwy100k, "dbp-wd") => r(side(463_294, 100_000, 330), side(448_774, 100_000, 220), 100_000, None),
        (Dwy100k, "dbp-yg") => r(side(428_952, 100_000, 302), side(502_563, 100_000, 31), 100_000, None),
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// writing

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for l in lines {
        writeln!(f, "{l}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Writes a pair in the pinned layout, using dense indices as ids. Train pairs
/// go to `sup_ent_ids`, everything else to `ref_ent_ids`.
pub fn write_pair(pair: &GraphPair, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (side, g) in [(1, &pair.left), (2, &pair.right)] {
        write_lines(
            &dir.join(format!("triples_{side}")),
            g.triples
                .iter()
                .map(|t| format!("{}\t{}\t{}", t.head, t.relation, t.tail)),
        )?;
        write_lines(
            &dir.join(format!("ent_ids_{side}")),
            (0..g.entity_count).map(|i| {
                let label = g
                    .entity_label(i)
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("e{side}_{i}"));
                format!("{i}\t{label}")
            }),
        )?;
    }
    let fmt = |p: &AlignedPair| format!("{}\t{}", p.left, p.right);
    write_lines(
        &dir.join("sup_ent_ids"),
        pair.alignment.pairs.iter().filter(|p| p.role == Role::Train).map(fmt),
    )?;
    write_lines(
        &dir.join("ref_ent_ids"),
        pair.alignment.pairs.iter().filter(|p| p.role != Role::Train).map(fmt),
    )
}

/// Two copies of an `n`-cycle, aligned identically; the first `n_seeds` nodes
/// of an evenly spread selection are train, the rest test.
pub fn isomorphic_cycles(n: usize, n_seeds: usize) -> GraphPair {
    let cycle = || {
        KnowledgeGraph::new(
            n,
            1,
            (0..n).map(|i| Triple::new(i, 0, (i + 1) % n)).collect(),
        )
    };
    let stride = if n_seeds == 0 { 1 } else { (n / n_seeds).max(1) };
    let seeds: HashSet<usize> = (0..n_seeds).map(|k| (k * stride) % n).collect();
    let pairs = (0..n)
        .map(|i| AlignedPair {
            left: i,
            right: i,
            role: if seeds.contains(&i) { Role::Train } else { Role::Test },
        })
        .collect();
    GraphPair::new(cycle(), cycle(), AlignmentSet::new(pairs))
}
