//! Scoring, ranking and the MR / MRR / H@k protocol, in both directions.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphPair, Role};
use crate::linalg::DenseMatrix;

pub const HITS_AT: [usize; 3] = [1, 10, 50];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Weight of the structural distance; `1 - beta` goes to attributes.
    pub beta: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { beta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CandidatePolicy {
    #[serde(rename = "test-only")]
    TestOnly,
    #[serde(rename = "all-entities")]
    AllEntities,
}

impl fmt::Display for CandidatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidatePolicy::TestOnly => "test-only",
            CandidatePolicy::AllEntities => "all-entities",
        })
    }
}

impl FromStr for CandidatePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test-only" => Ok(Self::TestOnly),
            "all-entities" => Ok(Self::AllEntities),
            other => Err(Error::Config(format!("unknown candidate policy '{other}'"))),
        }
    }
}

/// Final embeddings of both graphs; attribute embeddings are optional.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentEmbeddings {
    pub structure_left: DenseMatrix,
    pub structure_right: DenseMatrix,
    pub attributes: Option<(DenseMatrix, DenseMatrix)>,
}

impl AlignmentEmbeddings {
    pub fn structural(left: DenseMatrix, right: DenseMatrix) -> Self {
        Self {
            structure_left: left,
            structure_right: right,
            attributes: None,
        }
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Negated dimension-normalized L1 distance; higher is better.
pub fn score(
    s_l: &[f64],
    s_r: &[f64],
    attrs: Option<(&[f64], &[f64])>,
    cfg: &ScoreConfig,
) -> Result<f64> {
    if s_l.len() != s_r.len() {
        return Err(Error::shape("score", s_l.len(), s_r.len()));
    }
    if !(0.0..=1.0).contains(&cfg.beta) {
        return Err(Error::Config(format!("beta must be in [0, 1], got {}", cfg.beta)));
    }
    let structural = cfg.beta * l1(s_l, s_r) / s_l.len().max(1) as f64;
    if cfg.beta == 1.0 {
        return Ok(-structural);
    }
    let (a_l, a_r) = attrs.ok_or_else(|| {
        Error::Config("beta < 1 requires attribute embeddings".into())
    })?;
    if a_l.len() != a_r.len() {
        return Err(Error::shape("score", a_l.len(), a_r.len()));
    }
    let attribute = (1.0 - cfg.beta) * l1(a_l, a_r) / a_l.len().max(1) as f64;
    Ok(-(structural + attribute))
}

/// 1-based rank of `truth` after sorting by score descending, ties broken by
/// ascending entity index.
pub fn rank_of(query: usize, truth: usize, candidates: &[usize], scores: &[f64]) -> Result<usize> {
    if candidates.len() != scores.len() {
        return Err(Error::shape("rank_of", candidates.len(), scores.len()));
    }
    let pos = candidates.iter().position(|&c| c == truth).ok_or_else(|| {
        Error::Invalid(format!(
            "ground truth {truth} of query {query} is not among the candidates"
        ))
    })?;
    let t = scores[pos];
    let ahead = candidates
        .iter()
        .zip(scores)
        .filter(|&(&c, &s)| s > t || (s == t && c < truth))
        .count();
    Ok(ahead + 1)
}

/// Best and worst rank `truth` could get under any tie-breaking.
pub fn rank_bounds(truth_score: f64, scores: &[f64]) -> (usize, usize) {
    let better = scores.iter().filter(|&&s| s > truth_score).count();
    let tied = scores.iter().filter(|&&s| s == truth_score).count();
    (better + 1, better + tied.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionMetrics {
    pub n_queries: usize,
    pub n_candidates: usize,
    /// Percentages in [0, 100].
    pub hits_at: BTreeMap<usize, f64>,
    pub mean_rank: f64,
    pub mrr: f64,
    pub mean_rank_optimistic: f64,
    pub mean_rank_pessimistic: f64,
}

impl DirectionMetrics {
    pub fn hits(&self, k: usize) -> f64 {
        self.hits_at.get(&k).copied().unwrap_or(f64::NAN)
    }
}

/// MR, MRR and H@k from a list of 1-based ranks.
pub fn metrics_from_ranks(ranks: &[usize], ks: &[usize]) -> DirectionMetrics {
    let n = ranks.len() as f64;
    let mean_rank = ranks.iter().map(|&r| r as f64).sum::<f64>() / n;
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let hits_at = ks
        .iter()
        .map(|&k| (k, 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
        .collect();
    DirectionMetrics {
        n_queries: ranks.len(),
        n_candidates: 0,
        hits_at,
        mean_rank,
        mrr,
        mean_rank_optimistic: mean_rank,
        mean_rank_pessimistic: mean_rank,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: Role,
    pub candidate_policy: CandidatePolicy,
    pub n_test: usize,
    pub left_to_right: DirectionMetrics,
    pub right_to_left: DirectionMetrics,
    /// Arithmetic mean of both directions.
    pub mean: DirectionMetrics,
}

fn average(a: &DirectionMetrics, b: &DirectionMetrics) -> DirectionMetrics {
    let mid = |x: f64, y: f64| (x + y) / 2.0;
    DirectionMetrics {
        n_queries: a.n_queries,
        n_candidates: a.n_candidates.max(b.n_candidates),
        hits_at: a
            .hits_at
            .iter()
            .map(|(k, v)| (*k, mid(*v, b.hits(*k))))
            .collect(),
        mean_rank: mid(a.mean_rank, b.mean_rank),
        mrr: mid(a.mrr, b.mrr),
        mean_rank_optimistic: mid(a.mean_rank_optimistic, b.mean_rank_optimistic),
        mean_rank_pessimistic: mid(a.mean_rank_pessimistic, b.mean_rank_pessimistic),
    }
}

struct Side<'a> {
    structure: &'a DenseMatrix,
    attributes: Option<&'a DenseMatrix>,
}

fn direction(
    queries: &Side<'_>,
    targets: &Side<'_>,
    pairs: &[(usize, usize)],
    candidates: &[usize],
    cfg: &ScoreConfig,
) -> Result<DirectionMetrics> {
    let results: Vec<Result<(usize, usize, usize)>> = pairs
        .par_iter()
        .map(|&(q, truth)| {
            let scores = candidates
                .iter()
                .map(|&c| {
                    let attrs = match (queries.attributes, targets.attributes) {
                        (Some(a), Some(b)) => Some((a.row(q), b.row(c))),
                        _ => None,
                    };
                    score(queries.structure.row(q), targets.structure.row(c), attrs, cfg)
                })
                .collect::<Result<Vec<f64>>>()?;
            let rank = rank_of(q, truth, candidates, &scores)?;
            let pos = candidates.iter().position(|&c| c == truth).unwrap_or(0);
            let (opt, pes) = rank_bounds(scores[pos], &scores);
            Ok((rank, opt, pes))
        })
        .collect();
    let mut ranks = Vec::with_capacity(pairs.len());
    let (mut opt_sum, mut pes_sum) = (0.0, 0.0);
    for r in results {
        let (rank, opt, pes) = r?;
        ranks.push(rank);
        opt_sum += opt as f64;
        pes_sum += pes as f64;
    }
    let mut m = metrics_from_ranks(&ranks, &HITS_AT);
    m.n_candidates = candidates.len();
    m.mean_rank_optimistic = opt_sum / pairs.len() as f64;
    m.mean_rank_pessimistic = pes_sum / pairs.len() as f64;
    Ok(m)
}

/// Ranks every alignment of `role` in both directions.
pub fn evaluate_split(
    emb: &AlignmentEmbeddings,
    pair: &GraphPair,
    cfg: &ScoreConfig,
    policy: CandidatePolicy,
    role: Role,
) -> Result<MetricsReport> {
    let pairs = pair.alignment.with_role(role);
    if pairs.is_empty() {
        return Err(Error::Invalid(format!("{role} split is empty")));
    }
    if cfg.beta < 1.0 && emb.attributes.is_none() {
        return Err(Error::Config("beta < 1 requires attribute embeddings".into()));
    }
    let (left_candidates, right_candidates): (Vec<usize>, Vec<usize>) = match policy {
        CandidatePolicy::TestOnly => {
            let mut l: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let mut r: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            l.sort_unstable();
            r.sort_unstable();
            (l, r)
        }
        CandidatePolicy::AllEntities => (
            (0..emb.structure_left.n_rows()).collect(),
            (0..emb.structure_right.n_rows()).collect(),
        ),
    };
    let left = Side {
        structure: &emb.structure_left,
        attributes: emb.attributes.as_ref().map(|a| &a.0),
    };
    let right = Side {
        structure: &emb.structure_right,
        attributes: emb.attributes.as_ref().map(|a| &a.1),
    };
    let l2r = direction(&left, &right, &pairs, &right_candidates, cfg)?;
    let reversed: Vec<(usize, usize)> = pairs.iter().map(|&(l, r)| (r, l)).collect();
    let r2l = direction(&right, &left, &reversed, &left_candidates, cfg)?;
    Ok(MetricsReport {
        split: role,
        candidate_policy: policy,
        n_test: pairs.len(),
        mean: average(&l2r, &r2l),
        left_to_right: l2r,
        right_to_left: r2l,
    })
}

pub fn evaluate(
    emb: &AlignmentEmbeddings,
    pair: &GraphPair,
    cfg: &ScoreConfig,
    policy: CandidatePolicy,
) -> Result<MetricsReport> {
    evaluate_split(emb, pair, cfg, policy, Role::Test)
}

impl MetricsReport {
    /// Fixed-width table, one row per direction; percentages with two decimals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} split, {} candidates, {} alignments",
            self.split, self.candidate_policy, self.n_test
        );
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>8} {:>8} {:>10} {:>8}",
            "direction", "H@1", "H@10", "H@50", "MR", "MRR"
        );
        for (name, m) in [
            ("L->R", &self.left_to_right),
            ("R->L", &self.right_to_left),
            ("mean", &self.mean),
        ] {
            let _ = writeln!(
                s,
                "{:<10} {:>8.2} {:>8.2} {:>8.2} {:>10.2} {:>8.4}",
                name,
                m.hits(1),
                m.hits(10),
                m.hits(50),
                m.mean_rank,
                m.mrr
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AlignmentSet, KnowledgeGraph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_embeddings_score_zero() {
        let v = [0.3, -1.0];
        assert_eq!(score(&v, &v, None, &ScoreConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn mixed_score() {
        let cfg = ScoreConfig { beta: 0.5 };
        // structure L1 = 2, attribute L1 = 4, d = d' = 2
        let s = score(&[0.0, 0.0], &[1.0, 1.0], Some((&[0.0, 0.0], &[2.0, 2.0])), &cfg).unwrap();
        assert!((s + 1.5).abs() < 1e-15);
    }

    #[test]
    fn beta_one_ignores_attributes() {
        let cfg = ScoreConfig::default();
        let a = score(&[0.0, 1.0], &[1.0, 1.0], Some((&[5.0], &[-5.0])), &cfg).unwrap();
        let b = score(&[0.0, 1.0], &[1.0, 1.0], None, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn beta_below_one_requires_attributes() {
        assert!(score(&[0.0], &[0.0], None, &ScoreConfig { beta: 0.2 }).is_err());
    }

    #[test]
    fn strictly_best_is_rank_one() {
        assert_eq!(rank_of(0, 7, &[3, 7, 9], &[0.1, 0.5, 0.2]).unwrap(), 1);
    }

    #[test]
    fn ties_break_by_index() {
        assert_eq!(rank_of(0, 5, &[9, 5, 2], &[1.0, 1.0, 1.0]).unwrap(), 2);
        assert_eq!(rank_bounds(1.0, &[1.0, 1.0, 1.0]), (1, 3));
    }

    #[test]
    fn missing_truth_is_an_error() {
        assert!(rank_of(0, 4, &[1, 2], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn rank_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let cands: Vec<usize> = (0..20).collect();
            // coarse values force ties
            let scores: Vec<f64> = (0..20).map(|_| rng.random_range(0..6) as f64).collect();
            let truth = rng.random_range(0..20);
            let better = scores.iter().filter(|&&s| s > scores[truth]).count();
            let tied_before = (0..truth).filter(|&c| scores[c] == scores[truth]).count();
            assert_eq!(rank_of(0, truth, &cands, &scores).unwrap(), better + tied_before + 1);
        }
    }

    #[test]
    fn formulas_on_known_ranks() {
        let m = metrics_from_ranks(&[1, 2, 4], &HITS_AT);
        assert!((m.mean_rank - 7.0 / 3.0).abs() < 1e-12);
        assert!((m.mrr - 7.0 / 12.0).abs() < 1e-12);
        assert!((m.hits(1) - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.hits(10), 100.0);
        assert_eq!(format!("{:.2}", m.hits(1)), "33.33");
        assert_eq!(format!("{:.4}", m.mrr), "0.5833");
    }

    fn pair_with(n: usize, test: &[(usize, usize)]) -> GraphPair {
        GraphPair::new(
            KnowledgeGraph::new(n, 0, vec![]),
            KnowledgeGraph::new(n, 0, vec![]),
            AlignmentSet::from_pairs(test.iter().copied(), Role::Test),
        )
    }

    #[test]
    fn perfect_alignment() {
        let e = DenseMatrix::from_rows(&[vec![0.0], vec![5.0], vec![10.0]]).unwrap();
        let emb = AlignmentEmbeddings::structural(e.clone(), e);
        let pair = pair_with(3, &[(0, 0), (1, 1), (2, 2)]);
        let r = evaluate(&emb, &pair, &ScoreConfig::default(), CandidatePolicy::TestOnly).unwrap();
        for m in [&r.left_to_right, &r.right_to_left, &r.mean] {
            assert_eq!(m.mean_rank, 1.0);
            assert_eq!(m.mrr, 1.0);
            assert!(HITS_AT.iter().all(|&k| m.hits(k) == 100.0));
        }
    }

    #[test]
    fn all_entities_never_ranks_better() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 15;
        let mut rand_mat = || {
            DenseMatrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap()
        };
        let emb = AlignmentEmbeddings::structural(rand_mat(), rand_mat());
        let test: Vec<_> = (0..6).map(|i| (i, (i + 2) % n)).collect();
        let pair = pair_with(n, &test);
        let cfg = ScoreConfig::default();
        let restricted = evaluate(&emb, &pair, &cfg, CandidatePolicy::TestOnly).unwrap();
        let open = evaluate(&emb, &pair, &cfg, CandidatePolicy::AllEntities).unwrap();
        assert!(open.left_to_right.mean_rank >= restricted.left_to_right.mean_rank);
        assert!(open.right_to_left.mean_rank >= restricted.right_to_left.mean_rank);
        assert_eq!(open.left_to_right.n_candidates, n);
        assert_eq!(restricted.left_to_right.n_candidates, 6);
    }

    #[test]
    fn table_has_two_decimal_percentages() {
        let e = DenseMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let emb = AlignmentEmbeddings::structural(e.clone(), e);
        let r = evaluate(&emb, &pair_with(2, &[(0, 0), (1, 1)]), &ScoreConfig::default(), CandidatePolicy::TestOnly)
            .unwrap();
        assert!(r.to_table().contains("100.00"));
    }
}
