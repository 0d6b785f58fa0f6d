//! Acceptance suite: one line per criterion, `PASS`, `FAIL` or `SKIP`.
//!
//! Criteria 5-7 need the benchmark datasets under `$KGALIGN_DATA` (laid out as
//! `<family>/<subset>/`) and report `SKIP` without them. Runs for 6 and 7 are
//! persisted under the cargo test scratch directory, so an interrupted suite
//! resumes where it stopped.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgalign::adjacency::{unnormalized_adjacency, AdjacencyVariant, RelationWeights};
use kgalign::datasets::{self, reference_statistics, DatasetDescriptor, DatasetFamily};
use kgalign::encoder::{backward, forward, init_state, EmbeddingState};
use kgalign::evaluation::{metrics_from_ranks, rank_of, HITS_AT};
use kgalign::linalg::degree_normalize;
use kgalign::runner::ablation::{resolve_cell, seeded, Preset, Stat};
use kgalign::runner::config::{resolve_data_root, DATA_ENV};
use kgalign::runner::grid::{enumerate_grid, GridSpec};
use kgalign::runner::run::{execute, load_report, run_dir, run_single, CONFIG_FILE, LOSS_FILE};
use kgalign::runner::{CellKey, DatasetSource, InitPreset, RunConfig, RunReport};
use kgalign::training::{margin_rank_loss, sample_negatives};
use kgalign::{
    build_adjacency, AdjacencyConfig, EncoderConfig, InitScale, KnowledgeGraph, Normalization, Triple,
};

// pinned tolerances and budgets
const ORACLE_MATRICES: usize = 100;
const ORACLE_MAX_CANDIDATES: usize = 30;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const FD_STEP: f64 = 1e-5;
const FD_MAX_RELATIVE_ERROR: f64 = 1e-4;
const FD_BUDGET: Duration = Duration::from_secs(60);
const GRID_RUNS: usize = 1440;
const GRID_BUDGET: Duration = Duration::from_secs(1);
const WK3L_RELATIVE_TOLERANCE: f64 = 0.01;
const REPRODUCTION_TARGET_H1: f64 = 43.30;
const REPRODUCTION_TOLERANCE: f64 = 2.5;
const REPRODUCTION_SEEDS: usize = 3;
const WEIGHTS_GAP: f64 = 5.0;
const INIT_GAP: f64 = 2.0;
const ADJACENCY_GRAPHS: usize = 50;
const ADJACENCY_TOLERANCE: f64 = 1e-12;
const TOY_EPOCHS: usize = 500;
const TOY_BUDGET: Duration = Duration::from_secs(30);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

// ---------------------------------------------------------------------------
// 1. metric oracle

/// Sorts every candidate and reads off the position of the truth.
fn oracle_rank(truth: usize, candidates: &[usize], scores: &[f64]) -> usize {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(candidates[a].cmp(&candidates[b]))
    });
    1 + order.iter().position(|&i| candidates[i] == truth).unwrap()
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut queries = 0;
    for m in 0..ORACLE_MATRICES {
        let n = rng.random_range(1..=ORACLE_MAX_CANDIDATES);
        let candidates: Vec<usize> = {
            let mut c: Vec<usize> = (0..3 * n).collect();
            rand::seq::SliceRandom::shuffle(c.as_mut_slice(), &mut rng);
            c.truncate(n);
            c
        };
        // coarse scores on half the matrices so ties are common
        let levels = if m % 2 == 0 { 4 } else { 1_000_000 };
        let mut ranks = Vec::new();
        let mut oracle = Vec::new();
        for _ in 0..n {
            let scores: Vec<f64> = (0..n)
                .map(|_| -(rng.random_range(0..levels) as f64) / levels as f64)
                .collect();
            let truth = candidates[rng.random_range(0..n)];
            ranks.push(rank_of(0, truth, &candidates, &scores).unwrap());
            oracle.push(oracle_rank(truth, &candidates, &scores));
        }
        if ranks != oracle {
            return Fail(format!("matrix {m}: ranks {ranks:?} vs oracle {oracle:?}"));
        }
        let got = metrics_from_ranks(&ranks, &HITS_AT);
        let q = oracle.len() as f64;
        let mr = oracle.iter().map(|&r| r as f64).sum::<f64>() / q;
        let mrr = oracle.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / q;
        if got.mean_rank != mr || got.mrr != mrr {
            return Fail(format!("matrix {m}: MR/MRR {}/{} vs {mr}/{mrr}", got.mean_rank, got.mrr));
        }
        for k in HITS_AT {
            let h = 100.0 * oracle.iter().filter(|&&r| r <= k).count() as f64 / q;
            if got.hits(k) != h {
                return Fail(format!("matrix {m}: H@{k} {} vs {h}", got.hits(k)));
            }
        }
        queries += n;
    }
    let t = start.elapsed();
    check(
        t < ORACLE_BUDGET,
        format!("{ORACLE_MATRICES} matrices, {queries} queries, exact match in {t:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 2. end-to-end gradients

fn random_graph(rng: &mut ChaCha8Rng, n: usize, r: usize, m: usize) -> KnowledgeGraph {
    let triples = (0..m)
        .map(|_| Triple::new(rng.random_range(0..n), rng.random_range(0..r), rng.random_range(0..n)))
        .collect();
    KnowledgeGraph::new(n, r, triples)
}

fn pair_loss(
    state: &EmbeddingState,
    adj: (&kgalign::SparseMatrix, &kgalign::SparseMatrix),
    cfg: &EncoderConfig,
    pos: &[(usize, usize)],
    neg: &[Vec<(usize, usize)>],
    margin: f64,
) -> f64 {
    let pass = forward(adj.0, adj.1, state, cfg).unwrap();
    margin_rank_loss(&pass.left, &pass.right, pos, neg, margin).unwrap().loss
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut combos = 0;
    for (ci, use_weights) in [false, true].into_iter().enumerate() {
        for (ii, init) in [InitScale::Unit, InitScale::Scaled].into_iter().enumerate() {
            for layers in 1..=3 {
                let seed = (ci * 100 + ii * 10 + layers) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let left = random_graph(&mut rng, 8, 2, 12);
                let right = random_graph(&mut rng, 8, 2, 12);
                let adj_cfg = AdjacencyConfig::default();
                let al = build_adjacency(&left, &adj_cfg).unwrap();
                let ar = build_adjacency(&right, &adj_cfg).unwrap();
                let cfg = EncoderConfig {
                    n_layers: layers,
                    dim: 5,
                    use_weights,
                    init,
                    normalize_features: true,
                    seed,
                };
                let pos = vec![(0, 1), (2, 2), (5, 7)];
                let neg = sample_negatives(&pos, 8, 8, 3, &mut rng).unwrap();
                let margin = 0.5;
                let mut state = init_state(&cfg, 8, 8).unwrap();
                let analytic: Vec<Vec<f64>> = {
                    let pass = forward(&al, &ar, &state, &cfg).unwrap();
                    let out = margin_rank_loss(&pass.left, &pass.right, &pos, &neg, margin).unwrap();
                    let g = backward(&out.grad_left, &out.grad_right, &pass.tape, &cfg).unwrap();
                    g.as_slices().iter().map(|s| s.to_vec()).collect()
                };
                let mut diff2 = 0.0;
                let mut norm_a2: f64 = 0.0;
                let mut norm_f2: f64 = 0.0;
                for (p, grad) in analytic.iter().enumerate() {
                    for k in 0..grad.len() {
                        let orig = state.params_mut()[p][k];
                        state.params_mut()[p][k] = orig + FD_STEP;
                        let up = pair_loss(&state, (&al, &ar), &cfg, &pos, &neg, margin);
                        state.params_mut()[p][k] = orig - FD_STEP;
                        let down = pair_loss(&state, (&al, &ar), &cfg, &pos, &neg, margin);
                        state.params_mut()[p][k] = orig;
                        let fd = (up - down) / (2.0 * FD_STEP);
                        diff2 += (fd - grad[k]).powi(2);
                        norm_a2 += grad[k].powi(2);
                        norm_f2 += fd.powi(2);
                    }
                }
                let denom = norm_a2.sqrt().max(norm_f2.sqrt());
                if denom == 0.0 {
                    return Fail(format!(
                        "weights={use_weights} init={init} layers={layers}: zero gradient, nothing checked"
                    ));
                }
                let rel = diff2.sqrt() / denom;
                if !(rel < FD_MAX_RELATIVE_ERROR) {
                    return Fail(format!(
                        "weights={use_weights} init={init} layers={layers}: relative error {rel:.3e}"
                    ));
                }
                worst = worst.max(rel);
                combos += 1;
            }
        }
    }
    let t = start.elapsed();
    check(
        t < FD_BUDGET,
        format!("{combos} combinations, worst relative error {worst:.2e} (h = {FD_STEP:e}) in {t:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 3. weightless parameter count

fn parameter_count() -> Outcome {
    for (nl, nr, d) in [(8, 8, 4), (19_388, 19_572, 200), (3, 11, 17)] {
        let cfg = EncoderConfig {
            dim: d,
            use_weights: false,
            ..EncoderConfig::default()
        };
        let mut state = init_state(&cfg, nl, nr).unwrap();
        let trainable: usize = state.params_mut().iter().map(|p| p.len()).sum();
        if state.parameter_count() != (nl + nr) * d || trainable != (nl + nr) * d {
            return Fail(format!(
                "({nl}+{nr})x{d}: counted {} / trainable {trainable}",
                state.parameter_count()
            ));
        }
    }
    Pass("(n_left + n_right) x d for 3 shapes, including zh-en sizes at d = 200".into())
}

// ---------------------------------------------------------------------------
// 4. grid cardinality

fn grid_cardinality() -> Outcome {
    let start = Instant::now();
    let base = RunConfig::new(DatasetSource::benchmark(DatasetFamily::Dbp15kJape, "zh-en").unwrap());
    let spec = GridSpec::large_search();
    let points = enumerate_grid(&base, &spec).unwrap();
    let t = start.elapsed();
    let distinct: std::collections::HashSet<String> = points.iter().map(|p| p.config.run_id()).collect();
    check(
        points.len() == GRID_RUNS && distinct.len() == GRID_RUNS && t < GRID_BUDGET,
        format!("{} configs ({} distinct) in {t:.2?}", points.len(), distinct.len()),
    )
}

// ---------------------------------------------------------------------------
// 5-7. dataset-gated criteria

fn data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_ENV).map(|_| resolve_data_root(None))
}

fn descriptor(root: &Path, family: DatasetFamily, subset: &str) -> Option<DatasetDescriptor> {
    DatasetDescriptor::under(root, family, subset)
        .ok()
        .filter(DatasetDescriptor::is_available)
}

fn golden_statistics() -> Outcome {
    let Some(root) = data_root() else {
        return Skip(format!("${DATA_ENV} not set; no benchmark data available"));
    };
    let mut checked = Vec::new();
    let mut missing = Vec::new();
    for family in DatasetFamily::ALL {
        for subset in family.subsets() {
            let Some(desc) = descriptor(&root, family, subset) else {
                missing.push(format!("{family}:{subset}"));
                continue;
            };
            let expected = reference_statistics(family, subset).unwrap();
            let loaded = match datasets::load_with_info(&desc) {
                Ok(l) => l,
                Err(e) => return Fail(format!("{}: {e}", desc.key())),
            };
            let got = loaded.statistics();
            let sides_ok = got.left == expected.left && got.right == expected.right;
            let align_ok = if family.is_wk3l() {
                let sym = got.symmetrized_alignments.unwrap_or(0) as f64;
                (sym - expected.alignments as f64).abs() <= WK3L_RELATIVE_TOLERANCE * expected.alignments as f64
            } else {
                got.alignments == expected.alignments
            };
            if !(sides_ok && align_ok) {
                return Fail(format!("{}: got {got:?}, published {expected:?}", desc.key()));
            }
            checked.push(desc.key());
        }
    }
    if checked.is_empty() {
        return Skip(format!("no datasets found under {}", root.display()));
    }
    let mut detail = format!("{} subsets match: {}", checked.len(), checked.join(", "));
    if !missing.is_empty() {
        detail.push_str(&format!("; not present: {}", missing.join(", ")));
    }
    Pass(detail)
}

fn runs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-runs")
}

/// Test reports of `n` seeds of one cell at the grid-optimum settings.
fn cell_reports(desc: &DatasetDescriptor, cell: CellKey, n: usize) -> kgalign::Result<Vec<RunReport>> {
    let mut base = RunConfig::new(DatasetSource::Benchmark {
        family: desc.family,
        subset: desc.subset.clone(),
        root: Some(desc.root.clone()),
    });
    base.output.dir = runs_dir();
    let cfg = resolve_cell(&base, &base.dataset.clone(), cell, Preset::GridOptimum)?;
    (0..n)
        .map(|i| {
            let c = seeded(&cfg, i);
            match load_report(&run_dir(&c)) {
                Ok(r) => Ok(r),
                Err(_) => run_single(&c, None).map(|r| r.report),
            }
        })
        .collect()
}

struct H1 {
    l2r: f64,
    r2l: f64,
    mean: f64,
}

fn mean_h1(reports: &[RunReport]) -> H1 {
    let avg = |f: fn(&RunReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>()).mean;
    H1 {
        l2r: avg(|r| r.test.left_to_right.hits(1)),
        r2l: avg(|r| r.test.right_to_left.hits(1)),
        mean: avg(|r| r.test.mean.hits(1)),
    }
}

fn zh_en() -> Option<DatasetDescriptor> {
    data_root().and_then(|root| descriptor(&root, DatasetFamily::Dbp15kJape, "zh-en"))
}

const NO_UNIT: CellKey = CellKey::new(false, InitPreset::Unit);
const NO_SCALED: CellKey = CellKey::new(false, InitPreset::Scaled);
const YES_UNIT: CellKey = CellKey::new(true, InitPreset::Unit);

fn reproduction() -> Outcome {
    let Some(desc) = zh_en() else {
        return Skip(format!("dbp15k-jape/zh-en not found under ${DATA_ENV}"));
    };
    let reports = match cell_reports(&desc, NO_UNIT, REPRODUCTION_SEEDS) {
        Ok(r) => r,
        Err(e) => return Fail(e.to_string()),
    };
    let h = mean_h1(&reports);
    let within = |v: f64| (v - REPRODUCTION_TARGET_H1).abs() <= REPRODUCTION_TOLERANCE;
    check(
        within(h.l2r.max(h.r2l)) || within(h.mean),
        format!(
            "{REPRODUCTION_SEEDS} seeds: H@1 L->R {:.2}, R->L {:.2}, mean {:.2} (target {REPRODUCTION_TARGET_H1} ± {REPRODUCTION_TOLERANCE})",
            h.l2r, h.r2l, h.mean
        ),
    )
}

fn ablation_orderings() -> Outcome {
    let Some(desc) = zh_en() else {
        return Skip(format!("dbp15k-jape/zh-en not found under ${DATA_ENV}"));
    };
    let mut h1 = Vec::new();
    for cell in [NO_UNIT, YES_UNIT, NO_SCALED] {
        match cell_reports(&desc, cell, REPRODUCTION_SEEDS) {
            Ok(r) => h1.push(mean_h1(&r).mean),
            Err(e) => return Fail(format!("{cell}: {e}")),
        }
    }
    let (no_unit, yes_unit, no_scaled) = (h1[0], h1[1], h1[2]);
    check(
        no_unit - yes_unit >= WEIGHTS_GAP && no_unit - no_scaled >= INIT_GAP,
        format!(
            "H@1 no/unit {no_unit:.2}, yes/unit {yes_unit:.2} (gap {:.2}, need {WEIGHTS_GAP}), no/scaled {no_scaled:.2} (gap {:.2}, need {INIT_GAP})",
            no_unit - yes_unit,
            no_unit - no_scaled
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. adjacency variants

fn adjacency_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..ADJACENCY_GRAPHS {
        let n = rng.random_range(1..30);
        let r = rng.random_range(1..6);
        let m = rng.random_range(0..80);
        let g = random_graph(&mut rng, n, r, m);
        let ones = RelationWeights::uniform(r, 1.0);
        for normalization in [Normalization::Row, Normalization::Symmetric] {
            let fun_cfg = AdjacencyConfig {
                variant: AdjacencyVariant::Functionality,
                clamp: false,
                normalization,
                ..AdjacencyConfig::default()
            };
            let count_cfg = AdjacencyConfig {
                variant: AdjacencyVariant::Count,
                normalization,
                ..AdjacencyConfig::default()
            };
            let f = unnormalized_adjacency(&g, &fun_cfg, Some(&ones)).unwrap();
            let c = unnormalized_adjacency(&g, &count_cfg, None).unwrap();
            let fd = degree_normalize(&f, normalization).unwrap().to_dense();
            let cd = degree_normalize(&c, normalization).unwrap().to_dense();
            let d = f.to_dense().max_abs_diff(&c.to_dense()).max(fd.max_abs_diff(&cd));
            if !(d <= ADJACENCY_TOLERANCE) {
                return Fail(format!("graph {i} ({normalization}): max difference {d:e}"));
            }
            worst = worst.max(d);
        }
    }
    Pass(format!(
        "{ADJACENCY_GRAPHS} graphs, raw and normalized, max difference {worst:e}"
    ))
}

// ---------------------------------------------------------------------------
// 9. toy recovery

fn toy_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::new(DatasetSource::ToyCycles { nodes: 8, seeds: 4 });
    c.split.enabled = false;
    c.training.n_epochs = TOY_EPOCHS;
    c.with_seed(seed)
}

fn toy_recovery() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    for seed in 0..5 {
        let r = match execute(&toy_config(seed), None) {
            Ok(r) => r.report,
            Err(e) => return Fail(format!("seed {seed}: {e}")),
        };
        if r.split.train != 4 || r.split.test != 4 {
            return Fail(format!("seed {seed}: split {:?}", r.split));
        }
        let (a, b) = (r.test.left_to_right.hits(1), r.test.right_to_left.hits(1));
        if a != 100.0 || b != 100.0 {
            return Fail(format!("seed {seed}: H@1 {a} / {b} after {TOY_EPOCHS} epochs"));
        }
        lines.push(seed.to_string());
    }
    let t = start.elapsed();
    check(
        t < TOY_BUDGET,
        format!(
            "8-cycles, 4 seed pairs, d = 200, {TOY_EPOCHS} epochs: H@1 = 100 both directions for seeds {} in {t:.2?}",
            lines.join(",")
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. determinism

fn rerun_matches(cfg: &RunConfig, threads: usize) -> Result<(), String> {
    let first = run_single(cfg, None).map_err(|e| e.to_string())?;
    let dir = run_dir(cfg);
    let persisted = RunConfig::load(&dir.join(CONFIG_FILE)).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let again = pool.install(|| execute(&persisted, None)).map_err(|e| e.to_string())?;
    let saved = load_report(&dir).map_err(|e| e.to_string())?;
    let loss_file = std::fs::read_to_string(dir.join(LOSS_FILE)).map_err(|e| e.to_string())?;
    let mut loss_again = Vec::new();
    kgalign::training::write_loss_tsv(&again.losses, &mut loss_again).unwrap();
    if saved.test != again.report.test || saved.validation != again.report.validation {
        return Err(format!("{}: metrics differ on re-run ({threads} threads)", cfg.run_id()));
    }
    if saved != first.report || loss_file.as_bytes() != loss_again.as_slice() {
        return Err(format!("{}: report or loss trace differs", cfg.run_id()));
    }
    Ok(())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut plain = toy_config(3);
    plain.training.n_epochs = 50;
    plain.output.dir = tmp.path().to_path_buf();
    let mut weighted = plain.clone();
    weighted.dataset = DatasetSource::ToyCycles { nodes: 40, seeds: 30 };
    weighted.split.enabled = true;
    weighted.split.train_fraction = 0.5;
    weighted.encoder.use_weights = true;
    weighted.encoder.n_layers = 3;
    weighted.encoder.dim = 32;
    weighted.training.optimizer = kgalign::OptimizerKind::Sgd;
    weighted.training.learning_rate = 0.01;
    weighted.encoder.init = InitScale::Scaled;
    for cfg in [&plain, &weighted] {
        for threads in [1, 4] {
            if let Err(e) = rerun_matches(cfg, threads) {
                return Fail(e);
            }
        }
    }
    Pass("2 persisted runs re-executed from config.txt with 1 and 4 threads: identical reports and loss traces".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric oracle equivalence", metric_oracle),
        ("gradient correctness", gradient_check),
        ("weightless parameter count", parameter_count),
        ("grid cardinality", grid_cardinality),
        ("dataset golden statistics", golden_statistics),
        ("desk-scale reproduction", reproduction),
        ("ablation orderings", ablation_orderings),
        ("adjacency variant equivalence", adjacency_equivalence),
        ("toy exact recovery", toy_recovery),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
