use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kgalign::datasets::{self, reference_statistics, DatasetDescriptor};
use kgalign::runner::config::{parse_dataset_key, resolve_data_root};
use kgalign::runner::grid::{enumerate_grid, leaderboard, GridSpec};
use kgalign::runner::run::{evaluate_run_dir, report_text, run_dir};
use kgalign::runner::{run_ablation, run_grid, run_single, AblationSpec, RunConfig, RunReport};
use kgalign::{Error, Result};

#[derive(Parser)]
#[command(name = "kgalign", version, about = "Weightless GCN entity alignment experiments")]
struct Cli {
    /// Root holding `<family>/<subset>` dataset directories
    /// (default: $KGALIGN_DATA, then ./data).
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,

    /// Worker threads for numeric kernels (1 = single-threaded).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print machine-readable JSON instead of text tables.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset sizes, compared with the published ones.
    Stats {
        /// `family:subset`, e.g. dbp15k-jape:zh-en
        dataset: String,
        /// Dataset directory, overriding the data root.
        #[arg(long)]
        root: Option<PathBuf>,
        /// Pin the current files in a checksum manifest.
        #[arg(long)]
        write_manifest: bool,
    },
    /// Train and evaluate one config; artifacts go to `output.dir/<run id>/`.
    Train { config: PathBuf },
    /// Re-evaluate a persisted run directory.
    Evaluate { run_dir: PathBuf },
    /// Run the hyperparameter grid described by a config file.
    Grid {
        config: PathBuf,
        /// Only enumerate and count the runs.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run the weights × initialization ablation.
    Ablate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": { "category": e.category(), "message": e.to_string() }
            });
            eprintln!("{body}");
            ExitCode::from(e.exit_code().clamp(1, 255) as u8)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn print_report(report: &RunReport, json: bool) -> Result<()> {
    if json {
        print_json(report)
    } else {
        print!("{}", report_text(report));
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads {n}: {e}")))?;
    }
    let data_root = cli.data_root.as_deref();
    match cli.command {
        Command::Stats {
            dataset,
            root,
            write_manifest,
        } => {
            let (family, subset) = parse_dataset_key(&dataset)?;
            let desc = match root {
                Some(r) => DatasetDescriptor::new(family, &subset, r)?,
                None => DatasetDescriptor::under(&resolve_data_root(data_root), family, &subset)?,
            };
            if write_manifest {
                let path = datasets::write_manifest(&desc)?;
                eprintln!("wrote {}", path.display());
            }
            let loaded = datasets::load_with_info(&desc)?;
            let stats = loaded.statistics();
            let reference = reference_statistics(family, &subset);
            if cli.json {
                print_json(&serde_json::json!({
                    "dataset": desc.key(),
                    "statistics": stats,
                    "published": reference.map(|r| serde_json::json!({
                        "left": r.left, "right": r.right,
                        "alignments": r.alignments,
                        "directed_alignments": r.directed_alignments,
                    })),
                }))
            } else {
                println!("{}", desc.key());
                print!("{stats}");
                if let Some(r) = reference {
                    let ok = r.left == stats.left
                        && r.right == stats.right
                        && r.alignments == stats.alignments;
                    println!(
                        "published: left {}/{}/{}, right {}/{}/{}, alignments {} ({})",
                        r.left.triples,
                        r.left.entities,
                        r.left.relations,
                        r.right.triples,
                        r.right.entities,
                        r.right.relations,
                        r.alignments,
                        if ok { "match" } else { "differs" }
                    );
                }
                Ok(())
            }
        }
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let result = run_single(&cfg, data_root)?;
            eprintln!("artifacts in {}", run_dir(&cfg).display());
            print_report(&result.report, cli.json)
        }
        Command::Evaluate { run_dir } => {
            let report = evaluate_run_dir(&run_dir, data_root)?;
            print_report(&report, cli.json)
        }
        Command::Grid { config, dry_run } => {
            let (base, spec) = GridSpec::load(&config)?;
            if dry_run {
                let points = enumerate_grid(&base, &spec)?;
                if cli.json {
                    return print_json(&serde_json::json!({ "runs": points.len() }));
                }
                println!("{} runs", points.len());
                return Ok(());
            }
            let outcome = run_grid(&base, &spec, data_root)?;
            if cli.json {
                return print_json(&serde_json::json!({
                    "entries": outcome.entries,
                    "best": outcome.best,
                }));
            }
            print!("{}", leaderboard(&outcome.entries));
            for (cell, e) in &outcome.best {
                println!(
                    "best {cell}: run {} validation H@1 {:.2}",
                    e.run_id,
                    e.validation_hits1.unwrap_or(f64::NAN)
                );
            }
            Ok(())
        }
        Command::Ablate { config } => {
            let (base, spec) = AblationSpec::load(&config)?;
            let table = run_ablation(&base, &spec, data_root)?;
            if cli.json {
                return print_json(&table);
            }
            print!("{}", table.to_text());
            for c in &table.cells {
                for f in &c.failures {
                    eprintln!("failed {} {}: {f}", c.dataset, c.cell);
                }
            }
            Ok(())
        }
    }
}
