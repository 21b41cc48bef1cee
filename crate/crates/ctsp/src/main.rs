//! Command-line front end for the commute trip sharing solver.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ctsp::cluster;
use ctsp::enumerate::{dump_pool, enumerate_all, EnumerateOptions};
use ctsp::harness::{
    self, run_algorithm, ExperimentConfig, PopulationSpec, AGGREGATE_HEADER, RUN_RECORD_HEADER,
};
use ctsp::model::Instance;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Parser)]
#[command(name = "ctsp", about = "Commute trip sharing solver", version)]
struct Cli {
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance from a population spec.
    Gen {
        /// Population spec JSON; omit for a built-in example.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Commuter count when no spec file is given.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split an instance into clusters by home location.
    Cluster {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        max_size: usize,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Enumerate the full route pool and dump it as JSON lines.
    Enumerate {
        #[arg(long)]
        instance: PathBuf,
        /// Keep every feasible route instead of per-combination minima.
        #[arg(long)]
        keep_all_feasible: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact solve by full route enumeration plus a set-partitioning MIP.
    SolveRea {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        time_limit: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append a stats CSV row to this file.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Exact solve by branch and price.
    SolveBpa {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 43200)]
        time_limit: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Time-budgeted root-node heuristic (fleet-size objective).
    Heuristic {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 480)]
        t_rmp: u64,
        #[arg(long, default_value_t = 120)]
        t_mip: u64,
        #[arg(long)]
        relax_forbidden: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Run the configured experiment grid and write CSV results.
    Bench {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check that both exact algorithms (and a brute-force search on tiny
    /// instances) agree.
    CrossValidate {
        #[arg(long)]
        instance: PathBuf,
        /// Largest instance the brute-force search is attempted on.
        #[arg(long, default_value_t = 6)]
        brute_limit: usize,
    },
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    Instance::from_json(value).map_err(|e| anyhow::anyhow!("{e}"))
}

fn write_solution(sol: &ctsp::solution::Solution, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(sol)?;
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn append_stats(path: Option<&Path>, row: &str) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let line = if path.exists() {
        format!("{row}\n")
    } else {
        format!("{RUN_RECORD_HEADER}\n{row}\n")
    };
    fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| std::io::Write::write_all(&mut f, line.as_bytes()))?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("thread pool")?;
    }
    match cli.command {
        Command::Gen {
            spec,
            count,
            seed,
            out,
        } => {
            let spec: PopulationSpec = match spec {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => PopulationSpec::example(count, seed),
            };
            let inst = harness::generate_instance(&spec)?;
            fs::write(&out, serde_json::to_string(&inst.to_json())?)?;
            eprintln!(
                "wrote {} commuters over {} sites to {}",
                inst.n(),
                inst.sites.len(),
                out.display()
            );
        }
        Command::Cluster {
            instance,
            max_size,
            restarts,
            seed,
            out_dir,
        } => {
            let inst = load_instance(&instance)?;
            let clustering = cluster::cluster_commuters(&inst, max_size, restarts, seed)?;
            fs::create_dir_all(&out_dir)?;
            let parts = cluster::split_instance(&inst, &clustering);
            let mut manifest = Vec::new();
            for (i, (members, sub)) in parts.iter().enumerate() {
                let file = out_dir.join(format!("cluster_{i:03}.json"));
                fs::write(&file, serde_json::to_string(&sub.to_json())?)?;
                manifest.push(serde_json::json!({
                    "file": file.file_name().unwrap().to_str(),
                    "size": members.len(),
                    "members": members,
                }));
            }
            let manifest = serde_json::json!({
                "seed": seed,
                "restarts": restarts,
                "max_size": max_size,
                "objective": clustering.objective,
                "clusters": manifest,
            });
            fs::write(
                out_dir.join("manifest.json"),
                serde_json::to_string_pretty(&manifest)?,
            )?;
            eprintln!(
                "{} clusters, assignment objective {:.1}",
                parts.len(),
                clustering.objective
            );
        }
        Command::Enumerate {
            instance,
            keep_all_feasible,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let pool = enumerate_all(
                &inst,
                &EnumerateOptions {
                    keep_all_feasible,
                    max_riders: None,
                },
            );
            match out {
                Some(p) => {
                    let f = fs::File::create(&p)?;
                    dump_pool(&pool, std::io::BufWriter::new(f))?;
                }
                None => dump_pool(&pool, std::io::stdout().lock())?,
            }
            eprintln!(
                "{} routes ({:?} per rider count)",
                pool.len(),
                pool.stats.per_k
            );
        }
        Command::SolveRea {
            instance,
            time_limit,
            out,
            stats,
        } => {
            let inst = load_instance(&instance)?;
            let (sol, rec) = run_algorithm(
                &inst,
                "rea",
                time_limit.map(Duration::from_secs),
                Duration::ZERO,
                Duration::ZERO,
            )?;
            write_solution(&sol, out.as_deref())?;
            append_stats(stats.as_deref(), &rec.csv_row())?;
            eprintln!(
                "vehicles={} distance={} gap={:.4}",
                sol.vehicle_count, sol.total_distance, sol.gap
            );
        }
        Command::SolveBpa {
            instance,
            time_limit,
            out,
            stats,
        } => {
            let inst = load_instance(&instance)?;
            let (sol, rec) = run_algorithm(
                &inst,
                "bpa",
                Some(Duration::from_secs(time_limit)),
                Duration::ZERO,
                Duration::ZERO,
            )?;
            write_solution(&sol, out.as_deref())?;
            append_stats(stats.as_deref(), &rec.csv_row())?;
            eprintln!(
                "vehicles={} distance={} gap={:.4} nodes={}",
                sol.vehicle_count, sol.total_distance, sol.gap, rec.tree_nodes
            );
        }
        Command::Heuristic {
            instance,
            t_rmp,
            t_mip,
            relax_forbidden,
            out,
            stats,
        } => {
            let inst = load_instance(&instance)?;
            let algo = if relax_forbidden {
                "heuristic-relaxed"
            } else {
                "heuristic"
            };
            let (sol, rec) = run_algorithm(
                &inst,
                algo,
                None,
                Duration::from_secs(t_rmp),
                Duration::from_secs(t_mip),
            )?;
            write_solution(&sol, out.as_deref())?;
            append_stats(stats.as_deref(), &rec.csv_row())?;
            eprintln!(
                "vehicles={} distance={} gap={:.4}",
                sol.vehicle_count, sol.total_distance, sol.gap
            );
        }
        Command::Bench { grid, out } => {
            let config: ExperimentConfig = serde_json::from_str(&fs::read_to_string(&grid)?)
                .with_context(|| format!("parsing {}", grid.display()))?;
            let result = harness::run_experiment(&config)?;
            fs::create_dir_all(&out)?;
            let mut runs = String::from(RUN_RECORD_HEADER);
            for r in &result.runs {
                runs.push('\n');
                runs.push_str(&r.csv_row());
            }
            fs::write(out.join("runs.csv"), runs)?;
            let mut aggs = String::from(AGGREGATE_HEADER);
            for a in &result.aggregates {
                aggs.push('\n');
                aggs.push_str(&a.csv_row());
            }
            fs::write(out.join("aggregates.csv"), aggs)?;
            eprintln!(
                "wrote {} runs / {} aggregate rows to {}",
                result.runs.len(),
                result.aggregates.len(),
                out.display()
            );
        }
        Command::CrossValidate {
            instance,
            brute_limit,
        } => {
            let inst = load_instance(&instance)?;
            match harness::cross_validate(&inst, brute_limit) {
                Ok(report) => {
                    println!("{}", serde_json::to_string_pretty(&report)?);
                }
                Err(e) => bail!("cross-validation failed: {e}"),
            }
        }
    }
    Ok(())
}
