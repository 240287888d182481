use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rdw_core::campaign::{
    self, CampaignConfig, DESK_PATHS, DESK_WAYPOINTS, FULL_PATHS, FULL_WAYPOINTS,
};
use rdw_core::complexity::{complexity_ratio, DEFAULT_SPACING};
use rdw_core::metrics::{self, METRICS_CSV_HEADER};
use rdw_core::simulation::{self, frames_from_csv};
use rdw_core::{builtin_pair, load_pair, BuiltinPair, ControllerKind, EnvironmentPair, SimConfig};

const WORKERS_ENV: &str = "RDW_BENCH_WORKERS";

#[derive(Parser)]
#[command(
    name = "rdw-bench",
    version,
    about = "Redirected-walking controller benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write its artifacts.
    Run(RunArgs),
    /// Print the complexity report of a pair as JSON.
    Complexity {
        /// Built-in pair (A, B, C) or a pair JSON file.
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = DEFAULT_SPACING)]
        spacing: f64,
    },
    /// Print generated virtual paths as CSV.
    Paths {
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = DESK_PATHS)]
        paths: usize,
        #[arg(long, default_value_t = DESK_WAYPOINTS)]
        waypoints: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute metrics from stored trial CSVs (files or directories).
    Replay {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        walk_speed: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Built-in pair (A, B, C) or a pair JSON file.
    #[arg(long)]
    pair: String,
    /// Comma-separated subset of arc, s2c, apf.
    #[arg(
        long,
        alias = "controller",
        value_delimiter = ',',
        default_value = "arc,s2c,apf"
    )]
    controllers: Vec<ControllerKind>,
    #[arg(long, default_value_t = DESK_PATHS)]
    paths: usize,
    #[arg(long, default_value_t = DESK_WAYPOINTS)]
    waypoints: usize,
    /// Full-scale profile (100 paths of 100 waypoints).
    #[arg(long, conflicts_with_all = ["paths", "waypoints"])]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short, default_value = "rdw-output")]
    output: PathBuf,
    /// Worker threads (0 = all cores). Overridden by RDW_BENCH_WORKERS.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Start the physical user on the virtual start.
    #[arg(long)]
    fixed_start: bool,
}

fn resolve_pair(arg: &str) -> Result<(EnvironmentPair, String)> {
    if let Some(b) = BuiltinPair::parse(arg) {
        return Ok((builtin_pair(b), b.label().to_string()));
    }
    let text = fs::read_to_string(arg).with_context(|| format!("reading pair file {arg}"))?;
    let pair =
        load_pair(&text).map_err(|e| anyhow::anyhow!("{}: {} ({})", e.code(), e, e.path()))?;
    let label = pair.name.clone();
    Ok((pair, label))
}

fn workers(flag: usize) -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{WORKERS_ENV}={v} is not a count")),
        Err(_) => Ok(flag),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let (pair, label) = resolve_pair(&args.pair)?;
    let (n_paths, n_waypoints) = if args.full {
        (FULL_PATHS, FULL_WAYPOINTS)
    } else {
        (args.paths, args.waypoints)
    };
    let mut controllers: Vec<ControllerKind> = Vec::new();
    for c in args.controllers {
        if !controllers.contains(&c) {
            controllers.push(c);
        }
    }
    let config = CampaignConfig {
        pair,
        label,
        controllers,
        n_paths,
        n_waypoints,
        seed: args.seed,
        fixed_start: args.fixed_start,
        workers: workers(args.workers)?,
        sim: SimConfig::default(),
    };
    let outcome = campaign::run_campaign_to_dir(&config, &args.output).with_context(|| {
        format!(
            "campaign failed; partial output in {}",
            args.output.display()
        )
    })?;
    let mut out = format!("controller,{METRICS_CSV_HEADER}\n");
    for c in &outcome.controllers {
        for (i, t) in c.trials.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{}",
                c.kind.slug(),
                metrics::metrics_csv_row(i, &t.metrics)
            );
        }
    }
    print!("{out}");
    eprintln!("wrote {}", args.output.display());
    Ok(())
}

fn replay_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        bail!("no trial CSVs found");
    }
    Ok(files)
}

fn replay_one(path: &Path, walk_speed: f64) -> Result<metrics::TrialMetrics> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (frames, resets) = frames_from_csv(&text).with_context(|| path.display().to_string())?;
    metrics::metrics_from_frames(&frames, resets.len(), walk_speed)
        .with_context(|| path.display().to_string())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args)?,
        Command::Complexity { pair, spacing } => {
            let (pair, _) = resolve_pair(&pair)?;
            let report = complexity_ratio(&pair, spacing)?;
            print!("{}", campaign::complexity_json(&report));
        }
        Command::Paths {
            pair,
            paths,
            waypoints,
            seed,
        } => {
            let (pair, _) = resolve_pair(&pair)?;
            let mut out = String::from("path,index,x,y\n");
            for i in 0..paths {
                let spec =
                    simulation::generate_path(&pair, waypoints, campaign::path_seed(seed, i))
                        .with_context(|| format!("path {i}"))?;
                for line in simulation::path_to_csv(&spec).lines().skip(1) {
                    let _ = writeln!(out, "{i},{line}");
                }
            }
            print!("{out}");
        }
        Command::Replay { inputs, walk_speed } => {
            let mut out = format!("file,{}\n", &METRICS_CSV_HEADER["path,".len()..]);
            for file in replay_inputs(&inputs)? {
                let m = replay_one(&file, walk_speed)?;
                let row = metrics::metrics_csv_row(0, &m);
                let _ = writeln!(out, "{},{}", file.display(), &row[2..]);
            }
            print!("{out}");
        }
    }
    Ok(())
}
