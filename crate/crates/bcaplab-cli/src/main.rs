mod artifacts;
mod commands;
mod config;

use artifacts::Run;
use bcaplab::{Error, Result};
use clap::{Args, Parser, Subcommand};
use commands::Prepared;
use serde::Serialize;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bcaplab", version, about = "Branching capacity of branching random walks")]
struct Cli {
    /// TOML file; top-level keys are shared, [subcommand] tables are specific.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value = ".bcaplab-cache")]
    cache_dir: PathBuf,
    #[arg(long, global = true)]
    no_cache: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Green's function table and its asymptotic ratio along a ray.
    Green(GreenArgs),
    /// Total-progeny law of critical Galton-Watson trees.
    TreeSizeLaw(TreeArgs),
    /// Monte Carlo probability that the tree visits K.
    HitMc(McArgs),
    /// Monte Carlo escape probability from K.
    EscapeMc(McArgs),
    /// Deterministic fields on a box and their identities.
    Solve(SolveArgs),
    /// Branching capacity by escape sum, far field and harmonic measure.
    Bcap(BcapArgs),
    /// Power series of the radial profile.
    SnakeSeries(SeriesArgs),
    /// Radial profile by shooting.
    SnakeShoot(ShootArgs),
    /// Maximal leading coefficient from the series.
    SnakeA0(A0Args),
    /// Riesz equilibrium measure and capacity of a discretized compact.
    Riesz(RieszArgs),
    /// Rescaled capacities of dilated balls against the continuum value.
    Scaling(ScalingArgs),
}

#[derive(Args, Serialize)]
struct GreenArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    radius: Option<i32>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    direction: Option<Vec<i32>>,
}

#[derive(Args, Serialize)]
struct TreeArgs {
    #[arg(long)]
    offspring: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    n_lo: Option<usize>,
    #[arg(long)]
    n_hi: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize)]
struct McArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    set: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x: Option<Vec<i32>>,
    #[arg(long)]
    offspring: Option<String>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    vmax: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// critical | adjoint
    #[arg(long)]
    root: Option<String>,
    #[arg(long)]
    r_stop: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    offspring: Option<String>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long = "box")]
    #[serde(rename = "box")]
    r_box: Option<i32>,
    /// dirichlet_zero | matched_asymptotic
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    symmetry: Option<bool>,
    #[arg(long)]
    identities: Option<bool>,
    #[arg(long)]
    b_radius: Option<f64>,
}

#[derive(Args, Serialize)]
struct BcapArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    offspring: Option<String>,
    #[arg(long)]
    step: Option<String>,
    /// sum | far | harmonic | all
    #[arg(long)]
    method: Option<String>,
    /// solver | mc
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "box")]
    #[serde(rename = "box")]
    r_box: Option<i32>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    vmax: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<i32>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    b_radius: Option<f64>,
}

#[derive(Args, Serialize)]
struct SeriesArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    terms: Option<usize>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    probes: Option<Vec<f64>>,
}

#[derive(Args, Serialize)]
struct ShootArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    t_far: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    probes: Option<Vec<f64>>,
    #[arg(long)]
    integral_t_max: Option<f64>,
}

#[derive(Args, Serialize)]
struct A0Args {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    t_probe: Option<f64>,
    #[arg(long)]
    terms: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Serialize)]
struct RieszArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// ball:<r>[@c] | sphere:<r>[@c] | box:<lo>;<hi> | file:<path>
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    weights: Option<bool>,
    #[arg(long)]
    refine: Option<bool>,
}

#[derive(Args, Serialize)]
struct ScalingArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<u32>>,
    #[arg(long)]
    offspring: Option<String>,
    #[arg(long)]
    step: Option<String>,
    /// solver | mc
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    box_factor: Option<f64>,
    #[arg(long)]
    max_box: Option<i32>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    target: Option<bool>,
}

fn prepare(cmd: &Cmd, cfg: &toml::Table) -> Result<(&'static str, Prepared)> {
    use config::resolve;
    Ok(match cmd {
        Cmd::Green(a) => ("green", commands::green(resolve("green", cfg, a)?)?),
        Cmd::TreeSizeLaw(a) => ("tree-size-law", commands::tree_size(resolve("tree-size-law", cfg, a)?)?),
        Cmd::HitMc(a) => ("hit-mc", commands::mc(resolve("hit-mc", cfg, a)?, false)?),
        Cmd::EscapeMc(a) => ("escape-mc", commands::mc(resolve("escape-mc", cfg, a)?, true)?),
        Cmd::Solve(a) => ("solve", commands::solve(resolve("solve", cfg, a)?)?),
        Cmd::Bcap(a) => ("bcap", commands::bcap(resolve("bcap", cfg, a)?)?),
        Cmd::SnakeSeries(a) => ("snake-series", commands::snake_series(resolve("snake-series", cfg, a)?)?),
        Cmd::SnakeShoot(a) => ("snake-shoot", commands::snake_shoot(resolve("snake-shoot", cfg, a)?)?),
        Cmd::SnakeA0(a) => ("snake-a0", commands::snake_a0(resolve("snake-a0", cfg, a)?)?),
        Cmd::Riesz(a) => ("riesz", commands::riesz(resolve("riesz", cfg, a)?)?),
        Cmd::Scaling(a) => ("scaling", commands::scaling(resolve("scaling", cfg, a)?)?),
    })
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    let cfg = config::load_config(cli.config.as_deref())?;
    let (name, prep) = prepare(&cli.cmd, &cfg)?;
    let run = Run {
        subcommand: name,
        config: prep.config,
        sources: &prep.sources.0,
        out: cli.out,
        cache_dir: cli.cache_dir,
        use_cache: !cli.no_cache,
        threads,
    };
    let (a, hit) = match run.cached() {
        Some(a) => (a, true),
        None => ((prep.job)()?, false),
    };
    run.emit(&a, hit)?;
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&a.summary).unwrap());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Io(_) => 1,
        Error::NonConvergence(_) => 2,
        Error::Budget(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = Error::Validation(e.to_string().trim().to_string());
            report(&err);
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(exit_code(&e))
        }
    }
}

fn report(e: &Error) {
    let v = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": exit_code(e) } });
    eprintln!("{v}");
}
