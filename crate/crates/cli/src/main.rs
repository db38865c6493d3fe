use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rem_aging::conditions::{check_conditions, ConditionOptions};
use rem_aging::experiment::{self, ExperimentConfig, Tolerance};
use rem_aging::landscape::{beta_for_alpha, LandscapeParams, ScaleSpec};
use rem_aging::limits::{asl_cdf, overshoot_correlation, sample_prm_marks, SubordinatorSpec};
use rem_aging::walk::TransitionTable;

#[derive(Parser)]
#[command(name = "rem-aging", version, about = "Aging experiments for the Random Energy Model")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "REM_AGING_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the correlation experiments of a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `output`, else `results`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the convergence conditions on one sampled landscape.
    Conditions(ConditionArgs),
    /// Limit objects: arcsine tables, Poisson marks, subordinator overshoots.
    Limits {
        #[command(subcommand)]
        what: LimitsCommand,
    },
    /// Compare two correlation CSVs cell by cell.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Allowed difference in pooled standard errors.
        #[arg(long, default_value_t = 3.0)]
        k_se: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pool result files and check each cell against its regime target.
    Summarize {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = Tolerance::default().abs)]
        abs_tol: f64,
        #[arg(long, default_value_t = Tolerance::default().ci_mult)]
        ci_mult: f64,
        #[arg(long, default_value_t = Tolerance::default().short_min)]
        short_min: f64,
    },
    /// Exact walk transition probabilities p^l(d) as CSV.
    TabulateWalk {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 20)]
        l_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConditionArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, conflicts_with = "alpha")]
    beta: Option<f64>,
    /// Target α(ε); sets β = β_c(ε)/α.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    u: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1")]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ConditionOptions::default().skeletons)]
    skeletons: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LimitsCommand {
    /// Table of Asl_α(u) on an even grid of [0, 1].
    Asl {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First K marks γ_k = Γ_k^{-1/α}.
    Marks {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// P(range of a stable subordinator avoids (t, t(1+ρ))).
    Overshoot {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        /// Small-jump cutoff as a fraction of t.
        #[arg(long, default_value_t = 1e-6)]
        cutoff: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when the command ran but a check failed.
fn run(cli: Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, out),
        Command::Conditions(args) => conditions(args),
        Command::Limits { what } => limits(what),
        Command::Compare { a, b, k_se, out } => {
            let report = experiment::compare_files(&a, &b, k_se)?;
            let mut s = String::from("t,rho,p_a,p_b,diff,pooled_se,within\n");
            for c in &report.cells {
                writeln!(s, "{},{},{},{},{},{},{}", c.t, c.rho, c.p_a, c.p_b, c.diff, c.pooled_se, c.within)?;
            }
            emit(out.as_deref(), &s)?;
            Ok(report.all_within)
        }
        Command::Summarize { inputs, out, abs_tol, ci_mult, short_min } => {
            let summary = experiment::summarize(&inputs, Tolerance { abs: abs_tol, ci_mult, short_min })?;
            print!("{}", summary.table());
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                experiment::write_rows(&dir.join("summary.csv"), &summary.pooled_rows())?;
                experiment::write_checks(&dir.join("checks.csv"), &summary)?;
            }
            Ok(!summary.failed())
        }
        Command::TabulateWalk { n, l_max, out } => {
            let table = TransitionTable::new(n, l_max)?;
            let mut s = String::from("n,l,d,p\n");
            for l in 0..=l_max {
                for d in 0..=n {
                    writeln!(s, "{n},{l},{d},{}", table.get(d, l))?;
                }
            }
            emit(out.as_deref(), &s)?;
            Ok(true)
        }
    }
}

fn simulate(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let result = experiment::run(&cfg, &dir)?;
    for e in &result.manifest.experiments {
        eprintln!(
            "{}: {} ({:.1} s){}",
            e.name,
            e.status,
            e.wall_time_s,
            e.error.as_deref().map(|m| format!(": {m}")).unwrap_or_default()
        );
    }
    print!("{}", result.summary.table());
    Ok(result.ok() && !result.summary.failed())
}

fn conditions(a: ConditionArgs) -> Result<bool> {
    let beta = match (a.beta, a.alpha) {
        (Some(b), None) => b,
        (None, Some(al)) => beta_for_alpha(a.eps, al),
        _ => bail!("give exactly one of --beta and --alpha"),
    };
    let params = LandscapeParams::new(a.n, beta, ScaleSpec::Epsilon(a.eps), a.seed)?;
    let opts = ConditionOptions { seed: a.seed, skeletons: a.skeletons, ..ConditionOptions::default() };
    let report = check_conditions(&params, a.t, &a.u, &a.delta, opts)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(a.out.as_deref(), &text)?;
    let p = report.pass;
    Ok(p.a0 && p.a1 && p.a2 && p.a3)
}

fn limits(what: LimitsCommand) -> Result<bool> {
    match what {
        LimitsCommand::Asl { alpha, points, out } => {
            if points < 2 {
                bail!("--points must be at least 2");
            }
            let mut s = String::from("u,asl\n");
            for i in 0..points {
                let u = i as f64 / (points - 1) as f64;
                writeln!(s, "{u},{}", asl_cdf(alpha, u)?)?;
            }
            emit(out.as_deref(), &s)
        }
        LimitsCommand::Marks { alpha, k, seed, out } => {
            let marks = sample_prm_marks(alpha, k, seed)?;
            let mut s = String::from("k,gamma\n");
            for (i, g) in marks.gamma.iter().enumerate() {
                writeln!(s, "{},{g}", i + 1)?;
            }
            emit(out.as_deref(), &s)
        }
        LimitsCommand::Overshoot { alpha, t, rho, replicas, cutoff, seed, out } => {
            let spec = SubordinatorSpec::Stable { alpha };
            let est = overshoot_correlation(&spec, t, &rho, replicas, cutoff * t, seed)?;
            let mut s = String::from("t,rho,p_hat,ci95,asl_target\n");
            for e in &est {
                writeln!(s, "{},{},{},{},{}", e.t, e.rho, e.p_hat, e.ci_half_width, asl_cdf(alpha, 1.0 / (1.0 + e.rho))?)?;
            }
            emit(out.as_deref(), &s)
        }
    }
    .map(|()| true)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
