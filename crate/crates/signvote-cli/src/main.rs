//! `signvote`: run sign-SGD experiments, sweep grids, print analytic error
//! bounds, and verify the bounds by Monte Carlo.
//!
//! Exit codes: 0 success, 1 runtime or verification failure, 2 divergence
//! detected, 3 invalid configuration or usage.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use signvote::bounds::exponent_report;
use signvote::config::{ChannelConfig, DecoderKind, ExperimentConfig};
use signvote::error::Error as SvError;
use signvote::montecarlo::{
    all_hold, large_deviation_sweep, flip_rate_grid, verify_exponent_limit, verify_imperfect_bound,
    verify_wmv_bound, BoundCheck, Verdict, VerifyOptions,
};
use signvote::output::write_run;
use signvote::rng::{Purpose, RngStream, StreamId};
use signvote::simulate;

#[derive(Parser)]
#[command(
    name = "signvote",
    version,
    about = "Distributed sign-SGD simulator with majority-vote, weighted, and federated-voting aggregation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a TOML config; writes a per-round CSV and a
    /// JSON metadata file.
    Run(RunArgs),
    /// Run a grid of experiments over batch modes, worker counts, decoders,
    /// and seeds; writes per-run outputs plus a summary CSV.
    Sweep(SweepArgs),
    /// Print the analytic error-exponent report for a config.
    Bounds(BoundsArgs),
    /// Run the Monte Carlo bound-verification suites.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSV and metadata files.
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Basename for the output files; defaults to
    /// `<config stem>_<decoder>_s<seed>`.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Base experiment TOML; grid axes override its fields.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated batch modes (1-4), e.g. `1,2,3,4`.
    #[arg(long)]
    modes: Option<String>,
    /// Comma-separated worker counts.
    #[arg(long)]
    workers: Option<String>,
    /// Comma-separated decoders (mv, wmv_perfect, fv, signgd, sgd).
    #[arg(long)]
    decoders: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Normalized-variance constant; estimated from the objective at the
    /// initial point when omitted (real channel mode).
    #[arg(long)]
    sigma: Option<f64>,
    /// Weight-uncertainty band for the imperfect-weight bound.
    #[arg(long, default_value_t = 0.0)]
    delta_min: f64,
    #[arg(long, default_value_t = 0.0)]
    delta_max: f64,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Monte Carlo trials per sampled configuration.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Number of sampled (M, p) configurations per suite.
    #[arg(long, default_value_t = 100)]
    configs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Weight perturbation band for the imperfect-weight suite.
    #[arg(long, default_value_t = 0.2)]
    delta_min: f64,
    #[arg(long, default_value_t = 0.2)]
    delta_max: f64,
    /// Samples for the uniform-p exponent-limit check.
    #[arg(long, default_value_t = 1_000_000)]
    exponent_samples: u64,
    /// Write all checks as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(3);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Bounds(args) => cmd_bounds(args),
        Cmd::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            if e.chain().any(is_config_error) {
                eprintln!("invalid config: {e:#}");
                ExitCode::from(3)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn is_config_error(e: &(dyn std::error::Error + 'static)) -> bool {
    matches!(e.downcast_ref::<SvError>(), Some(SvError::InvalidConfig(_)))
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let cfg = ExperimentConfig::from_toml_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(cfg)
}

fn default_name(config_path: &Path, cfg: &ExperimentConfig) -> String {
    let stem = config_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run");
    format!("{stem}_{}_s{}", cfg.decoder.name(), cfg.seed)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let name = args
        .name
        .unwrap_or_else(|| default_name(&args.config, &cfg));
    let started = std::time::Instant::now();
    let out = simulate::run(&cfg)?;
    let (csv, meta) = write_run(&args.out_dir, &name, &out)?;
    println!(
        "{} rounds in {:.2}s  final f = {:.6e}  bits = {}",
        out.records.len(),
        started.elapsed().as_secs_f64(),
        out.metadata.final_f,
        out.metadata.total_bits_up + out.metadata.total_bits_down
    );
    println!("wrote {}", csv.display());
    println!("wrote {}", meta.display());
    if out.diverged() {
        eprintln!(
            "divergence detected at round {}",
            out.metadata.diverged_at.unwrap_or_default()
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad {what} entry `{x}`: {e}"))
        })
        .collect()
}

fn parse_decoders(s: &str) -> Result<Vec<DecoderKind>> {
    s.split(',')
        .map(|x| match x.trim() {
            "mv" => Ok(DecoderKind::Mv),
            "wmv_perfect" => Ok(DecoderKind::WmvPerfect),
            "fv" => Ok(DecoderKind::Fv),
            "signgd" => Ok(DecoderKind::Signgd),
            "sgd" => Ok(DecoderKind::Sgd),
            other => Err(anyhow::anyhow!("unknown decoder `{other}`")),
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let base = load_config(&args.config)?;
    let modes: Vec<Option<u8>> = match &args.modes {
        Some(s) => parse_list::<u8>(s, "mode")?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let workers: Vec<Option<usize>> = match &args.workers {
        Some(s) => parse_list::<usize>(s, "workers")?
            .into_iter()
            .map(Some)
            .collect(),
        None => vec![None],
    };
    let decoders: Vec<Option<DecoderKind>> = match &args.decoders {
        Some(s) => parse_decoders(s)?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let seeds: Vec<Option<u64>> = match &args.seeds {
        Some(s) => parse_list::<u64>(s, "seed")?.into_iter().map(Some).collect(),
        None => vec![None],
    };

    let mut summary = String::from(
        "name,decoder,mode,workers,seed,diverged,final_f,final_err,total_bits\n",
    );
    let mut any_diverged = false;
    for &mode in &modes {
        for &w in &workers {
            for &dec in &decoders {
                for &seed in &seeds {
                    let mut cfg = base.clone();
                    if let Some(mode) = mode {
                        cfg.batch = signvote::config::BatchConfig::mode(mode);
                    }
                    if let Some(w) = w {
                        cfg.workers = w;
                    }
                    if let Some(dec) = dec {
                        cfg.decoder = dec;
                    }
                    if let Some(seed) = seed {
                        cfg.seed = seed;
                    }
                    cfg.validate()?;
                    let name = format!(
                        "sweep_m{}_w{}_{}_s{}",
                        mode.map(|m| m.to_string()).unwrap_or_else(|| "x".into()),
                        cfg.workers,
                        cfg.decoder.name(),
                        cfg.seed
                    );
                    let out = simulate::run(&cfg)?;
                    write_run(&args.out_dir, &name, &out)?;
                    any_diverged |= out.diverged();
                    summary.push_str(&format!(
                        "{name},{},{},{},{},{},{},{},{}\n",
                        cfg.decoder.name(),
                        mode.map(|m| m.to_string()).unwrap_or_else(|| "-".into()),
                        cfg.workers,
                        cfg.seed,
                        out.diverged(),
                        out.metadata.final_f,
                        out.metadata.final_err.unwrap_or(f64::NAN),
                        out.metadata.total_bits_up + out.metadata.total_bits_down,
                    ));
                    println!(
                        "{name}: final f = {:.6e}{}",
                        out.metadata.final_f,
                        if out.diverged() { " (diverged)" } else { "" }
                    );
                }
            }
        }
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let summary_path = args.out_dir.join("sweep_summary.csv");
    std::fs::write(&summary_path, summary)?;
    println!("wrote {}", summary_path.display());
    Ok(if any_diverged {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_bounds(args: BoundsArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let batches = cfg.batch_sizes()?;

    // p per worker: configured directly in synthetic mode, implied by the
    // computing-error bound sigma/sqrt(B) in real mode.
    let (p, sigma): (Vec<f64>, f64) = match &cfg.channel {
        ChannelConfig::Synthetic { p, .. } => {
            let sigma = args.sigma.unwrap_or(1.0);
            (p.clone(), sigma)
        }
        ChannelConfig::Real => {
            let sigma = match args.sigma {
                Some(s) => s,
                None => {
                    let objective =
                        signvote::objective::Objective::build(&cfg.objective, cfg.dim, cfg.seed)?;
                    let mut rng =
                        RngStream::new(cfg.seed, StreamId::new(Purpose::Sigma, 0, 0));
                    let est =
                        objective.estimate_sigma(&objective.initial_point(), 2048, &mut rng)?;
                    println!(
                        "estimated sigma = {:.6} ({} coords excluded)",
                        est.sigma, est.excluded
                    );
                    est.sigma
                }
            };
            let p = batches
                .iter()
                .map(|&b| (sigma / (b as f64).sqrt()).min(1.0 - cfg.clamp_eps))
                .collect();
            (p, sigma)
        }
    };

    let report = exponent_report(&p, &batches, sigma, args.delta_min, args.delta_max)?;
    print!("{}", report.to_table());
    if let Some(path) = args.json {
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn print_bound_checks(title: &str, checks: &[BoundCheck]) {
    println!("== {title} ==");
    for c in checks {
        let verdict = match c.verdict {
            Verdict::Holds => "ok      ",
            Verdict::HoldsVacuously => "vacuous ",
            Verdict::Violated => "VIOLATED",
        };
        let exact = c
            .exact
            .map(|e| format!(" exact={e:.3e}"))
            .unwrap_or_default();
        println!(
            "[{verdict}] {} M={:<2} emp={:.4e}±{:.1e} bound={:.4e}{exact}",
            c.label, c.workers, c.empirical, c.band3, c.bound
        );
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let opts = VerifyOptions {
        trials: args.trials,
        configs: args.configs,
        seed: args.seed,
        ..Default::default()
    };
    let mut ok = true;

    let wmv = verify_wmv_bound(&opts)?;
    print_bound_checks("weighted-majority-vote bound", &wmv);
    ok &= all_hold(&wmv);

    let imperfect = verify_imperfect_bound(&opts, args.delta_min, args.delta_max)?;
    print_bound_checks(
        &format!(
            "imperfect-weight bound (delta_min={}, delta_max={})",
            args.delta_min, args.delta_max
        ),
        &imperfect,
    );
    ok &= all_hold(&imperfect);

    println!("== exponent limit under uniform p ==");
    let limit_checks = verify_exponent_limit(&[0.1, 0.25, 0.5], args.exponent_samples, args.seed)?;
    for c in &limit_checks {
        let verdict = if c.verdict == Verdict::Holds {
            "ok      "
        } else {
            "VIOLATED"
        };
        println!(
            "[{verdict}] a={} mc={:.6}±{:.1e} closed={:.6}",
            c.a, c.mc_mean, c.band3, c.closed_form
        );
        ok &= c.verdict == Verdict::Holds;
    }

    println!("== large-deviation inequality sweep ==");
    let sweep = large_deviation_sweep()?;
    println!(
        "[{}] {} grid points, max lhs/rhs = {:.15} at (p={}, t={})",
        if sweep.ok { "ok      " } else { "VIOLATED" },
        sweep.points,
        sweep.max_ratio,
        sweep.worst_p,
        sweep.worst_t
    );
    ok &= sweep.ok;

    println!("== mini-batch flip rate vs sigma/sqrt(B) ==");
    let flips = flip_rate_grid(args.trials, args.seed)?;
    for c in &flips {
        let verdict = match c.verdict {
            Verdict::Holds => "ok      ",
            Verdict::HoldsVacuously => "vacuous ",
            Verdict::Violated => "VIOLATED",
        };
        println!(
            "[{verdict}] B={:<3} sigma={:<4} emp={:.4e} bound={:.4e}",
            c.batch, c.sigma, c.empirical, c.bound
        );
        ok &= c.verdict != Verdict::Violated;
    }

    if let Some(path) = args.json {
        let doc = serde_json::json!({
            "wmv": wmv,
            "imperfect": imperfect,
            "exponent_limit": limit_checks,
            "large_deviation": sweep,
            "flip_rate": flips,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
        println!("wrote {}", path.display());
    }

    if ok {
        println!("all checks hold");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verification FAILED");
        Ok(ExitCode::from(1))
    }
}
