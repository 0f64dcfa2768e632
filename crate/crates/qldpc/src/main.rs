//! `qldpc` CLI: build codes, run memory-experiment sweeps, audit the
//! decoder, fit ansatzes, and report results.
//!
//! Exit codes: 0 success, 2 configuration error, 3 decode infeasibility,
//! 1 other failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qldpc::config::{ConfigError, ExperimentConfig};
use qldpc::runner::{self, RunnerError};

#[derive(Parser)]
#[command(name = "qldpc", version, about = "qLDPC Bell-distillation simulator and analysis toolkit")]
struct Cli {
    /// Worker threads for shot decoding (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override run.shots (the per-point cap).
    #[arg(long)]
    shots: Option<u64>,
    /// Override run.out (output directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to one basis ("z" or "x"), overriding schedule.bases.
    #[arg(long)]
    basis: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Construct the configured code and export its matrices.
    BuildCode(CommonArgs),
    /// Run the noise sweep and write results.csv / manifest.json.
    Simulate(CommonArgs),
    /// Exhaustive single-fault decoder audit on the first sweep point.
    DecodeCheck(CommonArgs),
    /// Fit the configured ansatz over results.csv files and write fits.json.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// results.csv paths (default: <out>/results.csv).
        #[arg(long = "results")]
        results: Vec<PathBuf>,
    },
    /// Summarize run directories: tables, plot series, fit summaries.
    Report {
        /// Run directories containing results.csv and manifest.json.
        dirs: Vec<PathBuf>,
        /// Directory for report.txt and plot data.
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Report even when a manifest hash does not match its config.
        #[arg(long)]
        force: bool,
    },
    /// Compare the two-sided protocol oracle with its folded equivalent.
    Oracle(CommonArgs),
    /// Print a fully explicit configuration template.
    Template,
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, RunnerError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(shots) = args.shots {
        cfg.run.shots = shots;
    }
    if let Some(out) = &args.out {
        cfg.run.out = out.display().to_string();
    }
    if let Some(basis) = &args.basis {
        cfg.schedule.bases = vec![basis.clone()];
    }
    cfg.validate().map_err(RunnerError::Config)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), RunnerError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| RunnerError::Other(format!("cannot set thread count: {e}")))?;
    }
    match cli.command {
        Command::BuildCode(args) => {
            let cfg = load_config(&args)?;
            let (code, id, dir) = runner::run_build_code(&cfg)?;
            println!(
                "built {id}: [[{},{}{}]] family {} -> {}",
                code.n,
                code.k,
                code.d_upper.map(|d| format!(",{d}")).unwrap_or_default(),
                code.family,
                dir.display()
            );
        }
        Command::Simulate(args) => {
            let cfg = load_config(&args)?;
            let out = runner::run_experiment(&cfg)?;
            for p in &out.points {
                println!(
                    "{} p={} basis={} shots={} failures={} p_tot={:.6e} p_cycle={:.6e}",
                    p.code, p.p, p.basis, p.shots, p.failures, p.p_tot, p.p_cycle
                );
            }
            println!("wrote {}", out.out_dir.join("results.csv").display());
            println!("wrote {}", out.out_dir.join("manifest.json").display());
        }
        Command::DecodeCheck(args) => {
            let cfg = load_config(&args)?;
            let report = runner::run_decode_check(&cfg)?;
            for (basis, total, wrong) in &report.audits {
                println!(
                    "basis {basis}: {} mechanisms audited, {} wrong{}",
                    total,
                    wrong.len(),
                    if wrong.is_empty() {
                        String::new()
                    } else {
                        format!(" (first: {:?})", &wrong[..wrong.len().min(10)])
                    }
                );
            }
            if report.failures() > 0 {
                return Err(RunnerError::Other(format!(
                    "decode check failed on {} mechanisms",
                    report.failures()
                )));
            }
        }
        Command::Fit { common, results } => {
            let cfg = load_config(&common)?;
            let results = if results.is_empty() {
                vec![PathBuf::from(&cfg.run.out).join("results.csv")]
            } else {
                results
            };
            let fits = runner::run_fit(&cfg, &results)?;
            for (name, value) in &fits.fit.params {
                println!("{name} = {value:.6e}");
            }
            println!("residual = {:.6e}", fits.fit.residual);
            println!("wrote {}", PathBuf::from(&cfg.run.out).join("fits.json").display());
        }
        Command::Report { dirs, out, force } => {
            if dirs.is_empty() {
                return Err(ConfigError::Invalid("report needs at least one run directory".into())
                    .into());
            }
            let text = runner::run_report(&dirs, &out, force)?;
            print!("{text}");
        }
        Command::Oracle(args) => {
            let cfg = load_config(&args)?;
            let rows = runner::run_oracle(&cfg)?;
            println!("p_bell     p_gate     two_sided     folded        |z|");
            for r in &rows {
                println!(
                    "{:<10} {:<10} {:<13.6e} {:<13.6e} {:.2}",
                    r.p_bell, r.p_gate, r.two_sided.rate, r.folded.rate, r.z_score
                );
            }
            println!("wrote {}", PathBuf::from(&cfg.run.out).join("oracle.json").display());
        }
        Command::Template => {
            print!("{}", ExperimentConfig::template());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
