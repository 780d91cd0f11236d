//! Command-line front end for the link-analysis library.
//!
//! Five verbs cover the batch workflow:
//!
//! * `validate` — lint a scenario file and list every finding.
//! * `sweep` — run the configured BER-vs-SNR sweep and emit CSV.
//! * `target-snr` — bisect the SNR at which a scenario reaches a target BER.
//! * `gain` — difference of two scenarios' target-BER crossings.
//! * `reproduce-figure` — regenerate one of the bundled reference figures.
//!
//! Exit codes: 0 on success, 1 for configuration or I/O problems (including
//! scenario files that fail validation), 2 for numeric failures — a BER
//! curve that never crosses the requested target, or a quadrature tensor
//! too large to evaluate.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fso_ber::modulation::BepMode;
use fso_ber::scenario::{
    emit_csv_string, emit_plot_series, reproduce_figure, run_sweep, snr_at_target_ber,
    validate_config, Figure, McSettings, ScenarioConfig, Severity,
};
use fso_ber::Error;

#[derive(Parser)]
#[command(
    name = "fso-ber",
    version,
    about = "Closed-form and Monte-Carlo BER analysis for free-space optical links",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for sweeps and Monte Carlo runs (default: all cores).
    /// Results are identical for any worker count.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured SNR sweep and emit CSV (stdout, or the
    /// configured output path).
    Sweep {
        /// Scenario file (TOML).
        config: PathBuf,
    },
    /// Find the SNR at which the closed-form BER curve crosses a target.
    TargetSnr {
        /// Scenario file (TOML); its sweep range is the search bracket.
        config: PathBuf,
        /// Target bit-error rate, in (0, 0.5].
        #[arg(long, default_value_t = 1e-9)]
        target: f64,
    },
    /// SNR gain between two scenarios at a common target BER.
    Gain {
        /// Baseline scenario file (TOML).
        config_a: PathBuf,
        /// Comparison scenario file (TOML).
        config_b: PathBuf,
        /// Target bit-error rate, in (0, 0.5].
        #[arg(long, default_value_t = 1e-9)]
        target: f64,
    },
    /// Lint a scenario file and print every finding.
    Validate {
        /// Scenario file (TOML).
        config: PathBuf,
    },
    /// Regenerate the six curves of a bundled reference figure as CSV
    /// files named `fig<N>_<curve>.csv`.
    ReproduceFigure {
        /// Figure number: 5, 6, 7, or 8.
        figure: u32,
        /// Directory for the CSV files (created if missing).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Also run the Monte Carlo companion column (slower).
        #[arg(long)]
        mc: bool,
        /// Monte Carlo samples per sweep point.
        #[arg(long, default_value_t = 1_000_000, requires = "mc")]
        samples: u64,
        /// Base random seed; sweep point i uses seed + i.
        #[arg(long, default_value_t = 42, requires = "mc")]
        seed: u64,
        /// Conditional-BEP kernel for the Monte Carlo column.
        #[arg(long, default_value = "exact", value_parser = ["exact", "chiani"], requires = "mc")]
        kernel: String,
    },
}

fn main() -> ExitCode {
    // Clap's own exit convention reserves 2 for usage errors; this tool
    // reserves 2 for numeric failures, so map usage errors to 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let failed = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if failed { 1 } else { 0 });
        }
    };

    if let Some(n) = cli.workers {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        if let Err(e) = pool {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::NoCrossing { .. } | Error::TensorTooLarge { .. } => 2,
                _ => 1,
            })
        }
    }
}

fn run(command: Command) -> fso_ber::Result<ExitCode> {
    match command {
        Command::Sweep { config } => sweep(&config),
        Command::TargetSnr { config, target } => target_snr(&config, target),
        Command::Gain { config_a, config_b, target } => gain(&config_a, &config_b, target),
        Command::Validate { config } => validate(&config),
        Command::ReproduceFigure { figure, out_dir, mc, samples, seed, kernel } => {
            let mc = mc.then_some(McSettings {
                samples,
                seed,
                kernel: if kernel == "chiani" { BepMode::Chiani } else { BepMode::Exact },
            });
            let figure = Figure::from_number(figure)?;
            let written = reproduce_figure(figure, &out_dir, mc)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Loads a scenario file, forwarding any advisory warnings to stderr.
fn load(path: &PathBuf) -> fso_ber::Result<ScenarioConfig> {
    let (config, warnings) = ScenarioConfig::from_toml_file(path)?;
    for w in warnings {
        eprintln!("{}: {w}", path.display());
    }
    Ok(config)
}

fn sweep(path: &PathBuf) -> fso_ber::Result<ExitCode> {
    let config = load(path)?;
    let result = run_sweep(&config)?;
    match &config.output().path {
        Some(out) => {
            fso_ber::scenario::write_csv_file(&result, out)?;
            eprintln!("wrote {}", out.display());
            if config.output().plot_series {
                for p in emit_plot_series(&result, out.with_extension(""))? {
                    eprintln!("wrote {}", p.display());
                }
            }
        }
        None => {
            if config.output().plot_series {
                eprintln!(
                    "warning: output.plot_series needs output.path; skipping the series files"
                );
            }
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(emit_csv_string(&result).as_bytes())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn target_snr(path: &PathBuf, target: f64) -> fso_ber::Result<ExitCode> {
    let config = load(path)?;
    let snr_db = snr_at_target_ber(&config, target)?;
    println!("# target_ber = {target:e}");
    println!("# config = {}", path.display());
    println!("snr_db = {snr_db:.6}");
    Ok(ExitCode::SUCCESS)
}

fn gain(path_a: &PathBuf, path_b: &PathBuf, target: f64) -> fso_ber::Result<ExitCode> {
    let a = load(path_a)?;
    let b = load(path_b)?;
    let snr_a = snr_at_target_ber(&a, target)?;
    let snr_b = snr_at_target_ber(&b, target)?;
    let gain_db = snr_a - snr_b;
    println!("# gain_db = snr_a_db - snr_b_db; positive means the second scenario");
    println!("# reaches the target at a lower SNR (outperforms the first by gain_db dB)");
    println!("# target_ber = {target:e}");
    println!("# config_a = {}", path_a.display());
    println!("# config_b = {}", path_b.display());
    println!("snr_a_db = {snr_a:.6}");
    println!("snr_b_db = {snr_b:.6}");
    println!("gain_db = {gain_db:.6}");
    Ok(ExitCode::SUCCESS)
}

fn validate(path: &PathBuf) -> fso_ber::Result<ExitCode> {
    let text = std::fs::read_to_string(path)?;
    let findings = validate_config(&text)?;
    if findings.is_empty() {
        println!("ok: no findings");
        return Ok(ExitCode::SUCCESS);
    }
    let mut worst = Severity::Warning;
    for finding in &findings {
        println!("{finding}");
        if finding.severity == Severity::Error {
            worst = Severity::Error;
        }
    }
    Ok(if worst == Severity::Error { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
