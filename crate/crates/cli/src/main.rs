use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stochpic::observables::{fit_rate, EnergyTimeSeries};
use stochpic::scenarios::config::set_override;
use stochpic::{run, run_convergence, Error, FitMode, Preset, Result, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "stochpic",
    version,
    about = "Stochastic-Galerkin particle solver for Vlasov–Poisson–BGK"
)]
struct Cli {
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory receiving the run artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the scenario described by a JSON configuration file.
    Run {
        config: PathBuf,
        /// Dotted `key=value` assignment applied on top of the file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Runs a named preset.
    Preset {
        name: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Prints the resolved configuration instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// Runs the spectral convergence study of a configuration.
    Converge {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Fits an exponential rate to the mean column of an energy CSV.
    FitRate {
        csv: PathBuf,
        /// Fit window as `start,end`.
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64),
        #[arg(long, default_value = "damping", value_parser = parse_mode)]
        mode: FitMode,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `start,end`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn parse_mode(s: &str) -> std::result::Result<FitMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown fit mode `{s}`"))
}

/// Prints to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    for o in overrides {
        set_override(&mut doc, o)?;
    }
    if let Some(s) = seed {
        doc["seed"] = s.into();
    }
    ScenarioConfig::from_value(doc)
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides, cli.seed)?;
            report_run(cfg, out)
        }
        Command::Preset {
            name,
            mut overrides,
            print,
        } => {
            let preset = Preset::from_name(&name).ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::Config(format!(
                    "unknown preset `{name}`; expected one of {}",
                    names.join(", ")
                ))
            })?;
            if let Some(s) = cli.seed {
                overrides.push(format!("seed={s}"));
            }
            let cfg = ScenarioConfig::preset_with_overrides(preset, &overrides)?;
            if print {
                say!("{}", serde_json::to_string_pretty(&cfg)?);
                return Ok(());
            }
            if cfg.convergence.is_some() && preset == Preset::ConvergenceStudy {
                return report_convergence(&cfg, out);
            }
            report_run(cfg, out)
        }
        Command::Converge { config, overrides } => {
            let cfg = load(&config, &overrides, cli.seed)?;
            report_convergence(&cfg, out)
        }
        Command::FitRate { csv, window, mode } => {
            let series = EnergyTimeSeries::read_csv(File::open(&csv)?)?;
            let fit = fit_rate(&series.times, &series.mean, window, mode)?;
            say!("rate = {:.6}", fit.rate);
            say!("intercept = {:.6}", fit.intercept);
            say!("points = {}", fit.points.len());
            Ok(())
        }
    }
}

fn report_run(cfg: ScenarioConfig, out: &Path) -> Result<()> {
    let outcome = run(cfg, Some(out))?;
    let r = &outcome.report;
    say!(
        "preset {} finished {} steps in {:.2} s",
        r.config.preset.name(),
        r.steps,
        r.wall_time_s
    );
    if let Some(f) = &r.fit {
        say!("fitted rate = {:.6}", f.rate);
    }
    if let Some(e) = &r.fit_error {
        eprintln!("rate fit failed: {e}");
    }
    say!("artifacts written to {}", out.display());
    Ok(())
}

fn report_convergence(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let report = run_convergence(cfg, Some(out))?;
    say!("M,error");
    for p in &report.points {
        say!("{},{:e}", p.order, p.error);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
