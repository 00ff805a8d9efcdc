use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ponqkd::calibration::{calibrate, Anchors, Calibration};
use ponqkd::scenario::{self, Axis, RunArtifact, RunMode, ScenarioConfig, SCENARIO_DIR_ENV};
use ponqkd::Error;

#[derive(Parser)]
#[command(name = "ponqkd", version, about = "DPS-QKD over lit GPON / NG-PON2 trees")]
struct Cli {
    /// Directory searched for scenario names before the bundled presets.
    #[arg(long, global = true, env = SCENARIO_DIR_ENV, default_value = "scenarios")]
    scenario_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a scenario, reporting every problem found.
    Validate { scenario: String },
    /// Run a scenario in its configured mode.
    Run {
        scenario: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Evaluate a scenario along one axis.
    Sweep {
        scenario: String,
        #[arg(long, value_parser = parse_axis)]
        axis: Axis,
        /// Comma-separated list, or start:stop:step (inclusive).
        #[arg(long, value_parser = parse_values)]
        values: Values,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Optimal quantum wavelength against take-rate on a mixed tree.
    Plan {
        scenario: String,
        /// Overrides the scenario's take-rates; same syntax as sweep values.
        #[arg(long, value_parser = parse_values)]
        take_rates: Option<Values>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Refit the calibration block and print it.
    Calibrate {
        /// Also write the block to this file.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Write <name>.csv, <name>.summary.txt (and <name>.spectrum.csv for
    /// plans) here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Summary)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Summary,
}

#[derive(Clone, Debug)]
struct Values(Vec<f64>);

fn parse_axis(s: &str) -> Result<Axis, String> {
    Axis::parse(s).map_err(|e| e.to_string())
}

fn parse_values(s: &str) -> Result<Values, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err("range must be start:stop:step".into());
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        // Round to kill accumulated binary noise in the printed axis values.
        let v = (0..=n).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect();
        return Ok(Values(v));
    }
    let v = s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("no values given".into());
    }
    Ok(Values(v))
}

fn load(arg: &str, dir: &Path) -> anyhow::Result<ScenarioConfig> {
    scenario::resolve_in(arg, dir).with_context(|| format!("loading scenario {arg}"))
}

fn emit(artifact: &RunArtifact, out: &OutputArgs) -> anyhow::Result<()> {
    match &out.out {
        Some(dir) => {
            for p in artifact.write_to(dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            let text = match out.format {
                Format::Csv => artifact.csv()?,
                Format::Summary => artifact.summary(),
            };
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

/// Emits whatever was computed, including the rows of an aborted sweep.
fn finish(result: ponqkd::Result<RunArtifact>, out: &OutputArgs) -> anyhow::Result<()> {
    match result {
        Ok(a) => emit(&a, out),
        Err(Error::SweepAborted {
            axis,
            value,
            completed,
            source,
        }) => {
            emit(&completed, out)?;
            bail!("sweep aborted at {axis} = {value} after {} point(s): {source}", completed.row_count())
        }
        Err(e) => Err(e.into()),
    }
}

fn with_seed(mut cfg: ScenarioConfig, seed: Option<u64>) -> ScenarioConfig {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let dir = cli.scenario_dir;
    match cli.command {
        Command::Validate { scenario } => {
            let cfg = load(&scenario, &dir)?;
            println!("{}: ok ({:?})", cfg.name, cfg.mode);
        }
        Command::Run { scenario, out } => {
            let cfg = with_seed(load(&scenario, &dir)?, out.seed);
            finish(scenario::run(&cfg), &out)?;
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            out,
        } => {
            let cfg = with_seed(load(&scenario, &dir)?, out.seed);
            finish(scenario::sweep(&cfg, axis, &values.0), &out)?;
        }
        Command::Plan {
            scenario,
            take_rates,
            out,
        } => {
            let mut cfg = with_seed(load(&scenario, &dir)?, out.seed);
            if cfg.mode != RunMode::Plan {
                bail!("{} is a {:?} scenario, not a plan", cfg.name, cfg.mode);
            }
            if let Some(t) = take_rates {
                cfg.planner.get_or_insert_with(Default::default).take_rates = t.0;
            }
            finish(scenario::run(&cfg), &out)?;
        }
        Command::Calibrate { write } => {
            let fit = calibrate(&Anchors::default(), Calibration::frozen())?;
            eprintln!("converged after {} iteration(s)", fit.iterations);
            for c in &fit.checks {
                eprintln!("{:<34} target {:>12.6} got {:>12.6}", c.name, c.target, c.achieved);
            }
            let text = fit.calibration.to_toml()?;
            print!("{text}");
            if let Some(p) = write {
                std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Presets => {
            for n in scenario::preset_names() {
                println!("{n}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
