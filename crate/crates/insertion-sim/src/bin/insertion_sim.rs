//! Thin command-line front end over the library: batch experiment runs,
//! insertability sweeps, and preset inspection.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use insertion_sim::harness::{render_matrix, run_experiment, ExperimentConfig, Scenario};
use insertion_sim::simulator::{insertability_limits, run_plunge};
use insertion_sim::trajectory::PressController;
use insertion_sim::{Calibration, Catalog, FingerCompliance};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "insertion-sim", version, about = "Compliant-finger insertion task simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch experiment from a config file and/or scenario preset.
    Run {
        /// Experiment config file (TOML). Optional when --scenario is given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario preset; overrides the config file's scenario.
        #[arg(long)]
        scenario: Option<String>,
        /// Repetitions per cell.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for matrix/summary artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one trace CSV + JSON summary per trial.
        #[arg(long)]
        traces: bool,
        /// Worker threads for trial execution.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Straight-plunge insertability oracle for an object/site pairing.
    Oracle {
        #[arg(long)]
        object: String,
        #[arg(long)]
        site: String,
        /// Sweep yaw from 0 at one-degree resolution and report the limits.
        #[arg(long)]
        sweep_yaw: bool,
        /// Single yaw angle to test when not sweeping.
        #[arg(long, default_value_t = 0.0)]
        yaw: f64,
        /// Pressing force, N.
        #[arg(long, default_value_t = 11.0)]
        press: f64,
    },
    /// Print resolved scenario presets.
    ShowConfig {
        /// Scenario name; prints every preset when omitted.
        #[arg(long)]
        scenario: Option<String>,
    },
}

fn parse_scenario(name: &str) -> Result<Scenario> {
    Scenario::ALL
        .into_iter()
        .find(|s| s.name() == name)
        .with_context(|| {
            let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
            format!("unknown scenario '{name}'; expected one of {names:?}")
        })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cal = Calibration::shipped();
    let catalog = Catalog::shipped();

    match cli.command {
        Command::Run {
            config,
            scenario,
            trials,
            seed,
            out,
            traces,
            workers,
        } => {
            let mut cfg = match (&config, &scenario) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    ExperimentConfig::from_toml(&text)?
                }
                (None, Some(name)) => ExperimentConfig::new(parse_scenario(name)?),
                (None, None) => bail!("provide --config and/or --scenario"),
            };
            if let Some(name) = &scenario {
                let parsed = parse_scenario(name)?;
                if config.is_some() {
                    cfg.scenario = parsed;
                    cfg.rows = None;
                }
            }
            if let Some(n) = trials {
                cfg.repetitions = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.output_dir = Some(dir);
            }
            if traces {
                cfg.write_traces = true;
            }
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }

            let report = run_experiment(&cal, &catalog, &cfg)?;
            if let Some(matrix) = &report.matrix {
                print!("{}", render_matrix(matrix));
            }
            if let Some(limits) = &report.limits {
                println!("pair             geometric  compliant");
                for (name, l) in limits {
                    println!("{name:<18} {:>5} deg  {:>5} deg", l.geometric_deg, l.compliant_deg);
                }
            }
            if !report.status_totals.is_empty() {
                let totals: Vec<String> = report
                    .status_totals
                    .iter()
                    .map(|(k, v)| format!("{k}: {v}"))
                    .collect();
                println!("trials: {} ({})", report.total_trials(), totals.join(", "));
            }
            if let Some(dir) = &cfg.output_dir {
                println!("artifacts written to {}", dir.display());
            }
        }
        Command::Oracle {
            object,
            site,
            sweep_yaw,
            yaw,
            press,
        } => {
            let obj = catalog.object(&object)?.clone();
            let st = catalog.site(&site)?.clone();
            let ctrl = PressController::new(press);
            if sweep_yaw {
                let stage = FingerCompliance::unlocked(&cal);
                println!("yaw sweep for {object} into {site} at {press} N:");
                for deg in 0..=25u32 {
                    let outcome = run_plunge(&cal, &obj, &st, deg as f64, &stage, &ctrl);
                    println!("  {deg:>2} deg  {}", if outcome.succeeded() { "insert" } else { "fail" });
                    if !outcome.succeeded() {
                        break;
                    }
                }
                let limits = insertability_limits(&cal, &obj, &st, &ctrl);
                println!(
                    "limits: geometric {} deg, with compliance {} deg",
                    limits.geometric_deg, limits.compliant_deg
                );
            } else {
                let stage = FingerCompliance::unlocked(&cal);
                let outcome = run_plunge(&cal, &obj, &st, yaw, &stage, &ctrl);
                println!(
                    "plunge at {yaw} deg: {}",
                    if outcome.succeeded() { "insert" } else { "fail" }
                );
            }
        }
        Command::ShowConfig { scenario } => {
            let scenarios: Vec<Scenario> = match scenario {
                Some(name) => vec![parse_scenario(&name)?],
                None => Scenario::ALL.to_vec(),
            };
            for s in scenarios {
                println!("# scenario: {}", s.name());
                match s.preset() {
                    Some(preset) => {
                        let text = toml::to_string_pretty(&preset)
                            .context("serializing preset")?;
                        println!("{text}");
                    }
                    None => println!("# insertability sweep over the cataloged pairs\n"),
                }
            }
        }
    }
    Ok(())
}
