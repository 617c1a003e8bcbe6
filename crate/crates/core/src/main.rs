use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use safetrack::harness::{self, emit, ScenarioFile};

#[derive(Parser)]
#[command(
    name = "safetrack",
    version,
    about = "Sliding-mode tracking and safety control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace, summary and optional plot.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, env = "SAFETRACK_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Override the integration step, s.
        #[arg(long)]
        dt: Option<f64>,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
        /// Override the disturbance seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate every *.toml scenario in a directory.
    Batch {
        dir: PathBuf,
        #[arg(long, env = "SAFETRACK_OUT_DIR", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Print every admissibility check with its margin.
    ValidateGains { scenario: PathBuf },
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            dt,
            svg,
            seed,
        } => {
            let mut file = match ScenarioFile::load(&scenario) {
                Ok(f) => f,
                Err(e) => return config_error(e),
            };
            if let Some(dt) = dt {
                file.dt_s = dt;
            }
            if let Some(seed) = seed {
                file.seed = seed;
            }
            let scenario = match file.validated() {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let (trace, summary) = harness::execute(&scenario);
            let svg = svg || scenario.file.output.svg;
            let written = match emit::write_all(&out, &trace, &summary, &scenario.features, svg) {
                Ok(w) => w,
                Err(e) => return config_error(e),
            };
            log::info!("wrote {}", written.trace.display());
            print_summary(&summary);
            ExitCode::from(summary.exit_code() as u8)
        }
        Command::Batch { dir, out, svg } => {
            let files = match harness::scenario_files(&dir) {
                Ok(f) => f,
                Err(e) => return config_error(format!("{}: {e}", dir.display())),
            };
            let items = harness::run_batch(&files, &out, svg);
            for item in &items {
                match &item.outcome {
                    Ok(s) => {
                        let verdict = if s.safety_violation {
                            "VIOLATION"
                        } else {
                            "ok"
                        };
                        println!("{:<10} {}", verdict, item.path.display());
                    }
                    Err(e) => println!("{:<10} {}: {e}", "ERROR", item.path.display()),
                }
            }
            ExitCode::from(harness::batch_exit_code(&items) as u8)
        }
        Command::ValidateGains { scenario } => {
            let file = match ScenarioFile::load(&scenario) {
                Ok(f) => f,
                Err(e) => return config_error(e),
            };
            match file.build() {
                Ok((_, report)) => {
                    print!("{report}");
                    if report.is_ok() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => config_error(e),
            }
        }
    }
}

fn print_summary(s: &harness::Summary) {
    println!("scenario {} ({} steps, dt {})", s.scenario, s.steps, s.dt);
    if let harness::RunStatus::Failed {
        t, robot, reason, ..
    } = &s.status
    {
        println!("FAILED at t={t:.3}: {robot}: {reason}");
    }
    for r in &s.robots {
        let rms = if r.tracking_rms_a0.is_nan() {
            "n/a".to_string()
        } else {
            format!("{:.4} m", r.tracking_rms_a0)
        };
        println!(
            "  {}: tracking RMS (A0) {rms}, {:.0}% in safety mode",
            r.robot,
            100.0 * r.fraction_in_safety
        );
        if r.alignment_excursion_fraction > 0.0 {
            println!(
                "    alignment error above {} rad in {:.1}% of safety steps (max {:.3} rad)",
                harness::metrics::ALIGNMENT_FLAG,
                100.0 * r.alignment_excursion_fraction,
                r.max_alignment_error
            );
        }
        for f in &r.features {
            println!(
                "    {:<16} min {:.4} m (floor {:.4}), mean {:.4} m, {:.1}% above floor{}",
                f.feature,
                f.min_clearance,
                f.floor,
                f.mean_clearance,
                100.0 * f.fraction_above_floor,
                if f.violated { "  VIOLATION" } else { "" }
            );
        }
    }
}
