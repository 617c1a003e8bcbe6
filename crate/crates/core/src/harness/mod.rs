//! Scenario loading, simulation, metrics and output.

pub mod emit;
pub mod metrics;
pub mod scenario;
pub mod sim;

use std::path::{Path, PathBuf};

pub use metrics::{summarize, Summary};
pub use scenario::{Scenario, ScenarioError, ScenarioFile, ValidationReport};
pub use sim::{run, RunStatus, Trace};

/// Simulates a scenario and computes its summary.
pub fn execute(scenario: &Scenario) -> (Trace, Summary) {
    let trace = run(scenario);
    let summary = summarize(scenario, &trace);
    (trace, summary)
}

/// Result of one scenario in a batch.
#[derive(Debug)]
pub struct BatchItem {
    pub path: PathBuf,
    pub outcome: Result<Summary, String>,
}

impl BatchItem {
    pub fn exit_code(&self) -> i32 {
        match &self.outcome {
            Ok(s) => s.exit_code(),
            Err(_) => 1,
        }
    }
}

/// `*.toml` files in `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every scenario independently (in parallel with the `parallel` feature)
/// and writes each run's files into `out`.
pub fn run_batch(paths: &[PathBuf], out: &Path, with_svg: bool) -> Vec<BatchItem> {
    crate::par::map(paths, |path| {
        let outcome = Scenario::load(path)
            .map_err(|e| e.to_string())
            .and_then(|scenario| {
                let (trace, summary) = execute(&scenario);
                let svg = with_svg || scenario.file.output.svg;
                emit::write_all(out, &trace, &summary, &scenario.features, svg)
                    .map_err(|e| e.to_string())?;
                Ok(summary)
            });
        BatchItem {
            path: path.clone(),
            outcome,
        }
    })
}

/// Batch exit code: configuration errors dominate, then safety violations.
pub fn batch_exit_code(items: &[BatchItem]) -> i32 {
    let codes: Vec<i32> = items.iter().map(BatchItem::exit_code).collect();
    if codes.contains(&1) {
        1
    } else {
        codes.into_iter().max().unwrap_or(0)
    }
}
