#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use safetrack::harness::Scenario;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn shipped(name: &str) -> Scenario {
    let path = scenario_dir().join(format!("{name}.toml"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Prints one verdict line straight to stderr so it survives output capture.
pub fn verdict(id: u32, title: &str, ok: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "{} criterion {id:>2} ({title}): {detail} [{:.2} s]\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

/// Rounds to `n` significant digits.
pub fn sig(x: f64, n: i32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(n - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}
