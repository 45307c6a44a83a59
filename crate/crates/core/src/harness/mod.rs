//! Configuration-driven Monte Carlo runner and its artifacts.

pub mod config;
pub mod diagnose;
pub mod experiment;
pub mod output;
pub mod stats;

pub use config::{ExperimentConfig, ScenarioConfig};
pub use diagnose::{run_diagnostics, write_diagnostics_csv, DiagnosticRun};
pub use experiment::{build_scenario, run_experiment, ChecksumRng, ExperimentResult, RegretCurve, Scenario};
pub use output::{render_plots, write_artifacts, write_curves_csv, write_metadata};
pub use stats::RunningStats;

/// Number formatting shared by every CSV writer: 10 significant digits,
/// positional notation for decimal exponents in `[-6, 15]`, scientific
/// otherwise, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-6..=15).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
