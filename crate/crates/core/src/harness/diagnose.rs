//! Empirical regret-bound diagnostic over seeded SB-ETC runs.

use std::io::Write;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::experiment::Scenario;
use super::format_sig;
use crate::error::Result;
use crate::policy::{bound_diagnostic, mistake_frequency, BoundDiagnostic, Policy, SbEtc};
use crate::sysid::{true_g, RegressorWindow};

#[derive(Debug, Clone)]
pub struct DiagnosticRun {
    pub run: u64,
    pub diagnostic: BoundDiagnostic,
    /// Per arm: share of post-exploration rounds in which the arm was played
    /// among those where the true model preferred another arm.
    pub selection_frequency: Vec<f64>,
}

impl DiagnosticRun {
    /// Arms whose bound factor is at least their selection frequency. Arms
    /// that were never suboptimal count as satisfied.
    pub fn bound_holds(&self) -> Vec<bool> {
        self.diagnostic
            .bound_factor
            .iter()
            .zip(&self.selection_frequency)
            .map(|(b, f)| b >= f)
            .collect()
    }
}

fn diagnose_run(cfg: &ExperimentConfig, scenario: &Scenario, run: u64) -> Result<DiagnosticRun> {
    let system = &scenario.system;
    let mut policy = SbEtc::new(system.num_actions(), system.context_dim(), cfg.s, cfg.lambda)?;
    let mut rng = cfg.seed.stream(run);
    let mut state = system.init_state(&mut rng);
    let mut regressors: Vec<RegressorWindow> = Vec::new();
    let mut choices = Vec::new();
    for _ in 0..cfg.horizon() {
        let arm = policy.choose()?;
        if !policy.in_exploration() {
            regressors.push(policy.regressor()?);
            choices.push(arm);
        }
        let out = system.step(&mut state, arm, &mut rng)?;
        policy.update(&out.context, arm, out.reward)?;
    }
    let diagnostic = bound_diagnostic(system, &scenario.filter, &policy, &regressors)?;
    let rows = (0..system.num_actions())
        .map(|a| true_g(system, &scenario.filter, cfg.s, a))
        .collect::<Result<Vec<_>>>()?;
    let selection_frequency = mistake_frequency(&rows, &regressors, &choices)?;
    Ok(DiagnosticRun { run, diagnostic, selection_frequency })
}

/// One SB-ETC run per replication index `0..cfg.runs`.
pub fn run_diagnostics(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<Vec<DiagnosticRun>> {
    cfg.validate(scenario.system.num_actions())?;
    (0..cfg.runs).into_par_iter().map(|run| diagnose_run(cfg, scenario, run)).collect()
}

/// Columns: `run,arm,model_error,bound_factor,selection_frequency,suboptimal_samples,skipped,degenerate,bound_holds`.
pub fn write_diagnostics_csv<W: Write>(runs: &[DiagnosticRun], mut out: W) -> Result<()> {
    writeln!(out, "run,arm,model_error,bound_factor,selection_frequency,suboptimal_samples,skipped,degenerate,bound_holds")?;
    for r in runs {
        let d = &r.diagnostic;
        for (a, holds) in r.bound_holds().into_iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.run,
                a,
                format_sig(d.model_errors[a]),
                format_sig(d.bound_factor[a]),
                format_sig(r.selection_frequency[a]),
                d.suboptimal_samples[a],
                d.skipped[a],
                d.degenerate[a],
                holds
            )?;
        }
    }
    Ok(())
}
