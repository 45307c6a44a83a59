use std::io::Write;

use nalgebra::DVector;

use super::PolicyKind;
use crate::error::{invalid, Result};
use crate::harness::format_sig;
use crate::system::DiscreteLinearSystem;

/// `max_a(⟨c_a,z_t⟩+μ_a) − (⟨c_chosen,z_t⟩+μ_chosen)`; the zero-mean reward
/// noise drops out of the expectation.
pub fn instantaneous_regret(system: &DiscreteLinearSystem, latent: &DVector<f64>, chosen: usize) -> Result<f64> {
    if latent.len() != system.state_dim() {
        return Err(invalid("latent state has the wrong dimension"));
    }
    let picked = system.action(chosen)?.mean_reward(latent);
    let best = system.actions().iter().map(|a| a.mean_reward(latent)).fold(f64::NEG_INFINITY, f64::max);
    Ok((best - picked).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretRecord {
    pub round: u64,
    pub chosen: usize,
    pub reward: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
}

/// Per-round decision log of one policy in one run.
#[derive(Debug, Clone)]
pub struct DecisionLog {
    pub policy: PolicyKind,
    pub records: Vec<RegretRecord>,
}

impl DecisionLog {
    pub fn new(policy: PolicyKind) -> Self {
        Self { policy, records: Vec::new() }
    }

    pub fn push(&mut self, chosen: usize, reward: f64, inst_regret: f64) {
        let cum = self.records.last().map_or(0.0, |r| r.cum_regret) + inst_regret;
        let round = self.records.len() as u64 + 1;
        self.records.push(RegretRecord { round, chosen, reward, inst_regret, cum_regret: cum });
    }

    pub fn cumulative(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    /// CSV columns: `round,policy,arm,reward,inst_regret,cum_regret`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "round,policy,arm,reward,inst_regret,cum_regret")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.round,
                self.policy,
                r.chosen,
                format_sig(r.reward),
                format_sig(r.inst_regret),
                format_sig(r.cum_regret)
            )?;
        }
        Ok(())
    }
}
