//! Paired Monte Carlo replications.
//!
//! Run `r` gives every policy its own copy of the ChaCha stream `(seed, r)`.
//! The simulator draws the same noise sequence whatever arm is played, so all
//! policies in a run face the identical environment. Each copy is wrapped in
//! a [`ChecksumRng`] and the per-policy checksums must agree.

use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ScenarioConfig};
use super::stats::RunningStats;
use crate::error::{Error, Result};
use crate::kalman::{solve_dare, SteadyStateFilter};
use crate::policy::{instantaneous_regret, DecisionLog, KalmanOracle, Policy, PolicyKind, SbEtc, Ucb};
use crate::system::DiscreteLinearSystem;
use crate::trading::build_trading_system;

/// Runs are simulated in parallel in blocks of this size and folded into the
/// aggregate in run order, which bounds memory and keeps sums reproducible.
const RUN_BLOCK: usize = 32;

/// Passes draws through and folds every output word into an FNV-1a hash.
#[derive(Debug, Clone)]
pub struct ChecksumRng<R> {
    inner: R,
    hash: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl<R: RngCore> ChecksumRng<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, hash: FNV_OFFSET }
    }

    pub fn checksum(&self) -> u64 {
        self.hash
    }

    fn absorb(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.hash ^= u64::from(*b);
            self.hash = self.hash.wrapping_mul(FNV_PRIME);
        }
    }
}

impl<R: RngCore> RngCore for ChecksumRng<R> {
    fn next_u32(&mut self) -> u32 {
        let v = self.inner.next_u32();
        self.absorb(&v.to_le_bytes());
        v
    }

    fn next_u64(&mut self) -> u64 {
        let v = self.inner.next_u64();
        self.absorb(&v.to_le_bytes());
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst);
        self.absorb(dst);
    }
}

/// Built scenario shared read-only across workers.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: Arc<DiscreteLinearSystem>,
    pub filter: SteadyStateFilter,
    /// Number of tradable assets and sampling interval for trading scenarios.
    pub trading: Option<(usize, f64)>,
}

pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let (system, trading) = match config {
        ScenarioConfig::Trading(spec) => (build_trading_system(spec)?, Some((spec.num_assets(), spec.dt))),
        ScenarioConfig::Inline { system } => (DiscreteLinearSystem::new((**system).clone())?, None),
    };
    let filter = solve_dare(&system)?;
    Ok(Scenario { system: Arc::new(system), filter, trading })
}

pub(crate) fn make_policy(kind: PolicyKind, cfg: &ExperimentConfig, system: &Arc<DiscreteLinearSystem>) -> Result<Box<dyn Policy>> {
    Ok(match kind {
        PolicyKind::Sbetc => Box::new(SbEtc::new(system.num_actions(), system.context_dim(), cfg.s, cfg.lambda)?),
        PolicyKind::Ucb => Box::new(Ucb::new(system.num_actions(), cfg.ucb_delta)?),
        PolicyKind::Oracle => Box::new(KalmanOracle::new(Arc::clone(system))),
    })
}

/// Aggregated regret of one policy over all runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub policy: PolicyKind,
    pub runs: u64,
    pub inst_mean: Vec<f64>,
    pub inst_se: Vec<f64>,
    pub cum_mean: Vec<f64>,
}

impl RegretCurve {
    pub fn horizon(&self) -> usize {
        self.inst_mean.len()
    }

    /// Mean instantaneous regret over rounds `first..=last` (1-based).
    pub fn window_mean(&self, first: usize, last: usize) -> f64 {
        let slice = &self.inst_mean[first - 1..last];
        slice.iter().sum::<f64>() / slice.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub curves: Vec<RegretCurve>,
    /// `final_cumulative[p][r]`: cumulative regret at the horizon of policy
    /// `p` in run `r`.
    pub final_cumulative: Vec<Vec<f64>>,
    /// Environment-noise checksum of each run, identical across policies.
    pub checksums: Vec<u64>,
    /// Run 0's decisions per policy, when requested.
    pub decision_logs: Vec<DecisionLog>,
}

impl ExperimentResult {
    pub fn curve(&self, kind: PolicyKind) -> Option<&RegretCurve> {
        self.curves.iter().find(|c| c.policy == kind)
    }

    pub fn final_cumulative_of(&self, kind: PolicyKind) -> Option<&[f64]> {
        self.curves.iter().position(|c| c.policy == kind).map(|i| self.final_cumulative[i].as_slice())
    }
}

struct RunOutcome {
    inst: Vec<Vec<f64>>,
    checksum: u64,
    logs: Vec<DecisionLog>,
}

fn simulate_run(cfg: &ExperimentConfig, scenario: &Scenario, run: u64, keep_log: bool) -> Result<RunOutcome> {
    let system = &scenario.system;
    let n = cfg.horizon() as usize;
    let mut inst = Vec::with_capacity(cfg.policies.len());
    let mut checksums = Vec::with_capacity(cfg.policies.len());
    let mut logs = Vec::new();
    for &kind in &cfg.policies {
        let mut rng = ChecksumRng::new(cfg.seed.stream(run));
        let mut state = system.init_state(&mut rng);
        let mut policy = make_policy(kind, cfg, system)?;
        let mut log = keep_log.then(|| DecisionLog::new(kind));
        let mut regret = Vec::with_capacity(n);
        for _ in 0..n {
            let arm = policy.choose()?;
            let out = system.step(&mut state, arm, &mut rng)?;
            let r = instantaneous_regret(system, &out.latent, arm)?;
            policy.update(&out.context, arm, out.reward)?;
            if let Some(log) = log.as_mut() {
                log.push(arm, out.reward, r);
            }
            regret.push(r);
        }
        inst.push(regret);
        checksums.push(rng.checksum());
        logs.extend(log);
    }
    if checksums.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InvalidState(format!("run {run}: policies saw different noise ({checksums:x?})")));
    }
    Ok(RunOutcome { inst, checksum: checksums[0], logs })
}

/// Simulate every run and aggregate. Nothing is written to disk here.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let scenario = build_scenario(&cfg.scenario)?;
    run_experiment_on(cfg, &scenario)
}

pub fn run_experiment_on(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<ExperimentResult> {
    cfg.validate(scenario.system.num_actions())?;
    let n = cfg.horizon() as usize;
    let p = cfg.policies.len();
    let mut stats = vec![vec![RunningStats::new(); n]; p];
    let mut final_cumulative = vec![Vec::with_capacity(cfg.runs as usize); p];
    let mut checksums = Vec::with_capacity(cfg.runs as usize);
    let mut decision_logs = Vec::new();

    let runs: Vec<u64> = (0..cfg.runs).collect();
    for block in runs.chunks(RUN_BLOCK) {
        let outcomes: Vec<RunOutcome> = block
            .par_iter()
            .map(|&run| simulate_run(cfg, scenario, run, cfg.decision_logs && run == 0))
            .collect::<Result<_>>()?;
        for outcome in outcomes {
            for (pi, series) in outcome.inst.iter().enumerate() {
                for (acc, &x) in stats[pi].iter_mut().zip(series) {
                    acc.push(x);
                }
                final_cumulative[pi].push(series.iter().sum());
            }
            checksums.push(outcome.checksum);
            decision_logs.extend(outcome.logs);
        }
    }

    let curves = cfg
        .policies
        .iter()
        .zip(&stats)
        .map(|(&policy, per_round)| {
            let inst_mean: Vec<f64> = per_round.iter().map(RunningStats::mean).collect();
            let cum_mean = inst_mean
                .iter()
                .scan(0.0, |acc, x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect();
            RegretCurve {
                policy,
                runs: cfg.runs,
                inst_se: per_round.iter().map(RunningStats::std_error).collect(),
                inst_mean,
                cum_mean,
            }
        })
        .collect();
    Ok(ExperimentResult { curves, final_cumulative, checksums, decision_logs })
}
