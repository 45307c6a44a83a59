//! Systems-based explore-then-commit.
//!
//! Rounds `1..=k·s` cycle through the arms (least-pulled first). From round
//! `s + 1` on, the chosen arm's ridge estimate `Ĝ_a` is updated with
//! `(Θ_t, X_t)`. After round `k·s` the policy plays `argmax_a Ĝ_aΘ_t`.

use std::collections::VecDeque;

use nalgebra::DVector;

use super::{argmax_lowest, Policy, PolicyKind};
use crate::error::{invalid, Error, Result};
use crate::sysid::{build_regressor, GEstimate, RegressorWindow};

#[derive(Debug, Clone)]
pub struct SbEtc {
    s: usize,
    lambda: f64,
    m: usize,
    explore_counts: Vec<u64>,
    estimates: Vec<GEstimate>,
    context_buffer: VecDeque<DVector<f64>>,
    /// Index of the next round, starting at 1.
    t: u64,
}

impl SbEtc {
    pub fn new(k: usize, m: usize, s: usize, lambda: f64) -> Result<Self> {
        if k == 0 || m == 0 || s == 0 {
            return Err(invalid(format!("SB-ETC needs k, m, s >= 1 (got k={k}, m={m}, s={s})")));
        }
        let estimates = (0..k).map(|_| GEstimate::new(m * s + 1, lambda)).collect::<Result<_>>()?;
        Ok(Self {
            s,
            lambda,
            m,
            explore_counts: vec![0; k],
            estimates,
            context_buffer: VecDeque::with_capacity(s),
            t: 1,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.estimates.len()
    }

    pub fn window(&self) -> usize {
        self.s
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn explore_counts(&self) -> &[u64] {
        &self.explore_counts
    }

    pub fn estimates(&self) -> &[GEstimate] {
        &self.estimates
    }

    pub fn context_buffer(&self) -> &VecDeque<DVector<f64>> {
        &self.context_buffer
    }

    fn exploration_len(&self) -> u64 {
        (self.num_actions() * self.s) as u64
    }

    pub fn in_exploration(&self) -> bool {
        self.t <= self.exploration_len()
    }

    /// `Θ_t` for the upcoming round.
    pub fn regressor(&self) -> Result<RegressorWindow> {
        if self.context_buffer.len() < self.s {
            return Err(Error::InvalidState(format!(
                "only {} of {} contexts observed",
                self.context_buffer.len(),
                self.s
            )));
        }
        build_regressor(&self.context_buffer, self.s, self.m)
    }
}

impl Policy for SbEtc {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Sbetc
    }

    fn choose(&self) -> Result<usize> {
        if self.in_exploration() {
            // argmax 1/S_a with 1/0 = +inf: least-pulled arm, lowest index first
            let min = *self.explore_counts.iter().min().expect("k >= 1");
            return Ok(self.explore_counts.iter().position(|&c| c == min).expect("min exists"));
        }
        let theta = self.regressor()?;
        let scores = self.estimates.iter().map(|e| e.predict(&theta)).collect::<Result<Vec<_>>>()?;
        Ok(argmax_lowest(scores))
    }

    fn update(&mut self, context: &DVector<f64>, chosen: usize, reward: f64) -> Result<()> {
        if chosen >= self.num_actions() {
            return Err(invalid(format!("arm {chosen} out of range")));
        }
        if context.len() != self.m {
            return Err(invalid(format!("context has length {}, expected {}", context.len(), self.m)));
        }
        if self.in_exploration() {
            self.explore_counts[chosen] += 1;
        }
        if self.t > self.s as u64 {
            let theta = self.regressor()?;
            self.estimates[chosen].update(&theta, reward, self.t)?;
        }
        if self.context_buffer.len() == self.s {
            self.context_buffer.pop_front();
        }
        self.context_buffer.push_back(context.clone());
        self.t += 1;
        Ok(())
    }
}
