use nalgebra::DVector;

use super::{argmax_lowest, Policy, PolicyKind};
use crate::error::{invalid, Result};

/// UCB(δ): play every arm once, then `argmax_a mean_a + √(2·ln(1/δ)/N_a)`.
/// Rewards are treated as i.i.d. per arm; contexts are ignored.
#[derive(Debug, Clone)]
pub struct Ucb {
    counts: Vec<u64>,
    means: Vec<f64>,
    delta: f64,
    t: u64,
}

impl Ucb {
    pub fn new(k: usize, delta: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("UCB needs k >= 1"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("UCB delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { counts: vec![0; k], means: vec![0.0; k], delta, t: 0 })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn index(&self, arm: usize) -> f64 {
        let n = self.counts[arm];
        if n == 0 {
            return f64::INFINITY;
        }
        self.means[arm] + (2.0 * (1.0 / self.delta).ln() / n as f64).sqrt()
    }
}

impl Policy for Ucb {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Ucb
    }

    fn choose(&self) -> Result<usize> {
        if let Some(unpulled) = self.counts.iter().position(|&n| n == 0) {
            return Ok(unpulled);
        }
        Ok(argmax_lowest((0..self.counts.len()).map(|a| self.index(a))))
    }

    fn update(&mut self, _context: &DVector<f64>, chosen: usize, reward: f64) -> Result<()> {
        if chosen >= self.counts.len() {
            return Err(invalid(format!("arm {chosen} out of range")));
        }
        if !reward.is_finite() {
            return Err(invalid("non-finite reward"));
        }
        self.counts[chosen] += 1;
        self.means[chosen] += (reward - self.means[chosen]) / self.counts[chosen] as f64;
        self.t += 1;
        Ok(())
    }
}
