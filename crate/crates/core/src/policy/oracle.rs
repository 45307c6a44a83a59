use std::sync::Arc;

use nalgebra::DVector;

use super::{argmax_lowest, Policy, PolicyKind};
use crate::error::{invalid, Result};
use crate::kalman::{kf_step, KalmanState};
use crate::system::DiscreteLinearSystem;

/// `argmax_a ⟨c_a, ẑ_{t|t−1}⟩ + μ_a`, ties to the lowest index.
pub fn oracle_choose(system: &DiscreteLinearSystem, z_hat: &DVector<f64>) -> usize {
    argmax_lowest(system.actions().iter().map(|a| a.mean_reward(z_hat)))
}

/// Performance ceiling: knows the true system and runs the time-varying
/// Kalman filter from the true prior `(μ_0, Σ_0)`.
#[derive(Debug, Clone)]
pub struct KalmanOracle {
    system: Arc<DiscreteLinearSystem>,
    filter: KalmanState,
}

impl KalmanOracle {
    pub fn new(system: Arc<DiscreteLinearSystem>) -> Self {
        let filter = KalmanState::from_prior(&system);
        Self { system, filter }
    }

    pub fn filter(&self) -> &KalmanState {
        &self.filter
    }
}

impl Policy for KalmanOracle {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn choose(&self) -> Result<usize> {
        Ok(oracle_choose(&self.system, &self.filter.z_pred))
    }

    fn update(&mut self, context: &DVector<f64>, chosen: usize, _reward: f64) -> Result<()> {
        if chosen >= self.system.num_actions() {
            return Err(invalid(format!("arm {chosen} out of range")));
        }
        self.filter = kf_step(&self.system, &self.filter, context)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Action, RngSeed, SystemParams};
    use nalgebra::DMatrix;

    fn two_arm(actions: Vec<Action>, q: f64) -> DiscreteLinearSystem {
        DiscreteLinearSystem::new(SystemParams {
            gamma: DMatrix::from_row_slice(2, 2, &[0.0, 0.9, -0.9, 0.0]),
            c_theta: DMatrix::identity(2, 2),
            mu_xi: DVector::zeros(2),
            q: DMatrix::identity(2, 2) * q,
            mu_phi: DVector::zeros(2),
            r_phi: DMatrix::zeros(2, 2),
            sigma_eta: 0.0,
            actions,
            mu_0: DVector::from_vec(vec![1.0, 0.0]),
            sigma_0: DMatrix::identity(2, 2) * q,
        })
        .unwrap()
    }

    #[test]
    fn ties_and_simple_argmax() {
        let zero = vec![Action::new(DVector::zeros(2), 0.5), Action::new(DVector::zeros(2), 0.5)];
        assert_eq!(oracle_choose(&two_arm(zero, 1.0), &DVector::from_vec(vec![3.0, -2.0])), 0);
        let unit = vec![
            Action::new(DVector::from_vec(vec![1.0, 0.0]), 0.0),
            Action::new(DVector::from_vec(vec![0.0, 1.0]), 0.0),
        ];
        assert_eq!(oracle_choose(&two_arm(unit, 1.0), &DVector::from_vec(vec![1.0, 0.0])), 0);
    }

    #[test]
    fn noise_free_oracle_is_exact() {
        let unit = vec![
            Action::new(DVector::from_vec(vec![1.0, 0.0]), 0.0),
            Action::new(DVector::from_vec(vec![0.0, 1.0]), 0.05),
        ];
        let sys = Arc::new(two_arm(unit, 1e-300));
        let mut oracle = KalmanOracle::new(sys.clone());
        let mut rng = RngSeed(2).stream(0);
        let mut sim = sys.init_state(&mut rng);
        for _ in 0..60 {
            let a = oracle.choose().unwrap();
            let out = sys.step(&mut sim, a, &mut rng).unwrap();
            let best = argmax_lowest(sys.actions().iter().map(|c| c.mean_reward(&out.latent)));
            assert_eq!(a, best);
            oracle.update(&out.context, a, out.reward).unwrap();
        }
    }
}
