//! Time-varying Kalman filter, steady-state gain from the discrete algebraic
//! Riccati equation, and the oracle reward predictor built on them.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, symmetrize};
use crate::system::DiscreteLinearSystem;

const DARE_TOL: f64 = 1e-12;
const DARE_MAX_ITER: usize = 100_000;

/// Filter state after the measurement update at round `t` and the time update
/// to `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    /// `ẑ_{t|t−1}`
    pub z_pred: DVector<f64>,
    /// `P_{t|t−1}`
    pub p_pred: DMatrix<f64>,
    /// `ẑ_{t|t}`
    pub z_filt: DVector<f64>,
    /// `P_{t|t}`
    pub p_filt: DMatrix<f64>,
    /// Gain `K_t` used by the last measurement update (zero before the first).
    pub gain: DMatrix<f64>,
}

impl KalmanState {
    /// Prior `ẑ_{0|−1} = μ_0`, `P_{0|−1} = Σ_0`.
    pub fn from_prior(system: &DiscreteLinearSystem) -> Self {
        Self::new(system.mu_0().clone(), system.sigma_0().clone(), system.context_dim())
    }

    pub fn new(z_pred: DVector<f64>, p_pred: DMatrix<f64>, context_dim: usize) -> Self {
        let d = z_pred.len();
        Self {
            z_filt: z_pred.clone(),
            p_filt: p_pred.clone(),
            z_pred,
            p_pred,
            gain: DMatrix::zeros(d, context_dim),
        }
    }
}

/// One measurement update with `θ_t` followed by one time update.
pub fn kf_step(system: &DiscreteLinearSystem, state: &KalmanState, context: &DVector<f64>) -> Result<KalmanState> {
    let d = system.state_dim();
    if state.z_pred.len() != d || state.p_pred.shape() != (d, d) {
        return Err(invalid("kalman state does not match system dimensions"));
    }
    if context.len() != system.context_dim() {
        return Err(invalid(format!("context has length {}, expected {}", context.len(), system.context_dim())));
    }
    let c = system.c_theta();
    let p = &state.p_pred;
    let innovation_cov = symmetrize(&(c * p * c.transpose() + system.r_phi()));
    let chol = innovation_cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    // K = P Cᵀ S⁻¹  <=>  Kᵀ = S⁻¹ C P
    let gain = chol.solve(&(c * p)).transpose();

    let innovation = context - c * &state.z_pred - system.mu_phi();
    let z_filt = &state.z_pred + &gain * innovation;
    let p_filt = symmetrize(&(p - &gain * c * p));

    let g = system.gamma();
    let z_pred = g * &z_filt + system.mu_xi();
    let p_pred = symmetrize(&(g * &p_filt * g.transpose() + system.q()));
    Ok(KalmanState { z_pred, p_pred, z_filt, p_filt, gain })
}

/// Converged filter: gain `K`, prediction covariance `P`, and the cached
/// closed-loop matrix `Γ − ΓKC_θ` together with `ΓK`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateFilter {
    pub k_gain: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub closed_loop: DMatrix<f64>,
    pub predictor_gain: DMatrix<f64>,
    pub iterations: usize,
}

/// The Riccati map `ΓPΓᵀ + Q − ΓPCᵀ(CPCᵀ+R)⁻¹CPΓᵀ`.
pub fn riccati_map(system: &DiscreteLinearSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = system.gamma();
    let c = system.c_theta();
    let s = symmetrize(&(c * p * c.transpose() + system.r_phi()));
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    let gp = g * p;
    let cpg = c * gp.transpose();
    Ok(symmetrize(&(&gp * g.transpose() + system.q() - cpg.transpose() * chol.solve(&cpg))))
}

/// Frobenius norm of `P − Riccati(P)`.
pub fn riccati_residual(system: &DiscreteLinearSystem, p: &DMatrix<f64>) -> Result<f64> {
    Ok((riccati_map(system, p)? - p).norm())
}

/// Fixed-point iteration of the Riccati map from `P⁰ = Q`.
pub fn solve_dare(system: &DiscreteLinearSystem) -> Result<SteadyStateFilter> {
    let mut p = system.q().clone();
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < DARE_MAX_ITER {
        let next = riccati_map(system, &p)?;
        change = (&next - &p).norm();
        p = next;
        iterations += 1;
        if change <= DARE_TOL * p.norm().max(1.0) {
            return steady_from_p(system, p, iterations);
        }
    }
    Err(Error::NonConvergence { iterations, residual: change })
}

fn steady_from_p(system: &DiscreteLinearSystem, p: DMatrix<f64>, iterations: usize) -> Result<SteadyStateFilter> {
    let c = system.c_theta();
    let s = symmetrize(&(c * &p * c.transpose() + system.r_phi()));
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    let k_gain = chol.solve(&(c * &p)).transpose();
    let predictor_gain = system.gamma() * &k_gain;
    let closed_loop = system.gamma() - &predictor_gain * c;
    let rho = linalg::spectral_radius(&closed_loop)?;
    if rho >= 1.0 {
        return Err(Error::Numerical(format!("closed-loop predictor is not Schur (spectral radius {rho})")));
    }
    Ok(SteadyStateFilter { k_gain, p, closed_loop, predictor_gain, iterations })
}

/// `X̂ = ⟨c_a, ẑ⟩ + μ_a`.
pub fn oracle_predict(system: &DiscreteLinearSystem, z_hat: &DVector<f64>, action_index: usize) -> Result<f64> {
    let action = system.action(action_index)?;
    if z_hat.len() != action.c.len() {
        return Err(invalid("state estimate has the wrong dimension"));
    }
    Ok(action.mean_reward(z_hat))
}

/// `ẑ_{t+1} = Γẑ_t + μ_ξ + ΓK(θ_t − C_θẑ_t − μ_φ)`.
pub fn steady_predictor_step(
    system: &DiscreteLinearSystem,
    filter: &SteadyStateFilter,
    z_hat: &DVector<f64>,
    context: &DVector<f64>,
) -> DVector<f64> {
    let innovation = context - system.c_theta() * z_hat - system.mu_phi();
    system.gamma() * z_hat + system.mu_xi() + &filter.predictor_gain * innovation
}
