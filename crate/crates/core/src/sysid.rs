//! Regressor windows, the per-arm regularised least-squares estimate of the
//! Markov-parameter row `G_a`, and the ground-truth `G_a` / reward
//! decomposition used by tests and diagnostics.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::kalman::SteadyStateFilter;
use crate::linalg::symmetrize;
use crate::system::DiscreteLinearSystem;

/// Full re-inversion period for the rank-one inverse updates.
const REINVERT_EVERY: usize = 512;

/// `Θ_t = [θ_{t−s}ᵀ … θ_{t−1}ᵀ 1]ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorWindow(DVector<f64>);

impl RegressorWindow {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Stack `s` contexts of length `m` (oldest first) and append the constant 1.
pub fn build_regressor<'a, I>(contexts: I, s: usize, m: usize) -> Result<RegressorWindow>
where
    I: IntoIterator<Item = &'a DVector<f64>>,
{
    let mut theta = DVector::zeros(m * s + 1);
    let mut count = 0;
    for ctx in contexts {
        if count == s {
            return Err(invalid(format!("more than s = {s} contexts supplied")));
        }
        if ctx.len() != m {
            return Err(invalid(format!("context has length {}, expected {m}", ctx.len())));
        }
        theta.rows_mut(count * m, m).copy_from(ctx);
        count += 1;
    }
    if count != s {
        return Err(invalid(format!("expected {s} contexts, got {count}")));
    }
    theta[m * s] = 1.0;
    Ok(RegressorWindow(theta))
}

/// Ground-truth row `G_a` for window length `s`, stored as a column vector.
///
/// Block `τ` (oldest first) is `c_aᵀ L^{s−τ} ΓK` with `L = Γ − ΓKC_θ`; the
/// last entry is `Σ_{j=1}^{s} ⟨c_a, L^{j−1}(μ_ξ − ΓKμ_φ)⟩ + μ_a`, the offset
/// that makes the reward decomposition exact under the steady-state predictor.
pub fn true_g(
    system: &DiscreteLinearSystem,
    filter: &SteadyStateFilter,
    s: usize,
    action_index: usize,
) -> Result<DVector<f64>> {
    if s == 0 {
        return Err(invalid("window length s must be >= 1"));
    }
    let action = system.action(action_index)?;
    let m = system.context_dim();
    let drive = system.mu_xi() - &filter.predictor_gain * system.mu_phi();
    let mut g = DVector::zeros(m * s + 1);
    // row = c_aᵀ L^{j−1}, j = 1..s; block for θ_{t−j} sits at index s − j
    let mut row = action.c.transpose();
    let mut offset = action.mu;
    for j in 1..=s {
        let block = &row * &filter.predictor_gain;
        g.rows_mut((s - j) * m, m).copy_from(&block.transpose());
        offset += (&row * &drive)[0];
        row = &row * &filter.closed_loop;
    }
    g[m * s] = offset;
    Ok(g)
}

/// Inputs for [`decompose_reward`]: the `s` contexts preceding round `t`,
/// the steady-state prediction `ẑ_{t−s}`, and the observed reward `X_t`.
#[derive(Debug, Clone)]
pub struct TrajectoryWindow {
    pub contexts: Vec<DVector<f64>>,
    pub z_hat_start: DVector<f64>,
    pub reward: f64,
}

/// `X_t = G_aΘ_t + ⟨c_a, L^s ẑ_{t−s}⟩ + ε_{a;t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardDecomposition {
    pub regression_term: f64,
    pub bias_term: f64,
    pub residual: f64,
}

pub fn bias_term(
    system: &DiscreteLinearSystem,
    filter: &SteadyStateFilter,
    s: usize,
    z_hat_start: &DVector<f64>,
    action_index: usize,
) -> Result<f64> {
    let action = system.action(action_index)?;
    if z_hat_start.len() != system.state_dim() {
        return Err(invalid("z_hat_start has the wrong dimension"));
    }
    let mut z = z_hat_start.clone();
    for _ in 0..s {
        z = &filter.closed_loop * z;
    }
    Ok(action.c.dot(&z))
}

pub fn decompose_reward(
    system: &DiscreteLinearSystem,
    filter: &SteadyStateFilter,
    window: &TrajectoryWindow,
    action_index: usize,
) -> Result<RewardDecomposition> {
    let s = window.contexts.len();
    if s == 0 {
        return Err(invalid("insufficient history: no contexts in window"));
    }
    let theta = build_regressor(&window.contexts, s, system.context_dim())?;
    let g = true_g(system, filter, s, action_index)?;
    let regression_term = g.dot(theta.as_vector());
    let bias = bias_term(system, filter, s, &window.z_hat_start, action_index)?;
    Ok(RewardDecomposition {
        regression_term,
        bias_term: bias,
        residual: window.reward - regression_term - bias,
    })
}

/// Online ridge estimate `Ĝ_a = (Σ X_τΘ_τᵀ) V_a⁻¹`, `V_a = λI + Σ Θ_τΘ_τᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GEstimate {
    g_hat: DVector<f64>,
    v: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    b: DVector<f64>,
    sample_times: BTreeSet<u64>,
    lambda: f64,
    since_reinvert: usize,
}

impl GEstimate {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("regularisation lambda must be finite and > 0, got {lambda}")));
        }
        if dim == 0 {
            return Err(invalid("regressor dimension must be >= 1"));
        }
        Ok(Self {
            g_hat: DVector::zeros(dim),
            v: DMatrix::identity(dim, dim) * lambda,
            v_inv: DMatrix::identity(dim, dim) / lambda,
            b: DVector::zeros(dim),
            sample_times: BTreeSet::new(),
            lambda,
            since_reinvert: 0,
        })
    }

    pub fn g_hat(&self) -> &DVector<f64> {
        &self.g_hat
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn v_inv(&self) -> &DMatrix<f64> {
        &self.v_inv
    }

    /// `Σ X_τ Θ_τ`.
    pub fn cross_moment(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn sample_times(&self) -> &BTreeSet<u64> {
        &self.sample_times
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `N_a`.
    pub fn num_samples(&self) -> usize {
        self.sample_times.len()
    }

    pub fn dim(&self) -> usize {
        self.g_hat.len()
    }

    pub fn update(&mut self, regressor: &RegressorWindow, reward: f64, time: u64) -> Result<()> {
        let theta = regressor.as_vector();
        if theta.len() != self.dim() {
            return Err(invalid(format!("regressor has length {}, expected {}", theta.len(), self.dim())));
        }
        if !reward.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite sample"));
        }
        if self.sample_times.contains(&time) {
            return Err(invalid(format!("time {time} already used by this estimate")));
        }
        self.v.ger(1.0, theta, theta, 1.0);
        self.b.axpy(reward, theta, 1.0);
        self.since_reinvert += 1;
        if self.since_reinvert >= REINVERT_EVERY {
            self.v_inv = self
                .v
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Numerical("V_a lost positive definiteness".into()))?
                .inverse();
            self.since_reinvert = 0;
        } else {
            // Sherman–Morrison: (V + θθᵀ)⁻¹ = V⁻¹ − V⁻¹θθᵀV⁻¹ / (1 + θᵀV⁻¹θ)
            let u = &self.v_inv * theta;
            let denom = 1.0 + theta.dot(&u);
            self.v_inv.ger(-1.0 / denom, &u, &u, 1.0);
        }
        self.v_inv = symmetrize(&self.v_inv);
        self.g_hat = &self.v_inv * &self.b;
        self.sample_times.insert(time);
        Ok(())
    }

    /// `Ĝ_aΘ_t`.
    pub fn predict(&self, regressor: &RegressorWindow) -> Result<f64> {
        if regressor.len() != self.dim() {
            return Err(invalid(format!("regressor has length {}, expected {}", regressor.len(), self.dim())));
        }
        Ok(self.g_hat.dot(regressor.as_vector()))
    }

    /// Diagnostic CSV row: `label,n_samples,g_0,…,g_{ms}`.
    pub fn to_csv_row(&self, label: &str) -> String {
        let mut row = format!("{label},{}", self.num_samples());
        for g in self.g_hat.iter() {
            row.push(',');
            row.push_str(&crate::harness::format_sig(*g));
        }
        row
    }
}
