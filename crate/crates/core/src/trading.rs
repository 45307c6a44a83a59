//! Trading bandit built from a continuous-time market model.
//!
//! Each asset `i` has log-price `Y` and a mean-reverting drift `M`:
//!
//! ```text
//! dY = (M − ½) dτ + dW,     dM = κ_i (m̄ − M) dτ + σ_i dV
//! ```
//!
//! The pipeline is: stack into `d[y; m] = (F[y; m] + B_μ) dτ + dw`, discretize
//! exactly over `ΔT` (matrix exponential, drift series, Van Loan noise
//! integral), augment with the lagged log-prices so that the context
//! `θ_t = y(t) − y(t−ΔT)` is a linear read-out, and finally project onto the
//! invariant subspace of the non-unit eigenvalues. The integrated price-level
//! modes (eigenvalue 1) are invisible to the differenced observation and are
//! dropped, which leaves a Schur, observable system.
//!
//! Arms are "buy asset `i` at `t − ΔT`, sell at `t`" (reward = log return of
//! asset `i`) plus a zero arm that refrains from trading.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, symmetrize};
use crate::system::{Action, DiscreteLinearSystem, SystemParams};

/// Convergence threshold for the drift series, relative to the partial sum.
const SERIES_REL_TOL: f64 = 1e-15;
const SERIES_MAX_TERMS: usize = 60;
/// Eigenvalues with `|λ − 1|` below this are treated as price-level modes.
const UNIT_MODE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousMarketSpec {
    /// Mean-reversion speed of each asset's drift.
    #[serde(default = "default_kappa")]
    pub kappa: Vec<f64>,
    /// Volatility of each asset's drift.
    #[serde(default = "default_sigma")]
    pub sigma: Vec<f64>,
    /// Long-run level of the drift.
    #[serde(default = "default_drift_mean")]
    pub drift_mean: f64,
    /// Sampling interval `ΔT`.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
}

fn default_kappa() -> Vec<f64> {
    vec![0.1, 1.0]
}

fn default_sigma() -> Vec<f64> {
    vec![10.0, 1.0]
}

fn default_drift_mean() -> f64 {
    0.5
}

// e^{-0.1·ΔT} = 0.9512 and e^{-ΔT} = 0.6065 pin ΔT = 0.5
fn default_dt() -> f64 {
    0.5
}

fn default_horizon() -> u64 {
    10_000
}

impl Default for ContinuousMarketSpec {
    fn default() -> Self {
        Self {
            kappa: default_kappa(),
            sigma: default_sigma(),
            drift_mean: default_drift_mean(),
            dt: default_dt(),
            horizon: default_horizon(),
        }
    }
}

impl ContinuousMarketSpec {
    pub fn num_assets(&self) -> usize {
        self.kappa.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa.is_empty() || self.kappa.len() != self.sigma.len() {
            return Err(invalid("kappa and sigma must be nonempty and of equal length"));
        }
        if self.kappa.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(invalid("kappa entries must be finite and > 0"));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("sigma entries must be finite and > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt must be finite and > 0"));
        }
        if !self.drift_mean.is_finite() {
            return Err(invalid("drift_mean must be finite"));
        }
        Ok(())
    }
}

/// `d[y; m] = (F[y; m] + B_μ) dτ + dw`, `dw ~ N(0, Σ dτ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSystem {
    pub f: DMatrix<f64>,
    pub b_mu: DVector<f64>,
    pub sigma_c: DMatrix<f64>,
}

/// Log transform of the price SDE. With `n` assets, `F = [[0, I],[0, −κ]]`,
/// `B_μ = (−½ …, κ_i·m̄ …)` (the −½ is the Itô correction for unit price
/// volatility) and `Σ = diag(1 …, σ_i² …)`.
pub fn ito_transform(spec: &ContinuousMarketSpec) -> ContinuousSystem {
    let n = spec.num_assets();
    let mut f = DMatrix::zeros(2 * n, 2 * n);
    let mut b_mu = DVector::zeros(2 * n);
    let mut var = DVector::zeros(2 * n);
    for i in 0..n {
        f[(i, n + i)] = 1.0;
        f[(n + i, n + i)] = -spec.kappa[i];
        b_mu[i] = -0.5;
        b_mu[n + i] = spec.kappa[i] * spec.drift_mean;
        var[i] = 1.0;
        var[n + i] = spec.sigma[i] * spec.sigma[i];
    }
    ContinuousSystem { f, b_mu, sigma_c: DMatrix::from_diagonal(&var) }
}

/// Matrix exponential (Padé approximant with scaling and squaring).
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(invalid("matrix exponential of a non-square matrix"));
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix exponential input is not finite".into()));
    }
    let e = m.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    Ok(e)
}

/// `ΔB_μ = Σ_{i≥0} F^i B_μ ΔT^{i+1}/(i+1)!`, i.e. `∫₀^ΔT e^{Fτ} B_μ dτ`.
pub fn discretize_drift(cont: &ContinuousSystem, dt: f64) -> Result<DVector<f64>> {
    let mut term = &cont.b_mu * dt;
    let mut sum = term.clone();
    for i in 1..=SERIES_MAX_TERMS {
        term = &cont.f * term * (dt / (i + 1) as f64);
        sum += &term;
        if term.norm() <= SERIES_REL_TOL * sum.norm() || term.iter().all(|v| *v == 0.0) {
            return Ok(sum);
        }
    }
    Err(Error::Numerical(format!("drift series did not converge in {SERIES_MAX_TERMS} terms")))
}

/// Discrete noise covariance `Ξ = ∫₀^ΔT e^{Fτ} Σ e^{Fᵀτ} dτ` by Van Loan's
/// method: with `Φ = exp([[−F, Σ],[0, Fᵀ]]·ΔT)`, `Ξ = Φ₂₂ᵀ Φ₁₂`.
pub fn van_loan_noise(cont: &ContinuousSystem, dt: f64) -> Result<DMatrix<f64>> {
    let n = cont.f.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-&cont.f));
    block.view_mut((0, n), (n, n)).copy_from(&cont.sigma_c);
    block.view_mut((n, n), (n, n)).copy_from(&cont.f.transpose());
    let phi = matrix_exponential(&(block * dt))?;
    let phi_12 = phi.view((0, n), (n, n)).clone_owned();
    let phi_22 = phi.view((n, n), (n, n)).clone_owned();
    let xi = phi_22.transpose() * phi_12;
    let asym = linalg::max_abs(&(&xi - xi.transpose()));
    if asym > 1e-8 * linalg::max_abs(&xi).max(1.0) {
        return Err(Error::Numerical(format!("Van Loan result is asymmetric by {asym:e}")));
    }
    Ok(symmetrize(&xi))
}

/// Exact discretization over one sampling interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationResult {
    /// `exp(FΔT)`
    pub a_d: DMatrix<f64>,
    /// `ΔB_μ`
    pub delta_b: DVector<f64>,
    /// `Ξ`
    pub xi: DMatrix<f64>,
}

pub fn discretize(cont: &ContinuousSystem, dt: f64) -> Result<DiscretizationResult> {
    Ok(DiscretizationResult {
        a_d: matrix_exponential(&(&cont.f * dt))?,
        delta_b: discretize_drift(cont, dt)?,
        xi: van_loan_noise(cont, dt)?,
    })
}

/// Discretized model augmented with lagged log-prices, state
/// `z = [y(t); m(t); y(t−ΔT)]`. Not Schur (the price levels are integrated)
/// and its noise covariance is singular, so it is kept as plain matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub gamma: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub mu_xi: DVector<f64>,
    pub c_theta: DMatrix<f64>,
    pub actions: Vec<DVector<f64>>,
}

pub fn augment(disc: &DiscretizationResult) -> AugmentedSystem {
    let two_n = disc.a_d.nrows();
    let n = two_n / 2;
    let dim = two_n + n;
    let mut gamma = DMatrix::zeros(dim, dim);
    gamma.view_mut((0, 0), (two_n, two_n)).copy_from(&disc.a_d);
    let mut q = DMatrix::zeros(dim, dim);
    q.view_mut((0, 0), (two_n, two_n)).copy_from(&disc.xi);
    let mut mu_xi = DVector::zeros(dim);
    mu_xi.rows_mut(0, two_n).copy_from(&disc.delta_b);
    let mut c_theta = DMatrix::zeros(n, dim);
    for i in 0..n {
        gamma[(two_n + i, i)] = 1.0;
        c_theta[(i, i)] = 1.0;
        c_theta[(i, two_n + i)] = -1.0;
    }
    let mut actions: Vec<DVector<f64>> = (0..n).map(|i| c_theta.row(i).transpose()).collect();
    actions.push(DVector::zeros(dim));
    AugmentedSystem { gamma, q, mu_xi, c_theta, actions }
}

/// Eigenbasis split used by the reduction: `basis` spans the kept modes,
/// `dual` holds the matching rows of `[U U′]⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalReduction {
    pub basis: DMatrix<f64>,
    pub dual: DMatrix<f64>,
    pub kept_eigenvalues: Vec<f64>,
    pub dropped_eigenvalues: Vec<f64>,
}

/// Real eigenvectors of a diagonalizable matrix whose spectrum is real.
/// Vectors are unit length with their largest-magnitude component positive.
fn real_eigenbasis(m: &DMatrix<f64>) -> Result<Vec<(f64, DVector<f64>)>> {
    let eig = linalg::eigenvalues(m)?;
    let scale = linalg::max_abs(m).max(1.0);
    if let Some(c) = eig.iter().find(|c| c.im.abs() > 1e-9 * scale) {
        return Err(Error::Construction(format!("complex eigenvalue {c} not supported")));
    }
    let mut values: Vec<f64> = eig.iter().map(|c| c.re).collect();
    values.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));

    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for v in values {
        match clusters.last_mut() {
            Some(c) if (c[0] - v).abs() <= 1e-7 * scale => c.push(v),
            _ => clusters.push(vec![v]),
        }
    }
    let n = m.nrows();
    let mut out = Vec::with_capacity(n);
    for cluster in clusters {
        let lambda = cluster.iter().sum::<f64>() / cluster.len() as f64;
        let shifted = m - DMatrix::identity(n, n) * lambda;
        let kernel = linalg::null_space(&shifted, 1e-8 * scale);
        if kernel.ncols() != cluster.len() {
            return Err(Error::Construction(format!(
                "eigenvalue {lambda} has algebraic multiplicity {} but {} eigenvectors",
                cluster.len(),
                kernel.ncols()
            )));
        }
        for col in kernel.column_iter() {
            let mut v = col.normalize();
            let pivot = v.iter().copied().fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if pivot < 0.0 {
                v = -v;
            }
            out.push((lambda, v));
        }
    }
    Ok(out)
}

/// Project the augmented system onto the invariant subspace of its non-unit
/// eigenvalues.
pub fn reduce(aug: &AugmentedSystem) -> Result<(DiscreteLinearSystem, ModalReduction)> {
    let modes = real_eigenbasis(&aug.gamma)?;
    let (dropped, kept): (Vec<_>, Vec<_>) = modes.into_iter().partition(|(l, _)| (l - 1.0).abs() < UNIT_MODE_TOL);
    if kept.is_empty() {
        return Err(Error::Construction("no modes left after dropping unit eigenvalues".into()));
    }
    let r = kept.len();
    let full = DMatrix::from_columns(&kept.iter().chain(&dropped).map(|(_, v)| v.clone()).collect::<Vec<_>>());
    let inverse = full
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Construction("eigenvector matrix is singular".into()))?;
    let basis = full.columns(0, r).clone_owned();
    let dual = inverse.rows(0, r).clone_owned();

    if !dropped.is_empty() {
        let dropped_basis = full.columns(r, dropped.len()).clone_owned();
        let leak = linalg::max_abs(&(&aug.c_theta * &dropped_basis));
        let action_leak = aug.actions.iter().map(|c| (c.transpose() * &dropped_basis).amax()).fold(0.0, f64::max);
        if leak.max(action_leak) > 1e-9 {
            return Err(Error::Construction(format!(
                "context or rewards depend on the dropped unit modes (leak {:e})",
                leak.max(action_leak)
            )));
        }
    }

    let gamma = &dual * &aug.gamma * &basis;
    let c_theta = &aug.c_theta * &basis;
    let q = symmetrize(&(&dual * &aug.q * dual.transpose()));
    let mu_xi = &dual * &aug.mu_xi;
    let m = c_theta.nrows();
    let actions = aug.actions.iter().map(|c| Action::new(basis.transpose() * c, 0.0)).collect();
    let mu_0 = (DMatrix::identity(r, r) - &gamma)
        .lu()
        .solve(&mu_xi)
        .ok_or_else(|| Error::Construction("I − Γ is singular on the kept modes".into()))?;
    let sigma_0 = linalg::discrete_lyapunov(&gamma, &q)?;
    let system = DiscreteLinearSystem::new(SystemParams {
        gamma,
        c_theta,
        mu_xi,
        q,
        mu_phi: DVector::zeros(m),
        r_phi: DMatrix::zeros(m, m),
        sigma_eta: 0.0,
        actions,
        mu_0,
        sigma_0,
    })
    .map_err(|e| Error::Construction(format!("reduced system rejected: {e}")))?;
    let reduction = ModalReduction {
        basis,
        dual,
        kept_eigenvalues: kept.iter().map(|(l, _)| *l).collect(),
        dropped_eigenvalues: dropped.iter().map(|(l, _)| *l).collect(),
    };
    Ok((system, reduction))
}

/// Every intermediate of the construction, for inspection and testing.
#[derive(Debug, Clone)]
pub struct TradingConstruction {
    pub continuous: ContinuousSystem,
    pub discretization: DiscretizationResult,
    pub augmented: AugmentedSystem,
    pub reduction: ModalReduction,
    pub system: DiscreteLinearSystem,
}

pub fn construct_trading(spec: &ContinuousMarketSpec) -> Result<TradingConstruction> {
    spec.validate()?;
    let continuous = ito_transform(spec);
    let discretization = discretize(&continuous, spec.dt)?;
    let augmented = augment(&discretization);
    let (system, reduction) = reduce(&augmented)?;
    Ok(TradingConstruction { continuous, discretization, augmented, reduction, system })
}

/// The reduced trading bandit: one "trade asset i" arm per asset plus the
/// zero arm, all with `μ_a = 0`. The initial state is the stationary law.
pub fn build_trading_system(spec: &ContinuousMarketSpec) -> Result<DiscreteLinearSystem> {
    Ok(construct_trading(spec)?.system)
}

/// Timeline of a run on the trading scenario as CSV
/// (`round,arm,action,buy_time,sell_time`). Round `t` buys at `(t−1)ΔT` and
/// sells at `tΔT`; the last arm holds.
pub fn scenario_timeline_render(arms: &[usize], num_assets: usize, dt: f64) -> String {
    let mut out = String::from("round,arm,action,buy_time,sell_time\n");
    for (i, &arm) in arms.iter().enumerate() {
        let round = i as u64 + 1;
        if arm < num_assets {
            let _ = writeln!(
                out,
                "{round},{arm},trade-stock-{},{},{}",
                arm + 1,
                crate::harness::format_sig((round - 1) as f64 * dt),
                crate::harness::format_sig(round as f64 * dt)
            );
        } else {
            let _ = writeln!(out, "{round},{arm},hold,,");
        }
    }
    out
}
