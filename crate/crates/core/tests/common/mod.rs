//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use lds_bandit::sysid::RegressorWindow;
use lds_bandit::trading::{AugmentedSystem, ContinuousMarketSpec};
use lds_bandit::DiscreteLinearSystem;
use nalgebra::{DMatrix, DVector};

/// Adaptive Simpson quadrature of a matrix-valued integrand, refined until
/// the Richardson error estimate is below `tol` in max-norm.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, b, &fa, &fm, &fb);
    refine(f, a, b, &fa, &fm, &fb, &whole, tol, 50)
}

fn simpson(a: f64, b: f64, fa: &DMatrix<f64>, fm: &DMatrix<f64>, fb: &DMatrix<f64>) -> DMatrix<f64> {
    (fa + fm * 4.0 + fb) * ((b - a) / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: &DMatrix<f64>,
    fm: &DMatrix<f64>,
    fb: &DMatrix<f64>,
    whole: &DMatrix<f64>,
    tol: f64,
    depth: u32,
) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = simpson(a, m, fa, &flm, fm);
    let right = simpson(m, b, fm, &frm, fb);
    let diff = &left + &right - whole;
    if depth == 0 || diff.amax() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    refine(f, a, m, fa, &flm, fm, &left, tol / 2.0, depth - 1) + refine(f, m, b, fm, &frm, fb, &right, tol / 2.0, depth - 1)
}

/// `exp(Fτ)` for the stacked market model in closed form:
/// `[[I, diag((1 − e^{−κτ})/κ)], [0, diag(e^{−κτ})]]`.
pub fn market_exp(spec: &ContinuousMarketSpec, tau: f64) -> DMatrix<f64> {
    let n = spec.num_assets();
    let mut e = DMatrix::identity(2 * n, 2 * n);
    for (i, k) in spec.kappa.iter().enumerate() {
        let decay = (-k * tau).exp();
        e[(i, n + i)] = (1.0 - decay) / k;
        e[(n + i, n + i)] = decay;
    }
    e
}

pub fn market_sigma(spec: &ContinuousMarketSpec) -> DMatrix<f64> {
    let n = spec.num_assets();
    let mut d = DVector::from_element(2 * n, 1.0);
    for (i, s) in spec.sigma.iter().enumerate() {
        d[n + i] = s * s;
    }
    DMatrix::from_diagonal(&d)
}

pub fn market_drift(spec: &ContinuousMarketSpec) -> DMatrix<f64> {
    let n = spec.num_assets();
    let mut b = DMatrix::zeros(2 * n, 1);
    for (i, k) in spec.kappa.iter().enumerate() {
        b[(i, 0)] = -0.5;
        b[(n + i, 0)] = k * spec.drift_mean;
    }
    b
}

/// `∫₀^ΔT e^{F(ΔT−τ)} Σ e^{Fᵀ(ΔT−τ)} dτ` by quadrature.
pub fn noise_integral(spec: &ContinuousMarketSpec, tol: f64) -> DMatrix<f64> {
    let sigma = market_sigma(spec);
    let f = |tau: f64| {
        let e = market_exp(spec, spec.dt - tau);
        &e * &sigma * e.transpose()
    };
    adaptive_simpson(&f, 0.0, spec.dt, tol)
}

/// `∫₀^ΔT e^{Fτ} B_μ dτ` by quadrature.
pub fn drift_integral(spec: &ContinuousMarketSpec, tol: f64) -> DVector<f64> {
    let b = market_drift(spec);
    let f = |tau: f64| market_exp(spec, tau) * &b;
    adaptive_simpson(&f, 0.0, spec.dt, tol).column(0).into_owned()
}

/// Stationary model of the unreduced augmented system in difference
/// coordinates `w = [m; y − y_lag] = Mz`. The kernel of `M` (equal current
/// and lagged price levels, zero drift) is invariant under the augmented
/// transition, so `Γ_w = MΓM⁺` is exact.
pub struct DifferenceModel {
    pub gamma: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub c: DMatrix<f64>,
    pub actions: Vec<DVector<f64>>,
}

pub fn difference_model(aug: &AugmentedSystem) -> DifferenceModel {
    let n = aug.c_theta.nrows();
    let mut m = DMatrix::zeros(2 * n, 3 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = 1.0;
        m[(n + i, 2 * n + i)] = -1.0;
    }
    let pinv = m.clone().pseudo_inverse(1e-12).unwrap();
    let gamma = &m * &aug.gamma * &pinv;
    assert!((&m * &aug.gamma - &gamma * &m).amax() < 1e-12, "kernel of M is not invariant");
    DifferenceModel {
        q: &m * &aug.q * m.transpose(),
        mu: &m * &aug.mu_xi,
        c: &aug.c_theta * &pinv,
        actions: aug.actions.iter().map(|a| pinv.transpose() * a).collect(),
        gamma,
    }
}

/// Stationary covariance by the doubling iteration `X ← X + AXAᵀ`, `A ← A²`.
pub fn lyapunov_doubling(gamma: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = q.clone();
    let mut a = gamma.clone();
    for _ in 0..60 {
        let next = &x + &a * &x * a.transpose();
        a = &a * &a;
        if (&next - &x).amax() <= 1e-16 * next.amax() {
            return next;
        }
        x = next;
    }
    x
}

/// `Cov(θ_{t+k}, θ_t) = CΓᵏΣCᵀ` for `k = 0..=lags`.
pub fn context_autocovariance(gamma: &DMatrix<f64>, c: &DMatrix<f64>, sigma: &DMatrix<f64>, lags: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(lags + 1);
    let mut gk = DMatrix::identity(gamma.nrows(), gamma.nrows());
    for _ in 0..=lags {
        out.push(c * &gk * sigma * c.transpose());
        gk = gamma * gk;
    }
    out
}

pub fn stationary_mean(gamma: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64> {
    let n = gamma.nrows();
    (DMatrix::identity(n, n) - gamma).lu().solve(mu).unwrap()
}

pub fn reduced_autocovariance(system: &DiscreteLinearSystem, lags: usize) -> Vec<DMatrix<f64>> {
    let sigma = lyapunov_doubling(system.gamma(), system.q());
    context_autocovariance(system.gamma(), system.c_theta(), &sigma, lags)
}

/// Batch ridge solution `(λI + ΣΘΘᵀ)⁻¹ ΣΘX` by LU.
pub fn batch_ridge(regressors: &[RegressorWindow], rewards: &[f64], lambda: f64) -> DVector<f64> {
    let d = regressors[0].len();
    let mut v = DMatrix::identity(d, d) * lambda;
    let mut b = DVector::zeros(d);
    for (r, x) in regressors.iter().zip(rewards) {
        let th = r.as_vector();
        v += th * th.transpose();
        b += th * *x;
    }
    v.lu().solve(&b).unwrap()
}

/// Mean and batch-means standard error; robust to serial correlation.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Mean and standard error of paired differences `a_r − b_r`.
pub fn paired_gap(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Play `arm` every round and feed the estimate from the first round with a
/// full window on. Returns the estimate plus the samples it saw.
pub fn fixed_arm_identification(
    system: &DiscreteLinearSystem,
    s: usize,
    lambda: f64,
    arm: usize,
    seed: lds_bandit::RngSeed,
    run: u64,
    samples: usize,
) -> (lds_bandit::GEstimate, Vec<RegressorWindow>, Vec<f64>) {
    use std::collections::VecDeque;
    let m = system.context_dim();
    let mut est = lds_bandit::GEstimate::new(m * s + 1, lambda).unwrap();
    let mut rng = seed.stream(run);
    let mut state = system.init_state(&mut rng);
    let mut buffer: VecDeque<DVector<f64>> = VecDeque::with_capacity(s + 1);
    let (mut regs, mut rewards) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    let mut t = 0u64;
    while regs.len() < samples {
        t += 1;
        let out = system.step(&mut state, arm, &mut rng).unwrap();
        if buffer.len() == s {
            let theta = lds_bandit::build_regressor(&buffer, s, m).unwrap();
            est.update(&theta, out.reward, t).unwrap();
            regs.push(theta);
            rewards.push(out.reward);
            buffer.pop_front();
        }
        buffer.push_back(out.context);
    }
    (est, regs, rewards)
}

/// Large-sample limit of the ridge estimate for window `s` and arm `a`:
/// `E[ΘΘᵀ]⁻¹ E[ΘX]` under the stationary law, from exact second moments.
pub fn population_regression(system: &DiscreteLinearSystem, s: usize, arm: usize) -> DVector<f64> {
    let c = system.c_theta();
    let m = system.context_dim();
    let sigma = lyapunov_doubling(system.gamma(), system.q());
    let mean_z = stationary_mean(system.gamma(), system.mu_xi());
    let mean_theta = c * &mean_z + system.mu_phi();
    let action = &system.actions()[arm];
    let mean_x = action.mean_reward(&mean_z);
    let power = |k: usize| (0..k).fold(DMatrix::identity(system.state_dim(), system.state_dim()), |acc, _| system.gamma() * acc);
    // Cov(θ_{u+k}, θ_u)
    let lagged = |k: usize| {
        let mut cov = c * power(k) * &sigma * c.transpose();
        if k == 0 {
            cov += system.r_phi();
        }
        cov
    };
    let d = m * s + 1;
    let mut a = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    let outer = &mean_theta * mean_theta.transpose();
    for i in 0..s {
        for j in 0..s {
            let cov = if i >= j { lagged(i - j) } else { lagged(j - i).transpose() };
            a.view_mut((i * m, j * m), (m, m)).copy_from(&(cov + &outer));
        }
        a.view_mut((i * m, d - 1), (m, 1)).copy_from(&mean_theta);
        a.view_mut((d - 1, i * m), (1, m)).copy_from(&mean_theta.transpose());
        let cross = (action.c.transpose() * power(s - i) * &sigma * c.transpose()).transpose() + &mean_theta * mean_x;
        b.rows_mut(i * m, m).copy_from(&cross);
    }
    a[(d - 1, d - 1)] = 1.0;
    b[d - 1] = mean_x;
    a.lu().solve(&b).unwrap()
}
