//! The reward-generating stochastic linear system
//!
//! ```text
//! z_{t+1} = Γ z_t + ξ_t,        ξ_t ~ N(μ_ξ, Q),  z_0 ~ N(μ_0, Σ_0)
//! θ_t     = C_θ z_t + φ_t,      φ_t ~ N(μ_φ, R_φ)
//! X_t     = ⟨c_a, z_t⟩ + μ_a + η_t,  η_t ~ N(0, σ_η)
//! ```
//!
//! A [`DiscreteLinearSystem`] is validated on construction (dimensions, noise
//! covariances, `ρ(Γ) < 1`, observability of `(Γ, C_θ)`) and immutable
//! afterwards. Sampling goes through symmetric square roots of the covariance
//! matrices so singular-but-PSD covariances (deterministic `z_0`, noiseless
//! context channel) are legal.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// One arm: reward vector `c_a` and constant offset `μ_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    #[serde(with = "crate::serde_util::vector")]
    pub c: DVector<f64>,
    pub mu: f64,
}

impl Action {
    pub fn new(c: DVector<f64>, mu: f64) -> Self {
        Self { c, mu }
    }

    /// Noise-free expected reward `⟨c_a, z⟩ + μ_a`.
    pub fn mean_reward(&self, z: &DVector<f64>) -> f64 {
        self.c.dot(z) + self.mu
    }
}

/// Unvalidated parameter set; also the JSON schema of a system definition
/// (matrices as row-major arrays of arrays).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    #[serde(with = "crate::serde_util::matrix")]
    pub gamma: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub c_theta: DMatrix<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub mu_xi: DVector<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub q: DMatrix<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub mu_phi: DVector<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub r_phi: DMatrix<f64>,
    pub sigma_eta: f64,
    pub actions: Vec<Action>,
    #[serde(with = "crate::serde_util::vector")]
    pub mu_0: DVector<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub sigma_0: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct NoiseFactors {
    q: DMatrix<f64>,
    r_phi: DMatrix<f64>,
    sigma_0: DMatrix<f64>,
    eta: f64,
}

/// A validated reward-generating system. Cheap to share between threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SystemParams", into = "SystemParams")]
pub struct DiscreteLinearSystem {
    params: SystemParams,
    factors: NoiseFactors,
}

impl PartialEq for DiscreteLinearSystem {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl TryFrom<SystemParams> for DiscreteLinearSystem {
    type Error = Error;

    fn try_from(params: SystemParams) -> Result<Self> {
        Self::new(params)
    }
}

impl From<DiscreteLinearSystem> for SystemParams {
    fn from(system: DiscreteLinearSystem) -> Self {
        system.params
    }
}

impl DiscreteLinearSystem {
    /// Validate `params` and precompute the sampling factors.
    ///
    /// `Q` must be symmetric positive definite. `R_φ` and `Σ_0` must be
    /// symmetric PSD, and `C_θ Q C_θᵀ + R_φ` must be positive definite so the
    /// innovation covariance of the Kalman recursion is always invertible.
    pub fn new(params: SystemParams) -> Result<Self> {
        let d = params.gamma.nrows();
        let m = params.c_theta.nrows();
        let k = params.actions.len();
        if d == 0 || m == 0 || k == 0 {
            return Err(invalid(format!("need d, m, k >= 1 (got d={d}, m={m}, k={k})")));
        }
        let shape_checks = [
            ("gamma", params.gamma.shape(), (d, d)),
            ("c_theta", params.c_theta.shape(), (m, d)),
            ("q", params.q.shape(), (d, d)),
            ("r_phi", params.r_phi.shape(), (m, m)),
            ("sigma_0", params.sigma_0.shape(), (d, d)),
            ("mu_xi", params.mu_xi.shape(), (d, 1)),
            ("mu_phi", params.mu_phi.shape(), (m, 1)),
            ("mu_0", params.mu_0.shape(), (d, 1)),
        ];
        for (name, got, want) in shape_checks {
            if got != want {
                return Err(invalid(format!("{name} has shape {got:?}, expected {want:?}")));
            }
        }
        for (i, a) in params.actions.iter().enumerate() {
            if a.c.len() != d {
                return Err(invalid(format!("action {i} has length {}, expected {d}", a.c.len())));
            }
            if !a.mu.is_finite() || a.c.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("action {i} has non-finite entries")));
            }
        }
        let all_finite = [&params.gamma, &params.c_theta, &params.q, &params.r_phi, &params.sigma_0]
            .iter()
            .all(|mat| mat.iter().all(|v| v.is_finite()))
            && [&params.mu_xi, &params.mu_phi, &params.mu_0]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()));
        if !all_finite {
            return Err(invalid("system contains non-finite entries"));
        }
        if !(params.sigma_eta >= 0.0 && params.sigma_eta.is_finite()) {
            return Err(invalid(format!("sigma_eta must be a finite variance >= 0, got {}", params.sigma_eta)));
        }

        if !linalg::is_symmetric(&params.q) {
            return Err(invalid("q is not symmetric"));
        }
        let q_min = linalg::min_eigenvalue(&params.q);
        if q_min <= 0.0 {
            return Err(invalid(format!("q must be positive definite (min eigenvalue {q_min:e})")));
        }
        let q = linalg::psd_sqrt(&params.q, "q")?;
        let r_phi = linalg::psd_sqrt(&params.r_phi, "r_phi")?;
        let sigma_0 = linalg::psd_sqrt(&params.sigma_0, "sigma_0")?;
        let innovation = &params.c_theta * &params.q * params.c_theta.transpose() + &params.r_phi;
        let innov_min = linalg::min_eigenvalue(&innovation);
        if innov_min <= 0.0 {
            return Err(invalid(format!(
                "c_theta q c_thetaᵀ + r_phi must be positive definite (min eigenvalue {innov_min:e})"
            )));
        }

        let rho = linalg::spectral_radius(&params.gamma)?;
        if rho >= 1.0 {
            return Err(invalid(format!("gamma is not Schur: spectral radius {rho}")));
        }
        if !linalg::observability_check(&params.gamma, &params.c_theta)? {
            return Err(invalid("(gamma, c_theta) is not observable"));
        }

        let eta = params.sigma_eta.sqrt();
        Ok(Self { params, factors: NoiseFactors { q, r_phi, sigma_0, eta } })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn state_dim(&self) -> usize {
        self.params.gamma.nrows()
    }

    pub fn context_dim(&self) -> usize {
        self.params.c_theta.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.params.actions.len()
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.params.gamma
    }

    pub fn c_theta(&self) -> &DMatrix<f64> {
        &self.params.c_theta
    }

    pub fn mu_xi(&self) -> &DVector<f64> {
        &self.params.mu_xi
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.params.q
    }

    pub fn mu_phi(&self) -> &DVector<f64> {
        &self.params.mu_phi
    }

    pub fn r_phi(&self) -> &DMatrix<f64> {
        &self.params.r_phi
    }

    pub fn sigma_eta(&self) -> f64 {
        self.params.sigma_eta
    }

    pub fn actions(&self) -> &[Action] {
        &self.params.actions
    }

    pub fn action(&self, index: usize) -> Result<&Action> {
        self.params
            .actions
            .get(index)
            .ok_or_else(|| invalid(format!("action index {index} out of range (k = {})", self.num_actions())))
    }

    pub fn mu_0(&self) -> &DVector<f64> {
        &self.params.mu_0
    }

    pub fn sigma_0(&self) -> &DMatrix<f64> {
        &self.params.sigma_0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Draw `z_0 ~ N(μ_0, Σ_0)` and return the round-0 state.
    pub fn init_state<R: RngCore + ?Sized>(&self, rng: &mut R) -> SimState {
        let n = standard_normal(self.state_dim(), rng);
        SimState { z: &self.params.mu_0 + &self.factors.sigma_0 * n, t: 0 }
    }

    /// Emit `(θ_t, X_t)` from the current `z_t`, then advance to `z_{t+1}`.
    ///
    /// All noise terms are drawn on every call, in the order `φ_t`, `η_t`,
    /// `ξ_t`, regardless of the action, so two runs sharing a seed see the same
    /// environment whatever the policy does.
    pub fn step<R: RngCore + ?Sized>(
        &self,
        state: &mut SimState,
        action_index: usize,
        rng: &mut R,
    ) -> Result<RoundSample> {
        let action = self.action(action_index)?;
        if state.z.len() != self.state_dim() {
            return Err(invalid("state dimension does not match system"));
        }
        let p = &self.params;
        let phi = standard_normal(self.context_dim(), rng);
        let eta: f64 = StandardNormal.sample(rng);
        let xi = standard_normal(self.state_dim(), rng);

        let context = &p.c_theta * &state.z + &p.mu_phi + &self.factors.r_phi * phi;
        let reward = action.mean_reward(&state.z) + self.factors.eta * eta;
        let latent = state.z.clone();

        state.z = &p.gamma * &state.z + &p.mu_xi + &self.factors.q * xi;
        state.t += 1;
        Ok(RoundSample { context, reward, latent })
    }
}

fn standard_normal<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Latent state `z_t` and the round index `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub z: DVector<f64>,
    pub t: u64,
}

/// What one round emits. `latent` is the pre-update state `z_t` and is only
/// meant for oracle policies and regret accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSample {
    pub context: DVector<f64>,
    pub reward: f64,
    pub latent: DVector<f64>,
}

/// Experiment seed. Each replication gets its own ChaCha stream derived from
/// `(seed, run)`, so runs can be scheduled on any thread in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn stream(self, run: u64) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(run);
        rng
    }
}
