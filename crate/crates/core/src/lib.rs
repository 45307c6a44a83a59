//! Bandits whose rewards are driven by a latent linear dynamical system.
//!
//! The crate covers the whole pipeline: a seeded Gaussian state-space
//! simulator ([`system`]), Kalman filtering and the steady-state Riccati
//! solution ([`kalman`]), online identification of the reward predictor from
//! a window of past contexts ([`sysid`]), the SB-ETC, UCB and oracle policies
//! ([`policy`]), a trading scenario built from a continuous-time market model
//! ([`trading`]) and a configuration-driven experiment runner ([`harness`]).

pub mod error;
pub mod harness;
pub mod kalman;
pub mod linalg;
pub mod policy;
mod serde_util;
pub mod sysid;
pub mod system;
pub mod trading;

pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentConfig, RegretCurve, ScenarioConfig};
pub use kalman::{kf_step, solve_dare, KalmanState, SteadyStateFilter};
pub use policy::{Policy, PolicyKind};
pub use sysid::{build_regressor, true_g, GEstimate, RegressorWindow};
pub use system::{Action, DiscreteLinearSystem, RngSeed, RoundSample, SimState, SystemParams};
pub use trading::{build_trading_system, ContinuousMarketSpec};
