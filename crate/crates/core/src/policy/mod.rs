//! Decision layer: SB-ETC, the UCB baseline, the Kalman oracle, regret
//! accounting and the empirical regret-bound diagnostic.
//!
//! Every policy follows the same round protocol: [`Policy::choose`] reads the
//! state without mutating it, the environment emits `(θ_t, X_t)`, then
//! [`Policy::update`] receives the context and the chosen arm's reward only.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub mod diagnostic;
pub mod oracle;
pub mod regret;
pub mod sbetc;
pub mod ucb;

pub use diagnostic::{bound_diagnostic, mistake_frequency, BoundDiagnostic};
pub use oracle::{oracle_choose, KalmanOracle};
pub use regret::{instantaneous_regret, DecisionLog, RegretRecord};
pub use sbetc::SbEtc;
pub use ucb::Ucb;

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    fn choose(&self) -> Result<usize>;

    fn update(&mut self, context: &DVector<f64>, chosen: usize, reward: f64) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Sbetc,
    Ucb,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Sbetc, PolicyKind::Ucb, PolicyKind::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Sbetc => "sbetc",
            PolicyKind::Ucb => "ucb",
            PolicyKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sbetc" | "sb-etc" => Ok(PolicyKind::Sbetc),
            "ucb" => Ok(PolicyKind::Ucb),
            "oracle" => Ok(PolicyKind::Oracle),
            other => Err(invalid(format!("unknown policy '{other}' (expected sbetc, ucb or oracle)"))),
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
