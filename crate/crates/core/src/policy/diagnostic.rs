//! Empirical version of the SB-ETC regret bound.
//!
//! For a regressor `Θ_t` let `a*_t = argmax_a G_aΘ_t` be the arm the true
//! model prefers. SB-ETC picks a suboptimal arm `a` only if
//! `Ĝ_aΘ_t ≥ Ĝ_{a*}Θ_t`, which forces
//! `ΔG_aΘ_t ≤ (‖Ĝ_a − G_a‖ + ‖Ĝ_{a*} − G_{a*}‖)·‖Θ_t‖`. The per-arm bound
//! factor is `min{B_a · mean(‖Θ_t‖ / |ΔG_aΘ_t|), 1}` over the samples in
//! which `a` is suboptimal, with `B_a` replaced by the measured model errors.
//! Samples where `ΔG_aΘ_t` vanishes are skipped and counted.

use nalgebra::DVector;

use super::{argmax_lowest, SbEtc};
use crate::error::{invalid, Result};
use crate::kalman::SteadyStateFilter;
use crate::sysid::{true_g, RegressorWindow};
use crate::system::DiscreteLinearSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundDiagnostic {
    /// `‖Ĝ_a − G_a‖₂` per arm.
    pub model_errors: Vec<f64>,
    /// Arm most often preferred by the true model over the sample; the
    /// reference for `delta_g` and `gap_terms`.
    pub reference_arm: usize,
    /// `G_{ref} − G_a`.
    pub delta_g: Vec<DVector<f64>>,
    /// `(c_{ref} − c_a, μ_{ref} − μ_a)`.
    pub gap_terms: Vec<(DVector<f64>, f64)>,
    /// Bound factor per arm, in `[0, 1]`.
    pub bound_factor: Vec<f64>,
    /// Samples in which the arm was suboptimal and the gap was nonzero.
    pub suboptimal_samples: Vec<usize>,
    /// Samples skipped because `ΔG_aΘ_t = 0`.
    pub skipped: Vec<usize>,
    /// Arm was suboptimal only in zero-gap samples.
    pub degenerate: Vec<bool>,
}

fn per_round_best(g: &[DVector<f64>], theta: &DVector<f64>) -> (usize, Vec<f64>) {
    let scores: Vec<f64> = g.iter().map(|row| row.dot(theta)).collect();
    (argmax_lowest(scores.iter().copied()), scores)
}

fn is_zero_gap(gap: f64, a: f64, b: f64) -> bool {
    gap <= 64.0 * f64::EPSILON * (a.abs() + b.abs()).max(f64::MIN_POSITIVE)
}

pub fn bound_diagnostic(
    system: &DiscreteLinearSystem,
    filter: &SteadyStateFilter,
    state: &SbEtc,
    regressors: &[RegressorWindow],
) -> Result<BoundDiagnostic> {
    let k = system.num_actions();
    if state.num_actions() != k {
        return Err(invalid("policy and system disagree on the number of arms"));
    }
    let dim = system.context_dim() * state.window() + 1;
    if let Some(bad) = regressors.iter().find(|r| r.len() != dim) {
        return Err(invalid(format!("regressor has length {}, expected {dim}", bad.len())));
    }
    let g: Vec<DVector<f64>> = (0..k).map(|a| true_g(system, filter, state.window(), a)).collect::<Result<_>>()?;
    let errors: Vec<f64> = state.estimates().iter().zip(&g).map(|(est, ga)| (est.g_hat() - ga).norm()).collect();

    let mut best_counts = vec![0usize; k];
    let mut ratio_sum = vec![0.0; k];
    let mut used = vec![0usize; k];
    let mut skipped = vec![0usize; k];
    for theta in regressors.iter().map(RegressorWindow::as_vector) {
        let (best, scores) = per_round_best(&g, theta);
        best_counts[best] += 1;
        let norm = theta.norm();
        for a in (0..k).filter(|&a| a != best) {
            let gap = scores[best] - scores[a];
            if is_zero_gap(gap, scores[best], scores[a]) {
                skipped[a] += 1;
                continue;
            }
            ratio_sum[a] += (errors[a] + errors[best]) * norm / gap;
            used[a] += 1;
        }
    }
    let reference_arm = argmax_lowest(best_counts.iter().map(|&c| c as f64));
    let bound_factor = (0..k)
        .map(|a| if used[a] == 0 { 0.0 } else { (ratio_sum[a] / used[a] as f64).min(1.0) })
        .collect();
    let reference = &system.actions()[reference_arm];
    let gap_terms = system.actions().iter().map(|act| (&reference.c - &act.c, reference.mu - act.mu)).collect();
    let delta_g = g.iter().map(|ga| &g[reference_arm] - ga).collect();
    let degenerate = (0..k).map(|a| used[a] == 0 && skipped[a] > 0).collect();
    Ok(BoundDiagnostic {
        model_errors: errors,
        reference_arm,
        delta_g,
        gap_terms,
        bound_factor,
        suboptimal_samples: used,
        skipped,
        degenerate,
    })
}

/// Fraction of samples in which arm `a` was chosen while the true model
/// preferred another arm, among samples where `a` was not preferred.
pub fn mistake_frequency(true_rows: &[DVector<f64>], regressors: &[RegressorWindow], choices: &[usize]) -> Result<Vec<f64>> {
    if regressors.len() != choices.len() {
        return Err(invalid("one choice per regressor required"));
    }
    let k = true_rows.len();
    let mut suboptimal = vec![0usize; k];
    let mut mistakes = vec![0usize; k];
    for (theta, &chosen) in regressors.iter().zip(choices) {
        if chosen >= k {
            return Err(invalid(format!("arm {chosen} out of range")));
        }
        let (best, _) = per_round_best(true_rows, theta.as_vector());
        for a in (0..k).filter(|&a| a != best) {
            suboptimal[a] += 1;
            if a == chosen {
                mistakes[a] += 1;
            }
        }
    }
    Ok((0..k).map(|a| if suboptimal[a] == 0 { 0.0 } else { mistakes[a] as f64 / suboptimal[a] as f64 }).collect())
}
