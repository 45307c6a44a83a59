//! Dense linear-algebra helpers shared by the simulator, the filters and the
//! scenario construction.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::error::{invalid, Error, Result};

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a general real square matrix (real Schur form).
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !m.is_square() {
        return Err(invalid(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// `max |λᵢ|` over the eigenvalues of `m`.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// Rank test on the stacked observability matrix `[C; CΓ; …; CΓ^{d−1}]`,
/// with singular-value tolerance `d·ε·σ_max`.
pub fn observability_check(gamma: &DMatrix<f64>, c_theta: &DMatrix<f64>) -> Result<bool> {
    let d = gamma.nrows();
    if !gamma.is_square() || c_theta.ncols() != d {
        return Err(invalid(format!(
            "observability: gamma is {}x{}, c_theta is {}x{}",
            gamma.nrows(),
            gamma.ncols(),
            c_theta.nrows(),
            c_theta.ncols()
        )));
    }
    let m = c_theta.nrows();
    let mut stack = DMatrix::zeros(m * d, d);
    let mut block = c_theta.clone();
    for i in 0..d {
        stack.rows_mut(i * m, m).copy_from(&block);
        block = &block * gamma;
    }
    let sv = stack.singular_values();
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(false);
    }
    let tol = d as f64 * f64::EPSILON * sigma_max;
    Ok(sv.iter().filter(|&&s| s > tol).count() == d)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Symmetry test within `1e-12`, scaled by the largest entry when it exceeds one.
pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && max_abs(&(m - m.transpose())) <= 1e-12 * max_abs(m).max(1.0)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Symmetric square root `V·√Λ·Vᵀ` of a PSD matrix. Slightly negative
/// eigenvalues from rounding are clamped to zero; anything below
/// `-1e-10·max(1, λ_max)` is rejected.
pub fn psd_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !is_symmetric(m) {
        return Err(invalid(format!("{what} is not symmetric")));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if let Some(bad) = eig.eigenvalues.iter().find(|&&l| l < -1e-10 * scale) {
        return Err(invalid(format!("{what} is not positive semidefinite (eigenvalue {bad:e})")));
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&root) * v.transpose())
}

/// Solve the discrete Lyapunov equation `Σ = ΓΣΓᵀ + Q` through its
/// Kronecker form `(I − Γ⊗Γ)·vec Σ = vec Q`.
pub fn discrete_lyapunov(gamma: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = gamma.nrows();
    if !gamma.is_square() || q.shape() != (d, d) {
        return Err(invalid("lyapunov: dimension mismatch"));
    }
    let lhs = DMatrix::identity(d * d, d * d) - gamma.kronecker(gamma);
    let rhs = DVector::from_column_slice(q.as_slice());
    let x = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("lyapunov operator is singular (gamma not Schur?)".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(d, d, x.as_slice())))
}

/// Orthonormal basis of the numerical null space of `m`, canonicalised so the
/// result does not depend on the SVD's choice of rotation inside the space.
pub(crate) fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let mut cols = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            cols.push(v_t.row(i).transpose());
        }
    }
    // rank-deficient square input: SVD returns min(rows, cols) values
    for i in svd.singular_values.len()..n {
        cols.push(v_t.row(i).transpose());
    }
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let basis = DMatrix::from_columns(&cols);
    canonical_basis(&(&basis * basis.transpose()), cols.len())
}

/// Greedy pivoted Gram–Schmidt on the columns of a projector: the projector is
/// unique for a subspace, so the resulting basis is too.
fn canonical_basis(projector: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let n = projector.nrows();
    let mut residual = projector.clone();
    let mut picked: Vec<(usize, DVector<f64>)> = Vec::with_capacity(rank);
    for _ in 0..rank {
        let (j, norm) = (0..n)
            .map(|j| (j, residual.column(j).norm()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 + 1e-12 { cur } else { best });
        let q = residual.column(j) / norm;
        for k in 0..n {
            let proj = q.dot(&residual.column(k));
            let mut col = residual.column_mut(k);
            col.axpy(-proj, &q, 1.0);
        }
        picked.push((j, q));
    }
    picked.sort_by_key(|(j, _)| *j);
    DMatrix::from_columns(&picked.into_iter().map(|(_, q)| q).collect::<Vec<_>>())
}
