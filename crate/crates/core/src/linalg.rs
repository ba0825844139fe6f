//! Small dense complex eigendecomposition helpers.
//!
//! nalgebra provides a complex Schur form but no general complex eigenvector
//! routine, so eigenvectors are recovered as the null direction of
//! `A - lambda I` via SVD. All matrices here are small (N = 3 for the
//! shipped presets) and strictly hyperbolic systems keep the eigenvalues well
//! separated inside the cones where frames are requested, so this is both
//! robust and cheap.

use crate::error::{CoreError, Result};
use crate::{C64, CMat, CVec, RMat};
use nalgebra::ComplexField;

/// Eigenvalues of a general complex matrix, unordered.
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let schur = a
        .clone()
        .try_schur(1.0e-14, 10_000)
        .ok_or_else(|| CoreError::DegenerateFrame("Schur iteration failed".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Unit-norm eigenvector for the eigenvalue `lambda` of `a`, computed as the
/// right singular vector of the smallest singular value of `A - lambda I`.
pub fn eigenvector(a: &CMat, lambda: C64) -> Result<CVec> {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let svd = shifted.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| CoreError::DegenerateFrame("SVD failed".into()))?;
    // singular values are sorted descending; the null direction is last
    let v = v_t.row(n - 1).adjoint();
    let norm = v.norm();
    if norm == 0.0 {
        return Err(CoreError::DegenerateFrame("zero singular vector".into()));
    }
    Ok(v / C64::new(norm, 0.0))
}

/// Full eigendecomposition (unordered): pairs of eigenvalue and unit eigenvector.
pub fn eig(a: &CMat) -> Result<Vec<(C64, CVec)>> {
    let vals = eigenvalues(a)?;
    vals.into_iter()
        .map(|l| Ok((l, eigenvector(a, l)?)))
        .collect()
}

/// Inverse through LU; errors on singularity.
pub fn inverse(a: &CMat) -> Result<CMat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| CoreError::Degeneracy("singular matrix".into()))
}

/// Inverse of a real matrix.
pub fn inverse_real(a: &RMat) -> Result<RMat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| CoreError::Degeneracy("singular matrix".into()))
}

/// Numerical rank via singular values.
pub fn rank(a: &RMat, tol: f64) -> usize {
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().filter(|s| **s > tol).count()
}

/// Promote a real matrix to complex.
pub fn complexify(a: &RMat) -> CMat {
    a.map(|x| C64::new(x, 0.0))
}

/// Determinant of a complex matrix.
pub fn det(a: &CMat) -> C64 {
    a.clone().determinant()
}

/// Orthonormal rows spanning the orthogonal complement of a real unit vector.
///
/// Deterministic: Gram-Schmidt against the coordinate axes, skipping the axis
/// most aligned with `v`.
pub fn real_complement_rows(v: &nalgebra::DVector<f64>) -> RMat {
    let n = v.len();
    let v = v / v.norm();
    let skip = v.iamax();
    let mut rows: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n - 1);
    for axis in 0..n {
        if axis == skip {
            continue;
        }
        let mut e = nalgebra::DVector::zeros(n);
        e[axis] = 1.0;
        let mut w = e.clone() - &v * v.dot(&e);
        for r in &rows {
            w -= r * r.dot(&w);
        }
        let norm = w.norm();
        rows.push(w / norm);
    }
    RMat::from_fn(n - 1, n, |i, j| rows[i][j])
}

/// Largest modulus entry of a complex matrix.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.abs()).fold(0.0, f64::max)
}

/// `exp(i s H)` for a real symmetric `H`, via its spectral decomposition.
///
/// Returns the precomputed eigenpairs so repeated exponentials with different
/// `s` are cheap.
pub struct SymRotation {
    evals: Vec<f64>,
    evecs: RMat,
}

impl SymRotation {
    pub fn new(h: &RMat) -> Self {
        let se = nalgebra::SymmetricEigen::new(h.clone());
        Self {
            evals: se.eigenvalues.iter().copied().collect(),
            evecs: se.eigenvectors,
        }
    }

    /// Dense matrix `exp(i s H)`.
    pub fn exp(&self, s: f64) -> CMat {
        let n = self.evals.len();
        let mut out = CMat::zeros(n, n);
        for k in 0..n {
            let phase = C64::from_polar(1.0, s * self.evals[k]);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += phase * self.evecs[(i, k)] * self.evecs[(j, k)];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eig_recovers_diagonalizable_matrix() {
        let a = CMat::from_row_slice(
            3,
            3,
            &[
                C64::new(2.0, 0.0),
                C64::new(1.0, 0.5),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-1.0, 0.0),
                C64::new(0.3, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.5, -1.0),
            ],
        );
        for (l, v) in eig(&a).unwrap() {
            let res = (&a * &v - v.clone() * l).norm();
            assert!(res < 1e-11, "residual {res}");
        }
    }

    #[test]
    fn complement_rows_are_orthonormal() {
        let v = nalgebra::DVector::from_vec(vec![0.3, -0.8, 0.52]);
        let b = real_complement_rows(&v);
        let g = &b * b.transpose();
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(g[(1, 1)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(g[(0, 1)], 0.0, epsilon = 1e-12);
        let bv = &b * (&v / v.norm());
        assert!(bv.norm() < 1e-12);
    }

    #[test]
    fn sym_rotation_is_unitary() {
        let h = RMat::from_row_slice(3, 3, &[1.0, 0.5, -0.2, 0.5, -2.0, 0.0, -0.2, 0.0, 0.7]);
        let rot = SymRotation::new(&h);
        let u = rot.exp(0.37);
        let id = &u * u.adjoint();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(id[(i, j)].re, want, epsilon = 1e-12);
                assert_relative_eq!(id[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }
}
