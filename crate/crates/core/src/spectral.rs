//! Symmetric forms, the average of the `l` smallest eigenvalues, and traces
//! over subspaces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance for orthonormality of caller-supplied frames.
pub const FRAME_TOL: f64 = 1e-10;

/// Dense symmetric matrix. Symmetry is enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricForm {
    m: DMatrix<f64>,
}

impl SymmetricForm {
    /// Builds a form from a square matrix, replacing it by `(A + A^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("entries", "must be finite"));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymmetricForm { m: sym })
    }

    pub fn identity(dim: usize) -> Self {
        SymmetricForm {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SymmetricForm {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        SymmetricForm {
            m: DMatrix::identity(dim, dim) * s,
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymmetricForm {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// Row-major entries; the result is symmetrized.
    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        SymmetricForm::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn quadratic(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.m * v))
    }

    pub fn add(&self, other: &SymmetricForm) -> Result<SymmetricForm> {
        self.check_dim(other.dim())?;
        Ok(SymmetricForm {
            m: &self.m + &other.m,
        })
    }

    pub fn scale(&self, s: f64) -> SymmetricForm {
        SymmetricForm { m: &self.m * s }
    }

    pub fn shift(&self, s: f64) -> SymmetricForm {
        let n = self.dim();
        SymmetricForm {
            m: &self.m + DMatrix::identity(n, n) * s,
        }
    }

    /// Restriction `E^T A E` to the span of the columns of `frame`.
    pub fn restrict(&self, frame: &DMatrix<f64>) -> Result<SymmetricForm> {
        self.check_dim(frame.nrows())?;
        SymmetricForm::new(frame.transpose() * &self.m * frame)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Ascending eigenvalues with matching unit eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = self.m.clone().symmetric_eigen();
        let n = self.dim();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        let ev = self.eigenvalues();
        ev.first()
            .map(|a| a.abs())
            .unwrap_or(0.0)
            .max(ev.last().map(|a| a.abs()).unwrap_or(0.0))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

fn check_ell(ell: usize, dim: usize) -> Result<()> {
    if ell == 0 || ell > dim {
        return Err(Error::param("ell", format!("must lie in 1..={dim}, got {ell}")));
    }
    Ok(())
}

/// Mean of the `ell` algebraically smallest eigenvalues.
pub fn p_minus(a: &SymmetricForm, ell: usize) -> Result<f64> {
    check_ell(ell, a.dim())?;
    let ev = a.eigenvalues();
    Ok(ev[..ell].iter().sum::<f64>() / ell as f64)
}

/// Mean of the `ell` largest eigenvalues.
pub fn p_plus(a: &SymmetricForm, ell: usize) -> Result<f64> {
    check_ell(ell, a.dim())?;
    let ev = a.eigenvalues();
    Ok(ev[ev.len() - ell..].iter().sum::<f64>() / ell as f64)
}

/// Checks that the given vectors are pairwise orthonormal within `tol`.
pub fn check_orthonormal(basis: &[DVector<f64>], dim: usize, tol: f64) -> Result<()> {
    for (i, e) in basis.iter().enumerate() {
        if e.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: e.len(),
            });
        }
        for (j, f) in basis.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = (e.dot(f) - target).abs();
            if d > tol {
                return Err(Error::NotOrthonormal(format!(
                    "<e{i}, e{j}> deviates by {d:e}"
                )));
            }
        }
    }
    Ok(())
}

/// `sum_i <T e_i, e_i>` over an orthonormal family.
pub fn trace_over_subspace(t: &SymmetricForm, basis: &[DVector<f64>]) -> Result<f64> {
    check_orthonormal(basis, t.dim(), FRAME_TOL)?;
    Ok(basis.iter().map(|e| t.quadratic(e)).sum())
}

/// Columns of a matrix as vectors.
pub fn columns(frame: &DMatrix<f64>) -> Vec<DVector<f64>> {
    frame.column_iter().map(|c| c.into_owned()).collect()
}

/// Minimizing `ell`-frame of `W -> Tr_W T / ell` together with the minimum.
///
/// The frame is produced by cyclic Jacobi rotations that diagonalize `T`; the
/// `ell` rotated axes carrying the smallest diagonal entries span a
/// minimizer, and the value is evaluated on that frame as a trace.
pub fn min_trace_frame(t: &SymmetricForm, ell: usize) -> Result<(f64, Vec<DVector<f64>>)> {
    check_ell(ell, t.dim())?;
    let (diag, q) = jacobi_diagonalize(t.matrix());
    let mut idx: Vec<usize> = (0..diag.len()).collect();
    idx.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let frame: Vec<DVector<f64>> = idx[..ell].iter().map(|&i| q.column(i).into_owned()).collect();
    let value = trace_over_subspace(t, &frame)? / ell as f64;
    Ok((value, frame))
}

/// Infimum over `ell`-dimensional subspaces of the normalized trace.
pub fn min_trace_subspace(t: &SymmetricForm, ell: usize) -> Result<f64> {
    min_trace_frame(t, ell).map(|(v, _)| v)
}

/// Cyclic Jacobi eigenvalue iteration. Returns the diagonal of `Q^T A Q`
/// and the accumulated orthogonal `Q`.
fn jacobi_diagonalize(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[(p, r)];
                if apr.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), q)
}

/// Orthonormal basis of the orthogonal complement of the unit vector `n`.
pub fn complement_basis(n: &DVector<f64>) -> DMatrix<f64> {
    let m = n.len();
    let nn = n.normalize();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m - 1);
    // Gram-Schmidt on the standard basis, skipping the axis most aligned with n
    let skip = (0..m)
        .max_by(|&a, &b| nn[a].abs().total_cmp(&nn[b].abs()))
        .unwrap_or(0);
    for k in (0..m).filter(|&k| k != skip) {
        let mut v = DVector::<f64>::zeros(m);
        v[k] = 1.0;
        v -= &nn * nn.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let norm = v.norm();
        basis.push(v / norm);
    }
    DMatrix::from_columns(&basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymmetricForm {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
        SymmetricForm::new(m).unwrap()
    }

    #[test]
    fn symmetrized_on_construction() {
        let a = SymmetricForm::from_row_slice(2, &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(a.matrix()[(0, 1)], 3.0);
        assert_eq!(a.matrix()[(1, 0)], 3.0);
        assert!(SymmetricForm::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn p_minus_examples() {
        for ell in 1..=4 {
            assert!((p_minus(&SymmetricForm::identity(4), ell).unwrap() - 1.0).abs() < 1e-15);
        }
        let ds = SymmetricForm::from_diagonal(&[2.0, 2.0, 2.0, -2.0]);
        assert!(p_minus(&ds, 2).unwrap().abs() < 1e-15);
        let d = SymmetricForm::from_diagonal(&[1.0, 2.0, 3.0]);
        assert!((p_minus(&d, 2).unwrap() - 1.5).abs() < 1e-15);
        assert!(p_minus(&d, 0).is_err());
        assert!(p_minus(&d, 4).is_err());
    }

    #[test]
    fn trace_examples() {
        let id = SymmetricForm::identity(3);
        let f = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.6, 0.8]),
        ];
        assert!((trace_over_subspace(&id, &f).unwrap() - 2.0).abs() < 1e-15);
        let bad = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
        ];
        assert!(matches!(
            trace_over_subspace(&id, &bad),
            Err(Error::NotOrthonormal(_))
        ));
    }

    #[test]
    fn eigenframe_trace_is_ell_times_p_minus() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            let t = random_sym(&mut rng, n);
            let (_, vecs) = t.eigen();
            for ell in 1..=n {
                let frame = columns(&vecs.columns(0, ell).into_owned());
                let tr = trace_over_subspace(&t, &frame).unwrap();
                assert!((tr - ell as f64 * p_minus(&t, ell).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trace_matches_direct_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_sym(&mut rng, 5);
        let raw = DMatrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        let q = raw.qr().q();
        let frame = columns(&q);
        let direct: f64 = (0..3)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..5 {
                    for j in 0..5 {
                        s += q[(i, k)] * t.matrix()[(i, j)] * q[(j, k)];
                    }
                }
                s
            })
            .sum();
        assert!((trace_over_subspace(&t, &frame).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn min_trace_examples() {
        let d = SymmetricForm::from_diagonal(&[0.0, 0.0, 1.0, 1.0]);
        assert!((min_trace_subspace(&d, 3).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_sym(&mut rng, 5);
        assert!((min_trace_subspace(&t, 5).unwrap() - t.trace() / 5.0).abs() < 1e-12);
    }

    #[test]
    fn ky_fan_equality_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let t = random_sym(&mut rng, 5);
            for ell in 1..=5 {
                let a = p_minus(&t, ell).unwrap();
                let b = min_trace_subspace(&t, ell).unwrap();
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let n = DVector::from_vec(vec![0.3, -0.4, 0.5, 0.1]).normalize();
        let b = complement_basis(&n);
        assert_eq!(b.ncols(), 3);
        let g = b.transpose() * &b;
        assert!((g - DMatrix::identity(3, 3)).norm() < 1e-14);
        assert!((b.transpose() * &n).norm() < 1e-14);
    }
}
