//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices and vectors are plain `nalgebra` dynamic types over
//! [`Complex64`]. The eigensolver sits on top of the complex Schur form and
//! recovers eigenvectors by back-substitution on the triangular factor.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Largest ambient dimension the dense routines accept.
pub const MAX_DIM: usize = 64;

const SINGULAR_PIVOT_RATIO: f64 = 1e-12;
const EIG_RESIDUAL_RATIO: f64 = 1e-10;
const SCHUR_MAX_ITER: usize = 10_000;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds a matrix from row-major nested slices.
pub fn matrix_from_rows(rows: &[Vec<Complex64>]) -> Result<ComplexMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::ShapeMismatch("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ShapeMismatch("ragged rows".into()));
    }
    let m = ComplexMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite_matrix(&m, "matrix")?;
    Ok(m)
}

pub fn ensure_finite_matrix(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_finite_vector(v: &ComplexVector, what: &'static str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(a: &ComplexMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

/// Eigenvalues, unit-norm right eigenvectors (as columns) and the condition
/// number of the eigenvector matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<Complex64>,
    pub right_vectors: ComplexMatrix,
    pub vector_condition: f64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> ComplexVector {
        self.right_vectors.column(j).into_owned()
    }

    /// `V · diag(values) · V⁻¹`.
    pub fn reconstruct(&self) -> Result<ComplexMatrix> {
        let lu = Lu::new(&self.right_vectors)?;
        let scaled = ComplexMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.right_vectors[(i, j)] * self.values[j]
        });
        Ok(scaled * lu.inverse()?)
    }
}

/// Orders eigenvalues by descending real part. Real parts closer than `tol`
/// are treated as tied and ordered by descending imaginary part, then by
/// their original index.
pub fn spectral_order(values: &[Complex64], tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .re
            .total_cmp(&values[a].re)
            .then_with(|| a.cmp(&b))
    });
    // regroup near-ties
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end - 1]].re - values[idx[end]].re <= tol {
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| {
            let (za, zb) = (values[a], values[b]);
            if (za.im - zb.im).abs() <= tol {
                a.cmp(&b)
            } else {
                zb.im.total_cmp(&za.im)
            }
        });
        out.extend(group);
        start = end;
    }
    out
}

/// Tolerance under which two eigenvalue real parts count as tied.
pub fn tie_tolerance(a: &ComplexMatrix) -> f64 {
    1e-10 * a.norm().max(1.0)
}

/// Eigendecomposition of a square complex matrix.
pub fn eig(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    let d = ensure_square(a)?;
    if d == 0 {
        return Err(Error::ShapeMismatch("empty matrix".into()));
    }
    if d > MAX_DIM {
        return Err(Error::TooLarge(d));
    }
    ensure_finite_matrix(a, "matrix")?;
    let scale = a.norm();

    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();

    let small = (f64::EPSILON * scale).max(f64::MIN_POSITIVE);
    let mut y = ComplexMatrix::zeros(d, d);
    for k in 0..d {
        y[(k, k)] = Complex64::ONE;
        let lambda = t[(k, k)];
        for j in (0..k).rev() {
            let s: Complex64 = (j + 1..=k).map(|m| t[(j, m)] * y[(m, k)]).sum();
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[(j, k)] = -s / denom;
            if y[(j, k)].norm() > 1e100 {
                let mut col = y.column_mut(k);
                col.scale_mut(1e-100);
            }
        }
    }
    let mut v = q * y;
    for mut col in v.column_iter_mut() {
        let n = col.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NumericalFailure(
                "eigenvector back-substitution broke down".into(),
            ));
        }
        col.unscale_mut(n);
    }

    let raw_values: Vec<Complex64> = (0..d).map(|k| t[(k, k)]).collect();
    let order = spectral_order(&raw_values, tie_tolerance(a));
    let values: Vec<Complex64> = order.iter().map(|&k| raw_values[k]).collect();
    let right_vectors = ComplexMatrix::from_fn(d, d, |i, j| v[(i, order[j])]);

    for (j, &lambda) in values.iter().enumerate() {
        let col = right_vectors.column(j);
        let residual = (a * col - col * lambda).norm();
        if residual > EIG_RESIDUAL_RATIO * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NumericalFailure(format!(
                "eigenpair {j} residual {residual:.3e} exceeds bound"
            )));
        }
    }

    Ok(EigenDecomposition {
        values,
        vector_condition: condition_number(&right_vectors),
        right_vectors,
    })
}

/// Ratio of largest to smallest singular value (∞ when rank-deficient).
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn smallest_singular_value(m: &ComplexMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// LU factorization with partial pivoting and a relative pivot check.
#[derive(Debug, Clone)]
pub struct Lu {
    inner: nalgebra::linalg::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
}

impl Lu {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        let dim = ensure_square(a)?;
        ensure_finite_matrix(a, "matrix")?;
        let threshold = SINGULAR_PIVOT_RATIO * a.norm();
        let inner = a.clone().lu();
        let u = inner.u();
        let pivot = u
            .diagonal()
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min);
        if pivot <= threshold || pivot == 0.0 {
            return Err(Error::Singular { pivot, threshold });
        }
        Ok(Self { inner, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &ComplexVector) -> Result<ComplexVector> {
        if b.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "rhs has length {}, expected {}",
                b.len(),
                self.dim
            )));
        }
        self.inner
            .solve(b)
            .ok_or(Error::Singular {
                pivot: 0.0,
                threshold: 0.0,
            })
    }

    pub fn solve_matrix(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.nrows() != self.dim {
            return Err(Error::ShapeMismatch("rhs row count".into()));
        }
        self.inner.solve(b).ok_or(Error::Singular {
            pivot: 0.0,
            threshold: 0.0,
        })
    }

    /// Explicit inverse. Only used for diagnostics and reconstruction checks.
    pub fn inverse(&self) -> Result<ComplexMatrix> {
        self.solve_matrix(&ComplexMatrix::identity(self.dim, self.dim))
    }
}

/// Solves `A x = b`.
pub fn solve(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    Lu::new(a)?.solve(b)
}

/// Conjugate transpose.
pub fn adjoint(a: &ComplexMatrix) -> ComplexMatrix {
    a.adjoint()
}

/// `AB − BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = ensure_square(a)?;
    if b.shape() != (d, d) {
        return Err(Error::ShapeMismatch(format!(
            "commutator of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a * b - b * a)
}

/// `⟨u, v⟩ = Σ u_j · conj(v_j)`, linear in the first slot.
pub fn inner(u: &ComplexVector, v: &ComplexVector) -> Result<Complex64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "inner product of lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter().zip(v.iter()).map(|(a, b)| a * b.conj()).sum())
}

/// Hermitian projector onto the column span of `x` (assumed full rank).
pub fn span_projector(x: &ComplexMatrix) -> ComplexMatrix {
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * svd.singular_values[0])
        .count();
    let ur = u.columns(0, rank);
    &ur * ur.adjoint()
}

/// Stacks vectors as the columns of a matrix.
pub fn stack_columns(vectors: &[ComplexVector]) -> ComplexMatrix {
    ComplexMatrix::from_columns(vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            values.len(),
            values.iter().map(|&x| c64(x, 0.0)),
        ))
    }

    #[test]
    fn eig_of_diagonal_matrix() {
        let e = eig(&diag(&[-5.0, -1.0])).unwrap();
        assert_eq!(e.values, vec![c64(-1.0, 0.0), c64(-5.0, 0.0)]);
        assert!((e.vector(0).map(|z| z.norm()) - DVector::from_vec(vec![0.0, 1.0])).norm() < 1e-14);
        assert!((e.vector(1).map(|z| z.norm()) - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-14);
        assert!((e.vector_condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_of_shear_matrix() {
        let a = matrix_from_rows(&[
            vec![c64(-1.0, 0.0), c64(1.0, 0.0)],
            vec![c64(0.0, 0.0), c64(-5.0, 0.0)],
        ])
        .unwrap();
        let e = eig(&a).unwrap();
        assert!((e.values[0] - c64(-1.0, 0.0)).norm() < 1e-14);
        assert!((e.values[1] - c64(-5.0, 0.0)).norm() < 1e-14);
        // second eigenvector parallel to (γ, 1 − α) = (1, −4)
        let v = e.vector(1);
        let cross = v[0] * c64(-4.0, 0.0) - v[1] * c64(1.0, 0.0);
        assert!(cross.norm() < 1e-14);
    }

    #[test]
    fn eig_of_scaled_identity_is_well_conditioned() {
        let e = eig(&diag(&[-1.0, -1.0, -1.0])).unwrap();
        assert!(e.values.iter().all(|z| (z - c64(-1.0, 0.0)).norm() < 1e-14));
        assert!((e.vector_condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_of_jordan_block_is_flagged_by_condition() {
        let a = matrix_from_rows(&[
            vec![c64(-1.0, 0.0), c64(1.0, 0.0)],
            vec![c64(0.0, 0.0), c64(-1.0, 0.0)],
        ])
        .unwrap();
        let e = eig(&a).unwrap();
        assert!(e.vector_condition > 1e8);
    }

    #[test]
    fn eig_rejects_non_square() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(eig(&a), Err(Error::NonSquare { rows: 2, cols: 3 })));
    }

    #[test]
    fn ordering_keeps_conjugate_pairs_adjacent() {
        let values = [c64(-1.0, -2.0), c64(-3.0, 0.0), c64(-1.0, 2.0), c64(-0.5, 0.0)];
        let order = spectral_order(&values, 1e-12);
        assert_eq!(order, vec![3, 2, 0, 1]);
        // exact ties fall back to index order
        let ties = [c64(-1.0, 0.0), c64(-1.0, 0.0)];
        assert_eq!(spectral_order(&ties, 1e-12), vec![0, 1]);
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 2.0)]);
        let x = solve(&ComplexMatrix::identity(2, 2), &b).unwrap();
        assert_eq!(x, b);
        let b = ComplexVector::from_vec(vec![c64(2.0, 0.0), c64(4.0, 0.0)]);
        let x = solve(&diag(&[2.0, 4.0]), &b).unwrap();
        assert!((x - ComplexVector::from_element(2, c64(1.0, 0.0))).norm() < 1e-15);
    }

    #[test]
    fn solve_matches_printed_shear_resolvent() {
        // (L − 1)⁻¹ = −1/(2(1+α)) [[1+α, γ], [0, 2]] for L = [[−1, γ], [0, −α]]
        let (alpha, gamma) = (5.0, 1.0);
        let shifted = matrix_from_rows(&[
            vec![c64(-2.0, 0.0), c64(gamma, 0.0)],
            vec![c64(0.0, 0.0), c64(-alpha - 1.0, 0.0)],
        ])
        .unwrap();
        let b = ComplexVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)]);
        let x = solve(&shifted, &b).unwrap();
        let pref = -1.0 / (2.0 * (1.0 + alpha));
        let expected = [pref * gamma, pref * 2.0];
        assert!((x[0].re - expected[0]).abs() < 1e-15);
        assert!((x[1].re - expected[1]).abs() < 1e-15);
        assert!((expected[0] + 1.0 / 12.0).abs() < 1e-15 && (expected[1] + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn solve_reports_singular() {
        let a = diag(&[1.0, 0.0]);
        let b = ComplexVector::from_element(2, c64(1.0, 0.0));
        assert!(matches!(solve(&a, &b), Err(Error::Singular { .. })));
    }

    #[test]
    fn adjoint_examples() {
        let a = matrix_from_rows(&[vec![c64(0.0, 1.0)]]).unwrap();
        assert_eq!(adjoint(&a)[(0, 0)], c64(0.0, -1.0));
        let s = matrix_from_rows(&[
            vec![c64(1.0, 0.0), c64(2.0, 0.0)],
            vec![c64(2.0, 0.0), c64(3.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(adjoint(&s), s);
    }

    #[test]
    fn commutator_of_equal_matrices_vanishes() {
        let a = matrix_from_rows(&[
            vec![c64(1.0, 2.0), c64(3.0, 0.0)],
            vec![c64(0.0, -1.0), c64(2.0, 0.5)],
        ])
        .unwrap();
        assert_eq!(commutator(&a, &a).unwrap().norm(), 0.0);
        assert!(matches!(
            commutator(&a, &ComplexMatrix::zeros(3, 3)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn inner_product_examples() {
        let e1 = ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        assert_eq!(inner(&e1, &e1).unwrap(), c64(1.0, 0.0));
        let a = ComplexVector::from_vec(vec![c64(0.0, 1.0), c64(0.0, 0.0)]);
        let b = ComplexVector::from_vec(vec![c64(0.0, 0.0), c64(0.0, 1.0)]);
        assert_eq!(inner(&a, &b).unwrap(), c64(0.0, 0.0));
        let v = ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 1.0)]);
        let w = ComplexVector::from_vec(vec![c64(0.0, 1.0), c64(1.0, 0.0)]);
        assert_eq!(inner(&v, &w).unwrap(), c64(0.0, 0.0));
        assert!(inner(&v, &ComplexVector::zeros(3)).is_err());
    }
}
