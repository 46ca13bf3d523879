//! Spectral analysis of a linear system and selection of the slow modes.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, adjoint, commutator, ComplexMatrix, ComplexVector, EigenDecomposition, MAX_DIM,
};

/// Eigenvector matrices with a larger condition number are treated as defective.
pub const DEFECTIVE_CONDITION: f64 = 1e8;
/// The spectral abscissa must lie below this for the system to count as stable.
pub const STABILITY_MARGIN: f64 = -1e-10;
const INDEPENDENCE_FLOOR: f64 = 1e-10;
const EIGENPAIR_TOL: f64 = 1e-8;

/// The generator `L` of `dx/dt = Lx`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    matrix: ComplexMatrix,
    pub label: String,
    pub params: BTreeMap<String, f64>,
}

impl LinearSystem {
    pub fn new(matrix: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NonSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::ShapeMismatch("empty system".into()));
        }
        if matrix.nrows() > MAX_DIM {
            return Err(Error::TooLarge(matrix.nrows()));
        }
        linalg::ensure_finite_matrix(&matrix, "system matrix")?;
        Ok(Self {
            matrix,
            label: label.into(),
            params: BTreeMap::new(),
        })
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_owned(), value);
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `L + shift · Id`.
    pub fn shifted(&self, shift: Complex64) -> ComplexMatrix {
        let mut m = self.matrix.clone();
        for i in 0..self.dim() {
            m[(i, i)] += shift;
        }
        m
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }
}

/// Validated, ordered spectral data of a system.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub system: LinearSystem,
    pub decomposition: EigenDecomposition,
    pub stable: bool,
    pub spectral_abscissa: f64,
}

impl SpectralData {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.decomposition.values
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }
}

/// Eigendecomposition plus stability classification.
pub fn analyze(system: &LinearSystem) -> Result<SpectralData> {
    let decomposition = linalg::eig(system.matrix())?;
    if decomposition.vector_condition > DEFECTIVE_CONDITION {
        return Err(Error::NearDefective(decomposition.vector_condition));
    }
    let spectral_abscissa = decomposition
        .values
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectralData {
        system: system.clone(),
        stable: spectral_abscissa < STABILITY_MARGIN,
        spectral_abscissa,
        decomposition,
    })
}

pub fn assert_stable(data: &SpectralData) -> Result<()> {
    if data.spectral_abscissa < STABILITY_MARGIN {
        Ok(())
    } else {
        // values are sorted, so the first one attains the abscissa
        Err(Error::Unstable(data.decomposition.values[0]))
    }
}

/// Frobenius norm of `[L, L†]`.
pub fn non_normality(system: &LinearSystem) -> f64 {
    let l = system.matrix();
    commutator(l, &adjoint(l))
        .expect("system matrix is square")
        .norm()
}

/// The eigenpairs spanning a slow manifold.
#[derive(Debug, Clone)]
pub struct SlowBasis {
    pub eigenvalues: Vec<Complex64>,
    pub vectors: Vec<ComplexVector>,
    /// `Re λ_n − Re λ_{n+1}`, or `+∞` when the whole spectrum is selected.
    pub gap: f64,
}

impl SlowBasis {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// Basis vectors as the columns of a `d × n` matrix.
    pub fn matrix(&self) -> ComplexMatrix {
        linalg::stack_columns(&self.vectors)
    }

    /// Builds a basis from caller-supplied eigenpairs of `data.system`.
    ///
    /// The vectors keep their scaling; each pair is checked against the
    /// operator and the set is checked for linear independence.
    pub fn from_eigenpairs(
        data: &SpectralData,
        eigenvalues: Vec<Complex64>,
        vectors: Vec<ComplexVector>,
    ) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != vectors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} eigenvalues for {} vectors",
                eigenvalues.len(),
                vectors.len()
            )));
        }
        let l = data.system.matrix();
        let scale = l.norm().max(f64::MIN_POSITIVE);
        for (lambda, v) in eigenvalues.iter().zip(&vectors) {
            if v.len() != data.dim() {
                return Err(Error::ShapeMismatch("basis vector dimension".into()));
            }
            linalg::ensure_finite_vector(v, "basis vector")?;
            let residual = (l * v - v * *lambda).norm();
            if residual > EIGENPAIR_TOL * scale * v.norm() {
                return Err(Error::NotEigenvector(residual / (scale * v.norm())));
            }
        }
        check_independent(&vectors)?;
        let gap = gap_against_spectrum(data, &eigenvalues);
        Ok(Self {
            eigenvalues,
            vectors,
            gap,
        })
    }

    /// Recovers an eigenbasis from any basis of an invariant subspace.
    ///
    /// The restriction `A` of `L` to the span (`L X = X A`) is diagonalized
    /// and the basis is replaced by `X · eigvecs(A)`. Spans that are not
    /// invariant under `L` are rejected.
    pub fn from_invariant_span(data: &SpectralData, vectors: &[ComplexVector]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::ShapeMismatch("empty span".into()));
        }
        check_independent(vectors)?;
        let x = linalg::stack_columns(vectors);
        let lx = data.system.matrix() * &x;
        let restriction = x
            .clone()
            .svd(true, true)
            .solve(&lx, 0.0)
            .map_err(|e| Error::NumericalFailure(e.to_owned()))?;
        let residual = (&lx - &x * &restriction).norm();
        let scale = data.system.matrix().norm().max(f64::MIN_POSITIVE) * x.norm();
        if residual > EIGENPAIR_TOL * scale {
            return Err(Error::NotInvariant(residual / scale));
        }
        let inner = linalg::eig(&restriction)?;
        let mapped = &x * &inner.right_vectors;
        let new_vectors = mapped.column_iter().map(|c| c.into_owned()).collect();
        Self::from_eigenpairs(data, inner.values, new_vectors)
    }

    /// Same basis with `vectors[i]` multiplied by `factors[i]`.
    pub fn rescaled(&self, factors: &[Complex64]) -> Result<Self> {
        if factors.len() != self.count() || factors.iter().any(|c| c.norm() == 0.0) {
            return Err(Error::ShapeMismatch("rescaling factors".into()));
        }
        Ok(Self {
            eigenvalues: self.eigenvalues.clone(),
            vectors: self
                .vectors
                .iter()
                .zip(factors)
                .map(|(v, c)| v * *c)
                .collect(),
            gap: self.gap,
        })
    }
}

fn check_independent(vectors: &[ComplexVector]) -> Result<()> {
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::ShapeMismatch("basis vectors differ in length".into()));
    }
    if vectors.len() > d {
        return Err(Error::RankDeficient(0.0));
    }
    // scale-free: normalize columns first
    let normalized: Vec<ComplexVector> = vectors
        .iter()
        .map(|v| {
            let n = v.norm();
            if n == 0.0 {
                v.clone()
            } else {
                v / Complex64::new(n, 0.0)
            }
        })
        .collect();
    let smin = linalg::smallest_singular_value(&linalg::stack_columns(&normalized));
    if smin > INDEPENDENCE_FLOOR {
        Ok(())
    } else {
        Err(Error::RankDeficient(smin))
    }
}

/// Smallest selected real part minus largest real part among eigenvalues not
/// matched to the selection.
fn gap_against_spectrum(data: &SpectralData, selected: &[Complex64]) -> f64 {
    let tol = linalg::tie_tolerance(data.system.matrix()).max(1e-8);
    let mut used = vec![false; data.dim()];
    for s in selected {
        if let Some((j, _)) = data
            .eigenvalues()
            .iter()
            .enumerate()
            .filter(|(j, z)| !used[*j] && (*z - s).norm() <= tol * (1.0 + s.norm()))
            .min_by(|a, b| (a.1 - s).norm().total_cmp(&(b.1 - s).norm()))
        {
            used[j] = true;
        }
    }
    let slow_min = selected
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    let rest_max = data
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(j, _)| !used[*j])
        .map(|(_, z)| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    slow_min - rest_max
}

/// The `n` eigenpairs with the largest real parts.
pub fn slow_basis(data: &SpectralData, n: usize) -> Result<SlowBasis> {
    let d = data.dim();
    if n == 0 || n > d {
        return Err(Error::OutOfRange {
            what: "slow count",
            value: n.to_string(),
            range: format!("1..={d}"),
        });
    }
    assert_stable(data)?;
    let values = data.eigenvalues();
    let tol = 1e-8;
    for (i, lambda) in values[..n].iter().enumerate() {
        if lambda.im.abs() <= tol * (1.0 + lambda.norm()) {
            continue;
        }
        let is_partner = |(j, z): &(usize, &Complex64)| {
            *j != i && (*z - lambda.conj()).norm() <= tol * (1.0 + lambda.norm())
        };
        let partner_selected = values[..n].iter().enumerate().any(|p| is_partner(&p));
        let partner_exists = values.iter().enumerate().any(|p| is_partner(&p));
        if partner_exists && !partner_selected {
            return Err(Error::ConjugatePairSplit(*lambda));
        }
    }
    let gap = if n == d {
        f64::INFINITY
    } else {
        values[n - 1].re - values[n].re
    };
    Ok(SlowBasis {
        eigenvalues: values[..n].to_vec(),
        vectors: (0..n).map(|j| data.decomposition.vector(j)).collect(),
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::models::{grad3, shear2d, GradParams, ShearParams};

    fn diag_system(values: &[f64]) -> LinearSystem {
        let m = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            values.len(),
            values.iter().map(|&x| c64(x, 0.0)),
        ));
        LinearSystem::new(m, "diag").unwrap()
    }

    #[test]
    fn shear_spectrum_is_stable() {
        let data = analyze(&shear2d(ShearParams::new(5.0, 1.0).unwrap())).unwrap();
        assert!((data.eigenvalues()[0] - c64(-1.0, 0.0)).norm() < 1e-14);
        assert!((data.eigenvalues()[1] - c64(-5.0, 0.0)).norm() < 1e-14);
        assert!(data.stable);
        assert_stable(&data).unwrap();
    }

    #[test]
    fn negative_identity_is_not_defective() {
        let data = analyze(&diag_system(&[-1.0, -1.0, -1.0])).unwrap();
        assert!(data.eigenvalues().iter().all(|z| (z - c64(-1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn grad_matrix_at_zero_wave_number_is_rejected() {
        // k = 0 cannot be built through the model constructor; assemble it directly
        let mut m = ComplexMatrix::zeros(3, 3);
        m[(2, 2)] = c64(-10.0, 0.0);
        let system = LinearSystem::new(m, "grad3-k0").unwrap();
        let outcome = analyze(&system).and_then(|d| assert_stable(&d));
        assert!(matches!(
            outcome,
            Err(Error::Unstable(_)) | Err(Error::NearDefective(_))
        ));
    }

    #[test]
    fn assert_stable_examples() {
        assert!(assert_stable(&analyze(&diag_system(&[-1.0, -2.0])).unwrap()).is_ok());
        match assert_stable(&analyze(&diag_system(&[-1.0, 0.1])).unwrap()) {
            Err(Error::Unstable(z)) => assert!((z - c64(0.1, 0.0)).norm() < 1e-15),
            other => panic!("expected Unstable, got {other:?}"),
        }
        let grad = grad3(GradParams::new(0.1, 1.0).unwrap());
        assert_stable(&analyze(&grad).unwrap()).unwrap();
    }

    #[test]
    fn shear_slow_basis_is_the_first_axis() {
        let data = analyze(&shear2d(ShearParams::new(5.0, 1.0).unwrap())).unwrap();
        let basis = slow_basis(&data, 1).unwrap();
        assert_eq!(basis.count(), 1);
        assert!((basis.eigenvalues[0] - c64(-1.0, 0.0)).norm() < 1e-14);
        assert!((basis.vectors[0][0].norm() - 1.0).abs() < 1e-14);
        assert!(basis.vectors[0][1].norm() < 1e-14);
        assert!((basis.gap - 4.0).abs() < 1e-12);
        assert_eq!(slow_basis(&data, 2).unwrap().gap, f64::INFINITY);
    }

    #[test]
    fn grad_acoustic_pair_selection() {
        let data = analyze(&grad3(GradParams::new(0.1, 1.0).unwrap())).unwrap();
        let basis = slow_basis(&data, 2).unwrap();
        let (a, b) = (basis.eigenvalues[0], basis.eigenvalues[1]);
        assert!(a.im > 0.0);
        assert!((a - b.conj()).norm() < 1e-10);
        // each column has the shape (−1 − a b, i b, 1) up to scaling
        for (lambda, v) in basis.eigenvalues.iter().zip(&basis.vectors) {
            let k = 1.0;
            let eps = 0.1;
            let aa = lambda / k;
            let bb = (1.0 + eps * lambda) * 3.0 / (4.0 * eps * k);
            let q = ComplexVector::from_vec(vec![-1.0 - aa * bb, c64(0.0, 1.0) * bb, c64(1.0, 0.0)]);
            let ratio = v[2] / q[2];
            assert!((v - q * ratio).norm() < 1e-10);
        }
        assert!(matches!(
            slow_basis(&data, 1),
            Err(Error::ConjugatePairSplit(_))
        ));
    }

    #[test]
    fn slow_basis_range_errors() {
        let data = analyze(&diag_system(&[-1.0, -2.0])).unwrap();
        assert!(matches!(slow_basis(&data, 0), Err(Error::OutOfRange { .. })));
        assert!(matches!(slow_basis(&data, 3), Err(Error::OutOfRange { .. })));
        let unstable = analyze(&diag_system(&[-1.0, 0.5])).unwrap();
        assert!(matches!(slow_basis(&unstable, 1), Err(Error::Unstable(_))));
    }

    #[test]
    fn non_normality_examples() {
        let herm = LinearSystem::new(
            linalg::matrix_from_rows(&[
                vec![c64(-2.0, 0.0), c64(1.0, 1.0)],
                vec![c64(1.0, -1.0), c64(-3.0, 0.0)],
            ])
            .unwrap(),
            "hermitian",
        )
        .unwrap();
        assert!(non_normality(&herm) < 1e-14);
        assert!(non_normality(&shear2d(ShearParams::new(5.0, 1.0).unwrap())) > 0.1);
        // printed commutator: Frobenius norm² = (16²+23²+7²+2·11²)k⁴ε²/(81ε²) + 2·21²k²/(81ε²)
        for k in [0.5, 1.0, 2.0] {
            let eps = 0.1;
            let nn = non_normality(&grad3(GradParams::new(eps, k).unwrap()));
            let expected = ((16.0f64.powi(2) + 23.0f64.powi(2) + 7.0f64.powi(2) + 2.0 * 121.0)
                * k.powi(4)
                * eps
                * eps
                + 2.0 * 441.0 * k * k)
                .sqrt()
                / (9.0 * eps);
            assert!((nn - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn invariant_span_recovers_eigenbasis() {
        let data = analyze(&shear2d(ShearParams::new(5.0, 1.0).unwrap())).unwrap();
        let v = ComplexVector::from_vec(vec![c64(0.0, 3.0), c64(0.0, 0.0)]);
        let basis = SlowBasis::from_invariant_span(&data, &[v]).unwrap();
        assert!((basis.eigenvalues[0] - c64(-1.0, 0.0)).norm() < 1e-12);
        let not_invariant = ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(1.0, 0.0)]);
        assert!(matches!(
            SlowBasis::from_invariant_span(&data, &[not_invariant]),
            Err(Error::NotInvariant(_))
        ));
    }
}
