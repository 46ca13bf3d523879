//! Analytic benchmark systems: the two-dimensional shear flow and the
//! three-moment Grad system, with their closed-form reference data.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, ComplexMatrix, ComplexVector, Lu};
use crate::spectral::LinearSystem;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearParams {
    alpha: f64,
    gamma: f64,
}

impl ShearParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::BadParams(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::BadParams(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        Ok(Self { alpha, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `L = [[−1, γ], [0, −α]]`.
pub fn shear2d(p: ShearParams) -> LinearSystem {
    let m = ComplexMatrix::from_row_slice(
        2,
        2,
        &[c64(-1.0, 0.0), c64(p.gamma, 0.0), c64(0.0, 0.0), c64(-p.alpha, 0.0)],
    );
    LinearSystem::new(m, "shear2d")
        .expect("validated parameters give a finite 2x2 matrix")
        .with_param("alpha", p.alpha)
        .with_param("gamma", p.gamma)
}

/// Closed-form dynamically optimal projection of the shear system onto its
/// slow axis: `P x = (x₁ + γ/(1+α) x₂) e₁`.
pub fn shear2d_dop_reference(p: ShearParams) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            c64(1.0, 0.0),
            c64(p.gamma / (1.0 + p.alpha), 0.0),
            c64(0.0, 0.0),
            c64(0.0, 0.0),
        ],
    )
}

/// Riesz projection of the shear system onto its slow axis,
/// `P x = (x₁ + γ/(α−1) x₂) e₁`.
pub fn shear2d_riesz_reference(p: ShearParams) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            c64(1.0, 0.0),
            c64(p.gamma / (p.alpha - 1.0), 0.0),
            c64(0.0, 0.0),
            c64(0.0, 0.0),
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradParams {
    epsilon: f64,
    k: f64,
}

impl GradParams {
    pub fn new(epsilon: f64, k: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::BadParams(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::BadParams(format!(
                "wave number must be positive, got {k}"
            )));
        }
        Ok(Self { epsilon, k })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Fourier symbol of the linear three-moment system in (p, u, σ).
pub fn grad3(p: GradParams) -> LinearSystem {
    let k = p.k;
    let zero = c64(0.0, 0.0);
    let m = ComplexMatrix::from_row_slice(
        3,
        3,
        &[
            zero,
            -I * (5.0 * k / 3.0),
            zero,
            -I * k,
            zero,
            -I * k,
            zero,
            -I * (4.0 * k / 3.0),
            c64(-1.0 / p.epsilon, 0.0),
        ],
    );
    LinearSystem::new(m, "grad3")
        .expect("validated parameters give a finite 3x3 matrix")
        .with_param("epsilon", p.epsilon)
        .with_param("k", p.k)
}

/// Characteristic polynomial `−λ³ − λ²/ε − 3k²λ − 5k²/(3ε)`.
pub fn grad3_char_poly(p: GradParams, lambda: Complex64) -> Complex64 {
    let (eps, k2) = (p.epsilon, p.k * p.k);
    -lambda * lambda * lambda - lambda * lambda / eps - lambda * (3.0 * k2) - 5.0 * k2 / (3.0 * eps)
}

/// Analytic commutator `[L_k, L_k†]`.
pub fn grad3_commutator_reference(p: GradParams) -> ComplexMatrix {
    let (eps, k) = (p.epsilon, p.k);
    let k2e = k * k * eps;
    let s = 1.0 / (9.0 * eps);
    let r = |x: f64| c64(x * s, 0.0);
    ComplexMatrix::from_row_slice(
        3,
        3,
        &[
            r(16.0 * k2e),
            r(0.0),
            r(11.0 * k2e),
            r(0.0),
            r(-23.0 * k2e),
            I * (21.0 * k * s),
            r(11.0 * k2e),
            -I * (21.0 * k * s),
            r(7.0 * k2e),
        ],
    )
}

/// Classified spectrum and analytic eigenvectors of the Grad operator.
#[derive(Debug, Clone)]
pub struct GradModeData {
    /// Acoustic eigenvalue with positive imaginary part.
    pub lambda_ac: Complex64,
    pub lambda_diff: f64,
    /// `a_j = λ_j / k` for `(λ_ac, λ_ac*, λ_diff)`.
    pub a: [Complex64; 3],
    /// `b_j = 3(1 + ελ_j) / (4εk)`.
    pub b: [Complex64; 3],
    /// Columns `(−1 − a_j b_j, i b_j, 1)`.
    pub q: ComplexMatrix,
}

impl GradModeData {
    pub fn eigenvalues(&self) -> [Complex64; 3] {
        [
            self.lambda_ac,
            self.lambda_ac.conj(),
            c64(self.lambda_diff, 0.0),
        ]
    }
}

pub fn grad3_modes(p: GradParams) -> Result<GradModeData> {
    let (eps, k) = (p.epsilon, p.k);
    // companion matrix of the monic cubic λ³ + λ²/ε + 3k²λ + 5k²/(3ε)
    let c2 = 1.0 / eps;
    let c1 = 3.0 * k * k;
    let c0 = 5.0 * k * k / (3.0 * eps);
    let companion = ComplexMatrix::from_row_slice(
        3,
        3,
        &[
            c64(-c2, 0.0),
            c64(-c1, 0.0),
            c64(-c0, 0.0),
            c64(1.0, 0.0),
            c64(0.0, 0.0),
            c64(0.0, 0.0),
            c64(0.0, 0.0),
            c64(1.0, 0.0),
            c64(0.0, 0.0),
        ],
    );
    let roots = linalg::eig(&companion)?.values;

    let split_tol = |z: Complex64| 1e-9 * (1.0 + z.norm());
    let mut by_imag = roots.clone();
    by_imag.sort_by(|a, b| b.im.abs().total_cmp(&a.im.abs()));
    let (p1, p2, real) = (by_imag[0], by_imag[1], by_imag[2]);
    if p1.im.abs() <= split_tol(p1) {
        return Err(Error::DegenerateSpectrum(format!(
            "three real roots at epsilon={eps}, k={k}"
        )));
    }
    if (p1 - p2.conj()).norm() > split_tol(p1) || real.im.abs() > split_tol(real) {
        return Err(Error::DegenerateSpectrum(format!(
            "roots {p1}, {p2}, {real} do not form a conjugate pair plus a real root"
        )));
    }
    let upper = if p1.im > 0.0 { p1 } else { p2 };
    let lower = if p1.im > 0.0 { p2 } else { p1 };
    let lambda_ac = (upper + lower.conj()) * 0.5;
    let lambda_diff = real.re;

    let lambdas = [lambda_ac, lambda_ac.conj(), c64(lambda_diff, 0.0)];
    let a = lambdas.map(|l| l / k);
    let b = lambdas.map(|l| (1.0 + eps * l) * (3.0 / (4.0 * eps * k)));
    let q = ComplexMatrix::from_fn(3, 3, |row, j| match row {
        0 => -1.0 - a[j] * b[j],
        1 => I * b[j],
        _ => c64(1.0, 0.0),
    });
    Ok(GradModeData {
        lambda_ac,
        lambda_diff,
        a,
        b,
        q,
    })
}

/// Closed two-mode model for the pressure and velocity amplitudes.
#[derive(Debug, Clone)]
pub struct GradReducedModel {
    /// (p, u) rows of the two acoustic eigenvectors.
    pub hmat: ComplexMatrix,
    pub lambda: ComplexMatrix,
    /// Transport matrix `H Λ H⁻¹`.
    pub transport: ComplexMatrix,
}

pub fn grad3_reduced(p: GradParams) -> Result<GradReducedModel> {
    let modes = grad3_modes(p)?;
    let hmat = modes.q.view((0, 0), (2, 2)).into_owned();
    let lambda = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![
        modes.lambda_ac,
        modes.lambda_ac.conj(),
    ]));
    let h_inv = Lu::new(&hmat)?.inverse()?;
    let transport = &hmat * &lambda * h_inv;
    Ok(GradReducedModel {
        hmat,
        lambda,
        transport,
    })
}

/// Unit vector orthogonal to both acoustic eigenvectors.
pub fn grad3_slow_orthogonal_complement(p: GradParams) -> Result<ComplexVector> {
    let q = grad3_modes(p)?.q;
    let (u, v) = (q.column(0), q.column(1));
    // conj(u × v) is orthogonal to u and v under ⟨x, y⟩ = Σ x_j conj(y_j)
    let cross = ComplexVector::from_vec(vec![
        (u[1] * v[2] - u[2] * v[1]).conj(),
        (u[2] * v[0] - u[0] * v[2]).conj(),
        (u[0] * v[1] - u[1] * v[0]).conj(),
    ]);
    let n = cross.norm();
    if n == 0.0 {
        return Err(Error::DegenerateSpectrum(
            "acoustic eigenvectors are parallel".into(),
        ));
    }
    Ok(cross / c64(n, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner;
    use crate::spectral::analyze;
    use crate::trajectory::{propagate_full, TimeGrid};

    fn entry_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn shear_matrix_and_parameters() {
        let l = shear2d(ShearParams::new(5.0, 1.0).unwrap());
        assert_eq!(
            l.matrix(),
            &ComplexMatrix::from_row_slice(
                2,
                2,
                &[c64(-1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(-5.0, 0.0)]
            )
        );
        let normal = shear2d(ShearParams::new(2.0, 0.0).unwrap());
        assert_eq!(crate::spectral::non_normality(&normal), 0.0);
        let ev = analyze(&shear2d(ShearParams::new(3.0, 2.0).unwrap())).unwrap();
        assert!((ev.eigenvalues()[0] - c64(-1.0, 0.0)).norm() < 1e-14);
        assert!((ev.eigenvalues()[1] - c64(-3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn shear_parameter_validation() {
        assert!(matches!(ShearParams::new(1.0, 1.0), Err(Error::BadParams(_))));
        assert!(matches!(ShearParams::new(5.0, -0.1), Err(Error::BadParams(_))));
        assert!(matches!(ShearParams::new(f64::NAN, 0.0), Err(Error::BadParams(_))));
    }

    #[test]
    fn shear_dop_reference_entries() {
        let p = shear2d_dop_reference(ShearParams::new(5.0, 1.0).unwrap());
        assert!((p[(0, 1)].re - 1.0 / 6.0).abs() < 1e-16);
        let p = shear2d_dop_reference(ShearParams::new(4.0, 0.0).unwrap());
        assert_eq!(p[(0, 1)], c64(0.0, 0.0));
        assert_eq!(p[(0, 0)], c64(1.0, 0.0));
        let p = shear2d_dop_reference(ShearParams::new(3.0, 2.0).unwrap());
        assert!((p[(0, 1)].re - 0.5).abs() < 1e-16);
    }

    #[test]
    fn grad_matrix_entries_and_validation() {
        let l = grad3(GradParams::new(0.1, 1.0).unwrap());
        assert_eq!(l.matrix()[(2, 2)], c64(-10.0, 0.0));
        assert!(matches!(GradParams::new(0.1, 0.0), Err(Error::BadParams(_))));
        assert!(matches!(GradParams::new(0.0, 1.0), Err(Error::BadParams(_))));
    }

    #[test]
    fn grad_characteristic_polynomial_matches_determinant() {
        // det(L − λ) expanded at four points fixes the cubic coefficient by coefficient
        let p = GradParams::new(0.1, 1.3).unwrap();
        let l = grad3(p);
        for z in [c64(0.0, 0.0), c64(1.0, 0.0), c64(-2.0, 0.5), c64(0.3, -1.7)] {
            let det = l.shifted(-z).determinant();
            assert!((det - grad3_char_poly(p, z)).norm() < 1e-10 * (1.0 + det.norm()));
        }
    }

    #[test]
    fn grad_commutator_matches_reference() {
        for (eps, k) in [(0.1, 1.0), (0.05, 5.0)] {
            let p = GradParams::new(eps, k).unwrap();
            let l = grad3(p);
            let c = linalg::commutator(l.matrix(), &linalg::adjoint(l.matrix())).unwrap();
            assert!(entry_close(&c, &grad3_commutator_reference(p), 1e-12));
        }
    }

    #[test]
    fn grad_mode_roots_and_eigenvectors() {
        for (eps, k) in [(0.1, 1.0), (0.05, 5.0), (0.5, 0.5), (0.1, 50.0)] {
            let p = GradParams::new(eps, k).unwrap();
            let m = grad3_modes(p).unwrap();
            assert!(m.lambda_ac.im > 0.0);
            let l = grad3(p);
            let lnorm = l.matrix().norm();
            for (j, r) in m.eigenvalues().iter().enumerate() {
                let poly = -r * r * r - r * r / eps - r * (3.0 * k * k) - 5.0 * k * k / (3.0 * eps);
                assert!(poly.norm() <= 1e-9 * (1.0 + r.norm().powi(3)), "root residual {poly}");
                let qj = m.q.column(j);
                let residual = (l.matrix() * qj - qj * *r).norm();
                assert!(residual <= 1e-8 * lnorm, "eigenvector residual {residual}");
            }
        }
    }

    #[test]
    fn grad_modes_accumulate_for_large_wave_numbers() {
        let m = grad3_modes(GradParams::new(0.1, 50.0).unwrap()).unwrap();
        let ac_target = -20.0 / 9.0;
        let diff_target = -50.0 / 9.0;
        assert!(((m.lambda_ac.re - ac_target) / ac_target).abs() < 0.02);
        assert!(((m.lambda_diff - diff_target) / diff_target).abs() < 0.02);
    }

    #[test]
    fn grad_reduced_transport_matrix() {
        let p = GradParams::new(0.1, 1.0).unwrap();
        let r = grad3_reduced(p).unwrap();
        let m = grad3_modes(p).unwrap();
        let ev = linalg::eig(&r.transport).unwrap().values;
        assert!((ev[0] - m.lambda_ac).norm() < 1e-9);
        assert!((ev[1] - m.lambda_ac.conj()).norm() < 1e-9);
        // dp/dt = −(5/3) i k u holds exactly, so the first row is fixed
        assert!(r.transport[(0, 0)].norm() < 1e-9);
        assert!((r.transport[(0, 1)] - c64(0.0, -5.0 / 3.0)).norm() < 1e-9);
        // real after undoing the i on the velocity component
        let d = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![c64(1.0, 0.0), I]));
        let real_form = d.adjoint() * &r.transport * &d;
        assert!(real_form.iter().all(|z| z.im.abs() < 1e-9));
    }

    #[test]
    fn grad_reduced_model_tracks_acoustic_component() {
        let p = GradParams::new(0.1, 1.0).unwrap();
        let reduced = grad3_reduced(p).unwrap();
        let modes = grad3_modes(p).unwrap();
        let x0 = ComplexVector::from_vec(vec![c64(0.3, 0.1), c64(-0.2, 0.4), c64(0.7, -0.5)]);
        // acoustic coordinates of x0 in the analytic eigenbasis
        let coeffs = Lu::new(&modes.q).unwrap().solve(&x0).unwrap();
        let pu0 = &reduced.hmat * ComplexVector::from_vec(vec![coeffs[0], coeffs[1]]);
        let grid = TimeGrid::new(20.0, 100).unwrap();
        let tsys = LinearSystem::new(reduced.transport.clone(), "transport").unwrap();
        let reduced_traj = propagate_full(&analyze(&tsys).unwrap(), &pu0, &grid).unwrap();
        for (t, pu) in grid.times().zip(&reduced_traj.states) {
            let expected: ComplexVector = (0..2)
                .map(|j| modes.q.column(j).rows(0, 2) * (coeffs[j] * (modes.eigenvalues()[j] * t).exp()))
                .fold(ComplexVector::zeros(2), |acc, v| acc + v);
            assert!((pu - expected).norm() <= 1e-8, "t={t}");
        }
    }

    #[test]
    fn slow_orthogonal_complement_properties() {
        let p = GradParams::new(0.1, 1.0).unwrap();
        let w = grad3_slow_orthogonal_complement(p).unwrap();
        let q = grad3_modes(p).unwrap().q;
        assert!((w.norm() - 1.0).abs() < 1e-14);
        for j in 0..2 {
            let qj = q.column(j).into_owned();
            assert!(inner(&w, &qj).unwrap().norm() <= 1e-12 * qj.norm());
        }
    }
}
