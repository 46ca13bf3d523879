//! Full and reduced solutions on uniform time grids.
//!
//! Two independent propagators are provided: the spectral one evaluates
//! `V e^{tΛ} V⁻¹ x₀` directly, the step integrator runs classical RK4 on the
//! raw matrix and never touches the eigendecomposition.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, Lu};
use crate::spectral::{LinearSystem, SlowBasis, SpectralData, DEFECTIVE_CONDITION};

/// Largest `h · ‖L‖_F` used by the RK4 integrator.
pub const RK4_STEP_NORM: f64 = 0.01;
const MAX_SUBSTEPS: u64 = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    samples: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, samples: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::OutOfRange {
                what: "t_end",
                value: t_end.to_string(),
                range: "(0, inf)".into(),
            });
        }
        if samples < 2 {
            return Err(Error::OutOfRange {
                what: "samples",
                value: samples.to_string(),
                range: "2..".into(),
            });
        }
        Ok(Self { t_end, samples })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.t_end / (self.samples - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.samples {
            self.t_end
        } else {
            self.t_end * i as f64 / (self.samples - 1) as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples).map(|i| self.time(i))
    }
}

/// Horizon over which `e^{2·abscissa·t}` falls to `1e-8`.
pub fn default_horizon(spectral_abscissa: f64) -> f64 {
    (1e-8f64).ln() / (2.0 * spectral_abscissa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    FullSpectral,
    FullRk,
    Reduced,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<ComplexVector>,
    pub source: TrajectorySource,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Time series of one component.
    pub fn component(&self, i: usize) -> Vec<Complex64> {
        self.states.iter().map(|x| x[i]).collect()
    }
}

/// `x(t) = V diag(e^{λ_j t}) V⁻¹ x₀`.
pub fn propagate_full(
    data: &SpectralData,
    x0: &ComplexVector,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let dec = &data.decomposition;
    if dec.vector_condition > DEFECTIVE_CONDITION {
        return Err(Error::NearDefective(dec.vector_condition));
    }
    check_dim(x0, data.dim())?;
    let coeffs = Lu::new(&dec.right_vectors)?.solve(x0)?;
    let states = grid
        .times()
        .map(|t| {
            if t == 0.0 {
                return x0.clone();
            }
            let modal = ComplexVector::from_iterator(
                coeffs.len(),
                coeffs
                    .iter()
                    .zip(&dec.values)
                    .map(|(c, l)| c * (l * t).exp()),
            );
            &dec.right_vectors * modal
        })
        .collect();
    Ok(Trajectory {
        grid: *grid,
        states,
        source: TrajectorySource::FullSpectral,
    })
}

/// Classical fourth-order Runge–Kutta for `dx/dt = A x`.
#[derive(Debug, Clone)]
pub struct Rk4 {
    matrix: ComplexMatrix,
    max_step: f64,
}

impl Rk4 {
    pub fn new(matrix: &ComplexMatrix) -> Self {
        let norm = matrix.norm();
        let max_step = if norm > 0.0 {
            RK4_STEP_NORM / norm
        } else {
            f64::INFINITY
        };
        Self {
            matrix: matrix.clone(),
            max_step,
        }
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    pub fn step(&self, x: &ComplexVector, h: f64) -> ComplexVector {
        let hc = Complex64::new(h, 0.0);
        let k1 = &self.matrix * x;
        let k2 = &self.matrix * (x + &k1 * (hc * 0.5));
        let k3 = &self.matrix * (x + &k2 * (hc * 0.5));
        let k4 = &self.matrix * (x + &k3 * hc);
        let two = Complex64::new(2.0, 0.0);
        x + (k1 + k2 * two + k3 * two + k4) * (hc / 6.0)
    }

    /// Advances by `dt` in equal substeps no longer than the step bound.
    pub fn advance(&self, x: &ComplexVector, dt: f64) -> Result<ComplexVector> {
        let n = self.substeps(dt)?;
        let h = dt / n as f64;
        let mut y = x.clone();
        for _ in 0..n {
            y = self.step(&y, h);
        }
        Ok(y)
    }

    /// The linear map realized by [`Rk4::advance`] over `dt`, as a matrix.
    pub fn transfer(&self, dt: f64) -> Result<ComplexMatrix> {
        let substeps = self.substeps(dt)?;
        let h = Complex64::new(dt / substeps as f64, 0.0);
        let d = self.matrix.nrows();
        let a = &self.matrix * h;
        let id = ComplexMatrix::identity(d, d);
        // I + A(I + A/2(I + A/3(I + A/4)))
        let mut step = &id + &a * Complex64::new(0.25, 0.0);
        step = &id + &a * step * Complex64::new(1.0 / 3.0, 0.0);
        step = &id + &a * step * Complex64::new(0.5, 0.0);
        step = &id + &a * step;

        let mut out = id;
        let mut base = step;
        let mut k = substeps;
        while k > 0 {
            if k & 1 == 1 {
                out = &out * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        Ok(out)
    }

    fn substeps(&self, dt: f64) -> Result<u64> {
        let substeps = (dt / self.max_step).ceil().max(1.0);
        if substeps > MAX_SUBSTEPS as f64 {
            return Err(Error::StepUnderflow(format!(
                "interval {dt:.3e} needs {substeps:.3e} substeps"
            )));
        }
        Ok(substeps as u64)
    }
}

/// Step-integrated reference solution, independent of the eigensolver.
pub fn propagate_full_rk(
    system: &LinearSystem,
    x0: &ComplexVector,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_dim(x0, system.dim())?;
    let rk = Rk4::new(system.matrix());
    let mut states = Vec::with_capacity(grid.samples());
    states.push(x0.clone());
    for i in 1..grid.samples() {
        let dt = grid.time(i) - grid.time(i - 1);
        let next = rk.advance(&states[i - 1], dt)?;
        states.push(next);
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        source: TrajectorySource::FullRk,
    })
}

/// `x(t) = Σ ξ_j e^{λ_j t} x̂_j`.
pub fn propagate_reduced(
    basis: &SlowBasis,
    xi0: &ComplexVector,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if xi0.len() != basis.count() {
        return Err(Error::ShapeMismatch(format!(
            "{} slow coordinates for a basis of {}",
            xi0.len(),
            basis.count()
        )));
    }
    let x = basis.matrix();
    let states = grid
        .times()
        .map(|t| {
            let modal = ComplexVector::from_iterator(
                xi0.len(),
                xi0.iter()
                    .zip(&basis.eigenvalues)
                    .map(|(c, l)| c * (l * t).exp()),
            );
            &x * modal
        })
        .collect();
    Ok(Trajectory {
        grid: *grid,
        states,
        source: TrajectorySource::Reduced,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub l2_time: f64,
    pub sup: f64,
}

/// Discrete L²-in-time and sup distances between two trajectories.
pub fn deviation(a: &Trajectory, b: &Trajectory) -> Result<Deviation> {
    deviation_by(a, b, |x, y| (x - y).norm())
}

/// As [`deviation`], restricted to a single component.
pub fn component_deviation(a: &Trajectory, b: &Trajectory, i: usize) -> Result<Deviation> {
    if i >= a.dim() {
        return Err(Error::OutOfRange {
            what: "component",
            value: i.to_string(),
            range: format!("0..{}", a.dim()),
        });
    }
    deviation_by(a, b, |x, y| (x[i] - y[i]).norm())
}

fn deviation_by(
    a: &Trajectory,
    b: &Trajectory,
    dist: impl Fn(&ComplexVector, &ComplexVector) -> f64,
) -> Result<Deviation> {
    if a.grid != b.grid || a.states.len() != b.states.len() {
        return Err(Error::GridMismatch);
    }
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch("trajectory dimensions differ".into()));
    }
    let dists: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| dist(x, y))
        .collect();
    let times: Vec<f64> = a.grid.times().collect();
    let integral: f64 = dists
        .windows(2)
        .zip(times.windows(2))
        .map(|(d, t)| 0.5 * (t[1] - t[0]) * (d[0] * d[0] + d[1] * d[1]))
        .sum();
    Ok(Deviation {
        l2_time: integral.sqrt(),
        sup: dists.iter().cloned().fold(0.0, f64::max),
    })
}

fn check_dim(x0: &ComplexVector, d: usize) -> Result<()> {
    if x0.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "initial condition has length {}, system has dimension {d}",
            x0.len()
        )));
    }
    crate::linalg::ensure_finite_vector(x0, "initial condition")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::models::{shear2d, ShearParams};
    use crate::spectral::{analyze, slow_basis};

    fn vec2(a: f64, b: f64) -> ComplexVector {
        ComplexVector::from_vec(vec![c64(a, 0.0), c64(b, 0.0)])
    }

    fn diag_data(values: &[f64]) -> SpectralData {
        let m = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            values.len(),
            values.iter().map(|&x| c64(x, 0.0)),
        ));
        analyze(&LinearSystem::new(m, "diag").unwrap()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        let g = TimeGrid::new(2.0, 5).unwrap();
        let t: Vec<f64> = g.times().collect();
        assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn spectral_propagation_starts_at_x0() {
        let data = analyze(&shear2d(ShearParams::new(5.0, 1.0).unwrap())).unwrap();
        let x0 = vec2(0.4, 1.2);
        let tr = propagate_full(&data, &x0, &TimeGrid::new(1.0, 3).unwrap()).unwrap();
        assert_eq!(tr.states[0], x0);
    }

    #[test]
    fn spectral_propagation_of_diagonal_system() {
        let data = diag_data(&[-1.0, -2.0]);
        let tr = propagate_full(&data, &vec2(1.0, 1.0), &TimeGrid::new(1.0, 2).unwrap()).unwrap();
        let x = &tr.states[1];
        assert!((x[0].re - (-1.0f64).exp()).abs() < 1e-15);
        assert!((x[1].re - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn shear_two_mode_expansion() {
        // x₀ = 0.7 e₁ + c (1, −4)/√17 with c = −0.3√17, so
        // x₁(t) = 0.7 e^{−t} − 0.3 e^{−5t}
        let data = analyze(&shear2d(ShearParams::new(5.0, 1.0).unwrap())).unwrap();
        let grid = TimeGrid::new(3.0, 31).unwrap();
        let tr = propagate_full(&data, &vec2(0.4, 1.2), &grid).unwrap();
        for (t, x) in grid.times().zip(&tr.states) {
            let expected = 0.7 * (-t).exp() - 0.3 * (-5.0 * t).exp();
            assert!((x[0].re - expected).abs() < 1e-14);
            assert!(x[0].im.abs() < 1e-14);
            assert!((x[1].re - 1.2 * (-5.0 * t).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn rk4_scalar_decay() {
        let m = ComplexMatrix::from_element(1, 1, c64(-1.0, 0.0));
        let sys = LinearSystem::new(m, "scalar").unwrap();
        let x0 = ComplexVector::from_element(1, c64(1.0, 0.0));
        let tr = propagate_full_rk(&sys, &x0, &TimeGrid::new(1.0, 2).unwrap()).unwrap();
        assert!((tr.states[1][0].re - (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(tr.source, TrajectorySource::FullRk);
    }

    #[test]
    fn rk4_transfer_matches_stepping() {
        let sys = shear2d(ShearParams::new(5.0, 1.0).unwrap());
        let rk = Rk4::new(sys.matrix());
        let x0 = vec2(0.4, 1.2);
        for dt in [1e-4, 0.37, 2.0] {
            let stepped = rk.advance(&x0, dt).unwrap();
            let mapped = rk.transfer(dt).unwrap() * &x0;
            assert!((stepped - mapped).norm() < 1e-13);
        }
    }

    #[test]
    fn rk4_tracks_spectral_solution_for_shear() {
        let sys = shear2d(ShearParams::new(5.0, 1.0).unwrap());
        let data = analyze(&sys).unwrap();
        let grid = TimeGrid::new(10.0, 201).unwrap();
        let x0 = vec2(0.4, 1.2);
        let a = propagate_full(&data, &x0, &grid).unwrap();
        let b = propagate_full_rk(&sys, &x0, &grid).unwrap();
        assert!(deviation(&a, &b).unwrap().sup < 1e-7);
        // x₁ rises from 0.4 while the fast mode decays, then decays monotonically
        let x1: Vec<f64> = a.component(0).iter().map(|z| z.re).collect();
        let peak = x1
            .iter()
            .enumerate()
            .max_by(|p, q| p.1.total_cmp(q.1))
            .unwrap()
            .0;
        assert!(peak > 0 && x1[peak] > 0.4);
        assert!(x1[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn reduced_propagation_examples() {
        let data = analyze(&shear2d(ShearParams::new(5.0, 1.0).unwrap())).unwrap();
        let basis = slow_basis(&data, 1).unwrap();
        let grid = TimeGrid::new(2.0, 11).unwrap();
        let zero = propagate_reduced(&basis, &ComplexVector::zeros(1), &grid).unwrap();
        assert!(zero.states.iter().all(|x| x.norm() == 0.0));
        let one = ComplexVector::from_element(1, c64(1.0, 0.0));
        let tr = propagate_reduced(&basis, &one, &grid).unwrap();
        for (t, x) in grid.times().zip(&tr.states) {
            assert!((x - &basis.vectors[0] * c64((-t).exp(), 0.0)).norm() < 1e-15);
        }
        assert!(matches!(
            propagate_reduced(&basis, &ComplexVector::zeros(2), &grid),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn deviation_examples() {
        let data = diag_data(&[-1.0, -2.0]);
        let grid = TimeGrid::new(1.0, 11).unwrap();
        let a = propagate_full(&data, &vec2(1.0, 1.0), &grid).unwrap();
        assert_eq!(deviation(&a, &a).unwrap(), Deviation { l2_time: 0.0, sup: 0.0 });
        let other = propagate_full(&data, &vec2(1.0, 1.0), &TimeGrid::new(2.0, 11).unwrap()).unwrap();
        assert!(matches!(deviation(&a, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn default_horizon_matches_tail_bound() {
        let t = default_horizon(-1.0);
        assert!(((-2.0 * t).exp() - 1e-8).abs() < 1e-20);
    }
}
