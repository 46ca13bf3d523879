//! The cumulative dynamical error
//!
//! ```text
//! E(ξ) = ½ ∫₀^∞ ‖e^{tL} x₀ − Σ_j ξ_j e^{λ_j t} x̂_j‖² dt
//! ```
//!
//! in closed form, its gradient, and two oracles that never touch the closed
//! form: a time quadrature of the integral and a derivative-free minimizer
//! built on that quadrature.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, Lu};
use crate::projection::{self, Gramian};
use crate::spectral::{self, LinearSystem, SlowBasis};
use crate::trajectory::Rk4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub e_inter: f64,
    pub e_trans: f64,
    /// `½ ∫ ‖e^{tL} x₀‖² dt`, independent of ξ.
    pub e_const: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub horizon_factor: f64,
    pub max_refinements: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            horizon_factor: 1.5,
            max_refinements: 20,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::BadParams(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if !(self.horizon_factor >= 1.0 && self.horizon_factor.is_finite()) {
            return Err(Error::BadParams(format!(
                "horizon_factor must be at least 1, got {}",
                self.horizon_factor
            )));
        }
        Ok(())
    }

    /// Truncation time for a system with the given spectral abscissa.
    pub fn horizon(&self, spectral_abscissa: f64) -> f64 {
        self.horizon_factor * self.rel_tol.ln() / (2.0 * spectral_abscissa)
    }
}

/// `Re Σ_ij a_i M_ij b_j*`.
fn sesquilinear(a: &ComplexVector, m: &ComplexMatrix, b: &ComplexVector) -> f64 {
    let mut acc = Complex64::ZERO;
    for i in 0..a.len() {
        for j in 0..b.len() {
            acc += a[i] * m[(i, j)] * b[j].conj();
        }
    }
    acc.re
}

/// The closed-form error for one (system, basis, x₀).
#[derive(Debug, Clone)]
pub struct ErrorFunctional {
    gramian: Gramian,
    interaction: ComplexVector,
    e_const: f64,
}

impl ErrorFunctional {
    pub fn new(system: &LinearSystem, basis: &SlowBasis, x0: &ComplexVector) -> Result<Self> {
        let data = spectral::analyze(system)?;
        spectral::assert_stable(&data)?;
        let gramian = projection::gramian(basis)?;
        let interaction = projection::interaction_vector(system, basis, x0)?;

        let dec = &data.decomposition;
        let full = SlowBasis {
            eigenvalues: dec.values.clone(),
            vectors: (0..dec.dim()).map(|j| dec.vector(j)).collect(),
            gap: f64::INFINITY,
        };
        let coeffs = Lu::new(&dec.right_vectors)?.solve(x0)?;
        let full_gramian = projection::gramian(&full)?;
        let e_const = -0.5 * sesquilinear(&coeffs, &full_gramian.entries, &coeffs);
        Ok(Self {
            gramian,
            interaction,
            e_const,
        })
    }

    pub fn gramian(&self) -> &Gramian {
        &self.gramian
    }

    pub fn interaction(&self) -> &ComplexVector {
        &self.interaction
    }

    pub fn e_const(&self) -> f64 {
        self.e_const
    }

    pub fn evaluate(&self, xi: &ComplexVector) -> Result<ErrorBreakdown> {
        if xi.len() != self.interaction.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} slow coordinates for a basis of {}",
                xi.len(),
                self.interaction.len()
            )));
        }
        let e_inter = -0.5 * sesquilinear(xi, &self.gramian.entries, xi);
        let e_trans = self
            .interaction
            .iter()
            .zip(xi.iter())
            .map(|(i, x)| (i * x.conj()).re)
            .sum::<f64>();
        Ok(ErrorBreakdown {
            e_inter,
            e_trans,
            e_const: self.e_const,
            total: e_inter + e_trans + self.e_const,
        })
    }

    pub fn gradient(&self, xi: &ComplexVector) -> Result<ComplexVector> {
        error_gradient(&self.gramian, &self.interaction, xi)
    }

    pub fn minimizer(&self) -> Result<ComplexVector> {
        projection::minimizer(&self.gramian, &self.interaction)
    }
}

pub fn error_closed_form(
    system: &LinearSystem,
    basis: &SlowBasis,
    x0: &ComplexVector,
    xi: &ComplexVector,
) -> Result<ErrorBreakdown> {
    ErrorFunctional::new(system, basis, x0)?.evaluate(xi)
}

/// `I − Gᵀξ`: the real part is `∂E/∂Re ξ`, the imaginary part `∂E/∂Im ξ`.
pub fn error_gradient(g: &Gramian, interaction: &ComplexVector, xi: &ComplexVector) -> Result<ComplexVector> {
    let n = g.n();
    if interaction.len() != n || xi.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "gradient of an {n}-mode functional with |I| = {}, |ξ| = {}",
            interaction.len(),
            xi.len()
        )));
    }
    Ok(interaction - g.entries.transpose() * xi)
}

/// Composite Simpson over `[0, T]` with the full state stepped by RK4.
struct Sampler<'a> {
    rk: Rk4,
    basis: &'a SlowBasis,
    x0: ComplexVector,
    horizon: f64,
    cfg: QuadratureConfig,
}

struct Pass {
    value: f64,
    scale: f64,
}

impl<'a> Sampler<'a> {
    fn new(
        system: &LinearSystem,
        basis: &'a SlowBasis,
        x0: &ComplexVector,
        cfg: QuadratureConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if x0.len() != system.dim() || basis.ambient_dim() != system.dim() {
            return Err(Error::ShapeMismatch("quadrature inputs disagree in dimension".into()));
        }
        let data = spectral::analyze(system)?;
        spectral::assert_stable(&data)?;
        Ok(Self {
            rk: Rk4::new(system.matrix()),
            basis,
            x0: x0.clone(),
            horizon: cfg.horizon(data.spectral_abscissa),
            cfg,
        })
    }

    /// Visits `(weight, t, x_full(t))` for every node of an `intervals`-panel rule.
    fn sweep(
        &self,
        intervals: usize,
        mut visit: impl FnMut(f64, f64, &ComplexVector),
    ) -> Result<()> {
        let h = self.horizon / intervals as f64;
        let transfer = self.rk.transfer(h)?;
        let mut x = self.x0.clone();
        for k in 0..=intervals {
            let w = if k == 0 || k == intervals {
                h / 3.0
            } else if k % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
            visit(w, k as f64 * h, &x);
            if k < intervals {
                x = &transfer * x;
            }
        }
        Ok(())
    }

    fn reduced(&self, xi: &ComplexVector, t: f64) -> ComplexVector {
        let mut out = ComplexVector::zeros(self.x0.len());
        for ((c, l), v) in xi.iter().zip(&self.basis.eigenvalues).zip(&self.basis.vectors) {
            out += v * (c * (l * t).exp());
        }
        out
    }

    fn pass(&self, xi: &ComplexVector, intervals: usize) -> Result<Pass> {
        let mut value = 0.0;
        let mut scale = 0.0;
        self.sweep(intervals, |w, t, x| {
            let red = self.reduced(xi, t);
            value += w * 0.5 * (x - &red).norm_squared();
            scale += w * 0.5 * (x.norm_squared() + red.norm_squared());
        })?;
        Ok(Pass { value, scale })
    }

    /// Doubles the panel count until two consecutive refinements agree.
    fn converge(&self, xi: &ComplexVector) -> Result<(f64, usize)> {
        if xi.len() != self.basis.count() {
            return Err(Error::ShapeMismatch(format!(
                "{} slow coordinates for a basis of {}",
                xi.len(),
                self.basis.count()
            )));
        }
        let tol = self.cfg.rel_tol;
        let mut intervals = INITIAL_PANELS;
        let mut prev = self.pass(xi, intervals)?;
        let mut agreed = 0;
        for _ in 0..self.cfg.max_refinements {
            intervals *= 2;
            let cur = self.pass(xi, intervals)?;
            let delta = (cur.value - prev.value).abs();
            if delta <= tol * cur.value.abs() || delta <= tol * tol * cur.scale {
                agreed += 1;
                if agreed == 2 {
                    return Ok((cur.value, intervals));
                }
            } else {
                agreed = 0;
            }
            prev = cur;
        }
        Err(Error::NoConvergence(format!(
            "quadrature did not settle within {} refinements ({intervals} panels)",
            self.cfg.max_refinements
        )))
    }
}

const INITIAL_PANELS: usize = 64;

/// Direct numerical evaluation of `E(ξ)` on `[0, T]`.
pub fn quadrature_error(
    system: &LinearSystem,
    basis: &SlowBasis,
    x0: &ComplexVector,
    xi: &ComplexVector,
    cfg: QuadratureConfig,
) -> Result<f64> {
    Sampler::new(system, basis, x0, cfg)?.converge(xi).map(|(v, _)| v)
}

/// Quadrature of `E(ξ)` at a fixed, pre-converged resolution, with the full
/// trajectory and the modal trajectories cached so that many `ξ` can be
/// evaluated cheaply.
#[derive(Debug, Clone)]
pub struct QuadratureOracle {
    weights: Vec<f64>,
    full: Vec<ComplexVector>,
    modes: Vec<ComplexMatrix>,
    intervals: usize,
}

impl QuadratureOracle {
    /// Picks the resolution one level finer than what the probes
    /// `ξ = 0, e_k, i·e_k` needed to converge.
    pub fn new(
        system: &LinearSystem,
        basis: &SlowBasis,
        x0: &ComplexVector,
        cfg: QuadratureConfig,
    ) -> Result<Self> {
        let sampler = Sampler::new(system, basis, x0, cfg)?;
        let n = basis.count();
        let mut probes = vec![ComplexVector::zeros(n)];
        for k in 0..n {
            for unit in [Complex64::ONE, Complex64::I] {
                let mut e = ComplexVector::zeros(n);
                e[k] = unit;
                probes.push(e);
            }
        }
        let mut intervals = INITIAL_PANELS;
        for p in &probes {
            intervals = intervals.max(sampler.converge(p)?.1);
        }
        intervals *= 2;

        let x = basis.matrix();
        let mut weights = Vec::with_capacity(intervals + 1);
        let mut full = Vec::with_capacity(intervals + 1);
        let mut modes = Vec::with_capacity(intervals + 1);
        sampler.sweep(intervals, |w, t, xf| {
            weights.push(w);
            full.push(xf.clone());
            let mut m = x.clone();
            for (j, l) in basis.eigenvalues.iter().enumerate() {
                let f = (l * t).exp();
                for v in m.column_mut(j).iter_mut() {
                    *v *= f;
                }
            }
            modes.push(m);
        })?;
        Ok(Self {
            weights,
            full,
            modes,
            intervals,
        })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn value(&self, xi: &ComplexVector) -> f64 {
        self.weights
            .iter()
            .zip(&self.full)
            .zip(&self.modes)
            .map(|((w, x), m)| w * 0.5 * (x - m * xi).norm_squared())
            .sum()
    }
}

const BRUTE_FORCE_MAX_MODES: usize = 3;
const BRUTE_FORCE_GRAD_TOL: f64 = 1e-7;
const BRUTE_FORCE_MAX_ITER: usize = 10_000;

fn to_complex(z: &[f64]) -> ComplexVector {
    ComplexVector::from_iterator(z.len() / 2, z.chunks(2).map(|p| Complex64::new(p[0], p[1])))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes the quadrature error by gradient descent on the `2n` real
/// coordinates, using central differences for the gradient.
pub fn brute_force_minimizer(
    system: &LinearSystem,
    basis: &SlowBasis,
    x0: &ComplexVector,
    cfg: QuadratureConfig,
) -> Result<ComplexVector> {
    let n = basis.count();
    if n > BRUTE_FORCE_MAX_MODES {
        return Err(Error::UnsupportedDimension(n));
    }
    let oracle = QuadratureOracle::new(system, basis, x0, cfg)?;
    let f = |z: &[f64]| oracle.value(&to_complex(z));
    let grad = |z: &[f64]| -> Vec<f64> {
        let h = 1e-5 * norm(z).max(1.0);
        let mut probe = z.to_vec();
        (0..z.len())
            .map(|k| {
                probe[k] = z[k] + h;
                let up = f(&probe);
                probe[k] = z[k] - h;
                let down = f(&probe);
                probe[k] = z[k];
                (up - down) / (2.0 * h)
            })
            .collect()
    };

    let mut z = vec![0.0; 2 * n];
    let mut fz = f(&z);
    let mut g = grad(&z);
    let mut step = 1.0;
    for iter in 0..BRUTE_FORCE_MAX_ITER {
        let gn = norm(&g);
        if gn <= BRUTE_FORCE_GRAD_TOL {
            log::debug!("brute-force minimizer converged after {iter} iterations");
            return Ok(to_complex(&z));
        }
        let slack = 10.0 * f64::EPSILON * fz.abs();
        let mut a = step;
        let (trial, ft) = loop {
            let trial: Vec<f64> = z.iter().zip(&g).map(|(x, d)| x - a * d).collect();
            let ft = f(&trial);
            if ft <= fz - 1e-4 * a * gn * gn + slack {
                break (trial, ft);
            }
            a *= 0.5;
            if a < 1e-30 {
                return Err(Error::NoConvergence(format!(
                    "line search stalled at gradient norm {gn:.3e}"
                )));
            }
        };
        let g_new = grad(&trial);
        let s: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        // Barzilai–Borwein step for the next iteration
        step = if sy > 0.0 { dot(&s, &s) / sy } else { 2.0 * a };
        z = trial;
        fz = ft;
        g = g_new;
    }
    Err(Error::NoConvergence(format!(
        "gradient norm {:.3e} after {BRUTE_FORCE_MAX_ITER} iterations",
        norm(&g)
    )))
}
