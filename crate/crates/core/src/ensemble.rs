//! Seeded random stable systems for property checks and validation runs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{self, ComplexMatrix, ComplexVector, Lu};
use crate::projection;
use crate::spectral::{self, LinearSystem, SpectralData};

pub type EnsembleRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> EnsembleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real parts are drawn from this interval.
pub const RE_RANGE: (f64, f64) = (-4.0, -0.2);
/// Imaginary parts are drawn from `[-IM_MAX, IM_MAX]`.
pub const IM_MAX: f64 = 3.0;
/// Minimum distance between distinct real parts.
pub const RE_SEPARATION: f64 = 0.05;
const MAX_EIGENVECTOR_CONDITION: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// `V Λ V⁻¹` with `V = I + ½ R`, complex spectrum.
    NonNormal,
    /// `U Λ U†` with unitary `U`.
    Normal,
    /// Real matrix with conjugate eigenvalue pairs.
    Real,
}

fn unit_complex(rng: &mut EnsembleRng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut EnsembleRng, d: usize) -> ComplexVector {
    ComplexVector::from_fn(d, |_, _| unit_complex(rng))
}

pub fn random_matrix(rng: &mut EnsembleRng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| unit_complex(rng))
}

/// `I + ½ R` redrawn until its condition number is at most 1e3.
pub fn random_invertible(rng: &mut EnsembleRng, n: usize) -> ComplexMatrix {
    loop {
        let m = ComplexMatrix::identity(n, n) + random_matrix(rng, n, n) * Complex64::new(0.5, 0.0);
        if linalg::condition_number(&m) <= MAX_EIGENVECTOR_CONDITION {
            return m;
        }
    }
}

pub fn random_unitary(rng: &mut EnsembleRng, n: usize) -> ComplexMatrix {
    random_matrix(rng, n, n).qr().q()
}

fn separated_reals(rng: &mut EnsembleRng, count: usize) -> Vec<f64> {
    'draw: loop {
        let mut out: Vec<f64> = Vec::with_capacity(count);
        for _ in 0..count {
            let r = rng.gen_range(RE_RANGE.0..RE_RANGE.1);
            if out.iter().any(|s| (s - r).abs() < RE_SEPARATION) {
                continue 'draw;
            }
            out.push(r);
        }
        return out;
    }
}

/// Eigenvalues with pairwise separated real parts.
pub fn random_spectrum(rng: &mut EnsembleRng, d: usize) -> Vec<Complex64> {
    separated_reals(rng, d)
        .into_iter()
        .map(|re| Complex64::new(re, rng.gen_range(-IM_MAX..IM_MAX)))
        .collect()
}

pub fn random_system(rng: &mut EnsembleRng, d: usize, kind: SystemKind) -> Result<LinearSystem> {
    let matrix = match kind {
        SystemKind::NonNormal => {
            let lambda = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(random_spectrum(rng, d)));
            let v = random_invertible(rng, d);
            &v * lambda * Lu::new(&v)?.inverse()?
        }
        SystemKind::Normal => {
            let lambda = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(random_spectrum(rng, d)));
            let u = random_unitary(rng, d);
            &u * lambda * u.adjoint()
        }
        SystemKind::Real => random_real_matrix(rng, d)?,
    };
    LinearSystem::new(matrix, format!("random-{kind:?}").to_lowercase())
}

/// Real `V Λ V⁻¹` whose complex eigenvalues come in conjugate pairs with
/// conjugate eigenvectors.
fn random_real_matrix(rng: &mut EnsembleRng, d: usize) -> Result<ComplexMatrix> {
    let pairs = rng.gen_range(0..=d / 2);
    let reals = separated_reals(rng, d - pairs);
    let mut values = Vec::with_capacity(d);
    let mut vectors: Vec<ComplexVector> = Vec::with_capacity(d);
    loop {
        values.clear();
        vectors.clear();
        for (k, &re) in reals.iter().enumerate() {
            if k < pairs {
                let lambda = Complex64::new(re, rng.gen_range(0.1..IM_MAX));
                let v = ComplexVector::from_fn(d, |_, _| unit_complex(rng));
                values.push(lambda);
                values.push(lambda.conj());
                vectors.push(v.clone());
                vectors.push(v.map(|z| z.conj()));
            } else {
                values.push(Complex64::new(re, 0.0));
                vectors.push(ComplexVector::from_fn(d, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)));
            }
        }
        let v = linalg::stack_columns(&vectors);
        if linalg::condition_number(&v) <= MAX_EIGENVECTOR_CONDITION {
            let lambda = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(values));
            let m = &v * lambda * Lu::new(&v)?.inverse()?;
            // drop the round-off imaginary part
            return Ok(m.map(|z| Complex64::new(z.re, 0.0)));
        }
    }
}

/// Slow counts `n` that neither split a conjugate pair nor sit in a tie.
pub fn valid_slow_counts(data: &SpectralData) -> Vec<usize> {
    (1..=data.dim())
        .filter(|&n| match spectral::slow_basis(data, n) {
            Ok(b) => b.gap > 1e-6,
            Err(_) => false,
        })
        .collect()
}

/// A uniformly chosen valid slow count, at most `max`.
pub fn random_slow_count(rng: &mut EnsembleRng, data: &SpectralData, max: usize) -> Option<usize> {
    let counts: Vec<usize> = valid_slow_counts(data).into_iter().filter(|&n| n <= max).collect();
    if counts.is_empty() {
        None
    } else {
        Some(counts[rng.gen_range(0..counts.len())])
    }
}

/// A random stable system together with a valid slow count.
#[derive(Debug, Clone)]
pub struct Sample {
    pub data: SpectralData,
    pub slow_count: usize,
}

impl Sample {
    pub fn system(&self) -> &LinearSystem {
        &self.data.system
    }

    pub fn basis(&self) -> Result<spectral::SlowBasis> {
        spectral::slow_basis(&self.data, self.slow_count)
    }
}

/// Draws systems of dimension `dims` until one admits a valid slow count
/// no larger than `max_slow`.
pub fn sample(
    rng: &mut EnsembleRng,
    dims: std::ops::RangeInclusive<usize>,
    max_slow: usize,
    kind: SystemKind,
) -> Result<Sample> {
    loop {
        let d = rng.gen_range(dims.clone());
        let system = random_system(rng, d, kind)?;
        let data = spectral::analyze(&system)?;
        if let Some(slow_count) = random_slow_count(rng, &data, max_slow) {
            // the Gramian has to be usable for the DOP to exist
            let basis = spectral::slow_basis(&data, slow_count)?;
            if projection::gramian(&basis)?.is_ill_conditioned() {
                continue;
            }
            return Ok(Sample { data, slow_count });
        }
    }
}
