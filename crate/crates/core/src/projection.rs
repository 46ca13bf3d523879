//! Projections onto a slow manifold: the dynamically optimal projection
//! (DOP) built from the spectrally-weighted Gramian, and the orthogonal and
//! Riesz projections it is compared against.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, inner, ComplexMatrix, ComplexVector, Lu};
use crate::spectral::{self, LinearSystem, SlowBasis, SpectralData};

/// Gramians with a larger condition number are reported as ill-conditioned.
pub const GRAMIAN_WARN_CONDITION: f64 = 1e10;
const GAP_FLOOR: f64 = 1e-10;

/// `G_ij = ⟨x̂_i, x̂_j⟩ / (λ_i + λ_j*)`, Hermitian and negative semi-definite.
#[derive(Debug, Clone)]
pub struct Gramian {
    pub entries: ComplexMatrix,
    pub condition: f64,
}

impl Gramian {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition > GRAMIAN_WARN_CONDITION
    }

    /// Eigenvalues of the Hermitian part (real, ascending).
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }
}

fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn gramian(basis: &SlowBasis) -> Result<Gramian> {
    let n = basis.count();
    let mut entries = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let denom = basis.eigenvalues[i] + basis.eigenvalues[j].conj();
            if denom.norm() == 0.0 {
                return Err(Error::Unstable(basis.eigenvalues[i]));
            }
            entries[(i, j)] = inner(&basis.vectors[i], &basis.vectors[j])? / denom;
        }
    }
    let ev = hermitian_eigenvalues(&entries);
    let max = ev.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let condition = if min == 0.0 { f64::INFINITY } else { max / min };
    if condition > GRAMIAN_WARN_CONDITION {
        log::warn!("spectrally-weighted Gramian is ill-conditioned (condition {condition:.3e})");
    }
    Ok(Gramian { entries, condition })
}

/// Factored resolvents `L + λ_j* Id`, one per slow mode.
#[derive(Debug, Clone)]
struct Resolvents {
    factors: Vec<Lu>,
    vectors: Vec<ComplexVector>,
}

impl Resolvents {
    fn new(system: &LinearSystem, basis: &SlowBasis) -> Result<Self> {
        if basis.ambient_dim() != system.dim() {
            return Err(Error::ShapeMismatch(format!(
                "basis of dimension {} for a system of dimension {}",
                basis.ambient_dim(),
                system.dim()
            )));
        }
        let factors = basis
            .eigenvalues
            .iter()
            .map(|l| Lu::new(&system.shifted(l.conj())))
            .collect::<Result<_>>()?;
        Ok(Self {
            factors,
            vectors: basis.vectors.clone(),
        })
    }

    /// `I_j(x) = ⟨(L + λ_j*)⁻¹ x, x̂_j⟩`.
    fn interaction(&self, x: &ComplexVector) -> Result<ComplexVector> {
        let values = self
            .factors
            .iter()
            .zip(&self.vectors)
            .map(|(lu, v)| inner(&lu.solve(x)?, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ComplexVector::from_vec(values))
    }
}

pub fn interaction_vector(
    system: &LinearSystem,
    basis: &SlowBasis,
    x0: &ComplexVector,
) -> Result<ComplexVector> {
    if x0.len() != system.dim() {
        return Err(Error::ShapeMismatch("initial condition dimension".into()));
    }
    Resolvents::new(system, basis)?.interaction(x0)
}

/// Solves `Gᵀ ξ = I`.
pub fn minimizer(g: &Gramian, interaction: &ComplexVector) -> Result<ComplexVector> {
    if interaction.len() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "interaction vector of length {} for a {}x{} Gramian",
            interaction.len(),
            g.n(),
            g.n()
        )));
    }
    Lu::new(&g.entries.transpose())?.solve(interaction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dop,
    #[serde(rename = "orth")]
    Orthogonal,
    Riesz,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dop, Method::Orthogonal, Method::Riesz];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dop => "dop",
            Method::Orthogonal => "orth",
            Method::Riesz => "riesz",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dop" => Ok(Method::Dop),
            "orth" | "orthogonal" => Ok(Method::Orthogonal),
            "riesz" => Ok(Method::Riesz),
            other => Err(Error::BadParams(format!("unknown projection method '{other}'"))),
        }
    }
}

/// A `d × d` projection onto the span of a slow basis.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    pub method: Method,
    pub matrix: ComplexMatrix,
    pub basis: SlowBasis,
}

impl ProjectionOperator {
    pub fn apply(&self, x: &ComplexVector) -> ComplexVector {
        &self.matrix * x
    }

    /// Coordinates of `P x` in the slow basis.
    pub fn coordinates(&self, x: &ComplexVector) -> Result<ComplexVector> {
        let px = self.apply(x);
        let xm = self.basis.matrix();
        xm.svd(true, true)
            .solve(&px, 0.0)
            .map_err(|e| Error::NumericalFailure(e.to_owned()))
    }

    /// `‖P² − P‖_F`.
    pub fn idempotence_defect(&self) -> f64 {
        (&self.matrix * &self.matrix - &self.matrix).norm()
    }

    /// `‖[P, L]‖_F`.
    pub fn commutator_norm(&self, system: &LinearSystem) -> f64 {
        linalg::commutator(&self.matrix, system.matrix())
            .map(|c| c.norm())
            .unwrap_or(f64::NAN)
    }
}

/// DOP machinery for one (system, basis) pair: Gramian, factored resolvents
/// and the factored `Gᵀ`.
#[derive(Debug, Clone)]
pub struct Dop {
    system: LinearSystem,
    basis: SlowBasis,
    gramian: Gramian,
    resolvents: Resolvents,
    gt: Lu,
}

impl Dop {
    pub fn new(system: &LinearSystem, basis: &SlowBasis) -> Result<Self> {
        let data = spectral::analyze(system)?;
        spectral::assert_stable(&data)?;
        let gramian = gramian(basis)?;
        let gt = Lu::new(&gramian.entries.transpose())?;
        Ok(Self {
            resolvents: Resolvents::new(system, basis)?,
            system: system.clone(),
            basis: basis.clone(),
            gramian,
            gt,
        })
    }

    pub fn gramian(&self) -> &Gramian {
        &self.gramian
    }

    pub fn basis(&self) -> &SlowBasis {
        &self.basis
    }

    pub fn interaction(&self, x: &ComplexVector) -> Result<ComplexVector> {
        self.resolvents.interaction(x)
    }

    /// Optimal slow coordinates `ξ^min(x) = (Gᵀ)⁻¹ I(x)`.
    pub fn coordinates(&self, x: &ComplexVector) -> Result<ComplexVector> {
        self.gt.solve(&self.interaction(x)?)
    }

    pub fn project(&self, x: &ComplexVector) -> Result<ComplexVector> {
        Ok(self.basis.matrix() * self.coordinates(x)?)
    }

    /// Assembles `P` column by column from the images of the standard basis.
    pub fn operator(&self) -> Result<ProjectionOperator> {
        let d = self.system.dim();
        let mut matrix = ComplexMatrix::zeros(d, d);
        for m in 0..d {
            let mut e = ComplexVector::zeros(d);
            e[m] = Complex64::ONE;
            matrix.set_column(m, &self.project(&e)?);
        }
        Ok(ProjectionOperator {
            method: Method::Dop,
            matrix,
            basis: self.basis.clone(),
        })
    }

    /// `θ_i = Σ_j [G⁻¹]_ij (L† + λ_j)⁻¹ x̂_j`, so that `P x = Σ_i x̂_i ⟨x, θ_i⟩`.
    ///
    /// Coefficients leaving the conjugate-linear slot of the inner product
    /// are conjugated: `conj([(Gᵀ)⁻¹]_ij) = [G⁻¹]_ij`.
    pub fn dual_set(&self) -> Result<DualBasis> {
        let d = self.system.dim();
        let n = self.basis.count();
        let ladj = linalg::adjoint(self.system.matrix());
        let mut adjoint_solves = ComplexMatrix::zeros(n, d);
        for (j, (lambda, v)) in self
            .basis
            .eigenvalues
            .iter()
            .zip(&self.basis.vectors)
            .enumerate()
        {
            let mut shifted = ladj.clone();
            for i in 0..d {
                shifted[(i, i)] += lambda;
            }
            let eta = Lu::new(&shifted)?.solve(v)?;
            adjoint_solves.set_row(j, &eta.transpose());
        }
        // rows of Θᵀ solve G Θᵀ = (adjoint solves stacked as rows)
        let theta_t = Lu::new(&self.gramian.entries)?.solve_matrix(&adjoint_solves)?;
        Ok(DualBasis {
            vectors: theta_t.row_iter().map(|r| r.transpose()).collect(),
        })
    }
}

pub fn dop_matrix(system: &LinearSystem, basis: &SlowBasis) -> Result<ProjectionOperator> {
    Dop::new(system, basis)?.operator()
}

pub fn dop_dual_set(system: &LinearSystem, basis: &SlowBasis, g: &Gramian) -> Result<DualBasis> {
    let dop = Dop::new(system, basis)?;
    if g.n() != basis.count() {
        return Err(Error::ShapeMismatch("Gramian does not match basis".into()));
    }
    Dop {
        gt: Lu::new(&g.entries.transpose())?,
        gramian: g.clone(),
        ..dop
    }
    .dual_set()
}

/// `P = X (X†X)⁻¹ X†`.
pub fn orthogonal_projection(basis: &SlowBasis) -> Result<ProjectionOperator> {
    let x = basis.matrix();
    let smin = linalg::smallest_singular_value(&x);
    let scale = x.norm();
    if smin <= 1e-10 * scale {
        return Err(Error::RankDeficient(smin / scale));
    }
    let xh = x.adjoint();
    let coeffs = Lu::new(&(&xh * &x))?.solve_matrix(&xh)?;
    Ok(ProjectionOperator {
        method: Method::Orthogonal,
        matrix: x * coeffs,
        basis: basis.clone(),
    })
}

/// Left eigenvectors `θ_j` of the slow modes: `L†θ_j = λ_j* θ_j`,
/// `⟨x̂_i, θ_j⟩ = δ_ij`.
pub fn riesz_dual(data: &SpectralData, n: usize) -> Result<DualBasis> {
    let basis = spectral::slow_basis(data, n)?;
    if basis.gap <= GAP_FLOOR {
        return Err(Error::GapTooSmall(basis.gap));
    }
    let dec = &data.decomposition;
    if dec.vector_condition > spectral::DEFECTIVE_CONDITION {
        return Err(Error::NearDefective(dec.vector_condition));
    }
    // V† θ_j = e_j gives ⟨x̂_i, θ_j⟩ = δ_ij against every column of V
    let lu = Lu::new(&dec.right_vectors.adjoint())?;
    let d = data.dim();
    let vectors = (0..n)
        .map(|j| {
            let mut e = ComplexVector::zeros(d);
            e[j] = Complex64::ONE;
            lu.solve(&e)
        })
        .collect::<Result<_>>()?;
    Ok(DualBasis { vectors })
}

/// `P = Σ_j x̂_j θ_j†` with left eigenvectors `θ_j`.
pub fn riesz_projection(data: &SpectralData, n: usize) -> Result<ProjectionOperator> {
    let basis = spectral::slow_basis(data, n)?;
    let dual = riesz_dual(data, n)?;
    Ok(ProjectionOperator {
        method: Method::Riesz,
        matrix: dual.projector(&basis),
        basis,
    })
}

/// Biorthogonal partners of a slow basis.
#[derive(Debug, Clone)]
pub struct DualBasis {
    pub vectors: Vec<ComplexVector>,
}

impl DualBasis {
    /// Matrix `B_ki = ⟨x̂_k, θ_i⟩`.
    pub fn biorthogonality(&self, basis: &SlowBasis) -> Result<ComplexMatrix> {
        let n = basis.count();
        if self.vectors.len() != n {
            return Err(Error::ShapeMismatch("dual set size".into()));
        }
        let mut b = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                b[(k, i)] = inner(&basis.vectors[k], &self.vectors[i])?;
            }
        }
        Ok(b)
    }

    /// `max |⟨x̂_k, θ_i⟩ − δ_ki|`.
    pub fn biorthogonality_defect(&self, basis: &SlowBasis) -> Result<f64> {
        let b = self.biorthogonality(basis)?;
        let n = b.nrows();
        Ok((0..n)
            .flat_map(|k| (0..n).map(move |i| (k, i)))
            .map(|(k, i)| {
                let delta = if k == i { Complex64::ONE } else { Complex64::ZERO };
                (b[(k, i)] - delta).norm()
            })
            .fold(0.0, f64::max))
    }

    /// `Σ_i x̂_i θ_i†`.
    pub fn projector(&self, basis: &SlowBasis) -> ComplexMatrix {
        let d = basis.ambient_dim();
        let mut p = ComplexMatrix::zeros(d, d);
        for (x, theta) in basis.vectors.iter().zip(&self.vectors) {
            p += x * theta.adjoint();
        }
        p
    }

    /// `Σ_i x̂_i ⟨x, θ_i⟩`.
    pub fn apply(&self, basis: &SlowBasis, x: &ComplexVector) -> Result<ComplexVector> {
        let mut out = ComplexVector::zeros(basis.ambient_dim());
        for (v, theta) in basis.vectors.iter().zip(&self.vectors) {
            out += v * inner(x, theta)?;
        }
        Ok(out)
    }
}
