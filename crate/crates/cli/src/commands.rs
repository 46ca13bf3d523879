use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use slowproj::error_functional::ErrorFunctional;
use slowproj::linalg::{inner, ComplexMatrix, ComplexVector};
use slowproj::models::{grad3, GradParams};
use slowproj::projection::{self, Dop};
use slowproj::spectral::{self, SlowBasis};
use slowproj::trajectory::{self, propagate_full, propagate_reduced, TimeGrid};
use slowproj::{validate, Error, Method};

use crate::args::{BuiltinModel, Command, GridRange};
use crate::error::CliError;
use crate::model::Model;

/// What a command produced, before it is written anywhere.
#[derive(Debug)]
pub struct Artifact {
    pub bytes: Vec<u8>,
    pub inputs: Value,
    pub diagnostics: Vec<String>,
    /// Set when the command ran but its checks did not pass.
    pub failed: bool,
}

impl Artifact {
    fn new(bytes: Vec<u8>, inputs: Value) -> Self {
        Self {
            bytes,
            inputs,
            diagnostics: Vec::new(),
            failed: false,
        }
    }
}

/// Summary printed after a run that wrote to a file.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub outputs: Vec<String>,
    pub diagnostics: Vec<String>,
}

/// 17 significant digits; negative zero prints as zero.
pub fn num(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

fn pairs(v: &ComplexVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re + 0.0, z.im + 0.0]).collect()
}

struct Csv(csv::Writer<Vec<u8>>);

impl Csv {
    fn new(header: &[String]) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Self(w))
    }

    fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        Ok(self.0.write_record(fields)?)
    }

    fn finish(self) -> Result<Vec<u8>, CliError> {
        self.0
            .into_inner()
            .map_err(|e| CliError::Csv(csv::Error::from(e.into_error())))
    }
}

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Spectrum { .. } => "spectrum",
        Command::Project { .. } => "project",
        Command::Trajectories { .. } => "trajectories",
        Command::ErrorSurface { .. } => "error-surface",
        Command::Validate { .. } => "validate",
    }
}

pub fn execute(cmd: &Command) -> Result<Artifact, CliError> {
    match cmd {
        Command::Spectrum { model, k_range } => spectrum(&Model::resolve(model)?, *k_range),
        Command::Project { model, x0, method } => {
            let m = Model::resolve(model)?;
            let x0 = m.initial_condition(&x0.x0)?;
            project(&m, &x0, *method)
        }
        Command::Trajectories {
            model,
            x0,
            methods,
            t_end,
            samples,
        } => {
            let m = Model::resolve(model)?;
            let x0 = m.initial_condition(&x0.x0)?;
            trajectories(&m, &x0, methods, *t_end, *samples)
        }
        Command::ErrorSurface {
            model,
            x0,
            xi_range,
            xi_im_range,
        } => {
            let m = Model::resolve(model)?;
            let x0 = m.initial_condition(&x0.x0)?;
            error_surface(&m, &x0, *xi_range, *xi_im_range)
        }
        Command::Validate {
            seed,
            trials,
            self_test,
        } => run_validation(*seed, *trials as usize, *self_test),
    }
}

fn model_inputs(m: &Model) -> Value {
    let mut params = serde_json::Map::new();
    for (k, v) in &m.system.params {
        params.insert(k.clone(), json!(v));
    }
    json!({
        "model": m.system.label,
        "dimension": m.system.dim(),
        "slow_count": m.slow_count,
        "params": params,
    })
}

fn spectrum(m: &Model, k_range: Option<GridRange>) -> Result<Artifact, CliError> {
    let header: Vec<String> = ["k", "index", "re", "im", "is_slow"].map(String::from).to_vec();
    let mut csv = Csv::new(&header)?;
    let mut emit = |k: Option<f64>, values: &[Complex64]| -> Result<(), CliError> {
        for (i, z) in values.iter().enumerate() {
            csv.row(&[
                k.map(num).unwrap_or_default(),
                i.to_string(),
                num(z.re),
                num(z.im),
                (i < m.slow_count).to_string(),
            ])?;
        }
        Ok(())
    };
    let mut inputs = model_inputs(m);
    match k_range {
        None => {
            let data = spectral::analyze(&m.system)?;
            emit(m.grad.map(|p| p.k()), data.eigenvalues())?;
        }
        Some(range) => {
            let eps = match (m.builtin, m.grad) {
                (Some(BuiltinModel::Grad3), Some(p)) => p.epsilon(),
                _ => return Err(CliError::BadModel("k sweeps need the builtin grad3 model".into())),
            };
            let ks = range.geometric()?;
            for &k in &ks {
                let data = spectral::analyze(&grad3(GradParams::new(eps, k)?))?;
                emit(Some(k), data.eigenvalues())?;
            }
            inputs["k_range"] = json!([range.start, range.end, range.count]);
        }
    }
    Ok(Artifact::new(csv.finish()?, inputs))
}

fn slow_basis(m: &Model) -> Result<(spectral::SpectralData, SlowBasis), CliError> {
    let data = spectral::analyze(&m.system)?;
    let basis = spectral::slow_basis(&data, m.slow_count)?;
    Ok((data, basis))
}

/// Slow coordinates of the projection of `x0`.
fn coordinates(
    m: &Model,
    data: &spectral::SpectralData,
    basis: &SlowBasis,
    x0: &ComplexVector,
    method: Method,
) -> Result<(ComplexVector, ComplexVector, f64), CliError> {
    let op = match method {
        Method::Dop => {
            let dop = Dop::new(&m.system, basis)?;
            let xi = dop.coordinates(x0)?;
            let op = dop.operator()?;
            return Ok((xi, op.apply(x0), op.commutator_norm(&m.system)));
        }
        Method::Orthogonal => projection::orthogonal_projection(basis)?,
        Method::Riesz => projection::riesz_projection(data, m.slow_count)?,
    };
    Ok((op.coordinates(x0)?, op.apply(x0), op.commutator_norm(&m.system)))
}

fn gramian_diagnostics(basis: &SlowBasis) -> Result<(f64, Vec<String>), CliError> {
    let g = projection::gramian(basis)?;
    let mut diagnostics = Vec::new();
    if g.is_ill_conditioned() {
        diagnostics.push(format!("Gramian is ill-conditioned (condition {:e})", g.condition));
    }
    Ok((g.condition, diagnostics))
}

fn project(m: &Model, x0: &ComplexVector, method: Method) -> Result<Artifact, CliError> {
    let (data, basis) = slow_basis(m)?;
    let (xi, projected, comm) = coordinates(m, &data, &basis, x0, method)?;
    let (condition, diagnostics) = gramian_diagnostics(&basis)?;
    let doc = json!({
        "method": method,
        "xi": pairs(&xi),
        "projected": pairs(&projected),
        "commutator_norm": comm,
        "gramian_condition": condition,
    });
    let mut inputs = model_inputs(m);
    inputs["x0"] = json!(pairs(x0));
    inputs["method"] = json!(method);
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    let mut a = Artifact::new(bytes, inputs);
    a.diagnostics = diagnostics;
    Ok(a)
}

fn ordered_methods(methods: &[Method]) -> Vec<Method> {
    Method::ALL.into_iter().filter(|m| methods.contains(m)).collect()
}

fn trajectories(
    m: &Model,
    x0: &ComplexVector,
    methods: &[Method],
    t_end: Option<f64>,
    samples: usize,
) -> Result<Artifact, CliError> {
    let (data, basis) = slow_basis(m)?;
    let t_end = t_end.unwrap_or_else(|| trajectory::default_horizon(data.spectral_abscissa));
    let grid = TimeGrid::new(t_end, samples)?;
    let methods = ordered_methods(methods);
    let d = m.system.dim();

    let mut columns = vec![propagate_full(&data, x0, &grid)?];
    let mut labels = vec!["full".to_string()];
    for &method in &methods {
        let (xi, _, _) = coordinates(m, &data, &basis, x0, method)?;
        columns.push(propagate_reduced(&basis, &xi, &grid)?);
        labels.push(method.as_str().to_string());
    }

    let mut header = vec!["t".to_string()];
    for label in &labels {
        for i in 0..d {
            header.push(format!("{label}_{i}_re"));
            header.push(format!("{label}_{i}_im"));
        }
    }
    let mut csv = Csv::new(&header)?;
    for (s, t) in grid.times().enumerate() {
        let mut row = vec![num(t)];
        for traj in &columns {
            for z in traj.states[s].iter() {
                row.push(num(z.re));
                row.push(num(z.im));
            }
        }
        csv.row(&row)?;
    }
    let (_, diagnostics) = gramian_diagnostics(&basis)?;
    let mut inputs = model_inputs(m);
    inputs["x0"] = json!(pairs(x0));
    inputs["methods"] = json!(methods);
    inputs["t_end"] = json!(t_end);
    inputs["samples"] = json!(samples);
    let mut a = Artifact::new(csv.finish()?, inputs);
    a.diagnostics = diagnostics;
    Ok(a)
}

/// Diagonal unitary `S` with `L = S conj(L) S†`, so that `J x = S conj(x)`
/// commutes with `L`. Real matrices give `S = I`.
pub fn conjugation_symmetry(l: &ComplexMatrix) -> Option<ComplexVector> {
    let d = l.nrows();
    let tol = 1e-12 * l.norm().max(f64::MIN_POSITIVE);
    let mut s: Vec<Option<Complex64>> = vec![None; d];
    // s_i conj(s_j) = L_ij / conj(L_ij) on every nonzero entry
    let ratio = |i: usize, j: usize| l[(i, j)] / l[(i, j)].conj();
    for root in 0..d {
        if s[root].is_some() {
            continue;
        }
        s[root] = Some(Complex64::ONE);
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let si = s[i]?;
            for j in 0..d {
                if s[j].is_none() && (l[(i, j)].norm() > tol || l[(j, i)].norm() > tol) {
                    s[j] = Some(if l[(i, j)].norm() > tol {
                        ratio(i, j).conj() * si
                    } else {
                        ratio(j, i) * si
                    });
                    stack.push(j);
                }
            }
        }
    }
    let s = ComplexVector::from_iterator(d, s.into_iter().map(|z| z.unwrap_or(Complex64::ONE)));
    let mapped = ComplexMatrix::from_fn(d, d, |i, j| s[i] * l[(i, j)].conj() * s[j].conj());
    ((mapped - l).norm() <= tol * d as f64).then_some(s)
}

/// For a conjugate-pair basis with `J x̂₀ = c x̂₁`, the factor `c`: states
/// fixed by `J` have coordinates `(ξ, c·conj ξ)`.
fn conjugate_pair_factor(l: &ComplexMatrix, basis: &SlowBasis) -> Option<Complex64> {
    if basis.count() != 2 {
        return None;
    }
    let (l0, l1) = (basis.eigenvalues[0], basis.eigenvalues[1]);
    if l0.im == 0.0 || (l0 - l1.conj()).norm() > 1e-8 * (1.0 + l0.norm()) {
        return None;
    }
    let s = conjugation_symmetry(l)?;
    let j0 = basis.vectors[0].zip_map(&s, |z, si| si * z.conj());
    let v1 = &basis.vectors[1];
    let c = inner(&j0, v1).ok()? / v1.norm_squared();
    let residual = (&j0 - v1 * c).norm();
    (residual <= 1e-8 * j0.norm()).then_some(c)
}

fn error_surface(
    m: &Model,
    x0: &ComplexVector,
    re_range: GridRange,
    im_range: Option<GridRange>,
) -> Result<Artifact, CliError> {
    let (_, basis) = slow_basis(m)?;
    let n = basis.count();
    let pair = match n {
        1 => None,
        2 => Some(conjugate_pair_factor(m.system.matrix(), &basis).ok_or(Error::UnsupportedDimension(2))?),
        _ => return Err(Error::UnsupportedDimension(n).into()),
    };
    let ef = ErrorFunctional::new(&m.system, &basis, x0)?;
    let res = re_range.linear();
    let ims = im_range.map(|r| r.linear()).unwrap_or_else(|| vec![0.0]);

    let mut header = Vec::new();
    for i in 0..n {
        header.push(format!("xi_{i}_re"));
        header.push(format!("xi_{i}_im"));
    }
    header.push("e_total".into());
    let mut csv = Csv::new(&header)?;
    for &re in &res {
        for &im in &ims {
            let z = Complex64::new(re, im);
            let xi = match pair {
                None => ComplexVector::from_element(1, z),
                Some(c) => ComplexVector::from_vec(vec![z, c * z.conj()]),
            };
            let e = ef.evaluate(&xi)?;
            let mut row: Vec<String> = xi.iter().flat_map(|z| [num(z.re), num(z.im)]).collect();
            row.push(num(e.total));
            csv.row(&row)?;
        }
    }
    let mut inputs = model_inputs(m);
    inputs["x0"] = json!(pairs(x0));
    inputs["xi_range"] = json!([re_range.start, re_range.end, re_range.count]);
    if let Some(r) = im_range {
        inputs["xi_im_range"] = json!([r.start, r.end, r.count]);
    }
    Ok(Artifact::new(csv.finish()?, inputs))
}

fn run_validation(seed: u64, trials: usize, self_test: bool) -> Result<Artifact, CliError> {
    let report = validate::run(seed, trials, self_test)?;
    let mut bytes = report.to_json().into_bytes();
    bytes.push(b'\n');
    let inputs = json!({ "seed": seed, "trials": trials, "self_test": self_test });
    let mut a = Artifact::new(bytes, inputs);
    if let Err(e) = report.ensure_passed() {
        a.diagnostics.push(e.to_string());
        a.failed = true;
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_seventeen_significant_digits() {
        assert_eq!(num(0.6), "5.9999999999999998e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(-0.0), "0.0000000000000000e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn conjugation_symmetries() {
        use slowproj::linalg::c64;
        use slowproj::models::{grad3, GradParams};
        let g = grad3(GradParams::new(0.1, 1.0).unwrap());
        let s = conjugation_symmetry(g.matrix()).unwrap();
        let expected = [1.0, -1.0, 1.0];
        for (z, e) in s.iter().zip(expected) {
            assert!((z - c64(e, 0.0)).norm() < 1e-14);
        }
        let real = ComplexMatrix::from_fn(3, 3, |i, j| c64((i + 2 * j) as f64 - 3.0, 0.0));
        assert!(conjugation_symmetry(&real).unwrap().iter().all(|z| *z == c64(1.0, 0.0)));
        let none = ComplexMatrix::from_row_slice(2, 2, &[c64(-1.0, 1.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-2.0, 0.0)]);
        assert!(conjugation_symmetry(&none).is_none());
    }

    #[test]
    fn method_columns_follow_canonical_order() {
        let m = ordered_methods(&[Method::Riesz, Method::Dop]);
        assert_eq!(m, vec![Method::Dop, Method::Riesz]);
    }
}
