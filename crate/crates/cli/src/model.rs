use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use slowproj::linalg::{c64, ComplexMatrix, ComplexVector};
use slowproj::models::{grad3, grad3_slow_orthogonal_complement, shear2d, GradParams, ShearParams};
use slowproj::LinearSystem;

use crate::args::{BuiltinModel, ModelArgs};
use crate::error::CliError;

/// On-disk model description, row-major with explicit `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub dimension: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub slow_count: usize,
}

impl ModelFile {
    pub fn to_system(&self, label: &str) -> Result<LinearSystem, CliError> {
        let d = self.dimension;
        if self.matrix.len() != d || self.matrix.iter().any(|r| r.len() != d) {
            return Err(CliError::BadModel(format!(
                "matrix is not {d}x{d} as declared by \"dimension\""
            )));
        }
        let m = ComplexMatrix::from_fn(d, d, |i, j| {
            let [re, im] = self.matrix[i][j];
            c64(re, im)
        });
        Ok(LinearSystem::new(m, label)?)
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub system: LinearSystem,
    pub slow_count: usize,
    pub builtin: Option<BuiltinModel>,
    pub grad: Option<GradParams>,
}

impl Model {
    pub fn resolve(args: &ModelArgs) -> Result<Self, CliError> {
        let (system, default_count, grad) = match (args.model, &args.model_file) {
            (Some(BuiltinModel::Shear2d), _) => {
                (shear2d(ShearParams::new(args.alpha, args.gamma)?), 1, None)
            }
            (Some(BuiltinModel::Grad3), _) => {
                let p = GradParams::new(args.epsilon, args.k)?;
                (grad3(p), 2, Some(p))
            }
            (None, Some(path)) => {
                let file = read_model_file(path)?;
                (file.to_system(&path.display().to_string())?, file.slow_count, None)
            }
            (None, None) => return Err(CliError::BadModel("no model given".into())),
        };
        let slow_count = args.slow_count.unwrap_or(default_count);
        if slow_count == 0 || slow_count > system.dim() {
            return Err(CliError::BadModel(format!(
                "slow count {slow_count} outside 1..={}",
                system.dim()
            )));
        }
        Ok(Self {
            system,
            slow_count,
            builtin: args.model,
            grad,
        })
    }

    pub fn initial_condition(&self, text: &str) -> Result<ComplexVector, CliError> {
        if text.trim() == "slow-orthogonal" {
            return match self.grad {
                Some(p) => Ok(grad3_slow_orthogonal_complement(p)?),
                None => Err(CliError::BadInitialCondition(
                    "slow-orthogonal is only defined for grad3".into(),
                )),
            };
        }
        let values = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::BadInitialCondition(format!("'{text}': {e}")))?;
        let d = self.system.dim();
        if values.len() != 2 * d {
            return Err(CliError::BadInitialCondition(format!(
                "expected {} numbers (re,im for each of {d} components), got {}",
                2 * d,
                values.len()
            )));
        }
        Ok(ComplexVector::from_iterator(
            d,
            values.chunks(2).map(|p| Complex64::new(p[0], p[1])),
        ))
    }
}

pub fn read_model_file(path: &Path) -> Result<ModelFile, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::BadModel(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(model: Option<BuiltinModel>) -> ModelArgs {
        ModelArgs {
            model,
            model_file: None,
            alpha: 5.0,
            gamma: 1.0,
            epsilon: 0.1,
            k: 1.0,
            slow_count: None,
        }
    }

    #[test]
    fn builtin_defaults() {
        let m = Model::resolve(&args(Some(BuiltinModel::Grad3))).unwrap();
        assert_eq!((m.system.dim(), m.slow_count), (3, 2));
        let x0 = m.initial_condition("slow-orthogonal").unwrap();
        assert!((x0.norm() - 1.0).abs() < 1e-12);
        let s = Model::resolve(&args(Some(BuiltinModel::Shear2d))).unwrap();
        assert!(s.initial_condition("slow-orthogonal").is_err());
        let x0 = s.initial_condition("0.4,0,1.2,0").unwrap();
        assert_eq!(x0[1], c64(1.2, 0.0));
        assert!(s.initial_condition("0.4,0,1.2").is_err());
    }

    #[test]
    fn model_file_validation() {
        let ok = ModelFile {
            dimension: 2,
            matrix: vec![vec![[-1.0, 0.0], [1.0, 0.0]], vec![[0.0, 0.0], [-5.0, 0.0]]],
            slow_count: 1,
        };
        assert_eq!(ok.to_system("t").unwrap().dim(), 2);
        let bad = ModelFile { dimension: 3, ..ok.clone() };
        assert!(matches!(bad.to_system("t"), Err(CliError::BadModel(_))));
        let nan = ModelFile {
            matrix: vec![vec![[f64::NAN, 0.0], [1.0, 0.0]], vec![[0.0, 0.0], [-5.0, 0.0]]],
            ..ok
        };
        assert!(nan.to_system("t").is_err());
    }
}
