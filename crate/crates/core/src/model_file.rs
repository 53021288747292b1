//! TOML model files.
//!
//! ```toml
//! [shape]
//! m = 1
//! n = 0
//!
//! [diffusion]
//! a = [[0.0]]
//! alpha = [1.0]
//!
//! [drift]
//! b = [0.5]
//! beta = [[-1.0]]    # row i is β_i
//! beta_jj = []
//!
//! [killing]
//! c = 0.0
//! gamma = [0.0]
//!
//! [jumps.constant]
//! family = "compound-exponential"
//! intensity = 1.0
//! rate = 2.0
//! direction = [1.0]
//!
//! [jumps.linear.1]   # μ_1, numbered from 1 like the coordinates of I
//! family = "tempered-stable"
//! scale = 0.28
//! index = 0.5
//! rate = 1.0
//! direction = [1.0]
//! ```
//!
//! Every section except `[shape]` is optional and defaults to zeros.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::LevyMeasure;
use crate::model::{AffineModel, LinearPart, StateShape};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Diffusion {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Drift {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_jj: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Killing {
    #[serde(default)]
    c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Jumps {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constant: Option<LevyMeasure>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    linear: BTreeMap<String, LevyMeasure>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    shape: StateShape,
    #[serde(default)]
    diffusion: Diffusion,
    #[serde(default)]
    drift: Drift,
    #[serde(default)]
    killing: Killing,
    #[serde(default)]
    jumps: Jumps,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFile(msg.into())
}

fn check_len(name: &str, v: &[f64], len: usize) -> Result<()> {
    if v.len() == len {
        Ok(())
    } else {
        Err(bad(format!("{name} has {} entries, expected {len}", v.len())))
    }
}

fn check_matrix(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<()> {
    if rows.len() != nrows {
        return Err(bad(format!("{name} has {} rows, expected {nrows}", rows.len())));
    }
    for (k, r) in rows.iter().enumerate() {
        check_len(&format!("{name} row {}", k + 1), r, ncols)?;
    }
    Ok(())
}

impl ModelFile {
    fn into_model(self) -> Result<AffineModel> {
        let shape = StateShape::new(self.shape.m, self.shape.n).map_err(|e| bad(e.to_string()))?;
        let (m, n, d) = (shape.m, shape.n, shape.d());
        let mut model = AffineModel::zero(shape);
        if let Some(a) = self.diffusion.a {
            check_matrix("diffusion.a", &a, d, d)?;
            model.a = a;
        }
        if let Some(alpha) = self.diffusion.alpha {
            check_len("diffusion.alpha", &alpha, m)?;
            model.linear.iter_mut().zip(alpha).for_each(|(p, x)| p.alpha = x);
        }
        if let Some(b) = self.drift.b {
            check_len("drift.b", &b, d)?;
            model.b = b;
        }
        if let Some(beta) = self.drift.beta {
            check_matrix("drift.beta", &beta, m, d)?;
            model.linear.iter_mut().zip(beta).for_each(|(p, row)| p.beta = row);
        }
        if let Some(bjj) = self.drift.beta_jj {
            check_matrix("drift.beta_jj", &bjj, n, n)?;
            model.beta_jj = bjj;
        }
        model.c = self.killing.c;
        if let Some(gamma) = self.killing.gamma {
            check_len("killing.gamma", &gamma, m)?;
            model.linear.iter_mut().zip(gamma).for_each(|(p, x)| p.gamma = x);
        }
        if let Some(mu0) = self.jumps.constant {
            if !mu0.is_zero() {
                check_len("jumps.constant.direction", mu0.direction(), d)?;
            }
            model.mu0 = mu0;
        }
        for (key, mu) in self.jumps.linear {
            let i: usize = key.parse().map_err(|_| bad(format!("jumps.linear.{key}: index must be an integer")))?;
            if i == 0 || i > m {
                return Err(bad(format!("jumps.linear.{key}: index must lie in 1..={m}")));
            }
            if !mu.is_zero() {
                check_len(&format!("jumps.linear.{key}.direction"), mu.direction(), d)?;
            }
            model.linear[i - 1].mu = mu;
        }
        Ok(model)
    }

    fn from_model(model: &AffineModel) -> Self {
        let lin = |f: &dyn Fn(&LinearPart) -> f64| model.linear.iter().map(f).collect::<Vec<_>>();
        let linear = model
            .linear
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.mu.is_zero())
            .map(|(i, p)| ((i + 1).to_string(), p.mu.clone()))
            .collect();
        ModelFile {
            shape: model.shape,
            diffusion: Diffusion { a: Some(model.a.clone()), alpha: Some(lin(&|p| p.alpha)) },
            drift: Drift {
                b: Some(model.b.clone()),
                beta: Some(model.linear.iter().map(|p| p.beta.clone()).collect()),
                beta_jj: Some(model.beta_jj.clone()),
            },
            killing: Killing { c: model.c, gamma: Some(lin(&|p| p.gamma)) },
            jumps: Jumps { constant: (!model.mu0.is_zero()).then(|| model.mu0.clone()), linear },
        }
    }
}

/// Parses a model without checking admissibility.
pub fn parse_model_unchecked(text: &str) -> Result<AffineModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
    file.into_model()
}

/// Parses a model and rejects it unless every admissibility condition holds.
pub fn parse_model(text: &str) -> Result<AffineModel> {
    let model = parse_model_unchecked(text)?;
    let report = model.validate();
    if report.is_ok() {
        Ok(model)
    } else {
        Err(bad(format!("inadmissible parameters: {report}")))
    }
}

pub fn load_model(path: &Path) -> Result<AffineModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

pub fn to_toml(model: &AffineModel) -> Result<String> {
    toml::to_string(&ModelFile::from_model(model)).map_err(|e| bad(e.to_string()))
}

pub fn save_model(model: &AffineModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_toml(model)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    #[test]
    fn builtins_round_trip() {
        for name in builtin::NAMES {
            let model = builtin::by_name(name).unwrap();
            let text = to_toml(&model).unwrap();
            assert_eq!(parse_model(&text).unwrap(), model, "{name}\n{text}");
        }
    }

    #[test]
    fn module_doc_example_parses() {
        let text = "[shape]\nm = 1\nn = 0\n[diffusion]\nalpha = [1.0]\n[drift]\nb = [0.5]\nbeta = [[-1.0]]\n\
                    [jumps.constant]\nfamily = \"compound-exponential\"\nintensity = 1.0\nrate = 2.0\ndirection = [1.0]\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.b, vec![0.5]);
        assert_eq!(m.linear[0].alpha, 1.0);
        assert!(!m.mu0.is_zero());
    }

    #[test]
    fn malformed_files_rejected() {
        let cases = [
            "[shape]\nm = 1\nn = 0\n[drift]\nb = [0.5, 1.0]\n",
            "[shape]\nm = 1\nn = 0\n[drift]\nbogus = 1\n",
            "[shape]\nm = 1\nn = 0\n[jumps.linear.2]\nfamily = \"zero\"\n",
            "[shape]\nm = 1\nn = 0\n[drift]\nb = [-1.0]\n",
            "[shape]\nm = 0\nn = 0\n",
            "not toml",
        ];
        for text in cases {
            assert!(matches!(parse_model(text), Err(Error::ModelFile(_))), "{text}");
        }
        // admissibility failures name the parameter
        let err = parse_model("[shape]\nm = 1\nn = 0\n[diffusion]\nalpha = [-1.0]\n").unwrap_err();
        assert!(err.to_string().contains("alpha_1"), "{err}");
    }
}
