//! Named reference models.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::levy::{JumpLaw, LevyMeasure, Truncation};
use crate::model::{AffineModel, StateShape};

pub const NAMES: [&str; 3] = ["feller", "kr2014", "cir-jump"];

/// Feller diffusion: `dX = (0.5 - X) dt + √(2X) dW`, so `R(v) = v² - v`, `F(v) = v/2`.
pub fn feller() -> AffineModel {
    let mut m = AffineModel::zero(StateShape { m: 1, n: 0 });
    m.b = vec![0.5];
    m.linear[0].alpha = 1.0;
    m.linear[0].beta = vec![-1.0];
    m
}

/// Pure-jump process on `R_+` with `R(u) = 1 - u - √(1 - u)` and `F ≡ 0`.
///
/// The jump measure is the 1/2-stable law tempered at rate 1,
/// `e^{-s} s^{-3/2} ds / (2√π)`, whose Laplace exponent is `1 - √(1 - k)`.
/// The linear drift is `-1` plus the truncation mean of the jumps, so the
/// compensator cancels and `E[X_t] = x e^{-t/2}`.
pub fn kr2014() -> AffineModel {
    let mut m = AffineModel::zero(StateShape { m: 1, n: 0 });
    let mu = LevyMeasure::new(
        JumpLaw::TemperedStable { scale: 0.5 / PI.sqrt(), index: 0.5, rate: 1.0 },
        vec![1.0],
    );
    let kappa = mu.truncation_mean(1, Truncation::Linear(0))[0];
    m.linear[0].beta = vec![-1.0 + kappa];
    m.linear[0].mu = mu;
    m
}

/// Feller diffusion with exponential jumps, both state-independent
/// (intensity 1, mean size 1/2) and state-proportional (intensity `X/2`,
/// mean size 1/3).
pub fn cir_jump() -> AffineModel {
    let mut m = feller();
    m.mu0 = LevyMeasure::new(JumpLaw::CompoundExponential { intensity: 1.0, rate: 2.0 }, vec![1.0]);
    m.linear[0].mu = LevyMeasure::new(JumpLaw::CompoundExponential { intensity: 0.5, rate: 3.0 }, vec![1.0]);
    m
}

pub fn by_name(name: &str) -> Result<AffineModel> {
    match name {
        "feller" => Ok(feller()),
        "kr2014" => Ok(kr2014()),
        "cir-jump" => Ok(cir_jump()),
        _ => Err(Error::Config(format!("unknown built-in model '{name}' (expected one of {})", NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in NAMES {
            let m = by_name(name).unwrap();
            assert!(m.validate().is_ok(), "{name}: {:?}", m.validate());
        }
        assert!(by_name("heston").is_err());
    }

    #[test]
    fn kr2014_first_moment_slope() {
        // R'(0) = -1/2 drives E[X_t] = x e^{-t/2}
        let m = kr2014();
        let h = 1e-6;
        let d = (m.eval_r(&[h]).unwrap()[0] - m.eval_r(&[-h]).unwrap()[0]) / (2.0 * h);
        assert!((d + 0.5).abs() < 1e-8);
    }
}
