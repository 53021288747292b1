//! Jump measures on `D \ {0}`.
//!
//! Every built-in measure is a one-dimensional law `ν(ds)` on `s > 0` pushed
//! along a fixed direction `e ∈ D`, i.e. jumps are `ξ = s·e`. All integrals
//! against `μ` therefore reduce to integrals in `s` with `⟨u, ξ⟩ = s⟨u, e⟩`,
//! and every family has closed forms for the Laplace exponent, the
//! exponential moments on `‖ξ‖ ≥ 1` and the truncated first moments that
//! appear in the truncation compensation.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::special::{exp_integral_e1, gamma_fn, gamma_neg, lower_gamma, upper_gamma};

/// One-dimensional jump-size law on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum JumpLaw {
    Zero,
    /// `intensity · rate · e^{-rate·s} ds`.
    CompoundExponential { intensity: f64, rate: f64 },
    /// `intensity · δ_size`.
    PointMass { intensity: f64, size: f64 },
    /// `scale · e^{-rate·s} s^{-1} ds`.
    Gamma { scale: f64, rate: f64 },
    /// `scale · e^{-rate·s} s^{-1-index} ds` with `index ∈ (0, 1)`, `rate ≥ 0`.
    TemperedStable { scale: f64, index: f64, rate: f64 },
}

/// `∫_0^x s e^{-q s} ds` without cancellation for small `q x`.
fn first_moment_exp(q: f64, x: f64) -> f64 {
    let y = q * x;
    if y.abs() < 0.5 {
        // (1 - e^{-y}(1+y)) / q^2 = x^2 Σ_{n≥2} (-1)^n (n-1) y^{n-2} / n!
        let mut term = 0.5; // n = 2: (n-1)/n!
        let mut sum = term;
        let mut fact = 2.0;
        let mut pow = 1.0;
        for n in 3..40 {
            fact *= n as f64;
            pow *= -y;
            term = (n as f64 - 1.0) * pow / fact;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        x * x * sum
    } else {
        (1.0 - (-y).exp() * (1.0 + y)) / (q * q)
    }
}

impl JumpLaw {
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        match *self {
            JumpLaw::Zero => {}
            JumpLaw::CompoundExponential { intensity, rate } => {
                if !(intensity >= 0.0) {
                    v.push("intensity must be ≥ 0".into());
                }
                if !(rate > 0.0) {
                    v.push("rate must be > 0".into());
                }
            }
            JumpLaw::PointMass { intensity, size } => {
                if !(intensity >= 0.0) {
                    v.push("intensity must be ≥ 0".into());
                }
                if !(size > 0.0) {
                    v.push("size must be > 0".into());
                }
            }
            JumpLaw::Gamma { scale, rate } => {
                if !(scale >= 0.0) {
                    v.push("scale must be ≥ 0".into());
                }
                if !(rate > 0.0) {
                    v.push("rate must be > 0".into());
                }
            }
            JumpLaw::TemperedStable { scale, index, rate } => {
                if !(scale >= 0.0) {
                    v.push("scale must be ≥ 0".into());
                }
                if !(index > 0.0 && index < 1.0) {
                    v.push("index must lie in (0, 1)".into());
                }
                if !(rate >= 0.0) {
                    v.push("rate must be ≥ 0".into());
                }
            }
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            JumpLaw::Zero => true,
            JumpLaw::CompoundExponential { intensity, .. } | JumpLaw::PointMass { intensity, .. } => {
                intensity == 0.0
            }
            JumpLaw::Gamma { scale, .. } | JumpLaw::TemperedStable { scale, .. } => scale == 0.0,
        }
    }

    pub fn finite_activity(&self) -> bool {
        matches!(
            self,
            JumpLaw::Zero | JumpLaw::CompoundExponential { .. } | JumpLaw::PointMass { .. }
        )
    }

    /// Right end of the exponential-moment domain in `k = ⟨y, e⟩` and whether
    /// it is attained.
    pub fn domain_edge(&self) -> (f64, bool) {
        if self.is_zero() {
            return (f64::INFINITY, true);
        }
        match *self {
            JumpLaw::Zero | JumpLaw::PointMass { .. } => (f64::INFINITY, true),
            JumpLaw::CompoundExponential { rate, .. } | JumpLaw::Gamma { rate, .. } => (rate, false),
            JumpLaw::TemperedStable { rate, .. } => (rate, true),
        }
    }

    pub fn admits(&self, k: f64) -> bool {
        let (edge, closed) = self.domain_edge();
        k < edge || (closed && k == edge)
    }

    /// `∫ (e^{k s} - 1) ν(ds)`; `+∞` outside the domain.
    pub fn laplace(&self, k: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if !self.admits(k) {
            return f64::INFINITY;
        }
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::CompoundExponential { intensity, rate } => intensity * k / (rate - k),
            JumpLaw::PointMass { intensity, size } => intensity * (k * size).exp_m1(),
            JumpLaw::Gamma { scale, rate } => -scale * (-k / rate).ln_1p(),
            JumpLaw::TemperedStable { scale, index, rate } => {
                let g = scale * gamma_neg(index);
                if rate > 0.0 {
                    g * rate.powf(index) * (index * (-k / rate).ln_1p()).exp_m1()
                } else {
                    g * (-k).powf(index)
                }
            }
        }
    }

    /// Complex Laplace exponent, principal branches; requires `Re k` in the domain.
    pub fn laplace_complex(&self, k: Complex64) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        match *self {
            JumpLaw::Zero => Complex64::new(0.0, 0.0),
            JumpLaw::CompoundExponential { intensity, rate } => intensity * k / (rate - k),
            JumpLaw::PointMass { intensity, size } => intensity * ((k * size).exp() - 1.0),
            JumpLaw::Gamma { scale, rate } => -scale * (1.0 - k / rate).ln(),
            JumpLaw::TemperedStable { scale, index, rate } => {
                let g = scale * gamma_neg(index);
                let base = Complex64::new(rate, 0.0) - k;
                if base.norm() == 0.0 {
                    Complex64::new(-g * rate.powf(index), 0.0)
                } else {
                    g * (base.powf(index) - rate.powf(index))
                }
            }
        }
    }

    /// `∫ s e^{k s} ν(ds)`, the derivative of [`JumpLaw::laplace`].
    pub fn laplace_derivative(&self, k: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::CompoundExponential { intensity, rate } => {
                let q = rate - k;
                if q > 0.0 {
                    intensity * rate / (q * q)
                } else {
                    f64::INFINITY
                }
            }
            JumpLaw::PointMass { intensity, size } => intensity * size * (k * size).exp(),
            JumpLaw::Gamma { scale, rate } => {
                let q = rate - k;
                if q > 0.0 {
                    scale / q
                } else {
                    f64::INFINITY
                }
            }
            JumpLaw::TemperedStable { scale, index, rate } => {
                let q = rate - k;
                if q > 0.0 {
                    scale * gamma_fn(1.0 - index) * q.powf(index - 1.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `∫_{s ≥ s0} e^{k s} ν(ds)` for `s0 > 0`.
    pub fn tail_moment(&self, s0: f64, k: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if !self.admits(k) {
            return f64::INFINITY;
        }
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::CompoundExponential { intensity, rate } => {
                let q = rate - k;
                intensity * rate * (-q * s0).exp() / q
            }
            JumpLaw::PointMass { intensity, size } => {
                if size >= s0 {
                    intensity * (k * size).exp()
                } else {
                    0.0
                }
            }
            JumpLaw::Gamma { scale, rate } => scale * exp_integral_e1((rate - k) * s0),
            JumpLaw::TemperedStable { scale, index, rate } => {
                let q = rate - k;
                if q > 0.0 {
                    scale * q.powf(index) * upper_gamma(-index, q * s0)
                } else {
                    scale * s0.powf(-index) / index
                }
            }
        }
    }

    /// `∫ min(a s, 1) e^{k s} ν(ds)` for `a > 0`.
    pub fn trunc_moment(&self, a: f64, k: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if !self.admits(k) {
            return f64::INFINITY;
        }
        let s_star = 1.0 / a;
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::CompoundExponential { intensity, rate } => {
                let q = rate - k;
                intensity * rate * (a * first_moment_exp(q, s_star) + (-q * s_star).exp() / q)
            }
            JumpLaw::PointMass { intensity, size } => intensity * (k * size).exp() * (a * size).min(1.0),
            JumpLaw::Gamma { scale, rate } => {
                let q = rate - k;
                scale * (a * (-(-q * s_star).exp_m1()) / q + exp_integral_e1(q * s_star))
            }
            JumpLaw::TemperedStable { scale, index, rate } => {
                let q = rate - k;
                if q > 0.0 {
                    scale
                        * (a * q.powf(index - 1.0) * lower_gamma(1.0 - index, q * s_star)
                            + q.powf(index) * upper_gamma(-index, q * s_star))
                } else {
                    scale
                        * (a * s_star.powf(1.0 - index) / (1.0 - index) + s_star.powf(-index) / index)
                }
            }
        }
    }

    /// `∫_{s < s0} s ν(ds)`: mean of the jumps replaced by drift in simulation.
    pub fn small_jump_mean(&self, s0: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::CompoundExponential { intensity, rate } => {
                intensity * rate * first_moment_exp(rate, s0)
            }
            JumpLaw::PointMass { intensity, size } => {
                if size < s0 {
                    intensity * size
                } else {
                    0.0
                }
            }
            JumpLaw::Gamma { scale, rate } => scale * (-(-rate * s0).exp_m1()) / rate,
            JumpLaw::TemperedStable { scale, index, rate } => {
                if rate > 0.0 {
                    scale * rate.powf(index - 1.0) * lower_gamma(1.0 - index, rate * s0)
                } else {
                    scale * s0.powf(1.0 - index) / (1.0 - index)
                }
            }
        }
    }

    /// `ν([lo, hi))`, `hi` may be `+∞`, `lo > 0` unless the law has finite activity.
    pub fn band_mass(&self, lo: f64, hi: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if let JumpLaw::PointMass { intensity, size } = *self {
            return if size >= lo && size < hi { intensity } else { 0.0 };
        }
        if let JumpLaw::CompoundExponential { intensity, rate } = *self {
            let upper = if hi.is_finite() { (-rate * hi).exp() } else { 0.0 };
            return intensity * ((-rate * lo).exp() - upper);
        }
        let upper = if hi.is_finite() { self.tail_moment(hi, 0.0) } else { 0.0 };
        self.tail_moment(lo, 0.0) - upper
    }

    /// Draws a jump size from `ν` restricted to `[lo, hi)`.
    pub fn sample_band<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::PointMass { size, .. } => size,
            JumpLaw::CompoundExponential { rate, .. } => {
                // inverse cdf of the truncated exponential
                let u: f64 = rng.random();
                let a = (-rate * lo).exp();
                let b = if hi.is_finite() { (-rate * hi).exp() } else { 0.0 };
                -(a - u * (a - b)).ln() / rate
            }
            JumpLaw::Gamma { rate, .. } => loop {
                let (s, accept) = if hi.is_finite() {
                    let u: f64 = rng.random();
                    let s = lo * (hi / lo).powf(u);
                    (s, (-rate * (s - lo)).exp())
                } else {
                    let u: f64 = rng.random();
                    let s = lo - (1.0 - u).ln() / rate;
                    (s, lo / s)
                };
                let v: f64 = rng.random();
                if v < accept {
                    break s;
                }
            },
            JumpLaw::TemperedStable { index, rate, .. } => loop {
                let u: f64 = rng.random();
                let a = lo.powf(-index);
                let b = if hi.is_finite() { hi.powf(-index) } else { 0.0 };
                let s = (a - u * (a - b)).powf(-1.0 / index);
                if rate == 0.0 {
                    break s;
                }
                let v: f64 = rng.random();
                if v < (-rate * (s - lo)).exp() {
                    break s;
                }
            },
        }
    }

    /// The exponentially tilted law `e^{k s} ν(ds)`; requires `admits(k)`.
    pub fn tilt(&self, k: f64) -> JumpLaw {
        if k == 0.0 {
            return self.clone();
        }
        match *self {
            JumpLaw::Zero => JumpLaw::Zero,
            JumpLaw::CompoundExponential { intensity, rate } => {
                let q = rate - k;
                JumpLaw::CompoundExponential { intensity: intensity * rate / q, rate: q }
            }
            JumpLaw::PointMass { intensity, size } => {
                JumpLaw::PointMass { intensity: intensity * (k * size).exp(), size }
            }
            JumpLaw::Gamma { scale, rate } => JumpLaw::Gamma { scale, rate: rate - k },
            JumpLaw::TemperedStable { scale, index, rate } => {
                JumpLaw::TemperedStable { scale, index, rate: (rate - k).max(0.0) }
            }
        }
    }

    /// Lebesgue density written as `smooth(s) · s^power`; `None` for atoms.
    pub fn density_parts(&self, s: f64) -> Option<(f64, f64)> {
        match *self {
            JumpLaw::Zero => Some((0.0, 0.0)),
            JumpLaw::PointMass { .. } => None,
            JumpLaw::CompoundExponential { intensity, rate } => {
                Some((intensity * rate * (-rate * s).exp(), 0.0))
            }
            JumpLaw::Gamma { scale, rate } => Some((scale * (-rate * s).exp(), -1.0)),
            JumpLaw::TemperedStable { scale, index, rate } => {
                Some((scale * (-rate * s).exp(), -1.0 - index))
            }
        }
    }
}

/// Which coordinates the truncation function compensates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// `χ` of the constant part: compensated on `J` only.
    Constant,
    /// `χ_i`: compensated on `J ∪ {i}`, zero on `I \ {i}` (0-based `i`).
    Linear(usize),
}

impl Truncation {
    pub fn compensates(&self, m: usize, j: usize) -> bool {
        j >= m || matches!(*self, Truncation::Linear(i) if i == j)
    }
}

/// A jump measure `μ = ν ∘ (s ↦ s·e)^{-1}` on `D \ {0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "MeasureRepr", into = "MeasureRepr")]
pub struct LevyMeasure {
    law: JumpLaw,
    direction: Vec<f64>,
    /// `∫ min(|e_j| s, 1) ν(ds)` per coordinate.
    trunc: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    #[serde(flatten)]
    law: JumpLaw,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    direction: Vec<f64>,
}

impl From<MeasureRepr> for LevyMeasure {
    fn from(r: MeasureRepr) -> Self {
        LevyMeasure::new(r.law, r.direction)
    }
}

impl From<LevyMeasure> for MeasureRepr {
    fn from(m: LevyMeasure) -> Self {
        MeasureRepr { law: m.law, direction: m.direction }
    }
}

impl PartialEq for LevyMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.law == other.law && self.direction == other.direction
    }
}

impl LevyMeasure {
    pub fn new(law: JumpLaw, direction: Vec<f64>) -> Self {
        let trunc = direction
            .iter()
            .map(|e| if *e == 0.0 || law.is_zero() { 0.0 } else { law.trunc_moment(e.abs(), 0.0) })
            .collect();
        Self { law, direction, trunc }
    }

    pub fn zero() -> Self {
        Self { law: JumpLaw::Zero, direction: Vec::new(), trunc: Vec::new() }
    }

    pub fn law(&self) -> &JumpLaw {
        &self.law
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn is_zero(&self) -> bool {
        self.law.is_zero()
    }

    pub fn direction_norm(&self) -> f64 {
        self.direction.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// `⟨y, e⟩`.
    pub fn project(&self, y: &[f64]) -> f64 {
        self.direction.iter().zip(y).map(|(e, y)| e * y).sum()
    }

    fn project_complex(&self, u: &[Complex64]) -> Complex64 {
        self.direction.iter().zip(u).map(|(e, u)| *e * u).sum()
    }

    /// Parameter violations for a measure living on `R_+^m × R^n`.
    pub fn validate(&self, m: usize, d: usize) -> Vec<String> {
        let mut v = self.law.validate();
        if self.is_zero() {
            return v;
        }
        if self.direction.len() != d {
            v.push(format!("direction must have {d} components"));
            return v;
        }
        if self.direction.iter().any(|e| !e.is_finite()) || self.direction_norm() == 0.0 {
            v.push("direction must be finite and nonzero".into());
        }
        if self.direction[..m].iter().any(|e| *e < 0.0) {
            v.push("direction must lie in D (nonnegative on I)".into());
        }
        v
    }

    /// `∫_{‖ξ‖ ≥ 1} e^{⟨y, ξ⟩} μ(dξ)`, `+∞` when divergent.
    pub fn exp_moment(&self, y: &[f64]) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.law.tail_moment(1.0 / self.direction_norm(), self.project(y))
    }

    /// `∫ (e^{⟨u, ξ⟩} - 1 - ⟨χ(ξ), u⟩) μ(dξ)` for the given truncation.
    pub fn lk_integral(&self, u: &[f64], m: usize, trunc: Truncation) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut v = self.law.laplace(self.project(u));
        for (j, (e, t)) in self.direction.iter().zip(&self.trunc).enumerate() {
            if trunc.compensates(m, j) {
                v -= u[j] * e.signum() * t;
            }
        }
        v
    }

    pub fn lk_integral_complex(&self, u: &[Complex64], m: usize, trunc: Truncation) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        let mut v = self.law.laplace_complex(self.project_complex(u));
        for (j, (e, t)) in self.direction.iter().zip(&self.trunc).enumerate() {
            if trunc.compensates(m, j) {
                v -= u[j] * (e.signum() * t);
            }
        }
        v
    }

    /// Gradient of [`LevyMeasure::lk_integral`] in `u`.
    pub fn lk_gradient(&self, u: &[f64], m: usize, trunc: Truncation) -> Vec<f64> {
        if self.is_zero() {
            return vec![0.0; u.len()];
        }
        let dl = self.law.laplace_derivative(self.project(u));
        self.direction
            .iter()
            .zip(&self.trunc)
            .enumerate()
            .map(|(j, (e, t))| {
                let comp = if trunc.compensates(m, j) { e.signum() * t } else { 0.0 };
                e * dl - comp
            })
            .collect()
    }

    /// `∫ χ(ξ) μ(dξ)` for the truncation pattern.
    pub fn truncation_mean(&self, m: usize, trunc: Truncation) -> Vec<f64> {
        if self.is_zero() {
            return Vec::new();
        }
        self.direction
            .iter()
            .zip(&self.trunc)
            .enumerate()
            .map(|(j, (e, t))| if trunc.compensates(m, j) { e.signum() * t } else { 0.0 })
            .collect()
    }

    /// `∫ χ(ξ)(e^{⟨θ, ξ⟩} - 1) μ(dξ)`: the drift shift produced by tilting.
    pub fn tilt_drift_shift(&self, theta: &[f64], m: usize, trunc: Truncation) -> Vec<f64> {
        if self.is_zero() {
            return vec![0.0; theta.len()];
        }
        let k = self.project(theta);
        self.direction
            .iter()
            .zip(&self.trunc)
            .enumerate()
            .map(|(j, (e, t))| {
                if trunc.compensates(m, j) && *e != 0.0 {
                    e.signum() * (self.law.trunc_moment(e.abs(), k) - t)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `e^{⟨θ, ξ⟩} μ(dξ)`.
    pub fn tilt(&self, theta: &[f64]) -> LevyMeasure {
        if self.is_zero() {
            return self.clone();
        }
        LevyMeasure::new(self.law.tilt(self.project(theta)), self.direction.clone())
    }
}
