//! Affine model parametrization on `D = R_+^m × R^n` and exact evaluation of
//! the functional characteristics `F` and `R`.
//!
//! Indices are 0-based throughout the API: coordinates `0..m` form the
//! nonnegative block `I`, coordinates `m..m+n` the real block `J`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::levy::{LevyMeasure, Truncation};
use crate::riccati::VectorField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateShape {
    pub m: usize,
    pub n: usize,
}

impl StateShape {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m + n == 0 {
            return Err(Error::Config("state dimension m + n must be ≥ 1".into()));
        }
        Ok(Self { m, n })
    }

    pub fn d(&self) -> usize {
        self.m + self.n
    }

    pub fn is_nonnegative_index(&self, j: usize) -> bool {
        j < self.m
    }

    /// Membership in `D`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.d() && x[..self.m].iter().all(|v| *v >= 0.0)
    }
}

/// State-linear characteristics attached to coordinate `i ∈ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPart {
    /// Linear diffusion, acting on coordinate `i` only.
    pub alpha: f64,
    /// Row `i` of the linear drift.
    pub beta: Vec<f64>,
    /// Linear killing rate.
    pub gamma: f64,
    pub mu: LevyMeasure,
}

impl LinearPart {
    pub fn zero(d: usize) -> Self {
        Self { alpha: 0.0, beta: vec![0.0; d], gamma: 0.0, mu: LevyMeasure::zero() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineModel {
    pub shape: StateShape,
    /// Constant diffusion matrix (`d × d`, symmetric PSD).
    pub a: Vec<Vec<f64>>,
    /// Constant drift, in `D`.
    pub b: Vec<f64>,
    /// Constant killing rate.
    pub c: f64,
    pub mu0: LevyMeasure,
    /// One entry per `i ∈ I`.
    pub linear: Vec<LinearPart>,
    /// `n × n` drift block acting on `ψ_J`.
    pub beta_jj: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub parameter: String,
    pub constraint: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.parameter, self.constraint)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, parameter: impl Into<String>, constraint: impl Into<String>) {
        self.violations.push(Violation { parameter: parameter.into(), constraint: constraint.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Lipschitz bound of the reduced field on a ball around the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzCertificate {
    pub lipschitz: f64,
    pub radius: f64,
}

impl AffineModel {
    /// The model with every characteristic equal to zero.
    pub fn zero(shape: StateShape) -> Self {
        let d = shape.d();
        Self {
            shape,
            a: vec![vec![0.0; d]; d],
            b: vec![0.0; d],
            c: 0.0,
            mu0: LevyMeasure::zero(),
            linear: (0..shape.m).map(|_| LinearPart::zero(d)).collect(),
            beta_jj: vec![vec![0.0; shape.n]; shape.n],
        }
    }

    pub fn d(&self) -> usize {
        self.shape.d()
    }

    pub fn m(&self) -> usize {
        self.shape.m
    }

    pub fn n(&self) -> usize {
        self.shape.n
    }

    /// Every jump measure: `μ_0` first, then `μ_i` for `i ∈ I`.
    pub fn measures(&self) -> impl Iterator<Item = &LevyMeasure> {
        std::iter::once(&self.mu0).chain(self.linear.iter().map(|p| &p.mu))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let (m, n, d) = (self.m(), self.n(), self.d());
        if self.a.len() != d || self.a.iter().any(|row| row.len() != d) {
            r.push("a", format!("must be {d}×{d}"));
        } else {
            let mut sym = true;
            for i in 0..d {
                for j in 0..i {
                    if (self.a[i][j] - self.a[j][i]).abs() > 1e-12 {
                        sym = false;
                    }
                }
            }
            if (0..d).any(|k| (0..m).any(|i| self.a[i][k] != 0.0 || self.a[k][i] != 0.0)) {
                r.push("a", "must vanish on rows and columns in I");
            }
            if !sym {
                r.push("a", "must be symmetric");
            } else {
                let mat = DMatrix::from_fn(d, d, |i, j| self.a[i][j]);
                let scale = mat.amax().max(1.0);
                let eig = SymmetricEigen::new(mat);
                if eig.eigenvalues.iter().any(|ev| *ev < -1e-12 * scale) {
                    r.push("a", "must be positive semidefinite");
                }
            }
        }
        if self.b.len() != d {
            r.push("b", format!("must have {d} components"));
        } else {
            for i in 0..m {
                if !(self.b[i] >= 0.0) {
                    r.push(format!("b_{}", i + 1), "must be ≥ 0 (b ∈ D)");
                }
            }
        }
        if !(self.c >= 0.0) {
            r.push("c", "must be ≥ 0");
        }
        for v in self.mu0.validate(m, d) {
            r.push("mu0", v);
        }
        if self.linear.len() != m {
            r.push("linear", format!("must have one entry per i ∈ I ({m})"));
        }
        for (i, p) in self.linear.iter().enumerate() {
            let k = i + 1;
            if !(p.alpha >= 0.0) {
                r.push(format!("alpha_{k}"), "must be ≥ 0");
            }
            if !(p.gamma >= 0.0) {
                r.push(format!("gamma_{k}"), "must be ≥ 0");
            }
            if p.beta.len() != d {
                r.push(format!("beta_{k}"), format!("must have {d} components"));
            } else {
                for j in 0..m {
                    if j != i && !(p.beta[j] >= 0.0) {
                        r.push(format!("beta_{k},{}", j + 1), "must be ≥ 0 (β_{i,j} ≥ 0 for j ≠ i in I)");
                    }
                }
            }
            for v in p.mu.validate(m, d) {
                r.push(format!("mu_{k}"), v);
            }
        }
        if self.beta_jj.len() != n || self.beta_jj.iter().any(|row| row.len() != n) {
            r.push("beta_jj", format!("must be {n}×{n}"));
        }
        r
    }

    /// Membership in the effective domain `𝒴`, decided by the exponential
    /// moments on `‖ξ‖ ≥ 1`.
    pub fn in_domain(&self, y: &[f64]) -> bool {
        y.len() == self.d() && self.measures().all(|mu| mu.exp_moment(y).is_finite())
    }

    /// Same predicate as [`AffineModel::in_domain`] via the closed-form domain
    /// edges; used on hot paths.
    pub(crate) fn admits(&self, y: &[f64]) -> bool {
        self.measures().all(|mu| mu.is_zero() || mu.law().admits(mu.project(y)))
    }

    fn domain_error(y: &[f64]) -> Error {
        Error::Domain(format!("{y:?} ∉ 𝒴"))
    }

    /// `F(u) = ⟨a u, u⟩ + ⟨b, u⟩ - c + ∫(e^{⟨u,ξ⟩} - 1 - ⟨χ(ξ), u⟩) μ_0(dξ)`.
    pub fn eval_f(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.d(), u.len())?;
        if !self.admits(u) {
            return Err(Self::domain_error(u));
        }
        Ok(self.eval_f_unchecked(u))
    }

    pub(crate) fn eval_f_unchecked(&self, u: &[f64]) -> f64 {
        let d = self.d();
        let mut quad = 0.0;
        for i in 0..d {
            let row = &self.a[i];
            let au: f64 = (0..d).map(|j| row[j] * u[j]).sum();
            quad += au * u[i];
        }
        let lin: f64 = self.b.iter().zip(u).map(|(b, u)| b * u).sum();
        quad + lin - self.c + self.mu0.lk_integral(u, self.m(), Truncation::Constant)
    }

    /// `R(u)`: components in `I` from the Lévy–Khintchine form, components in
    /// `J` from `β_JJᵀ u_J`.
    pub fn eval_r(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d(), u.len())?;
        if !self.admits(u) {
            return Err(Self::domain_error(u));
        }
        let mut out = vec![0.0; self.d()];
        self.eval_r_into(u, &mut out);
        Ok(out)
    }

    pub(crate) fn eval_r_into(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m();
        for (i, p) in self.linear.iter().enumerate() {
            let lin: f64 = p.beta.iter().zip(u).map(|(b, u)| b * u).sum();
            out[i] = p.alpha * u[i] * u[i] + lin - p.gamma + p.mu.lk_integral(u, m, Truncation::Linear(i));
        }
        self.eval_rj_into(&u[m..], &mut out[m..]);
    }

    fn eval_rj_into(&self, uj: &[f64], out: &mut [f64]) {
        let n = self.n();
        for j in 0..n {
            out[j] = (0..n).map(|k| self.beta_jj[k][j] * uj[k]).sum();
        }
    }

    /// Real parts of `u` must lie in `𝒴`; purely imaginary `u` is always admitted.
    pub fn eval_f_complex(&self, u: &[Complex64]) -> Result<Complex64> {
        check_dim(self.d(), u.len())?;
        let re: Vec<f64> = u.iter().map(|z| z.re).collect();
        if !self.admits(&re) {
            return Err(Self::domain_error(&re));
        }
        Ok(self.eval_f_complex_unchecked(u))
    }

    pub(crate) fn eval_f_complex_unchecked(&self, u: &[Complex64]) -> Complex64 {
        let d = self.d();
        let mut acc = Complex64::new(-self.c, 0.0);
        for i in 0..d {
            let au: Complex64 = (0..d).map(|j| self.a[i][j] * u[j]).sum();
            acc += au * u[i] + self.b[i] * u[i];
        }
        acc + self.mu0.lk_integral_complex(u, self.m(), Truncation::Constant)
    }

    pub fn eval_r_complex(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        check_dim(self.d(), u.len())?;
        let re: Vec<f64> = u.iter().map(|z| z.re).collect();
        if !self.admits(&re) {
            return Err(Self::domain_error(&re));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.d()];
        self.eval_r_complex_into(u, &mut out);
        Ok(out)
    }

    pub(crate) fn eval_r_complex_into(&self, u: &[Complex64], out: &mut [Complex64]) {
        let (m, n) = (self.m(), self.n());
        for (i, p) in self.linear.iter().enumerate() {
            let lin: Complex64 = p.beta.iter().zip(u).map(|(b, u)| *b * u).sum();
            out[i] = p.alpha * u[i] * u[i] + lin - p.gamma
                + p.mu.lk_integral_complex(u, m, Truncation::Linear(i));
        }
        for j in 0..n {
            out[m + j] = (0..n).map(|k| self.beta_jj[k][j] * u[m + k]).sum();
        }
    }

    /// `R̃(v) = R_I(v, 0)`.
    pub fn reduced_r(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.m(), v.len())?;
        let mut u = v.to_vec();
        u.resize(self.d(), 0.0);
        let mut r = self.eval_r(&u)?;
        r.truncate(self.m());
        Ok(r)
    }

    /// Jacobian of `R_I` in the `I` coordinates at `(v, 0)`.
    pub fn reduced_jacobian(&self, v: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.m(), v.len())?;
        let m = self.m();
        let mut u = v.to_vec();
        u.resize(self.d(), 0.0);
        if !self.admits(&u) {
            return Err(Self::domain_error(&u));
        }
        Ok(self
            .linear
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let g = p.mu.lk_gradient(&u, m, Truncation::Linear(i));
                (0..m)
                    .map(|j| {
                        let diag = if i == j { 2.0 * p.alpha * v[i] } else { 0.0 };
                        diag + p.beta[j] + g[j]
                    })
                    .collect()
            })
            .collect())
    }

    /// Radius of a ball around `0 ∈ R^m` on which every jump measure has a
    /// finite first moment under `e^{⟨v, ξ⟩}`; `None` when `0` sits on the
    /// boundary of the reduced field's domain.
    pub fn reduced_interior_radius(&self) -> Option<f64> {
        let m = self.m();
        let mut radius: f64 = 1.0;
        for mu in self.linear.iter().map(|p| &p.mu) {
            if mu.is_zero() {
                continue;
            }
            let e_i: f64 = mu.direction()[..m].iter().map(|e| e * e).sum::<f64>().sqrt();
            if e_i == 0.0 {
                continue;
            }
            let (edge, _) = mu.law().domain_edge();
            if edge.is_infinite() {
                continue;
            }
            if edge <= 0.0 {
                return None;
            }
            radius = radius.min(0.5 * edge / e_i);
        }
        Some(radius)
    }

    /// Closed-form bound on the Frobenius norm of the reduced Jacobian over
    /// the ball of [`AffineModel::reduced_interior_radius`].
    pub fn reduced_lipschitz(&self) -> Option<LipschitzCertificate> {
        let radius = self.reduced_interior_radius()?;
        let m = self.m();
        let mut frob = 0.0;
        for (i, p) in self.linear.iter().enumerate() {
            let (dl, comp) = if p.mu.is_zero() {
                (0.0, vec![0.0; self.d()])
            } else {
                let e_i: f64 = p.mu.direction()[..m].iter().map(|e| e * e).sum::<f64>().sqrt();
                (
                    p.mu.law().laplace_derivative(radius * e_i),
                    p.mu.truncation_mean(m, Truncation::Linear(i)),
                )
            };
            if !dl.is_finite() {
                return None;
            }
            for j in 0..m {
                let e_j = if p.mu.is_zero() { 0.0 } else { p.mu.direction()[j] };
                let diag = if i == j { 2.0 * p.alpha * radius } else { 0.0 };
                let bound = diag + p.beta[j].abs() + e_j.abs() * dl + comp[j].abs();
                frob += bound * bound;
            }
        }
        Some(LipschitzCertificate { lipschitz: frob.sqrt(), radius })
    }
}

/// `χ_i(ξ)`: `sign(ξ_j)(|ξ_j| ∧ 1)` on `J ∪ {i}`, zero on `I \ {i}`.
pub fn truncation_chi(shape: StateShape, i: usize, xi: &[f64]) -> Result<Vec<f64>> {
    if i >= shape.m {
        return Err(Error::Index { index: i, m: shape.m });
    }
    check_dim(shape.d(), xi.len())?;
    let trunc = Truncation::Linear(i);
    Ok(xi
        .iter()
        .enumerate()
        .map(|(j, x)| if trunc.compensates(shape.m, j) { x.signum() * x.abs().min(1.0) } else { 0.0 })
        .map(|v| if v == 0.0 { 0.0 } else { v })
        .collect())
}

/// The reduced vector field `v ↦ R_I(v, 0)` of a model.
#[derive(Debug, Clone, Copy)]
pub struct ReducedModelField<'a> {
    pub model: &'a AffineModel,
}

impl VectorField for ReducedModelField<'_> {
    fn dim(&self) -> usize {
        self.model.m()
    }

    fn eval(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let mut u = v.to_vec();
        u.resize(self.model.d(), 0.0);
        if !self.model.admits(&u) {
            return Err(AffineModel::domain_error(&u));
        }
        let mut r = vec![0.0; self.model.d()];
        self.model.eval_r_into(&u, &mut r);
        out.copy_from_slice(&r[..self.model.m()]);
        Ok(())
    }
}
