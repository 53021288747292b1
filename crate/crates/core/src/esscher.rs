//! Exponential tilting of affine models and the martingale property of
//! `S̃_t = exp(-∫_0^t L(X_s) ds + ⟨θ, X_t⟩)`, `L(x) = l + ⟨λ, x⟩`.

use std::fmt::Write as _;

use crate::diagnostics::{check_conservative, ConservativeOptions, ConservativenessVerdict, Witness, WitnessTrajectory};
use crate::error::{check_dim, Error, Result};
use crate::levy::Truncation;
use crate::model::AffineModel;
use crate::riccati::RiccatiSolution;

/// Relative tolerance of the algebraic identities `F(θ) = l`, `R(θ) = λ`.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TiltSpec {
    pub theta: Vec<f64>,
    pub l: f64,
    pub lambda: Vec<f64>,
}

impl TiltSpec {
    pub fn new(theta: Vec<f64>, l: f64, lambda: Vec<f64>) -> Self {
        Self { theta, l, lambda }
    }

    /// The discount making `S̃` a local martingale: `l = F(θ)`, `λ = R(θ)`.
    pub fn auto_discount(model: &AffineModel, theta: Vec<f64>) -> Result<Self> {
        let l = model.eval_f(&theta)?;
        let lambda = model.eval_r(&theta)?;
        Ok(Self { theta, l, lambda })
    }

    /// `L(x) = l + ⟨λ, x⟩`.
    pub fn rate(&self, x: &[f64]) -> f64 {
        self.l + self.lambda.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// The tilted model with `F̃(u) = F(u + θ) - F(θ)` and `R̃(u) = R(u + θ) - R(θ)`.
pub fn tilt_model(model: &AffineModel, theta: &[f64]) -> Result<AffineModel> {
    check_dim(model.d(), theta.len())?;
    if !model.in_domain(theta) {
        return Err(Error::Domain(format!("θ = {theta:?} ∉ 𝒴")));
    }
    let (m, d) = (model.m(), model.d());
    if theta.iter().all(|t| *t == 0.0) {
        let mut same = model.clone();
        same.c = 0.0;
        same.linear.iter_mut().for_each(|p| p.gamma = 0.0);
        return Ok(same);
    }
    let mut out = model.clone();
    out.c = 0.0;
    for j in 0..d {
        let a_theta: f64 = (0..d).map(|k| model.a[j][k] * theta[k]).sum();
        out.b[j] += 2.0 * a_theta;
    }
    if !model.mu0.is_zero() {
        let shift = model.mu0.tilt_drift_shift(theta, m, Truncation::Constant);
        out.b.iter_mut().zip(shift).for_each(|(b, s)| *b += s);
        out.mu0 = model.mu0.tilt(theta);
    }
    for (i, (p, q)) in model.linear.iter().zip(out.linear.iter_mut()).enumerate() {
        q.gamma = 0.0;
        q.beta[i] += 2.0 * p.alpha * theta[i];
        if !p.mu.is_zero() {
            let shift = p.mu.tilt_drift_shift(theta, m, Truncation::Linear(i));
            q.beta.iter_mut().zip(shift).for_each(|(b, s)| *b += s);
            q.mu = p.mu.tilt(theta);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MartingaleKind {
    TrueMartingale,
    StrictLocalMartingale,
    NotApplicable,
    Inconclusive,
}

impl std::fmt::Display for MartingaleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailedCondition {
    BaseNotConservative,
    ThetaOutsideDomain,
    /// `F(θ) ≠ l`.
    FIdentity { f_theta: f64, l: f64 },
    /// `R(θ) ≠ λ`.
    RIdentity { r_theta: Vec<f64>, lambda: Vec<f64> },
}

impl std::fmt::Display for FailedCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BaseNotConservative => write!(f, "base model not conservative"),
            Self::ThetaOutsideDomain => write!(f, "θ∉𝒴"),
            Self::FIdentity { f_theta, l } => write!(f, "F(θ)≠l (F(θ)={f_theta:.16e}, l={l:.16e})"),
            Self::RIdentity { r_theta, lambda } => write!(f, "R(θ)≠λ (R(θ)={r_theta:?}, λ={lambda:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleVerdict {
    pub kind: MartingaleKind,
    pub failed_condition: Option<FailedCondition>,
    /// `ζ = g̃ + θ_I` for the non-trivial tilted solution `g̃`.
    pub witness: Option<WitnessTrajectory>,
    pub tilted_verdict: Option<ConservativenessVerdict>,
    pub reason: Option<String>,
}

impl MartingaleVerdict {
    fn not_applicable(cond: FailedCondition) -> Self {
        Self { kind: MartingaleKind::NotApplicable, failed_condition: Some(cond), witness: None, tilted_verdict: None, reason: None }
    }

    fn inconclusive(reason: String, tilted: Option<ConservativenessVerdict>) -> Self {
        Self { kind: MartingaleKind::Inconclusive, failed_condition: None, witness: None, tilted_verdict: tilted, reason: Some(reason) }
    }

    pub fn report(&self, spec: &TiltSpec) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind: {}", self.kind);
        let _ = writeln!(
            s,
            "failed_condition: {}",
            self.failed_condition.as_ref().map_or("none".to_string(), |c| c.to_string())
        );
        let _ = writeln!(s, "theta: {}", join(&spec.theta));
        let _ = writeln!(s, "l: {:.16e}", spec.l);
        let _ = writeln!(s, "lambda: {}", join(&spec.lambda));
        let _ = writeln!(
            s,
            "tilted_verdict: {}",
            self.tilted_verdict.as_ref().map_or("none".to_string(), |v| v.kind().to_string())
        );
        if let Some(w) = &self.witness {
            let _ = writeln!(s, "witness_points: {}", w.trajectory.grid.len());
            let _ = writeln!(s, "witness_residual: {:.16e}", w.residual);
        }
        if let Some(r) = &self.reason {
            let _ = writeln!(s, "reason: {r}");
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
}

/// Classifies `S̃` as a true or strict local martingale.
pub fn martingale_check(model: &AffineModel, spec: &TiltSpec, opts: &ConservativeOptions) -> Result<MartingaleVerdict> {
    let d = model.d();
    check_dim(d, spec.theta.len())?;
    check_dim(d, spec.lambda.len())?;
    match check_conservative(model, opts)? {
        ConservativenessVerdict::Conservative(_) => {}
        ConservativenessVerdict::NonConservative(_) => {
            return Ok(MartingaleVerdict::not_applicable(FailedCondition::BaseNotConservative))
        }
        ConservativenessVerdict::Inconclusive(r) => {
            return Ok(MartingaleVerdict::inconclusive(format!("base conservativeness undecided: {r}"), None))
        }
    }
    let theta = &spec.theta;
    if !model.in_domain(theta) {
        return Ok(MartingaleVerdict::not_applicable(FailedCondition::ThetaOutsideDomain));
    }
    let f_theta = model.eval_f(theta)?;
    if (f_theta - spec.l).abs() > IDENTITY_TOL * (1.0 + spec.l.abs()) {
        return Ok(MartingaleVerdict::not_applicable(FailedCondition::FIdentity { f_theta, l: spec.l }));
    }
    let r_theta = model.eval_r(theta)?;
    let lam_norm = spec.lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    let gap = r_theta.iter().zip(&spec.lambda).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if gap > IDENTITY_TOL * (1.0 + lam_norm) {
        return Ok(MartingaleVerdict::not_applicable(FailedCondition::RIdentity {
            r_theta,
            lambda: spec.lambda.clone(),
        }));
    }
    let tilted = tilt_model(model, theta)?;
    let verdict = match check_conservative(&tilted, opts) {
        Ok(v) => v,
        Err(e) => return Ok(MartingaleVerdict::inconclusive(format!("tilted check failed: {e}"), None)),
    };
    Ok(match &verdict {
        ConservativenessVerdict::Conservative(_) => MartingaleVerdict {
            kind: MartingaleKind::TrueMartingale,
            failed_condition: None,
            witness: None,
            tilted_verdict: Some(verdict),
            reason: None,
        },
        ConservativenessVerdict::NonConservative(Witness::Trajectory(w)) => {
            let m = model.m();
            let psi = w.trajectory.psi.iter().map(|g| (0..m).map(|i| g[i] + theta[i]).collect()).collect();
            let zeta = RiccatiSolution::from_nodes(w.trajectory.grid.clone(), psi, Vec::new(), w.trajectory.status);
            let witness = WitnessTrajectory { trajectory: zeta, ..w.clone() };
            MartingaleVerdict {
                kind: MartingaleKind::StrictLocalMartingale,
                failed_condition: None,
                witness: Some(witness),
                tilted_verdict: Some(verdict),
                reason: None,
            }
        }
        ConservativenessVerdict::NonConservative(Witness::Killing { f0 }) => MartingaleVerdict::inconclusive(
            format!("tilted model has F̃(0) = {f0:e}; identities hold only approximately"),
            Some(verdict.clone()),
        ),
        ConservativenessVerdict::Inconclusive(r) => MartingaleVerdict::inconclusive(r.clone(), Some(verdict.clone())),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedPath {
    /// `S̃_t`.
    pub s_tilde: Vec<f64>,
    /// `M_t = e^{-⟨θ, x0⟩} S̃_t`.
    pub normalized: Vec<f64>,
}

/// `S̃` along a gridded path, with `∫ L(X_s) ds` by the trapezoidal rule.
pub fn discounted_functional(spec: &TiltSpec, grid: &[f64], path: &[Vec<f64>], x0: &[f64]) -> Result<DiscountedPath> {
    let d = spec.theta.len();
    check_dim(d, x0.len())?;
    check_dim(grid.len(), path.len())?;
    if let Some(bad) = path.iter().find(|x| x.len() != d) {
        return Err(Error::Dimension { expected: d, got: bad.len() });
    }
    let dot = |x: &[f64]| spec.theta.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let theta_x0 = dot(x0);
    let mut integral = 0.0;
    let mut s_tilde = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        if k > 0 {
            integral += 0.5 * (grid[k] - grid[k - 1]) * (spec.rate(&path[k]) + spec.rate(&path[k - 1]));
        }
        s_tilde.push((-integral + dot(&path[k])).exp());
    }
    let normalized = s_tilde.iter().map(|s| s * (-theta_x0).exp()).collect();
    Ok(DiscountedPath { s_tilde, normalized })
}
