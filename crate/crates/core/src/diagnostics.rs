//! Conservativeness via uniqueness of the trivial solution of the reduced
//! equation `∂g = R_I(g, 0)`, `g(0) = 0`, plus the comparison and order
//! utilities that go with it.
//!
//! Verdicts are three-valued. `Conservative` carries a Lipschitz bound or a
//! scalar Osgood divergence statement, `NonConservative` carries either the
//! killing rate or a non-trivial trajectory with its ODE residual, and
//! everything the numerics cannot settle is `Inconclusive`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::model::{AffineModel, LipschitzCertificate, ReducedModelField, StateShape};
use crate::quad::{integrate, QuadOptions};
use crate::riccati::{solve_field, solve_minimal, RiccatiSolution, SolveOptions, SolveStatus, VectorField};

/// `u ⪯ v`: `u_i ≤ v_i` on `I`, `u_j = v_j` on `J`, both up to `tol`.
pub fn leq_order(shape: StateShape, u: &[f64], v: &[f64], tol: f64) -> bool {
    if u.len() != shape.d() || v.len() != shape.d() {
        return false;
    }
    (0..shape.m).all(|i| u[i] <= v[i] + tol) && (shape.m..shape.d()).all(|j| (u[j] - v[j]).abs() <= tol)
}

/// A reduced vector field whose uniqueness at `0` is to be decided.
pub trait ReducedField: VectorField {
    fn contains(&self, v: &[f64]) -> bool {
        let mut out = vec![0.0; self.dim()];
        self.eval(v, &mut out).is_ok()
    }

    /// Closed-form Lipschitz bound near `0`, when one is available.
    fn analytic_lipschitz(&self) -> Option<LipschitzCertificate> {
        None
    }
}

impl ReducedField for ReducedModelField<'_> {
    fn contains(&self, v: &[f64]) -> bool {
        let mut u = v.to_vec();
        u.resize(self.model.d(), 0.0);
        self.model.in_domain(&u)
    }

    fn analytic_lipschitz(&self) -> Option<LipschitzCertificate> {
        self.model.reduced_lipschitz()
    }
}

/// A reduced field given by a closure; `f` returns `false` outside the domain.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) -> bool + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) -> bool + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, v.len())?;
        if (self.f)(v, out) && out.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{v:?} outside the field's domain")))
        }
    }
}

impl<F> ReducedField for FnField<F> where F: Fn(&[f64], &mut [f64]) -> bool + Sync {}

/// The scalar field `v ↦ -(-v)^p` on `v ≤ 0`.
pub fn power_field(p: f64) -> FnField<impl Fn(&[f64], &mut [f64]) -> bool + Sync> {
    FnField::new(1, move |v: &[f64], out: &mut [f64]| {
        if v[0] > 0.0 {
            return false;
        }
        out[0] = -(-v[0]).powf(p);
        true
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservativeOptions {
    /// Starting offsets `g(0) = -ε·1` of the probe ladder.
    pub probe_eps: Vec<f64>,
    pub checkpoint: f64,
    /// Length of witness trajectories.
    pub witness_horizon: f64,
    pub witness_points: usize,
    /// Largest distance from `0` inspected by the scalar Osgood test.
    pub osgood_delta: f64,
    pub solve: SolveOptions,
}

impl Default for ConservativeOptions {
    fn default() -> Self {
        Self {
            probe_eps: vec![1e-4, 1e-6, 1e-8],
            checkpoint: 1.0,
            witness_horizon: 5.0,
            witness_points: 1001,
            osgood_delta: 0.5,
            solve: SolveOptions::default(),
        }
    }
}

/// One side of `0` in the scalar Osgood test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsgoodSide {
    /// `-1` for `[-δ, 0)`, `+1` for `(0, δ]`.
    pub direction: f64,
    pub delta: f64,
    /// The field points away from `0` on this side.
    pub escaping: bool,
    /// Geometric mean ratio of successive decade increments of `∫ dv/|R̃|`.
    pub decade_ratio: Option<f64>,
    /// `Some(true)` if `∫_0 dv/|R̃(v)|` converges.
    pub convergent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsgoodReport {
    pub sides: Vec<OsgoodSide>,
}

impl OsgoodReport {
    /// A side the field escapes through in finite time.
    pub fn escaping_convergent_side(&self) -> Option<&OsgoodSide> {
        let mut sides: Vec<&OsgoodSide> =
            self.sides.iter().filter(|s| s.escaping && s.convergent == Some(true)).collect();
        sides.sort_by(|a, b| a.direction.total_cmp(&b.direction));
        sides.first().copied()
    }

    /// Every escaping side has a divergent integral.
    pub fn unique(&self) -> bool {
        self.sides.iter().all(|s| !s.escaping || s.convergent == Some(false))
    }

    pub fn convergent(&self) -> bool {
        self.escaping_convergent_side().is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Zero-dimensional reduced system.
    Trivial,
    Lipschitz(LipschitzCertificate),
    Osgood(OsgoodReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessOrigin {
    /// `R̃(0) ≠ 0`: the solution from `0` moves.
    Drift,
    /// Inversion of the scalar time map `t(g) = ∫ dv / R̃(v)`.
    Osgood,
    /// Limit of the probe ladder.
    Probe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessTrajectory {
    pub trajectory: RiccatiSolution,
    /// Max-norm of `∂g - R̃(g)` with 5-point differences on the grid.
    pub residual: f64,
    pub max_norm: f64,
    pub origin: WitnessOrigin,
}

impl WitnessTrajectory {
    pub fn is_valid(&self) -> bool {
        self.residual < WITNESS_RESIDUAL && self.max_norm > WITNESS_MIN_NORM
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Killing { f0: f64 },
    Trajectory(WitnessTrajectory),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConservativenessVerdict {
    Conservative(Certificate),
    NonConservative(Witness),
    Inconclusive(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Conservative,
    NonConservative,
    Inconclusive,
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

pub const WITNESS_RESIDUAL: f64 = 1e-6;
pub const WITNESS_MIN_NORM: f64 = 1e-4;
const PROBE_WITNESS_EPS: f64 = 1e-14;

impl ConservativenessVerdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Self::Conservative(_) => VerdictKind::Conservative,
            Self::NonConservative(_) => VerdictKind::NonConservative,
            Self::Inconclusive(_) => VerdictKind::Inconclusive,
        }
    }

    pub fn witness_trajectory(&self) -> Option<&WitnessTrajectory> {
        match self {
            Self::NonConservative(Witness::Trajectory(w)) => Some(w),
            _ => None,
        }
    }

    /// `key: value` report.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind: {}", self.kind());
        match self {
            Self::Conservative(Certificate::Trivial) => {
                let _ = writeln!(s, "certificate: trivial");
            }
            Self::Conservative(Certificate::Lipschitz(c)) => {
                let _ = writeln!(s, "certificate: lipschitz");
                let _ = writeln!(s, "lipschitz_bound: {:.16e}", c.lipschitz);
                let _ = writeln!(s, "radius: {:.16e}", c.radius);
            }
            Self::Conservative(Certificate::Osgood(r)) => {
                let _ = writeln!(s, "certificate: osgood");
                write_osgood(&mut s, r);
            }
            Self::NonConservative(Witness::Killing { f0 }) => {
                let _ = writeln!(s, "witness: killing");
                let _ = writeln!(s, "F(0): {f0:.16e}");
            }
            Self::NonConservative(Witness::Trajectory(w)) => {
                let _ = writeln!(s, "witness: trajectory");
                let _ = writeln!(s, "witness_origin: {:?}", w.origin);
                let _ = writeln!(s, "witness_points: {}", w.trajectory.grid.len());
                let _ = writeln!(s, "witness_t_end: {:.16e}", w.trajectory.t_end());
                let _ = writeln!(s, "witness_residual: {:.16e}", w.residual);
                let _ = writeln!(s, "witness_max_norm: {:.16e}", w.max_norm);
            }
            Self::Inconclusive(reason) => {
                let _ = writeln!(s, "reason: {reason}");
            }
        }
        s
    }
}

fn write_osgood(s: &mut String, r: &OsgoodReport) {
    for side in &r.sides {
        let name = if side.direction < 0.0 { "negative" } else { "positive" };
        let conv = match side.convergent {
            Some(true) => "convergent",
            Some(false) => "divergent",
            None => "undecided",
        };
        let _ = writeln!(
            s,
            "osgood_{name}: escaping={} delta={:.6e} decade_ratio={} integral={conv}",
            side.escaping,
            side.delta,
            side.decade_ratio.map_or("-".to_string(), |r| format!("{r:.6e}"))
        );
    }
}

fn eval_vec(field: &dyn ReducedField, v: &[f64]) -> Option<Vec<f64>> {
    let mut out = vec![0.0; field.dim()];
    field.eval(v, &mut out).ok().map(|_| out)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Difference-quotient Lipschitz estimate on a ball around `0`, with a
/// safety factor of 2. Gives up when the ball leaves the domain or when the
/// quotients keep growing as the increment shrinks.
pub fn numeric_lipschitz(field: &dyn ReducedField) -> Option<LipschitzCertificate> {
    let m = field.dim();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x5eed);
    'radius: for radius in [1.0, 0.1, 0.01] {
        let mut centers = vec![vec![0.0; m]];
        for _ in 0..16 {
            let p: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            centers.push(p.iter().map(|x| 0.5 * radius * x / n).collect());
        }
        let mut dirs = Vec::new();
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            dirs.push(e.clone());
            e[j] = -1.0;
            dirs.push(e);
        }
        let mut quotients = Vec::new();
        for scale in [1e-2, 1e-4, 1e-6] {
            let h = scale * radius;
            let mut q: f64 = 0.0;
            for c in &centers {
                let Some(fc) = eval_vec(field, c) else { continue 'radius };
                for e in &dirs {
                    let p: Vec<f64> = c.iter().zip(e).map(|(c, e)| c + h * e).collect();
                    let Some(fp) = eval_vec(field, &p) else { continue 'radius };
                    let diff: Vec<f64> = fp.iter().zip(&fc).map(|(a, b)| a - b).collect();
                    q = q.max(max_abs(&diff) / h);
                }
            }
            quotients.push(q);
        }
        let (first, last) = (quotients[0], *quotients.last().unwrap());
        if last > 4.0 * first.max(1e-300) && last > 1e-12 {
            return None;
        }
        let bound = 2.0 * quotients.iter().fold(0.0f64, |a, b| a.max(*b)) * (m as f64).sqrt();
        return Some(LipschitzCertificate { lipschitz: bound, radius });
    }
    None
}

fn scalar(field: &dyn ReducedField, v: f64) -> Option<f64> {
    eval_vec(field, &[v]).map(|o| o[0])
}

const SIGN_SAMPLES: usize = 64;
const OSGOOD_DECADES: usize = 12;

/// Osgood test for a scalar field with `R̃(0) = 0`.
pub fn osgood_test(field: &dyn ReducedField, delta: f64) -> Result<OsgoodReport> {
    check_dim(1, field.dim())?;
    let quad = QuadOptions { rel_tol: 1e-12, ..QuadOptions::default() };
    let mut sides = Vec::new();
    for dir in [-1.0, 1.0] {
        // samples from |v| = δ·1e-16 up to δ
        let samples: Vec<f64> =
            (0..=SIGN_SAMPLES).rev().map(|j| delta * 10f64.powf(-(j as f64) / 4.0)).collect();
        let mut signs = Vec::new();
        for &a in &samples {
            match scalar(field, dir * a) {
                Some(r) => signs.push((a, (r * dir).signum() * if r == 0.0 { 0.0 } else { 1.0 })),
                None => break,
            }
        }
        if signs.is_empty() {
            continue;
        }
        let first = signs[0].1;
        let run = signs.iter().take_while(|(_, s)| *s == first).count();
        if run < 8 {
            sides.push(OsgoodSide { direction: dir, delta: 0.0, escaping: true, decade_ratio: None, convergent: None });
            continue;
        }
        let side_delta = signs[run - 1].0;
        if first <= 0.0 {
            sides.push(OsgoodSide {
                direction: dir,
                delta: side_delta,
                escaping: false,
                decade_ratio: None,
                convergent: None,
            });
            continue;
        }
        // v = dir·w², dv/|R̃(v)| = 2w dw / |R̃(dir w²)|
        let w_max = side_delta.sqrt();
        let integrand = |x: f64| -> f64 {
            match scalar(field, dir * x * x) {
                Some(r) if r != 0.0 => 2.0 * x / r.abs(),
                _ => f64::INFINITY,
            }
        };
        let mut incr = Vec::new();
        for k in 0..OSGOOD_DECADES {
            let hi = w_max * 10f64.powi(-(k as i32));
            let lo = hi * 0.1;
            incr.push(integrate(integrand, lo, hi, &quad).value);
        }
        let ratio = if incr.iter().any(|v| !v.is_finite()) {
            f64::INFINITY
        } else {
            let tail = &incr[OSGOOD_DECADES - 7..];
            let logs: Vec<f64> = tail.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
            (logs.iter().sum::<f64>() / logs.len() as f64).exp()
        };
        let convergent = if ratio <= 0.5 {
            Some(true)
        } else if ratio >= 0.9 {
            Some(false)
        } else {
            None
        };
        sides.push(OsgoodSide { direction: dir, delta: side_delta, escaping: true, decade_ratio: Some(ratio), convergent });
    }
    Ok(OsgoodReport { sides })
}

fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    let points = points.max(5);
    (0..points).map(|k| horizon * k as f64 / (points - 1) as f64).collect()
}

/// Max-norm of `∂g - R̃(g)` using 5-point differences on a uniform grid.
pub fn witness_residual(field: &dyn ReducedField, traj: &RiccatiSolution) -> f64 {
    let n = traj.grid.len();
    if n < 5 {
        return f64::INFINITY;
    }
    let h = (traj.grid[n - 1] - traj.grid[0]) / (n - 1) as f64;
    let m = field.dim();
    let g = &traj.psi;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let Some(r) = eval_vec(field, &g[k]) else { return f64::INFINITY };
        for j in 0..m {
            let c = |i: usize| g[i][j];
            let d = if k >= 2 && k + 2 < n {
                (-c(k + 2) + 8.0 * c(k + 1) - 8.0 * c(k - 1) + c(k - 2)) / (12.0 * h)
            } else if k == 0 {
                (-25.0 * c(0) + 48.0 * c(1) - 36.0 * c(2) + 16.0 * c(3) - 3.0 * c(4)) / (12.0 * h)
            } else if k == 1 {
                (-3.0 * c(0) - 10.0 * c(1) + 18.0 * c(2) - 6.0 * c(3) + c(4)) / (12.0 * h)
            } else if k == n - 2 {
                (3.0 * c(n - 1) + 10.0 * c(n - 2) - 18.0 * c(n - 3) + 6.0 * c(n - 4) - c(n - 5)) / (12.0 * h)
            } else {
                (25.0 * c(n - 1) - 48.0 * c(n - 2) + 36.0 * c(n - 3) - 16.0 * c(n - 4) + 3.0 * c(n - 5))
                    / (12.0 * h)
            };
            worst = worst.max((d - r[j]).abs());
        }
    }
    worst
}

fn make_witness(field: &dyn ReducedField, traj: RiccatiSolution, origin: WitnessOrigin) -> WitnessTrajectory {
    let residual = witness_residual(field, &traj);
    let max_norm = traj.psi.iter().map(|g| max_abs(g)).fold(0.0, f64::max);
    WitnessTrajectory { trajectory: traj, residual, max_norm, origin }
}

/// Node values of `sol` at the given times (those inside its grid).
fn nodes_at(sol: &RiccatiSolution, times: &[f64], offset: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut ts = Vec::new();
    let mut gs = Vec::new();
    for &t in times {
        if let Some((g, _)) = sol.sample(t - offset) {
            ts.push(t);
            gs.push(g);
        } else {
            break;
        }
    }
    (ts, gs)
}

fn solve_on_grid(
    field: &dyn ReducedField,
    g0: &[f64],
    times: &[f64],
    offset: f64,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, SolveStatus)> {
    let horizon = times.last().copied().unwrap_or(offset) - offset;
    if horizon <= 0.0 {
        return Ok((Vec::new(), Vec::new(), SolveStatus::Completed));
    }
    let o = SolveOptions {
        horizon,
        t_eval: times.iter().map(|t| t - offset).filter(|t| *t > 0.0).collect(),
        ..opts.clone()
    };
    let sol = solve_field(field, g0, &o)?;
    let (ts, gs) = nodes_at(&sol, times, offset);
    Ok((ts, gs, sol.status))
}

/// Non-trivial solution leaving `0` through an escaping side with a
/// convergent Osgood integral: inverts the time map up to `δ`, then
/// continues with the stepper.
fn osgood_witness(
    field: &dyn ReducedField,
    side: &OsgoodSide,
    opts: &ConservativeOptions,
) -> Result<RiccatiSolution> {
    let dir = side.direction;
    let w_max = side.delta.sqrt();
    let quad = QuadOptions { rel_tol: 1e-14, abs_tol: 1e-16, ..QuadOptions::default() };
    let speed = |x: f64| -> f64 {
        match scalar(field, dir * x * x) {
            Some(r) if r != 0.0 => 2.0 * x / r.abs(),
            _ => f64::INFINITY,
        }
    };
    let tau = |a: f64, b: f64| integrate(speed, a, b, &quad).value;
    let tau_max = tau(0.0, w_max);
    let times = uniform_grid(opts.witness_horizon, opts.witness_points);

    let mut grid = vec![0.0];
    let mut psi = vec![vec![0.0]];
    let (mut w_prev, mut tau_prev) = (0.0, 0.0);
    let mut k = 1;
    while k < times.len() && times[k] <= tau_max {
        let target = times[k];
        // safeguarded Newton on τ(w) = target, bracket [w_prev, w_max]
        let (mut lo, mut hi) = (w_prev, w_max);
        let mut w = if w_prev == 0.0 { 0.5 * w_max.min(target.sqrt()) } else { w_prev };
        let mut tw = tau_prev + tau(w_prev, w);
        for _ in 0..200 {
            let resid = tw - target;
            if resid.abs() <= 1e-15 * target.max(1.0) {
                break;
            }
            if resid > 0.0 {
                hi = w;
            } else {
                lo = w;
            }
            let slope = speed(w);
            let mut next = w - resid / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - w).abs() <= 1e-16 * w_max {
                w = next;
                break;
            }
            w = next;
            tw = tau_prev + tau(w_prev, w);
        }
        tau_prev += tau(w_prev, w);
        w_prev = w;
        grid.push(target);
        psi.push(vec![dir * w * w]);
        k += 1;
    }
    let mut status = SolveStatus::Completed;
    if k < times.len() {
        let (ts, gs, st) = solve_on_grid(field, &[dir * side.delta], &times[k..], tau_max, &opts.solve)?;
        grid.extend(ts);
        psi.extend(gs);
        status = st;
    }
    Ok(RiccatiSolution::from_nodes(grid, psi, Vec::new(), status))
}

fn trajectory_witness(
    field: &dyn ReducedField,
    g0: &[f64],
    opts: &ConservativeOptions,
) -> Result<RiccatiSolution> {
    let times = uniform_grid(opts.witness_horizon, opts.witness_points);
    let (ts, mut gs, status) = solve_on_grid(field, g0, &times, 0.0, &opts.solve)?;
    gs[0] = vec![0.0; field.dim()];
    Ok(RiccatiSolution::from_nodes(ts, gs, Vec::new(), status))
}

fn verdict_from_witness(field: &dyn ReducedField, traj: RiccatiSolution, origin: WitnessOrigin) -> ConservativenessVerdict {
    let w = make_witness(field, traj, origin);
    if w.is_valid() {
        ConservativenessVerdict::NonConservative(Witness::Trajectory(w))
    } else {
        ConservativenessVerdict::Inconclusive(format!(
            "candidate witness ({origin:?}) failed validation: residual {:.3e}, max norm {:.3e}",
            w.residual, w.max_norm
        ))
    }
}

/// Probe ladder: integrate from `-ε·1` to the checkpoint for each `ε`.
fn probe_ladder(field: &dyn ReducedField, opts: &ConservativeOptions) -> ConservativenessVerdict {
    let m = field.dim();
    let so = SolveOptions { horizon: opts.checkpoint, t_eval: Vec::new(), ..opts.solve.clone() };
    let mut eps = opts.probe_eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let ends: Vec<Result<RiccatiSolution>> =
        eps.par_iter().map(|e| solve_field(field, &vec![-e; m], &so)).collect();
    let mut values = Vec::new();
    for (e, r) in eps.iter().zip(ends) {
        match r {
            Ok(sol) if sol.status.reached_horizon() => values.push(sol.psi_end().to_vec()),
            Ok(sol) => return ConservativenessVerdict::Inconclusive(format!("probe ε={e:e} ended with {}", sol.status)),
            Err(err) => return ConservativenessVerdict::Inconclusive(format!("probe ε={e:e} failed: {err}")),
        }
    }
    if values.len() < 2 {
        return ConservativenessVerdict::Inconclusive("probe ladder needs at least two levels".into());
    }
    let diffs: Vec<f64> = values
        .windows(2)
        .map(|w| max_abs(&w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect();
    let last = values.last().unwrap();
    let last_norm = max_abs(last);
    let d_last = *diffs.last().unwrap();
    let shrinking = diffs.len() < 2 || d_last <= 0.5 * diffs[diffs.len() - 2] + 1e-12;
    if last_norm > WITNESS_MIN_NORM && shrinking && d_last < 0.1 * last_norm {
        return match trajectory_witness(field, &vec![-PROBE_WITNESS_EPS; m], opts) {
            Ok(traj) => verdict_from_witness(field, traj, WitnessOrigin::Probe),
            Err(e) => ConservativenessVerdict::Inconclusive(format!("probe witness failed: {e}")),
        };
    }
    if last_norm <= WITNESS_MIN_NORM {
        ConservativenessVerdict::Inconclusive(
            "probe trajectories collapse to 0 but no Lipschitz certificate is available".into(),
        )
    } else {
        ConservativenessVerdict::Inconclusive("probe ladder did not converge".into())
    }
}

/// Uniqueness of the trivial solution of `∂g = R̃(g)`, `g(0) = 0`.
pub fn check_field_uniqueness(field: &dyn ReducedField, opts: &ConservativeOptions) -> Result<ConservativenessVerdict> {
    let m = field.dim();
    if m == 0 {
        return Ok(ConservativenessVerdict::Conservative(Certificate::Trivial));
    }
    let zero = vec![0.0; m];
    let r0 = eval_vec(field, &zero).ok_or_else(|| Error::Domain("0 outside the reduced field's domain".into()))?;
    if max_abs(&r0) > 0.0 {
        return Ok(match trajectory_witness(field, &zero, opts) {
            Ok(traj) => verdict_from_witness(field, traj, WitnessOrigin::Drift),
            Err(e) => ConservativenessVerdict::Inconclusive(format!("drift witness failed: {e}")),
        });
    }
    if let Some(cert) = field.analytic_lipschitz().or_else(|| numeric_lipschitz(field)) {
        return Ok(ConservativenessVerdict::Conservative(Certificate::Lipschitz(cert)));
    }
    if m == 1 {
        let report = osgood_test(field, opts.osgood_delta)?;
        if let Some(side) = report.escaping_convergent_side() {
            return Ok(match osgood_witness(field, side, opts) {
                Ok(traj) => verdict_from_witness(field, traj, WitnessOrigin::Osgood),
                Err(e) => ConservativenessVerdict::Inconclusive(format!("Osgood witness failed: {e}")),
            });
        }
        if report.unique() {
            return Ok(ConservativenessVerdict::Conservative(Certificate::Osgood(report)));
        }
    }
    Ok(probe_ladder(field, opts))
}

/// Decides whether the model is conservative.
pub fn check_conservative(model: &AffineModel, opts: &ConservativeOptions) -> Result<ConservativenessVerdict> {
    let f0 = model.eval_f(&vec![0.0; model.d()])?;
    if f0 != 0.0 {
        return Ok(ConservativenessVerdict::NonConservative(Witness::Killing { f0 }));
    }
    check_field_uniqueness(&ReducedModelField { model }, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonResult {
    pub holds: bool,
    pub max_violation: f64,
}

pub const COMPARISON_TOL: f64 = 1e-7;

/// Checks `g(t) ⪰ ψ_I(t, (u_I, 0))` on the grid of `g_traj`, with `ψ` the
/// minimal solution.
pub fn comparison_check(
    model: &AffineModel,
    u_i: &[f64],
    g_traj: &RiccatiSolution,
    opts: &SolveOptions,
) -> Result<ComparisonResult> {
    let m = model.m();
    check_dim(m, u_i.len())?;
    let mut u0 = u_i.to_vec();
    u0.resize(model.d(), 0.0);
    let t_end = g_traj.t_end();
    let so = SolveOptions { horizon: t_end, t_eval: g_traj.grid.clone(), ..opts.clone() };
    let psi = solve_minimal(model, 0.0, &vec![0.0; model.d()], &u0, &so)?;
    if psi.t_end() < t_end * (1.0 - 1e-12) {
        return Err(Error::Solver(format!(
            "ψ stops at t = {} ({}) before the trajectory end {t_end}",
            psi.t_end(),
            psi.status
        )));
    }
    let mut worst: f64 = 0.0;
    for (t, g) in g_traj.grid.iter().zip(&g_traj.psi) {
        let (p, _) = psi.sample(*t).ok_or_else(|| Error::Solver(format!("no ψ at t = {t}")))?;
        for i in 0..m {
            worst = worst.max(p[i] - g[i]);
        }
    }
    Ok(ComparisonResult { holds: worst <= COMPARISON_TOL, max_violation: worst.max(0.0) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderPreservationReport {
    pub samples: usize,
    pub boundary_samples: usize,
    pub counterexamples: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Largest `s ∈ [0, cap]` with `s·y ∈ 𝒴`, by bisection.
fn domain_extent(model: &AffineModel, y: &[f64], cap: f64) -> f64 {
    let at = |s: f64| -> Vec<f64> { y.iter().map(|v| s * v).collect() };
    if model.in_domain(&at(cap)) {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if model.in_domain(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Samples `v ∈ 𝒴` (a quarter of them at the domain edge) and `u ⪯ v`, and
/// records every `u ∉ 𝒴`.
pub fn order_preservation_test(model: &AffineModel, samples: usize, seed: u64) -> OrderPreservationReport {
    let (m, d) = (model.m(), model.d());
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut counterexamples = Vec::new();
    let mut boundary_samples = 0;
    for k in 0..samples {
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let extent = domain_extent(model, &y, 3.0);
        let on_edge = k % 4 == 0 && extent < 3.0;
        let s = if on_edge {
            boundary_samples += 1;
            extent
        } else {
            extent * rng.random_range(0.0..1.0)
        };
        let v: Vec<f64> = y.iter().map(|x| s * x).collect();
        if !model.in_domain(&v) {
            continue;
        }
        let mut u = v.clone();
        for ui in u[..m].iter_mut() {
            *ui -= rng.random_range(0.0..3.0);
        }
        if !model.in_domain(&u) {
            counterexamples.push((u, v));
        }
    }
    OrderPreservationReport { samples, boundary_samples, counterexamples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::levy::{JumpLaw, LevyMeasure};

    #[test]
    fn order_relation() {
        let s = StateShape::new(1, 1).unwrap();
        assert!(leq_order(s, &[0.3, 0.5], &[0.3, 0.5], 0.0));
        assert!(leq_order(s, &[-1.0, 0.5], &[0.0, 0.5], 0.0));
        assert!(!leq_order(s, &[-1.0, 0.4], &[0.0, 0.5], 0.0));
        assert!(!leq_order(s, &[0.1, 0.5], &[0.0, 0.5], 0.0));
        assert!(leq_order(s, &[1e-12, 0.5], &[0.0, 0.5], 1e-9));
    }

    #[test]
    fn feller_and_kr2014_are_conservative() {
        for m in [builtin::feller(), builtin::kr2014(), builtin::cir_jump()] {
            let v = check_conservative(&m, &ConservativeOptions::default()).unwrap();
            assert!(matches!(v, ConservativenessVerdict::Conservative(Certificate::Lipschitz(_))), "{v:?}");
        }
    }

    #[test]
    fn killing_is_detected() {
        let mut m = builtin::feller();
        m.c = 0.25;
        let v = check_conservative(&m, &ConservativeOptions::default()).unwrap();
        assert_eq!(v, ConservativenessVerdict::NonConservative(Witness::Killing { f0: -0.25 }));
    }

    #[test]
    fn linear_killing_moves_the_reduced_solution() {
        let mut m = builtin::feller();
        m.linear[0].gamma = 0.3;
        let v = check_conservative(&m, &ConservativeOptions::default()).unwrap();
        let w = v.witness_trajectory().expect("trajectory witness");
        assert_eq!(w.origin, WitnessOrigin::Drift);
        assert!(w.is_valid());
        assert!(w.trajectory.psi.iter().all(|g| g[0] <= 0.0));
    }

    #[test]
    fn power_fields() {
        let opts = ConservativeOptions::default();
        for p in [0.5, 0.75] {
            let f = power_field(p);
            let v = check_field_uniqueness(&f, &opts).unwrap();
            let w = v.witness_trajectory().unwrap_or_else(|| panic!("p={p}: {v:?}"));
            assert_eq!(w.origin, WitnessOrigin::Osgood);
            let q = 1.0 / (1.0 - p);
            for (t, g) in w.trajectory.grid.iter().zip(&w.trajectory.psi) {
                let expect = -((1.0 - p) * t).powf(q);
                assert!((g[0] - expect).abs() < 1e-6 * expect.abs().max(1.0), "p={p} t={t}");
            }
        }
        for p in [1.0, 2.0] {
            let v = check_field_uniqueness(&power_field(p), &opts).unwrap();
            assert!(matches!(v, ConservativenessVerdict::Conservative(Certificate::Osgood(_))), "p={p}: {v:?}");
        }
    }

    #[test]
    fn osgood_reports() {
        let r = osgood_test(&power_field(0.5), 0.5).unwrap();
        assert_eq!(r.sides.len(), 1);
        let side = r.sides[0];
        assert!(side.escaping);
        assert!((side.decade_ratio.unwrap() - 0.1).abs() < 1e-6);
        let r = osgood_test(&power_field(1.0), 0.5).unwrap();
        assert!((r.sides[0].decade_ratio.unwrap() - 1.0).abs() < 1e-6);
        assert!(r.unique());
    }

    #[test]
    fn smooth_closure_field_gets_numeric_certificate() {
        let f = FnField::new(2, |v: &[f64], out: &mut [f64]| {
            out[0] = v[0] * v[0] - v[1];
            out[1] = 0.5 * v[0] - v[1];
            true
        });
        let v = check_field_uniqueness(&f, &ConservativeOptions::default()).unwrap();
        match v {
            ConservativenessVerdict::Conservative(Certificate::Lipschitz(c)) => assert!(c.lipschitz >= 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn multidimensional_probe_finds_non_uniqueness() {
        // two decoupled square-root fields on the negative orthant
        let f = FnField::new(2, |v: &[f64], out: &mut [f64]| {
            if v.iter().any(|x| *x > 0.0) {
                return false;
            }
            out[0] = -(-v[0]).sqrt();
            out[1] = -(-v[1]).sqrt() + 0.1 * v[0];
            true
        });
        let v = check_field_uniqueness(&f, &ConservativeOptions::default()).unwrap();
        let w = v.witness_trajectory().unwrap_or_else(|| panic!("{v:?}"));
        assert_eq!(w.origin, WitnessOrigin::Probe);
        let (g, _) = w.trajectory.sample(2.0).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-5, "{g:?}");
    }

    #[test]
    fn comparison_detects_violations() {
        let m = builtin::feller();
        let opts = SolveOptions::uniform(2.0, 21);
        let psi = crate::riccati::solve_riccati(&m, &[-0.5], &opts).unwrap();
        let own = RiccatiSolution::from_nodes(psi.grid.clone(), psi.psi.clone(), Vec::new(), psi.status);
        let r = comparison_check(&m, &[-0.5], &own, &SolveOptions::default()).unwrap();
        assert!(r.holds && r.max_violation < 1e-9, "{r:?}");
        let mut low = own.clone();
        low.psi[10][0] -= 1e-5;
        let r = comparison_check(&m, &[-0.5], &low, &SolveOptions::default()).unwrap();
        assert!(!r.holds);
        assert!((r.max_violation - 1e-5).abs() < 1e-8);
    }

    #[test]
    fn order_preservation_on_builtins() {
        let mut expo = crate::model::AffineModel::zero(StateShape::new(1, 1).unwrap());
        expo.mu0 = LevyMeasure::new(JumpLaw::CompoundExponential { intensity: 1.0, rate: 1.0 }, vec![1.0, 0.5]);
        for m in [builtin::kr2014(), builtin::cir_jump(), expo] {
            let r = order_preservation_test(&m, 1000, 11);
            assert!(r.counterexamples.is_empty(), "{:?}", &r.counterexamples[..1]);
            assert!(r.boundary_samples > 0);
        }
        let k = builtin::kr2014();
        assert!(k.in_domain(&[1.0]) && k.in_domain(&[0.3]));
    }
}
