//! Generalized Riccati systems `∂ψ = R(ψ)`, `∂φ = F(ψ)` and their reduced and
//! discounted variants, integrated with an adaptive Dormand–Prince 5(4) pair.
//!
//! Field evaluations outside the effective domain (or non-finite values)
//! reject the step instead of aborting, so square-root type boundaries are
//! approached from inside.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::model::{AffineModel, ReducedModelField};

/// An autonomous vector field on (a subset of) `R^dim`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    /// Writes the field at `v` into `out`; `Err` outside the field's domain.
    fn eval(&self, v: &[f64], out: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub horizon: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub blowup_threshold: f64,
    /// State-space distance to the domain boundary at which repeated domain
    /// rejections end the run with [`SolveStatus::LeftDomain`].
    pub domain_margin: f64,
    /// Fixed step size; disables error control when set.
    pub fixed_step: Option<f64>,
    /// Times that must appear as grid nodes.
    pub t_eval: Vec<f64>,
    pub max_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.1,
            min_step: 1e-14,
            blowup_threshold: 1e8,
            domain_margin: 1e-12,
            fixed_step: None,
            t_eval: Vec::new(),
            max_steps: 1_000_000,
        }
    }
}

impl SolveOptions {
    pub fn with_horizon(horizon: f64) -> Self {
        Self { horizon, ..Self::default() }
    }

    /// Uniform output grid of `points` nodes on `[0, horizon]`.
    pub fn uniform(horizon: f64, points: usize) -> Self {
        let points = points.max(2);
        let t_eval = (0..points).map(|k| horizon * k as f64 / (points - 1) as f64).collect();
        Self { horizon, t_eval, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad("horizon T must be > 0");
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("rtol and atol must be > 0");
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step) {
            return bad("need 0 < min_step < max_step");
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blowup_threshold must be > 0");
        }
        if !(self.domain_margin >= 0.0) {
            return bad("domain_margin must be ≥ 0");
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0) {
                return bad("fixed_step must be > 0");
            }
        }
        if self.t_eval.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("t_eval times must be finite and ≥ 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveStatus {
    Completed,
    BlowUp(f64),
    LeftDomain(f64),
    Equilibrium(f64),
}

impl SolveStatus {
    /// True for runs whose trajectory covers the full horizon.
    pub fn reached_horizon(&self) -> bool {
        matches!(self, SolveStatus::Completed | SolveStatus::Equilibrium(_))
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStatus::Completed => write!(f, "Completed"),
            SolveStatus::BlowUp(t) => write!(f, "BlowUp t*≈{t}"),
            SolveStatus::LeftDomain(t) => write!(f, "LeftDomain t_exit={t}"),
            SolveStatus::Equilibrium(t) => write!(f, "Equilibrium t_eq={t}"),
        }
    }
}

/// Trajectory of `(ψ, φ)`; `phi` is empty for the reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub grid: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub status: SolveStatus,
    dpsi: Vec<Vec<f64>>,
    dphi: Vec<f64>,
}

impl RiccatiSolution {
    /// Builds a solution from node values alone; interpolation between nodes
    /// falls back to derivatives from finite differences.
    pub fn from_nodes(grid: Vec<f64>, psi: Vec<Vec<f64>>, phi: Vec<f64>, status: SolveStatus) -> Self {
        let dpsi = fd_derivatives(&grid, &psi);
        let dphi = if phi.is_empty() {
            Vec::new()
        } else {
            let cols: Vec<Vec<f64>> = phi.iter().map(|p| vec![*p]).collect();
            fd_derivatives(&grid, &cols).into_iter().map(|v| v[0]).collect()
        };
        Self { grid, psi, phi, status, dpsi, dphi }
    }

    pub fn t_end(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    pub fn psi_end(&self) -> &[f64] {
        self.psi.last().expect("non-empty grid")
    }

    pub fn phi_end(&self) -> f64 {
        self.phi.last().copied().unwrap_or(0.0)
    }

    /// Cubic Hermite interpolation of `(ψ, φ)` at `t`; `None` outside the grid.
    pub fn sample(&self, t: f64) -> Option<(Vec<f64>, f64)> {
        let (k, s, h) = locate(&self.grid, t)?;
        let psi = (0..self.psi[k].len())
            .map(|j| {
                if h == 0.0 {
                    self.psi[k][j]
                } else {
                    hermite(s, h, self.psi[k][j], self.psi[k + 1][j], self.dpsi[k][j], self.dpsi[k + 1][j])
                }
            })
            .collect();
        let phi = if self.phi.is_empty() {
            0.0
        } else if h == 0.0 {
            self.phi[k]
        } else {
            hermite(s, h, self.phi[k], self.phi[k + 1], self.dphi[k], self.dphi[k + 1])
        };
        Some((psi, phi))
    }

    /// The node derivatives `∂ψ` used for dense output.
    pub fn derivatives(&self) -> &[Vec<f64>] {
        &self.dpsi
    }

    pub fn to_csv(&self) -> String {
        let d = self.psi.first().map_or(0, Vec::len);
        let mut s = String::from("t");
        for j in 1..=d {
            s.push_str(&format!(",psi_{j}"));
        }
        if !self.phi.is_empty() {
            s.push_str(",phi");
        }
        s.push('\n');
        for (k, t) in self.grid.iter().enumerate() {
            s.push_str(&format!("{t:.16e}"));
            for v in &self.psi[k] {
                s.push_str(&format!(",{v:.16e}"));
            }
            if let Some(p) = self.phi.get(k) {
                s.push_str(&format!(",{p:.16e}"));
            }
            s.push('\n');
        }
        s.push_str(&format!("# status={}\n", self.status));
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Complex-mode trajectory for characteristic functions.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSolution {
    pub grid: Vec<f64>,
    pub psi: Vec<Vec<Complex64>>,
    pub phi: Vec<Complex64>,
    pub status: SolveStatus,
}

fn locate(grid: &[f64], t: f64) -> Option<(usize, f64, f64)> {
    let (first, last) = (*grid.first()?, *grid.last()?);
    if !(t >= first && t <= last) {
        return None;
    }
    if grid.len() == 1 || t == last {
        return Some((grid.len() - 1, 0.0, 0.0));
    }
    let k = grid.partition_point(|g| *g <= t) - 1;
    let h = grid[k + 1] - grid[k];
    let s = (t - grid[k]) / h;
    if s == 0.0 {
        Some((k, 0.0, 0.0))
    } else {
        Some((k, s, h))
    }
}

fn hermite(s: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

fn fd_derivatives(grid: &[f64], vals: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = grid.len();
    (0..n)
        .map(|k| {
            let (a, b) = if n < 2 {
                return vec![0.0; vals[k].len()];
            } else if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            let h = grid[b] - grid[a];
            vals[k].iter().enumerate().map(|(j, _)| (vals[b][j] - vals[a][j]) / h).collect()
        })
        .collect()
}

// Dormand–Prince 5(4) tableau; the fields are autonomous so the nodes are
// not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const EQUILIBRIUM_STEPS: usize = 10;
const LIPSCHITZ_STEP_BOUND: f64 = 0.5;
const BLOWUP_FIT_POINTS: usize = 5;

/// Raw trajectory: nodes, state, derivative. The first `n_state` components
/// are the Riccati state; the rest are quadratures (`φ`).
struct Raw {
    t: Vec<f64>,
    y: Vec<Vec<f64>>,
    dy: Vec<Vec<f64>>,
    status: SolveStatus,
}

fn state_norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn max_abs(y: &[f64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Explosion time from a least-squares line through `(t, 1/‖ψ‖)`.
fn extrapolate_blowup(t: &[f64], y: &[Vec<f64>], n_state: usize) -> f64 {
    let k = t.len().min(BLOWUP_FIT_POINTS);
    let ts = &t[t.len() - k..];
    let ws: Vec<f64> = y[y.len() - k..].iter().map(|v| 1.0 / state_norm(&v[..n_state])).collect();
    let t_last = *ts.last().unwrap();
    if k < 2 {
        return t_last;
    }
    let tm = ts.iter().sum::<f64>() / k as f64;
    let wm = ws.iter().sum::<f64>() / k as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, wi) in ts.iter().zip(&ws) {
        sxy += (ti - tm) * (wi - wm);
        sxx += (ti - tm) * (ti - tm);
    }
    if sxx == 0.0 || sxy >= 0.0 {
        return t_last;
    }
    let slope = sxy / sxx;
    let t_star = tm - wm / slope;
    t_star.max(t_last)
}

fn integrate<F>(rhs: F, y0: &[f64], n_state: usize, opts: &SolveOptions) -> Result<Raw>
where
    F: Fn(&[f64], &mut [f64]) -> bool,
{
    opts.validate()?;
    let dim = y0.len();
    let horizon = opts.horizon;
    let mut f0 = vec![0.0; dim];
    if !rhs(y0, &mut f0) || f0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("initial value {:?} outside the field's domain", &y0[..n_state])));
    }
    let mut stops: Vec<f64> = opts.t_eval.iter().copied().filter(|t| *t > 0.0 && *t < horizon).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(horizon);
    let mut next_stop = 0;

    let mut raw = Raw { t: vec![0.0], y: vec![y0.to_vec()], dy: vec![f0.clone()], status: SolveStatus::Completed };
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut f = f0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    let scale = |a: f64, b: f64| opts.atol + opts.rtol * a.abs().max(b.abs());
    let mut h = match opts.fixed_step {
        Some(h) => h,
        None => {
            let d0 = (0..dim).map(|i| (y[i] / scale(y[i], 0.0)).powi(2)).sum::<f64>().sqrt();
            let d1 = (0..dim).map(|i| (f[i] / scale(y[i], 0.0)).powi(2)).sum::<f64>().sqrt();
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(opts.max_step).max(opts.min_step)
        }
    };
    let mut quiet_steps = 0;
    let mut last_speed = f64::INFINITY;
    let mut steps = 0usize;

    loop {
        let target = stops[next_stop];
        if steps >= opts.max_steps {
            return Err(Error::Solver(format!("step budget of {} exhausted at t = {t}", opts.max_steps)));
        }
        steps += 1;
        let mut step = h.min(opts.max_step).min(target - t);
        if opts.fixed_step.is_some() {
            step = h.min(target - t);
        }
        let hits_stop = t + step >= target - 1e-14 * target.abs().max(1.0);
        if hits_stop {
            step = target - t;
        }

        // stages
        k[0].copy_from_slice(&f);
        let mut ok = true;
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + step * acc;
            }
            if !rhs(&stage, &mut k[s]) || k[s].iter().any(|v| !v.is_finite()) {
                ok = false;
                break;
            }
        }
        if ok {
            // stage 7 was evaluated at the 5th-order solution
            y_new.copy_from_slice(&stage);
            ok = y_new.iter().all(|v| v.is_finite());
        }
        if !ok {
            let fnorm = state_norm(&f[..n_state]);
            if opts.fixed_step.is_some() || step < opts.min_step || step * fnorm < opts.domain_margin {
                raw.status = SolveStatus::LeftDomain(t);
                break;
            }
            h = step * 0.25;
            continue;
        }

        let err = if opts.fixed_step.is_some() {
            0.0
        } else {
            let mut acc = 0.0;
            for i in 0..dim {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let r = step * e / scale(y[i], y_new[i]);
                acc += r * r;
            }
            (acc / dim as f64).sqrt()
        };

        // Near square-root points the elementary differentials dwarf the
        // solution's own derivatives and the embedded estimate misses the
        // error, so the step is also bounded by the local Lipschitz constant.
        let lipschitz = if opts.fixed_step.is_some() {
            0.0
        } else {
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..n_state {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(6) {
                    acc += A[5][j] * kj[i];
                }
                let s6 = y[i] + step * acc;
                num += (k[6][i] - k[5][i]).powi(2);
                den += (y_new[i] - s6).powi(2);
            }
            if den > 0.0 { (num / den).sqrt() } else { 0.0 }
        };
        if err <= 1.0 && step * lipschitz > LIPSCHITZ_STEP_BOUND && step > opts.min_step {
            h = (LIPSCHITZ_STEP_BOUND / lipschitz).max(opts.min_step);
            continue;
        }

        if err > 1.0 {
            let shrink = (0.9 * err.powf(-0.2)).max(0.2);
            h = step * shrink;
            if h < opts.min_step {
                let ys = &y[..n_state];
                let radial: f64 = ys.iter().zip(&f[..n_state]).map(|(a, b)| a * b).sum();
                raw.status = if radial > 0.0 && state_norm(ys) > 1.0 {
                    SolveStatus::BlowUp(extrapolate_blowup(&raw.t, &raw.y, n_state))
                } else {
                    SolveStatus::LeftDomain(t)
                };
                break;
            }
            continue;
        }

        // accept
        t = if hits_stop { target } else { t + step };
        y.copy_from_slice(&y_new);
        f.copy_from_slice(&k[6]);
        raw.t.push(t);
        raw.y.push(y.clone());
        raw.dy.push(f.clone());
        if hits_stop {
            next_stop += 1;
        }

        let ys = &y[..n_state];
        let norm = state_norm(ys);
        let radial: f64 = ys.iter().zip(&f[..n_state]).map(|(a, b)| a * b).sum();
        if norm > opts.blowup_threshold && radial > 0.0 {
            raw.status = SolveStatus::BlowUp(extrapolate_blowup(&raw.t, &raw.y, n_state));
            break;
        }

        // a growing derivative means the state is leaving a non-Lipschitz rest point
        let speed = max_abs(&f[..n_state]);
        if speed < opts.atol && speed <= last_speed {
            quiet_steps += 1;
        } else {
            quiet_steps = 0;
        }
        last_speed = speed;
        if quiet_steps >= EQUILIBRIUM_STEPS && next_stop < stops.len() {
            let t_eq = t;
            raw.status = SolveStatus::Equilibrium(t_eq);
            let mut dy_const = f.clone();
            dy_const[..n_state].iter_mut().for_each(|v| *v = 0.0);
            for &s in &stops[next_stop..] {
                let mut ys = y.clone();
                for i in n_state..dim {
                    ys[i] += (s - t_eq) * f[i];
                }
                raw.t.push(s);
                raw.y.push(ys);
                raw.dy.push(dy_const.clone());
            }
            break;
        }
        if quiet_steps >= EQUILIBRIUM_STEPS && next_stop == stops.len() {
            raw.status = SolveStatus::Equilibrium(t);
        }

        if next_stop == stops.len() {
            break;
        }

        if opts.fixed_step.is_none() {
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (step * grow).min(opts.max_step);
            if lipschitz > 0.0 {
                h = h.min(LIPSCHITZ_STEP_BOUND / lipschitz);
            }
            if hits_stop {
                // the stop may have truncated the step
                h = h.max(step);
            }
        }
    }
    Ok(raw)
}

impl Raw {
    fn into_solution(self, n_state: usize, with_phi: bool) -> RiccatiSolution {
        let psi = self.y.iter().map(|v| v[..n_state].to_vec()).collect();
        let dpsi = self.dy.iter().map(|v| v[..n_state].to_vec()).collect();
        let (phi, dphi) = if with_phi {
            (self.y.iter().map(|v| v[n_state]).collect(), self.dy.iter().map(|v| v[n_state]).collect())
        } else {
            (Vec::new(), Vec::new())
        };
        RiccatiSolution { grid: self.t, psi, phi, status: self.status, dpsi, dphi }
    }
}

fn check_start(model: &AffineModel, u0: &[f64]) -> Result<()> {
    check_dim(model.d(), u0.len())?;
    if !model.in_domain(u0) {
        return Err(Error::Domain(format!("{u0:?} ∉ 𝒴")));
    }
    Ok(())
}

/// Solves `∂ψ = R(ψ)`, `∂φ = F(ψ)` from `ψ(0) = u0`, `φ(0) = 0`.
pub fn solve_riccati(model: &AffineModel, u0: &[f64], opts: &SolveOptions) -> Result<RiccatiSolution> {
    solve_tilted(model, 0.0, &vec![0.0; model.d()], u0, opts)
}

/// Solves the discounted system `∂ψ = R(ψ) - λ`, `∂φ = F(ψ) - l`.
pub fn solve_tilted(
    model: &AffineModel,
    l: f64,
    lambda: &[f64],
    u0: &[f64],
    opts: &SolveOptions,
) -> Result<RiccatiSolution> {
    check_start(model, u0)?;
    check_dim(model.d(), lambda.len())?;
    let d = model.d();
    let rhs = |y: &[f64], dy: &mut [f64]| -> bool {
        let u = &y[..d];
        if !model.admits(u) {
            return false;
        }
        model.eval_r_into(u, &mut dy[..d]);
        for (r, lam) in dy[..d].iter_mut().zip(lambda) {
            *r -= lam;
        }
        dy[d] = model.eval_f_unchecked(u) - l;
        true
    };
    let mut y0 = u0.to_vec();
    y0.push(0.0);
    Ok(integrate(rhs, &y0, d, opts)?.into_solution(d, true))
}

/// Complex-mode solve for characteristic functions; `Re u0` must lie in `𝒴`.
pub fn solve_riccati_complex(
    model: &AffineModel,
    u0: &[Complex64],
    opts: &SolveOptions,
) -> Result<CharacteristicSolution> {
    check_dim(model.d(), u0.len())?;
    let d = model.d();
    let re: Vec<f64> = u0.iter().map(|z| z.re).collect();
    check_start(model, &re)?;
    let rhs = |y: &[f64], dy: &mut [f64]| -> bool {
        let re: Vec<f64> = y[..d].to_vec();
        if !model.admits(&re) {
            return false;
        }
        let u: Vec<Complex64> = (0..d).map(|j| Complex64::new(y[j], y[d + j])).collect();
        let mut r = vec![Complex64::new(0.0, 0.0); d];
        model.eval_r_complex_into(&u, &mut r);
        for j in 0..d {
            dy[j] = r[j].re;
            dy[d + j] = r[j].im;
        }
        let fv = model.eval_f_complex_unchecked(&u);
        dy[2 * d] = fv.re;
        dy[2 * d + 1] = fv.im;
        true
    };
    let mut y0: Vec<f64> = u0.iter().map(|z| z.re).collect();
    y0.extend(u0.iter().map(|z| z.im));
    y0.extend([0.0, 0.0]);
    let raw = integrate(rhs, &y0, 2 * d, opts)?;
    Ok(CharacteristicSolution {
        psi: raw.y.iter().map(|v| (0..d).map(|j| Complex64::new(v[j], v[d + j])).collect()).collect(),
        phi: raw.y.iter().map(|v| Complex64::new(v[2 * d], v[2 * d + 1])).collect(),
        grid: raw.t,
        status: raw.status,
    })
}

/// Integrates an arbitrary vector field with the Riccati stepper.
pub fn solve_field(field: &dyn VectorField, g0: &[f64], opts: &SolveOptions) -> Result<RiccatiSolution> {
    check_dim(field.dim(), g0.len())?;
    let rhs = |y: &[f64], dy: &mut [f64]| field.eval(y, dy).is_ok();
    Ok(integrate(rhs, g0, g0.len(), opts)?.into_solution(g0.len(), false))
}

/// Solves the reduced equation `∂g = R_I(g, 0)`.
pub fn solve_reduced(model: &AffineModel, g0: &[f64], opts: &SolveOptions) -> Result<RiccatiSolution> {
    check_dim(model.m(), g0.len())?;
    let mut u = g0.to_vec();
    u.resize(model.d(), 0.0);
    check_start(model, &u)?;
    solve_field(&ReducedModelField { model }, g0, opts)
}

/// `exp(β_JJᵀ t) u_J`.
pub fn psi_j_flow(model: &AffineModel, t: f64, u_j: &[f64]) -> Result<Vec<f64>> {
    let n = model.n();
    check_dim(n, u_j.len())?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mat = DMatrix::from_fn(n, n, |i, j| model.beta_jj[j][i] * t);
    let out = mat.exp() * DVector::from_column_slice(u_j);
    Ok(out.iter().copied().collect())
}

/// Estimated explosion time of `ψ(·, u0)` within `[0, t_max]`.
pub fn blowup_time(model: &AffineModel, u0: &[f64], t_max: f64, opts: &SolveOptions) -> Result<Option<f64>> {
    let opts = SolveOptions { horizon: t_max, t_eval: Vec::new(), ..opts.clone() };
    let sol = solve_riccati(model, u0, &opts)?;
    Ok(match sol.status {
        SolveStatus::BlowUp(t) => Some(t),
        _ => None,
    })
}

/// Smallest solution of the discounted system from `u0`.
///
/// Away from equilibria this is the ordinary solution. When `u0` is an
/// equilibrium of `R - λ` the solver would stay put, so solutions started
/// slightly below `u0` on `I` are computed for two nudge sizes four decades
/// apart. A second branch shows up as a departure that does not shrink with
/// the nudge; a Lipschitz field only amplifies the nudge, so its departure
/// scales with it and the equilibrium is kept.
pub fn solve_minimal(
    model: &AffineModel,
    l: f64,
    lambda: &[f64],
    u0: &[f64],
    opts: &SolveOptions,
) -> Result<RiccatiSolution> {
    let sol = solve_tilted(model, l, lambda, u0, opts)?;
    let m = model.m();
    if m == 0 {
        return Ok(sol);
    }
    let r0 = model.eval_r(u0)?;
    if r0[..m].iter().zip(lambda).any(|(r, lam)| (r - lam).abs() > opts.atol) {
        return Ok(sol);
    }
    let nudged = |scale: f64| -> Result<Option<(RiccatiSolution, f64)>> {
        let mut below = u0.to_vec();
        let mut nudge: f64 = 0.0;
        for v in below[..m].iter_mut() {
            let dv = scale * (64.0 * f64::EPSILON * v.abs()).max(1e-20);
            nudge = nudge.max(dv);
            *v -= dv;
        }
        if !model.in_domain(&below) {
            return Ok(None);
        }
        let low = solve_tilted(model, l, lambda, &below, opts)?;
        let dev = low
            .psi
            .iter()
            .map(|p| p[..m].iter().zip(u0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        Ok(Some((low, dev / nudge)))
    };
    let (Some((mut low, gain_small)), Some((_, gain_big))) = (nudged(1.0)?, nudged(1e4)?) else {
        return Ok(sol);
    };
    // departure in units of the nudge: a genuine branch gains ~1e4 more from the small one
    if gain_small > 1e3 * gain_big.max(1e-300) && gain_small > 1e6 {
        // report the exact initial condition on the lower branch
        low.psi[0] = u0.to_vec();
        Ok(low)
    } else {
        Ok(sol)
    }
}
