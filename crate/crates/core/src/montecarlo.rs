//! Monte Carlo simulation of affine jump-diffusions on `R_+^m × R^n` and
//! statistical checks of the affine transform formula.
//!
//! The scheme is a full-truncation Euler step: coefficients see `x⁺` on the
//! nonnegative block and the state is projected back onto `D` after every
//! step. Jumps from `μ₀` arrive at constant rate and jumps from `μ_i` at
//! rate `X_{i,t-} μ_i(band)`, frozen at the left end of the step. Jumps of
//! infinite-activity laws below `jump_trunc` are replaced by their mean.
//!
//! Every random draw comes from a generator keyed by
//! `(seed, path, slot, purpose)`, so results do not depend on thread count or
//! scheduling, and the Brownian increments of a run with step `dt` and
//! refinement `r` coincide with those of a run with step `dt / 2^r`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::esscher::{tilt_model, TiltSpec, IDENTITY_TOL};
use crate::levy::{JumpLaw, LevyMeasure, Truncation};
use crate::model::AffineModel;
use crate::quad::{integrate, integrate_semi_infinite, QuadOptions};
use crate::riccati::{solve_minimal, solve_riccati, SolveOptions, SolveStatus};

/// Paths with a coordinate beyond this magnitude are flagged exploded.
pub const EXPLOSION_LEVEL: f64 = 1e12;

/// Width, in standard errors, of the interval used by [`martingale_gap`].
pub const GAP_CI_SIGMAS: f64 = 4.0;

/// `|z|` above this is flagged by [`affine_formula_check`].
pub const Z_FLAG: f64 = 3.0;

const MAX_REFINEMENT: u32 = 16;
/// Expected jumps per slot above which a band is aggregated.
const AGGREGATE_COUNT: f64 = 1e4;
const PURPOSE_BROWNIAN: u64 = 0;
const PURPOSE_KILLING: u64 = 1;
const PURPOSE_JUMPS: u64 = 2;
const BANDS_PER_SOURCE: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub x0: Vec<f64>,
    pub horizon: f64,
    /// Requested Euler step; the actual step is `horizon / ceil(horizon / dt)`.
    pub dt: f64,
    pub npaths: usize,
    pub seed: u64,
    /// Jumps of infinite-activity laws with `‖ξ‖` below this are replaced by drift.
    pub jump_trunc: f64,
    /// Each Euler step draws its noise on `2^brownian_refinement` sub-slots.
    pub brownian_refinement: u32,
    /// Keep every path on the whole grid instead of only its endpoints.
    pub record_paths: bool,
}

impl SimOptions {
    pub fn new(x0: Vec<f64>, horizon: f64, npaths: usize, seed: u64) -> Self {
        Self {
            x0,
            horizon,
            dt: 1e-3,
            npaths,
            seed,
            jump_trunc: 1e-4,
            brownian_refinement: 0,
            record_paths: false,
        }
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn validate(&self, model: &AffineModel) -> Result<()> {
        check_dim(model.d(), self.x0.len())?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {}", self.horizon)));
        }
        if self.npaths == 0 {
            return Err(Error::Config("npaths must be ≥ 1".into()));
        }
        if !(self.jump_trunc > 0.0 && self.jump_trunc <= 1.0) {
            return Err(Error::Config(format!("jump_trunc must lie in (0, 1], got {}", self.jump_trunc)));
        }
        if self.brownian_refinement > MAX_REFINEMENT {
            return Err(Error::Config(format!("brownian_refinement must be ≤ {MAX_REFINEMENT}")));
        }
        if !model.shape.contains(&self.x0) {
            return Err(Error::Config(format!("x0 = {:?} is not in the state space", self.x0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathFate {
    Survived,
    /// Sent to the cemetery by the killing rate.
    Killed,
    /// Left every bounded set; the stored state is the last finite one.
    Exploded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    /// Recorded times: the full grid, or `[0, T]`.
    pub grid: Vec<f64>,
    /// `states[p][k]` is path `p` at `grid[k]`.
    pub states: Vec<Vec<Vec<f64>>>,
    /// Trapezoid approximation of `∫_0^T X_s ds` per path.
    pub integrals: Vec<Vec<f64>>,
    pub fates: Vec<PathFate>,
}

impl PathEnsemble {
    pub fn npaths(&self) -> usize {
        self.fates.len()
    }

    pub fn terminal(&self, p: usize) -> &[f64] {
        self.states[p].last().expect("nonempty path")
    }

    pub fn exploded_fraction(&self) -> f64 {
        let k = self.fates.iter().filter(|f| **f == PathFate::Exploded).count();
        k as f64 / self.npaths() as f64
    }

    /// `path,T,X_1..X_d,survived` with the terminal state of every path.
    pub fn summary_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s[0].len());
        let mut out = String::from("path,T");
        for j in 1..=d {
            let _ = write!(out, ",X_{j}");
        }
        out.push_str(",survived\n");
        for p in 0..self.npaths() {
            let _ = write!(out, "{p},{:.16e}", self.horizon);
            for x in self.terminal(p) {
                let _ = write!(out, ",{x:.16e}");
            }
            let _ = writeln!(out, ",{}", u8::from(self.fates[p] == PathFate::Survived));
        }
        out
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.summary_csv())?;
        Ok(())
    }
}

/// Key mixing for the per-draw generators.
fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn substream(seed: u64, path: u64, slot: u64, purpose: u64) -> Xoshiro256PlusPlus {
    let key = mix(mix(mix(mix(seed) ^ path) ^ slot) ^ purpose);
    Xoshiro256PlusPlus::seed_from_u64(key)
}

/// Poisson count by inversion of one uniform, so nearby rates give the
/// same count; large rates fall back to a library sampler.
fn poisson_count<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda >= 30.0 {
        return Poisson::new(lambda).map_or(0, |p| p.sample(rng) as u64);
    }
    let u: f64 = rng.random();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf && k < 1000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

#[derive(Debug, Clone)]
struct Band {
    lo: f64,
    hi: f64,
    mass: f64,
    /// `∫ s ν(ds)` and `∫ s² ν(ds)` over the band; the latter may be `+∞`.
    moments: (f64, f64),
    purpose: u64,
}

impl Band {
    fn new(law: &JumpLaw, lo: f64, hi: f64, purpose: u64) -> Self {
        Self { lo, hi, mass: law.band_mass(lo, hi), moments: band_moments(law, lo, hi), purpose }
    }
}

fn band_moments(law: &JumpLaw, lo: f64, hi: f64) -> (f64, f64) {
    match *law {
        JumpLaw::Zero => (0.0, 0.0),
        JumpLaw::PointMass { intensity, size } => {
            if size >= lo && size < hi {
                (intensity * size, intensity * size * size)
            } else {
                (0.0, 0.0)
            }
        }
        JumpLaw::TemperedStable { rate, .. } if rate == 0.0 && hi.is_infinite() => {
            (f64::INFINITY, f64::INFINITY)
        }
        _ => {
            let opts = QuadOptions::default();
            let moment = |k: i32| {
                let f = |s: f64| law.density_parts(s).map_or(0.0, |(g, p)| g * s.powf(p) * s.powi(k));
                if hi.is_finite() {
                    integrate(f, lo, hi, &opts).value
                } else {
                    integrate_semi_infinite(f, lo, &opts).value
                }
            };
            (moment(1), moment(2))
        }
    }
}

#[derive(Debug, Clone)]
struct JumpSource {
    law: JumpLaw,
    direction: Vec<f64>,
    /// `None` for `μ₀`, `Some(i)` for `μ_i`.
    owner: Option<usize>,
    bands: Vec<Band>,
}

impl JumpSource {
    /// Bands in `s` with decade edges fixed in absolute terms, so runs with
    /// different truncation levels share the draws of their common bands.
    fn build(mu: &LevyMeasure, owner: Option<usize>, index: u64, jump_trunc: f64) -> (Self, f64) {
        let law = mu.law().clone();
        let base = PURPOSE_JUMPS + index * BANDS_PER_SOURCE;
        let mut bands = Vec::new();
        let small;
        if law.finite_activity() {
            small = 0.0;
            bands.push(Band::new(&law, 0.0, f64::INFINITY, base));
        } else {
            let cut = jump_trunc / mu.direction_norm();
            small = law.small_jump_mean(cut);
            bands.push(Band::new(&law, 1.0, f64::INFINITY, base));
            let mut k = 0i32;
            loop {
                let hi = 10f64.powi(-k);
                if hi <= cut {
                    break;
                }
                let lo = 10f64.powi(-k - 1).max(cut);
                bands.push(Band::new(&law, lo, hi, base + 1 + k as u64));
                k += 1;
            }
        }
        bands.retain(|b| b.mass > 0.0);
        (Self { law, direction: mu.direction().to_vec(), owner, bands }, small)
    }
}

/// Sum of the band's jumps over one slot with `lam` expected jumps.
///
/// Very busy bands are aggregated by a normal approximation; for a heavy
/// stable tail only the jumps below the exactly sampled largest one are.
fn band_jump<R: Rng>(law: &JumpLaw, band: &Band, lam: f64, exposure: f64, rng: &mut R) -> f64 {
    let normal = |m1: f64, m2: f64, rng: &mut R| {
        let g: f64 = rng.sample(StandardNormal);
        (exposure * m1 + g * (exposure * m2).sqrt()).max(0.0)
    };
    if lam > AGGREGATE_COUNT {
        if band.moments.1.is_finite() {
            return normal(band.moments.0, band.moments.1, rng);
        }
        if let JumpLaw::TemperedStable { scale, index, .. } = *law {
            // exact largest jump, then the rest of the band below it
            let u: f64 = rng.random();
            let top = band.lo * (lam / -u.ln()).powf(1.0 / index);
            if top > EXPLOSION_LEVEL {
                return top;
            }
            let m1 = scale * (top.powf(1.0 - index) - band.lo.powf(1.0 - index)) / (1.0 - index);
            let m2 = scale * (top.powf(2.0 - index) - band.lo.powf(2.0 - index)) / (2.0 - index);
            return top + normal(m1, m2, rng);
        }
    }
    let mut total = 0.0;
    for _ in 0..poisson_count(lam, rng) {
        total += law.sample_band(band.lo, band.hi, rng);
        if total > EXPLOSION_LEVEL {
            break;
        }
    }
    total
}

/// Everything per-step that does not depend on the path.
struct Scheme {
    m: usize,
    d: usize,
    steps: usize,
    h: f64,
    slots: usize,
    seed: u64,
    const_drift: Vec<f64>,
    lin_drift: Vec<Vec<f64>>,
    beta_jj: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    c: f64,
    /// Lower factor of the `J`-block covariance `2a_JJ`.
    root_jj: Vec<Vec<f64>>,
    sources: Vec<JumpSource>,
}

impl Scheme {
    fn new(model: &AffineModel, opts: &SimOptions) -> Self {
        let (m, d, n) = (model.m(), model.d(), model.n());
        let steps = opts.steps();
        let mut const_drift = model.b.clone();
        let mut sources = Vec::new();
        let mut push_source = |mu: &LevyMeasure, owner: Option<usize>, drift: &mut [f64], trunc: Truncation| {
            if mu.is_zero() {
                return;
            }
            for (x, t) in drift.iter_mut().zip(mu.truncation_mean(m, trunc)) {
                *x -= t;
            }
            let (src, small) = JumpSource::build(mu, owner, sources.len() as u64, opts.jump_trunc);
            for (x, e) in drift.iter_mut().zip(mu.direction()) {
                *x += small * e;
            }
            sources.push(src);
        };
        push_source(&model.mu0, None, &mut const_drift, Truncation::Constant);
        let mut lin_drift = Vec::with_capacity(m);
        for (i, p) in model.linear.iter().enumerate() {
            let mut drift = p.beta.clone();
            push_source(&p.mu, Some(i), &mut drift, Truncation::Linear(i));
            lin_drift.push(drift);
        }
        let cov = DMatrix::from_fn(n, n, |i, j| 2.0 * model.a[m + i][m + j]);
        let root_jj = if n > 0 {
            let eig = SymmetricEigen::new(cov);
            let sq = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
            let r = &eig.eigenvectors * sq;
            (0..n).map(|i| (0..n).map(|j| r[(i, j)]).collect()).collect()
        } else {
            Vec::new()
        };
        Self {
            m,
            d,
            steps,
            h: opts.horizon / steps as f64,
            slots: 1 << opts.brownian_refinement,
            seed: opts.seed,
            const_drift,
            lin_drift,
            beta_jj: model.beta_jj.clone(),
            alpha: model.linear.iter().map(|p| p.alpha).collect(),
            gamma: model.linear.iter().map(|p| p.gamma).collect(),
            c: model.c,
            root_jj,
            sources,
        }
    }

    fn run_path(&self, path: u64, x0: &[f64], record: bool) -> (Vec<Vec<f64>>, Vec<f64>, PathFate) {
        let (m, d, h) = (self.m, self.d, self.h);
        let sub_h = h / self.slots as f64;
        let mut x = x0.to_vec();
        let mut next = vec![0.0; d];
        let mut z = vec![0.0; d];
        let mut integral = vec![0.0; d];
        let mut states = vec![x.clone()];
        let mut fate = PathFate::Survived;
        for step in 0..self.steps {
            let first_slot = (step * self.slots) as u64;
            // drift at x⁺ (x is kept in D, so x⁺ = x)
            next.copy_from_slice(&x);
            for j in 0..d {
                let mut drift = self.const_drift[j];
                for i in 0..m {
                    drift += x[i] * self.lin_drift[i][j];
                }
                if j >= m {
                    drift += (m..d).map(|k| self.beta_jj[j - m][k - m] * x[k]).sum::<f64>();
                }
                next[j] += drift * h;
            }
            z.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..self.slots as u64 {
                let mut rng = substream(self.seed, path, first_slot + s, PURPOSE_BROWNIAN);
                for v in z.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *v += g * sub_h.sqrt();
                }
            }
            for i in 0..m {
                next[i] += (2.0 * self.alpha[i] * x[i]).sqrt() * z[i];
            }
            for (r, row) in self.root_jj.iter().enumerate() {
                next[m + r] += row.iter().zip(&z[m..]).map(|(a, b)| a * b).sum::<f64>();
            }
            for src in &self.sources {
                let scale = match src.owner {
                    None => 1.0,
                    Some(i) => x[i],
                };
                if scale <= 0.0 {
                    continue;
                }
                for band in &src.bands {
                    let lam = scale * band.mass * sub_h;
                    for s in 0..self.slots as u64 {
                        let mut rng = substream(self.seed, path, first_slot + s, band.purpose);
                        let total = band_jump(&src.law, band, lam, scale * sub_h, &mut rng);
                        for (y, e) in next.iter_mut().zip(&src.direction) {
                            *y += total * e;
                        }
                    }
                }
            }
            let kill_rate = self.c + self.gamma.iter().zip(&x).map(|(g, v)| g * v).sum::<f64>();
            if kill_rate > 0.0 {
                let mut rng = substream(self.seed, path, first_slot, PURPOSE_KILLING);
                let u: f64 = rng.random();
                if u < -(-kill_rate * h).exp_m1() {
                    fate = PathFate::Killed;
                }
            }
            for v in next[..m].iter_mut() {
                *v = v.max(0.0);
            }
            if next.iter().any(|v| !v.is_finite() || v.abs() > EXPLOSION_LEVEL) {
                fate = PathFate::Exploded;
            } else {
                for j in 0..d {
                    integral[j] += 0.5 * h * (x[j] + next[j]);
                }
                x.copy_from_slice(&next);
            }
            if record {
                states.push(x.clone());
            }
            if fate != PathFate::Survived {
                break;
            }
        }
        if record {
            states.resize(self.steps + 1, x.clone());
        } else {
            states.push(x);
        }
        (states, integral, fate)
    }
}

/// Simulates `opts.npaths` independent paths from `opts.x0` up to `opts.horizon`.
pub fn simulate_paths(model: &AffineModel, opts: &SimOptions) -> Result<PathEnsemble> {
    let report = model.validate();
    if !report.is_ok() {
        return Err(Error::Config(format!("invalid model: {report}")));
    }
    opts.validate(model)?;
    let scheme = Scheme::new(model, opts);
    let runs: Vec<_> = (0..opts.npaths)
        .into_par_iter()
        .map(|p| scheme.run_path(p as u64, &opts.x0, opts.record_paths))
        .collect();
    let grid = if opts.record_paths {
        (0..=scheme.steps).map(|k| k as f64 * scheme.h).collect()
    } else {
        vec![0.0, opts.horizon]
    };
    let mut states = Vec::with_capacity(runs.len());
    let mut integrals = Vec::with_capacity(runs.len());
    let mut fates = Vec::with_capacity(runs.len());
    for (s, i, f) in runs {
        states.push(s);
        integrals.push(i);
        fates.push(f);
    }
    Ok(PathEnsemble { seed: opts.seed, horizon: opts.horizon, dt: scheme.h, grid, states, integrals, fates })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub exploded_fraction: f64,
}

impl Estimate {
    /// Exploded paths count as `+∞`, so the mean over the rest is only a lower bound.
    pub fn is_lower_bound(&self) -> bool {
        self.exploded_fraction > 0.0
    }

    fn from_samples(values: &[f64], exploded_fraction: f64) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, exploded_fraction };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, exploded_fraction }
    }
}

/// Mean of `f(p)` over non-exploded paths; killed paths contribute 0.
fn estimate_with<F: Fn(usize) -> f64 + Sync>(ens: &PathEnsemble, f: F) -> Estimate {
    let values: Vec<f64> = (0..ens.npaths())
        .into_par_iter()
        .filter_map(|p| match ens.fates[p] {
            PathFate::Survived => Some(f(p)),
            PathFate::Killed => Some(0.0),
            PathFate::Exploded => None,
        })
        .collect();
    Estimate::from_samples(&values, ens.exploded_fraction())
}

/// Sample mean and standard error of `e^{⟨u, X_T⟩}`.
pub fn estimate_exp_moment(ens: &PathEnsemble, u: &[f64]) -> Estimate {
    estimate_with(ens, |p| ens.terminal(p).iter().zip(u).map(|(x, u)| x * u).sum::<f64>().exp())
}

/// Sample mean and standard error of `X_T`, coordinate by coordinate.
pub fn estimate_mean(ens: &PathEnsemble) -> Vec<Estimate> {
    let d = ens.terminal(0).len();
    (0..d).map(|j| estimate_with(ens, |p| ens.terminal(p)[j])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaCheck {
    pub u: Vec<f64>,
    pub status: SolveStatus,
    /// `None` when the solver did not reach `T`.
    pub estimate: Option<Estimate>,
    pub analytic: Option<f64>,
    pub z: Option<f64>,
}

impl FormulaCheck {
    pub fn applicable(&self) -> bool {
        self.analytic.is_some()
    }

    pub fn flagged(&self) -> bool {
        self.z.is_some_and(|z| !(z.abs() <= Z_FLAG))
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "u: {}", fmt_vec(&self.u));
        let _ = writeln!(out, "solver_status: {}", self.status);
        match (&self.estimate, self.analytic, self.z) {
            (Some(e), Some(a), Some(z)) => {
                let _ = writeln!(out, "mc_mean: {:.16e}", e.mean);
                let _ = writeln!(out, "mc_stderr: {:.16e}", e.stderr);
                let _ = writeln!(out, "exploded_fraction: {:.16e}", e.exploded_fraction);
                let _ = writeln!(out, "lower_bound: {}", e.is_lower_bound());
                let _ = writeln!(out, "analytic: {a:.16e}");
                let _ = writeln!(out, "z: {z:.16e}");
                let _ = writeln!(out, "flagged: {}", self.flagged());
            }
            _ => {
                let _ = writeln!(out, "result: formula not applicable at this (u,T)");
            }
        }
        out
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}

fn z_score(mean: f64, target: f64, stderr: f64) -> f64 {
    let diff = mean - target;
    if diff == 0.0 {
        0.0
    } else {
        diff / stderr
    }
}

/// Compares the Monte Carlo estimate of `E[e^{⟨u, X_T⟩}]` with
/// `exp(φ(T, u) + ⟨ψ(T, u), x0⟩)` from the Riccati solver.
pub fn affine_formula_check(model: &AffineModel, opts: &SimOptions, u: &[f64]) -> Result<FormulaCheck> {
    check_dim(model.d(), u.len())?;
    let sol = solve_riccati(model, u, &SolveOptions::with_horizon(opts.horizon))?;
    if !sol.status.reached_horizon() {
        return Ok(FormulaCheck { u: u.to_vec(), status: sol.status, estimate: None, analytic: None, z: None });
    }
    let analytic = (sol.phi_end() + sol.psi_end().iter().zip(&opts.x0).map(|(p, x)| p * x).sum::<f64>()).exp();
    let ens = simulate_paths(model, opts)?;
    let est = estimate_exp_moment(&ens, u);
    Ok(FormulaCheck {
        u: u.to_vec(),
        status: sol.status,
        estimate: Some(est),
        analytic: Some(analytic),
        z: Some(z_score(est.mean, analytic, est.stderr)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleGap {
    pub estimate: Estimate,
    /// `e^{⟨θ, x0⟩}`: the mean of a true martingale.
    pub martingale_value: f64,
    /// `exp(φ(T) + ⟨ψ(T), x0⟩)` from the minimal discounted Riccati solution.
    pub predicted: Option<f64>,
    pub solver_status: SolveStatus,
}

impl MartingaleGap {
    /// Whether `mean ± GAP_CI_SIGMAS · stderr` excludes `e^{⟨θ, x0⟩}`.
    pub fn excludes_martingale(&self) -> bool {
        (self.estimate.mean - self.martingale_value).abs() > GAP_CI_SIGMAS * self.estimate.stderr
    }

    pub fn contains_prediction(&self) -> Option<bool> {
        self.predicted.map(|p| (self.estimate.mean - p).abs() <= GAP_CI_SIGMAS * self.estimate.stderr)
    }

    pub fn report(&self) -> String {
        let e = &self.estimate;
        let mut out = String::new();
        let _ = writeln!(out, "mean: {:.16e}", e.mean);
        let _ = writeln!(out, "stderr: {:.16e}", e.stderr);
        let _ = writeln!(out, "exploded_fraction: {:.16e}", e.exploded_fraction);
        let _ = writeln!(out, "lower_bound: {}", e.is_lower_bound());
        let _ = writeln!(out, "martingale_value: {:.16e}", self.martingale_value);
        let _ = writeln!(out, "z_martingale: {:.16e}", z_score(e.mean, self.martingale_value, e.stderr));
        let _ = writeln!(out, "ci_sigmas: {GAP_CI_SIGMAS}");
        let _ = writeln!(out, "ci_excludes_martingale: {}", self.excludes_martingale());
        let _ = writeln!(out, "solver_status: {}", self.solver_status);
        match self.predicted {
            Some(p) => {
                let _ = writeln!(out, "predicted: {p:.16e}");
                let _ = writeln!(out, "z_predicted: {:.16e}", z_score(e.mean, p, e.stderr));
                let _ = writeln!(out, "ci_contains_predicted: {}", self.contains_prediction().unwrap_or(false));
            }
            None => {
                let _ = writeln!(out, "predicted: unavailable");
            }
        }
        out
    }
}

/// Estimates `E[S̃_T]` for `S̃_t = exp(-∫_0^t (l + ⟨λ, X_s⟩) ds + ⟨θ, X_t⟩)`
/// and compares it with the martingale value and the Riccati prediction.
pub fn martingale_gap(model: &AffineModel, spec: &TiltSpec, opts: &SimOptions) -> Result<MartingaleGap> {
    let d = model.d();
    check_dim(d, spec.theta.len())?;
    check_dim(d, spec.lambda.len())?;
    let ens = simulate_paths(model, opts)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let estimate = estimate_with(&ens, |p| {
        (dot(&spec.theta, ens.terminal(p)) - spec.l * opts.horizon - dot(&spec.lambda, &ens.integrals[p])).exp()
    });
    let sol = solve_minimal(model, spec.l, &spec.lambda, &spec.theta, &SolveOptions::with_horizon(opts.horizon))?;
    let predicted = sol.status.reached_horizon().then(|| (sol.phi_end() + dot(sol.psi_end(), &opts.x0)).exp());
    Ok(MartingaleGap {
        estimate,
        martingale_value: dot(&spec.theta, &opts.x0).exp(),
        predicted,
        solver_status: sol.status,
    })
}

/// Estimates `E[S̃_T]` as `e^{⟨θ, x0⟩} Q(ζ > T)`, where under `Q` the state
/// follows the Esscher-tilted model and `ζ` is its lifetime.
///
/// The estimator is bounded, so its standard error is meaningful even when
/// `S̃_T` itself has infinite variance. Requires `l = F(θ)` and `λ = R(θ)`.
pub fn tilted_survival(model: &AffineModel, spec: &TiltSpec, opts: &SimOptions) -> Result<Estimate> {
    let auto = TiltSpec::auto_discount(model, spec.theta.clone())?;
    let close = |a: f64, b: f64| (a - b).abs() <= IDENTITY_TOL * (1.0 + a.abs().max(b.abs()));
    if !close(auto.l, spec.l) || auto.lambda.iter().zip(&spec.lambda).any(|(a, b)| !close(*a, *b)) {
        return Err(Error::Config("tilted survival needs l = F(θ) and λ = R(θ)".into()));
    }
    let tilted = tilt_model(model, &spec.theta)?;
    let ens = simulate_paths(&tilted, opts)?;
    let scale = spec.theta.iter().zip(&opts.x0).map(|(t, x)| t * x).sum::<f64>().exp();
    let values: Vec<f64> =
        ens.fates.iter().map(|f| if *f == PathFate::Survived { scale } else { 0.0 }).collect();
    Ok(Estimate::from_samples(&values, 0.0))
}
