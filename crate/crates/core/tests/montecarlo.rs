//! Statistical checks of the simulator against moment ODEs and Riccati output.

use affine_riccati::builtin;
use affine_riccati::esscher::TiltSpec;
use affine_riccati::levy::{JumpLaw, LevyMeasure};
use affine_riccati::model::{AffineModel, StateShape};
use affine_riccati::montecarlo::{
    affine_formula_check, estimate_exp_moment, estimate_mean, martingale_gap, simulate_paths, SimOptions,
};
use affine_riccati::riccati::{solve_riccati, SolveOptions};

const NPATHS: usize = 100_000;

#[test]
fn cir_mean_matches_moment_ode() {
    let model = builtin::feller();
    let opts = SimOptions::new(vec![1.0], 1.0, NPATHS, 11);
    let est = estimate_mean(&simulate_paths(&model, &opts).unwrap())[0];
    // E' = b + βE
    let exact = (-1.0f64).exp() + 0.5 * (1.0 - (-1.0f64).exp());
    let z = (est.mean - exact) / est.stderr;
    assert!(z.abs() <= 3.0, "mean {} ± {} vs {exact}: z = {z}", est.mean, est.stderr);
}

/// `d/du (φ(T,u) + ψ(T,u) x0)` at 0 by central differences.
fn riccati_first_moment(model: &AffineModel, x0: f64, horizon: f64) -> f64 {
    let h = 1e-4;
    let log_mgf = |u: f64| {
        let sol = solve_riccati(model, &[u], &SolveOptions::with_horizon(horizon)).unwrap();
        sol.phi_end() + sol.psi_end()[0] * x0
    };
    (log_mgf(h) - log_mgf(-h)) / (2.0 * h)
}

#[test]
fn kr2014_mean_matches_riccati_first_moment() {
    let model = builtin::kr2014();
    let exact = riccati_first_moment(&model, 1.0, 2.0);
    // E[X_t] = x0 e^{-t/2} for this model
    assert!((exact - (-1.0f64).exp()).abs() < 1e-6, "{exact}");
    let mut opts = SimOptions::new(vec![1.0], 2.0, NPATHS, 5);
    opts.dt = 0.01;
    let est = estimate_mean(&simulate_paths(&model, &opts).unwrap())[0];
    let z = (est.mean - exact) / est.stderr;
    assert!(z.abs() <= 3.0, "mean {} ± {} vs {exact}: z = {z}", est.mean, est.stderr);
}

#[test]
fn halving_dt_moves_cir_estimate_less_than_one_stderr() {
    let model = builtin::feller();
    let mut coarse = SimOptions::new(vec![1.0], 1.0, NPATHS, 3);
    coarse.dt = 0.01;
    coarse.brownian_refinement = 1;
    let fine = SimOptions { dt: 0.005, brownian_refinement: 0, ..coarse.clone() };
    let a = estimate_exp_moment(&simulate_paths(&model, &coarse).unwrap(), &[-0.5]);
    let b = estimate_exp_moment(&simulate_paths(&model, &fine).unwrap(), &[-0.5]);
    assert!((a.mean - b.mean).abs() < b.stderr, "{a:?} vs {b:?}");
}

#[test]
fn truncation_level_moves_kr2014_mean_less_than_one_stderr() {
    let model = builtin::kr2014();
    let mut loose = SimOptions::new(vec![1.0], 2.0, NPATHS, 6);
    loose.dt = 0.01;
    loose.jump_trunc = 1e-3;
    let tight = SimOptions { jump_trunc: 1e-4, ..loose.clone() };
    let a = estimate_mean(&simulate_paths(&model, &loose).unwrap())[0];
    let b = estimate_mean(&simulate_paths(&model, &tight).unwrap())[0];
    assert!((a.mean - b.mean).abs() < b.stderr, "{a:?} vs {b:?}");
}

#[test]
fn pure_levy_formula_holds() {
    let mut model = AffineModel::zero(StateShape::new(0, 1).unwrap());
    model.a = vec![vec![0.2]];
    model.b = vec![0.3];
    model.mu0 = LevyMeasure::new(JumpLaw::CompoundExponential { intensity: 2.0, rate: 3.0 }, vec![1.0]);
    let mut opts = SimOptions::new(vec![0.5], 1.0, 20_000, 2);
    opts.dt = 0.05;
    for u in [-1.0, 0.5] {
        let check = affine_formula_check(&model, &opts, &[u]).unwrap();
        // ψ ≡ u, so the analytic side is e^{T F(u) + u x0}
        let expect = (model.eval_f(&[u]).unwrap() + u * 0.5).exp();
        assert!((check.analytic.unwrap() - expect).abs() < 1e-10 * expect);
        assert!(!check.flagged(), "{}", check.report());
    }
}

#[test]
fn zero_tilt_has_no_gap() {
    let model = builtin::kr2014();
    let mut opts = SimOptions::new(vec![1.0], 1.0, 500, 1);
    opts.dt = 0.01;
    let gap = martingale_gap(&model, &TiltSpec::new(vec![0.0], 0.0, vec![0.0]), &opts).unwrap();
    assert_eq!(gap.estimate.mean, 1.0);
    assert_eq!(gap.estimate.stderr, 0.0);
    assert_eq!(gap.predicted, Some(1.0));
    assert!(!gap.excludes_martingale());
}

#[test]
fn cir_tilt_is_a_true_martingale_in_simulation() {
    let model = builtin::feller();
    let spec = TiltSpec::auto_discount(&model, vec![0.5]).unwrap();
    let mut opts = SimOptions::new(vec![1.0], 1.0, 20_000, 8);
    opts.dt = 0.005;
    let gap = martingale_gap(&model, &spec, &opts).unwrap();
    assert!(!gap.excludes_martingale(), "{}", gap.report());
    assert!((gap.predicted.unwrap() - 0.5f64.exp()).abs() < 1e-9);
}
