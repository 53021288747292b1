#![allow(dead_code)]

use affine_riccati::builtin;
use affine_riccati::model::AffineModel;

/// The acceptance models with the right end of their (scalar) domain `𝒴`.
pub fn acceptance_models() -> Vec<(&'static str, AffineModel, f64)> {
    vec![
        ("feller", builtin::feller(), f64::INFINITY),
        ("kr2014", builtin::kr2014(), 1.0),
        ("cir-jump", builtin::cir_jump(), 2.0),
    ]
}

/// `1 - ((1 - √(1-u)) e^{-t/2} - 1)²`, checked against RK4 in the unit tests.
pub fn kr_closed(u: f64, t: f64) -> f64 {
    1.0 - ((1.0 - (1.0 - u).sqrt()) * (-t / 2.0).exp() - 1.0).powi(2)
}

/// Solution of `v' = v² - v`.
pub fn logistic(u: f64, t: f64) -> f64 {
    u * (-t).exp() / (1.0 - u * (1.0 - (-t).exp()))
}

/// Classical RK4 on a scalar autonomous equation.
pub fn rk4<F: Fn(f64) -> f64>(f: F, y0: f64, t: f64, n: usize) -> f64 {
    let h = t / n as f64;
    let mut y = y0;
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Max-norm residual of `g' = f(g)` on a uniform grid, by 5-point differences.
pub fn fd_residual(grid: &[f64], g: &[Vec<f64>], f: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let h = grid[1] - grid[0];
    let mut worst: f64 = 0.0;
    for k in 2..grid.len() - 2 {
        let rhs = f(&g[k]);
        for j in 0..g[k].len() {
            let d = (-g[k + 2][j] + 8.0 * g[k + 1][j] - 8.0 * g[k - 1][j] + g[k - 2][j]) / (12.0 * h);
            worst = worst.max((d - rhs[j]).abs());
        }
    }
    worst
}
