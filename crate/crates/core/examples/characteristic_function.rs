//! Characteristic function of the CIR model with exponential jumps,
//! `E[e^{iwX_T}] = exp(φ(T, iw) + ψ(T, iw) x)`, from the complex Riccati system.

use affine_riccati::builtin;
use affine_riccati::riccati::{solve_riccati_complex, SolveOptions};
use num_complex::Complex64;

fn main() -> affine_riccati::Result<()> {
    let model = builtin::cir_jump();
    let (x0, horizon) = (1.0, 1.0);
    for w in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let sol = solve_riccati_complex(&model, &[Complex64::new(0.0, w)], &SolveOptions::with_horizon(horizon))?;
        let k = sol.grid.len() - 1;
        let cf = (sol.phi[k] + sol.psi[k][0] * x0).exp();
        println!("w = {w:3}: φ_X(w) = {:.10} {:+.10}i  |φ| = {:.6}", cf.re, cf.im, cf.norm());
    }
    Ok(())
}
