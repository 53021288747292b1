//! Monte Carlo check of `E[e^{uX_T}] = exp(φ(T,u) + ψ(T,u) x0)` for the
//! Feller diffusion and its jump extension.

use affine_riccati::builtin;
use affine_riccati::montecarlo::{affine_formula_check, SimOptions};

fn main() -> affine_riccati::Result<()> {
    let opts = SimOptions::new(vec![1.0], 1.0, 20_000, 7);
    for name in ["feller", "cir-jump"] {
        let check = affine_formula_check(&builtin::by_name(name)?, &opts, &[-0.5])?;
        println!("== {name}\n{}", check.report());
    }
    let beyond = affine_formula_check(&builtin::feller(), &opts, &[2.0])?;
    println!("== feller, u = 2 (t* = ln 2 < T)\n{}", beyond.report());
    Ok(())
}
