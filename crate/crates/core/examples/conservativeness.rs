//! Conservativeness verdicts for the built-in models and for `kr2014`
//! after the Esscher tilt at θ = 1.

use affine_riccati::builtin;
use affine_riccati::diagnostics::{check_conservative, ConservativeOptions};
use affine_riccati::esscher::tilt_model;

fn main() -> affine_riccati::Result<()> {
    let opts = ConservativeOptions::default();
    for name in builtin::NAMES {
        let verdict = check_conservative(&builtin::by_name(name)?, &opts)?;
        println!("== {name}\n{}", verdict.report());
    }
    let tilted = tilt_model(&builtin::kr2014(), &[1.0])?;
    let verdict = check_conservative(&tilted, &opts)?;
    println!("== kr2014 tilted at θ = 1\n{}", verdict.report());
    if let Some(w) = verdict.witness_trajectory() {
        for t in [0.5, 1.0, 2.0, 3.0] {
            let g = w.trajectory.sample(t).unwrap().0[0];
            println!("g({t}) = {g:.8}   -(1 - e^(-t/2))² = {:.8}", -(1.0 - (-t / 2.0f64).exp()).powi(2));
        }
    }
    Ok(())
}
