//! Order structure of the Riccati flow: `u ⪯ v` implies `ψ(t,u) ⪯ ψ(t,v)`,
//! and solutions of the reduced equation from 0 dominate `ψ_I(t, 0)`.

use affine_riccati::builtin;
use affine_riccati::diagnostics::{check_conservative, comparison_check, order_preservation_test, ConservativeOptions};
use affine_riccati::esscher::tilt_model;
use affine_riccati::riccati::SolveOptions;

fn main() -> affine_riccati::Result<()> {
    for name in builtin::NAMES {
        let r = order_preservation_test(&builtin::by_name(name)?, 1000, 1);
        println!("{name}: {} pairs, {} counterexamples", r.samples, r.counterexamples.len());
    }
    let tilted = tilt_model(&builtin::kr2014(), &[1.0])?;
    let verdict = check_conservative(&tilted, &ConservativeOptions::default())?;
    if let Some(w) = verdict.witness_trajectory() {
        let res = comparison_check(&tilted, &[0.0], &w.trajectory, &SolveOptions::with_horizon(5.0))?;
        println!("witness dominates ψ_I(t, 0): {} (max violation {:.1e})", res.holds, res.max_violation);
    }
    Ok(())
}
