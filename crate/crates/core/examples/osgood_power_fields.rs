//! Uniqueness of `g' = -(-g)^p, g(0) = 0`: non-unique for `p < 1`, with the
//! nonzero solution `-((1-p)t)^{1/(1-p)}`; unique for `p ≥ 1`.

use affine_riccati::diagnostics::{check_field_uniqueness, osgood_test, power_field, ConservativeOptions};

fn main() -> affine_riccati::Result<()> {
    let opts = ConservativeOptions::default();
    for p in [0.5, 0.75, 1.0, 2.0] {
        let field = power_field(p);
        let osgood = osgood_test(&field, opts.osgood_delta)?;
        let verdict = check_field_uniqueness(&field, &opts)?;
        print!("p = {p:4}: Osgood integral {}, verdict {}", if osgood.convergent() { "converges" } else { "diverges" }, verdict.kind());
        if let Some(w) = verdict.witness_trajectory() {
            let err = w
                .trajectory
                .grid
                .iter()
                .zip(&w.trajectory.psi)
                .map(|(t, g)| (g[0] + ((1.0 - p) * t).powf(1.0 / (1.0 - p))).abs())
                .fold(0.0, f64::max);
            print!(", witness error {err:.2e}");
        }
        println!();
    }
    Ok(())
}
