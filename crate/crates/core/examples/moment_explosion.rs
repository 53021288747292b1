//! Moment explosion in the Feller diffusion: `E[e^{uX_t}]` is finite only
//! up to `t* = ln(u / (u - 1))`.

use affine_riccati::builtin;
use affine_riccati::riccati::{blowup_time, SolveOptions};

fn main() -> affine_riccati::Result<()> {
    let model = builtin::feller();
    for u in [1.5, 2.0, 3.0, 10.0] {
        let t = blowup_time(&model, &[u], 10.0, &SolveOptions::default())?;
        let exact = (u / (u - 1.0)).ln();
        println!("u = {u:4}: t* ≈ {:.8}  exact {exact:.8}", t.unwrap_or(f64::NAN));
    }
    Ok(())
}
