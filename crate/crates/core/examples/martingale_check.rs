//! Martingale verdicts for exponentially affine processes: `e^{X_t}` under
//! `kr2014` is a strict local martingale; the discounted `e^{X_t/2}` under
//! the Feller diffusion is a true one.

use affine_riccati::builtin;
use affine_riccati::diagnostics::ConservativeOptions;
use affine_riccati::esscher::{martingale_check, TiltSpec};

fn main() -> affine_riccati::Result<()> {
    let opts = ConservativeOptions::default();
    let kr = builtin::kr2014();
    let spec = TiltSpec::new(vec![1.0], 0.0, vec![0.0]);
    println!("== kr2014, θ = 1\n{}", martingale_check(&kr, &spec, &opts)?.report(&spec));

    let feller = builtin::feller();
    let spec = TiltSpec::auto_discount(&feller, vec![0.5])?;
    println!("== feller, θ = 1/2\n{}", martingale_check(&feller, &spec, &opts)?.report(&spec));

    let spec = TiltSpec::new(vec![0.5], 99.0, vec![0.0]);
    println!("== feller, wrong discount\n{}", martingale_check(&feller, &spec, &opts)?.report(&spec));
    Ok(())
}
