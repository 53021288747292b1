//! The Esscher tilt shifts the characteristics: `F̃(u) = F(u+θ) - F(θ)`,
//! `R̃(u) = R(u+θ) - R(θ)`.

use affine_riccati::builtin;
use affine_riccati::esscher::tilt_model;

fn main() -> affine_riccati::Result<()> {
    let model = builtin::cir_jump();
    let theta = [0.8];
    let tilted = tilt_model(&model, &theta)?;
    println!("tilted model: {tilted:#?}");
    let (f_t, r_t) = (model.eval_f(&theta)?, model.eval_r(&theta)?[0]);
    for u in [-3.0, -1.0, 0.0, 0.5, 1.0] {
        let shifted = [u + theta[0]];
        let df = tilted.eval_f(&[u])? - (model.eval_f(&shifted)? - f_t);
        let dr = tilted.eval_r(&[u])?[0] - (model.eval_r(&shifted)?[0] - r_t);
        println!("u = {u:4}: F̃ mismatch {df:+.1e}, R̃ mismatch {dr:+.1e}");
    }
    Ok(())
}
