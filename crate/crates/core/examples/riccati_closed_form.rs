//! Solves the Riccati equation of the `kr2014` jump model and compares it
//! with its closed form `1 - ((1 - √(1-u)) e^{-t/2} - 1)²`.

use affine_riccati::builtin;
use affine_riccati::riccati::{solve_riccati, SolveOptions};

fn closed(u: f64, t: f64) -> f64 {
    1.0 - ((1.0 - (1.0 - u).sqrt()) * (-t / 2.0).exp() - 1.0).powi(2)
}

fn main() -> affine_riccati::Result<()> {
    let model = builtin::kr2014();
    let opts = SolveOptions::uniform(5.0, 50);
    for u in [-2.0, -1.0, 0.0, 0.5, 0.99] {
        let sol = solve_riccati(&model, &[u], &opts)?;
        let err = opts
            .t_eval
            .iter()
            .map(|&t| (sol.sample(t).unwrap().0[0] - closed(u, t)).abs())
            .fold(0.0, f64::max);
        println!("u = {u:5}: ψ(5) = {:.12}  max error {err:.2e}  ({})", sol.psi_end()[0], sol.status);
    }
    Ok(())
}
