//! On the real block `J` the Riccati flow is linear: `ψ_J(t) = e^{t β_JJᵀ} u_J`.

use affine_riccati::model::{AffineModel, StateShape};
use affine_riccati::riccati::{psi_j_flow, solve_riccati, SolveOptions};

fn main() -> affine_riccati::Result<()> {
    let mut model = AffineModel::zero(StateShape::new(1, 2)?);
    model.b = vec![0.3, 0.0, 0.0];
    model.linear[0].alpha = 0.5;
    model.linear[0].beta = vec![-1.0, 0.2, -0.1];
    model.beta_jj = vec![vec![-0.5, 0.3], vec![0.0, -1.2]];
    model.a = vec![vec![0.0; 3], vec![0.0, 0.4, 0.1], vec![0.0, 0.1, 0.3]];
    let u = [-0.2, 0.7, -1.1];
    let sol = solve_riccati(&model, &u, &SolveOptions::with_horizon(2.0))?;
    let exact = psi_j_flow(&model, 2.0, &u[1..])?;
    println!("ODE    ψ_J(2) = {:?}", &sol.psi_end()[1..]);
    println!("expm   ψ_J(2) = {exact:?}");
    println!("ψ_I(2) = {:.10}, φ(2) = {:.10}", sol.psi_end()[0], sol.phi_end());
    Ok(())
}
