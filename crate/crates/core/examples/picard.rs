//! Picard decomposition of the A-species mode evolution into iterated
//! Duhamel terms and a remainder.

use faer::c64;
use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::dynamics::picard_decompose;
use landau_lab::kernels::ModelParams;

fn main() -> landau_lab::Result<()> {
    let s = LinearizedSystem::assemble(&ModelParams::default(), Discretization { degree: 6, ..Default::default() })?;
    let n = s.basis_a.size();
    let f0: Vec<c64> = (0..n).map(|i| c64::new(((i * 7) % 5) as f64 - 2.0, 0.0)).collect();
    let times = [0.0, 0.1, 0.5, 1.0];
    for k in 0..3 {
        let d = picard_decompose(&s, 1.0, &f0, k, &times, 1e-8)?;
        let last: Vec<String> = d.component_norms.iter().map(|c| format!("{:.3e}", c[times.len() - 1])).collect();
        println!("k = {k}: residual {:.1e}, terms at t=1 [{}], |R(1)| = {:.3e}", d.max_residual(), last.join(", "), d.remainder_norms[times.len() - 1]);
    }
    Ok(())
}
