//! Evolution of one coupled Fourier mode from `ĝ = E_D`, `ĥ = 0`.

use faer::c64;
use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::dynamics::evolve_pair_mode;
use landau_lab::kernels::ModelParams;
use landau_lab::linalg::real_vec;

fn main() -> landau_lab::Result<()> {
    let s = LinearizedSystem::assemble(&ModelParams::default(), Discretization { degree: 6, ..Default::default() })?;
    let g0 = real_vec(&s.special.e_d);
    let h0 = vec![c64::new(0.0, 0.0); s.basis_b.size()];
    let times = [0.0, 1.0, 10.0, 100.0, 1000.0];
    for eta in [0.05, 0.5, 2.0] {
        let tr = evolve_pair_mode(&s, eta, &g0, &h0, &times)?;
        println!("eta {eta}");
        for (i, t) in times.iter().enumerate() {
            println!("  t = {t:6}: |g| = {:.6e}  |h| = {:.6e}", tr.g_norms[i], tr.h_norms[i]);
        }
    }
    Ok(())
}
