//! Fluid eigenvalue branches, their Taylor coefficients and the diffusion
//! coefficients from the resolvent formulas.

use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::kernels::{ModelParams, SpeciesPair};
use landau_lab::spectral::{default_branch_grid, dispersion_summary, eigen_branches};

fn main() -> landau_lab::Result<()> {
    let s = LinearizedSystem::assemble(&ModelParams::default(), Discretization { degree: 6, ..Default::default() })?;
    println!("sound speed sqrt(5/3)/m_B = {:.6}", (5.0f64 / 3.0).sqrt());
    for pair in [SpeciesPair::AB, SpeciesPair::BB] {
        let branches = eigen_branches(&s, pair, &default_branch_grid(0.5))?;
        let sum = dispersion_summary(&s, pair, &branches, 0.1)?;
        for (fit, direct) in sum.fits.iter().zip(&sum.a2_direct) {
            println!("{pair} branch {}: a1 = {:+.6}, a2 = {:.6} (direct {:.6}), residual {:.1e}", fit.label, fit.a1, fit.a2, direct, fit.residual);
        }
        println!("{pair} minimum overlap {:.4}", sum.min_overlap);
    }
    Ok(())
}
