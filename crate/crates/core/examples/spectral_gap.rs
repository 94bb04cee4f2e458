//! Spectral gap of the non-fluid spectrum for long and short waves.

use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::kernels::{ModelParams, SpeciesPair};
use landau_lab::spectral::spectral_gap_scan;

fn main() -> landau_lab::Result<()> {
    let s = LinearizedSystem::assemble(&ModelParams::default(), Discretization { degree: 6, ..Default::default() })?;
    for pair in [SpeciesPair::AB, SpeciesPair::BB] {
        let g = spectral_gap_scan(&s, pair, 0.5, 5.0)?;
        println!(
            "{pair}: tau = {:.4} (long {:.4}, short {:.4}), gap at 0 = {:.4}, exhaustive = {}",
            g.tau, g.tau_long_nonfluid, g.tau_short, g.gap0, g.exhaustive
        );
    }
    Ok(())
}
