//! Leading eigenvalues of the mode operators `L^η` across wave numbers.

use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::kernels::{ModelParams, SpeciesPair};
use landau_lab::spectral::sorted_spectrum;

fn main() -> landau_lab::Result<()> {
    let s = LinearizedSystem::assemble(&ModelParams::default(), Discretization { degree: 6, ..Default::default() })?;
    for pair in [SpeciesPair::AB, SpeciesPair::BB] {
        println!("{pair}");
        for eta in [0.0, 0.1, 0.5, 2.0] {
            let vals = sorted_spectrum(&s, pair, eta)?;
            let head: Vec<String> = vals.iter().take(6).map(|v| format!("{:+.4}{:+.4}i", v.re, v.im)).collect();
            println!("  eta {eta:3}: {}", head.join("  "));
        }
    }
    Ok(())
}
