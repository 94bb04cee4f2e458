//! The split `L = −Λ + K` with the cutoff `ϖχ_R`: coercivity of `Λ` in the
//! anisotropic norm and the size of `K`.

use landau_lab::assembly::{coercivity_check, Discretization, LinearizedSystem};
use landau_lab::kernels::{ModelParams, SpeciesPair};
use rand::SeedableRng;

fn main() -> landau_lab::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for varpi in [1.0, 10.0] {
        let disc = Discretization { degree: 6, varpi, ..Default::default() };
        let s = LinearizedSystem::assemble(&ModelParams::default(), disc)?;
        for pair in [SpeciesPair::AB, SpeciesPair::BB] {
            let sp = pair.x;
            let rep = coercivity_check(s.set(pair), s.basis(sp), s.rule(sp), 300, &mut rng)?;
            println!("varpi {varpi:4} {pair}: c0 = {:.4}, max <Kf,f>/|f|^2 = {:.3}", rep.c0, rep.k_ratio_max);
        }
    }
    Ok(())
}
