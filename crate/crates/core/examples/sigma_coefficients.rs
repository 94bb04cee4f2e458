//! Diffusion coefficients `λ₁, λ₂` of every species pair and the structural
//! identities of `σ` checked against direct quadrature.

use landau_lab::kernels::{lambda_asymptotic_prefactor, lambda_pair, sigma_structure_check, ModelParams, SpeciesPair};
use rand::SeedableRng;

fn main() -> landau_lab::Result<()> {
    let params = ModelParams::new(1.5, 1.0, -1.0)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for pair in [SpeciesPair::AB, SpeciesPair::BA, SpeciesPair::BB, SpeciesPair::AA] {
        println!("{pair}");
        for r in [0.0, 0.5, 2.0, 8.0] {
            let l = lambda_pair(&params, pair, r)?;
            println!("  r = {r:4}: lambda1 = {:.6}, lambda2 = {:.6}", l.lambda1, l.lambda2);
        }
        let (a1, a2) = lambda_asymptotic_prefactor(&params, pair);
        println!("  large |p|: lambda1 ~ {a1:.4} r^gamma, lambda2 ~ {a2:.4} r^(gamma+2)");
        let rep = sigma_structure_check(&params, pair, &[0.3, 1.0, 4.0], 5, &mut rng)?;
        println!(
            "  trace {:.1e}  quadratic form {:.1e}  divergence {:.1e}  prefactor ratio {:.5}",
            rep.trace_rel, rep.quadratic_form_rel, rep.divergence_rel, rep.asymptotic_ratio
        );
    }
    Ok(())
}
