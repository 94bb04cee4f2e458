//! Moments of the collision operators on randomly perturbed Gaussian
//! densities vanish to rounding.

use landau_lab::kernels::{conservation_report, GaussianMixture, ModelParams, Species};
use landau_lab::quad::QuadratureRule;
use rand::SeedableRng;

fn main() -> landau_lab::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for gamma in [-2.0, -1.0, 0.0, 1.0] {
        let params = ModelParams::new(1.5, 1.0, gamma)?;
        let fa = GaussianMixture::perturbed_maxwellian(&params, Species::A, 2, &mut rng);
        let fb = GaussianMixture::perturbed_maxwellian(&params, Species::B, 2, &mut rng);
        let rule = QuadratureRule::gauss_hermite(8, 1.5)?;
        let rep = conservation_report(&params, &fa, &fb, &rule)?;
        println!("gamma = {gamma:4}: max |moment| = {:.2e}, energy exchange = {:.2e}", rep.max_abs(), rep.energy);
    }
    Ok(())
}
