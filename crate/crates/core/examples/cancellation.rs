//! Order of vanishing of `⟨e_j(−η), L_BA e_D(η)⟩` as `|η| → 0`.

use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::fit::geomspace;
use landau_lab::kernels::ModelParams;
use landau_lab::spectral::cancellation_orders;

fn main() -> landau_lab::Result<()> {
    let s = LinearizedSystem::assemble(&ModelParams::new(1.5, 1.0, -1.0)?, Discretization { degree: 6, ..Default::default() })?;
    for c in cancellation_orders(&s, &geomspace(1e-3, 0.5, 30), (1e-3, 0.1))? {
        match &c.slope {
            Some(f) => println!("j = {}: slope {:.4} (order {})", c.j, f.slope, c.expected_order),
            None => println!("j = {}: vanishes identically", c.j),
        }
    }
    Ok(())
}
