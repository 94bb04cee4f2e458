//! Decay exponents of the spatial norms of the fluid, non-fluid and
//! short-wave components, synthesized from per-mode evolutions.

use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::dynamics::{
    component_norms, fit_decay, fit_exponential, set_threads, synthesize_norms, Component, NormKind, RadialGrid, EXPONENTIAL_WINDOW,
    POWER_WINDOW,
};
use landau_lab::fit::geomspace;
use landau_lab::kernels::ModelParams;

fn main() -> landau_lab::Result<()> {
    set_threads(4);
    let s = LinearizedSystem::assemble(&ModelParams::default(), Discretization { degree: 6, ..Default::default() })?;
    let grid = RadialGrid::standard(0.5, 5.0)?;
    let times = geomspace(1e-2, 1e4, 60);
    let norms = component_norms(&s, &grid, &times)?;
    for c in Component::ALL {
        let per: Vec<Vec<f64>> = norms.iter().map(|m| m.values[c as usize][0].clone()).collect();
        let v = synthesize_norms(&grid, &per, c.is_short(), 0, NormKind::LinfProxy)?;
        let fit = if c.is_exponential() { fit_exponential(c.label(), &times, &v, EXPONENTIAL_WINDOW)? } else { fit_decay(c.label(), &times, &v, POWER_WINDOW)? };
        let kind = if fit.exponential { "rate" } else { "slope" };
        println!("{:>10}: {kind} {:+.4} +- {:.4}", c.label(), fit.slope, fit.half_width);
    }
    Ok(())
}
