//! Small-time growth of `‖D_p exp(tA(η))‖` and the `x`-smoothing surface.

use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::dynamics::{set_threads, smoothing_probe};
use landau_lab::fit::{geomspace, linspace};
use landau_lab::kernels::{ModelParams, WeightSpec};

fn main() -> landau_lab::Result<()> {
    set_threads(4);
    let s = LinearizedSystem::assemble(&ModelParams::default(), Discretization { degree: 6, ..Default::default() })?;
    let rep = smoothing_probe(&s, &linspace(0.0, 5.0, 6), &geomspace(1e-2, 1.0, 9), WeightSpec::new(0.0, 1)?, (1e-2, 1.0))?;
    for (t, g) in rep.times.iter().zip(&rep.sup_grad) {
        println!("t = {t:.3e}: sup_eta |D_p e^(tA)| = {g:.4}");
    }
    println!("fitted exponent {:.3}, x-surface sup {:.4}", rep.fit.slope, rep.x_surface_sup);
    Ok(())
}
