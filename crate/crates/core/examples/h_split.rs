//! The four-part split of `ĥ` by the fluid projectors of both species.

use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::dynamics::{h_component_split, HSplit};
use landau_lab::kernels::ModelParams;
use landau_lab::linalg::real_vec;

fn main() -> landau_lab::Result<()> {
    let s = LinearizedSystem::assemble(&ModelParams::default(), Discretization { degree: 6, ..Default::default() })?;
    let times = [0.0, 1.0, 10.0, 100.0, 1000.0];
    let sp = h_component_split(&s, 0.2, 0.5, &real_vec(&s.special.e_d), &times, 1e-8)?;
    println!("max defect against the block exponential: {:.2e}", sp.max_defect());
    for (label, norms) in HSplit::LABELS.iter().zip(&sp.part_norms) {
        let row: Vec<String> = norms.iter().map(|v| format!("{v:.3e}")).collect();
        println!("{label:>10}: {}", row.join("  "));
    }
    Ok(())
}
