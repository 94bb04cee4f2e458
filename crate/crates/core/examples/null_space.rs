//! Assembles the Galerkin operators and inspects their kernels.

use landau_lab::assembly::{Discretization, LinearizedSystem};
use landau_lab::kernels::ModelParams;
use landau_lab::linalg::{matvec, norm, sym_eigenvalues};

fn main() -> landau_lab::Result<()> {
    let params = ModelParams::default();
    let s = LinearizedSystem::assemble(&params, Discretization { degree: 6, ..Default::default() })?;
    println!("basis sizes: A {}, B {}", s.basis_a.size(), s.basis_b.size());
    for (i, chi) in s.special.chi.iter().enumerate() {
        println!("|L_BB chi_{i}| = {:.2e}", norm(&matvec(&s.bb.l_full, chi)));
    }
    println!("|L_AB E_D| = {:.2e}", norm(&matvec(&s.ab.l_full, &s.special.e_d)));
    println!("|L_BA E_D| = {:.2e}", norm(&matvec(&s.l_ba.matrix, &s.special.e_d)));
    for (name, m) in [("L_AB", &s.ab.l_full), ("L_BB", &s.bb.l_full)] {
        let ev = sym_eigenvalues(m)?;
        let zeros = ev.iter().filter(|v| v.abs() <= 1e-8).count();
        let gap = ev.iter().rev().find(|v| v.abs() > 1e-8).unwrap();
        println!("{name}: {zeros} zero eigenvalues, next {gap:.4}");
    }
    Ok(())
}
