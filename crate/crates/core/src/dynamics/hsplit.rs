use faer::{c64, Mat};
use serde::Serialize;

use super::{block_matrix, expm, mul_vec, PairModes};
use crate::assembly::LinearizedSystem;
use crate::error::{Error, Result};
use crate::linalg::cnorm;

/// `ĥ = ĥ_00 + ĥ_0⊥ + ĥ_⊥0 + ĥ_⊥⊥` for `ĥ(0) = 0`; the first index is the
/// B-side projection (fluid / complement), the second the A-side one.
#[derive(Debug, Clone, Serialize)]
pub struct HSplit {
    pub eta: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub parts: [Vec<Vec<c64>>; 4],
    #[serde(skip)]
    pub direct: Vec<Vec<c64>>,
    pub part_norms: [Vec<f64>; 4],
    pub direct_norms: Vec<f64>,
    /// `‖Σ parts − direct‖ / ‖direct‖` per time.
    pub defects: Vec<f64>,
}

impl HSplit {
    pub const LABELS: [&'static str; 4] = ["h00", "h0perp", "hperp0", "hperpperp"];

    pub fn max_defect(&self) -> f64 {
        self.defects.iter().copied().fold(0.0, f64::max)
    }
}

/// Splits the inhomogeneous part of `ĥ` by the fluid spectral projectors of
/// both mode operators and checks the sum against the block exponential.
pub fn h_component_split(system: &LinearizedSystem, eta: f64, delta: f64, g0: &[c64], times: &[f64], tolerance: f64) -> Result<HSplit> {
    if !(eta > 0.0 && eta < delta) {
        return Err(Error::InvalidInput(format!("h split needs 0 < |eta| < delta = {delta}, got {eta}")));
    }
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidInput("times must be nonnegative".into()));
    }
    let modes = PairModes::new(system, eta)?;
    let ca = modes.a.coords(g0);
    let m = block_matrix(system, eta);
    let na = g0.len();
    let x0: Vec<c64> = g0.iter().copied().chain(std::iter::repeat(c64::new(0.0, 0.0)).take(system.basis_b.size())).collect();
    let mut parts: [Vec<Vec<c64>>; 4] = Default::default();
    let mut direct = Vec::with_capacity(times.len());
    let mut defects = Vec::with_capacity(times.len());
    for &t in times {
        for (q, part) in parts.iter_mut().enumerate() {
            let (fb, fa) = (q < 2, q % 2 == 0);
            let y = modes.duhamel_coords(&ca, t, |k, l| modes.is_fluid_b(k) == fb && modes.is_fluid_a(l) == fa);
            part.push(modes.b.synthesize(&y));
        }
        let e = expm(&Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * t));
        let h = mul_vec(&e, &x0)[na..].to_vec();
        let k = direct.len();
        let sum: Vec<c64> = (0..h.len()).map(|i| parts.iter().map(|p| p[k][i]).sum()).collect();
        let diff: Vec<c64> = sum.iter().zip(&h).map(|(a, b)| a - b).collect();
        let scale = cnorm(&h);
        defects.push(if scale > 0.0 { cnorm(&diff) / scale } else { cnorm(&diff) });
        direct.push(h);
    }
    let part_norms = parts.clone().map(|p| p.iter().map(|v| cnorm(v)).collect());
    let direct_norms = direct.iter().map(|v| cnorm(v)).collect();
    let split = HSplit { eta, times: times.to_vec(), parts, direct, part_norms, direct_norms, defects };
    let (worst, &residual) = split.defects.iter().enumerate().fold((0, &0.0), |b, (i, d)| if d > b.1 { (i, d) } else { b });
    if residual > tolerance {
        return Err(Error::Consistency { what: "h split sum vs direct evolution".into(), residual, time: split.times[worst] });
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretization;
    use crate::kernels::ModelParams;
    use crate::linalg::real_vec;

    #[test]
    fn parts_sum_to_direct_and_fluid_dominates() {
        let p = ModelParams::new(1.5, 1.0, 0.0).unwrap();
        let s = LinearizedSystem::assemble(&p, Discretization { degree: 5, ..Default::default() }).unwrap();
        let g0 = real_vec(&s.special.e_d);
        let sp = h_component_split(&s, 0.2, 0.5, &g0, &[0.0, 0.1, 1.0, 10.0, 60.0], 1e-8).unwrap();
        assert!(sp.max_defect() < 1e-8);
        let last = sp.times.len() - 1;
        assert!(sp.part_norms[3][last] < 1e-6 * sp.part_norms[0][last]);
        assert!(sp.direct_norms[0] == 0.0);
    }
}
