use faer::{c64, Mat};
use serde::Serialize;

use super::{expm, par_map};
use crate::assembly::{mode_matrix, LinearizedSystem};
use crate::error::{Error, Result};
use crate::fit::{loglog_slope, LineFit};
use crate::kernels::WeightSpec;
use crate::linalg::{sym_eigen, to_complex};

/// Per-mode regularization probes of `exp(t A_AB(η))`.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub etas: Vec<f64>,
    pub times: Vec<f64>,
    /// `‖D_p exp(tA(η))‖_{m₁→L²}` indexed `[time][eta]`.
    pub grad_norms: Vec<Vec<f64>>,
    /// Supremum over `η` of `grad_norms` per time.
    pub sup_grad: Vec<f64>,
    pub fit: LineFit,
    /// `sup_{t,η} t^{3/2}|η| ‖exp(tA(η))‖_{m₁→L²}`.
    pub x_surface_sup: f64,
    pub weight: WeightSpec,
}

fn largest_singular(m: &Mat<c64>) -> Result<f64> {
    let s = m.singular_values().map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    Ok(s.iter().copied().fold(0.0, f64::max))
}

/// `G^{−1/2}` for the `m₁`-weighted Gram matrix of the A basis.
fn inverse_sqrt_gram(system: &LinearizedSystem, weight: WeightSpec) -> Result<Mat<c64>> {
    let basis = &system.basis_a;
    let rule = &system.rule_a;
    let gamma = system.params.gamma;
    let n = basis.size();
    if weight.exponent(gamma) == 0.0 {
        return Ok(to_complex(&Mat::<f64>::identity(n, n)));
    }
    let table = basis.node_table(rule);
    let wv: Vec<f64> = rule.nodes.iter().zip(&rule.weights).map(|(p, w)| w * weight.value(gamma, *p)).collect();
    let scaled = Mat::<f64>::from_fn(rule.len(), n, |k, a| wv[k] * table.values[(k, a)]);
    let g = table.values.transpose() * &scaled;
    let (vals, vecs) = sym_eigen(&g)?;
    if vals[0] <= 0.0 {
        return Err(Error::Numerical("weighted Gram matrix is not positive".into()));
    }
    let inv = Mat::<f64>::from_fn(n, n, |i, j| (0..n).map(|k| vecs[(i, k)] * vecs[(j, k)] / vals[k].sqrt()).sum());
    Ok(to_complex(&inv))
}

/// Operator norms of `D_p exp(tA(η))` and `exp(tA(η))` from the
/// `m₁`-weighted ball, the small-time exponent of the first and the
/// `x`-smoothing surface bound of the second.
pub fn smoothing_probe(system: &LinearizedSystem, etas: &[f64], times: &[f64], weight: WeightSpec, window: (f64, f64)) -> Result<SmoothingReport> {
    if times.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::InvalidInput("smoothing times must lie in (0, 1]".into()));
    }
    let ginv = inverse_sqrt_gram(system, weight)?;
    let basis = &system.basis_a;
    let n = basis.size();
    let parts: Vec<Mat<f64>> = (0..3).map(|axis| basis.derivative_matrix(axis).0).collect();
    let rows = parts[0].nrows();
    let d = to_complex(&Mat::<f64>::from_fn(3 * rows, n, |i, j| parts[i / rows][(i % rows, j)]));
    let per_eta: Vec<Result<Vec<(f64, f64)>>> = par_map(etas, |&eta| {
        let m = mode_matrix(&system.ab, &system.params, eta);
        times
            .iter()
            .map(|&t| {
                let e = &expm(&Mat::from_fn(n, n, |i, j| m[(i, j)] * t)) * &ginv;
                Ok((largest_singular(&(&d * &e))?, largest_singular(&e)?))
            })
            .collect()
    });
    let per_eta: Vec<Vec<(f64, f64)>> = per_eta.into_iter().collect::<Result<_>>()?;
    let grad_norms: Vec<Vec<f64>> = (0..times.len()).map(|ti| per_eta.iter().map(|r| r[ti].0).collect()).collect();
    let sup_grad: Vec<f64> = grad_norms.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
    let mut x_surface_sup: f64 = 0.0;
    for (ei, eta) in etas.iter().enumerate() {
        for (ti, t) in times.iter().enumerate() {
            x_surface_sup = x_surface_sup.max(t.powf(1.5) * eta * per_eta[ei][ti].1);
        }
    }
    let (wx, wy): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&sup_grad)
        .filter(|(t, _)| **t >= window.0 * (1.0 - 1e-12) && **t <= window.1 * (1.0 + 1e-12))
        .map(|(t, v)| (*t, *v))
        .unzip();
    let fit = loglog_slope(&wx, &wy)?;
    Ok(SmoothingReport { etas: etas.to_vec(), times: times.to_vec(), grad_norms, sup_grad, fit, x_surface_sup, weight })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretization;
    use crate::fit::{geomspace, linspace};
    use crate::kernels::ModelParams;

    #[test]
    fn gradient_norm_grows_as_time_shrinks() {
        let p = ModelParams::new(1.5, 1.0, -1.0).unwrap();
        let s = LinearizedSystem::assemble(&p, Discretization { degree: 4, ..Default::default() }).unwrap();
        let w = WeightSpec::new(0.0, 1).unwrap();
        let r = smoothing_probe(&s, &linspace(0.0, 2.0, 3), &geomspace(1e-2, 1.0, 6), w, (1e-2, 1.0)).unwrap();
        assert!(r.fit.slope < 0.0);
        assert!(r.sup_grad.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert!(r.x_surface_sup.is_finite() && r.x_surface_sup > 0.0);
    }
}
