//! Linear least-squares helpers for exponent and coefficient fits.

use faer::Mat;
use faer::linalg::solvers::SolveLstsq;
use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares solution of `Σ_j c_j cols[j](x_i) ≈ y_i` together with the
/// root-mean-square residual.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = y.len();
    let n = design.len();
    if n == 0 || m < n || design.iter().any(|c| c.len() != m) {
        return Err(Error::InvalidInput(format!("least squares needs >= {n} consistent samples, got {m}")));
    }
    // Column scaling keeps the normal equations well conditioned.
    let scale: Vec<f64> = design.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300)).collect();
    let a = Mat::<f64>::from_fn(m, n, |i, j| design[j][i] / scale[j]);
    let b = Mat::<f64>::from_fn(m, 1, |i, _| y[i]);
    let qr = a.qr();
    let sol = qr.solve_lstsq(&b);
    let coeffs: Vec<f64> = (0..n).map(|j| sol[(j, 0)] / scale[j]).collect();
    let rss: f64 = (0..m)
        .map(|i| {
            let f: f64 = (0..n).map(|j| coeffs[j] * design[j][i]).sum();
            (f - y[i]) * (f - y[i])
        })
        .sum();
    Ok((coeffs, (rss / m as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub points: usize,
}

/// Fits `y ≈ slope·x + intercept`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput(format!("line fit needs >= 2 paired samples, got {}", x.len())));
    }
    let (c, r) = least_squares(&[x.to_vec(), vec![1.0; x.len()]], y)?;
    Ok(LineFit { slope: c[0], intercept: c[1], rms_residual: r, points: x.len() })
}

/// Slope of `log y` against `log x`; non-positive samples are rejected.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("log-log fit needs positive samples".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}

/// `n` points geometrically spaced on `[a, b]`.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let r = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { b } else { a * (r * i as f64).exp() }).collect()
}

/// `n` points evenly spaced on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_polynomial_coefficients() {
        let x = linspace(0.01, 0.2, 20);
        let y: Vec<f64> = x.iter().map(|t| -0.7 * t * t + 3.0 * t.powi(4)).collect();
        let (c, r) = least_squares(&[x.iter().map(|t| t * t).collect(), x.iter().map(|t| t.powi(4)).collect()], &y).unwrap();
        assert!((c[0] + 0.7).abs() < 1e-10 && (c[1] - 3.0).abs() < 1e-7);
        assert!(r < 1e-14);
    }

    #[test]
    fn loglog_power_law() {
        let x = geomspace(1e2, 1e4, 15);
        let y: Vec<f64> = x.iter().map(|t| 4.0 * t.powf(-1.5)).collect();
        let f = loglog_slope(&x, &y).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0, 2.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn grids_hit_endpoints() {
        let g = geomspace(1e-3, 0.5, 40);
        assert_eq!(g.len(), 40);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[39], 0.5);
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
