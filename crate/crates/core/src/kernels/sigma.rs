use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use super::{maxwellian, phi_kernel, Mat3, ModelParams, SpeciesPair, Vec3};
use crate::error::{Error, Result};
use crate::quad::{adaptive_gk, GaussLegendre};

/// Eigenvalues of `σ^{XY}(p)` at one radius: `λ₁` along `p`, `λ₂` across.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaValues {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Absolute error estimate of the radial quadrature.
    pub error: f64,
}

impl LambdaValues {
    pub fn trace(&self) -> f64 {
        self.lambda1 + 2.0 * self.lambda2
    }
}

const LAMBDA_ABS_TOL: f64 = 1e-10;
const GAUSS_WINDOW: f64 = 12.0;

/// `∫_0^2 t^k e^{-κt} dt` for `k = 0, 1, 2`.
fn polar_moments(kappa: f64) -> [f64; 3] {
    if kappa < 2.0 {
        // Power series; alternating but bounded by e^{2κ} ≤ e^4.
        let mut out = [0.0; 3];
        let mut term = 1.0; // (-κ)^n / n! · 2^n
        for n in 0..60 {
            for (k, o) in out.iter_mut().enumerate() {
                *o += term * 2f64.powi(k as i32 + 1) / (n + k + 1) as f64;
            }
            term *= -2.0 * kappa / (n + 1) as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        out
    } else {
        let e = (-2.0 * kappa).exp();
        [
            (1.0 - e) / kappa,
            (1.0 - e * (1.0 + 2.0 * kappa)) / (kappa * kappa),
            (2.0 - e * (2.0 + 4.0 * kappa + 4.0 * kappa * kappa)) / (kappa * kappa * kappa),
        ]
    }
}

/// `λ₁`, `λ₂` of `σ^{XY}` at `|p| = r`.
///
/// With `w = (m_Y/m_X) p − p_*` the matrix becomes
/// `c m_Y^{-γ-2} ∫ (|w|² I − w wᵀ)|w|^γ M_Y(q − w) dw` where `q = (m_Y/m_X) p`.
/// In spherical coordinates about `p̂` the azimuth and the polar angle
/// integrate in closed form, leaving an adaptive radial quadrature.
pub fn lambda_pair(params: &ModelParams, pair: SpeciesPair, r: f64) -> Result<LambdaValues> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be finite and >= 0, got {r}")));
    }
    let (mx, my) = (params.mass(pair.x), params.mass(pair.y));
    let v = params.variance(pair.y);
    let gamma = params.gamma;
    let q = my / mx * r;
    let pref = params.reduced_mass(pair) * my.powf(-gamma - 2.0) * 2.0 * std::f64::consts::PI
        / (2.0 * std::f64::consts::PI * v).powf(1.5);

    let integrand = |s: f64| -> [f64; 2] {
        if s <= 0.0 {
            return [0.0, 0.0];
        }
        let g = (-(s - q) * (s - q) / (2.0 * v)).exp() * s.powf(gamma + 4.0);
        let [i0, i1, i2] = polar_moments(q * s / v);
        // 1 − μ² = t(2 − t) with t = 1 − μ
        [g * (2.0 * i1 - i2), g * 2.0 * i0]
    };
    let sd = v.sqrt();
    let lo = (q - GAUSS_WINDOW * sd).max(0.0);
    let hi = q + GAUSS_WINDOW * sd;
    let tol = LAMBDA_ABS_TOL / pref;
    let (mut val, mut err) = ([0.0; 2], 0.0);
    let mut edges = vec![lo];
    if q > lo {
        edges.push(q);
    }
    edges.push(hi);
    for w in edges.windows(2) {
        let (v, e) = adaptive_gk(integrand, w[0], w[1], 0.5 * tol, 1e-13, 2000)?;
        val[0] += v[0];
        val[1] += v[1];
        err += e;
    }
    let lambda1 = pref * val[0];
    let trace = pref * val[1];
    Ok(LambdaValues { lambda1, lambda2: 0.5 * (trace - lambda1), error: pref * err })
}

/// Large-`|p|` prefactors `(A₁, A₂)` with `λ₁ ≈ A₁ r^γ`, `λ₂ ≈ A₂ r^{γ+2}`.
pub fn lambda_asymptotic_prefactor(params: &ModelParams, pair: SpeciesPair) -> (f64, f64) {
    let (mx, my) = (params.mass(pair.x), params.mass(pair.y));
    let gamma = params.gamma;
    let c = params.reduced_mass(pair) * my.powf(-gamma - 2.0);
    let ratio = my / mx;
    let a1 = 2.0 * c * params.variance(pair.y) * ratio.powf(gamma);
    let a2 = c * ratio.powf(gamma + 2.0);
    (a1, a2)
}

/// Natural cubic spline through `(x_i, y_i)`.
#[derive(Debug, Clone)]
struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (rhs - a * d[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Self { x, y, m }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Tabulated `λ₁(r)`, `λ₂(r)` for one species pair, interpolated by cubic
/// splines in `ln r`.
#[derive(Debug, Clone)]
pub struct SigmaTable {
    pub params: ModelParams,
    pub pair: SpeciesPair,
    pub radii: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Common value of `λ₁ = λ₂` at `p = 0`.
    pub lambda_origin: f64,
    spline1: CubicSpline,
    spline2: CubicSpline,
}

impl SigmaTable {
    pub const DEFAULT_POINTS: usize = 400;
    pub const R_MIN: f64 = 1e-3;
    pub const R_MAX: f64 = 30.0;

    /// Default grid: 400 log-spaced radii on `[10⁻³, 30]`.
    pub fn build(params: &ModelParams, pair: SpeciesPair) -> Result<Self> {
        Self::build_on(params, pair, Self::DEFAULT_POINTS, Self::R_MIN, Self::R_MAX)
    }

    pub fn build_on(params: &ModelParams, pair: SpeciesPair, n: usize, r_min: f64, r_max: f64) -> Result<Self> {
        params.validate()?;
        if n < 4 || !(r_min > 0.0 && r_max > r_min) {
            return Err(Error::InvalidInput(format!("bad table grid: n={n}, [{r_min}, {r_max}]")));
        }
        let step = (r_max / r_min).ln() / (n - 1) as f64;
        let radii: Vec<f64> = (0..n).map(|i| r_min * (step * i as f64).exp()).collect();
        let mut l1 = Vec::with_capacity(n);
        let mut l2 = Vec::with_capacity(n);
        for &r in &radii {
            let lv = lambda_pair(params, pair, r)?;
            l1.push(lv.lambda1);
            l2.push(lv.lambda2);
        }
        let origin = lambda_pair(params, pair, 0.0)?;
        Ok(Self::from_columns(*params, pair, radii, l1, l2, origin.trace() / 3.0))
    }

    fn from_columns(
        params: ModelParams,
        pair: SpeciesPair,
        radii: Vec<f64>,
        lambda1: Vec<f64>,
        lambda2: Vec<f64>,
        lambda_origin: f64,
    ) -> Self {
        let u: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let spline1 = CubicSpline::new(u.clone(), lambda1.clone());
        let spline2 = CubicSpline::new(u, lambda2.clone());
        Self { params, pair, radii, lambda1, lambda2, lambda_origin, spline1, spline2 }
    }

    /// `(λ₁(r), λ₂(r))` with an even quadratic blend to the origin value
    /// below the grid and power-law extrapolation above it.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r_min = self.radii[0];
        let r_max = *self.radii.last().unwrap();
        if r < r_min {
            let s = (r / r_min) * (r / r_min);
            let l0 = self.lambda_origin;
            (l0 + (self.lambda1[0] - l0) * s, l0 + (self.lambda2[0] - l0) * s)
        } else if r > r_max {
            let g = self.params.gamma;
            let n = self.radii.len() - 1;
            let ratio = r / r_max;
            (self.lambda1[n] * ratio.powf(g), self.lambda2[n] * ratio.powf(g + 2.0))
        } else {
            let u = r.ln();
            (self.spline1.eval(u), self.spline2.eval(u))
        }
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "# pair={},m_A={:.16e},m_B={:.16e},gamma={:.16e},lambda_origin={:.16e}",
            self.pair, self.params.m_a, self.params.m_b, self.params.gamma, self.lambda_origin
        )?;
        writeln!(w, "r,lambda1,lambda2")?;
        for i in 0..self.radii.len() {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", self.radii[i], self.lambda1[i], self.lambda2[i])?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Config { location: format!("line {line}"), message: msg.into() };
        let mut lines = r.lines();
        let meta = lines.next().ok_or_else(|| bad(1, "empty file"))??;
        let meta = meta.strip_prefix("# ").ok_or_else(|| bad(1, "missing metadata header"))?;
        let (mut pair, mut m_a, mut m_b, mut gamma, mut origin) = (None, None, None, None, None);
        for kv in meta.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(1, "malformed metadata"))?;
            let num = || v.parse::<f64>().map_err(|_| bad(1, "malformed number in metadata"));
            match k {
                "pair" => pair = Some(v.parse::<SpeciesPair>()?),
                "m_A" => m_a = Some(num()?),
                "m_B" => m_b = Some(num()?),
                "gamma" => gamma = Some(num()?),
                "lambda_origin" => origin = Some(num()?),
                _ => {}
            }
        }
        let missing = || bad(1, "incomplete metadata");
        let params = ModelParams::new(m_a.ok_or_else(missing)?, m_b.ok_or_else(missing)?, gamma.ok_or_else(missing)?)?;
        let header = lines.next().ok_or_else(|| bad(2, "missing column header"))??;
        if header.trim() != "r,lambda1,lambda2" {
            return Err(bad(2, "expected columns r,lambda1,lambda2"));
        }
        let (mut radii, mut l1, mut l2) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(i + 3, "malformed number"))?;
            if cols.len() != 3 {
                return Err(bad(i + 3, "expected 3 columns"));
            }
            radii.push(cols[0]);
            l1.push(cols[1]);
            l2.push(cols[2]);
        }
        if radii.len() < 4 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad(3, "radii must be increasing with at least 4 rows"));
        }
        let origin = origin.unwrap_or(l1[0]);
        Ok(Self::from_columns(params, pair.ok_or_else(missing)?, radii, l1, l2, origin))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// `σ^{XY}(p) = λ₁ ℙ(p) + λ₂ (I − ℙ(p))` with `ℙ(p) = p̂ p̂ᵀ`.
pub fn sigma_matrix(table: &SigmaTable, p: Vec3) -> Mat3 {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let (l1, l2) = table.eval(r);
    if r == 0.0 {
        return [[table.lambda_origin, 0.0, 0.0], [0.0, table.lambda_origin, 0.0], [0.0, 0.0, table.lambda_origin]];
    }
    let u = [p[0] / r, p[1] / r, p[2] / r];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { l2 } else { 0.0 };
            m[i][j] = d + (l1 - l2) * u[i] * u[j];
        }
    }
    m
}

/// `σ^{XY}(p)` by quadrature in spherical coordinates centred on the kernel
/// singularity `p_* = (m_Y/m_X) p` with the pole along `p`. The integrand is
/// axisymmetric up to a quadratic factor in the azimuth, so a uniform
/// 8-point azimuthal rule is exact; polar panels are graded towards the
/// antipode, where `M_Y` concentrates for large `|p|`.
pub fn sigma_by_quadrature(params: &ModelParams, pair: SpeciesPair, p: Vec3) -> Result<Mat3> {
    use std::f64::consts::PI;
    let (mx, my) = (params.mass(pair.x), params.mass(pair.y));
    let centre = [my / mx * p[0], my / mx * p[1], my / mx * p[2]];
    let gl = GaussLegendre::new(24)?;
    let r0 = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let reach = my / mx * r0 + 12.0 * params.variance(pair.y).sqrt() + 1.0;
    let edges: Vec<f64> = (0..=30).map(|i| reach * i as f64 / 30.0).collect();
    let (rho, wr) = gl.composite(&edges);
    let mut theta_edges = vec![0.0, 0.5 * PI];
    theta_edges.extend((2..=10).map(|k| PI - PI / 2f64.powi(k)));
    theta_edges.push(PI);
    let (theta, wt) = GaussLegendre::new(16)?.composite(&theta_edges);
    let n_phi = 8;
    let axes = if r0 > 0.0 { crate::basis::orthonormal_frame([p[0] / r0, p[1] / r0, p[2] / r0])? } else { [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] };
    let mut s = [[0.0; 3]; 3];
    for (&th, &w2) in theta.iter().zip(&wt) {
        let (st, m) = th.sin_cos();
        for i_phi in 0..n_phi {
            let a = 2.0 * PI * i_phi as f64 / n_phi as f64;
            let w3 = w2 * st * 2.0 * PI / n_phi as f64;
            let (c, sn) = (st * a.cos(), st * a.sin());
            let n = [0, 1, 2].map(|i| m * axes[0][i] + c * axes[1][i] + sn * axes[2][i]);
            for (&r, &w1) in rho.iter().zip(&wr) {
                let ps = [centre[0] + r * n[0], centre[1] + r * n[1], centre[2] + r * n[2]];
                let z = [-r * n[0] / my, -r * n[1] / my, -r * n[2] / my];
                let w = w1 * w3 * r * r * maxwellian(params, pair.y, ps);
                if w == 0.0 {
                    continue;
                }
                let k = phi_kernel(params, pair, z)?;
                for i in 0..3 {
                    for j in 0..3 {
                        s[i][j] += w * k[i][j];
                    }
                }
            }
        }
    }
    Ok(s)
}

/// Worst-case residuals of the structural identities of `σ^{XY}`.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaStructureReport {
    pub pair: String,
    /// `|λ₁+2λ₂ − tr σ| / tr σ` over the radii, with `σ` from
    /// [`sigma_by_quadrature`].
    pub trace_rel: f64,
    pub trace_radii: Vec<f64>,
    /// `|(p, σp)/|p|² − λ₁| / λ₁` at random `p`.
    pub quadratic_form_rel: f64,
    /// `|∇·σ + (m_B m_Y/m_X²) λ₁ p| / |(m_B m_Y/m_X²) λ₁ p|` by central
    /// differences with step `fd_step`.
    pub divergence_rel: f64,
    pub fd_step: f64,
    /// `λ₁(r) r^{−γ}` divided by the asymptotic prefactor at `asymptotic_radius`.
    pub asymptotic_ratio: f64,
    pub asymptotic_radius: f64,
}

fn sigma_at(params: &ModelParams, pair: SpeciesPair, p: Vec3) -> Result<Mat3> {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let lv = lambda_pair(params, pair, r)?;
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        m[i][i] = lv.lambda2;
        for j in 0..3 {
            m[i][j] += (lv.lambda1 - lv.lambda2) * p[i] * p[j] / (r * r);
        }
    }
    Ok(m)
}

/// Checks the trace identity on `radii`, the quadratic form at `samples`
/// random momenta, the divergence identity and the large-`|p|` prefactor.
pub fn sigma_structure_check(
    params: &ModelParams,
    pair: SpeciesPair,
    radii: &[f64],
    samples: usize,
    rng: &mut impl rand::Rng,
) -> Result<SigmaStructureReport> {
    let mut trace_rel: f64 = 0.0;
    for &r in radii {
        let lv = lambda_pair(params, pair, r)?;
        let s = sigma_by_quadrature(params, pair, [0.0, 0.0, r])?;
        let tr = s[0][0] + s[1][1] + s[2][2];
        trace_rel = trace_rel.max((lv.trace() - tr).abs() / tr);
    }
    let (mx, my) = (params.mass(pair.x), params.mass(pair.y));
    let kappa = params.m_b * my / (mx * mx);
    let h = 1e-4;
    let mut quadratic_form_rel: f64 = 0.0;
    let mut divergence_rel: f64 = 0.0;
    for _ in 0..samples {
        let p: Vec3 = [0, 1, 2].map(|_| rng.gen_range(-3.0..3.0));
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r < 0.1 {
            continue;
        }
        let s = sigma_by_quadrature(params, pair, p)?;
        let lv = lambda_pair(params, pair, r)?;
        let q: f64 = (0..3).map(|i| (0..3).map(|j| p[i] * s[i][j] * p[j]).sum::<f64>()).sum();
        quadratic_form_rel = quadratic_form_rel.max((q / (r * r) - lv.lambda1).abs() / lv.lambda1);
        let mut div = [0.0; 3];
        for j in 0..3 {
            let (mut pp, mut pm) = (p, p);
            pp[j] += h;
            pm[j] -= h;
            let (sp, sm) = (sigma_at(params, pair, pp)?, sigma_at(params, pair, pm)?);
            for i in 0..3 {
                div[i] += (sp[i][j] - sm[i][j]) / (2.0 * h);
            }
        }
        let want = [0, 1, 2].map(|i| -kappa * lv.lambda1 * p[i]);
        let err = ((0..3).map(|i| (div[i] - want[i]).powi(2)).sum::<f64>()).sqrt();
        let scale = ((0..3).map(|i| want[i] * want[i]).sum::<f64>()).sqrt();
        divergence_rel = divergence_rel.max(err / scale);
    }
    let asymptotic_radius = 25.0;
    let (a1, _) = lambda_asymptotic_prefactor(params, pair);
    let asymptotic_ratio = lambda_pair(params, pair, asymptotic_radius)?.lambda1 / asymptotic_radius.powf(params.gamma) / a1;
    Ok(SigmaStructureReport {
        pair: pair.label(),
        trace_rel,
        trace_radii: radii.to_vec(),
        quadratic_form_rel,
        divergence_rel,
        fd_step: h,
        asymptotic_ratio,
        asymptotic_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::maxwellian;

    fn params(gamma: f64) -> ModelParams {
        ModelParams::new(1.5, 1.0, gamma).unwrap()
    }

    #[test]
    fn polar_moments_branches_agree() {
        for k in [1.9999999, 2.0] {
            let a = polar_moments(k);
            let b = polar_moments(k + 1e-9);
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-9);
            }
        }
        // Oracle by Gauss–Legendre.
        let gl = GaussLegendre::new(60).unwrap();
        let (t, w) = gl.on_interval(0.0, 2.0);
        for kappa in [0.0, 0.3, 1.7, 5.0, 80.0] {
            let m = polar_moments(kappa);
            for (k, mk) in m.iter().enumerate() {
                let want: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(k as i32) * (-kappa * t).exp()).sum();
                assert!((mk - want).abs() < 1e-13 * want.max(1e-3), "k={k} kappa={kappa}");
            }
        }
    }

    #[test]
    fn hard_maxwell_origin_values() {
        let p = ModelParams::new(1.0, 1.0, 0.0).unwrap();
        let lv = lambda_pair(&p, SpeciesPair::BB, 0.0).unwrap();
        assert!((lv.lambda1 - 1.0).abs() < 1e-10 && (lv.lambda2 - 1.0).abs() < 1e-10, "{lv:?}");
        let p = ModelParams::new(1.0, 1.0, -2.0).unwrap();
        let lv = lambda_pair(&p, SpeciesPair::BB, 0.0).unwrap();
        assert!((lv.lambda1 - 1.0 / 3.0).abs() < 1e-10 && (lv.lambda2 - 1.0 / 3.0).abs() < 1e-10, "{lv:?}");
    }

    #[test]
    fn maxwell_molecules_closed_form() {
        // γ = 0: σ = c m_Y^{-2}[(|q|² + 2v) I − q qᵀ].
        let p = params(0.0);
        for pair in [SpeciesPair::AB, SpeciesPair::BA, SpeciesPair::BB, SpeciesPair::AA] {
            let (mx, my) = (p.mass(pair.x), p.mass(pair.y));
            let c = p.reduced_mass(pair) / (my * my);
            let v = p.variance(pair.y);
            for r in [0.0, 0.01, 0.7, 3.0, 11.0] {
                let q = my / mx * r;
                let lv = lambda_pair(&p, pair, r).unwrap();
                assert!((lv.lambda1 - c * 2.0 * v).abs() < 1e-9, "{pair} r={r}");
                assert!((lv.lambda2 - c * (q * q + 2.0 * v)).abs() < 1e-9 * (1.0 + q * q), "{pair} r={r}");
            }
        }
    }

    #[test]
    fn trace_identity_against_direct_quadrature() {
        let p = params(-1.0);
        for pair in [SpeciesPair::AB, SpeciesPair::BB] {
            for r in [0.2, 1.3, 4.0] {
                let lv = lambda_pair(&p, pair, r).unwrap();
                let s = sigma_by_quadrature(&p, pair, [0.0, 0.0, r]).unwrap();
                assert!((lv.lambda1 - s[2][2]).abs() < 1e-9 * s[2][2], "{} {}", lv.lambda1, s[2][2]);
                let tr = s[0][0] + s[1][1] + s[2][2];
                assert!((lv.trace() - tr).abs() < 1e-9 * tr);
                assert!(s[0][1].abs() < 1e-12 && s[0][2].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn maxwellian_is_consistent_with_variance() {
        let p = params(0.0);
        let v = maxwellian(&p, crate::kernels::Species::A, [0.0, 0.0, 1.0]) / maxwellian(&p, crate::kernels::Species::A, [0.0; 3]);
        assert!((v - (-1.0 / 3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn asymptotics_match_prefactor() {
        for gamma in [-2.0, -1.0, 0.5, 1.0] {
            let p = params(gamma);
            for pair in [SpeciesPair::AB, SpeciesPair::BB, SpeciesPair::BA] {
                let (a1, a2) = lambda_asymptotic_prefactor(&p, pair);
                let r = 200.0;
                let lv = lambda_pair(&p, pair, r).unwrap();
                assert!((lv.lambda1 / r.powf(gamma) / a1 - 1.0).abs() < 1e-3, "{gamma} {pair}");
                assert!((lv.lambda2 / r.powf(gamma + 2.0) / a2 - 1.0).abs() < 1e-3, "{gamma} {pair}");
            }
        }
    }

    #[test]
    fn table_interpolates_and_round_trips() {
        let p = params(-0.5);
        let t = SigmaTable::build_on(&p, SpeciesPair::AB, 120, 1e-3, 30.0).unwrap();
        for r in [2e-4, 0.05, 0.9, 4.4, 17.0, 45.0] {
            let (l1, l2) = t.eval(r);
            let lv = lambda_pair(&p, SpeciesPair::AB, r).unwrap();
            let tol = if r > 30.0 { 1e-2 } else { 1e-6 };
            assert!((l1 - lv.lambda1).abs() < tol * lv.lambda1, "r={r}: {l1} vs {}", lv.lambda1);
            assert!((l2 - lv.lambda2).abs() < tol * lv.lambda2, "r={r}: {l2} vs {}", lv.lambda2);
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = SigmaTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back.pair, t.pair);
        assert_eq!(back.radii, t.radii);
        assert_eq!(back.lambda1, t.lambda1);
        assert_eq!(back.lambda2, t.lambda2);
        assert_eq!(back.eval(3.3), t.eval(3.3));
    }

    #[test]
    fn csv_errors_name_the_line() {
        let text = "# pair=AB,m_A=1.5,m_B=1,gamma=0\nr,lambda1,lambda2\n1,2,3\n2,x,3\n";
        match SigmaTable::read_csv(text.as_bytes()) {
            Err(Error::Config { location, .. }) => assert_eq!(location, "line 4"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sigma_matrix_structure() {
        let p = params(0.3);
        let t = SigmaTable::build_on(&p, SpeciesPair::BB, 80, 1e-3, 30.0).unwrap();
        let s = sigma_matrix(&t, [2.0, 0.0, 0.0]);
        let (l1, l2) = t.eval(2.0);
        assert!((s[0][0] - l1).abs() < 1e-15 && (s[1][1] - l2).abs() < 1e-15 && (s[2][2] - l2).abs() < 1e-15);
        assert_eq!(s[0][1], 0.0);
        let s0 = sigma_matrix(&t, [0.0; 3]);
        assert_eq!(s0[0][0], t.lambda_origin);
    }

    #[test]
    fn rejects_negative_radius() {
        assert!(lambda_pair(&params(0.0), SpeciesPair::BB, -1.0).is_err());
    }

    #[test]
    fn structure_check_on_maxwell_molecules() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = params(0.0);
        for pair in [SpeciesPair::AB, SpeciesPair::BB] {
            let rep = sigma_structure_check(&p, pair, &[0.5, 2.0], 3, &mut rng).unwrap();
            assert!(rep.trace_rel < 1e-10 && rep.quadratic_form_rel < 1e-10, "{rep:?}");
            assert!(rep.divergence_rel < 1e-6, "{rep:?}");
        }
    }
}
