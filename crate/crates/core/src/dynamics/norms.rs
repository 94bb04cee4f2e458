use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::Serialize;

use super::{exp_divided_difference, par_map, PairModes};
use crate::assembly::LinearizedSystem;
use crate::error::{Error, Result};
use crate::fit::{least_squares, line_fit};
use crate::kernels::Species;
use crate::linalg::real_vec;
use crate::quad::GaussLegendre;

/// Default window for algebraic decay fits.
pub const POWER_WINDOW: (f64, f64) = (1e2, 1e4);
/// Default window for exponential decay fits.
pub const EXPONENTIAL_WINDOW: (f64, f64) = (1.0, 1e2);

/// Composite Gauss–Legendre rule in `|η|`: geometrically graded panels on
/// `[0, δ]` and uniform panels on `[δ, η_max]`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Nodes `< n_long` lie below `δ`.
    pub n_long: usize,
    pub delta: f64,
    pub eta_max: f64,
}

pub fn radial_grid(delta: f64, eta_max: f64, long_panels: usize, short_panels: usize, points: usize) -> Result<RadialGrid> {
    if !(delta > 0.0 && eta_max > delta) || long_panels == 0 || short_panels == 0 {
        return Err(Error::InvalidInput(format!("radial grid needs 0 < delta < eta_max, got ({delta}, {eta_max})")));
    }
    let gl = GaussLegendre::new(points)?;
    let mut edges = vec![0.0];
    edges.extend((0..long_panels).map(|i| delta * 0.5f64.powi((long_panels - 1 - i) as i32)));
    let (mut nodes, mut weights) = gl.composite(&edges);
    let n_long = nodes.len();
    let short_edges = crate::fit::linspace(delta, eta_max, short_panels + 1);
    let (sn, sw) = gl.composite(&short_edges);
    nodes.extend(sn);
    weights.extend(sw);
    Ok(RadialGrid { nodes, weights, n_long, delta, eta_max })
}

impl RadialGrid {
    /// Default: 12 graded panels below `δ`, 4 panels above, 6 points each.
    pub fn standard(delta: f64, eta_max: f64) -> Result<Self> {
        radial_grid(delta, eta_max, 12, 4, 6)
    }

    /// Same panels with twice the points per panel.
    pub fn refined(delta: f64, eta_max: f64) -> Result<Self> {
        radial_grid(delta, eta_max, 12, 4, 12)
    }
}

/// Radial profile of the default initial data `ĝ_in(η) = φ(|η|) E_D`.
pub fn initial_profile(eta: f64) -> f64 {
    (-0.5 * eta * eta).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Component {
    GFluid,
    GNonfluid,
    GShort,
    H00,
    H0Perp,
    HPerp0,
    HPerpPerp,
    HShort,
}

impl Component {
    pub const ALL: [Component; 8] = [
        Component::GFluid,
        Component::GNonfluid,
        Component::GShort,
        Component::H00,
        Component::H0Perp,
        Component::HPerp0,
        Component::HPerpPerp,
        Component::HShort,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Component::GFluid => "g-fluid",
            Component::GNonfluid => "g-nonfluid",
            Component::GShort => "g-short",
            Component::H00 => "h00",
            Component::H0Perp => "h0perp",
            Component::HPerp0 => "hperp0",
            Component::HPerpPerp => "hperpperp",
            Component::HShort => "h-short",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown component {s:?}; expected one of {:?}", Self::ALL.map(|c| c.label()))))
    }

    pub fn is_short(self) -> bool {
        matches!(self, Component::GShort | Component::HShort)
    }

    pub fn species(self) -> Species {
        match self {
            Component::GFluid | Component::GNonfluid | Component::GShort => Species::A,
            _ => Species::B,
        }
    }

    /// Whether the component decays exponentially.
    pub fn is_exponential(self) -> bool {
        matches!(self, Component::GNonfluid | Component::GShort | Component::HPerpPerp | Component::HShort)
    }
}

/// `‖û‖` and `‖D_p û‖` of every component at one `|η|` along `times`.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentNorms {
    pub eta: f64,
    /// Indexed `[component][ℓ][time]`; components not defined at this
    /// `|η|` (long vs short) are empty.
    pub values: Vec<[Vec<f64>; 2]>,
}

fn gradient_gram(system: &LinearizedSystem, species: Species) -> Mat<c64> {
    let basis = system.basis(species);
    let n = basis.size();
    let mut g = Mat::<f64>::zeros(n, n);
    for axis in 0..3 {
        let (full, _, _) = basis.derivative_matrix(axis);
        g = &g + &(full.transpose() * &full);
    }
    crate::linalg::to_complex(&g)
}

fn norms_of(v: &[c64], gram: &Mat<c64>) -> [f64; 2] {
    let l0 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let gv = super::mul_vec(gram, v);
    let l1 = v.iter().zip(&gv).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0).sqrt();
    [l0, l1]
}

/// Evolves `ĝ_in = φ(|η|)E_D`, `ĥ_in = 0` at every node of `grid` and records
/// the component norms.
pub fn component_norms(system: &LinearizedSystem, grid: &RadialGrid, times: &[f64]) -> Result<Vec<ComponentNorms>> {
    let gram_a = gradient_gram(system, Species::A);
    let gram_b = gradient_gram(system, Species::B);
    let idx: Vec<usize> = (0..grid.nodes.len()).collect();
    par_map(&idx, |&i| {
        let eta = grid.nodes[i];
        let long = i < grid.n_long;
        let modes = PairModes::new(system, eta)?;
        let g0: Vec<c64> = real_vec(&system.special.e_d).into_iter().map(|x| x * initial_profile(eta)).collect();
        let ca = modes.a.coords(&g0);
        let mut values: Vec<[Vec<f64>; 2]> = vec![Default::default(); Component::ALL.len()];
        let mut push = |c: Component, v: &[c64], gram: &Mat<c64>| {
            let n = norms_of(v, gram);
            let slot = &mut values[c as usize];
            slot[0].push(n[0]);
            slot[1].push(n[1]);
        };
        for &t in times {
            let ga = modes.g_coords(&ca, t);
            if long {
                let fl: Vec<c64> = ga.iter().enumerate().map(|(l, v)| if modes.is_fluid_a(l) { *v } else { c64::new(0.0, 0.0) }).collect();
                let nf: Vec<c64> = ga.iter().zip(&fl).map(|(a, b)| a - b).collect();
                push(Component::GFluid, &modes.a.synthesize(&fl), &gram_a);
                push(Component::GNonfluid, &modes.a.synthesize(&nf), &gram_a);
                let nb = modes.b.values.len();
                let mut parts = vec![vec![c64::new(0.0, 0.0); nb]; 4];
                for (k, mu) in modes.b.values.iter().enumerate() {
                    let fb = modes.is_fluid_b(k);
                    for (l, c) in ca.iter().enumerate() {
                        let q = 2 * usize::from(!fb) + usize::from(!modes.is_fluid_a(l));
                        parts[q][k] += modes.coupling[(k, l)] * c * exp_divided_difference(*mu, modes.a.values[l], t);
                    }
                }
                for (q, c) in [Component::H00, Component::H0Perp, Component::HPerp0, Component::HPerpPerp].into_iter().enumerate() {
                    push(c, &modes.b.synthesize(&parts[q]), &gram_b);
                }
            } else {
                push(Component::GShort, &modes.a.synthesize(&ga), &gram_a);
                let y = modes.duhamel_coords(&ca, t, |_, _| true);
                push(Component::HShort, &modes.b.synthesize(&y), &gram_b);
            }
        }
        Ok(ComponentNorms { eta, values })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormKind {
    /// `‖∇_p^ℓ ∇_x^k u‖_{L²}`.
    L2,
    /// `∫ 4π|η|²|η|^k ‖D_p^ℓ û‖ d|η|`, an upper bound for the `L^∞_x` norm.
    LinfProxy,
}

/// Radial synthesis of a spatial norm from per-mode norms, for each time.
/// `per_mode[i][t]` is the mode norm at `grid.nodes[i]`; only nodes in the
/// component's region contribute.
pub fn synthesize_norms(grid: &RadialGrid, per_mode: &[Vec<f64>], short: bool, k: u32, kind: NormKind) -> Result<Vec<f64>> {
    if per_mode.len() != grid.nodes.len() {
        return Err(Error::InvalidInput("one series per radial node expected".into()));
    }
    let range = if short { grid.n_long..grid.nodes.len() } else { 0..grid.n_long };
    let nt = per_mode[range.start].len();
    let mut out = vec![0.0; nt];
    for i in range {
        let (eta, w) = (grid.nodes[i], grid.weights[i]);
        if per_mode[i].len() != nt {
            return Err(Error::InvalidInput("series lengths differ across nodes".into()));
        }
        for (o, v) in out.iter_mut().zip(&per_mode[i]) {
            *o += match kind {
                NormKind::L2 => w * 4.0 * PI * eta * eta * eta.powi(2 * k as i32) * v * v,
                NormKind::LinfProxy => w * 4.0 * PI * eta * eta * eta.powi(k as i32) * v,
            };
        }
    }
    if kind == NormKind::L2 {
        let c = (2.0 * PI).powi(3);
        out.iter_mut().for_each(|o| *o = (c * *o).sqrt());
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub label: String,
    pub window: [f64; 2],
    /// Exponent of `(1+t)` for algebraic fits, rate for exponential ones.
    pub slope: f64,
    /// Two standard errors of the slope.
    pub half_width: f64,
    pub residual: f64,
    pub points: usize,
    /// The series is non-increasing inside the window.
    pub monotone: bool,
    pub exponential: bool,
}

fn windowed(times: &[f64], values: &[f64], window: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= window.0 * (1.0 - 1e-12) && **t <= window.1 * (1.0 + 1e-12) && **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, *v))
        .unzip()
}

fn slope_half_width(x: &[f64], rms: f64) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let dof = (n - 2.0).max(1.0);
    2.0 * (rms * rms * n / dof / sxx).sqrt()
}

/// Slope of `log value` against `log(1+t)` over `window`.
pub fn fit_decay(label: &str, times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if window.0 < 10.0 {
        return Err(Error::InvalidInput(format!("algebraic fits need t1 >= 10, got {}", window.0)));
    }
    let (t, v) = windowed(times, values, window);
    if t.len() < 12 {
        return Err(Error::InvalidInput(format!("{label}: {} positive samples in the window, need >= 12", t.len())));
    }
    let x: Vec<f64> = t.iter().map(|t| (1.0 + t).ln()).collect();
    let y: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let f = line_fit(&x, &y)?;
    Ok(DecayFit {
        label: label.into(),
        window: [window.0, window.1],
        slope: f.slope,
        half_width: slope_half_width(&x, f.rms_residual),
        residual: f.rms_residual,
        points: t.len(),
        monotone: v.windows(2).all(|w| w[1] <= w[0]),
        exponential: false,
    })
}

/// Rate of `log value` against `t`, with a `log t` term absorbing the
/// algebraic prefactor of `t e^{−τt}` behavior.
pub fn fit_exponential(label: &str, times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (t, v) = windowed(times, values, window);
    if t.len() < 4 {
        return Err(Error::InvalidInput(format!("{label}: {} positive samples in the window, need >= 4", t.len())));
    }
    let y: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let (c, rms) = least_squares(&[t.clone(), t.iter().map(|t| t.ln()).collect(), vec![1.0; t.len()]], &y)?;
    Ok(DecayFit {
        label: label.into(),
        window: [window.0, window.1],
        slope: c[0],
        half_width: slope_half_width(&t, rms),
        residual: rms,
        points: t.len(),
        monotone: v.windows(2).all(|w| w[1] <= w[0]),
        exponential: true,
    })
}
