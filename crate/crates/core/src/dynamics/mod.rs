//! Evolution of the coupled Fourier modes `(ĝ, ĥ)`, the four-part split of
//! `ĥ`, spatial-norm synthesis over radial `|η|`, decay fits, the Picard
//! decomposition and smoothing probes.

mod hsplit;
mod norms;
mod picard;
mod smoothing;

pub use hsplit::{h_component_split, HSplit};
pub use norms::{
    component_norms, fit_decay, fit_exponential, initial_profile, radial_grid, synthesize_norms, Component, ComponentNorms,
    DecayFit, NormKind, RadialGrid, EXPONENTIAL_WINDOW, POWER_WINDOW,
};
pub use picard::{picard_decompose, PicardDecomposition};
pub use smoothing::{smoothing_probe, SmoothingReport};

use std::sync::atomic::{AtomicUsize, Ordering};

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use serde::Serialize;

use crate::assembly::{mode_matrix, LinearizedSystem};
use crate::error::{Error, Result};
use crate::kernels::SpeciesPair;
use crate::linalg::{cnorm, eigen, to_complex};

/// Below this separation the divided difference switches to its series.
pub const RESONANCE_THRESHOLD: f64 = 1e-6;
const RESONANCE_TERMS: usize = 6;

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Worker count for per-`|η|` loops. Results do not depend on it.
pub fn set_threads(k: usize) {
    THREADS.store(k.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Order-preserving parallel map over independent items.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let k = threads().min(items.len().max(1));
    if k <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(k);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

fn one_norm(a: &Mat<c64>) -> f64 {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn combine(terms: &[(f64, &Mat<c64>)], diag: f64) -> Mat<c64> {
    let n = terms[0].1.nrows();
    Mat::from_fn(n, n, |i, j| {
        let mut v = if i == j { c64::new(diag, 0.0) } else { c64::new(0.0, 0.0) };
        for (c, m) in terms {
            v += m[(i, j)] * *c;
        }
        v
    })
}

/// `exp(A)` by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: &Mat<c64>) -> Mat<c64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let f = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * f);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * combine(&[(B[13], &a6), (B[11], &a4), (B[9], &a2)], 0.0);
    let u = &a * combine(&[(1.0, &u_inner), (B[7], &a6), (B[5], &a4), (B[3], &a2)], B[1]);
    let v_inner = &a6 * combine(&[(B[12], &a6), (B[10], &a4), (B[8], &a2)], 0.0);
    let v = combine(&[(1.0, &v_inner), (B[6], &a6), (B[4], &a4), (B[2], &a2)], B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `∫₀ᵗ e^{μ(t−s)} e^{λs} ds = (e^{λt} − e^{μt})/(λ − μ)`, with a series
/// when `|λ − μ| <` [`RESONANCE_THRESHOLD`] (giving `t e^{λt}` at coincidence).
pub fn exp_divided_difference(mu: c64, lambda: c64, t: f64) -> c64 {
    let d = lambda - mu;
    let z = d * (0.5 * t);
    let mid = ((lambda + mu) * (0.5 * t)).exp();
    if d.norm() < RESONANCE_THRESHOLD {
        let z2 = z * z;
        let mut term = c64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..RESONANCE_TERMS {
            term *= z2 / ((2 * k * (2 * k + 1)) as f64);
            sum += term;
        }
        return mid * sum * t;
    }
    if z.re.abs() > 200.0 {
        return ((lambda * t).exp() - (mu * t).exp()) / d;
    }
    mid * z.sinh() * 2.0 / d
}

/// Largest relative jump of [`exp_divided_difference`] between
/// `|λ − μ| = RESONANCE_THRESHOLD·(1 ∓ 10⁻⁹)`, over eight directions of
/// `λ − μ`, every `μ` and every `t`.
pub fn resonance_switch_jump(mus: &[c64], times: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &mu in mus {
        for k in 0..8 {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            let dir = c64::new(a.cos(), a.sin());
            for &t in times {
                let lo = exp_divided_difference(mu, mu + dir * (RESONANCE_THRESHOLD * (1.0 - 1e-9)), t);
                let hi = exp_divided_difference(mu, mu + dir * (RESONANCE_THRESHOLD * (1.0 + 1e-9)), t);
                let scale = lo.norm().max(hi.norm());
                if scale > 1e-250 {
                    worst = worst.max((lo - hi).norm() / scale);
                }
            }
        }
    }
    worst
}

/// Diagonalization `M = V diag(λ) V⁻¹` of a mode matrix.
#[derive(Debug, Clone)]
pub struct ModeEigen {
    pub values: Vec<c64>,
    pub vectors: Mat<c64>,
    pub inverse: Mat<c64>,
    /// `max|V diag(λ) V⁻¹ − M| / max|M|`.
    pub reconstruction: f64,
}

pub fn mode_eigen(m: &Mat<c64>) -> Result<ModeEigen> {
    let n = m.nrows();
    let (values, vectors) = eigen(m)?;
    let inverse = vectors.partial_piv_lu().solve(identity(n));
    let scaled = Mat::from_fn(n, n, |i, j| vectors[(i, j)] * values[j]);
    let rec = &scaled * &inverse;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            err = err.max((rec[(i, j)] - m[(i, j)]).norm());
            scale = scale.max(m[(i, j)].norm());
        }
    }
    let reconstruction = err / scale.max(1e-300);
    if !(reconstruction < 1e-8) {
        return Err(Error::Numerical(format!("mode matrix is too far from diagonalizable (reconstruction {reconstruction:.2e})")));
    }
    Ok(ModeEigen { values, vectors, inverse, reconstruction })
}

impl ModeEigen {
    /// Indices of the `k` eigenvalues with largest real part, in that order.
    pub fn top_real(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].re.total_cmp(&self.values[a].re).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }

    pub fn coords(&self, x: &[c64]) -> Vec<c64> {
        mul_vec(&self.inverse, x)
    }

    pub fn synthesize(&self, y: &[c64]) -> Vec<c64> {
        mul_vec(&self.vectors, y)
    }
}

pub(crate) fn mul_vec(a: &Mat<c64>, x: &[c64]) -> Vec<c64> {
    let xm = Mat::from_fn(x.len(), 1, |i, _| x[i]);
    let y = a * &xm;
    (0..a.nrows()).map(|i| y[(i, 0)]).collect()
}

/// Eigen-data of both mode operators at one `|η|` and the coupling
/// `V_B⁻¹ L_BA V_A` in eigen-coordinates.
#[derive(Debug, Clone)]
pub struct PairModes {
    pub eta: f64,
    pub a: ModeEigen,
    pub b: ModeEigen,
    pub coupling: Mat<c64>,
    pub fluid_a: Vec<usize>,
    pub fluid_b: Vec<usize>,
}

impl PairModes {
    pub fn new(system: &LinearizedSystem, eta: f64) -> Result<Self> {
        let a = mode_eigen(&mode_matrix(&system.ab, &system.params, eta))?;
        let b = mode_eigen(&mode_matrix(&system.bb, &system.params, eta))?;
        let coupling = &(&b.inverse * to_complex(&system.l_ba.matrix)) * &a.vectors;
        let fluid_a = a.top_real(1);
        let fluid_b = b.top_real(5);
        Ok(Self { eta, a, b, coupling, fluid_a, fluid_b })
    }

    pub fn is_fluid_a(&self, l: usize) -> bool {
        self.fluid_a.contains(&l)
    }

    pub fn is_fluid_b(&self, k: usize) -> bool {
        self.fluid_b.contains(&k)
    }

    /// `e^{tA} ĝ` in A eigen-coordinates.
    pub fn g_coords(&self, ca: &[c64], t: f64) -> Vec<c64> {
        ca.iter().zip(&self.a.values).map(|(c, l)| c * (l * t).exp()).collect()
    }

    /// Duhamel part of `ĥ(t)` in B eigen-coordinates, restricted to the
    /// (row, column) index classes accepted by `keep`.
    pub fn duhamel_coords(&self, ca: &[c64], t: f64, keep: impl Fn(usize, usize) -> bool) -> Vec<c64> {
        let nb = self.b.values.len();
        (0..nb)
            .map(|k| {
                let mu = self.b.values[k];
                let mut s = c64::new(0.0, 0.0);
                for (l, c) in ca.iter().enumerate() {
                    if keep(k, l) {
                        s += self.coupling[(k, l)] * c * exp_divided_difference(mu, self.a.values[l], t);
                    }
                }
                s
            })
            .collect()
    }
}

/// Solution samples of one coupled mode.
#[derive(Debug, Clone, Serialize)]
pub struct ModeTrajectory {
    pub eta: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub g: Vec<Vec<c64>>,
    #[serde(skip)]
    pub h: Vec<Vec<c64>>,
    pub g_norms: Vec<f64>,
    pub h_norms: Vec<f64>,
}

/// Evolves `∂_t(ĝ, ĥ) = [[A_AB, 0], [L_BA, A_BB]](ĝ, ĥ)` with
/// `A_XY = L_XY − i(|η|/m_X)T_ω`, exactly in the eigenbases of the diagonal
/// blocks.
pub fn evolve_pair_mode(system: &LinearizedSystem, eta: f64, g0: &[c64], h0: &[c64], times: &[f64]) -> Result<ModeTrajectory> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("times must start at 0 and increase".into()));
    }
    let (na, nb) = (system.basis_a.size(), system.basis_b.size());
    if g0.len() != na || h0.len() != nb {
        return Err(Error::InvalidInput(format!("initial data must have lengths ({na}, {nb})")));
    }
    let modes = PairModes::new(system, eta)?;
    Ok(evolve_with(&modes, g0, h0, times))
}

pub fn evolve_with(modes: &PairModes, g0: &[c64], h0: &[c64], times: &[f64]) -> ModeTrajectory {
    let ca = modes.a.coords(g0);
    let cb = modes.b.coords(h0);
    let mut g = Vec::with_capacity(times.len());
    let mut h = Vec::with_capacity(times.len());
    for &t in times {
        if t == 0.0 {
            g.push(g0.to_vec());
            h.push(h0.to_vec());
            continue;
        }
        g.push(modes.a.synthesize(&modes.g_coords(&ca, t)));
        let mut y = modes.duhamel_coords(&ca, t, |_, _| true);
        for (yk, (c, mu)) in y.iter_mut().zip(cb.iter().zip(&modes.b.values)) {
            *yk += c * (mu * t).exp();
        }
        h.push(modes.b.synthesize(&y));
    }
    let g_norms = g.iter().map(|v| cnorm(v)).collect();
    let h_norms = h.iter().map(|v| cnorm(v)).collect();
    ModeTrajectory { eta: modes.eta, times: times.to_vec(), g, h, g_norms, h_norms }
}

/// Block matrix of the coupled system, for checks by [`expm`].
pub fn block_matrix(system: &LinearizedSystem, eta: f64) -> Mat<c64> {
    let a = mode_matrix(&system.ab, &system.params, eta);
    let b = mode_matrix(&system.bb, &system.params, eta);
    let (na, nb) = (a.nrows(), b.nrows());
    let c = &system.l_ba.matrix;
    Mat::from_fn(na + nb, na + nb, |i, j| match (i < na, j < na) {
        (true, true) => a[(i, j)],
        (true, false) => c64::new(0.0, 0.0),
        (false, true) => c64::new(c[(i - na, j)], 0.0),
        (false, false) => b[(i - na, j - na)],
    })
}

/// Fluid count of a pair, re-exported for the dynamics callers.
pub fn fluid_count(pair: SpeciesPair) -> usize {
    crate::spectral::fluid_count(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretization;
    use crate::kernels::ModelParams;
    use crate::linalg::real_vec;
    use proptest::prelude::*;

    fn system() -> LinearizedSystem {
        let p = ModelParams::new(1.5, 1.0, 0.0).unwrap();
        LinearizedSystem::assemble(&p, Discretization { degree: 4, ..Default::default() }).unwrap()
    }

    fn diag(v: &[c64]) -> Mat<c64> {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] } else { c64::new(0.0, 0.0) })
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = [c64::new(-3.0, 1.0), c64::new(20.0, -4.0), c64::new(0.5, 0.0)];
        let e = expm(&diag(&d));
        for i in 0..3 {
            assert!((e[(i, i)] - d[i].exp()).norm() < 1e-13 * d[i].exp().norm());
        }
        // exp([[0, a], [0, 0]]) = [[1, a], [0, 1]].
        let n = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { c64::new(7.0, 2.0) } else { c64::new(0.0, 0.0) });
        let e = expm(&n);
        assert!((e[(0, 1)] - c64::new(7.0, 2.0)).norm() < 1e-14 && (e[(0, 0)] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn divided_difference_matches_quadrature() {
        let gl = crate::quad::GaussLegendre::new(40).unwrap();
        for (mu, la, t) in [
            (c64::new(-1.0, 2.0), c64::new(-0.5, -1.0), 3.0),
            (c64::new(-2.0, 0.0), c64::new(-2.0 + 3e-7, 1e-7), 10.0),
            (c64::new(-1e-3, 0.0), c64::new(-1e-3, 0.0), 50.0),
        ] {
            let (x, w) = gl.composite(&crate::fit::linspace(0.0, t, 101));
            let q: c64 = x.iter().zip(&w).map(|(s, w)| (mu * (t - s)).exp() * (la * s).exp() * *w).sum();
            let d = exp_divided_difference(mu, la, t);
            assert!((q - d).norm() < 1e-11 * q.norm(), "{q} {d}");
        }
    }

    #[test]
    fn divided_difference_is_continuous_at_switch() {
        let mu = c64::new(-0.3, 0.1);
        for t in [1e-2, 1.0, 1e2, 1e4] {
            let below = exp_divided_difference(mu, mu + c64::new(RESONANCE_THRESHOLD * (1.0 - 1e-9), 0.0), t);
            let above = exp_divided_difference(mu, mu + c64::new(RESONANCE_THRESHOLD * (1.0 + 1e-9), 0.0), t);
            assert!((below - above).norm() <= 1e-6 * below.norm().max(1e-300), "t={t}");
        }
        let mus = [c64::new(0.0, 0.0), c64::new(-0.3, 0.1), c64::new(-2.0, -1.5)];
        assert!(resonance_switch_jump(&mus, &[1e-2, 1.0, 1e2, 1e4]) < 1e-6);
    }

    #[test]
    fn kernel_vector_is_stationary_at_zero_mode() {
        let s = system();
        let nb = s.basis_b.size();
        let g0 = vec![c64::new(0.0, 0.0); s.basis_a.size()];
        let tr = evolve_pair_mode(&s, 0.0, &g0, &real_vec(&s.special.chi[0]), &[0.0, 1.0, 10.0]).unwrap();
        for h in &tr.h {
            for i in 0..nb {
                assert!((h[i] - s.special.chi[0][i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigen_route_matches_block_exponential() {
        let s = system();
        let g0 = real_vec(&s.special.e_d);
        let h0: Vec<c64> = (0..s.basis_b.size()).map(|i| c64::new(0.1 / (1.0 + i as f64), 0.0)).collect();
        let eta = 0.8;
        let tr = evolve_pair_mode(&s, eta, &g0, &h0, &[0.0, 0.5, 3.0]).unwrap();
        let m = block_matrix(&s, eta);
        let x0: Vec<c64> = g0.iter().chain(&h0).copied().collect();
        for (k, &t) in tr.times.iter().enumerate().skip(1) {
            let e = expm(&Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * t));
            let x = mul_vec(&e, &x0);
            let na = g0.len();
            let err = x[..na].iter().zip(&tr.g[k]).chain(x[na..].iter().zip(&tr.h[k])).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10 * cnorm(&x), "t={t} err={err}");
        }
    }

    #[test]
    fn semigroup_and_contraction() {
        let s = system();
        let m = block_matrix(&s, 1.0);
        let scaled = |t: f64| expm(&Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * t));
        let e1 = scaled(0.7);
        let e2 = scaled(1.3);
        let e3 = scaled(2.0);
        let prod = &e2 * &e1;
        let mut err: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                err = err.max((prod[(i, j)] - e3[(i, j)]).norm());
            }
        }
        assert!(err < 1e-10);
        let g0 = real_vec(&s.special.e_d);
        let h0 = vec![c64::new(0.0, 0.0); s.basis_b.size()];
        let tr = evolve_pair_mode(&s, 1.0, &g0, &h0, &crate::fit::linspace(0.0, 20.0, 21)).unwrap();
        assert!(tr.g_norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn divided_difference_symmetric(a in -3.0f64..0.0, b in -3.0f64..0.0, c in -2.0f64..2.0, t in 0.01f64..20.0) {
            let (mu, la) = (c64::new(a, c), c64::new(b, -c));
            let x = exp_divided_difference(mu, la, t);
            let y = exp_divided_difference(la, mu, t);
            prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1e-300));
        }
    }
}
