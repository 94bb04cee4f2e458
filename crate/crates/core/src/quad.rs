//! Quadrature rules: Gauss–Hermite (probabilists' weight) in one and three
//! dimensions, Gauss–Legendre, and adaptive Gauss–Kronrod (7/15) for
//! vector-valued integrands.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Gauss–Hermite rule for the standard normal density `exp(-x²/2)/√(2π)`.
///
/// An `n`-point rule integrates polynomials of degree `2n - 1` exactly and
/// the weights sum to one.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal probabilists' Hermite polynomials `He_k(x)/√k!` for
/// `k = 0..=n`, evaluated at `x`.
pub fn hermite_orthonormal(n: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0);
    if n == 0 {
        return h;
    }
    h.push(x);
    for k in 1..n {
        let next = (x * h[k] - (k as f64).sqrt() * h[k - 1]) / ((k + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("Gauss–Hermite order must be positive".into()));
        }
        if n == 1 {
            return Ok(Self { nodes: vec![0.0], weights: vec![1.0] });
        }
        // Golub–Welsch for a first guess, then Newton polish on the recurrence.
        let jacobi = Mat::<f64>::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let evd = jacobi
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("Gauss–Hermite eigensolve failed: {e:?}")))?;
        let mut nodes: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
        let mut weights = vec![0.0; n];
        for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
            for _ in 0..4 {
                let h = hermite_orthonormal(n, *x);
                let step = h[n] / ((n as f64).sqrt() * h[n - 1]);
                *x -= step;
                if step.abs() < 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let h = hermite_orthonormal(n, *x);
            *w = 1.0 / (n as f64 * h[n - 1] * h[n - 1]);
        }
        // Exact mirror symmetry keeps discrete reflections exact.
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("Gauss–Legendre order must be positive".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let x = self.nodes.iter().map(|t| mid + half * t).collect();
        let w = self.weights.iter().map(|w| w * half).collect();
        (x, w)
    }

    /// Composite rule over consecutive panels `[edges[i], edges[i+1]]`.
    pub fn composite(&self, edges: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(self.nodes.len() * edges.len());
        let mut ws = Vec::with_capacity(xs.capacity());
        for pair in edges.windows(2) {
            let (x, w) = self.on_interval(pair[0], pair[1]);
            xs.extend(x);
            ws.extend(w);
        }
        (xs, ws)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<const D: usize>(f: &mut impl FnMut(f64) -> [f64; D], a: f64, b: f64) -> ([f64; D], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; D];
    let mut gauss = [0.0; D];
    let fc = f(c);
    for d in 0..D {
        kron[d] = WGK[7] * fc[d];
        gauss[d] = WG[3] * fc[d];
    }
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        for d in 0..D {
            kron[d] += wk * (f1[d] + f2[d]);
            if j % 2 == 1 {
                gauss[d] += WG[j / 2] * (f1[d] + f2[d]);
            }
        }
    }
    let mut err: f64 = 0.0;
    for d in 0..D {
        kron[d] *= h;
        gauss[d] *= h;
        err = err.max((kron[d] - gauss[d]).abs());
    }
    (kron, err)
}

/// Globally adaptive Gauss–Kronrod integration of a vector-valued integrand.
///
/// Bisects the panel with the largest error until the summed error estimate
/// drops below `max(abs_tol, rel_tol * |I|_∞)`. Returns the integral and the
/// final error estimate.
pub fn adaptive_gk<const D: usize>(
    mut f: impl FnMut(f64) -> [f64; D],
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<([f64; D], f64)> {
    let mut panels = vec![(a, b, gk15(&mut f, a, b))];
    loop {
        let mut total = [0.0; D];
        let mut err = 0.0;
        let mut worst = 0;
        for (i, (_, _, (v, e))) in panels.iter().enumerate() {
            for d in 0..D {
                total[d] += v[d];
            }
            err += e;
            if *e > panels[worst].2 .1 {
                worst = i;
            }
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if err <= abs_tol.max(rel_tol * scale) {
            return Ok((total, err));
        }
        if panels.len() >= max_panels {
            return Err(Error::QuadratureNotConverged { estimate: err, tolerance: abs_tol.max(rel_tol * scale) });
        }
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        panels.push((lo, mid, gk15(&mut f, lo, mid)));
        panels.push((mid, hi, gk15(&mut f, mid, hi)));
    }
}


/// Tensor-product Gauss–Hermite rule in three dimensions for the density of
/// `N(0, v I)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub variance: f64,
}

impl QuadratureRule {
    pub fn gauss_hermite(order: usize, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidInput(format!("rule variance must be positive, got {variance}")));
        }
        let gh = GaussHermite::new(order)?;
        let sd = variance.sqrt();
        let mut nodes = Vec::with_capacity(order.pow(3));
        let mut weights = Vec::with_capacity(order.pow(3));
        for i in 0..order {
            for j in 0..order {
                for k in 0..order {
                    nodes.push([sd * gh.nodes[i], sd * gh.nodes[j], sd * gh.nodes[k]]);
                    weights.push(gh.weights[i] * gh.weights[j] * gh.weights[k]);
                }
            }
        }
        Ok(Self { nodes, weights, variance })
    }

    /// Drops nodes whose weight is below `rel` times the largest weight.
    pub fn pruned(self, rel: f64) -> Self {
        let cut = rel * self.weights.iter().fold(0.0f64, |m, &w| m.max(w));
        self.retain_weights_at_least(cut)
    }

    /// Drops nodes whose weight is below `cut`.
    pub fn retain_weights_at_least(mut self, cut: f64) -> Self {
        let keep: Vec<bool> = self.weights.iter().map(|&w| w >= cut).collect();
        let mut it = keep.iter();
        self.nodes.retain(|_| *it.next().unwrap());
        self.weights.retain(|&w| w >= cut);
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reference density `N(0, v I)` at `p`.
    pub fn density(&self, p: [f64; 3]) -> f64 {
        let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        (2.0 * std::f64::consts::PI * self.variance).powf(-1.5) * (-0.5 * r2 / self.variance).exp()
    }

    /// Weights for integrals against Lebesgue measure.
    pub fn lebesgue_weights(&self) -> Vec<f64> {
        self.nodes.iter().zip(&self.weights).map(|(&p, &w)| w / self.density(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(12).unwrap();
        let m = |k: i32| gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-13);
        assert!((m(4) - 3.0).abs() < 1e-12);
        assert!((m(22) - 13_749_310_575.0).abs() / 13_749_310_575.0 < 1e-11);
        assert!(m(5).abs() < 1e-13);
    }

    #[test]
    fn hermite_orthonormality_is_exact_in_rule() {
        let n = 10;
        let gh = GaussHermite::new(n).unwrap();
        for a in 0..n {
            for b in 0..n {
                let s: f64 = gh
                    .nodes
                    .iter()
                    .zip(&gh.weights)
                    .map(|(&x, w)| {
                        let h = hermite_orthonormal(n, x);
                        w * h[a] * h[b]
                    })
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-13, "({a},{b}) -> {s}");
            }
        }
    }

    #[test]
    fn tensor_rule_moments_and_pruning() {
        let r = QuadratureRule::gauss_hermite(6, 2.0).unwrap();
        let m: f64 = r.nodes.iter().zip(&r.weights).map(|(p, w)| w * p[0] * p[0] * p[1] * p[1]).sum();
        assert!((m - 4.0).abs() < 1e-12);
        let lw: f64 = r.nodes.iter().zip(r.lebesgue_weights()).map(|(&p, w)| w * r.density(p) * (1.0 + p[2] * p[2])).sum();
        assert!((lw - 3.0).abs() < 1e-12);
        let n = r.len();
        let p = r.pruned(1e-6);
        assert!(p.len() < n && !p.is_empty());
        assert_eq!(p.len(), p.weights.len());
    }

    #[test]
    fn legendre_exactness() {
        let gl = GaussLegendre::new(8).unwrap();
        let (x, w) = gl.on_interval(0.0, 2.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(15)).sum();
        assert!((s - 2f64.powi(16) / 16.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_peaked_integrand() {
        let (v, err) = adaptive_gk(|x| [(-(x * 200.0)).exp(), x.sqrt()], 0.0, 1.0, 1e-13, 1e-13, 500).unwrap();
        assert!((v[0] - (1.0 - (-200f64).exp()) / 200.0).abs() < 1e-12);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-11);
        assert!(err < 1e-12);
    }

    #[test]
    fn adaptive_reports_nonconvergence() {
        let r = adaptive_gk(|x| [(1.0 / x).sin()], 1e-9, 1.0, 1e-15, 0.0, 4);
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }
}
