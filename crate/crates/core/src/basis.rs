//! Gaussian-weighted Hermite bases `φ_α(p) = Π_i h_{α_i}(p_i/s) √M_X(p)`,
//! the quadrature rules they are integrated with, and the special vectors of
//! the null spaces.

use std::collections::HashMap;

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{maxwellian, norm3, ModelParams, Species, Vec3, WeightSpec};
use crate::quad::{hermite_orthonormal, QuadratureRule};

/// Default discarded-weight budget when pruning tensor rules.
pub const PRUNE_MASS: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct Basis {
    pub species: Species,
    pub params: ModelParams,
    pub degree: usize,
    /// Per-component variance of the Gaussian weight, `m_X/m_B`.
    pub variance: f64,
    pub indices: Vec<[usize; 3]>,
    lookup: HashMap<[usize; 3], usize>,
}

/// Multi-indices with `|α| ≤ n`, ordered by total degree and then
/// lexicographically descending, so that `e_1, e_2, e_3` sit at 1, 2, 3.
pub fn multi_indices(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity((n + 1) * (n + 2) * (n + 3) / 6);
    for d in 0..=n {
        for i in (0..=d).rev() {
            for j in (0..=d - i).rev() {
                out.push([i, j, d - i - j]);
            }
        }
    }
    out
}

pub fn basis_size(n: usize) -> usize {
    (n + 1) * (n + 2) * (n + 3) / 6
}

impl Basis {
    pub fn new(params: &ModelParams, species: Species, degree: usize) -> Result<Self> {
        params.validate()?;
        if degree < 2 {
            return Err(Error::InvalidInput(format!(
                "basis degree must be >= 2 to hold the collision invariants, got {degree}"
            )));
        }
        let indices = multi_indices(degree);
        let lookup = indices.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        Ok(Self { species, params: *params, degree, variance: params.variance(species), indices, lookup })
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    /// Standard deviation of the Gaussian weight.
    pub fn scale(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn index_of(&self, alpha: [usize; 3]) -> Option<usize> {
        self.lookup.get(&alpha).copied()
    }

    /// Unit coefficient vector on `φ_α`.
    pub fn unit(&self, alpha: [usize; 3]) -> Vec<f64> {
        let mut v = vec![0.0; self.size()];
        v[self.index_of(alpha).expect("multi-index outside the basis")] = 1.0;
        v
    }

    fn hermite_tables(&self, p: Vec3, extra: usize) -> [Vec<f64>; 3] {
        let s = self.scale();
        [0, 1, 2].map(|i| hermite_orthonormal(self.degree + extra, p[i] / s))
    }

    /// Polynomial parts `P_α(p) = φ_α(p)/√M_X(p)`.
    pub fn poly_values(&self, p: Vec3) -> Vec<f64> {
        let h = self.hermite_tables(p, 0);
        self.indices.iter().map(|a| h[0][a[0]] * h[1][a[1]] * h[2][a[2]]).collect()
    }

    /// Gradients of the polynomial parts.
    pub fn poly_gradients(&self, p: Vec3) -> Vec<Vec3> {
        let h = self.hermite_tables(p, 0);
        let inv_s = 1.0 / self.scale();
        let d = |i: usize, n: usize| if n == 0 { 0.0 } else { (n as f64).sqrt() * h[i][n - 1] * inv_s };
        self.indices
            .iter()
            .map(|a| {
                [
                    d(0, a[0]) * h[1][a[1]] * h[2][a[2]],
                    h[0][a[0]] * d(1, a[1]) * h[2][a[2]],
                    h[0][a[0]] * h[1][a[1]] * d(2, a[2]),
                ]
            })
            .collect()
    }

    pub fn sqrt_maxwellian(&self, p: Vec3) -> f64 {
        maxwellian(&self.params, self.species, p).sqrt()
    }

    /// Value of `f = Σ c_α φ_α` at `p`.
    pub fn eval(&self, coeffs: &[f64], p: Vec3) -> f64 {
        let v = self.poly_values(p);
        coeffs.iter().zip(&v).map(|(c, v)| c * v).sum::<f64>() * self.sqrt_maxwellian(p)
    }

    /// Value and gradient of `f = Σ c_α φ_α` at `p`.
    pub fn eval_with_grad(&self, coeffs: &[f64], p: Vec3) -> (f64, Vec3) {
        let v = self.poly_values(p);
        let g = self.poly_gradients(p);
        let mut val = 0.0;
        let mut grad = [0.0; 3];
        for ((c, v), g) in coeffs.iter().zip(&v).zip(&g) {
            val += c * v;
            for i in 0..3 {
                grad[i] += c * g[i];
            }
        }
        let sm = self.sqrt_maxwellian(p);
        let half_inv_v = 0.5 / self.variance;
        let grad = [0, 1, 2].map(|i| sm * (grad[i] - half_inv_v * p[i] * val));
        (val * sm, grad)
    }

    /// Galerkin matrix of `∂_{p_i}` in the degree-`N+1` superspace
    /// (`size(N+1) × size(N)`), together with the restricted square matrix
    /// and the Frobenius norm of the dropped top-degree rows.
    pub fn derivative_matrix(&self, axis: usize) -> (Mat<f64>, Mat<f64>, f64) {
        let sup = multi_indices(self.degree + 1);
        let sup_lookup: HashMap<[usize; 3], usize> = sup.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let n = self.size();
        let inv_s = 1.0 / self.scale();
        let mut full = Mat::<f64>::zeros(sup.len(), n);
        for (col, a) in self.indices.iter().enumerate() {
            let k = a[axis];
            if k > 0 {
                let mut b = *a;
                b[axis] -= 1;
                full[(sup_lookup[&b], col)] += 0.5 * (k as f64).sqrt() * inv_s;
            }
            let mut b = *a;
            b[axis] += 1;
            full[(sup_lookup[&b], col)] -= 0.5 * ((k + 1) as f64).sqrt() * inv_s;
        }
        let restricted = Mat::<f64>::from_fn(n, n, |i, j| full[(i, j)]);
        let mut loss = 0.0;
        for i in n..sup.len() {
            for j in 0..n {
                loss += full[(i, j)] * full[(i, j)];
            }
        }
        (full, restricted, loss.sqrt())
    }

    /// Galerkin matrix of multiplication by `p·ω` (exact on the span).
    pub fn multiplication_matrix(&self, omega: Vec3) -> Mat<f64> {
        let n = self.size();
        let s = self.scale();
        let mut t = Mat::<f64>::zeros(n, n);
        for (col, a) in self.indices.iter().enumerate() {
            for axis in 0..3 {
                if omega[axis] == 0.0 {
                    continue;
                }
                let k = a[axis];
                let mut up = *a;
                up[axis] += 1;
                if let Some(row) = self.index_of(up) {
                    t[(row, col)] += omega[axis] * s * ((k + 1) as f64).sqrt();
                }
                if k > 0 {
                    let mut down = *a;
                    down[axis] -= 1;
                    t[(self.index_of(down).unwrap(), col)] += omega[axis] * s * (k as f64).sqrt();
                }
            }
        }
        t
    }

    /// Polynomial values and gradients of every basis function at every node
    /// of `rule` (rows are nodes).
    pub fn node_table(&self, rule: &QuadratureRule) -> NodeTable {
        let (m, n) = (rule.len(), self.size());
        let mut values = Mat::<f64>::zeros(m, n);
        let mut grads = [Mat::<f64>::zeros(m, n), Mat::<f64>::zeros(m, n), Mat::<f64>::zeros(m, n)];
        for (k, &p) in rule.nodes.iter().enumerate() {
            let v = self.poly_values(p);
            let g = self.poly_gradients(p);
            for a in 0..n {
                values[(k, a)] = v[a];
                for i in 0..3 {
                    grads[i][(k, a)] = g[a][i];
                }
            }
        }
        NodeTable { values, grads }
    }

    /// Tensor Gauss–Hermite rule on this species' own scale with per-axis
    /// order `oversampling·(N+2)`. Nodes are pruned while the dropped
    /// contributions `Σ w_k Σ_α P_α(x_k)²` stay below [`PRUNE_MASS`], which
    /// bounds the change of every Gram entry.
    pub fn quadrature(&self, oversampling: usize) -> Result<QuadratureRule> {
        if oversampling == 0 {
            return Err(Error::InvalidInput("oversampling must be >= 1".into()));
        }
        let rule = QuadratureRule::gauss_hermite(oversampling * (self.degree + 2), self.variance)?;
        let score: Vec<f64> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&p, &w)| w * self.poly_values(p).iter().map(|v| v * v).sum::<f64>())
            .collect();
        Ok(prune_by_score(rule, &score, PRUNE_MASS))
    }

    /// `⟨f, φ_α⟩` for all `α`, plus the `L²` norm of the part of `f` outside
    /// the span.
    pub fn project(&self, f: &dyn Fn(Vec3) -> f64, rule: &QuadratureRule) -> (Vec<f64>, f64) {
        let lw = rule.lebesgue_weights();
        let mut coeffs = vec![0.0; self.size()];
        let mut total = 0.0;
        for (k, &p) in rule.nodes.iter().enumerate() {
            let fv = f(p);
            let w = lw[k] * fv * self.sqrt_maxwellian(p);
            total += lw[k] * fv * fv;
            for (c, v) in coeffs.iter_mut().zip(self.poly_values(p)) {
                *c += w * v;
            }
        }
        let captured: f64 = coeffs.iter().map(|c| c * c).sum();
        (coeffs, (total - captured).max(0.0).sqrt())
    }

    pub fn metadata(&self, rule: &QuadratureRule) -> BasisMetadata {
        BasisMetadata {
            species: self.species.tag().to_string(),
            degree: self.degree,
            size: self.size(),
            scale: self.scale(),
            node_count: rule.len(),
            pruning_mass: PRUNE_MASS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisMetadata {
    pub species: String,
    pub degree: usize,
    pub size: usize,
    pub scale: f64,
    pub node_count: usize,
    pub pruning_mass: f64,
}

/// Basis polynomials and their gradients tabulated on quadrature nodes.
#[derive(Debug, Clone)]
pub struct NodeTable {
    pub values: Mat<f64>,
    pub grads: [Mat<f64>; 3],
}

/// Removes the nodes of smallest `score` while the summed score of the
/// removed nodes stays below `budget`.
pub fn prune_by_score(rule: QuadratureRule, score: &[f64], budget: f64) -> QuadratureRule {
    let mut sorted = score.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut cum = 0.0;
    let mut cut = f64::INFINITY;
    for &s in &sorted {
        if cum + s >= budget {
            cut = s;
            break;
        }
        cum += s;
    }
    let mut keep = score.iter().map(|&s| s >= cut);
    let mut out = rule;
    let mut keep_w = keep.clone();
    out.nodes.retain(|_| keep.next().unwrap());
    out.weights.retain(|_| keep_w.next().unwrap());
    out
}

/// Right-handed orthonormal frame `(ω, ω₁⊥, ω₂⊥)`. `ω₁⊥` is the projection of
/// the coordinate axis least aligned with `ω`.
pub fn orthonormal_frame(omega: Vec3) -> Result<[Vec3; 3]> {
    let n = norm3(omega);
    if !((n - 1.0).abs() < 1e-12) {
        return Err(Error::InvalidInput(format!("direction must be a unit vector, |omega| = {n}")));
    }
    let mut axis = 0;
    for i in 1..3 {
        if omega[i].abs() < omega[axis].abs() {
            axis = i;
        }
    }
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let d = omega[axis];
    let mut w1 = [a[0] - d * omega[0], a[1] - d * omega[1], a[2] - d * omega[2]];
    let l = norm3(w1);
    w1 = [w1[0] / l, w1[1] / l, w1[2] / l];
    let w2 = [
        omega[1] * w1[2] - omega[2] * w1[1],
        omega[2] * w1[0] - omega[0] * w1[2],
        omega[0] * w1[1] - omega[1] * w1[0],
    ];
    Ok([omega, w1, w2])
}

/// Null-space vectors and the fluid eigenbasis at `η = 0`.
#[derive(Debug, Clone)]
pub struct SpecialVectors {
    /// `χ_0 … χ_4` in the B basis.
    pub chi: [Vec<f64>; 5],
    /// `E_0(ω) … E_4(ω)` in the B basis.
    pub e: [Vec<f64>; 5],
    /// `√M_A` in the A basis.
    pub e_d: Vec<f64>,
    pub frame: [Vec3; 3],
}

impl SpecialVectors {
    /// `v·Ψ = Σ_j v_j χ_j`.
    pub fn psi_dot(&self, v: Vec3) -> Vec<f64> {
        let mut out = vec![0.0; self.chi[0].len()];
        for j in 0..3 {
            for (o, c) in out.iter_mut().zip(&self.chi[j + 1]) {
                *o += v[j] * c;
            }
        }
        out
    }
}

pub fn special_vectors(basis_b: &Basis, basis_a: &Basis, omega: Vec3) -> Result<SpecialVectors> {
    if basis_b.species != Species::B || basis_a.species != Species::A {
        return Err(Error::InvalidInput("special_vectors expects (B basis, A basis)".into()));
    }
    let frame = orthonormal_frame(omega)?;
    let n = basis_b.size();
    let chi0 = basis_b.unit([0, 0, 0]);
    let chij = [basis_b.unit([1, 0, 0]), basis_b.unit([0, 1, 0]), basis_b.unit([0, 0, 1])];
    // (|p|² − 3)/√6 = Σ_i √2 h_2(p_i)/√6 on the unit scale.
    let mut chi4 = vec![0.0; n];
    for a in [[2, 0, 0], [0, 2, 0], [0, 0, 2]] {
        chi4[basis_b.index_of(a).unwrap()] = 1.0 / 3f64.sqrt();
    }
    let chi = [chi0, chij[0].clone(), chij[1].clone(), chij[2].clone(), chi4];
    let dot = |v: Vec3| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for j in 0..3 {
            for (o, c) in out.iter_mut().zip(&chij[j]) {
                *o += v[j] * c;
            }
        }
        out
    };
    let comb = |terms: &[(f64, &Vec<f64>)]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (s, v) in terms {
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o += s * x;
            }
        }
        out
    };
    let wpsi = dot(frame[0]);
    let (a0, a1, a4) = ((0.3f64).sqrt(), (0.5f64).sqrt(), (0.2f64).sqrt());
    let e0 = comb(&[(a0, &chi[0]), (a1, &wpsi), (a4, &chi[4])]);
    let e1 = comb(&[(a0, &chi[0]), (-a1, &wpsi), (a4, &chi[4])]);
    let e2 = comb(&[(-(0.4f64).sqrt(), &chi[0]), ((0.6f64).sqrt(), &chi[4])]);
    let e3 = dot(frame[1]);
    let e4 = dot(frame[2]);
    Ok(SpecialVectors { chi, e: [e0, e1, e2, e3, e4], e_d: basis_a.unit([0, 0, 0]), frame })
}

/// Matrix `S` with `cᵀ S c = |f|²_{L²_σ}` for the weight `⟨p⟩^θ`-scaled
/// anisotropic norm: `⟨p⟩^{γ+2+2θ}(|f|² + |(I−ℙ)∇f|²) + ⟨p⟩^{γ+2θ}|ℙ∇f|²`.
pub fn sigma_norm_matrix(basis: &Basis, weight: WeightSpec, rule: &QuadratureRule) -> Mat<f64> {
    let gamma = basis.params.gamma;
    let theta = weight.exponent(gamma);
    let lw = rule.lebesgue_weights();
    let n = basis.size();
    let m = rule.len();
    // Rows of weighted value / radial-gradient / tangential-gradient samples.
    let mut rows = Mat::<f64>::zeros(4 * m, n);
    for (k, &p) in rule.nodes.iter().enumerate() {
        let br2 = 1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let w_hi = (lw[k] * br2.powf(0.5 * (gamma + 2.0 + 2.0 * theta))).sqrt();
        let w_lo = (lw[k] * br2.powf(0.5 * (gamma + 2.0 * theta))).sqrt();
        let sm = basis.sqrt_maxwellian(p);
        let v = basis.poly_values(p);
        let g = basis.poly_gradients(p);
        let r = norm3(p);
        let (u, t1, t2) = if r > 0.0 {
            let u = [p[0] / r, p[1] / r, p[2] / r];
            let fr = orthonormal_frame(u).unwrap();
            (u, fr[1], fr[2])
        } else {
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0])
        };
        let half_inv_v = 0.5 / basis.variance;
        for a in 0..n {
            let grad = [0, 1, 2].map(|i| sm * (g[a][i] - half_inv_v * p[i] * v[a]));
            rows[(4 * k, a)] = w_hi * sm * v[a];
            rows[(4 * k + 1, a)] = w_lo * (grad[0] * u[0] + grad[1] * u[1] + grad[2] * u[2]);
            rows[(4 * k + 2, a)] = w_hi * (grad[0] * t1[0] + grad[1] * t1[1] + grad[2] * t1[2]);
            rows[(4 * k + 3, a)] = w_hi * (grad[0] * t2[0] + grad[1] * t2[1] + grad[2] * t2[2]);
        }
    }
    rows.transpose() * &rows
}

/// `|f|_{L²_σ}` with `f = Σ c_α φ_α`.
pub fn sigma_norm(coeffs: &[f64], basis: &Basis, weight: WeightSpec, rule: &QuadratureRule) -> f64 {
    let gamma = basis.params.gamma;
    let theta = weight.exponent(gamma);
    let lw = rule.lebesgue_weights();
    let mut total = 0.0;
    for (k, &p) in rule.nodes.iter().enumerate() {
        let (f, g) = basis.eval_with_grad(coeffs, p);
        let br2 = 1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let r2 = br2 - 1.0;
        let radial2 = if r2 > 0.0 {
            let d = g[0] * p[0] + g[1] * p[1] + g[2] * p[2];
            d * d / r2
        } else {
            g[0] * g[0]
        };
        let tang2 = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) - radial2;
        total += lw[k]
            * (br2.powf(0.5 * (gamma + 2.0 + 2.0 * theta)) * (f * f + tang2) + br2.powf(0.5 * (gamma + 2.0 * theta)) * radial2);
    }
    total.max(0.0).sqrt()
}
