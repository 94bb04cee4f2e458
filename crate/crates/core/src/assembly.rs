//! Galerkin matrices of the linearized operators.
//!
//! With `f = Σ c_α φ_α` and `ψ = f/√M_X = Σ c_α P_α`, the linearized
//! operators have the symmetric weak forms
//!
//! * `⟨L_AB f, g⟩ = −∫ M_A ∇ψ_g·σ^{AB} ∇ψ_f`,
//! * `⟨L_BB f, g⟩ = −∫ M_B ∇ψ_g·σ^{BB} ∇ψ_f + ∬ M_B M_B* ∇ψ_g(p)·Φ ∇ψ_f(p_*)`,
//! * `⟨L_BA f_A, g_B⟩ = ∬ M_B(p) M_A(p_*) ∇ψ_g(p)·Φ^{BA}(p/m_B − p_*/m_A) ∇ψ_f(p_*)`.
//!
//! The local parts use the node-sum `σ_k = Σ_l w_l Φ(x_k, y_l)` of the same
//! double quadrature as the nonlocal part, so `L_BB` annihilates the
//! collision invariants to rounding.

use std::io::Write;
use std::path::Path;

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, Par};
use rand::Rng;
use serde::Serialize;

use crate::basis::{sigma_norm_matrix, special_vectors, Basis, NodeTable, SpecialVectors};
use crate::error::{Error, Result};
use crate::kernels::{norm3, sigma_matrix, ModelParams, SigmaTable, Species, SpeciesPair, Vec3, WeightSpec, COINCIDENT_NODE_TOL};
use crate::linalg::{max_abs, sym_eigenvalues, symmetrize};
use crate::quad::QuadratureRule;

const ROW_BLOCK: usize = 256;

/// Weighted node data for one side of a double quadrature.
struct Side<'a> {
    nodes: &'a [Vec3],
    weights: &'a [f64],
    mass: f64,
    grads: &'a [Mat<f64>; 3],
}

/// `cross = Σ_ij Σ_kl w_k G^i_{ka} Φ^{ij}_{kl} w_l H^j_{lb}` and
/// `local = Σ_ij Σ_k w_k σ^{ij}_k G^i_{ka} G^j_{kb}` with `σ_k = Σ_l w_l Φ_kl`.
fn double_sum(params: &ModelParams, pair: SpeciesPair, x: &Side, y: &Side, want_cross: bool) -> (Mat<f64>, Mat<f64>) {
    let c = params.reduced_mass(pair);
    let gamma = params.gamma;
    let (na, nb) = (x.grads[0].ncols(), y.grads[0].ncols());
    let my = y.nodes.len();
    let mut cross = Mat::<f64>::zeros(if want_cross { na } else { 0 }, if want_cross { nb } else { 0 });
    let mut local = Mat::<f64>::zeros(na, na);
    let pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
    for start in (0..x.nodes.len()).step_by(ROW_BLOCK) {
        let end = (start + ROW_BLOCK).min(x.nodes.len());
        let rows = end - start;
        // z components and scalar factor w_l c |z|^γ per (k, l).
        let mut z = [Mat::<f64>::zeros(rows, my), Mat::<f64>::zeros(rows, my), Mat::<f64>::zeros(rows, my)];
        let mut s = Mat::<f64>::zeros(rows, my);
        let mut r2m = Mat::<f64>::zeros(rows, my);
        for k in 0..rows {
            let p = x.nodes[start + k];
            for l in 0..my {
                let q = y.nodes[l];
                let zz = [p[0] / x.mass - q[0] / y.mass, p[1] / x.mass - q[1] / y.mass, p[2] / x.mass - q[2] / y.mass];
                let r2 = zz[0] * zz[0] + zz[1] * zz[1] + zz[2] * zz[2];
                if r2 < COINCIDENT_NODE_TOL * COINCIDENT_NODE_TOL {
                    continue;
                }
                let f = if gamma == 0.0 { c } else { c * r2.powf(0.5 * gamma) };
                s[(k, l)] = y.weights[l] * f;
                r2m[(k, l)] = r2;
                for i in 0..3 {
                    z[i][(k, l)] = zz[i];
                }
            }
        }
        for &(i, j) in &pairs {
            let diag = if i == j { 1.0 } else { 0.0 };
            let b = Mat::<f64>::from_fn(rows, my, |k, l| s[(k, l)] * (diag * r2m[(k, l)] - z[i][(k, l)] * z[j][(k, l)]));
            let sig: Vec<f64> = (0..rows).map(|k| (0..my).map(|l| b[(k, l)]).sum()).collect();
            let gx = |a: usize, scale: &dyn Fn(usize) -> f64| {
                Mat::<f64>::from_fn(rows, na, |k, col| scale(k) * x.grads[a][(start + k, col)])
            };
            let wg_i = gx(i, &|k| x.weights[start + k]);
            let sg_i = gx(i, &|k| x.weights[start + k] * sig[k]);
            let g_j = gx(j, &|_| 1.0);
            matmul(local.as_mut(), Accum::Add, sg_i.transpose(), g_j.as_ref(), 1.0, Par::Seq);
            if i != j {
                let sg_j = gx(j, &|k| x.weights[start + k] * sig[k]);
                let g_i = gx(i, &|_| 1.0);
                matmul(local.as_mut(), Accum::Add, sg_j.transpose(), g_i.as_ref(), 1.0, Par::Seq);
            }
            if want_cross {
                let bh = &b * &y.grads[j];
                matmul(cross.as_mut(), Accum::Add, wg_i.transpose(), bh.as_ref(), 1.0, Par::Seq);
                if i != j {
                    let wg_j = gx(j, &|k| x.weights[start + k]);
                    let bh = &b * &y.grads[i];
                    matmul(cross.as_mut(), Accum::Add, wg_j.transpose(), bh.as_ref(), 1.0, Par::Seq);
                }
            }
        }
    }
    (cross, local)
}

fn side<'a>(params: &ModelParams, species: Species, rule: &'a QuadratureRule, table: &'a NodeTable) -> Side<'a> {
    Side { nodes: &rule.nodes, weights: &rule.weights, mass: params.mass(species), grads: &table.grads }
}

fn check_rule(basis: &Basis, rule: &QuadratureRule) -> Result<()> {
    if (rule.variance - basis.variance).abs() > 1e-14 * basis.variance {
        return Err(Error::InvalidInput(format!(
            "quadrature rule variance {} does not match the {} basis variance {}",
            rule.variance,
            basis.species.tag(),
            basis.variance
        )));
    }
    Ok(())
}

/// `Λ̃^{XY}` with the node-sum diffusion matrix: `∫ M_X ∇P_a·σ_h ∇P_b`.
pub fn assemble_lambda_tilde_discrete(
    pair: SpeciesPair,
    basis: &Basis,
    rule_x: &QuadratureRule,
    rule_y: &QuadratureRule,
) -> Result<Mat<f64>> {
    check_rule(basis, rule_x)?;
    let params = &basis.params;
    if rule_y.variance != params.variance(pair.y) {
        return Err(Error::InvalidInput("partner rule does not match the partner species".into()));
    }
    let tx = basis.node_table(rule_x);
    let ty = NodeTable { values: Mat::zeros(0, 0), grads: [Mat::zeros(rule_y.len(), 0), Mat::zeros(rule_y.len(), 0), Mat::zeros(rule_y.len(), 0)] };
    let (_, mut local) = double_sum(params, pair, &side(params, pair.x, rule_x, &tx), &side(params, pair.y, rule_y, &ty), false);
    symmetrize(&mut local);
    Ok(local)
}

/// `Λ̃^{XY}` from the tabulated `σ^{XY}` in the potential form
/// `∫ ∇φ_a·σ ∇φ_b + V φ_a φ_b` with
/// `V = (a²/4)(p, σp) − (a/2)∇·(σp)`, `a = m_B/m_X`, evaluated through
/// `λ₁`, `λ₂` and the divergence identity.
pub fn assemble_lambda_tilde(pair: SpeciesPair, basis: &Basis, table: &SigmaTable, rule: &QuadratureRule) -> Result<Mat<f64>> {
    check_rule(basis, rule)?;
    if table.pair != pair {
        return Err(Error::InvalidInput(format!("table is for pair {}, expected {pair}", table.pair)));
    }
    let params = &basis.params;
    let a = 1.0 / basis.variance;
    let kappa = params.m_b * params.mass(pair.y) / (params.mass(pair.x) * params.mass(pair.x));
    let t = basis.node_table(rule);
    let (m, n) = (rule.len(), basis.size());
    let mut q = [Mat::<f64>::zeros(m, n), Mat::<f64>::zeros(m, n), Mat::<f64>::zeros(m, n)];
    let mut sig = vec![[[0.0; 3]; 3]; m];
    let mut vw = vec![0.0; m];
    for (k, &p) in rule.nodes.iter().enumerate() {
        let sw = rule.weights[k].sqrt();
        for i in 0..3 {
            for col in 0..n {
                q[i][(k, col)] = sw * (t.grads[i][(k, col)] - 0.5 * a * p[i] * t.values[(k, col)]);
            }
        }
        sig[k] = sigma_matrix(table, p);
        let r = norm3(p);
        let (l1, l2) = table.eval(r);
        let v = 0.25 * a * a * l1 * r * r - 0.5 * a * (-kappa * l1 * r * r + l1 + 2.0 * l2);
        vw[k] = rule.weights[k] * v;
    }
    let mut out = Mat::<f64>::zeros(n, n);
    for i in 0..3 {
        for j in 0..3 {
            let sq = Mat::<f64>::from_fn(m, n, |k, col| sig[k][i][j] * q[j][(k, col)]);
            matmul(out.as_mut(), Accum::Add, q[i].transpose(), sq.as_ref(), 1.0, Par::Seq);
        }
    }
    let vp = Mat::<f64>::from_fn(m, n, |k, col| vw[k] * t.values[(k, col)]);
    matmul(out.as_mut(), Accum::Add, t.values.transpose(), vp.as_ref(), 1.0, Par::Seq);
    symmetrize(&mut out);
    let ev = sym_eigenvalues(&out)?;
    let scale = ev.last().copied().unwrap_or(1.0).abs().max(1.0);
    if ev[0] < -1e-6 * scale {
        return Err(Error::Assembly(format!(
            "potential-form Lambda~ is indefinite (min eigenvalue {:e}); table or quadrature inconsistent",
            ev[0]
        )));
    }
    Ok(out)
}

/// `Λ̃^{BB}` (node-sum form) and `K̃^{BB}` from one double quadrature.
pub fn assemble_bb_parts(basis: &Basis, rule: &QuadratureRule) -> Result<(Mat<f64>, Mat<f64>)> {
    if basis.species != Species::B {
        return Err(Error::InvalidInput("assemble_k_bb needs the B basis".into()));
    }
    check_rule(basis, rule)?;
    let params = &basis.params;
    let t = basis.node_table(rule);
    let s = side(params, Species::B, rule, &t);
    let (mut cross, mut local) = double_sum(params, SpeciesPair::BB, &s, &s, true);
    symmetrize(&mut cross);
    symmetrize(&mut local);
    Ok((local, cross))
}

/// `K̃^{BB}_{ab} = ∬ M_B M_B* ∇P_a(p)·Φ^{B,B} ∇P_b(p_*)`.
pub fn assemble_k_bb(basis: &Basis, rule: &QuadratureRule) -> Result<Mat<f64>> {
    Ok(assemble_bb_parts(basis, rule)?.1)
}

/// Galerkin form of `L_BA`, mapping A coefficients to B coefficients.
#[derive(Debug, Clone)]
pub struct CrossOperator {
    pub matrix: Mat<f64>,
}

impl CrossOperator {
    pub fn operator_norm(&self) -> Result<f64> {
        let sv = self
            .matrix
            .singular_values()
            .map_err(|e| Error::Numerical(format!("singular values failed: {e:?}")))?;
        Ok(sv.iter().fold(0.0f64, |m, &v| m.max(v)))
    }
}

pub fn assemble_l_ba(basis_a: &Basis, basis_b: &Basis, rule_a: &QuadratureRule, rule_b: &QuadratureRule) -> Result<CrossOperator> {
    check_rule(basis_a, rule_a)?;
    check_rule(basis_b, rule_b)?;
    let params = &basis_b.params;
    let ta = basis_a.node_table(rule_a);
    let tb = basis_b.node_table(rule_b);
    let (cross, _) = double_sum(
        params,
        SpeciesPair::BA,
        &side(params, Species::B, rule_b, &tb),
        &side(params, Species::A, rule_a, &ta),
        true,
    );
    Ok(CrossOperator { matrix: cross })
}

/// Galerkin matrix of multiplication by `p·ω`.
pub fn assemble_transport(basis: &Basis, omega: Vec3) -> Result<Mat<f64>> {
    let n = norm3(omega);
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("direction must be a unit vector, |omega| = {n}")));
    }
    Ok(basis.multiplication_matrix(omega))
}

/// Smooth non-increasing transition: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn cutoff_profile(s: f64) -> f64 {
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let a = psi(2.0 - s);
        a / (a + psi(s - 1.0))
    }
}

/// Galerkin matrix of multiplication by `χ(|p|/R)`.
pub fn cutoff_matrix(basis: &Basis, radius: f64, rule: &QuadratureRule) -> Result<Mat<f64>> {
    check_rule(basis, rule)?;
    let t = basis.node_table(rule);
    let wp = Mat::<f64>::from_fn(rule.len(), basis.size(), |k, a| {
        rule.weights[k] * cutoff_profile(norm3(rule.nodes[k]) / radius) * t.values[(k, a)]
    });
    let mut out = t.values.transpose() * &wp;
    symmetrize(&mut out);
    Ok(out)
}

/// All single-species matrices of one pair.
#[derive(Debug, Clone)]
pub struct GalerkinOperatorSet {
    pub pair: SpeciesPair,
    pub lambda_tilde: Mat<f64>,
    /// Zero for the pair AB.
    pub k_tilde: Mat<f64>,
    /// `−Λ̃ + K̃`.
    pub l_full: Mat<f64>,
    pub t_omega: Mat<f64>,
    /// Multiplication by `χ_R` (without the factor `ϖ`).
    pub cutoff: Mat<f64>,
    pub varpi: f64,
    pub radius: f64,
    pub omega: Vec3,
}

/// `(Λ, K) = (Λ̃ + ϖX_R, K̃ + ϖX_R)`.
pub fn split_lambda_k(set: &GalerkinOperatorSet, varpi: f64, radius: f64) -> Result<(Mat<f64>, Mat<f64>)> {
    if !(varpi > 0.0 && radius > 0.0) {
        return Err(Error::InvalidInput(format!("varpi and R must be positive, got ({varpi}, {radius})")));
    }
    if radius != set.radius {
        return Err(Error::InvalidInput(format!("cutoff matrix was assembled for R = {}, asked for {radius}", set.radius)));
    }
    let n = set.cutoff.nrows();
    let lam = Mat::from_fn(n, n, |i, j| set.lambda_tilde[(i, j)] + varpi * set.cutoff[(i, j)]);
    let k = Mat::from_fn(n, n, |i, j| set.k_tilde[(i, j)] + varpi * set.cutoff[(i, j)]);
    Ok((lam, k))
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub pair: String,
    pub varpi: f64,
    pub radius: f64,
    pub samples: usize,
    /// `min ⟨Λf,f⟩ / |f|²_{L²_σ}`.
    pub c0: f64,
    /// `max ⟨Kf,f⟩ / ‖f‖²`.
    pub k_ratio_max: f64,
    /// `max (⟨Kf,f⟩ − ‖f‖²)`.
    pub k_excess_max: f64,
    /// `max |Λ − K + L|`, zero up to rounding.
    pub split_defect: f64,
}

/// Rayleigh-quotient diagnostics of the split on random coefficient vectors.
pub fn coercivity_check(
    set: &GalerkinOperatorSet,
    basis: &Basis,
    rule: &QuadratureRule,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<CoercivityReport> {
    let (lam, k) = split_lambda_k(set, set.varpi, set.radius)?;
    let s = sigma_norm_matrix(basis, WeightSpec::default(), rule);
    let n = basis.size();
    let quad = |m: &Mat<f64>, f: &[f64]| -> f64 { (0..n).map(|i| f[i] * (0..n).map(|j| m[(i, j)] * f[j]).sum::<f64>()).sum() };
    let (mut c0, mut kr, mut ke) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..samples {
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l2: f64 = f.iter().map(|v| v * v).sum();
        let sn = quad(&s, &f);
        let lq = quad(&lam, &f);
        let kq = quad(&k, &f);
        c0 = c0.min(lq / sn);
        kr = kr.max(kq / l2);
        ke = ke.max(kq - l2);
    }
    let split_defect = max_abs(&(&lam - &k + &set.l_full));
    if !(c0 > 0.0) {
        return Err(Error::Coercivity { varpi: set.varpi, radius: set.radius, min_quotient: c0 });
    }
    Ok(CoercivityReport {
        pair: set.pair.label(),
        varpi: set.varpi,
        radius: set.radius,
        samples,
        c0,
        k_ratio_max: kr,
        k_excess_max: ke,
        split_defect,
    })
}

/// `L^η = L − i(|η|/m_X) T_ω`.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub pair: SpeciesPair,
    pub eta: f64,
    pub omega: Vec3,
    pub matrix: Mat<c64>,
}

pub fn build_l_eta(set: &GalerkinOperatorSet, params: &ModelParams, eta: f64) -> Result<ModeOperator> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidInput(format!("|eta| must be finite and >= 0, got {eta}")));
    }
    Ok(ModeOperator { pair: set.pair, eta, omega: set.omega, matrix: mode_matrix(set, params, eta) })
}

/// `L − i(η/m_X) T_ω` for signed `η` along `ω`.
pub fn mode_matrix(set: &GalerkinOperatorSet, params: &ModelParams, eta: f64) -> Mat<c64> {
    let f = eta / params.mass(set.pair.x);
    let n = set.l_full.nrows();
    Mat::from_fn(n, n, |i, j| c64::new(set.l_full[(i, j)], -f * set.t_omega[(i, j)]))
}

/// Discretization settings shared by every assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discretization {
    pub degree: usize,
    pub oversampling: usize,
    pub varpi: f64,
    pub radius: f64,
    pub omega: Vec3,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { degree: 8, oversampling: 1, varpi: 10.0, radius: 5.0, omega: [0.0, 0.0, 1.0] }
    }
}

/// The fully assembled two-species linear system.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub params: ModelParams,
    pub disc: Discretization,
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub rule_a: QuadratureRule,
    pub rule_b: QuadratureRule,
    pub ab: GalerkinOperatorSet,
    pub bb: GalerkinOperatorSet,
    pub l_ba: CrossOperator,
    pub special: SpecialVectors,
}

impl LinearizedSystem {
    pub fn assemble(params: &ModelParams, disc: Discretization) -> Result<Self> {
        params.validate()?;
        let basis_a = Basis::new(params, Species::A, disc.degree)?;
        let basis_b = Basis::new(params, Species::B, disc.degree)?;
        let rule_a = basis_a.quadrature(disc.oversampling)?;
        let rule_b = basis_b.quadrature(disc.oversampling)?;
        let fine_a = basis_a.quadrature(2 * disc.oversampling)?;
        let fine_b = basis_b.quadrature(2 * disc.oversampling)?;
        let special = special_vectors(&basis_b, &basis_a, disc.omega)?;

        let lam_ab = assemble_lambda_tilde_discrete(SpeciesPair::AB, &basis_a, &rule_a, &rule_b)?;
        let na = basis_a.size();
        let ab = GalerkinOperatorSet {
            pair: SpeciesPair::AB,
            l_full: -&lam_ab,
            lambda_tilde: lam_ab,
            k_tilde: Mat::zeros(na, na),
            t_omega: assemble_transport(&basis_a, disc.omega)?,
            cutoff: cutoff_matrix(&basis_a, disc.radius, &fine_a)?,
            varpi: disc.varpi,
            radius: disc.radius,
            omega: disc.omega,
        };
        let (lam_bb, k_bb) = assemble_bb_parts(&basis_b, &rule_b)?;
        let bb = GalerkinOperatorSet {
            pair: SpeciesPair::BB,
            l_full: &k_bb - &lam_bb,
            lambda_tilde: lam_bb,
            k_tilde: k_bb,
            t_omega: assemble_transport(&basis_b, disc.omega)?,
            cutoff: cutoff_matrix(&basis_b, disc.radius, &fine_b)?,
            varpi: disc.varpi,
            radius: disc.radius,
            omega: disc.omega,
        };
        let l_ba = assemble_l_ba(&basis_a, &basis_b, &rule_a, &rule_b)?;
        Ok(Self { params: *params, disc, basis_a, basis_b, rule_a, rule_b, ab, bb, l_ba, special })
    }

    pub fn set(&self, pair: SpeciesPair) -> &GalerkinOperatorSet {
        if pair == SpeciesPair::AB {
            &self.ab
        } else {
            &self.bb
        }
    }

    pub fn basis(&self, species: Species) -> &Basis {
        match species {
            Species::A => &self.basis_a,
            Species::B => &self.basis_b,
        }
    }

    pub fn rule(&self, species: Species) -> &QuadratureRule {
        match species {
            Species::A => &self.rule_a,
            Species::B => &self.rule_b,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixSidecar<'a, T: Serialize> {
    pub name: &'a str,
    pub rows: usize,
    pub cols: usize,
    pub dtype: &'static str,
    pub layout: &'static str,
    pub meta: T,
}

/// Writes `stem.bin` (row-major little-endian f64) and `stem.json`.
pub fn write_matrix(dir: &Path, stem: &str, m: &Mat<f64>, meta: impl Serialize) -> Result<Vec<std::path::PathBuf>> {
    let bin = dir.join(format!("{stem}.bin"));
    let json = dir.join(format!("{stem}.json"));
    let mut bytes = Vec::with_capacity(8 * m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            bytes.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    std::fs::write(&bin, bytes)?;
    let side = MatrixSidecar { name: stem, rows: m.nrows(), cols: m.ncols(), dtype: "f64-le", layout: "row-major", meta };
    let mut f = std::fs::File::create(&json)?;
    serde_json::to_writer_pretty(&mut f, &side)?;
    f.write_all(b"\n")?;
    Ok(vec![bin, json])
}

/// Reads a matrix written by [`write_matrix`].
pub fn read_matrix(dir: &Path, stem: &str) -> Result<Mat<f64>> {
    let json: serde_json::Value = serde_json::from_reader(std::fs::File::open(dir.join(format!("{stem}.json")))?)?;
    let rows = json["rows"].as_u64().ok_or_else(|| Error::InvalidInput("sidecar lacks rows".into()))? as usize;
    let cols = json["cols"].as_u64().ok_or_else(|| Error::InvalidInput("sidecar lacks cols".into()))? as usize;
    let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
    if bytes.len() != 8 * rows * cols {
        return Err(Error::InvalidInput(format!("{stem}.bin has {} bytes, expected {}", bytes.len(), 8 * rows * cols)));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| {
        let o = 8 * (i * cols + j);
        f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matvec, norm, symmetry_defect};
    use rand::SeedableRng;

    fn small(gamma: f64) -> LinearizedSystem {
        let p = ModelParams::new(1.5, 1.0, gamma).unwrap();
        LinearizedSystem::assemble(&p, Discretization { degree: 4, ..Default::default() }).unwrap()
    }

    #[test]
    fn null_vectors_and_symmetry() {
        for gamma in [0.0, -1.0] {
            let s = small(gamma);
            for v in &s.special.chi {
                assert!(norm(&matvec(&s.bb.l_full, v)) < 1e-12, "gamma={gamma}");
            }
            assert!(norm(&matvec(&s.ab.l_full, &s.special.e_d)) < 1e-14);
            assert!(norm(&matvec(&s.l_ba.matrix, &s.special.e_d)) == 0.0);
            assert!(symmetry_defect(&s.bb.l_full) < 1e-14);
            let ev = sym_eigenvalues(&s.bb.l_full).unwrap();
            assert!(*ev.last().unwrap() < 1e-12);
            assert_eq!(ev.iter().filter(|v| v.abs() < 1e-8).count(), 5);
            let ev = sym_eigenvalues(&s.ab.l_full).unwrap();
            assert_eq!(ev.iter().filter(|v| v.abs() < 1e-8).count(), 1);
        }
    }

    #[test]
    fn equal_masses_make_cross_operator_equal_k() {
        let p = ModelParams::new(1.0, 1.0, 0.0).unwrap();
        let s = LinearizedSystem::assemble(&p, Discretization { degree: 3, ..Default::default() }).unwrap();
        let d = max_abs(&(&s.l_ba.matrix - &s.bb.k_tilde));
        assert!(d < 1e-13, "{d}");
        assert!(s.l_ba.operator_norm().unwrap().is_finite());
    }

    #[test]
    fn potential_form_matches_node_sum_form() {
        let p = ModelParams::new(1.5, 1.0, 0.0).unwrap();
        let s = LinearizedSystem::assemble(&p, Discretization { degree: 4, ..Default::default() }).unwrap();
        for pair in [SpeciesPair::AB, SpeciesPair::BB] {
            let table = SigmaTable::build(&p, pair).unwrap();
            let basis = s.basis(pair.x);
            let rule = basis.quadrature(2).unwrap();
            let pot = assemble_lambda_tilde(pair, basis, &table, &rule).unwrap();
            let d = max_abs(&(&pot - &s.set(pair).lambda_tilde));
            assert!(d < 1e-7, "{pair}: {d}");
        }
    }

    #[test]
    fn transport_entries() {
        let s = small(0.0);
        let t = &s.bb.t_omega;
        assert!((t[(0, 3)] - 1.0).abs() < 1e-15);
        assert_eq!(t[(0, 0)], 0.0);
        let l = mode_matrix(&s.bb, &s.params, 0.3);
        assert!(crate::linalg::transpose_defect(&l) == 0.0);
        assert!(assemble_transport(&s.basis_b, [1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn cutoff_profile_shape() {
        assert_eq!(cutoff_profile(0.5), 1.0);
        assert_eq!(cutoff_profile(2.5), 0.0);
        assert!((cutoff_profile(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = cutoff_profile(1.0 + i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn coercivity_split_algebra() {
        let s = small(0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rep = coercivity_check(&s.bb, &s.basis_b, &s.rule_b, 50, &mut rng).unwrap();
        assert!(rep.c0 > 0.0);
        assert!(rep.split_defect < 1e-13);
        assert!(split_lambda_k(&s.bb, -1.0, 5.0).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Mat::<f64>::from_fn(3, 2, |i, j| i as f64 - 0.1 * j as f64);
        write_matrix(dir.path(), "m", &m, serde_json::json!({"pair": "BB"})).unwrap();
        let back = read_matrix(dir.path(), "m").unwrap();
        assert_eq!(max_abs(&(&back - &m)), 0.0);
    }

    #[test]
    fn quadrature_refinement_is_stable_at_maxwell_molecules() {
        let p = ModelParams::new(1.5, 1.0, 0.0).unwrap();
        let b = Basis::new(&p, Species::B, 3).unwrap();
        let (l1, k1) = assemble_bb_parts(&b, &b.quadrature(1).unwrap()).unwrap();
        let (l2, k2) = assemble_bb_parts(&b, &b.quadrature(2).unwrap()).unwrap();
        assert!(max_abs(&(&l1 - &l2)) < 1e-8);
        assert!(max_abs(&(&k1 - &k2)) < 1e-8);
    }
}
