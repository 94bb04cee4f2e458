//! Spectra of the mode operators: tracked fluid branches, dispersion fits,
//! diffusion coefficients from the resolvent formulas, cancellation orders of
//! the cross pairing and spectral-gap scans.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use serde::Serialize;

use crate::assembly::{mode_matrix, LinearizedSystem};
use crate::basis::special_vectors;
use crate::error::{Error, Result};
use crate::fit::{geomspace, least_squares, linspace, loglog_slope, LineFit};
use crate::kernels::{SpeciesPair, Vec3};
use crate::linalg::{bdot, cmatvec, cnorm, column, dot, eigen, hdot, matvec, norm, real_vec, sym_eigenvalues};

/// Minimum Hermitian overlap between consecutive tracked eigenvectors.
pub const OVERLAP_MIN: f64 = 0.9;
const MAX_BISECTIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BranchLabel {
    D,
    J(u8),
}

impl std::fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BranchLabel::D => write!(f, "D"),
            BranchLabel::J(j) => write!(f, "{j}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DispersionBranch {
    pub pair: SpeciesPair,
    pub omega: Vec3,
    pub label: BranchLabel,
    pub etas: Vec<f64>,
    pub eigenvalues: Vec<c64>,
    /// Right eigenvectors with `vᵀv = 1` and sign continuity.
    pub vectors: Vec<Vec<c64>>,
    pub min_overlap: f64,
}

pub fn fluid_count(pair: SpeciesPair) -> usize {
    if pair == SpeciesPair::AB {
        1
    } else {
        5
    }
}

/// Limits of the fluid eigenvectors as `|η| → 0`: `E_D` for AB and
/// `E_j(−ω)` for BB, so that branch 0 has `Im σ_0 ≈ +√(5/3)|η|/m_B`.
pub fn fluid_references(system: &LinearizedSystem, pair: SpeciesPair) -> Result<Vec<(BranchLabel, Vec<f64>)>> {
    if pair == SpeciesPair::AB {
        return Ok(vec![(BranchLabel::D, system.special.e_d.clone())]);
    }
    let w = system.disc.omega;
    let sv = special_vectors(&system.basis_b, &system.basis_a, [-w[0], -w[1], -w[2]])?;
    Ok(sv.e.iter().enumerate().map(|(j, e)| (BranchLabel::J(j as u8), e.clone())).collect())
}

fn union_clusters(vals: &[c64], tol: f64) -> Vec<Vec<usize>> {
    let n = vals.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in 0..i {
            if (vals[i] - vals[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_of[r]].push(i);
    }
    groups
}

/// Hermitian-orthonormal basis of the span of the given columns.
fn orthonormal_span(v: &Mat<c64>, cols: &[usize], eta: f64) -> Result<Vec<Vec<c64>>> {
    let mut q: Vec<Vec<c64>> = Vec::with_capacity(cols.len());
    for &c in cols {
        let mut x = column(v, c);
        let n0 = cnorm(&x);
        for _ in 0..2 {
            for b in &q {
                let h = hdot(b, &x);
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi -= h * bi;
                }
            }
        }
        let n1 = cnorm(&x);
        if n1 < 1e-8 * n0 {
            return Err(Error::DefectiveCluster {
                eta,
                detail: format!("eigenvectors of a {}-fold cluster are linearly dependent", cols.len()),
            });
        }
        x.iter_mut().for_each(|v| *v /= n1);
        q.push(x);
    }
    Ok(q)
}

struct StepResult {
    values: Vec<c64>,
    vectors: Vec<Vec<c64>>,
    min_overlap: f64,
}

/// Continues each of `prev` to the eigen-decomposition of `l`.
fn track_step(l: &Mat<c64>, prev: &[Vec<c64>], eta: f64) -> Result<StepResult> {
    let (vals, vecs) = eigen(l)?;
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    let clusters = union_clusters(&vals, 1e-10 * scale);
    let spans: Vec<Vec<Vec<c64>>> = clusters.iter().map(|c| orthonormal_span(&vecs, c, eta)).collect::<Result<_>>()?;
    let mut used = vec![0usize; clusters.len()];
    let mut chosen: Vec<(usize, f64)> = Vec::with_capacity(prev.len());
    for p in prev {
        let pn = cnorm(p);
        let mut best = (usize::MAX, -1.0);
        for (ci, q) in spans.iter().enumerate() {
            let ov = q.iter().map(|b| hdot(b, p).norm_sqr()).sum::<f64>().sqrt() / pn;
            if ov > best.1 {
                best = (ci, ov);
            }
        }
        used[best.0] += 1;
        if used[best.0] > clusters[best.0].len() {
            return Err(Error::BranchTracking { eta, overlap: best.1.min(0.0) });
        }
        chosen.push(best);
    }
    let mut values = Vec::with_capacity(prev.len());
    let mut vectors: Vec<Vec<c64>> = Vec::with_capacity(prev.len());
    let mut min_overlap: f64 = 1.0;
    for (b, p) in prev.iter().enumerate() {
        let (ci, ov) = chosen[b];
        min_overlap = min_overlap.min(ov);
        let q = &spans[ci];
        let mut w = vec![c64::new(0.0, 0.0); p.len()];
        for basis in q {
            let h = hdot(basis, p);
            for (wi, bi) in w.iter_mut().zip(basis) {
                *wi += h * bi;
            }
        }
        // Bilinear orthogonality against branches already placed in this cluster.
        for (b2, v2) in vectors.iter().enumerate() {
            if chosen[b2].0 == ci {
                let h = bdot(v2, &w);
                for (wi, vi) in w.iter_mut().zip(v2) {
                    *wi -= h * vi;
                }
            }
        }
        let s = bdot(&w, &w).sqrt();
        if s.norm() < 1e-12 * cnorm(&w) {
            return Err(Error::DefectiveCluster { eta, detail: "quasi-null eigenvector (vᵀv ≈ 0)".into() });
        }
        w.iter_mut().for_each(|x| *x /= s);
        if hdot(p, &w).re < 0.0 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        let lw = cmatvec(l, &w);
        values.push(bdot(&w, &lw));
        vectors.push(w);
    }
    Ok(StepResult { values, vectors, min_overlap })
}

/// Tracks the fluid branches of `L^η` along `etas` (increasing, positive).
/// Steps whose overlap falls below [`OVERLAP_MIN`] are bisected.
pub fn eigen_branches(system: &LinearizedSystem, pair: SpeciesPair, etas: &[f64]) -> Result<Vec<DispersionBranch>> {
    if etas.is_empty() || etas.windows(2).any(|w| w[1] <= w[0]) || etas[0] <= 0.0 {
        return Err(Error::InvalidInput("eta grid must be positive and increasing".into()));
    }
    let set = system.set(pair);
    let refs = fluid_references(system, pair)?;
    let mut branches: Vec<DispersionBranch> = refs
        .iter()
        .map(|(label, _)| DispersionBranch {
            pair,
            omega: system.disc.omega,
            label: *label,
            etas: Vec::new(),
            eigenvalues: Vec::new(),
            vectors: Vec::new(),
            min_overlap: 1.0,
        })
        .collect();
    let mut prev: Vec<Vec<c64>> = refs.iter().map(|(_, v)| real_vec(v)).collect();
    let mut prev_eta = 0.0;
    for &target in etas {
        let mut stack = vec![target];
        while let Some(eta) = stack.pop() {
            let step = track_step(&mode_matrix(set, &system.params, eta), &prev, eta)?;
            let depth = ((target - prev_eta) / (eta - prev_eta)).log2().round() as usize;
            if step.min_overlap < OVERLAP_MIN && !branches[0].etas.is_empty() {
                if depth >= MAX_BISECTIONS {
                    return Err(Error::BranchTracking { eta, overlap: step.min_overlap });
                }
                stack.push(eta);
                stack.push(0.5 * (prev_eta + eta));
                continue;
            }
            for (b, br) in branches.iter_mut().enumerate() {
                br.etas.push(eta);
                br.eigenvalues.push(step.values[b]);
                br.vectors.push(step.vectors[b].clone());
                br.min_overlap = br.min_overlap.min(step.min_overlap);
            }
            prev = step.vectors;
            prev_eta = eta;
        }
    }
    Ok(branches)
}

/// Default small-`|η|` grid: 40 geometric points on `[10⁻³, δ]`.
pub fn default_branch_grid(delta: f64) -> Vec<f64> {
    geomspace(1e-3, delta, 40)
}

#[derive(Debug, Clone, Serialize)]
pub struct DispersionFit {
    pub pair: String,
    pub label: String,
    /// Coefficient of `i|η|` in the eigenvalue.
    pub a1: f64,
    /// Minus the coefficient of `|η|²`.
    pub a2: f64,
    /// Coefficients of `i|η|³` and `|η|⁴`.
    pub higher: [f64; 2],
    /// RMS fit residual relative to the RMS eigenvalue magnitude.
    pub residual: f64,
    pub points: usize,
    /// Distance of `(e_D(η) − E_D)/(i|η|)` at the smallest `|η|` from the
    /// resolvent formula for `E_{D,1}` (AB only), relative to its norm.
    pub e_d1_mismatch: Option<f64>,
}

/// Fits `Im λ ≈ a1 η + b η³`, `Re λ ≈ −a2 η² + c η⁴` on `η ≤ eta_max`.
pub fn fit_dispersion(branch: &DispersionBranch, eta_max: f64, threshold: f64) -> Result<DispersionFit> {
    let idx: Vec<usize> = (0..branch.etas.len()).filter(|&i| branch.etas[i] <= eta_max).collect();
    if idx.len() < 6 {
        return Err(Error::InvalidInput(format!("only {} branch points below eta = {eta_max}", idx.len())));
    }
    let x: Vec<f64> = idx.iter().map(|&i| branch.etas[i]).collect();
    let im: Vec<f64> = idx.iter().map(|&i| branch.eigenvalues[i].im).collect();
    let re: Vec<f64> = idx.iter().map(|&i| branch.eigenvalues[i].re).collect();
    let pw = |k: i32| x.iter().map(|t| t.powi(k)).collect::<Vec<f64>>();
    let (ci, ri) = least_squares(&[pw(1), pw(3)], &im)?;
    let (cr, rr) = least_squares(&[pw(2), pw(4)], &re)?;
    let scale = (idx.iter().map(|&i| branch.eigenvalues[i].norm_sqr()).sum::<f64>() / idx.len() as f64).sqrt();
    let residual = (ri * ri + rr * rr).sqrt() / scale.max(1e-300);
    if residual > threshold {
        return Err(Error::FitResidual { residual, threshold });
    }
    Ok(DispersionFit {
        pair: branch.pair.label(),
        label: branch.label.to_string(),
        a1: ci[0],
        a2: -cr[0],
        higher: [ci[1], cr[1]],
        residual,
        points: idx.len(),
        e_d1_mismatch: None,
    })
}

/// Solves `L x = b` on the orthogonal complement of `kernel` (orthonormal).
pub fn solve_in_complement(l: &Mat<f64>, kernel: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let bn = norm(b).max(1e-300);
    let leak = kernel.iter().map(|k| dot(k, b).powi(2)).sum::<f64>().sqrt();
    if leak > 1e-10 * bn {
        return Err(Error::KernelResidual(leak / bn));
    }
    let n = l.nrows();
    let shifted = Mat::<f64>::from_fn(n, n, |i, j| l[(i, j)] - kernel.iter().map(|k| k[i] * k[j]).sum::<f64>());
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = shifted.partial_piv_lu().solve(&rhs);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

fn transport_over_mass(system: &LinearizedSystem, pair: SpeciesPair, v: &[f64]) -> Vec<f64> {
    let m = system.params.mass(pair.x);
    matvec(&system.set(pair).t_omega, v).into_iter().map(|x| x / m).collect()
}

fn kernel_of(system: &LinearizedSystem, pair: SpeciesPair) -> Vec<Vec<f64>> {
    if pair == SpeciesPair::AB {
        vec![system.special.e_d.clone()]
    } else {
        system.special.chi.to_vec()
    }
}

/// `E_{D,1} = L_AB⁻¹ (p·ω/m_A) E_D`, the first-order correction in
/// `e_D(η) = E_D + i|η| E_{D,1} + O(|η|²)`.
pub fn first_order_correction(system: &LinearizedSystem) -> Result<Vec<f64>> {
    let b = transport_over_mass(system, SpeciesPair::AB, &system.special.e_d);
    solve_in_complement(&system.ab.l_full, &kernel_of(system, SpeciesPair::AB), &b)
}

/// `a₂ = −⟨L⁻¹ ℙ₁ (p·ω/m_X) E, ℙ₁ (p·ω/m_X) E⟩` for the branch `label`.
pub fn diffusion_coefficient_direct(system: &LinearizedSystem, pair: SpeciesPair, label: BranchLabel) -> Result<f64> {
    let refs = fluid_references(system, pair)?;
    let e = &refs
        .iter()
        .find(|(l, _)| *l == label)
        .ok_or_else(|| Error::InvalidInput(format!("no branch {label} for pair {pair}")))?
        .1;
    let kernel = kernel_of(system, pair);
    let mut v = transport_over_mass(system, pair, e);
    for k in &kernel {
        let c = dot(k, &v);
        v.iter_mut().zip(k).for_each(|(x, kk)| *x -= c * kk);
    }
    let x = solve_in_complement(&system.set(pair).l_full, &kernel, &v)?;
    Ok(-dot(&x, &v))
}

/// Branches plus fits and the direct coefficients for one pair.
#[derive(Debug, Clone, Serialize)]
pub struct DispersionSummary {
    pub fits: Vec<DispersionFit>,
    pub a2_direct: Vec<f64>,
    pub min_overlap: f64,
}

pub fn dispersion_summary(system: &LinearizedSystem, pair: SpeciesPair, branches: &[DispersionBranch], eta_max: f64) -> Result<DispersionSummary> {
    let mut fits = Vec::new();
    let mut direct = Vec::new();
    for br in branches {
        let mut fit = fit_dispersion(br, eta_max, 1e-3)?;
        if br.label == BranchLabel::D {
            let e1 = first_order_correction(system)?;
            let (eta, v) = (br.etas[0], &br.vectors[0]);
            let diff: Vec<c64> = v
                .iter()
                .zip(&system.special.e_d)
                .zip(&e1)
                .map(|((vi, ed), e)| (vi - c64::new(*ed, 0.0)) / c64::new(0.0, eta) - c64::new(*e, 0.0))
                .collect();
            fit.e_d1_mismatch = Some(cnorm(&diff) / norm(&e1));
        }
        fits.push(fit);
        direct.push(diffusion_coefficient_direct(system, pair, br.label)?);
    }
    let min_overlap = branches.iter().fold(1.0f64, |m, b| m.min(b.min_overlap));
    Ok(DispersionSummary { fits, a2_direct: direct, min_overlap })
}

#[derive(Debug, Clone, Serialize)]
pub struct CancellationSeries {
    pub j: usize,
    pub etas: Vec<f64>,
    pub values: Vec<f64>,
    pub expected_order: f64,
    /// Log-log fit over the window; `None` when the pairing vanishes.
    pub slope: Option<LineFit>,
    /// The pairing is zero to rounding on the whole grid.
    pub identically_zero: bool,
}

/// `|⟨e_j(−η), L_BA e_D(η)⟩| = |e_j(η)ᵀ L_BA e_D(η)|` along a common grid
/// and its log-log slope over `window`.
pub fn cancellation_orders(system: &LinearizedSystem, etas: &[f64], window: (f64, f64)) -> Result<Vec<CancellationSeries>> {
    let ab = eigen_branches(system, SpeciesPair::AB, etas)?;
    let bb = eigen_branches(system, SpeciesPair::BB, etas)?;
    cancellation_from_branches(system, &ab[0], &bb, window)
}

pub fn cancellation_from_branches(
    system: &LinearizedSystem,
    ed: &DispersionBranch,
    bb: &[DispersionBranch],
    window: (f64, f64),
) -> Result<Vec<CancellationSeries>> {
    let lba = &system.l_ba.matrix;
    let lba_c = crate::linalg::to_complex(lba);
    let scale = crate::linalg::max_abs(lba).max(1.0);
    let mut out = Vec::new();
    for br in bb {
        let BranchLabel::J(j) = br.label else { continue };
        let mut etas = Vec::new();
        let mut values = Vec::new();
        for (i, &eta) in br.etas.iter().enumerate() {
            // The AB branch may carry extra bisection points; align by value.
            let Some(k) = ed.etas.iter().position(|&e| e == eta) else { continue };
            let v = cmatvec(&lba_c, &ed.vectors[k]);
            etas.push(eta);
            values.push(bdot(&br.vectors[i], &v).norm());
        }
        let identically_zero = values.iter().all(|v| *v < 1e-13 * scale);
        let (wx, wy): (Vec<f64>, Vec<f64>) =
            etas.iter().zip(&values).filter(|(e, _)| **e >= window.0 && **e <= window.1).map(|(e, v)| (*e, *v)).unzip();
        let slope = if identically_zero { None } else { Some(loglog_slope(&wx, &wy)?) };
        out.push(CancellationSeries {
            j: j as usize,
            etas,
            values,
            expected_order: if j <= 1 { 1.0 } else { 2.0 },
            slope,
            identically_zero,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralGapReport {
    pub pair: String,
    pub delta: f64,
    /// `min(tau_long_nonfluid, tau_short)`.
    pub tau: f64,
    /// `−max Re` of the non-fluid eigenvalues for `|η| ≤ δ`.
    pub tau_long_nonfluid: f64,
    /// `−max Re` of all eigenvalues for `δ < |η| ≤ eta_max`.
    pub tau_short: f64,
    /// Distance of the first nonzero eigenvalue of `L` from 0.
    pub gap0: f64,
    /// Largest real part of the fluid eigenvalues on `(0, δ]`.
    pub fluid_max_re: f64,
    /// Every long-wave grid point has exactly the fluid count of
    /// eigenvalues with `Re > −gap0/2`.
    pub exhaustive: bool,
    pub delta_halvings: usize,
    pub long_grid: Vec<f64>,
    pub short_grid: Vec<f64>,
    pub eta_max: f64,
}

/// Eigenvalues of `L^η` sorted by decreasing real part.
pub fn sorted_spectrum(system: &LinearizedSystem, pair: SpeciesPair, eta: f64) -> Result<Vec<c64>> {
    let l = mode_matrix(system.set(pair), &system.params, eta);
    let mut vals = l.eigenvalues().map_err(|e| Error::Numerical(format!("eigenvalues failed: {e:?}")))?;
    vals.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(vals)
}

pub fn spectral_gap_scan(system: &LinearizedSystem, pair: SpeciesPair, delta: f64, eta_max: f64) -> Result<SpectralGapReport> {
    let nf = fluid_count(pair);
    let ev = sym_eigenvalues(&system.set(pair).l_full)?;
    let gap0 = -ev[ev.len() - 1 - nf];
    if !(gap0 > 0.0) {
        return Err(Error::NoSpectralGap(gap0));
    }
    let mut delta = delta;
    for halvings in 0..5 {
        let long_grid = geomspace(1e-3, delta, 24);
        let short_grid = linspace(delta, eta_max, 48)[1..].to_vec();
        let mut exhaustive = true;
        let mut tau_long = f64::INFINITY;
        let mut fluid_max = f64::NEG_INFINITY;
        for &eta in &long_grid {
            let vals = sorted_spectrum(system, pair, eta)?;
            let count = vals.iter().filter(|v| v.re > -0.5 * gap0).count();
            exhaustive &= count == nf;
            fluid_max = fluid_max.max(vals[0].re);
            tau_long = tau_long.min(-vals[nf].re);
        }
        let mut tau_short = f64::INFINITY;
        for &eta in &short_grid {
            let vals = sorted_spectrum(system, pair, eta)?;
            tau_short = tau_short.min(-vals[0].re);
        }
        if exhaustive || halvings == 4 {
            let tau = tau_long.min(tau_short);
            if !(tau > 0.0) {
                return Err(Error::NoSpectralGap(tau));
            }
            return Ok(SpectralGapReport {
                pair: pair.label(),
                delta,
                tau,
                tau_long_nonfluid: tau_long,
                tau_short,
                gap0,
                fluid_max_re: fluid_max,
                exhaustive,
                delta_halvings: halvings,
                long_grid,
                short_grid,
                eta_max,
            });
        }
        delta *= 0.5;
    }
    unreachable!()
}

/// Fluid spectral projector and its complement at one `|η|`, plus the
/// microscopic projection `ℙ₁` at `η = 0`.
#[derive(Debug, Clone)]
pub struct ProjectorSet {
    pub eta: f64,
    pub fluid: Mat<c64>,
    pub complement: Mat<c64>,
    pub micro: Mat<f64>,
}

impl ProjectorSet {
    /// `(‖Π² − Π‖_max, ‖ΠL − LΠ‖_max)`.
    pub fn diagnostics(&self, l: &Mat<c64>) -> (f64, f64) {
        let idem = &self.fluid * &self.fluid - &self.fluid;
        let comm = &self.fluid * l - l * &self.fluid;
        let mx = |m: &Mat<c64>| {
            let mut r: f64 = 0.0;
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    r = r.max(m[(i, j)].norm());
                }
            }
            r
        };
        (mx(&idem), mx(&comm))
    }
}

/// `Π = Σ_j e_j e_jᵀ` from bilinearly normalized fluid eigenvectors.
pub fn projector_set(system: &LinearizedSystem, pair: SpeciesPair, eta: f64, vectors: &[Vec<c64>]) -> ProjectorSet {
    let n = system.set(pair).l_full.nrows();
    let fluid = Mat::<c64>::from_fn(n, n, |i, j| vectors.iter().map(|v| v[i] * v[j]).sum());
    let complement = Mat::<c64>::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) } - fluid[(i, j)]);
    let kernel = kernel_of(system, pair);
    let micro = Mat::<f64>::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - kernel.iter().map(|k| k[i] * k[j]).sum::<f64>());
    ProjectorSet { eta, fluid, complement, micro }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretization;
    use crate::kernels::ModelParams;

    fn system() -> LinearizedSystem {
        let p = ModelParams::new(1.5, 1.0, 0.0).unwrap();
        LinearizedSystem::assemble(&p, Discretization { degree: 5, ..Default::default() }).unwrap()
    }

    #[test]
    fn clusters_group_close_values() {
        let v = [c64::new(0.0, 0.0), c64::new(1e-12, 0.0), c64::new(1.0, 0.0)];
        let g = union_clusters(&v, 1e-10);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0], vec![0, 1]);
    }

    #[test]
    fn bb_branches_have_sound_slopes() {
        let s = system();
        let grid = geomspace(1e-3, 0.3, 25);
        let br = eigen_branches(&s, SpeciesPair::BB, &grid).unwrap();
        let want = (5.0f64 / 3.0).sqrt() / s.params.m_b;
        let fit0 = fit_dispersion(&br[0], 0.2, 1e-3).unwrap();
        let fit1 = fit_dispersion(&br[1], 0.2, 1e-3).unwrap();
        assert!((fit0.a1 - want).abs() < 1e-3 * want, "{fit0:?}");
        assert!((fit1.a1 + want).abs() < 1e-3 * want);
        for b in &br[2..] {
            let f = fit_dispersion(b, 0.2, 1e-3).unwrap();
            assert!(f.a1.abs() < 1e-8);
            assert!(f.a2 > 0.0);
        }
        // Shear branches are degenerate by symmetry.
        for i in 0..grid.len() {
            assert!((br[3].eigenvalues[i] - br[4].eigenvalues[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn conjugation_symmetry_of_spectrum() {
        let s = system();
        let mut a = sorted_spectrum(&s, SpeciesPair::BB, 0.7).unwrap();
        let mut b: Vec<c64> = mode_matrix(&s.bb, &s.params, -0.7).eigenvalues().unwrap();
        a.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        b.iter_mut().for_each(|v| *v = v.conj());
        b.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn direct_coefficient_matches_ab_fit() {
        let s = system();
        let br = eigen_branches(&s, SpeciesPair::AB, &geomspace(1e-3, 0.3, 25)).unwrap();
        let summary = dispersion_summary(&s, SpeciesPair::AB, &br, 0.2).unwrap();
        let (fit, direct) = (&summary.fits[0], summary.a2_direct[0]);
        assert!(fit.a1.abs() < 1e-10);
        assert!((fit.a2 - direct).abs() < 1e-3 * direct, "{} {}", fit.a2, direct);
        assert!(fit.e_d1_mismatch.unwrap() < 1e-2);
    }

    #[test]
    fn kernel_leak_is_reported() {
        let s = system();
        let r = solve_in_complement(&s.ab.l_full, &kernel_of(&s, SpeciesPair::AB), &s.special.e_d);
        assert!(matches!(r, Err(Error::KernelResidual(_))));
    }

    #[test]
    fn projectors_are_consistent() {
        let s = system();
        let br = eigen_branches(&s, SpeciesPair::BB, &geomspace(1e-3, 0.2, 10)).unwrap();
        let last = br[0].etas.len() - 1;
        let vecs: Vec<Vec<c64>> = br.iter().map(|b| b.vectors[last].clone()).collect();
        let eta = br[0].etas[last];
        let ps = projector_set(&s, SpeciesPair::BB, eta, &vecs);
        let (idem, comm) = ps.diagnostics(&mode_matrix(&s.bb, &s.params, eta));
        assert!(idem < 1e-9 && comm < 1e-8, "{idem} {comm}");
    }

    #[test]
    fn gap_scan_is_positive() {
        let s = system();
        let rep = spectral_gap_scan(&s, SpeciesPair::AB, 0.5, 5.0).unwrap();
        assert!(rep.tau > 0.0 && rep.exhaustive);
    }
}
