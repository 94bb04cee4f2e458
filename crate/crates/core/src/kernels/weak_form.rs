use serde::Serialize;

use super::{dot3, mat3_vec, phi_raw, ModelParams, Species, SpeciesPair, Vec3};
use crate::error::{Error, Result};
use crate::quad::QuadratureRule;

/// A density sampled through callables; the gradient is supplied by the
/// implementor.
pub trait Density {
    fn value(&self, p: Vec3) -> f64;
    fn grad(&self, p: Vec3) -> Vec3;
}

pub trait TestFunction {
    fn value(&self, p: Vec3) -> f64;
    fn grad(&self, p: Vec3) -> Vec3;
}

/// Positive combination of isotropic Gaussians `Σ w_i N(p; c_i, v_i I)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianMixture {
    pub components: Vec<(f64, Vec3, f64)>,
}

impl GaussianMixture {
    pub fn maxwellian(params: &ModelParams, species: Species) -> Self {
        Self { components: vec![(1.0, [0.0; 3], params.variance(species))] }
    }

    /// The species equilibrium plus `extra` random bumps with small weights,
    /// shifted centres and nearby variances.
    pub fn perturbed_maxwellian(params: &ModelParams, species: Species, extra: usize, rng: &mut impl rand::Rng) -> Self {
        let v = params.variance(species);
        let mut components = vec![(1.0, [0.0; 3], v)];
        for _ in 0..extra {
            let w = rng.gen_range(0.05..0.3);
            let c = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
            let var = v * rng.gen_range(0.6..1.0);
            components.push((w, c, var));
        }
        Self { components }
    }
}

impl Density for GaussianMixture {
    fn value(&self, p: Vec3) -> f64 {
        self.components
            .iter()
            .map(|&(w, c, v)| {
                let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
                w * (2.0 * std::f64::consts::PI * v).powf(-1.5) * (-0.5 * dot3(d, d) / v).exp()
            })
            .sum()
    }

    fn grad(&self, p: Vec3) -> Vec3 {
        let mut g = [0.0; 3];
        for &(w, c, v) in &self.components {
            let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
            let val = w * (2.0 * std::f64::consts::PI * v).powf(-1.5) * (-0.5 * dot3(d, d) / v).exp();
            for i in 0..3 {
                g[i] -= d[i] / v * val;
            }
        }
        g
    }
}

/// The collision-invariant test functions `1`, `p_i` and `|p|²/2 · scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentTest {
    One,
    Momentum(usize),
    Energy { scale: f64 },
}

impl TestFunction for MomentTest {
    fn value(&self, p: Vec3) -> f64 {
        match *self {
            MomentTest::One => 1.0,
            MomentTest::Momentum(i) => p[i],
            MomentTest::Energy { scale } => 0.5 * scale * dot3(p, p),
        }
    }

    fn grad(&self, p: Vec3) -> Vec3 {
        match *self {
            MomentTest::One => [0.0; 3],
            MomentTest::Momentum(i) => {
                let mut g = [0.0; 3];
                g[i] = 1.0;
                g
            }
            MomentTest::Energy { scale } => [scale * p[0], scale * p[1], scale * p[2]],
        }
    }
}

struct Samples {
    w: Vec<f64>,
    val: Vec<f64>,
    grad: Vec<Vec3>,
}

fn sample(rule: &QuadratureRule, f: &dyn Density, what: &str) -> Result<Samples> {
    if rule.is_empty() {
        return Err(Error::InvalidInput("empty quadrature rule".into()));
    }
    let w = rule.lebesgue_weights();
    let val: Vec<f64> = rule.nodes.iter().map(|&p| f.value(p)).collect();
    let grad: Vec<Vec3> = rule.nodes.iter().map(|&p| f.grad(p)).collect();
    let ok = w.iter().chain(&val).all(|v| v.is_finite()) && grad.iter().flatten().all(|v| v.is_finite());
    if !ok {
        return Err(Error::InvalidInput(format!("{what} is not finite on every quadrature node")));
    }
    Ok(Samples { w, val, grad })
}

/// `∫ψ Q^{XY}(F, G) dp = −∬ ∇ψ(p)·Φ^{X,Y}(p/m_X − p_*/m_Y)[G(p_*)∇F(p) − F(p)∇G(p_*)]`.
///
/// One node set serves both `p` and `p_*`, so the swap cancellations of the
/// collision invariants hold to rounding.
pub fn q_weak_form(
    params: &ModelParams,
    pair: SpeciesPair,
    f: &dyn Density,
    g: &dyn Density,
    psi: &dyn TestFunction,
    rule: &QuadratureRule,
) -> Result<f64> {
    let fs = sample(rule, f, "F")?;
    let gs = sample(rule, g, "G")?;
    Ok(weak_sum(params, pair, &fs, &gs, psi, rule))
}

fn weak_sum(
    params: &ModelParams,
    pair: SpeciesPair,
    fs: &Samples,
    gs: &Samples,
    psi: &dyn TestFunction,
    rule: &QuadratureRule,
) -> f64 {
    let (mx, my) = (params.mass(pair.x), params.mass(pair.y));
    let c = params.reduced_mass(pair);
    let n = rule.len();
    let mut total = 0.0;
    for k in 0..n {
        let pk = rule.nodes[k];
        let dpsi = psi.grad(pk);
        if dpsi == [0.0; 3] {
            continue;
        }
        let mut flux = [0.0; 3];
        for l in 0..n {
            let pl = rule.nodes[l];
            let z = [pk[0] / mx - pl[0] / my, pk[1] / mx - pl[1] / my, pk[2] / mx - pl[2] / my];
            let Some(phi) = phi_raw(c, params.gamma, z) else { continue };
            let bracket = [
                gs.val[l] * fs.grad[k][0] - fs.val[k] * gs.grad[l][0],
                gs.val[l] * fs.grad[k][1] - fs.val[k] * gs.grad[l][1],
                gs.val[l] * fs.grad[k][2] - fs.val[k] * gs.grad[l][2],
            ];
            let j = mat3_vec(&phi, bracket);
            for i in 0..3 {
                flux[i] += gs.w[l] * j[i];
            }
        }
        total -= fs.w[k] * dot3(dpsi, flux);
    }
    total
}

/// Moment residuals of the collision terms.
#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    /// `∫(Q^{AA} + Q^{AB}) dp`.
    pub mass_a: f64,
    /// `∫(Q^{BB} + Q^{BA}) dp`.
    pub mass_b: f64,
    /// `∫p [Q^{AB} + Q^{BA}] dp`.
    pub momentum: Vec3,
    /// `∫|p|²/2 [Q^{AB}/m_A + Q^{BA}/m_B] dp`.
    pub energy: f64,
    /// `{1, p_1, p_2, p_3, |p|²/2}` moments of `Q^{AA}(F_A, F_A)`.
    pub self_a: [f64; 5],
    /// Same for `Q^{BB}(F_B, F_B)`.
    pub self_b: [f64; 5],
}

impl ConservationReport {
    pub fn max_abs(&self) -> f64 {
        let mut m = self.mass_a.abs().max(self.mass_b.abs()).max(self.energy.abs());
        for v in self.momentum.iter().chain(&self.self_a).chain(&self.self_b) {
            m = m.max(v.abs());
        }
        m
    }
}

pub fn conservation_report(
    params: &ModelParams,
    f_a: &dyn Density,
    f_b: &dyn Density,
    rule: &QuadratureRule,
) -> Result<ConservationReport> {
    let sa = sample(rule, f_a, "F_A")?;
    let sb = sample(rule, f_b, "F_B")?;
    let tests = [
        MomentTest::One,
        MomentTest::Momentum(0),
        MomentTest::Momentum(1),
        MomentTest::Momentum(2),
        MomentTest::Energy { scale: 1.0 },
    ];
    let mut self_a = [0.0; 5];
    let mut self_b = [0.0; 5];
    for (i, t) in tests.iter().enumerate() {
        self_a[i] = weak_sum(params, SpeciesPair::AA, &sa, &sa, t, rule);
        self_b[i] = weak_sum(params, SpeciesPair::BB, &sb, &sb, t, rule);
    }
    let one = MomentTest::One;
    let mass_a = self_a[0] + weak_sum(params, SpeciesPair::AB, &sa, &sb, &one, rule);
    let mass_b = self_b[0] + weak_sum(params, SpeciesPair::BA, &sb, &sa, &one, rule);
    let mut momentum = [0.0; 3];
    for (i, m) in momentum.iter_mut().enumerate() {
        let t = MomentTest::Momentum(i);
        *m = weak_sum(params, SpeciesPair::AB, &sa, &sb, &t, rule) + weak_sum(params, SpeciesPair::BA, &sb, &sa, &t, rule);
    }
    let energy = weak_sum(params, SpeciesPair::AB, &sa, &sb, &MomentTest::Energy { scale: 1.0 / params.m_a }, rule)
        + weak_sum(params, SpeciesPair::BA, &sb, &sa, &MomentTest::Energy { scale: 1.0 / params.m_b }, rule);
    Ok(ConservationReport { mass_a, mass_b, momentum, energy, self_a, self_b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rule() -> QuadratureRule {
        QuadratureRule::gauss_hermite(12, 1.5).unwrap()
    }

    #[test]
    fn constant_test_function_gives_exact_zero() {
        let p = ModelParams::default();
        let f = GaussianMixture::maxwellian(&p, Species::A);
        let g = GaussianMixture::maxwellian(&p, Species::B);
        let v = q_weak_form(&p, SpeciesPair::AB, &f, &g, &MomentTest::One, &rule()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn equilibria_are_annihilated() {
        for gamma in [0.0, -1.0, 0.8] {
            let p = ModelParams::new(1.5, 1.0, gamma).unwrap();
            let f = GaussianMixture::maxwellian(&p, Species::A);
            let g = GaussianMixture::maxwellian(&p, Species::B);
            let psi = MomentTest::Energy { scale: 3.0 };
            let v = q_weak_form(&p, SpeciesPair::AB, &f, &g, &psi, &rule()).unwrap();
            assert!(v.abs() < 1e-13, "gamma={gamma}: {v}");
        }
    }

    #[test]
    fn non_equilibrium_pair_is_not_annihilated() {
        let p = ModelParams::default();
        let f = GaussianMixture { components: vec![(1.0, [0.0; 3], 0.5)] };
        let g = GaussianMixture::maxwellian(&p, Species::B);
        let v = q_weak_form(&p, SpeciesPair::AB, &f, &g, &MomentTest::Energy { scale: 1.0 }, &rule()).unwrap();
        assert!(v.abs() > 1e-3);
    }

    #[test]
    fn perturbed_densities_conserve() {
        let p = ModelParams::new(1.5, 1.0, -0.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let fa = GaussianMixture::perturbed_maxwellian(&p, Species::A, 2, &mut rng);
        let fb = GaussianMixture::perturbed_maxwellian(&p, Species::B, 2, &mut rng);
        let rep = conservation_report(&p, &fa, &fb, &QuadratureRule::gauss_hermite(8, 1.5).unwrap()).unwrap();
        assert!(rep.max_abs() < 1e-12, "{rep:?}");
        // The individual species momentum exchange is not zero.
        let single = q_weak_form(&p, SpeciesPair::AB, &fa, &fb, &MomentTest::Momentum(0), &QuadratureRule::gauss_hermite(8, 1.5).unwrap()).unwrap();
        assert!(single.abs() > 1e-6);
    }

    #[test]
    fn non_finite_density_is_rejected() {
        struct Bad;
        impl Density for Bad {
            fn value(&self, _: Vec3) -> f64 {
                f64::NAN
            }
            fn grad(&self, _: Vec3) -> Vec3 {
                [0.0; 3]
            }
        }
        let p = ModelParams::default();
        let g = GaussianMixture::maxwellian(&p, Species::B);
        assert!(q_weak_form(&p, SpeciesPair::AB, &Bad, &g, &MomentTest::One, &rule()).is_err());
    }
}
