//! Continuum ingredients of the collision operators: equilibria, the
//! projection kernel `Φ^{X,Y}`, the diffusion matrices `σ^{XY}` and the weak
//! form of the bilinear operator `Q^{XY}`.

mod sigma;
mod weak_form;

pub use sigma::{
    lambda_asymptotic_prefactor, lambda_pair, sigma_by_quadrature, sigma_matrix, sigma_structure_check, LambdaValues, SigmaStructureReport,
    SigmaTable,
};
pub use weak_form::{
    conservation_report, q_weak_form, ConservationReport, Density, GaussianMixture, MomentTest, TestFunction,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Node pairs closer than this in the kernel argument are skipped by every
/// double quadrature.
pub const COINCIDENT_NODE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    A,
    B,
}

impl Species {
    pub fn tag(self) -> &'static str {
        match self {
            Species::A => "A",
            Species::B => "B",
        }
    }
}

/// Ordered species pair `(X, Y)`: `X` is the species whose equation the
/// operator acts in, `Y` the collision partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpeciesPair {
    pub x: Species,
    pub y: Species,
}

impl SpeciesPair {
    pub const AA: Self = Self { x: Species::A, y: Species::A };
    pub const AB: Self = Self { x: Species::A, y: Species::B };
    pub const BA: Self = Self { x: Species::B, y: Species::A };
    pub const BB: Self = Self { x: Species::B, y: Species::B };

    pub fn label(self) -> String {
        format!("{}{}", self.x.tag(), self.y.tag())
    }

    pub fn swapped(self) -> Self {
        Self { x: self.y, y: self.x }
    }
}

impl std::fmt::Display for SpeciesPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.x.tag(), self.y.tag())
    }
}

impl std::str::FromStr for SpeciesPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AA" => Ok(Self::AA),
            "AB" => Ok(Self::AB),
            "BA" => Ok(Self::BA),
            "BB" => Ok(Self::BB),
            _ => Err(Error::InvalidInput(format!("unknown species pair {s:?}"))),
        }
    }
}

/// Physical configuration: the two masses and the potential exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m_a: f64,
    pub m_b: f64,
    pub gamma: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { m_a: 1.5, m_b: 1.0, gamma: 0.0 }
    }
}

impl ModelParams {
    pub fn new(m_a: f64, m_b: f64, gamma: f64) -> Result<Self> {
        let p = Self { m_a, m_b, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_a > 0.0 && self.m_a.is_finite()) {
            return Err(Error::InvalidInput(format!("m_A must be positive, got {}", self.m_a)));
        }
        if !(self.m_b > 0.0 && self.m_b.is_finite()) {
            return Err(Error::InvalidInput(format!("m_B must be positive, got {}", self.m_b)));
        }
        if !(-2.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidInput(format!("gamma must lie in [-2, 1], got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn mass(&self, s: Species) -> f64 {
        match s {
            Species::A => self.m_a,
            Species::B => self.m_b,
        }
    }

    /// Per-component variance of the species equilibrium, `m_X / m_B`.
    pub fn variance(&self, s: Species) -> f64 {
        self.mass(s) / self.m_b
    }

    /// Reduced mass `m_X m_Y / (m_X + m_Y)`.
    pub fn reduced_mass(&self, pair: SpeciesPair) -> f64 {
        let (mx, my) = (self.mass(pair.x), self.mass(pair.y));
        mx * my / (mx + my)
    }
}

/// Equilibrium density of `species` at momentum `p`.
///
/// `M_B` is the standard Gaussian; `M_A` has variance `m_A/m_B` per
/// component, the unique normalized Gaussian with `Q^{AB}(M_A, M_B) = 0`.
pub fn maxwellian(params: &ModelParams, species: Species, p: Vec3) -> f64 {
    let v = params.variance(species);
    let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    (2.0 * std::f64::consts::PI * v).powf(-1.5) * (-0.5 * r2 / v).exp()
}

/// Gradient of [`maxwellian`].
pub fn maxwellian_grad(params: &ModelParams, species: Species, p: Vec3) -> Vec3 {
    let v = params.variance(species);
    let m = maxwellian(params, species, p);
    [-p[0] / v * m, -p[1] / v * m, -p[2] / v * m]
}

/// `c (|z|² I − z zᵀ) |z|^γ`, or `None` when `z` is a coincident point.
#[inline]
pub(crate) fn phi_raw(c: f64, gamma: f64, z: Vec3) -> Option<Mat3> {
    let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    if r2 < COINCIDENT_NODE_TOL * COINCIDENT_NODE_TOL {
        return None;
    }
    let s = if gamma == 0.0 { c } else { c * r2.powf(0.5 * gamma) };
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { r2 } else { 0.0 };
            m[i][j] = s * (d - z[i] * z[j]);
        }
    }
    Some(m)
}

/// The projection kernel `Φ^{X,Y}(z) = c [I − z⊗z/|z|²] |z|^{γ+2}` with
/// `c = m_X m_Y / (m_X + m_Y)`.
///
/// At `z = 0` the kernel vanishes for `γ > −2`; for `γ = −2` its value there
/// depends on direction and an error is returned.
pub fn phi_kernel(params: &ModelParams, pair: SpeciesPair, z: Vec3) -> Result<Mat3> {
    match phi_raw(params.reduced_mass(pair), params.gamma, z) {
        Some(m) => Ok(m),
        None if params.gamma > -2.0 => Ok([[0.0; 3]; 3]),
        None => Err(Error::Numerical(
            "phi kernel is direction-dependent at z = 0 for gamma = -2; exclude coincident nodes".into(),
        )),
    }
}

#[inline]
pub fn mat3_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// `⟨p⟩ = (1 + |p|²)^{1/2}`.
#[inline]
pub fn japanese_bracket(p: Vec3) -> f64 {
    (1.0 + dot3(p, p)).sqrt()
}

/// Polynomial momentum weight: `⟨p⟩^θ` for `n = 0` or `γ ≥ 0`, and
/// `⟨p⟩^{|γ| n + θ}` for `γ < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub theta: f64,
    pub n: u32,
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self { theta: 0.0, n: 0 }
    }
}

impl WeightSpec {
    pub fn new(theta: f64, n: u32) -> Result<Self> {
        if !(theta >= 0.0) {
            return Err(Error::InvalidInput(format!("weight exponent theta must be >= 0, got {theta}")));
        }
        Ok(Self { theta, n })
    }

    pub fn exponent(&self, gamma: f64) -> f64 {
        if gamma < 0.0 {
            gamma.abs() * self.n as f64 + self.theta
        } else {
            self.theta
        }
    }

    pub fn value(&self, gamma: f64, p: Vec3) -> f64 {
        japanese_bracket(p).powf(self.exponent(gamma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;

    #[test]
    fn maxwellian_b_at_origin() {
        let p = ModelParams::default();
        let v = maxwellian(&p, Species::B, [0.0; 3]);
        assert!((v - 0.063_493_635_934_240_97).abs() < 1e-15);
    }

    #[test]
    fn maxwellian_a_equals_b_for_equal_masses() {
        let p = ModelParams::new(1.0, 1.0, 0.0).unwrap();
        for q in [[0.3, -1.0, 2.0], [0.0, 0.0, 0.0], [4.0, 0.1, 0.2]] {
            assert_eq!(maxwellian(&p, Species::A, q), maxwellian(&p, Species::B, q));
        }
    }

    #[test]
    fn maxwellian_a_value_and_normalization() {
        let p = ModelParams::new(1.5, 1.0, 0.0).unwrap();
        let v0 = maxwellian(&p, Species::A, [0.0; 3]);
        assert!((v0 - (2.0 * std::f64::consts::PI * 1.5).powf(-1.5)).abs() < 1e-15);
        // Radial Gauss–Legendre oracle for the normalization integral.
        let gl = GaussLegendre::new(40).unwrap();
        let edges: Vec<f64> = (0..=16).map(|i| i as f64).collect();
        let (r, w) = gl.composite(&edges);
        let total: f64 = r
            .iter()
            .zip(&w)
            .map(|(&r, &w)| w * 4.0 * std::f64::consts::PI * r * r * maxwellian(&p, Species::A, [r, 0.0, 0.0]))
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn phi_annihilates_argument_and_has_expected_trace() {
        let params = ModelParams::new(1.5, 1.0, 0.7).unwrap();
        let z = [0.3, -1.2, 2.5];
        for pair in [SpeciesPair::AB, SpeciesPair::BB, SpeciesPair::BA, SpeciesPair::AA] {
            let m = phi_kernel(&params, pair, z).unwrap();
            let mz = mat3_vec(&m, z);
            assert!(mz.iter().all(|v| v.abs() < 1e-14));
            let tr = m[0][0] + m[1][1] + m[2][2];
            let want = 2.0 * params.reduced_mass(pair) * norm3(z).powf(params.gamma + 2.0);
            assert!((tr - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn phi_hand_value() {
        let params = ModelParams::new(1.0, 1.0, 0.0).unwrap();
        let m = phi_kernel(&params, SpeciesPair::BB, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(m, [[0.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]]);
    }

    #[test]
    fn phi_at_origin() {
        let soft = ModelParams::new(1.0, 1.0, -1.0).unwrap();
        assert_eq!(phi_kernel(&soft, SpeciesPair::BB, [0.0; 3]).unwrap(), [[0.0; 3]; 3]);
        let endpoint = ModelParams::new(1.0, 1.0, -2.0).unwrap();
        assert!(phi_kernel(&endpoint, SpeciesPair::BB, [0.0; 3]).is_err());
    }

    #[test]
    fn params_reject_out_of_range() {
        assert!(ModelParams::new(1.0, 1.0, -3.0).is_err());
        assert!(ModelParams::new(0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn weight_spec_values() {
        let p = [1.0, 2.0, 2.0];
        let w = WeightSpec::new(1.0, 2).unwrap();
        assert!((w.value(0.5, p) - 10f64.sqrt()).abs() < 1e-14);
        assert!((w.value(-1.0, p) - 10f64.sqrt().powi(3)).abs() < 1e-12);
        assert!((WeightSpec::default().value(-1.0, p) - 1.0).abs() < 1e-15);
    }
}
