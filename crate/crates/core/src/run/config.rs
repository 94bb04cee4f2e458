use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::fit::{geomspace, linspace};
use crate::kernels::{ModelParams, WeightSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub m_a: f64,
    pub m_b: f64,
    pub gamma: f64,
    /// Maximal total Hermite degree `N`.
    pub degree: usize,
    pub oversampling: usize,
    pub varpi: f64,
    pub radius: f64,
    pub omega: [f64; 3],
    /// Long/short wave split `δ`.
    pub delta: f64,
    pub eta_max: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub coeffs: CoeffsConfig,
    pub conserve: ConserveConfig,
    pub coercivity: CoercivityConfig,
    pub spectrum: SpectrumConfig,
    pub dispersion: DispersionConfig,
    pub cancellation: CancellationConfig,
    pub times: TimeGrid,
    pub evolve: EvolveConfig,
    pub hsplit: HSplitConfig,
    pub decay: DecayConfig,
    pub picard: PicardConfig,
    pub smoothing: SmoothingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoeffsConfig {
    /// Radii for the trace identity, log-spaced on `[r_min, r_max]`.
    pub radii: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Random momenta for the quadratic-form and divergence checks.
    pub samples: usize,
    pub table_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConserveConfig {
    pub trials: usize,
    /// Extra Gaussian bumps per perturbed density.
    pub bumps: usize,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoercivityConfig {
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub etas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionConfig {
    pub eta_min: f64,
    pub points: usize,
    pub fit_eta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CancellationConfig {
    pub window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub etas: Vec<f64>,
    /// Times at which the eigen route is compared with the block exponential.
    pub check_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HSplitConfig {
    pub etas: Vec<f64>,
    pub times: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub power_window: [f64; 2],
    pub exponential_window: [f64; 2],
    pub long_panels: usize,
    pub short_panels: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub etas: Vec<f64>,
    pub k_max: usize,
    pub times: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub eta_points: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub window: [f64; 2],
    pub theta: f64,
    pub weight_n: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = Discretization::default();
        Self {
            m_a: 1.5,
            m_b: 1.0,
            gamma: 0.0,
            degree: d.degree,
            oversampling: d.oversampling,
            varpi: d.varpi,
            radius: d.radius,
            omega: d.omega,
            delta: 0.5,
            eta_max: 5.0,
            seed: 0,
            output_dir: PathBuf::from("out"),
            coeffs: CoeffsConfig::default(),
            conserve: ConserveConfig::default(),
            coercivity: CoercivityConfig::default(),
            spectrum: SpectrumConfig::default(),
            dispersion: DispersionConfig::default(),
            cancellation: CancellationConfig::default(),
            times: TimeGrid::default(),
            evolve: EvolveConfig::default(),
            hsplit: HSplitConfig::default(),
            decay: DecayConfig::default(),
            picard: PicardConfig::default(),
            smoothing: SmoothingConfig::default(),
        }
    }
}

impl Default for CoeffsConfig {
    fn default() -> Self {
        Self { radii: 20, r_min: 0.05, r_max: 10.0, samples: 20, table_points: 400 }
    }
}

impl Default for ConserveConfig {
    fn default() -> Self {
        Self { trials: 3, bumps: 2, order: 8 }
    }
}

impl Default for CoercivityConfig {
    fn default() -> Self {
        Self { samples: 1000 }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { etas: vec![0.0, 0.1, 0.5, 1.0, 2.0, 5.0] }
    }
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self { eta_min: 1e-3, points: 40, fit_eta_max: 0.1 }
    }
}

impl Default for CancellationConfig {
    fn default() -> Self {
        Self { window: [1e-3, 0.1] }
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { t_min: 1e-2, t_max: 1e4, points: 60 }
    }
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { etas: vec![0.1, 1.0, 3.0], check_times: vec![0.5, 5.0, 50.0] }
    }
}

impl Default for HSplitConfig {
    fn default() -> Self {
        Self { etas: vec![0.05, 0.2, 0.45], times: vec![0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0], tolerance: 1e-8 }
    }
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { power_window: [1e2, 1e4], exponential_window: [1.0, 1e2], long_panels: 12, short_panels: 4, points: 6 }
    }
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { etas: vec![0.1, 1.0, 3.0], k_max: 2, times: vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0], tolerance: 1e-8 }
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { eta_points: 11, t_min: 1e-2, t_max: 1.0, t_points: 15, window: [1e-2, 1.0], theta: 0.0, weight_n: 1 }
    }
}

fn config_err(location: &str, message: impl Into<String>) -> Error {
    Error::Config { location: location.into(), message: message.into() }
}

fn window_ok(location: &str, w: [f64; 2]) -> Result<()> {
    if !(w[0] > 0.0 && w[1] > w[0] && w[1].is_finite()) {
        return Err(config_err(location, format!("window must satisfy 0 < t1 < t2, got {w:?}")));
    }
    Ok(())
}

fn increasing_nonneg(location: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v[0] < 0.0 || v.windows(2).any(|w| w[1] <= w[0]) || v.iter().any(|x| !x.is_finite()) {
        return Err(config_err(location, "must be a nonempty increasing list of finite values >= 0"));
    }
    Ok(())
}

impl RunConfig {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.m_a, self.m_b, self.gamma)
    }

    pub fn discretization(&self) -> Discretization {
        Discretization { degree: self.degree, oversampling: self.oversampling, varpi: self.varpi, radius: self.radius, omega: self.omega }
    }

    pub fn time_grid(&self) -> Vec<f64> {
        geomspace(self.times.t_min, self.times.t_max, self.times.points)
    }

    pub fn branch_grid(&self) -> Vec<f64> {
        geomspace(self.dispersion.eta_min, self.delta, self.dispersion.points)
    }

    pub fn smoothing_etas(&self, refine: bool) -> Vec<f64> {
        let n = self.smoothing.eta_points;
        linspace(0.0, self.eta_max, if refine { 2 * n - 1 } else { n })
    }

    pub fn smoothing_times(&self) -> Vec<f64> {
        geomspace(self.smoothing.t_min, self.smoothing.t_max, self.smoothing.t_points)
    }

    pub fn weight(&self) -> Result<WeightSpec> {
        WeightSpec::new(self.smoothing.theta, self.smoothing.weight_n)
    }

    /// Checks every module precondition; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let pos = |loc: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(config_err(loc, format!("must be positive and finite, got {v}"))) };
        pos("m_a", self.m_a)?;
        pos("m_b", self.m_b)?;
        if !(-2.0..=1.0).contains(&self.gamma) {
            return Err(config_err("gamma", format!("must lie in [-2, 1], got {}", self.gamma)));
        }
        if self.degree < 2 {
            return Err(config_err("degree", format!("N >= 2 is needed to represent the collision invariants, got {}", self.degree)));
        }
        if self.oversampling < 1 {
            return Err(config_err("oversampling", "must be >= 1"));
        }
        pos("varpi", self.varpi)?;
        pos("radius", self.radius)?;
        let on = self.omega.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (on - 1.0).abs() > 1e-12 {
            return Err(config_err("omega", format!("must be a unit vector, |omega| = {on}")));
        }
        pos("delta", self.delta)?;
        if !(self.eta_max > self.delta && self.eta_max.is_finite()) {
            return Err(config_err("eta_max", format!("must exceed delta = {}, got {}", self.delta, self.eta_max)));
        }
        let c = &self.coeffs;
        if c.radii < 1 || c.samples < 1 || c.table_points < 4 {
            return Err(config_err("coeffs", "radii and samples must be >= 1, table_points >= 4"));
        }
        if !(c.r_min > 0.0 && c.r_max > c.r_min) {
            return Err(config_err("coeffs.r_min", "need 0 < r_min < r_max"));
        }
        if self.conserve.trials < 1 || self.conserve.order < 2 {
            return Err(config_err("conserve", "trials must be >= 1 and order >= 2"));
        }
        if self.coercivity.samples < 1 {
            return Err(config_err("coercivity.samples", "must be >= 1"));
        }
        if self.spectrum.etas.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(config_err("spectrum.etas", "values must be finite and >= 0"));
        }
        let d = &self.dispersion;
        if !(d.eta_min > 0.0 && d.eta_min < self.delta) || d.points < 8 {
            return Err(config_err("dispersion", "need 0 < eta_min < delta and points >= 8"));
        }
        if !(d.fit_eta_max > d.eta_min && d.fit_eta_max <= self.delta) {
            return Err(config_err("dispersion.fit_eta_max", "must lie in (eta_min, delta]"));
        }
        window_ok("cancellation.window", self.cancellation.window)?;
        let t = &self.times;
        if !(t.t_min > 0.0 && t.t_max > t.t_min && t.t_max.is_finite()) || t.points < 2 {
            return Err(config_err("times", "need 0 < t_min < t_max and points >= 2"));
        }
        if self.evolve.etas.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(config_err("evolve.etas", "values must be finite and >= 0"));
        }
        increasing_nonneg("evolve.check_times", &self.evolve.check_times)?;
        if self.hsplit.etas.iter().any(|e| !(*e > 0.0 && *e < self.delta)) {
            return Err(config_err("hsplit.etas", format!("values must lie in (0, delta = {})", self.delta)));
        }
        increasing_nonneg("hsplit.times", &self.hsplit.times)?;
        pos("hsplit.tolerance", self.hsplit.tolerance)?;
        let dc = &self.decay;
        window_ok("decay.power_window", dc.power_window)?;
        window_ok("decay.exponential_window", dc.exponential_window)?;
        if dc.power_window[0] < 10.0 {
            return Err(config_err("decay.power_window", "algebraic fits need t1 >= 10"));
        }
        if dc.long_panels < 1 || dc.short_panels < 1 || dc.points < 2 {
            return Err(config_err("decay", "panels must be >= 1 and points >= 2"));
        }
        if self.picard.etas.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(config_err("picard.etas", "values must be finite and >= 0"));
        }
        if self.picard.k_max > 4 {
            return Err(config_err("picard.k_max", "must be <= 4"));
        }
        increasing_nonneg("picard.times", &self.picard.times)?;
        pos("picard.tolerance", self.picard.tolerance)?;
        let s = &self.smoothing;
        if s.eta_points < 2 || s.t_points < 2 {
            return Err(config_err("smoothing", "eta_points and t_points must be >= 2"));
        }
        if !(s.t_min > 0.0 && s.t_max > s.t_min && s.t_max <= 1.0) {
            return Err(config_err("smoothing.t_max", "need 0 < t_min < t_max <= 1"));
        }
        window_ok("smoothing.window", s.window)?;
        if !(s.theta >= 0.0) {
            return Err(config_err("smoothing.theta", "must be >= 0"));
        }
        Ok(())
    }
}

/// Parses JSON config text, fills defaults and validates.
pub fn validate_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| config_err(&format!("line {} column {}", e.line(), e.column()), strip_position(&e.to_string())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}
