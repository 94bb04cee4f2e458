//! Configured experiment runs: one pipeline per command, each writing CSV
//! and JSON artifacts, named invariant checks and a checksummed manifest.

mod artifacts;
mod config;

pub use artifacts::{fmt_f64, sha256_hex, ArtifactManifest, ArtifactSink, Cell, Check, Csv, FileEntry, Timing};
pub use config::{
    validate_config, CancellationConfig, CoeffsConfig, CoercivityConfig, ConserveConfig, DecayConfig, DispersionConfig, EvolveConfig,
    HSplitConfig, PicardConfig, RunConfig, SmoothingConfig, SpectrumConfig, TimeGrid,
};

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{coercivity_check, write_matrix, LinearizedSystem};
use crate::dynamics::{
    block_matrix, component_norms, evolve_pair_mode, expm, fit_decay, fit_exponential, h_component_split, initial_profile,
    picard_decompose, radial_grid, resonance_switch_jump, set_threads, smoothing_probe, synthesize_norms, Component, DecayFit,
    NormKind, PairModes,
};
use crate::error::{Error, Result};
use crate::fit::geomspace;
use crate::kernels::{
    conservation_report, sigma_structure_check, GaussianMixture, ModelParams, Species, SpeciesPair, SigmaTable,
};
use crate::linalg::{cmatvec, cnorm, matvec, norm, real_vec, sym_eigenvalues};
use crate::quad::QuadratureRule;
use crate::spectral::{
    cancellation_from_branches, dispersion_summary, eigen_branches, fluid_count, sorted_spectrum, spectral_gap_scan,
    DispersionBranch, SpectralGapReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Coeffs,
    Conserve,
    Nullspace,
    Coercivity,
    Spectrum,
    Dispersion,
    Cancellation,
    Gap,
    Evolve,
    HSplit,
    Decay,
    Picard,
    Smooth,
    All,
}

impl Command {
    /// Every stage of `all`, in dependency order.
    pub const STAGES: [Command; 13] = [
        Command::Coeffs,
        Command::Conserve,
        Command::Nullspace,
        Command::Coercivity,
        Command::Spectrum,
        Command::Dispersion,
        Command::Cancellation,
        Command::Gap,
        Command::Evolve,
        Command::HSplit,
        Command::Decay,
        Command::Picard,
        Command::Smooth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Conserve => "conserve",
            Command::Nullspace => "nullspace",
            Command::Coercivity => "coercivity",
            Command::Spectrum => "spectrum",
            Command::Dispersion => "dispersion",
            Command::Cancellation => "cancellation",
            Command::Gap => "gap",
            Command::Evolve => "evolve",
            Command::HSplit => "hsplit",
            Command::Decay => "decay",
            Command::Picard => "picard",
            Command::Smooth => "smooth",
            Command::All => "all",
        }
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::STAGES
            .into_iter()
            .chain([Command::All])
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown command {s:?}")))
    }
}

/// Per-command options layered over the config.
#[derive(Debug, Clone, Default)]
pub struct CommandOptions {
    pub k: Option<u32>,
    pub l: Option<u32>,
    pub component: Option<Component>,
    pub pair: Option<SpeciesPair>,
    /// Fit window for `decay` (algebraic fits), `cancellation` and `smooth`.
    pub window: Option<(f64, f64)>,
    pub threads: Option<usize>,
}

/// Parses `t1:t2`.
pub fn parse_window(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidInput(format!("window must be t1:t2 with 0 < t1 < t2, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(bad());
    }
    Ok((a, b))
}

/// Lazily assembled state shared by the stages of one run.
struct Session<'a> {
    cfg: &'a RunConfig,
    opts: &'a CommandOptions,
    params: ModelParams,
    system: Option<LinearizedSystem>,
    branches: BTreeMap<String, Vec<DispersionBranch>>,
    gaps: BTreeMap<String, SpectralGapReport>,
}

const SIGMA_PAIRS: [SpeciesPair; 4] = [SpeciesPair::AB, SpeciesPair::BA, SpeciesPair::BB, SpeciesPair::AA];
const MODE_PAIRS: [SpeciesPair; 2] = [SpeciesPair::AB, SpeciesPair::BB];

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn g_initial(system: &LinearizedSystem, eta: f64) -> Vec<c64> {
    real_vec(&system.special.e_d).into_iter().map(|x| x * initial_profile(eta)).collect()
}

#[derive(Serialize)]
struct DecayRecord {
    component: &'static str,
    norm: &'static str,
    k: u32,
    l: u32,
    #[serde(flatten)]
    fit: DecayFit,
}

impl<'a> Session<'a> {
    fn new(cfg: &'a RunConfig, opts: &'a CommandOptions) -> Result<Self> {
        Ok(Self { cfg, opts, params: cfg.params()?, system: None, branches: BTreeMap::new(), gaps: BTreeMap::new() })
    }

    fn ensure_system(&mut self) -> Result<()> {
        if self.system.is_none() {
            self.system = Some(LinearizedSystem::assemble(&self.params, self.cfg.discretization())?);
        }
        Ok(())
    }

    fn ensure_branches(&mut self, pair: SpeciesPair) -> Result<()> {
        self.ensure_system()?;
        if !self.branches.contains_key(&pair.label()) {
            let b = eigen_branches(self.system.as_ref().unwrap(), pair, &self.cfg.branch_grid())?;
            self.branches.insert(pair.label(), b);
        }
        Ok(())
    }

    fn ensure_gap(&mut self, pair: SpeciesPair) -> Result<()> {
        self.ensure_system()?;
        if !self.gaps.contains_key(&pair.label()) {
            let g = spectral_gap_scan(self.system.as_ref().unwrap(), pair, self.cfg.delta, self.cfg.eta_max)?;
            self.gaps.insert(pair.label(), g);
        }
        Ok(())
    }

    fn pairs(&self) -> Vec<SpeciesPair> {
        match self.opts.pair {
            Some(p) if MODE_PAIRS.contains(&p) => vec![p],
            _ => MODE_PAIRS.to_vec(),
        }
    }

    fn run(&mut self, stage: Command, sink: &mut ArtifactSink) -> Result<()> {
        match stage {
            Command::Coeffs => self.coeffs(sink),
            Command::Conserve => self.conserve(sink),
            Command::Nullspace => self.nullspace(sink),
            Command::Coercivity => self.coercivity(sink),
            Command::Spectrum => self.spectrum(sink),
            Command::Dispersion => self.dispersion(sink),
            Command::Cancellation => self.cancellation(sink),
            Command::Gap => self.gap(sink),
            Command::Evolve => self.evolve(sink),
            Command::HSplit => self.hsplit(sink),
            Command::Decay => self.decay(sink),
            Command::Picard => self.picard(sink),
            Command::Smooth => self.smooth(sink),
            Command::All => unreachable!("all is expanded by run_command"),
        }
    }

    fn coeffs(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        let c = &self.cfg.coeffs;
        let radii = geomspace(c.r_min, c.r_max, c.radii);
        let mut rng = rng_for(self.cfg.seed, 1);
        let mut reports = Vec::new();
        for pair in SIGMA_PAIRS {
            let table = SigmaTable::build_on(&self.params, pair, c.table_points, SigmaTable::R_MIN, SigmaTable::R_MAX)?;
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            sink.write_text(&format!("sigma_{}.csv", pair.label()), &String::from_utf8(buf).expect("ASCII table"))?;
            let positive = table.lambda1.iter().chain(&table.lambda2).all(|v| *v > 0.0);
            sink.push(Check::new(format!("coeffs.{pair}.positive"), positive, table.lambda1.iter().chain(&table.lambda2).copied().fold(f64::INFINITY, f64::min), "> 0"));
            let rep = sigma_structure_check(&self.params, pair, &radii, c.samples, &mut rng)?;
            sink.push(Check::at_most(format!("coeffs.{pair}.trace"), rep.trace_rel, 1e-6));
            sink.push(Check::at_most(format!("coeffs.{pair}.quadratic_form"), rep.quadratic_form_rel, 1e-8));
            sink.push(Check::at_most(format!("coeffs.{pair}.divergence"), rep.divergence_rel, 1e-4));
            sink.push(
                Check::at_most(format!("coeffs.{pair}.asymptotic"), (rep.asymptotic_ratio - 1.0).abs(), 1e-2)
                    .with_detail(format!("lambda1 r^-gamma / prefactor = {:.6} at r = {}", rep.asymptotic_ratio, rep.asymptotic_radius)),
            );
            reports.push(rep);
        }
        sink.write_json("coeffs.json", &reports)
    }

    fn conserve(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        let c = &self.cfg.conserve;
        let mut rng = rng_for(self.cfg.seed, 2);
        let variance = self.params.variance(Species::A).max(self.params.variance(Species::B));
        let rule = QuadratureRule::gauss_hermite(c.order, variance)?;
        let mut reports = Vec::new();
        let mut worst: f64 = 0.0;
        for _ in 0..c.trials {
            let fa = GaussianMixture::perturbed_maxwellian(&self.params, Species::A, c.bumps, &mut rng);
            let fb = GaussianMixture::perturbed_maxwellian(&self.params, Species::B, c.bumps, &mut rng);
            let rep = conservation_report(&self.params, &fa, &fb, &rule)?;
            worst = worst.max(rep.max_abs());
            reports.push(rep);
        }
        sink.push(Check::at_most("conserve.moments", worst, 1e-9).with_detail(format!("{} random density pairs", c.trials)));
        sink.write_json("conservation.json", &reports)
    }

    fn nullspace(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_system()?;
        let s = self.system.as_ref().unwrap();
        let chi_res: Vec<f64> = s.special.chi.iter().map(|c| norm(&matvec(&s.bb.l_full, c))).collect();
        let ed_res = norm(&matvec(&s.ab.l_full, &s.special.e_d));
        let cross = norm(&matvec(&s.l_ba.matrix, &s.special.e_d));
        let count = |m: &Mat<f64>| -> Result<usize> { Ok(sym_eigenvalues(m)?.iter().filter(|v| v.abs() <= 1e-8).count()) };
        let (nb, na) = (count(&s.bb.l_full)?, count(&s.ab.l_full)?);
        sink.push(Check::at_most("nullspace.BB.residual", chi_res.iter().copied().fold(0.0, f64::max), 1e-8));
        sink.push(Check::at_most("nullspace.AB.residual", ed_res, 1e-8));
        sink.push(Check::new("nullspace.BB.count", nb == 5, nb as f64, "== 5"));
        sink.push(Check::new("nullspace.AB.count", na == 1, na as f64, "== 1"));
        sink.push(Check::at_most("nullspace.cross", cross, 1e-8).with_detail("|L_BA E_D|"));
        #[derive(Serialize)]
        struct Report {
            chi_residuals: Vec<f64>,
            e_d_residual: f64,
            cross_residual: f64,
            zero_eigenvalues_bb: usize,
            zero_eigenvalues_ab: usize,
            basis_size_a: usize,
            basis_size_b: usize,
        }
        let rep = Report {
            chi_residuals: chi_res,
            e_d_residual: ed_res,
            cross_residual: cross,
            zero_eigenvalues_bb: nb,
            zero_eigenvalues_ab: na,
            basis_size_a: s.basis_a.size(),
            basis_size_b: s.basis_b.size(),
        };
        sink.write_json("nullspace.json", &rep)?;
        let dir = sink.dir.join("matrices");
        std::fs::create_dir_all(&dir)?;
        let meta = (self.params, s.disc);
        for (stem, m) in [("L_AB", &s.ab.l_full), ("L_BB", &s.bb.l_full), ("L_BA", &s.l_ba.matrix), ("T_AB", &s.ab.t_omega), ("T_BB", &s.bb.t_omega)] {
            let paths = write_matrix(&dir, stem, m, meta)?;
            sink.adopt(paths);
        }
        Ok(())
    }

    fn coercivity(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_system()?;
        let s = self.system.as_ref().unwrap();
        let mut rng = rng_for(self.cfg.seed, 3);
        let mut reports = Vec::new();
        for pair in MODE_PAIRS {
            let sp = pair.x;
            match coercivity_check(s.set(pair), s.basis(sp), s.rule(sp), self.cfg.coercivity.samples, &mut rng) {
                Ok(rep) => {
                    sink.push(Check::new(format!("coercivity.{pair}.c0"), rep.c0 > 0.0, rep.c0, "> 0"));
                    sink.push(
                        Check::at_most(format!("coercivity.{pair}.k_bound"), rep.k_excess_max, 1e-10)
                            .with_detail(format!("max <Kf,f>/|f|^2 = {:.4}", rep.k_ratio_max)),
                    );
                    reports.push(rep);
                }
                Err(Error::Coercivity { min_quotient, .. }) => {
                    sink.push(Check::new(format!("coercivity.{pair}.c0"), false, min_quotient, "> 0"));
                }
                Err(e) => return Err(e),
            }
        }
        sink.write_json("coercivity.json", &reports)
    }

    fn spectrum(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_system()?;
        let s = self.system.as_ref().unwrap();
        let mut csv = Csv::new(&["pair", "eta", "index", "re", "im"]);
        for pair in self.pairs() {
            let mut max_re = f64::NEG_INFINITY;
            for &eta in &self.cfg.spectrum.etas {
                let vals = sorted_spectrum(s, pair, eta)?;
                for (i, v) in vals.iter().enumerate() {
                    csv.row(&[Cell::S(&pair.label()), Cell::F(eta), Cell::I(i as i64), Cell::F(v.re), Cell::F(v.im)]);
                }
                max_re = max_re.max(vals[0].re);
                if eta == 0.0 {
                    let zeros = vals.iter().filter(|v| v.norm() <= 1e-8).count();
                    let nf = fluid_count(pair);
                    sink.push(Check::new(format!("spectrum.{pair}.zero_modes"), zeros == nf, zeros as f64, format!("== {nf}")));
                }
            }
            sink.push(Check::at_most(format!("spectrum.{pair}.max_re"), max_re, 1e-8));
        }
        sink.write_csv("spectrum.csv", &csv)
    }

    fn dispersion(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        let pairs = self.pairs();
        for &p in &pairs {
            self.ensure_branches(p)?;
        }
        let s = self.system.as_ref().unwrap();
        let mut csv = Csv::new(&["pair", "branch", "eta", "re", "im"]);
        let mut out = BTreeMap::new();
        for pair in pairs {
            let branches = &self.branches[&pair.label()];
            for br in branches {
                let label = br.label.to_string();
                for (eta, v) in br.etas.iter().zip(&br.eigenvalues) {
                    csv.row(&[Cell::S(&pair.label()), Cell::S(&label), Cell::F(*eta), Cell::F(v.re), Cell::F(v.im)]);
                }
            }
            let summary = dispersion_summary(s, pair, branches, self.cfg.dispersion.fit_eta_max)?;
            let sound = (5.0f64 / 3.0).sqrt() / self.params.m_b;
            for (fit, direct) in summary.fits.iter().zip(&summary.a2_direct) {
                let name = format!("dispersion.{pair}.{}", fit.label);
                match (pair == SpeciesPair::BB, fit.label.as_str()) {
                    (true, "0") => sink.push(Check::at_most(format!("{name}.a1"), (fit.a1 - sound).abs() / sound, 0.02).with_detail(format!("a1 = {:.6}", fit.a1))),
                    (true, "1") => sink.push(Check::at_most(format!("{name}.a1"), (fit.a1 + sound).abs() / sound, 0.02).with_detail(format!("a1 = {:.6}", fit.a1))),
                    (true, _) => sink.push(Check::at_most(format!("{name}.a1"), fit.a1.abs(), 1e-4)),
                    _ => {}
                }
                sink.push(Check::new(format!("{name}.a2_positive"), fit.a2 > 0.0 && *direct > 0.0, fit.a2, "> 0"));
                sink.push(
                    Check::at_most(format!("{name}.a2_direct"), (fit.a2 - direct).abs() / direct.abs(), 0.02)
                        .with_detail(format!("fit {:.6}, direct {:.6}", fit.a2, direct)),
                );
                if let Some(m) = fit.e_d1_mismatch {
                    sink.push(Check::at_most(format!("{name}.first_order"), m, 1e-2));
                }
            }
            sink.push(Check::new(format!("dispersion.{pair}.overlap"), summary.min_overlap >= crate::spectral::OVERLAP_MIN, summary.min_overlap, ">= 0.9"));
            out.insert(pair.label(), summary);
        }
        sink.write_csv("dispersion_branches.csv", &csv)?;
        sink.write_json("dispersion.json", &out)
    }

    fn cancellation(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_branches(SpeciesPair::AB)?;
        self.ensure_branches(SpeciesPair::BB)?;
        let s = self.system.as_ref().unwrap();
        let w = self.opts.window.unwrap_or((self.cfg.cancellation.window[0], self.cfg.cancellation.window[1]));
        let ed = &self.branches["AB"][0];
        let series = cancellation_from_branches(s, ed, &self.branches["BB"], w)?;
        let mut csv = Csv::new(&["j", "eta", "value"]);
        for c in &series {
            for (e, v) in c.etas.iter().zip(&c.values) {
                csv.row(&[Cell::I(c.j as i64), Cell::F(*e), Cell::F(*v)]);
            }
            let name = format!("cancellation.j{}", c.j);
            match &c.slope {
                Some(f) => sink.push(Check::at_most(name, (f.slope - c.expected_order).abs(), 0.15).with_detail(format!("slope {:.4}, order {}", f.slope, c.expected_order))),
                None => sink.push(
                    Check::new(name, c.expected_order >= 2.0, c.values.iter().copied().fold(0.0, f64::max), "slope within 0.15 of order")
                        .with_detail("pairing vanishes identically on the grid"),
                ),
            }
        }
        sink.write_csv("cancellation.csv", &csv)?;
        sink.write_json("cancellation.json", &series)
    }

    fn gap(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        let pairs = self.pairs();
        let mut out = Vec::new();
        for pair in pairs {
            self.ensure_gap(pair)?;
            let g = &self.gaps[&pair.label()];
            sink.push(Check::new(format!("gap.{pair}.tau"), g.tau > 0.0, g.tau, "> 0"));
            sink.push(
                Check::new(format!("gap.{pair}.exhaustive"), g.exhaustive && g.delta_halvings == 0, g.delta_halvings as f64, "exhaustive at configured delta")
                    .with_detail(format!("delta used {}", g.delta)),
            );
            out.push(g.clone());
        }
        sink.write_json("gap.json", &out)
    }

    fn evolve(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_system()?;
        let s = self.system.as_ref().unwrap();
        let mut times = vec![0.0];
        times.extend(self.cfg.time_grid());
        let mut check_times = vec![0.0];
        check_times.extend(self.cfg.evolve.check_times.iter().copied().filter(|t| *t > 0.0));
        let nb = s.basis_b.size();
        let h0 = vec![c64::new(0.0, 0.0); nb];
        let mut csv = Csv::new(&["component", "eta", "t", "value"]);
        let (mut growth, mut mismatch): (f64, f64) = (0.0, 0.0);
        for &eta in &self.cfg.evolve.etas {
            let g0 = g_initial(s, eta);
            let tr = evolve_pair_mode(s, eta, &g0, &h0, &times)?;
            for (c, ns) in [("g", &tr.g_norms), ("h", &tr.h_norms)] {
                for (t, v) in times.iter().zip(ns) {
                    csv.row(&[Cell::S(c), Cell::F(eta), Cell::F(*t), Cell::F(*v)]);
                }
            }
            growth = growth.max(tr.g_norms.windows(2).map(|w| (w[1] - w[0]) / tr.g_norms[0]).fold(f64::NEG_INFINITY, f64::max));
            let short = evolve_pair_mode(s, eta, &g0, &h0, &check_times)?;
            let m = block_matrix(s, eta);
            let x0: Vec<c64> = g0.iter().chain(&h0).copied().collect();
            let scale = cnorm(&x0);
            for (i, &t) in check_times.iter().enumerate().skip(1) {
                let e = expm(&Mat::from_fn(m.nrows(), m.ncols(), |a, b| m[(a, b)] * t));
                let direct = cmatvec(&e, &x0);
                let route: Vec<c64> = short.g[i].iter().chain(&short.h[i]).copied().collect();
                let d: Vec<c64> = route.iter().zip(&direct).map(|(a, b)| a - b).collect();
                mismatch = mismatch.max(cnorm(&d) / scale);
            }
        }
        sink.push(Check::at_most("evolve.g_contraction", growth.max(0.0), 1e-12));
        sink.push(Check::at_most("evolve.eigen_vs_expm", mismatch, 1e-8));
        sink.write_csv("evolve.csv", &csv)
    }

    fn hsplit(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_system()?;
        let s = self.system.as_ref().unwrap();
        let c = &self.cfg.hsplit;
        let mut csv = Csv::new(&["component", "eta", "t", "value"]);
        let mut splits = Vec::new();
        let mut jump: f64 = 0.0;
        let mut probe_times = c.times.clone();
        probe_times.extend(self.cfg.time_grid());
        for &eta in &c.etas {
            let sp = h_component_split(s, eta, self.cfg.delta, &g_initial(s, eta), &c.times, f64::INFINITY)?;
            for (label, ns) in crate::dynamics::HSplit::LABELS.iter().zip(&sp.part_norms).chain([(&"direct", &sp.direct_norms)]) {
                for (t, v) in sp.times.iter().zip(ns) {
                    csv.row(&[Cell::S(label), Cell::F(eta), Cell::F(*t), Cell::F(*v)]);
                }
            }
            let modes = PairModes::new(s, eta)?;
            let mus: Vec<c64> = modes.a.values.iter().chain(&modes.b.values).copied().collect();
            jump = jump.max(resonance_switch_jump(&mus, &probe_times));
            splits.push(sp);
        }
        let worst = splits.iter().map(|s| s.max_defect()).fold(0.0, f64::max);
        sink.push(Check::at_most("hsplit.defect", worst, c.tolerance));
        sink.push(Check::at_most("hsplit.resonance_jump", jump, 1e-6));
        sink.write_csv("hsplit.csv", &csv)?;
        sink.write_json("hsplit.json", &splits)
    }

    fn decay(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_gap(SpeciesPair::AB)?;
        self.ensure_gap(SpeciesPair::BB)?;
        let s = self.system.as_ref().unwrap();
        let dc = &self.cfg.decay;
        let grid = radial_grid(self.cfg.delta, self.cfg.eta_max, dc.long_panels, dc.short_panels, dc.points)?;
        let times = self.cfg.time_grid();
        let norms = component_norms(s, &grid, &times)?;
        let power = self.opts.window.unwrap_or((dc.power_window[0], dc.power_window[1]));
        let expo = (dc.exponential_window[0], dc.exponential_window[1]);
        let tau_ab = self.gaps["AB"].tau;
        let tau_h = tau_ab.min(self.gaps["BB"].tau);
        let components: Vec<Component> = match self.opts.component {
            Some(c) => vec![c],
            None => Component::ALL.to_vec(),
        };
        let ks: Vec<u32> = self.opts.k.map_or(vec![0, 1, 2], |k| vec![k]);
        let ls: Vec<u32> = self.opts.l.map_or(vec![0, 1], |l| vec![l]);
        let mut fits = Vec::new();
        for (kind, file, tag) in [(NormKind::LinfProxy, "decay.csv", "linf"), (NormKind::L2, "decay_l2.csv", "l2")] {
            let mut csv = Csv::new(&["component", "k", "l", "t", "value"]);
            for &c in &components {
                for &l in &ls {
                    let per: Vec<Vec<f64>> = norms.iter().map(|m| m.values[c as usize][l as usize].clone()).collect();
                    for &k in &ks {
                        let v = synthesize_norms(&grid, &per, c.is_short(), k, kind)?;
                        for (t, x) in times.iter().zip(&v) {
                            csv.row(&[Cell::S(c.label()), Cell::I(k as i64), Cell::I(l as i64), Cell::F(*t), Cell::F(*x)]);
                        }
                        let label = format!("{} k={k} l={l} {tag}", c.label());
                        let fit = if c.is_exponential() { fit_exponential(&label, &times, &v, expo)? } else { fit_decay(&label, &times, &v, power)? };
                        if kind == NormKind::LinfProxy && l == 0 {
                            decay_check(sink, c, k, &fit, if c.species() == Species::A { tau_ab } else { tau_h });
                        }
                        fits.push(DecayRecord { component: c.label(), norm: tag, k, l, fit });
                    }
                }
            }
            sink.write_csv(file, &csv)?;
        }
        sink.write_json("decay_fits.json", &fits)
    }

    fn picard(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_system()?;
        let s = self.system.as_ref().unwrap();
        let c = &self.cfg.picard;
        let mut rng = rng_for(self.cfg.seed, 4);
        let n = s.basis_a.size();
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rn = norm(&raw);
        let f0: Vec<c64> = raw.iter().map(|x| c64::new(x / rn, 0.0)).collect();
        let ks: Vec<usize> = self.opts.k.map_or((0..=c.k_max).collect(), |k| vec![k as usize]);
        let mut csv = Csv::new(&["component", "k", "eta", "t", "value"]);
        let mut out = Vec::new();
        let mut ratio: f64 = 0.0;
        for &eta in &c.etas {
            for &k in &ks {
                let d = picard_decompose(s, eta, &f0, k, &c.times, f64::INFINITY)?;
                for (j, ns) in d.component_norms.iter().enumerate() {
                    let label = format!("f{j}");
                    for (t, v) in d.times.iter().zip(ns) {
                        csv.row(&[Cell::S(&label), Cell::I(k as i64), Cell::F(eta), Cell::F(*t), Cell::F(*v)]);
                    }
                }
                for (t, v) in d.times.iter().zip(&d.remainder_norms) {
                    csv.row(&[Cell::S("R"), Cell::I(k as i64), Cell::F(eta), Cell::F(*t), Cell::F(*v)]);
                }
                sink.push(Check::at_most(format!("picard.eta={eta}.k={k}"), d.max_residual(), c.tolerance));
                ratio = ratio.max(d.bound_ratios.iter().copied().fold(0.0, f64::max));
                out.push(d);
            }
        }
        sink.push(Check::at_most("picard.duhamel_bound", ratio, 1.0 + 1e-10));
        sink.write_csv("picard.csv", &csv)?;
        sink.write_json("picard.json", &out)
    }

    fn smooth(&mut self, sink: &mut ArtifactSink) -> Result<()> {
        self.ensure_system()?;
        let s = self.system.as_ref().unwrap();
        let weight = self.cfg.weight()?;
        let w = self.opts.window.unwrap_or((self.cfg.smoothing.window[0], self.cfg.smoothing.window[1]));
        let times = self.cfg.smoothing_times();
        let base = smoothing_probe(s, &self.cfg.smoothing_etas(false), &times, weight, w)?;
        let refined = smoothing_probe(s, &self.cfg.smoothing_etas(true), &times, weight, w)?;
        let mut csv = Csv::new(&["eta", "t", "grad_norm"]);
        for (ti, t) in base.times.iter().enumerate() {
            for (ei, eta) in base.etas.iter().enumerate() {
                csv.row(&[Cell::F(*eta), Cell::F(*t), Cell::F(base.grad_norms[ti][ei])]);
            }
        }
        let mut sup = Csv::new(&["t", "sup_grad"]);
        for (t, v) in base.times.iter().zip(&base.sup_grad) {
            sup.row(&[Cell::F(*t), Cell::F(*v)]);
        }
        sink.push(
            Check::at_most("smooth.grad_exponent", (base.fit.slope + 0.5).abs(), 0.2).with_detail(format!("slope {:.4}, target -0.5", base.fit.slope)),
        );
        let change = (refined.x_surface_sup - base.x_surface_sup).abs() / base.x_surface_sup;
        sink.push(Check::new("smooth.x_surface_finite", base.x_surface_sup.is_finite(), base.x_surface_sup, "finite"));
        sink.push(Check::at_most("smooth.x_surface_stability", change, 0.05));
        #[derive(Serialize)]
        struct Report<'r> {
            base: &'r crate::dynamics::SmoothingReport,
            refined_eta_points: usize,
            refined_x_surface_sup: f64,
            relative_change: f64,
        }
        sink.write_csv("smoothing.csv", &csv)?;
        sink.write_csv("smoothing_sup.csv", &sup)?;
        sink.write_json(
            "smoothing.json",
            &Report { base: &base, refined_eta_points: refined.etas.len(), refined_x_surface_sup: refined.x_surface_sup, relative_change: change },
        )
    }
}

fn decay_check(sink: &mut ArtifactSink, c: Component, k: u32, fit: &DecayFit, tau: f64) {
    let name = format!("decay.{}.k{k}", c.label());
    let target = |half: f64, tol: f64| Check::at_most(name.clone(), (fit.slope + half).abs(), tol).with_detail(format!("slope {:.4}, target {}", fit.slope, -half));
    match c {
        Component::GFluid if k <= 2 => sink.push(target((3.0 + k as f64) / 2.0, 0.1)),
        Component::H00 if k <= 1 => sink.push(target((3.0 + k as f64) / 2.0, 0.1)),
        Component::HPerp0 if k == 0 => sink.push(target(2.0, 0.15)),
        Component::HPerpPerp | Component::GShort | Component::HShort if k == 0 => sink.push(
            Check::new(name, fit.slope <= -tau / 2.0, fit.slope, format!("<= -tau/2 = {:.4e}", -tau / 2.0)).with_detail(format!("tau {tau:.4}")),
        ),
        _ => {}
    }
}

/// Executes `command` under `config`, writing every artifact and finally
/// `manifest.json` into `config.output_dir`.
pub fn run_command(config: &RunConfig, command: Command, opts: &CommandOptions) -> Result<ArtifactManifest> {
    config.validate()?;
    if let Some(w) = opts.window {
        if !(w.0 > 0.0 && w.1 > w.0) {
            return Err(Error::Config { location: "--window".into(), message: format!("need 0 < t1 < t2, got {w:?}") });
        }
    }
    if let Some(k) = opts.threads {
        set_threads(k);
    }
    let mut sink = ArtifactSink::new(&config.output_dir)?;
    let config_text = serde_json::to_string_pretty(config)? + "\n";
    sink.write_text("config.json", &config_text)?;
    let stages: Vec<Command> = if command == Command::All { Command::STAGES.to_vec() } else { vec![command] };
    let mut session = Session::new(config, opts)?;
    let start = Instant::now();
    for stage in stages {
        let t = Instant::now();
        session.run(stage, &mut sink)?;
        sink.timings.push(Timing { stage: stage.name().into(), seconds: t.elapsed().as_secs_f64() });
    }
    sink.timings.push(Timing { stage: "total".into(), seconds: start.elapsed().as_secs_f64() });
    sink.finish(command.name(), sha256_hex(config_text.as_bytes()), config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &std::path::Path) -> RunConfig {
        RunConfig { degree: 4, output_dir: dir.to_path_buf(), ..Default::default() }
    }

    #[test]
    fn parses_commands_and_windows() {
        for c in Command::STAGES {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("bogus".parse::<Command>().is_err());
        assert_eq!(parse_window("1e2:1e4").unwrap(), (100.0, 1e4));
        assert!(parse_window("5:1").is_err());
        assert!(parse_window("x").is_err());
    }

    #[test]
    fn nullspace_run_writes_manifest_last() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_command(&small(dir.path()), Command::Nullspace, &CommandOptions::default()).unwrap();
        assert!(m.passed, "{}", m.summary_table());
        let listed: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert!(listed.contains(&"config.json") && listed.contains(&"nullspace.json") && listed.contains(&"matrices/L_BA.bin"));
        for f in &m.files {
            let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), f.sha256);
        }
        let newest = std::fs::metadata(dir.path().join("manifest.json")).unwrap().modified().unwrap();
        for f in &m.files {
            assert!(std::fs::metadata(dir.path().join(&f.path)).unwrap().modified().unwrap() <= newest);
        }
    }

    #[test]
    fn invalid_config_is_rejected_before_dispatch() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { gamma: -3.0, ..small(dir.path()) };
        assert!(matches!(run_command(&cfg, Command::Nullspace, &CommandOptions::default()), Err(Error::Config { .. })));
        assert!(!dir.path().join("manifest.json").exists());
    }
}
