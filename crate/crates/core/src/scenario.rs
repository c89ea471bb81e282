//! JSON scenarios and the artifact-producing runs behind the command line.
//!
//! A run builds every artifact in memory, writes each to a hidden temporary
//! file in the output directory and renames them into place only after all
//! writes succeeded, so a failed run leaves no partial output. A
//! `manifest.json` with the configuration hash, crate version and wall time
//! is written last. Data artifacts are byte-identical across reruns; only
//! the manifest's wall time varies.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{EigenPair, Grid, KernelShape, Periodic, ReactionModel, StableKernel, TailedField};
use crate::eigen::{check_h3, predicted_exponent, principal_eigenpair, H3Check};
use crate::error::{Error, Result};
use crate::evolution::{
    evolve_with, raised_cosine, steady_state, write_snapshot, EvolveOptions, Scheme, SteadyState, Trajectory,
};
use crate::front::{front_radius, front_series, spreading_exponent, ExponentFit};
use crate::operator::Backend;
use crate::verification::{
    check_sandwich, check_tails, empirical_eps0, envelope_for, heat_kernel_bounds, initial_bracket, lemma1_i,
    lemma1_ii, mid_gamma, EpsilonZero, HeatKernelReport, Lemma1Report, SandwichOptions, SandwichReport, TailReport,
};

/// Largest box the planner accepts, in nodes.
pub const MAX_NODES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// A number or the string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sized<T> {
    Value(T),
    Auto(AutoTag),
}

impl<T: Copy> Sized<T> {
    fn value(&self) -> Option<T> {
        match self {
            Sized::Value(v) => Some(*v),
            Sized::Auto(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub beta: Periodic,
    /// Odd angular perturbation; any nonzero tilt is rejected at build time.
    #[serde(default)]
    pub tilt: Option<Periodic>,
    /// Declared lower bound of beta, defaulting to its range.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default, rename = "B")]
    pub b_upper: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionConfig {
    Logistic,
    WeightedLogistic { omega: Periodic },
}

fn default_n_cell() -> usize {
    16
}

fn auto<T>() -> Sized<T> {
    Sized::Auto(AutoTag::Auto)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L", default = "auto")]
    pub l: Sized<f64>,
    #[serde(default = "auto")]
    pub n_box: Sized<usize>,
    #[serde(default = "default_n_cell")]
    pub n_cell: usize,
    /// Box half-width over the predicted front radius when `L` is automatic.
    #[serde(default = "default_box_factor")]
    pub box_factor: f64,
}

fn default_box_factor() -> f64 {
    4.0
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            l: auto(),
            n_box: auto(),
            n_cell: default_n_cell(),
            box_factor: default_box_factor(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_amp")]
    pub amp: f64,
}

fn default_width() -> f64 {
    2.0
}

fn default_amp() -> f64 {
    1.0
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            center: None,
            width: default_width(),
            amp: default_amp(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_snap")]
    pub snap_every: f64,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub backend: Option<Backend>,
}

fn default_snap() -> f64 {
    0.25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigConfig {
    #[serde(default)]
    pub cell_n: Option<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            cell_n: None,
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontConfig {
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Fit window; `[3T/7, T]` when absent.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default = "default_steady_cell")]
    pub steady_cell_n: usize,
}

fn default_levels() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

fn default_steady_cell() -> usize {
    64
}

impl Default for FrontConfig {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            window: None,
            steady_cell_n: default_steady_cell(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsConfig {
    #[serde(default = "one")]
    pub t: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma1Config {
    #[serde(default = "default_a_list")]
    pub a_list: Vec<f64>,
    #[serde(default = "default_chi")]
    pub chi: Periodic,
    /// Exponent of the second estimate; the middle of its window when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
}

fn default_a_list() -> Vec<f64> {
    vec![1.0, 0.5, 0.2, 0.1, 0.05]
}

fn default_chi() -> Periodic {
    Periodic::cosine(2.0, 1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichConfig {
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "one")]
    pub t0: f64,
    #[serde(default = "default_probes")]
    pub min_probes: usize,
    /// Search range of the empirical threshold.
    #[serde(default = "default_eps_range")]
    pub eps_range: (f64, f64),
}

fn default_eps() -> f64 {
    0.25
}

fn default_margin() -> f64 {
    1.25
}

fn default_probes() -> usize {
    10_000
}

fn default_eps_range() -> (f64, f64) {
    (0.01, 0.5)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatConfig {
    #[serde(rename = "L", default = "default_heat_l")]
    pub l: f64,
    #[serde(default = "default_heat_n")]
    pub n_box: usize,
    #[serde(default = "default_heat_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_heat_radii")]
    pub radii: Vec<f64>,
}

fn default_heat_l() -> f64 {
    512.0
}

fn default_heat_n() -> usize {
    16384
}

fn default_heat_times() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0, 8.0]
}

fn default_heat_radii() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub tails: Option<TailsConfig>,
    #[serde(default)]
    pub lemma1: Option<Lemma1Config>,
    #[serde(default)]
    pub sandwich: Option<SandwichConfig>,
    #[serde(default)]
    pub heatkernel: Option<HeatConfig>,
}

/// A complete scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dimension: usize,
    pub alpha: f64,
    pub kernel: KernelConfig,
    pub media: Periodic,
    pub reaction: ReactionConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub eig: EigConfig,
    #[serde(default)]
    pub front: FrontConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

/// Command-line overrides; only the time step and horizon may change.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Overrides {
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
}

/// Which checks `verify` runs; all of them when none is selected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifySelection {
    pub tails: bool,
    pub lemma1: bool,
    pub sandwich: bool,
    pub heatkernel: bool,
}

impl VerifySelection {
    fn normalized(self) -> Self {
        if self == Self::default() {
            Self {
                tails: true,
                lemma1: true,
                sandwich: true,
                heatkernel: true,
            }
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eig,
    Steady,
    Simulate,
    Front,
    Verify(VerifySelection),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Steady => "steady",
            Command::Simulate => "simulate",
            Command::Front => "front",
            Command::Verify(_) => "verify",
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{v} must be positive and finite")))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel()?;
        self.reaction_model()?;
        positive("run.T", self.run.t_end)?;
        positive("run.dt", self.run.dt)?;
        positive("run.snap_every", self.run.snap_every)?;
        positive("initial.width", self.initial.width)?;
        positive("grid.box_factor", self.grid.box_factor)?;
        if let Some(c) = &self.initial.center {
            if c.len() != self.dimension {
                return Err(Error::invalid(
                    "initial.center",
                    format!("needs {} coordinates", self.dimension),
                ));
            }
        }
        if let Some(l) = self.grid.l.value() {
            positive("grid.L", l)?;
        }
        if self.front.levels.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return Err(Error::invalid("front.levels", "levels must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<StableKernel> {
        let (lo, hi) = self.kernel.beta.range();
        let b = self.kernel.b.unwrap_or(lo);
        let b_upper = self.kernel.b_upper.unwrap_or(hi);
        if lo < b || hi > b_upper {
            return Err(Error::invalid(
                "kernel.beta",
                format!("range [{lo}, {hi}] leaves the declared bounds [{b}, {b_upper}]"),
            ));
        }
        let shape = match &self.kernel.tilt {
            None => KernelShape::Isotropic {
                base: self.kernel.beta.clone(),
            },
            Some(t) if t.is_constant() == Some(0.0) => KernelShape::Isotropic {
                base: self.kernel.beta.clone(),
            },
            Some(_) => {
                return Err(Error::invalid(
                    "kernel.tilt",
                    "β(x,θ) must equal β(x,−θ); an odd tilt breaks the symmetry",
                ))
            }
        };
        StableKernel::new(self.alpha, self.dimension, shape, b, b_upper)
    }

    pub fn reaction_model(&self) -> Result<ReactionModel> {
        match &self.reaction {
            ReactionConfig::Logistic => Ok(ReactionModel::logistic(self.media.clone())),
            ReactionConfig::WeightedLogistic { omega } => {
                ReactionModel::weighted_logistic(self.media.clone(), omega.clone())
            }
        }
    }

    fn eig_cells(&self) -> usize {
        self.eig.cell_n.unwrap_or(if self.dimension == 1 { 512 } else { 32 })
    }

    fn with(&self, o: Overrides) -> Result<Scenario> {
        let mut s = self.clone();
        if let Some(dt) = o.dt {
            positive("--dt", dt)?;
            s.run.dt = dt;
        }
        if let Some(t) = o.t_end {
            positive("--T", t)?;
            s.run.t_end = t;
        }
        Ok(s)
    }

    /// The box: `L` from `box_factor * exp(rate * T)` when automatic, and
    /// `n_box` as the smallest power of two with spacing at most `1 / n_cell`.
    pub fn grid(&self, lambda1: f64) -> Result<Grid> {
        let n_cell = self.grid.n_cell;
        let l = match self.grid.l.value() {
            Some(l) => l,
            None => {
                let rate = predicted_exponent_or_invalid(lambda1, self.dimension, self.alpha)?;
                let l = self.grid.box_factor * (rate * self.run.t_end).exp();
                let need = (2.0 * l.max(4.0) * n_cell as f64).ceil();
                if need.powi(self.dimension as i32) > MAX_NODES as f64 || !need.is_finite() {
                    return Err(Error::invalid(
                        "grid.L",
                        format!("automatic box half-width {l:.3e} exceeds {MAX_NODES} nodes; set grid.L or shorten T"),
                    ));
                }
                return Grid::plan(self.dimension, n_cell, l);
            }
        };
        let n_box = match self.grid.n_box.value() {
            Some(n) => n,
            None => ((2.0 * l * n_cell as f64).ceil() as usize).next_power_of_two(),
        };
        if n_box.checked_pow(self.dimension as u32).is_none_or(|n| n > MAX_NODES) {
            return Err(Error::invalid(
                "grid.n_box",
                format!("{n_box}^{} exceeds {MAX_NODES} nodes", self.dimension),
            ));
        }
        Grid::new(self.dimension, l, n_box, n_cell)
    }

    fn initial(&self, grid: Grid) -> Result<TailedField> {
        let center = self.initial.center.clone().unwrap_or_else(|| vec![0.0; self.dimension]);
        raised_cosine(grid, self.alpha, &center, self.initial.width, self.initial.amp)
    }

    fn options(&self, k: &StableKernel) -> EvolveOptions {
        let mut o = EvolveOptions::default_for(k, self.run.snap_every);
        if let Some(s) = self.run.scheme {
            o.scheme = s;
        }
        if let Some(b) = self.run.backend {
            o.backend = b;
        }
        o
    }
}

fn predicted_exponent_or_invalid(lambda1: f64, d: usize, alpha: f64) -> Result<f64> {
    if lambda1 >= 0.0 {
        return Err(Error::invalid(
            "grid.L",
            format!("cannot size the box automatically without invasion (λ1 = {lambda1} ≥ 0); set grid.L"),
        ));
    }
    Ok(-lambda1 / (d as f64 + 2.0 * alpha))
}

/// Files produced by a run, held in memory until committed.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }

    /// Writes every file to a temporary name, then renames them all.
    pub fn commit(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let tmp = |name: &str| dir.join(format!(".{name}.tmp"));
        let written: Result<()> = self.files.iter().try_for_each(|(name, bytes)| {
            fs::write(tmp(name), bytes)?;
            Ok(())
        });
        if let Err(e) = written {
            for (name, _) in &self.files {
                let _ = fs::remove_file(tmp(name));
            }
            return Err(e);
        }
        for (name, _) in &self.files {
            fs::rename(tmp(name), dir.join(name))?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    version: String,
    config_sha256: String,
    overrides: Overrides,
    threads: usize,
    wall_time_s: f64,
    artifacts: Vec<ManifestEntry>,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What a run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub artifacts: Vec<String>,
    /// One line per result, for the terminal.
    pub lines: Vec<String>,
    /// False when a verification verdict failed.
    pub pass: bool,
}

#[derive(Debug, Serialize)]
struct EigArtifact {
    lambda1: f64,
    residual: f64,
    cell_n: usize,
    phi_min: f64,
    phi_max: f64,
    h3: H3Check,
    predicted_exponent: Option<f64>,
    phi1: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct SteadyArtifact {
    lambda1: f64,
    residual: f64,
    iterations: usize,
    cell_n: usize,
    min: f64,
    max: f64,
    n_plus: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct TrajectoryLine {
    t: f64,
    front_radius: Option<f64>,
    sup: f64,
    min: f64,
}

#[derive(Debug, Serialize)]
struct SimulateArtifact {
    d: usize,
    #[serde(rename = "L")]
    l: f64,
    n_box: usize,
    n_cell: usize,
    scheme: Scheme,
    backend: Backend,
    dt: f64,
    steps: usize,
    snapshots: usize,
    clip_events: usize,
    upper_bound: f64,
    bound_excess: f64,
}

#[derive(Debug, Serialize)]
struct LevelFit {
    level: f64,
    fit: ExponentFit,
}

#[derive(Debug, Serialize)]
struct FrontArtifact {
    lambda1: f64,
    predicted_exponent: f64,
    window: (f64, f64),
    fits: Vec<LevelFit>,
}

#[derive(Debug, Default, Serialize)]
struct VerifyArtifact {
    #[serde(skip_serializing_if = "Option::is_none")]
    tails: Option<TailReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemma1_i: Option<Lemma1Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemma1_ii: Option<Lemma1Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sandwich: Option<SandwichReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps0: Option<EpsilonZero>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heatkernel: Option<HeatKernelReport>,
    pass: bool,
}

struct Context {
    scenario: Scenario,
    kernel: StableKernel,
    reaction: ReactionModel,
}

impl Context {
    fn eigenpair(&self) -> Result<EigenPair> {
        principal_eigenpair(
            &self.kernel,
            &self.reaction.media(),
            self.scenario.eig_cells(),
            self.scenario.eig.tol,
        )
    }

    fn steady(&self) -> Result<SteadyState> {
        steady_state(&self.kernel, &self.reaction, self.scenario.front.steady_cell_n, 1e-10)
    }

    fn simulate(&self, lambda1: f64, t_end: f64) -> Result<Trajectory> {
        let grid = self.scenario.grid(lambda1)?;
        let n0 = self.scenario.initial(grid)?;
        let opts = self.scenario.options(&self.kernel);
        evolve_with(&self.kernel, &self.reaction, &n0, t_end, self.scenario.run.dt, &opts)
    }
}

fn eig_artifact(ctx: &Context, pair: &EigenPair) -> EigArtifact {
    EigArtifact {
        lambda1: pair.lambda1,
        residual: pair.residual,
        cell_n: pair.phi1.n,
        phi_min: pair.phi_min(),
        phi_max: pair.phi_max(),
        h3: check_h3(pair),
        predicted_exponent: predicted_exponent(pair, ctx.scenario.dimension, ctx.scenario.alpha).ok(),
        phi1: pair.phi1.values.clone(),
    }
}

fn run_eig(ctx: &Context, out: &mut Artifacts, lines: &mut Vec<String>) -> Result<()> {
    let pair = ctx.eigenpair()?;
    lines.push(format!(
        "lambda1 = {:.12} (residual {:.2e})",
        pair.lambda1, pair.residual
    ));
    out.add_json("eig.json", &eig_artifact(ctx, &pair))
}

fn run_steady(ctx: &Context, out: &mut Artifacts, lines: &mut Vec<String>) -> Result<()> {
    let s = ctx.steady()?;
    lines.push(format!(
        "n_plus in [{:.10}, {:.10}] (residual {:.2e}, {} iterations)",
        s.n_plus.min(),
        s.n_plus.max(),
        s.residual,
        s.iterations
    ));
    out.add_json(
        "steady.json",
        &SteadyArtifact {
            lambda1: s.lambda1,
            residual: s.residual,
            iterations: s.iterations,
            cell_n: s.n_plus.n,
            min: s.n_plus.min(),
            max: s.n_plus.max(),
            n_plus: s.n_plus.values.clone(),
        },
    )
}

fn trajectory_artifacts(traj: &Trajectory, plus: Option<&SteadyState>, out: &mut Artifacts) -> Result<()> {
    let mut ndjson = Vec::new();
    let mut bin = Vec::new();
    for s in &traj.snapshots {
        let front = match plus {
            Some(p) => Some(front_radius(&s.field, &p.n_plus, 0.5)?),
            None => None,
        };
        let line = TrajectoryLine {
            t: s.t,
            front_radius: front,
            sup: s.field.sup(),
            min: s.field.min(),
        };
        ndjson.extend(serde_json::to_vec(&line)?);
        ndjson.push(b'\n');
        bin.extend_from_slice(&s.t.to_le_bytes());
        write_snapshot(&s.field, &mut bin)?;
    }
    let g = traj.grid();
    out.add("trajectory.ndjson", ndjson);
    out.add("snapshots.bin", bin);
    out.add_json(
        "simulate.json",
        &SimulateArtifact {
            d: g.d,
            l: g.l,
            n_box: g.n_box,
            n_cell: g.n_cell,
            scheme: traj.scheme,
            backend: traj.backend,
            dt: traj.dt,
            steps: traj.steps,
            snapshots: traj.snapshots.len(),
            clip_events: traj.clips.len(),
            upper_bound: traj.upper_bound,
            bound_excess: traj.bound_excess,
        },
    )
}

fn run_simulate(ctx: &Context, out: &mut Artifacts, lines: &mut Vec<String>) -> Result<()> {
    let pair = ctx.eigenpair()?;
    let plus = if pair.lambda1 < 0.0 { Some(ctx.steady()?) } else { None };
    let traj = ctx.simulate(pair.lambda1, ctx.scenario.run.t_end)?;
    let g = traj.grid();
    lines.push(format!(
        "simulated to T = {} on L = {}, n_box = {} ({} steps, {} clip events)",
        traj.t_end(),
        g.l,
        g.n_box,
        traj.steps,
        traj.clips.len()
    ));
    trajectory_artifacts(&traj, plus.as_ref(), out)
}

fn run_front(ctx: &Context, out: &mut Artifacts, lines: &mut Vec<String>) -> Result<()> {
    let pair = ctx.eigenpair()?;
    let rate = predicted_exponent(&pair, ctx.scenario.dimension, ctx.scenario.alpha)?;
    let plus = ctx.steady()?;
    let t_end = ctx.scenario.run.t_end;
    let traj = ctx.simulate(pair.lambda1, t_end)?;
    let levels = &ctx.scenario.front.levels;
    let series = front_series(&traj, &plus.n_plus, levels)?;
    let window = ctx.scenario.front.window.unwrap_or((3.0 * t_end / 7.0, t_end));

    let mut csv = String::from("t");
    for c in levels {
        csv.push_str(&format!(",radius_c{}", level_tag(*c)));
    }
    csv.push('\n');
    for (t, radii) in &series {
        csv.push_str(&t.to_string());
        for r in radii {
            csv.push(',');
            csv.push_str(&r.to_string());
        }
        csv.push('\n');
    }

    let mut fit_csv = String::from("level,slope,stderr,r2,points,predicted\n");
    let mut fits = Vec::new();
    for (j, c) in levels.iter().enumerate() {
        let s: Vec<(f64, f64)> = series.iter().map(|(t, r)| (*t, r[j])).collect();
        let fit = spreading_exponent(&s, window)?;
        fit_csv.push_str(&format!(
            "{c},{},{},{},{},{rate}\n",
            fit.slope, fit.stderr, fit.r2, fit.points
        ));
        lines.push(format!(
            "level {c}: slope {:.4} ± {:.4} (predicted {rate:.4})",
            fit.slope, fit.stderr
        ));
        fits.push(LevelFit { level: *c, fit });
    }
    out.add("front.csv", csv.into_bytes());
    out.add("front_fit.csv", fit_csv.into_bytes());
    out.add_json(
        "front.json",
        &FrontArtifact {
            lambda1: pair.lambda1,
            predicted_exponent: rate,
            window,
            fits,
        },
    )
}

/// `0.25 -> "025"`, `0.5 -> "05"`.
fn level_tag(c: f64) -> String {
    c.to_string().replace('.', "")
}

fn verdict(name: &str, pass: bool) -> String {
    format!("{name}: {}", if pass { "PASS" } else { "FAIL" })
}

fn run_verify(ctx: &Context, sel: VerifySelection, out: &mut Artifacts, lines: &mut Vec<String>) -> Result<bool> {
    let sel = sel.normalized();
    let v = &ctx.scenario.verify;
    let (d, alpha) = (ctx.scenario.dimension, ctx.scenario.alpha);
    let mut rep = VerifyArtifact::default();

    let tails_cfg = v.tails.clone().unwrap_or(TailsConfig { t: 1.0 });
    let sand_cfg = v.sandwich.clone().unwrap_or(SandwichConfig {
        epsilon: default_eps(),
        margin: default_margin(),
        t0: 1.0,
        min_probes: default_probes(),
        eps_range: default_eps_range(),
    });
    if sel.tails || sel.sandwich {
        let pair = ctx.eigenpair()?;
        let horizon = if sel.sandwich {
            ctx.scenario.run.t_end
        } else {
            tails_cfg.t
        };
        let traj = ctx.simulate(pair.lambda1, horizon.max(tails_cfg.t))?;
        if sel.tails {
            let snap = traj.at(tails_cfg.t);
            if (snap.t - tails_cfg.t).abs() > 1e-9 {
                return Err(Error::invalid(
                    "verify.tails.t",
                    format!("{} is not a snapshot time (nearest {})", tails_cfg.t, snap.t),
                ));
            }
            let r = check_tails(&snap.field, d, alpha)?;
            lines.push(format!(
                "{} (slope {:.4}, expected {})",
                verdict("tails", r.pass),
                r.slope,
                r.expected
            ));
            rep.tails = Some(r);
        }
        if sel.sandwich {
            let snap = traj.at(sand_cfg.t0);
            let bracket = initial_bracket(&snap.field);
            let env = envelope_for(
                &pair,
                alpha,
                ctx.reaction.c_lower,
                ctx.reaction.c_upper,
                bracket,
                sand_cfg.margin,
                sand_cfg.epsilon,
            )?;
            let opts = SandwichOptions {
                t0: sand_cfg.t0,
                min_probes: sand_cfg.min_probes,
                ..SandwichOptions::default()
            };
            let r = check_sandwich(&traj, &env, &opts)?;
            lines.push(format!(
                "{} ({} probes, {} lower / {} upper violations)",
                verdict("sandwich", r.pass),
                r.probes,
                r.lower_violations,
                r.upper_violations
            ));
            let e0 = empirical_eps0(&traj, &env, &opts, sand_cfg.eps_range)?;
            lines.push(format!("empirical eps_0: {:?} (saturated {})", e0.eps0, e0.saturated));
            rep.sandwich = Some(r);
            rep.eps0 = Some(e0);
        }
    }
    if sel.lemma1 {
        let cfg = v.lemma1.clone().unwrap_or(Lemma1Config {
            a_list: default_a_list(),
            chi: default_chi(),
            gamma: None,
        });
        let r1 = lemma1_i(&ctx.kernel, &cfg.a_list)?;
        lines.push(format!(
            "{} (slope {:?}, spread {:.3})",
            verdict("lemma1 (i)", r1.pass),
            r1.slope,
            r1.scaled_spread
        ));
        let gamma = cfg.gamma.unwrap_or_else(|| mid_gamma(alpha));
        let r2 = lemma1_ii(&ctx.kernel, &cfg.chi, gamma, &cfg.a_list)?;
        lines.push(format!(
            "{} (slope {:?}, spread {:.3})",
            verdict("lemma1 (ii)", r2.pass),
            r2.slope,
            r2.scaled_spread
        ));
        rep.lemma1_i = Some(r1);
        rep.lemma1_ii = Some(r2);
    }
    if sel.heatkernel {
        let cfg = v.heatkernel.clone().unwrap_or(HeatConfig {
            l: default_heat_l(),
            n_box: default_heat_n(),
            times: default_heat_times(),
            radii: default_heat_radii(),
        });
        let grid = Grid::new(d, cfg.l, cfg.n_box, ctx.scenario.grid.n_cell)?;
        let r = heat_kernel_bounds(&ctx.kernel, grid, &cfg.times, &cfg.radii)?;
        lines.push(format!(
            "{} (C = {:.4}, sup slope {:.4})",
            verdict("heat kernel", r.pass),
            r.c_hat,
            r.sup_slope
        ));
        rep.heatkernel = Some(r);
    }
    rep.pass = rep.tails.as_ref().is_none_or(|r| r.pass)
        && rep.lemma1_i.as_ref().is_none_or(|r| r.pass)
        && rep.lemma1_ii.as_ref().is_none_or(|r| r.pass)
        && rep.sandwich.as_ref().is_none_or(|r| r.pass)
        && rep.heatkernel.as_ref().is_none_or(|r| r.pass);
    out.add_json("verify.json", &rep)?;
    Ok(rep.pass)
}

/// Loads the scenario at `config`, runs `command` and commits its artifacts
/// and manifest to `out_dir`.
pub fn run_scenario(config: &Path, command: Command, out_dir: &Path, overrides: Overrides) -> Result<RunOutcome> {
    let start = Instant::now();
    let text =
        fs::read(config).map_err(|e| Error::invalid("config", format!("cannot read {}: {e}", config.display())))?;
    let scenario =
        Scenario::from_json(std::str::from_utf8(&text).map_err(|_| Error::invalid("config", "file is not UTF-8"))?)?
            .with(overrides)?;
    let ctx = Context {
        kernel: scenario.kernel()?,
        reaction: scenario.reaction_model()?,
        scenario,
    };
    let mut out = Artifacts::default();
    let mut lines = Vec::new();
    let pass = match command {
        Command::Eig => run_eig(&ctx, &mut out, &mut lines).map(|_| true),
        Command::Steady => run_steady(&ctx, &mut out, &mut lines).map(|_| true),
        Command::Simulate => run_simulate(&ctx, &mut out, &mut lines).map(|_| true),
        Command::Front => run_front(&ctx, &mut out, &mut lines).map(|_| true),
        Command::Verify(sel) => run_verify(&ctx, sel, &mut out, &mut lines),
    }?;
    out.commit(out_dir)?;
    let manifest = Manifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256(&text),
        overrides,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: out
            .files
            .iter()
            .map(|(name, bytes)| ManifestEntry {
                name: name.clone(),
                bytes: bytes.len(),
                sha256: sha256(bytes),
            })
            .collect(),
    };
    let mut m = Artifacts::default();
    m.add_json("manifest.json", &manifest)?;
    m.commit(out_dir)?;
    let mut artifacts = out.names();
    artifacts.push("manifest.json".into());
    Ok(RunOutcome { artifacts, lines, pass })
}
