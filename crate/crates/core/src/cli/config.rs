//! Scenario configuration: TOML sections read into a validated struct.
//!
//! Parsing collects every problem (unknown keys, missing sections, type
//! mismatches, physical constraints) before reporting, so one run shows the
//! whole list.

use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use crate::analysis::{PassageSense, Region};
use crate::kinematics::BoundaryPolicy;
use crate::state::{GridSpec, PhysicalParams, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CoherentOscillator,
    StationaryGround,
    BarrierTunneling,
    CustomPotential,
}

impl ScenarioKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "coherent_oscillator" => ScenarioKind::CoherentOscillator,
            "stationary_ground" => ScenarioKind::StationaryGround,
            "barrier_tunneling" => ScenarioKind::BarrierTunneling,
            "custom_potential" => ScenarioKind::CustomPotential,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Trajectories,
    Density,
    Backward,
    Autocorrelation,
    Psd,
    Fpt,
    Action,
    Energy,
    Newton,
    Madelung,
    Saddle,
    Solution,
}

impl AnalysisKind {
    pub const ALL: [(&'static str, AnalysisKind); 12] = [
        ("trajectories", AnalysisKind::Trajectories),
        ("density", AnalysisKind::Density),
        ("backward", AnalysisKind::Backward),
        ("autocorrelation", AnalysisKind::Autocorrelation),
        ("psd", AnalysisKind::Psd),
        ("fpt", AnalysisKind::Fpt),
        ("action", AnalysisKind::Action),
        ("energy", AnalysisKind::Energy),
        ("newton", AnalysisKind::Newton),
        ("madelung", AnalysisKind::Madelung),
        ("saddle", AnalysisKind::Saddle),
        ("solution", AnalysisKind::Solution),
    ];

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|(n, _)| *n == s).map(|(_, k)| *k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    Analytic,
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdeSettings {
    pub dt_sde: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub t_end: f64,
    pub record_every: usize,
    pub boundary: BoundaryPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketSettings {
    pub x0: f64,
    pub k0: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub e_lo: f64,
    pub e_hi: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSettings {
    /// Paths written to the trajectory CSV (the binary table holds all of them).
    pub sample_paths: usize,
    pub density_times: Vec<f64>,
    pub density_bins: usize,
    pub density_range: Option<(f64, f64)>,
    pub max_lag: usize,
    pub segment_length: usize,
    pub overlap: Option<usize>,
    pub psd_fit_omega_max: f64,
    pub fpt_region: Option<Region>,
    pub fpt_sense: PassageSense,
    pub newton_time: Option<f64>,
    pub newton_delta_t: Option<f64>,
    pub newton_bin_width: f64,
    pub newton_range: (f64, f64),
    pub probe_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateSettings {
    pub ks_budget: f64,
    pub duality_budget: f64,
    pub parseval_tolerance: f64,
    pub newton_sigmas: f64,
    pub energy_sigmas: f64,
    pub residual_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub kind: ScenarioKind,
    pub params: PhysicalParams,
    pub omega: f64,
    pub n_mean: Vec<f64>,
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub sde: SdeSettings,
    pub fields: FieldSource,
    pub save_every: usize,
    pub packet: Option<PacketSettings>,
    pub solver: SolverSettings,
    pub analyses: Vec<AnalysisKind>,
    pub analysis: AnalysisSettings,
    pub gates: GateSettings,
    pub output_dir: Option<PathBuf>,
}

/// Accumulates errors while reading one table; records which keys were consumed.
struct Section<'a> {
    name: String,
    table: Option<&'a Table>,
    used: Vec<&'static str>,
}

struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn section<'a>(&mut self, root: &'a Table, name: &str, required: bool) -> Section<'a> {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(format!("[{name}] must be a table"));
                None
            }
            None => {
                if required {
                    self.errors.push(format!("missing section [{name}]"));
                }
                None
            }
        };
        Section {
            name: name.to_string(),
            table,
            used: Vec::new(),
        }
    }

    fn finish(&mut self, s: Section) {
        if let Some(t) = s.table {
            for key in t.keys() {
                if !s.used.contains(&key.as_str()) {
                    self.errors.push(format!("unknown key \"{key}\" in [{}]", s.name));
                }
            }
        }
    }

    fn raw<'a>(&mut self, s: &mut Section<'a>, key: &'static str) -> Option<&'a Value> {
        s.used.push(key);
        s.table.and_then(|t| t.get(key))
    }

    fn f64_opt(&mut self, s: &mut Section, key: &'static str) -> Option<f64> {
        match self.raw(s, key) {
            None => None,
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(v) => {
                self.errors.push(format!("{}.{key} must be a number, got {}", s.name, v.type_str()));
                None
            }
        }
    }

    fn f64_or(&mut self, s: &mut Section, key: &'static str, default: f64) -> f64 {
        self.f64_opt(s, key).unwrap_or(default)
    }

    fn f64_req(&mut self, s: &mut Section, key: &'static str) -> f64 {
        let present = s.table.map_or(false, |t| t.contains_key(key));
        match self.f64_opt(s, key) {
            Some(v) => v,
            None => {
                if !present && s.table.is_some() {
                    self.errors.push(format!("missing key {}.{key}", s.name));
                }
                f64::NAN
            }
        }
    }

    fn int_opt(&mut self, s: &mut Section, key: &'static str) -> Option<i64> {
        match self.raw(s, key) {
            None => None,
            Some(Value::Integer(i)) => Some(*i),
            Some(v) => {
                self.errors.push(format!("{}.{key} must be an integer, got {}", s.name, v.type_str()));
                None
            }
        }
    }

    fn usize_or(&mut self, s: &mut Section, key: &'static str, default: usize) -> usize {
        match self.int_opt(s, key) {
            Some(i) if i >= 0 => i as usize,
            Some(i) => {
                self.errors.push(format!("{}.{key} must be ≥ 0, got {i}", s.name));
                default
            }
            None => default,
        }
    }

    fn str_opt<'a>(&mut self, s: &mut Section<'a>, key: &'static str) -> Option<&'a str> {
        match self.raw(s, key) {
            None => None,
            Some(Value::String(v)) => Some(v.as_str()),
            Some(v) => {
                self.errors.push(format!("{}.{key} must be a string, got {}", s.name, v.type_str()));
                None
            }
        }
    }

    fn f64_list(&mut self, s: &mut Section, key: &'static str) -> Option<Vec<f64>> {
        match self.raw(s, key) {
            None => None,
            Some(Value::Array(a)) => {
                let mut out = Vec::with_capacity(a.len());
                for v in a {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.errors.push(format!(
                                "{}.{key} entries must be numbers, got {}",
                                s.name,
                                other.type_str()
                            ));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(Value::Float(f)) => Some(vec![*f]),
            Some(Value::Integer(i)) => Some(vec![*i as f64]),
            Some(v) => {
                self.errors.push(format!("{}.{key} must be a number or array, got {}", s.name, v.type_str()));
                None
            }
        }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.errors.push(msg.into());
        }
    }
}

/// Root-level keys allowed besides the sections.
const ROOT_KEYS: [&str; 4] = ["id", "scenario", "analyses", "output_dir"];
const SECTIONS: [&str; 9] = [
    "physics", "potential", "grid", "sde", "fields", "packet", "solver", "analysis", "gates",
];

fn parse_potential(r: &mut Reader, root: &Table, mass: f64, omega: f64, required: bool) -> Option<PotentialSpec> {
    let mut s = r.section(root, "potential", required);
    s.table?;
    let kind = r.str_opt(&mut s, "kind");
    let spec = match kind {
        Some("harmonic") => {
            let w = r.f64_or(&mut s, "omega", omega);
            Some(PotentialSpec::harmonic(mass, w))
        }
        Some("quartic") => {
            let c = r.f64_req(&mut s, "c");
            Some(PotentialSpec::quartic(c))
        }
        Some("double_well") => {
            let a = r.f64_req(&mut s, "a");
            let b = r.f64_req(&mut s, "b");
            Some(PotentialSpec::DoubleWell { a, b })
        }
        Some("barrier") => {
            let height = r.f64_req(&mut s, "height");
            let width = r.f64_req(&mut s, "width");
            let center = r.f64_or(&mut s, "center", 0.0);
            Some(PotentialSpec::Barrier { height, width, center })
        }
        Some("free") => Some(PotentialSpec::Free),
        Some("polynomial") => {
            let coeffs = r.f64_list(&mut s, "coeffs");
            if coeffs.is_none() {
                r.errors.push("missing key potential.coeffs".into());
            }
            coeffs.map(|coeffs| PotentialSpec::Polynomial { coeffs })
        }
        Some(other) => {
            r.errors.push(format!("unknown potential kind \"{other}\""));
            None
        }
        None => {
            r.errors.push("missing key potential.kind".into());
            None
        }
    };
    r.finish(s);
    if let Some(p) = &spec {
        if let Err(e) = p.validate() {
            r.errors.push(e.to_string());
        }
    }
    spec
}

fn parse_region(r: &mut Reader, v: &Value) -> Option<Region> {
    let Value::Table(t) = v else {
        r.errors.push("analysis.fpt_region must be a table".into());
        return None;
    };
    let num = |r: &mut Reader, k: &str| match t.get(k) {
        Some(Value::Float(f)) => Some(*f),
        Some(Value::Integer(i)) => Some(*i as f64),
        _ => {
            r.errors.push(format!("analysis.fpt_region.{k} must be a number"));
            None
        }
    };
    let kind = t.get("kind").and_then(|k| k.as_str());
    let (region, keys): (Option<Region>, &[&str]) = match kind {
        Some("interval") => {
            let lo = num(r, "lo");
            let hi = num(r, "hi");
            let reg = lo.zip(hi).map(|(lo, hi)| Region::Interval { lo, hi });
            if let Some(Region::Interval { lo, hi }) = reg {
                r.check(lo < hi, "analysis.fpt_region needs lo < hi");
            }
            (reg, &["kind", "lo", "hi"])
        }
        Some("above") => (num(r, "threshold").map(|threshold| Region::Above { threshold }), &["kind", "threshold"]),
        Some("below") => (num(r, "threshold").map(|threshold| Region::Below { threshold }), &["kind", "threshold"]),
        _ => {
            r.errors.push("analysis.fpt_region.kind must be interval, above or below".into());
            return None;
        }
    };
    for k in t.keys() {
        if !keys.contains(&k.as_str()) {
            r.errors.push(format!("unknown key \"{k}\" in analysis.fpt_region"));
        }
    }
    region
}

/// Parses and validates a scenario; on failure returns every problem found.
pub fn parse_config(text: &str) -> std::result::Result<ScenarioConfig, Vec<String>> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| vec![format!("syntax: {}", e.message())])?;
    let mut r = Reader { errors: Vec::new() };

    for key in root.keys() {
        if !ROOT_KEYS.contains(&key.as_str()) && !SECTIONS.contains(&key.as_str()) {
            r.errors.push(format!("unknown key \"{key}\""));
        }
    }
    let id = match root.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            r.errors.push("id must be a string".into());
            String::new()
        }
        None => "scenario".into(),
    };
    r.check(
        id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
        format!("id \"{id}\" may only contain letters, digits, '_' and '-'"),
    );
    let kind = match root.get("scenario") {
        Some(Value::String(s)) => ScenarioKind::parse(s).or_else(|| {
            r.errors.push(format!(
                "unknown scenario \"{s}\" (expected coherent_oscillator, stationary_ground, barrier_tunneling, custom_potential)"
            ));
            None
        }),
        Some(_) => {
            r.errors.push("scenario must be a string".into());
            None
        }
        None => {
            r.errors.push("missing key scenario".into());
            None
        }
    };
    let mut analyses = Vec::new();
    match root.get("analyses") {
        None => {}
        Some(Value::Array(a)) => {
            for v in a {
                match v.as_str().and_then(AnalysisKind::parse) {
                    Some(k) if !analyses.contains(&k) => analyses.push(k),
                    Some(_) => {}
                    None => r.errors.push(format!("unknown analysis {v}")),
                }
            }
        }
        Some(_) => r.errors.push("analyses must be an array of names".into()),
    }
    let output_dir = match root.get("output_dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => {
            r.errors.push("output_dir must be a string".into());
            None
        }
    };

    // [physics]
    let mut s = r.section(&root, "physics", false);
    let hbar = r.f64_or(&mut s, "hbar", 1.0);
    let mass = r.f64_or(&mut s, "mass", 1.0);
    let omega = r.f64_or(&mut s, "omega", 1.0);
    let n_mean = r.f64_list(&mut s, "n_mean").unwrap_or_else(|| vec![0.0]);
    r.finish(s);
    r.check(hbar > 0.0 && hbar.is_finite(), "hbar must be > 0");
    r.check(mass > 0.0 && mass.is_finite(), "mass must be > 0");
    r.check(omega > 0.0 && omega.is_finite(), "omega must be > 0");
    r.check(!n_mean.is_empty(), "n_mean must not be empty");
    r.check(n_mean.iter().all(|n| *n >= 0.0 && n.is_finite()), "n_mean must be ≥ 0");

    // [potential]
    let needs_potential = matches!(
        kind,
        Some(ScenarioKind::BarrierTunneling) | Some(ScenarioKind::CustomPotential)
    );
    let potential = parse_potential(&mut r, &root, mass, omega, needs_potential);
    let potential = match (kind, potential) {
        (Some(ScenarioKind::CoherentOscillator), Some(p)) => {
            r.check(
                matches!(p, PotentialSpec::Harmonic { .. }),
                "coherent_oscillator requires the harmonic potential",
            );
            p
        }
        (_, Some(p)) => p,
        (_, None) => PotentialSpec::harmonic(mass, omega),
    };

    // [grid]
    let mut s = r.section(&root, "grid", true);
    let x_min = r.f64_req(&mut s, "x_min");
    let x_max = r.f64_req(&mut s, "x_max");
    let n_points = r.usize_or(&mut s, "n_points", 0);
    let dt_pde = r.f64_req(&mut s, "dt_pde");
    let grid_present = s.table.is_some();
    r.finish(s);
    let grid = if grid_present {
        match GridSpec::new(x_min, x_max, n_points, dt_pde) {
            Ok(g) => Some(g),
            Err(e) => {
                r.errors.push(format!("grid: {e}"));
                None
            }
        }
    } else {
        None
    };

    // [sde]
    let mut s = r.section(&root, "sde", true);
    let dt_sde = r.f64_req(&mut s, "dt_sde");
    let n_paths = r.usize_or(&mut s, "n_paths", 0);
    let seed = match r.int_opt(&mut s, "seed") {
        Some(v) if v >= 0 => v as u64,
        Some(v) => {
            r.errors.push(format!("sde.seed must be ≥ 0, got {v}"));
            0
        }
        None => 0,
    };
    let t_end = r.f64_req(&mut s, "t_end");
    let record_every = r.usize_or(&mut s, "record_every", 1);
    let default_boundary = if kind == Some(ScenarioKind::BarrierTunneling) {
        BoundaryPolicy::Absorb
    } else {
        BoundaryPolicy::Reflect
    };
    let boundary = match r.str_opt(&mut s, "boundary") {
        None => default_boundary,
        Some("reflect") => BoundaryPolicy::Reflect,
        Some("absorb") => BoundaryPolicy::Absorb,
        Some(other) => {
            r.errors.push(format!("sde.boundary must be reflect or absorb, got \"{other}\""));
            default_boundary
        }
    };
    r.finish(s);
    r.check(n_paths >= 1, "sde.n_paths must be ≥ 1");
    r.check(record_every >= 1, "sde.record_every must be ≥ 1");
    r.check(dt_sde > 0.0, "sde.dt_sde must be > 0");
    r.check(t_end > 0.0, "sde.t_end must be > 0");
    if let Some(g) = &grid {
        r.check(
            !(dt_sde > g.dt_pde * (1.0 + 1e-12)),
            format!("sde.dt_sde = {dt_sde} must not exceed grid.dt_pde = {}", g.dt_pde),
        );
    }
    if dt_sde > 0.0 && t_end > 0.0 && record_every >= 1 {
        let steps = ((t_end / dt_sde).round() as usize).max(1);
        r.check(
            steps % record_every == 0,
            format!("sde.record_every = {record_every} must divide the step count {steps}"),
        );
    }

    // [fields]
    let mut s = r.section(&root, "fields", false);
    let fields = match r.str_opt(&mut s, "source") {
        None if kind == Some(ScenarioKind::BarrierTunneling) => FieldSource::CrankNicolson,
        None | Some("analytic") => FieldSource::Analytic,
        Some("crank_nicolson") => FieldSource::CrankNicolson,
        Some(other) => {
            r.errors.push(format!("fields.source must be analytic or crank_nicolson, got \"{other}\""));
            FieldSource::Analytic
        }
    };
    let save_every = r.usize_or(&mut s, "save_every", 1);
    r.finish(s);
    r.check(save_every >= 1, "fields.save_every must be ≥ 1");
    if fields == FieldSource::CrankNicolson {
        r.check(
            matches!(kind, Some(ScenarioKind::CoherentOscillator) | Some(ScenarioKind::BarrierTunneling)),
            "fields.source = crank_nicolson applies to coherent_oscillator and barrier_tunneling",
        );
    }

    // [packet]
    let mut s = r.section(&root, "packet", kind == Some(ScenarioKind::BarrierTunneling));
    let packet = if s.table.is_some() {
        let x0 = r.f64_req(&mut s, "x0");
        let k0 = r.f64_or(&mut s, "k0", 0.0);
        let sigma = r.f64_req(&mut s, "sigma");
        r.check(sigma > 0.0, "packet.sigma must be > 0");
        Some(PacketSettings { x0, k0, sigma })
    } else {
        None
    };
    r.finish(s);

    // [solver]
    let mut s = r.section(&root, "solver", false);
    let solver = SolverSettings {
        e_lo: r.f64_or(&mut s, "e_lo", 0.0),
        e_hi: r.f64_or(&mut s, "e_hi", hbar * omega),
        tol: r.f64_or(&mut s, "tol", 1e-10),
    };
    r.finish(s);
    r.check(solver.e_lo < solver.e_hi, "solver.e_lo must be below solver.e_hi");
    r.check(solver.tol > 0.0, "solver.tol must be > 0");

    // [analysis]
    let mut s = r.section(&root, "analysis", false);
    let density_range = r.f64_list(&mut s, "density_range").and_then(|v| {
        if v.len() == 2 && v[0] < v[1] {
            Some((v[0], v[1]))
        } else {
            r.errors.push("analysis.density_range must be [lo, hi] with lo < hi".into());
            None
        }
    });
    let newton_range = r.f64_list(&mut s, "newton_range").map_or((-2.0, 2.0), |v| {
        if v.len() == 2 && v[0] < v[1] {
            (v[0], v[1])
        } else {
            r.errors.push("analysis.newton_range must be [lo, hi] with lo < hi".into());
            (-2.0, 2.0)
        }
    });
    let fpt_region = r.raw(&mut s, "fpt_region").cloned();
    let fpt_region = fpt_region.and_then(|v| parse_region(&mut r, &v));
    let fpt_sense = match r.str_opt(&mut s, "fpt_sense") {
        None | Some("traverse") => PassageSense::Traverse,
        Some("enter") => PassageSense::Enter,
        Some("exit") => PassageSense::Exit,
        Some(other) => {
            r.errors.push(format!("analysis.fpt_sense must be enter, exit or traverse, got \"{other}\""));
            PassageSense::Traverse
        }
    };
    let overlap = r.int_opt(&mut s, "overlap").map(|v| v.max(0) as usize);
    let analysis = AnalysisSettings {
        sample_paths: r.usize_or(&mut s, "sample_paths", 8),
        density_times: r.f64_list(&mut s, "density_times").unwrap_or_else(|| vec![t_end]),
        density_bins: r.usize_or(&mut s, "density_bins", 80),
        density_range,
        max_lag: r.usize_or(&mut s, "max_lag", 50),
        segment_length: r.usize_or(&mut s, "segment_length", 256),
        overlap,
        psd_fit_omega_max: r.f64_or(&mut s, "psd_fit_omega_max", 3.0 * omega),
        fpt_region,
        fpt_sense,
        newton_time: r.f64_opt(&mut s, "newton_time"),
        newton_delta_t: r.f64_opt(&mut s, "newton_delta_t"),
        newton_bin_width: r.f64_or(&mut s, "newton_bin_width", 0.25),
        newton_range,
        probe_amplitude: r.f64_or(&mut s, "probe_amplitude", 0.1),
    };
    r.finish(s);
    r.check(analysis.density_bins >= 1, "analysis.density_bins must be ≥ 1");
    r.check(analysis.newton_bin_width > 0.0, "analysis.newton_bin_width must be > 0");
    if analyses.contains(&AnalysisKind::Fpt) {
        r.check(analysis.fpt_region.is_some(), "analysis fpt requires analysis.fpt_region");
    }

    // [gates]
    let mut s = r.section(&root, "gates", false);
    let gates = GateSettings {
        ks_budget: r.f64_or(&mut s, "ks_budget", 0.02),
        duality_budget: r.f64_or(&mut s, "duality_budget", 0.03),
        parseval_tolerance: r.f64_or(&mut s, "parseval_tolerance", 0.02),
        newton_sigmas: r.f64_or(&mut s, "newton_sigmas", 3.0),
        energy_sigmas: r.f64_or(&mut s, "energy_sigmas", 3.0),
        residual_tolerance: r.f64_or(&mut s, "residual_tolerance", crate::stationary::RESIDUAL_TOLERANCE),
    };
    r.finish(s);

    if let Some(k) = kind {
        let stationary_only = [AnalysisKind::Autocorrelation, AnalysisKind::Psd, AnalysisKind::Saddle];
        if matches!(k, ScenarioKind::BarrierTunneling) {
            for a in stationary_only {
                r.check(!analyses.contains(&a), format!("analysis {a:?} needs a stationary scenario"));
            }
        }
        if analyses.contains(&AnalysisKind::Solution) {
            r.check(
                matches!(k, ScenarioKind::StationaryGround | ScenarioKind::CustomPotential),
                "analysis solution needs a stationary_ground or custom_potential scenario",
            );
        }
        if analyses.contains(&AnalysisKind::Madelung) {
            r.check(
                fields == FieldSource::CrankNicolson,
                "analysis madelung needs fields.source = crank_nicolson",
            );
        }
    }

    match (r.errors.is_empty(), kind, grid) {
        (true, Some(kind), Some(grid)) => Ok(ScenarioConfig {
            id,
            kind,
            params: PhysicalParams { mass, hbar },
            omega,
            n_mean,
            potential,
            grid,
            sde: SdeSettings {
                dt_sde,
                n_paths,
                seed,
                t_end,
                record_every,
                boundary,
            },
            fields,
            save_every,
            packet,
            solver,
            analyses,
            analysis,
            gates,
            output_dir,
        }),
        _ => Err(r.errors),
    }
}
