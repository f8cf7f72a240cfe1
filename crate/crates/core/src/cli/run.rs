//! Scenario pipeline: state → velocity fields → trajectories → analyses.
//!
//! Everything is computed in memory; [`super::emit_outputs`] writes the files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{AnalysisKind, FieldSource, ScenarioConfig, ScenarioKind};
use crate::analysis::{
    autocorrelation, first_passage_times, ks_distance, ks_two_sample, power_spectral_density, svg_line_plot,
    wiener_khinchin_check, Centering, Histogram,
};
use crate::error::{Error, Result};
use crate::kinematics::field::locate_time;
use crate::kinematics::{
    nelson_newton_residual, sample_backward, sample_forward, sha256_hex, Bins, CoherentField, GridCdf, SdeConfig,
    StationaryField, TrajectoryEnsemble, VelocityComponent, VelocityField,
};
use crate::numerics::{self, Estimate};
use crate::state::{
    gaussian_packet, madelung_decompose, madelung_residuals, CoherentStateSpec, CrankNicolson, DensityFloor,
    GridSpec, MadelungFields,
};
use crate::stationary::{solve_stationary_ground, StationarySolution};
use crate::variational::{
    action_report_csv, estimate_action_functionals, estimate_mean_energy, saddle_point_probe,
    ActionFunctionalSpec, Perturbation, ProbeShape, SaddleVerdict,
};

/// Largest tolerated drift of the propagated norm.
pub const CN_NORM_TOLERANCE: f64 = 1e-6;

/// One artifact, held in memory until emission.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub analysis: String,
    pub bytes: Vec<u8>,
}

/// An internal consistency check; `value` is `None` when it was not finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

impl Gate {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Gate {
            name: name.into(),
            value: value.is_finite().then_some(value),
            threshold,
            passed: value < threshold,
        }
    }

    fn flag(name: impl Into<String>, value: f64, threshold: f64, passed: bool) -> Self {
        Gate {
            name: name.into(),
            value: value.is_finite().then_some(value),
            threshold,
            passed: passed && value.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunResults {
    pub outputs: Vec<OutputFile>,
    pub gates: Vec<Gate>,
    pub field_checksum: String,
    pub metrics: BTreeMap<String, f64>,
}

impl RunResults {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    fn output(&mut self, analysis: AnalysisKind, name: String, text: String) {
        self.outputs.push(OutputFile {
            name,
            analysis: analysis_name(analysis).to_string(),
            bytes: text.into_bytes(),
        });
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.into(), value);
        }
    }
}

pub fn analysis_name(kind: AnalysisKind) -> &'static str {
    AnalysisKind::ALL.iter().find(|(_, k)| *k == kind).map_or("unknown", |(n, _)| n)
}

enum Field {
    Coherent(CoherentField),
    Stationary(StationaryField),
    Madelung(MadelungFields),
}

impl VelocityField for Field {
    fn grid(&self) -> &GridSpec {
        match self {
            Field::Coherent(f) => f.grid(),
            Field::Stationary(f) => f.grid(),
            Field::Madelung(f) => f.grid(),
        }
    }

    fn time_range(&self) -> (f64, f64) {
        match self {
            Field::Coherent(f) => f.time_range(),
            Field::Stationary(f) => f.time_range(),
            Field::Madelung(f) => f.time_range(),
        }
    }

    fn velocities(&self, x: f64, t: f64) -> (f64, f64) {
        match self {
            Field::Coherent(f) => f.velocities(x, t),
            Field::Stationary(f) => f.velocities(x, t),
            Field::Madelung(f) => f.velocities(x, t),
        }
    }
}

/// One physical state of the scenario with its fields and reference density.
struct State {
    tag: String,
    field: Field,
    coherent: Option<CoherentStateSpec>,
    solution: Option<StationarySolution>,
    checksum_bytes: Vec<u8>,
    t_end: f64,
}

impl State {
    fn grid(&self) -> &GridSpec {
        self.field.grid()
    }

    /// `|ψ(x, t)|²` on the grid, normalized.
    fn density(&self, t: f64) -> Result<Vec<f64>> {
        let grid = self.grid();
        let raw = match (&self.field, &self.coherent, &self.solution) {
            (_, _, Some(s)) => s.rho.clone(),
            (Field::Madelung(f), _, _) => {
                let (k, w) = locate_time(&f.times, t);
                if w == 0.0 {
                    f.rho[k].clone()
                } else {
                    f.rho[k].iter().zip(&f.rho[k + 1]).map(|(a, b)| a + w * (b - a)).collect()
                }
            }
            (_, Some(c), _) => c.wavefunction(t, grid)?.iter().map(|z| z.norm_sqr()).collect(),
            _ => return Err(Error::invalid("state has no reference density")),
        };
        let z = grid.integrate(&raw);
        Ok(raw.iter().map(|r| r / z).collect())
    }
}

fn number_tag(n: f64) -> String {
    format!("{n}").replace('.', "p")
}

fn propagate_fields(
    config: &ScenarioConfig,
    psi0: &[num_complex::Complex64],
    results: &mut RunResults,
    tag: &str,
) -> Result<MadelungFields> {
    let grid = &config.grid;
    let n_steps = (config.sde.t_end / grid.dt_pde).round() as usize;
    if n_steps == 0 || ((n_steps as f64 * grid.dt_pde) - config.sde.t_end).abs() > 1e-9 * config.sde.t_end.max(1.0) {
        return Err(Error::invalid(format!(
            "sde.t_end = {} is not a whole number of grid.dt_pde = {} steps",
            config.sde.t_end, grid.dt_pde
        )));
    }
    let cn = CrankNicolson::new(grid, &config.potential, config.params)?;
    let wave = cn.propagate(psi0, 0.0, n_steps, config.save_every)?;
    let drift = (wave.norm(wave.n_times() - 1) - 1.0).abs();
    results.gates.push(Gate::below(format!("cn_norm{tag}"), drift, CN_NORM_TOLERANCE));
    madelung_decompose(&wave, config.params, DensityFloor::default())
}

fn build_states(config: &ScenarioConfig, results: &mut RunResults) -> Result<Vec<State>> {
    let grid = config.grid.clone();
    let t_end = config.sde.t_end;
    match config.kind {
        ScenarioKind::CoherentOscillator => {
            let many = config.n_mean.len() > 1;
            let mut states = Vec::new();
            for &n in &config.n_mean {
                let spec = CoherentStateSpec::new(config.omega, n, config.params)?;
                let tag = if many { format!("_n{}", number_tag(n)) } else { String::new() };
                let state = match config.fields {
                    FieldSource::Analytic => {
                        let bytes = serde_json::to_vec(&(spec, &grid, t_end)).expect("spec serializes");
                        State {
                            tag,
                            field: Field::Coherent(CoherentField {
                                spec,
                                grid: grid.clone(),
                                t_range: (0.0, t_end),
                            }),
                            coherent: Some(spec),
                            solution: None,
                            checksum_bytes: bytes,
                            t_end,
                        }
                    }
                    FieldSource::CrankNicolson => {
                        let psi0 = spec.wavefunction(0.0, &grid)?;
                        let f = propagate_fields(config, &psi0, results, &tag)?;
                        let t_last = *f.times.last().unwrap();
                        State {
                            tag,
                            checksum_bytes: f.to_bytes(),
                            field: Field::Madelung(f),
                            coherent: Some(spec),
                            solution: None,
                            t_end: t_last,
                        }
                    }
                };
                states.push(state);
            }
            Ok(states)
        }
        ScenarioKind::StationaryGround | ScenarioKind::CustomPotential => {
            let s = &config.solver;
            let sol = solve_stationary_ground(&config.potential, config.params, (s.e_lo, s.e_hi), &grid, s.tol)?;
            results.gates.push(Gate::below(
                "solver_residual",
                sol.residual_sup,
                config.gates.residual_tolerance,
            ));
            results.gates.push(Gate::flag(
                "solver_converged",
                f64::from(u8::from(sol.converged)),
                1.0,
                sol.converged,
            ));
            results.metric("solver_iterations", sol.iterations as f64);
            results.metric("energy", sol.energy);
            results.metric("residual_sup", sol.residual_sup);
            let mut bytes = Vec::new();
            for v in std::iter::once(sol.energy).chain(sol.u_profile.iter().copied()) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            Ok(vec![State {
                tag: String::new(),
                field: Field::Stationary(StationaryField::new(grid, sol.u_profile.clone())?),
                coherent: None,
                solution: Some(sol),
                checksum_bytes: bytes,
                t_end,
            }])
        }
        ScenarioKind::BarrierTunneling => {
            let p = config
                .packet
                .ok_or_else(|| Error::invalid("barrier_tunneling requires [packet]"))?;
            let psi0 = gaussian_packet(&grid, p.x0, p.k0, p.sigma)?;
            let f = propagate_fields(config, &psi0, results, "")?;
            let t_last = *f.times.last().unwrap();
            Ok(vec![State {
                tag: String::new(),
                checksum_bytes: f.to_bytes(),
                field: Field::Madelung(f),
                coherent: None,
                solution: None,
                t_end: t_last,
            }])
        }
    }
}

fn needs_forward(config: &ScenarioConfig) -> bool {
    use AnalysisKind::*;
    matches!(config.kind, ScenarioKind::StationaryGround | ScenarioKind::CustomPotential)
        || config.analyses.iter().any(|a| {
            matches!(
                a,
                Trajectories | Density | Backward | Autocorrelation | Psd | Fpt | Action | Energy | Newton
            )
        })
}

fn sde_config(config: &ScenarioConfig, t_end: f64, backward: bool) -> SdeConfig {
    let s = &config.sde;
    let base = if backward {
        SdeConfig::backward(s.seed, s.n_paths, s.dt_sde, 0.0, t_end)
    } else {
        SdeConfig::forward(s.seed, s.n_paths, s.dt_sde, 0.0, t_end)
    };
    base.with_record_every(s.record_every).with_boundary(s.boundary)
}

fn first_paths(ens: &TrajectoryEnsemble, k: usize) -> TrajectoryEnsemble {
    let k = k.min(ens.n_paths);
    TrajectoryEnsemble {
        times: ens.times.clone(),
        paths: ens.paths[..k * ens.n_times()].to_vec(),
        n_paths: k,
        direction: ens.direction,
        seed: ens.seed,
        stream_ids: ens.stream_ids[..k].to_vec(),
        absorbed_at: ens.absorbed_at[..k].to_vec(),
        dt_sde: ens.dt_sde,
    }
}

fn moments_series(ens: &TrajectoryEnsemble) -> Vec<(f64, f64)> {
    (0..ens.n_times())
        .map(|j| {
            let e = Estimate::from_samples(&ens.live_column(j));
            let n = e.n as f64;
            (e.value, e.stderr * e.stderr * n)
        })
        .collect()
}

/// Runs every requested analysis and gate; nothing touches the filesystem.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResults> {
    let mut results = RunResults::default();
    let states = build_states(config, &mut results)?;
    let mut checksum_input = Vec::new();
    for s in &states {
        checksum_input.extend_from_slice(&s.checksum_bytes);
    }
    results.field_checksum = sha256_hex(&checksum_input);
    for state in &states {
        run_state(config, state, &mut results)?;
    }
    Ok(results)
}

fn run_state(config: &ScenarioConfig, state: &State, results: &mut RunResults) -> Result<()> {
    use AnalysisKind as A;
    let tag = state.tag.as_str();
    let wants = |a: AnalysisKind| config.analyses.contains(&a);
    let grid = state.grid().clone();
    let params = config.params;
    let stationary = state.solution.is_some();

    if let Some(sol) = &state.solution {
        if wants(A::Solution) {
            results.output(A::Solution, "solution.csv".into(), sol.to_csv());
            results.output(A::Solution, "solution.json".into(), sol.summary_json());
        }
    }
    if wants(A::Madelung) {
        if let Field::Madelung(f) = &state.field {
            let n = madelung_residuals(f, &config.potential)?.norms();
            let mut s = String::from("quantity,value\n");
            for (name, v) in [
                ("continuity_sup", n.continuity_sup),
                ("continuity_l2", n.continuity_l2),
                ("qhj_sup", n.qhj_sup),
                ("qhj_l2", n.qhj_l2),
                ("n_points", n.n_points as f64),
            ] {
                let _ = writeln!(s, "{name},{v}");
                results.metric(format!("madelung{tag}_{name}"), v);
            }
            results.output(A::Madelung, format!("madelung{tag}.csv"), s);
        }
    }
    if !needs_forward(config) {
        return Ok(());
    }

    let t_end = state.t_end;
    let fwd_cfg = sde_config(config, t_end, false);
    let rho0 = state.density(0.0)?;
    let ens = sample_forward(&state.field, params, &fwd_cfg, &rho0)?;

    if stationary {
        let sol = state.solution.as_ref().unwrap();
        let cdf = GridCdf::new(&grid, &sol.rho)?;
        let xs = ens.live_column(ens.n_times() - 1);
        let d = ks_distance(&xs, |x| cdf.cdf(x))?;
        results.gates.push(Gate::below("stationary_ks", d, config.gates.ks_budget));
    }

    if wants(A::Trajectories) {
        let sample = first_paths(&ens, config.analysis.sample_paths);
        let mut csv = Vec::new();
        sample.write_csv(&mut csv).map_err(|e| Error::io("trajectory csv", e))?;
        results.outputs.push(OutputFile {
            name: format!("trajectories{tag}.csv"),
            analysis: "trajectories".into(),
            bytes: csv,
        });
        results.outputs.push(OutputFile {
            name: format!("trajectories{tag}.bin"),
            analysis: "trajectories".into(),
            bytes: ens.to_binary(),
        });
        let manifest = ens.manifest(&fwd_cfg, &results.field_checksum);
        results.output(A::Trajectories, format!("trajectories{tag}.json"), manifest.to_json());
        let names: Vec<String> = (0..sample.n_paths).map(|k| format!("path {k}")).collect();
        let series: Vec<(&str, &[f64], &[f64])> = (0..sample.n_paths)
            .map(|k| (names[k].as_str(), sample.times.as_slice(), sample.path(k)))
            .collect();
        results.output(
            A::Trajectories,
            format!("trajectories{tag}.svg"),
            svg_line_plot(&format!("sample paths{tag}"), "t", "x", &series),
        );
    }

    if wants(A::Density) {
        let (lo, hi) = config.analysis.density_range.unwrap_or((grid.x_min, grid.x_max));
        let mut s = String::from("t,x,density,reference\n");
        for &t in &config.analysis.density_times {
            let j = ens.time_index(t)?;
            let ts = ens.times[j];
            let xs = ens.live_column(j);
            let h = Histogram::from_samples(&xs, lo, hi, config.analysis.density_bins)?;
            let rho = state.density(ts)?;
            for (c, d) in h.centers().iter().zip(&h.density) {
                let _ = writeln!(s, "{ts},{c},{d},{}", grid.interpolate(&rho, *c));
            }
            let cdf = GridCdf::new(&grid, &rho)?;
            let ks = ks_distance(&xs, |x| cdf.cdf(x))?;
            results.gates.push(Gate::below(format!("density_ks{tag}_t{ts}"), ks, config.gates.ks_budget));
        }
        results.output(A::Density, format!("density{tag}.csv"), s);
    }

    let backward = if wants(A::Backward) || wants(A::Newton) {
        let cfg = sde_config(config, t_end, true);
        Some(sample_backward(&state.field, params, &cfg, &state.density(t_end)?)?)
    } else {
        None
    };

    if wants(A::Backward) {
        let bwd = backward.as_ref().unwrap();
        let mf = moments_series(&ens);
        let mb = moments_series(bwd);
        let mut s = String::from("t,forward_mean,forward_var,backward_mean,backward_var\n");
        for j in 0..ens.n_times() {
            let _ = writeln!(s, "{},{},{},{},{}", ens.times[j], mf[j].0, mf[j].1, mb[j].0, mb[j].1);
        }
        results.output(A::Backward, format!("backward{tag}.csv"), s);
        let t_mid = 0.5 * t_end;
        let a = ens.live_column(ens.time_index(t_mid)?);
        let b = bwd.live_column(bwd.time_index(t_mid)?);
        let d = ks_two_sample(&a, &b)?;
        results.gates.push(Gate::below(format!("duality_ks{tag}"), d, config.gates.duality_budget));
    }

    let acf = if wants(A::Autocorrelation) || wants(A::Psd) {
        let centering = if stationary { Centering::GrandMean } else { Centering::PerTime };
        let max_lag = config.analysis.max_lag.min(ens.n_times() - 1);
        Some(autocorrelation(&ens, max_lag, centering)?)
    } else {
        None
    };
    if wants(A::Autocorrelation) {
        let acf = acf.as_ref().unwrap();
        results.output(A::Autocorrelation, format!("autocorrelation{tag}.csv"), acf.to_csv());
        results.metric(format!("acf{tag}_c0"), acf.values[0]);
    }

    if wants(A::Psd) {
        let seg = config.analysis.segment_length;
        let psd = power_spectral_density(&ens, seg, config.analysis.overlap.unwrap_or(seg / 2))?;
        results.output(A::Psd, format!("psd{tag}.csv"), psd.to_csv());
        let parseval = (psd.integrated_power() / psd.variance - 1.0).abs();
        results
            .gates
            .push(Gate::below(format!("parseval{tag}"), parseval, config.gates.parseval_tolerance));
        let omega_max = config.analysis.psd_fit_omega_max;
        if let Ok(wc) = psd.fit_corner(omega_max) {
            results.metric(format!("psd{tag}_corner_omega"), wc);
        }
        let f_max = omega_max / (2.0 * std::f64::consts::PI);
        results.metric(
            format!("psd{tag}_wiener_khinchin"),
            wiener_khinchin_check(acf.as_ref().unwrap(), &psd, f_max),
        );
    }

    if wants(A::Fpt) {
        let region = config.analysis.fpt_region.expect("validated at parse time");
        let fp = first_passage_times(&ens, region, config.analysis.fpt_sense)?;
        results.output(A::Fpt, format!("fpt{tag}.csv"), fp.to_csv());
        let s = &fp.summary;
        results.metric(format!("fpt{tag}_n_qualified"), s.n_qualified as f64);
        results.metric(format!("fpt{tag}_n_censored"), s.n_censored as f64);
        results.metric(format!("fpt{tag}_n_never"), s.n_never as f64);
        results.metric(format!("fpt{tag}_n_ineligible"), s.n_ineligible as f64);
        results.metric(format!("fpt{tag}_censored_fraction"), s.censored_fraction);
        results.metric(format!("fpt{tag}_median"), s.median);
        results.metric(format!("fpt{tag}_mean"), s.mean);
        let durations = fp.qualified_durations();
        if !durations.is_empty() {
            results.metric(format!("fpt{tag}_median_duration"), numerics::median(&durations));
        }
    }

    if wants(A::Action) {
        let spec = ActionFunctionalSpec::new(t_end);
        let est = estimate_action_functionals(&ens, &state.field, &config.potential, &spec, params)?;
        results.output(
            A::Action,
            format!("action{tag}.csv"),
            action_report_csv(&est, ens.dt_sde, &format!("{}{tag}", config.id)),
        );
        results.metric(format!("action{tag}_j_r_per_t"), est.j_r.value / t_end);
    }

    if wants(A::Energy) {
        let e = estimate_mean_energy(&ens, &state.field, &config.potential, params)?;
        results.output(A::Energy, format!("energy{tag}.csv"), e.to_csv());
        results.metric(format!("energy{tag}_level"), e.level.value);
        let z = e.slope.value.abs() / e.slope.stderr;
        results
            .gates
            .push(Gate::flag(format!("energy_slope{tag}"), z, config.gates.energy_sigmas, z <= config.gates.energy_sigmas));
    }

    if wants(A::Newton) {
        let bwd = backward.as_ref().unwrap();
        let a = &config.analysis;
        let t = a.newton_time.unwrap_or(0.5 * t_end);
        let delta_t = a.newton_delta_t.unwrap_or(ens.record_dt().max(0.01));
        let bins = Bins::new(a.newton_range.0, a.newton_range.1, a.newton_bin_width)?;
        let r = nelson_newton_residual(&ens, bwd, &state.field, &config.potential, params.mass, t, delta_t, bins)?;
        results.output(A::Newton, format!("newton{tag}.csv"), r.to_csv());
        let z = r.max_abs_z();
        let limit = config.gates.newton_sigmas;
        results.gates.push(Gate::flag(format!("newton{tag}"), z, limit, z <= limit));
    }

    if wants(A::Saddle) {
        let spec = ActionFunctionalSpec::new(t_end);
        let mut s = String::from("target,amplitude,delta_j_r,stderr,base_j_r,verdict\n");
        for target in [VelocityComponent::Drift, VelocityComponent::Osmotic] {
            let p = Perturbation {
                target,
                shape: ProbeShape::Linear { center: 0.0 },
                amplitude: config.analysis.probe_amplitude,
            };
            let r = saddle_point_probe(&state.field, &config.potential, &spec, params, &fwd_cfg, &rho0, p)?;
            let verdict = serde_json::to_value(r.verdict).expect("verdict serializes");
            let name = match target {
                VelocityComponent::Drift => "drift",
                VelocityComponent::Osmotic => "osmotic",
            };
            let _ = writeln!(
                s,
                "{name},{},{},{},{},{}",
                p.amplitude,
                r.delta_j_r.value,
                r.delta_j_r.stderr,
                r.base_j_r.value,
                verdict.as_str().unwrap_or("")
            );
            let contradicts = match target {
                VelocityComponent::Drift => r.verdict == SaddleVerdict::Decrease,
                VelocityComponent::Osmotic => r.verdict == SaddleVerdict::Increase,
            };
            let z = r.delta_j_r.z_score(0.0);
            results.gates.push(Gate::flag(format!("saddle{tag}_{name}"), z, crate::variational::SADDLE_SIGMAS, !contradicts));
        }
        results.output(A::Saddle, format!("saddle{tag}.csv"), s);
    }
    Ok(())
}

/// Analyses that need only a stored ensemble.
pub const ENSEMBLE_ANALYSES: [AnalysisKind; 4] =
    [AnalysisKind::Density, AnalysisKind::Autocorrelation, AnalysisKind::Psd, AnalysisKind::Fpt];

/// Runs the ensemble-only analyses requested by `config` on a loaded ensemble.
/// Densities are histograms only, since no reference state is available.
pub fn analyze_ensemble(config: &ScenarioConfig, ens: &TrajectoryEnsemble) -> Result<RunResults> {
    use AnalysisKind as A;
    let mut results = RunResults::default();
    let wants = |a: AnalysisKind| config.analyses.contains(&a);
    let a = &config.analysis;
    if wants(A::Density) {
        let (lo, hi) = a.density_range.unwrap_or((config.grid.x_min, config.grid.x_max));
        let mut s = String::from("t,x,density\n");
        for &t in &a.density_times {
            let j = ens.time_index(t)?;
            let h = Histogram::from_samples(&ens.live_column(j), lo, hi, a.density_bins)?;
            for (c, d) in h.centers().iter().zip(&h.density) {
                let _ = writeln!(s, "{},{c},{d}", ens.times[j]);
            }
        }
        results.output(A::Density, "density.csv".into(), s);
    }
    let stationary = matches!(config.kind, ScenarioKind::StationaryGround | ScenarioKind::CustomPotential);
    let centering = if stationary { Centering::GrandMean } else { Centering::PerTime };
    if wants(A::Autocorrelation) || wants(A::Psd) {
        let acf = autocorrelation(ens, a.max_lag.min(ens.n_times() - 1), centering)?;
        if wants(A::Autocorrelation) {
            results.output(A::Autocorrelation, "autocorrelation.csv".into(), acf.to_csv());
        }
        if wants(A::Psd) {
            let seg = a.segment_length;
            let psd = power_spectral_density(ens, seg, a.overlap.unwrap_or(seg / 2))?;
            results.output(A::Psd, "psd.csv".into(), psd.to_csv());
            let parseval = (psd.integrated_power() / psd.variance - 1.0).abs();
            results.gates.push(Gate::below("parseval", parseval, config.gates.parseval_tolerance));
            if let Ok(wc) = psd.fit_corner(a.psd_fit_omega_max) {
                results.metric("psd_corner_omega", wc);
            }
            let f_max = a.psd_fit_omega_max / (2.0 * std::f64::consts::PI);
            results.metric("psd_wiener_khinchin", wiener_khinchin_check(&acf, &psd, f_max));
        }
    }
    if wants(A::Fpt) {
        let region = a.fpt_region.expect("validated at parse time");
        let fp = first_passage_times(ens, region, a.fpt_sense)?;
        results.output(A::Fpt, "fpt.csv".into(), fp.to_csv());
        results.metric("fpt_n_qualified", fp.summary.n_qualified as f64);
        results.metric("fpt_censored_fraction", fp.summary.censored_fraction);
        results.metric("fpt_median", fp.summary.median);
    }
    Ok(results)
}
