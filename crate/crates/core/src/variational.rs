//! Monte-Carlo estimates of the quantum action functionals, mean energy, and
//! saddle-structure probes along trajectory ensembles.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    sample_forward, PerturbedField, SdeConfig, TrajectoryEnsemble, VelocityComponent, VelocityField,
};
use crate::numerics::{self, Estimate};
use crate::state::{GridSpec, PhysicalParams, PotentialSpec};

/// Time quadrature for path integrals `∫ f(x(t), t) dt` over the stored times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Average of the integrand at both ends of each stored interval.
    #[default]
    Trapezoid,
    /// Integrand at the interval midpoint `((x_j + x_{j+1})/2, (t_j + t_{j+1})/2)`.
    Midpoint,
    /// Integrand at the left end (Itô-forward).
    ItoForward,
}

/// Horizon and terminal costs, tabulated on the field grid (absent means zero).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionFunctionalSpec {
    pub horizon: f64,
    pub phi_t: Option<Vec<f64>>,
    pub s_o: Option<Vec<f64>>,
    pub r_0: Option<Vec<f64>>,
    pub quadrature: Quadrature,
}

impl ActionFunctionalSpec {
    pub fn new(horizon: f64) -> Self {
        ActionFunctionalSpec {
            horizon,
            ..Default::default()
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid("action horizon must be > 0"));
        }
        for (name, c) in [("phi_t", &self.phi_t), ("s_o", &self.s_o), ("r_0", &self.r_0)] {
            if let Some(c) = c {
                if c.len() != grid.n_points || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!(
                        "terminal cost {name} must be finite with one value per grid point"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn terminal(grid: &GridSpec, cost: &Option<Vec<f64>>, x: f64) -> f64 {
    cost.as_ref().map_or(0.0, |c| grid.interpolate(c, x))
}

/// Action estimates with jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionEstimate {
    /// `E[∫((m/2)(v² − u²) − V) dt + S_o(x(T))]`.
    pub j_r: Estimate,
    /// `−m E[∫ v u dt + R_0(x(T))]`.
    pub j_i: Estimate,
    /// Real part of `E[∫((m/2)(v − iu)² − V) dt + Φ_T(x(T))]`.
    pub j_complex_re: Estimate,
    /// Imaginary part of the same complex functional.
    pub j_complex_im: Estimate,
    pub n_paths: usize,
    pub horizon: f64,
}

/// Per-path integrals along an ensemble; absorbed paths are skipped.
fn per_path<F, G>(ensemble: &TrajectoryEnsemble, fields: &F, quadrature: Quadrature, integrand: G) -> Vec<[f64; 4]>
where
    F: VelocityField + ?Sized,
    G: Fn(f64, f64, f64, f64) -> [f64; 4] + Sync,
{
    let times = &ensemble.times;
    let n_t = times.len();
    let eval = |x: f64, t: f64| {
        let (v, u) = fields.velocities(x, t);
        integrand(x, t, v, u)
    };
    (0..ensemble.n_paths)
        .into_par_iter()
        .filter(|&k| !ensemble.is_absorbed(k))
        .map(|k| {
            let path = ensemble.path(k);
            let mut acc = [0.0f64; 4];
            let mut prev = eval(path[0], times[0]);
            for j in 0..n_t - 1 {
                let h = times[j + 1] - times[j];
                match quadrature {
                    Quadrature::Trapezoid => {
                        let next = eval(path[j + 1], times[j + 1]);
                        for c in 0..4 {
                            acc[c] += 0.5 * h * (prev[c] + next[c]);
                        }
                        prev = next;
                    }
                    Quadrature::Midpoint => {
                        let mid = eval(0.5 * (path[j] + path[j + 1]), 0.5 * (times[j] + times[j + 1]));
                        for c in 0..4 {
                            acc[c] += h * mid[c];
                        }
                    }
                    Quadrature::ItoForward => {
                        let left = eval(path[j], times[j]);
                        for c in 0..4 {
                            acc[c] += h * left[c];
                        }
                    }
                }
            }
            acc
        })
        .collect()
}

fn check_horizon(ensemble: &TrajectoryEnsemble, spec: &ActionFunctionalSpec) -> Result<()> {
    let span = ensemble.times[ensemble.n_times() - 1] - ensemble.times[0];
    if (span - spec.horizon).abs() > 1e-9 * spec.horizon.max(1.0) {
        return Err(Error::HorizonMismatch(format!(
            "ensemble spans {span}, functional horizon is {}",
            spec.horizon
        )));
    }
    Ok(())
}

/// Per-path values `[J_R, J_I, Re J, Im J]`.
fn action_samples<F: VelocityField + ?Sized>(
    ensemble: &TrajectoryEnsemble,
    fields: &F,
    potential: &PotentialSpec,
    spec: &ActionFunctionalSpec,
    mass: f64,
) -> Vec<[f64; 4]> {
    let grid = fields.grid();
    let integrals = per_path(ensemble, fields, spec.quadrature, |x, _t, v, u| {
        let pot = potential.value(x);
        let vq = Complex64::new(v, -u);
        let l = 0.5 * mass * (vq * vq) - pot;
        [0.5 * mass * (v * v - u * u) - pot, v * u, l.re, l.im]
    });
    let last = ensemble.n_times() - 1;
    let live: Vec<usize> = (0..ensemble.n_paths).filter(|&k| !ensemble.is_absorbed(k)).collect();
    live.iter()
        .zip(integrals)
        .map(|(&k, acc)| {
            let x_t = ensemble.position(k, last);
            [
                acc[0] + terminal(grid, &spec.s_o, x_t),
                -mass * (acc[1] + terminal(grid, &spec.r_0, x_t)),
                acc[2] + terminal(grid, &spec.phi_t, x_t),
                acc[3],
            ]
        })
        .collect()
}

fn column(samples: &[[f64; 4]], c: usize) -> Vec<f64> {
    samples.iter().map(|s| s[c]).collect()
}

pub fn estimate_action_functionals<F: VelocityField + ?Sized>(
    ensemble: &TrajectoryEnsemble,
    fields: &F,
    potential: &PotentialSpec,
    spec: &ActionFunctionalSpec,
    params: PhysicalParams,
) -> Result<ActionEstimate> {
    spec.validate(fields.grid())?;
    check_horizon(ensemble, spec)?;
    let samples = action_samples(ensemble, fields, potential, spec, params.mass);
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    Ok(ActionEstimate {
        j_r: Estimate::jackknife(&column(&samples, 0)),
        j_i: Estimate::jackknife(&column(&samples, 1)),
        j_complex_re: Estimate::jackknife(&column(&samples, 2)),
        j_complex_im: Estimate::jackknife(&column(&samples, 3)),
        n_paths: samples.len(),
        horizon: spec.horizon,
    })
}

/// CSV rows `functional, estimate, stderr, n_paths, dt_sde, scenario`.
pub fn action_report_csv(est: &ActionEstimate, dt_sde: f64, scenario: &str) -> String {
    let mut s = String::from("functional,estimate,stderr,n_paths,dt_sde,scenario\n");
    for (name, e) in [
        ("J_R", est.j_r),
        ("J_I", est.j_i),
        ("J_re", est.j_complex_re),
        ("J_im", est.j_complex_im),
    ] {
        s.push_str(&format!(
            "{name},{},{},{},{dt_sde},{scenario}\n",
            e.value, e.stderr, est.n_paths
        ));
    }
    s
}

/// `E(t) = E[(m/2)(v² + u²) + V]` at each stored time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanEnergySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Time average of the per-path energy, with s.e. across paths.
    pub level: Estimate,
    /// Least-squares slope of E(t) vs t; s.e. from the spread of per-path slopes.
    pub slope: Estimate,
}

impl MeanEnergySeries {
    pub fn max_deviation(&self) -> f64 {
        self.values.iter().map(|e| (e - self.values[0]).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,energy,stderr\n");
        for j in 0..self.times.len() {
            s.push_str(&format!("{},{},{}\n", self.times[j], self.values[j], self.stderrs[j]));
        }
        s
    }
}

/// Mean-energy series over the paths that are never absorbed.
pub fn estimate_mean_energy<F: VelocityField + ?Sized>(
    ensemble: &TrajectoryEnsemble,
    fields: &F,
    potential: &PotentialSpec,
    params: PhysicalParams,
) -> Result<MeanEnergySeries> {
    let m = params.mass;
    let live: Vec<usize> = (0..ensemble.n_paths).filter(|&k| !ensemble.is_absorbed(k)).collect();
    if live.len() < 2 || ensemble.n_times() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: live.len().min(ensemble.n_times()),
        });
    }
    let times = &ensemble.times;
    let energies: Vec<Vec<f64>> = live
        .par_iter()
        .map(|&k| {
            ensemble
                .path(k)
                .iter()
                .zip(times)
                .map(|(&x, &t)| {
                    let (v, u) = fields.velocities(x, t);
                    0.5 * m * (v * v + u * u) + potential.value(x)
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(times.len());
    let mut stderrs = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let e = Estimate::from_samples(&energies.iter().map(|p| p[j]).collect::<Vec<_>>());
        values.push(e.value);
        stderrs.push(e.stderr);
    }
    let slopes: Vec<f64> = energies.iter().map(|p| numerics::linear_fit(times, p).1).collect();
    let levels: Vec<f64> = energies.iter().map(|p| numerics::mean(p)).collect();
    Ok(MeanEnergySeries {
        times: times.clone(),
        values,
        stderrs,
        level: Estimate::from_samples(&levels),
        slope: Estimate::from_samples(&slopes),
    })
}

/// Spatial profile of a perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeShape {
    /// `x − center`
    Linear { center: f64 },
    Constant,
    /// `exp(−(x − center)² / 2 width²)`
    Gaussian { center: f64, width: f64 },
}

impl ProbeShape {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ProbeShape::Linear { center } => x - center,
            ProbeShape::Constant => 1.0,
            ProbeShape::Gaussian { center, width } => {
                let z = (x - center) / width;
                (-0.5 * z * z).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub target: VelocityComponent,
    pub shape: ProbeShape,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SaddleVerdict {
    Increase,
    Decrease,
    Unchanged,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleProbeReport {
    pub perturbation: Perturbation,
    /// Paired per-path difference `J_R(perturbed) − J_R(base)`.
    pub delta_j_r: Estimate,
    pub base_j_r: Estimate,
    pub verdict: SaddleVerdict,
}

impl SaddleProbeReport {
    /// Whether the verdict matches the minimum-over-v / maximum-over-u structure.
    pub fn confirms_saddle(&self) -> bool {
        match self.perturbation.target {
            VelocityComponent::Drift => self.verdict == SaddleVerdict::Increase,
            VelocityComponent::Osmotic => self.verdict == SaddleVerdict::Decrease,
        }
    }
}

/// Threshold in standard errors for a sign verdict.
pub const SADDLE_SIGMAS: f64 = 3.0;

fn verdict(delta: &Estimate) -> SaddleVerdict {
    if delta.value == 0.0 && !(delta.stderr > 0.0) {
        SaddleVerdict::Unchanged
    } else if delta.value > SADDLE_SIGMAS * delta.stderr {
        SaddleVerdict::Increase
    } else if delta.value < -SADDLE_SIGMAS * delta.stderr {
        SaddleVerdict::Decrease
    } else {
        SaddleVerdict::Inconclusive
    }
}

/// Initial density consistent with the osmotic velocity `u + a·shape`:
/// `ρ0' ∝ ρ0 · exp((2m/ħ) a ∫ shape dx)`, accumulated in the log domain.
fn tilted_density(grid: &GridSpec, rho0: &[f64], shape: &ProbeShape, amplitude: f64, params: PhysicalParams) -> Vec<f64> {
    let s: Vec<f64> = grid.points().iter().map(|&x| shape.eval(x)).collect();
    let cum = grid.cumulative(&s);
    let scale = 2.0 * params.mass / params.hbar * amplitude;
    let logw: Vec<f64> = cum.iter().map(|c| scale * c).collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tilted: Vec<f64> = rho0.iter().zip(&logw).map(|(r, l)| r * (l - top).exp()).collect();
    // ratio of integrals so a zero tilt reproduces rho0 bit for bit
    let z = grid.integrate(&tilted) / grid.integrate(rho0);
    tilted.iter().map(|t| t / z).collect()
}

/// Saddle-structure probe around optimal fields with common random numbers.
///
/// Osmotic perturbations re-simulate the forward diffusion with `u' = u + a·shape`
/// from the initial density consistent with `u'` and evaluate `J_R` with
/// `(v, u')`. Drift perturbations keep the path law (and hence `u`) fixed and
/// evaluate `J_R` with `(v + a·shape, u)` on the base paths: with `u` held at
/// its optimum the density cannot change, and re-simulating with the shifted
/// forward drift would alter it. Intended for stationary base fields.
#[allow(clippy::too_many_arguments)]
pub fn saddle_point_probe<F: VelocityField + ?Sized>(
    fields: &F,
    potential: &PotentialSpec,
    spec: &ActionFunctionalSpec,
    params: PhysicalParams,
    config: &SdeConfig,
    rho0: &[f64],
    perturbation: Perturbation,
) -> Result<SaddleProbeReport> {
    if !perturbation.amplitude.is_finite() {
        return Err(Error::invalid("perturbation amplitude must be finite"));
    }
    let grid = fields.grid().clone();
    let m = params.mass;
    let base = sample_forward(fields, params, config, rho0)?;
    spec.validate(&grid)?;
    check_horizon(&base, spec)?;
    let base_samples = column(&action_samples(&base, fields, potential, spec, m), 0);

    let perturbed_samples = match perturbation.target {
        VelocityComponent::Osmotic => {
            let shape = perturbation.shape;
            let pf = PerturbedField {
                base: fields,
                target: VelocityComponent::Osmotic,
                shape: move |x: f64| shape.eval(x),
                amplitude: perturbation.amplitude,
            };
            let rho_p = tilted_density(&grid, rho0, &shape, perturbation.amplitude, params);
            let ens = sample_forward(&pf, params, config, &rho_p)?;
            if (0..ens.n_paths).any(|k| ens.is_absorbed(k) != base.is_absorbed(k)) {
                return Err(Error::invalid(
                    "perturbation changed which paths were absorbed; pairing is lost",
                ));
            }
            column(&action_samples(&ens, &pf, potential, spec, m), 0)
        }
        VelocityComponent::Drift => {
            let shape = perturbation.shape;
            let pf = PerturbedField {
                base: fields,
                target: VelocityComponent::Drift,
                shape: move |x: f64| shape.eval(x),
                amplitude: perturbation.amplitude,
            };
            column(&action_samples(&base, &pf, potential, spec, m), 0)
        }
    };
    let diffs: Vec<f64> = perturbed_samples.iter().zip(&base_samples).map(|(p, b)| p - b).collect();
    let delta = Estimate::jackknife(&diffs);
    Ok(SaddleProbeReport {
        perturbation,
        delta_j_r: delta,
        base_j_r: Estimate::jackknife(&base_samples),
        verdict: verdict(&delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{StationaryField, UniformField};

    fn ho_setup(n: usize) -> (GridSpec, StationaryField, Vec<f64>) {
        let g = GridSpec::new(-8.0, 8.0, n, 1e-2).unwrap();
        let u: Vec<f64> = g.points().iter().map(|x| -x).collect();
        let raw: Vec<f64> = g.points().iter().map(|x| (-x * x).exp()).collect();
        let z = g.integrate(&raw);
        let rho = raw.iter().map(|r| r / z).collect();
        (g.clone(), StationaryField::new(g, u).unwrap(), rho)
    }

    #[test]
    fn constant_fields_give_constant_integrand() {
        let g = GridSpec::new(-50.0, 50.0, 1001, 1e-2).unwrap();
        let f = UniformField { grid: g.clone(), v: 2.0, u: 0.0 };
        let rho: Vec<f64> = g.points().iter().map(|x| if x.abs() < 1.0 { 0.5 } else { 0.0 }).collect();
        let rho = {
            let z = g.integrate(&rho);
            rho.iter().map(|r| r / z).collect::<Vec<_>>()
        };
        let cfg = SdeConfig::forward(1, 50, 1e-2, 0.0, 2.0);
        let ens = sample_forward(&f, PhysicalParams::default(), &cfg, &rho).unwrap();
        let est = estimate_action_functionals(
            &ens,
            &f,
            &PotentialSpec::Free,
            &ActionFunctionalSpec::new(2.0),
            PhysicalParams::default(),
        )
        .unwrap();
        assert!((est.j_r.value / 2.0 - 2.0).abs() < 1e-12);
        assert_eq!(est.j_i.value, 0.0);
        let e = estimate_mean_energy(&ens, &f, &PotentialSpec::Free, PhysicalParams::default()).unwrap();
        assert!(e.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn complex_route_matches_real_functional() {
        let (_, f, rho) = ho_setup(801);
        let cfg = SdeConfig::forward(3, 200, 1e-2, 0.0, 1.0);
        let ens = sample_forward(&f, PhysicalParams::default(), &cfg, &rho).unwrap();
        for q in [Quadrature::Trapezoid, Quadrature::Midpoint, Quadrature::ItoForward] {
            let spec = ActionFunctionalSpec {
                quadrature: q,
                ..ActionFunctionalSpec::new(1.0)
            };
            let est = estimate_action_functionals(&ens, &f, &PotentialSpec::harmonic(1.0, 1.0), &spec, PhysicalParams::default())
                .unwrap();
            assert!((est.j_complex_re.value - est.j_r.value).abs() < 1e-12);
            assert!((est.j_complex_im.value - est.j_i.value).abs() < 1e-12);
            assert_eq!(est.j_i.value, 0.0);
        }
    }

    #[test]
    fn horizon_mismatch_is_an_error() {
        let (_, f, rho) = ho_setup(801);
        let ens = sample_forward(&f, PhysicalParams::default(), &SdeConfig::forward(3, 10, 1e-2, 0.0, 1.0), &rho).unwrap();
        assert!(matches!(
            estimate_action_functionals(&ens, &f, &PotentialSpec::Free, &ActionFunctionalSpec::new(2.0), PhysicalParams::default()),
            Err(Error::HorizonMismatch(_))
        ));
    }

    #[test]
    fn zero_amplitude_probe_is_exactly_zero() {
        let (_, f, rho) = ho_setup(801);
        let cfg = SdeConfig::forward(9, 200, 1e-2, 0.0, 1.0);
        for target in [VelocityComponent::Drift, VelocityComponent::Osmotic] {
            let r = saddle_point_probe(
                &f,
                &PotentialSpec::harmonic(1.0, 1.0),
                &ActionFunctionalSpec::new(1.0),
                PhysicalParams::default(),
                &cfg,
                &rho,
                Perturbation {
                    target,
                    shape: ProbeShape::Linear { center: 0.0 },
                    amplitude: 0.0,
                },
            )
            .unwrap();
            assert_eq!(r.delta_j_r.value, 0.0);
            assert_eq!(r.verdict, SaddleVerdict::Unchanged);
        }
    }

    #[test]
    fn tilt_of_gaussian_is_gaussian() {
        let (g, _, rho) = ho_setup(1601);
        // u' = -x + 0.1 x = -0.9 x  → variance 1/(2·0.9)
        let t = tilted_density(&g, &rho, &ProbeShape::Linear { center: 0.0 }, 0.1, PhysicalParams::default());
        let var = g.integrate(&g.points().iter().zip(&t).map(|(x, r)| x * x * r).collect::<Vec<_>>());
        assert!((var - 1.0 / 1.8).abs() < 1e-4, "{var}");
        assert!((g.integrate(&t) - 1.0).abs() < 1e-12);
    }
}
