//! Euler–Maruyama sampling of the forward and backward Nelson diffusions.
//!
//! Forward: `dx = (v + u) dt + √(ħ/m) dW`.
//! Backward: the time-reversed coordinate `y(s) = x(T − s)` is integrated
//! forward in `s` with drift `u − v`; paths are stored in physical time.

use rayon::prelude::*;

use super::ensemble::{BoundaryPolicy, Direction, SdeConfig, TrajectoryEnsemble};
use super::field::VelocityField;
use super::rng::{PathRng, DOMAIN_BACKWARD, DOMAIN_FORWARD};
use crate::error::{Error, Result};
use crate::state::{GridSpec, PhysicalParams};

/// Tolerance on `∫ρ dx = 1` for initial densities.
pub const INITIAL_NORM_TOLERANCE: f64 = 1e-6;

/// Inverse-CDF sampler on the piecewise-linear interpolant of the cumulative
/// trapezoid integral of a gridded density.
#[derive(Debug, Clone)]
pub struct GridCdf {
    grid: GridSpec,
    cumulative: Vec<f64>,
}

impl GridCdf {
    pub fn new(grid: &GridSpec, rho: &[f64]) -> Result<Self> {
        if rho.len() != grid.n_points {
            return Err(Error::invalid("density length does not match the grid"));
        }
        if rho.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::invalid("density must be finite and non-negative"));
        }
        let total = grid.integrate(rho);
        if (total - 1.0).abs() > INITIAL_NORM_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        let mut cumulative = grid.cumulative(rho);
        let last = *cumulative.last().unwrap();
        for c in cumulative.iter_mut() {
            *c /= last;
        }
        Ok(GridCdf {
            grid: grid.clone(),
            cumulative,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.grid.x_min {
            return 0.0;
        }
        if x >= self.grid.x_max {
            return 1.0;
        }
        let (i, a) = self.grid.locate(x);
        self.cumulative[i] + a * (self.cumulative[i + 1] - self.cumulative[i])
    }

    /// Maps a uniform variate to a position.
    pub fn quantile(&self, p: f64) -> f64 {
        let c = &self.cumulative;
        let i = c.partition_point(|&v| v < p).clamp(1, c.len() - 1);
        let (lo, hi) = (c[i - 1], c[i]);
        let frac = if hi > lo { ((p - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        self.grid.x(i - 1) + frac * self.grid.dx
    }
}

/// I.i.d. draws from `rho0`; draw `k` uses the first word of path stream `k`.
pub fn sample_initial_positions(
    grid: &GridSpec,
    rho0: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let cdf = GridCdf::new(grid, rho0)?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|k| cdf.quantile(PathRng::new(seed, DOMAIN_FORWARD, k).uniform()))
        .collect())
}

struct PathOutcome {
    positions: Vec<f64>,
    absorbed_at: Option<f64>,
}

fn reflect_into(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let mut y = (x - lo).rem_euclid(2.0 * width);
    if y > width {
        y = 2.0 * width - y;
    }
    lo + y
}

#[allow(clippy::too_many_arguments)]
fn run_path<F: VelocityField + ?Sized>(
    field: &F,
    cdf: &GridCdf,
    sigma: f64,
    config: &SdeConfig,
    domain: u64,
    k: u64,
) -> PathOutcome {
    let n_steps = config.n_steps();
    let dt = config.effective_dt();
    let sq = dt.sqrt();
    let grid = field.grid();
    let (lo, hi) = (grid.x_min, grid.x_max);
    let backward = config.direction == Direction::Backward;
    let every = config.record_every;

    let mut rng = PathRng::new(config.seed, domain, k);
    let mut x = cdf.quantile(rng.uniform());
    // keep step draws on even word offsets
    let _ = rng.uniform();
    let mut positions = Vec::with_capacity(n_steps / every + 1);
    positions.push(x);
    let mut absorbed_at = None;
    for s in 0..n_steps {
        let z = rng.normal();
        if absorbed_at.is_some() {
            if (s + 1) % every == 0 {
                positions.push(x);
            }
            continue;
        }
        let (t, drift) = if backward {
            let t = config.t_end - s as f64 * dt;
            let (v, u) = field.velocities(x, t);
            (t, u - v)
        } else {
            let t = config.t_start + s as f64 * dt;
            let (v, u) = field.velocities(x, t);
            (t, v + u)
        };
        let t_next = if backward { t - dt } else { t + dt };
        if !drift.is_finite() {
            absorbed_at = Some(t);
        } else {
            let mut y = x + drift * dt + sigma * sq * z;
            if !y.is_finite() {
                absorbed_at = Some(t_next);
            } else if y < lo || y > hi {
                match config.boundary_policy {
                    BoundaryPolicy::Reflect => y = reflect_into(y, lo, hi),
                    BoundaryPolicy::Absorb => {
                        y = y.clamp(lo, hi);
                        absorbed_at = Some(t_next);
                    }
                }
            }
            if y.is_finite() {
                x = y;
            }
        }
        if (s + 1) % every == 0 {
            positions.push(x);
        }
    }
    if backward {
        positions.reverse();
    }
    PathOutcome {
        positions,
        absorbed_at,
    }
}

fn sample<F: VelocityField + ?Sized>(
    field: &F,
    params: PhysicalParams,
    config: &SdeConfig,
    rho_start: &[f64],
    direction: Direction,
) -> Result<TrajectoryEnsemble> {
    if config.direction != direction {
        return Err(Error::invalid(format!(
            "configuration direction is {:?}, sampler expects {direction:?}",
            config.direction
        )));
    }
    let grid = field.grid();
    config.validate(grid.dt_pde)?;
    let (t_min, t_max) = field.time_range();
    if config.t_start < t_min || config.t_end > t_max {
        return Err(Error::FieldCoverage {
            t_start: config.t_start,
            t_end: config.t_end,
            t_min,
            t_max,
        });
    }
    let cdf = GridCdf::new(grid, rho_start)?;
    let sigma = params.noise_amplitude();
    let domain = match direction {
        Direction::Forward => DOMAIN_FORWARD,
        Direction::Backward => DOMAIN_BACKWARD,
    };
    let outcomes: Vec<PathOutcome> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|k| run_path(field, &cdf, sigma, config, domain, k))
        .collect();

    let n_steps = config.n_steps();
    let dt = config.effective_dt();
    let times: Vec<f64> = (0..=n_steps)
        .step_by(config.record_every)
        .map(|s| config.t_start + s as f64 * dt)
        .collect();
    let mut paths = Vec::with_capacity(times.len() * config.n_paths);
    let mut absorbed_at = Vec::with_capacity(config.n_paths);
    for o in outcomes {
        debug_assert_eq!(o.positions.len(), times.len());
        paths.extend_from_slice(&o.positions);
        absorbed_at.push(o.absorbed_at);
    }
    Ok(TrajectoryEnsemble {
        times,
        paths,
        n_paths: config.n_paths,
        direction,
        seed: config.seed,
        stream_ids: (0..config.n_paths as u64).collect(),
        absorbed_at,
        dt_sde: dt,
    })
}

/// Forward diffusion started from `rho0` at `config.t_start`.
pub fn sample_forward<F: VelocityField + ?Sized>(
    field: &F,
    params: PhysicalParams,
    config: &SdeConfig,
    rho0: &[f64],
) -> Result<TrajectoryEnsemble> {
    sample(field, params, config, rho0, Direction::Forward)
}

/// Backward diffusion started from `rho_t` at `config.t_end`.
pub fn sample_backward<F: VelocityField + ?Sized>(
    field: &F,
    params: PhysicalParams,
    config: &SdeConfig,
    rho_t: &[f64],
) -> Result<TrajectoryEnsemble> {
    sample(field, params, config, rho_t, Direction::Backward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::field::{StationaryField, UniformField};

    fn gaussian_rho(grid: &GridSpec, var: f64) -> Vec<f64> {
        let raw: Vec<f64> = grid.points().iter().map(|x| (-x * x / (2.0 * var)).exp()).collect();
        let z = grid.integrate(&raw);
        raw.into_iter().map(|r| r / z).collect()
    }

    #[test]
    fn initial_draws_match_ground_state_variance() {
        let g = GridSpec::new(-10.0, 10.0, 2001, 1e-3).unwrap();
        let rho = gaussian_rho(&g, 0.5);
        let n = 100_000;
        let xs = sample_initial_positions(&g, &rho, n, 11).unwrap();
        let e = crate::numerics::Estimate::from_samples(
            &xs.iter().map(|x| x * x).collect::<Vec<_>>(),
        );
        // Var(x²) = 2σ⁴ for a centred Gaussian.
        let se = (2.0 * 0.25 / n as f64).sqrt();
        assert!((e.value - 0.5).abs() < 3.0 * se, "{} vs 0.5 ± {se}", e.value);
    }

    #[test]
    fn single_hot_node_keeps_draws_local() {
        let g = GridSpec::new(0.0, 1.0, 101, 1e-3).unwrap();
        let mut rho = vec![0.0; 101];
        rho[40] = 1.0 / g.dx;
        let xs = sample_initial_positions(&g, &rho, 1000, 3).unwrap();
        assert!(xs.iter().all(|&x| (x - g.x(40)).abs() <= g.dx + 1e-12));
    }

    #[test]
    fn same_seed_same_draws() {
        let g = GridSpec::new(-10.0, 10.0, 2001, 1e-3).unwrap();
        let rho = gaussian_rho(&g, 0.5);
        let a = sample_initial_positions(&g, &rho, 500, 5).unwrap();
        let b = sample_initial_positions(&g, &rho, 500, 5).unwrap();
        let c = sample_initial_positions(&g, &rho, 500, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unnormalized_density_is_rejected() {
        let g = GridSpec::new(-1.0, 1.0, 101, 1e-3).unwrap();
        assert!(matches!(
            sample_initial_positions(&g, &vec![1.0; 101], 10, 0),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn zero_noise_follows_the_ode() {
        let g = GridSpec::new(-10.0, 10.0, 2001, 1e-3).unwrap();
        let u: Vec<f64> = g.points().iter().map(|x| -x).collect();
        let f = StationaryField::new(g.clone(), u).unwrap();
        let mut rho = vec![0.0; 2001];
        rho[1200] = 1.0 / g.dx; // x = 2
        let quiet = PhysicalParams::new(1.0, 1e-300).unwrap();
        let cfg = SdeConfig::forward(1, 8, 1e-3, 0.0, 1.0);
        let ens = sample_forward(&f, quiet, &cfg, &rho).unwrap();
        let cfg_b = SdeConfig::backward(1, 8, 1e-3, 0.0, 1.0);
        for k in 0..8 {
            let x0 = ens.position(k, 0);
            // Euler on dx = -x dt
            let expect = x0 * (1.0 - 1e-3f64).powi(1000);
            assert!((ens.position(k, 1000) - expect).abs() < 1e-12);
        }
        // backward with v = 0: reversed drift u - v = -y, i.e. the same contraction read backward
        let back = sample_backward(&f, quiet, &cfg_b, &rho).unwrap();
        for k in 0..8 {
            let x_t = back.position(k, 1000);
            let expect = x_t * (1.0 - 1e-3f64).powi(1000);
            assert!((back.position(k, 0) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_backward_retraces_forward_for_pure_current() {
        // v = const, u = 0: forward moves right, backward (drift u - v) reversed in time
        // lands on the same straight line.
        let g = GridSpec::new(-10.0, 10.0, 2001, 1e-3).unwrap();
        let f = UniformField { grid: g.clone(), v: 1.5, u: 0.0 };
        let quiet = PhysicalParams::new(1.0, 1e-300).unwrap();
        let mut rho0 = vec![0.0; 2001];
        rho0[1000] = 1.0 / g.dx;
        let fwd = sample_forward(&f, quiet, &SdeConfig::forward(2, 4, 1e-3, 0.0, 2.0), &rho0).unwrap();
        let end = fwd.position(0, fwd.n_times() - 1);
        let mut rho_t = vec![0.0; 2001];
        let (i, _) = g.locate(end + 0.5 * g.dx);
        rho_t[i] = 1.0 / g.dx;
        let bwd = sample_backward(&f, quiet, &SdeConfig::backward(2, 4, 1e-3, 0.0, 2.0), &rho_t).unwrap();
        for k in 0..4 {
            let xt = bwd.position(k, bwd.n_times() - 1);
            for j in (0..bwd.n_times()).step_by(250) {
                let expect = xt - 1.5 * (2.0 - bwd.times[j]);
                assert!((bwd.position(k, j) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coverage_and_direction_errors() {
        let g = GridSpec::new(-5.0, 5.0, 101, 1e-2).unwrap();
        let rho = gaussian_rho(&g, 0.5);
        let f = crate::kinematics::field::CoherentField {
            spec: crate::state::CoherentStateSpec::ground(1.0, PhysicalParams::default()).unwrap(),
            grid: g.clone(),
            t_range: (0.0, 1.0),
        };
        let p = PhysicalParams::default();
        assert!(matches!(
            sample_forward(&f, p, &SdeConfig::forward(0, 4, 1e-2, 0.0, 2.0), &rho),
            Err(Error::FieldCoverage { .. })
        ));
        assert!(sample_forward(&f, p, &SdeConfig::backward(0, 4, 1e-2, 0.0, 1.0), &rho).is_err());
        // dt_sde above dt_pde
        assert!(sample_forward(&f, p, &SdeConfig::forward(0, 4, 2e-2, 0.0, 1.0), &rho).is_err());
        // record stride must divide the step count
        assert!(sample_forward(
            &f,
            p,
            &SdeConfig::forward(0, 4, 1e-2, 0.0, 1.0).with_record_every(7),
            &rho
        )
        .is_err());
    }

    #[test]
    fn nan_drift_marks_path_absorbed() {
        let g = GridSpec::new(-5.0, 5.0, 101, 1e-2).unwrap();
        let f = UniformField { grid: g.clone(), v: f64::NAN, u: 0.0 };
        let rho = gaussian_rho(&g, 0.5);
        let ens = sample_forward(&f, PhysicalParams::default(), &SdeConfig::forward(0, 3, 1e-2, 0.0, 0.5), &rho)
            .unwrap();
        assert!((0..3).all(|k| ens.is_absorbed(k)));
        assert!(ens.paths.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn absorbing_walls_stop_paths() {
        let g = GridSpec::new(-1.0, 1.0, 101, 1e-2).unwrap();
        let f = UniformField { grid: g.clone(), v: 5.0, u: 0.0 };
        let rho = gaussian_rho(&g, 0.01);
        let cfg = SdeConfig::forward(0, 50, 1e-2, 0.0, 2.0).with_boundary(BoundaryPolicy::Absorb);
        let ens = sample_forward(&f, PhysicalParams::default(), &cfg, &rho).unwrap();
        assert!((0..50).all(|k| ens.is_absorbed(k)));
        assert!((0..50).all(|k| ens.position(k, ens.n_times() - 1) == 1.0));
    }

    #[test]
    fn reflection_stays_in_domain() {
        assert!((reflect_into(1.2, -1.0, 1.0) - 0.8).abs() < 1e-12);
        assert!((reflect_into(-1.5, -1.0, 1.0) + 0.5).abs() < 1e-12);
        assert!((reflect_into(3.5, -1.0, 1.0) + 0.5).abs() < 1e-12);
    }
}
