//! Ground states from the Riccati form of the stationary Nelson–Newton law,
//! `(m/2) u² + (ħ/2) u′ = V(x) − E`, shooting on the energy `E`.

use serde::Serialize;

use crate::analysis::{ks_distance, KsReport};
use crate::error::{Error, Result};
use crate::kinematics::{sample_forward, SdeConfig, StationaryField};
use crate::state::{GridSpec, PhysicalParams, PotentialSpec};

/// Sup-norm bound on the Riccati residual for an accepted solution.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
/// KS budget for the sampling cross-check.
pub const STATIONARY_KS_BUDGET: f64 = 0.02;

const RK_RTOL: f64 = 1e-12;
const RK_ATOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const RUN_IN_DECAY_LENGTHS: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySolution {
    pub grid: GridSpec,
    pub params: PhysicalParams,
    pub energy: f64,
    pub tol: f64,
    pub u_profile: Vec<f64>,
    pub rho: Vec<f64>,
    /// Bracket width reached `tol` and the residual check passed.
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the Riccati residual on the interior nodes.
    pub residual_sup: f64,
    /// Number of sign changes of `u` on the grid.
    pub osmotic_zeros: usize,
    /// Defect `u_L(x_m) − u_R(x_m)` at the returned energy.
    pub defect: f64,
}

impl StationarySolution {
    /// CSV columns `x, u, rho`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,u,rho\n");
        for i in 0..self.grid.n_points {
            s.push_str(&format!("{},{},{}\n", self.grid.x(i), self.u_profile[i], self.rho[i]));
        }
        s
    }

    /// JSON object `{E, tol, iterations, residual_sup}`.
    pub fn summary_json(&self) -> String {
        serde_json::json!({
            "E": self.energy,
            "tol": self.tol,
            "iterations": self.iterations,
            "residual_sup": self.residual_sup,
            "converged": self.converged,
        })
        .to_string()
    }
}

struct Riccati<'a> {
    potential: &'a PotentialSpec,
    params: PhysicalParams,
    energy: f64,
}

impl Riccati<'_> {
    #[inline]
    fn rhs(&self, x: f64, u: f64) -> f64 {
        let m = self.params.mass;
        2.0 / self.params.hbar * (self.potential.value(x) - self.energy - 0.5 * m * u * u)
    }

    /// Decaying WKB start `∓√(2(V − E)/m) − (ħ/4m) V′/(V − E)`; `sign` is +1 on the left edge.
    fn wkb_start(&self, x: f64, sign: f64) -> Result<f64> {
        let m = self.params.mass;
        let gap = self.potential.value(x) - self.energy;
        if !(gap > 0.0) {
            return Err(Error::invalid(format!(
                "potential at the boundary x = {x} does not exceed the trial energy {}",
                self.energy
            )));
        }
        let dv = -self.potential.force(x);
        Ok(sign * (2.0 * gap / m).sqrt() - self.params.hbar / (4.0 * m) * dv / gap)
    }
}

/// Dormand–Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince from `x0` to `x1` (either direction). Returns `None`
/// when `|u|` exceeds `bound` or the step size collapses.
fn dopri<Fn: std::ops::Fn(f64, f64) -> f64>(f: &Fn, x0: f64, x1: f64, u0: f64, bound: f64) -> Option<f64> {
    let span = x1 - x0;
    if span == 0.0 {
        return Some(u0);
    }
    let dir = span.signum();
    let mut h = span;
    let mut x = x0;
    let mut u = u0;
    let h_min = span.abs() * 1e-12;
    while (x1 - x) * dir > 0.0 {
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        let mut k = [0.0; 7];
        for s in 0..7 {
            let mut us = u;
            for (r, ks) in k.iter().enumerate().take(s) {
                us += h * A[s][r] * ks;
            }
            k[s] = f(x + C[s] * h, us);
        }
        let mut u5 = u;
        let mut u4 = u;
        for s in 0..7 {
            u5 += h * B5[s] * k[s];
            u4 += h * B4[s] * k[s];
        }
        let scale = RK_ATOL + RK_RTOL * u.abs().max(u5.abs());
        let err = ((u5 - u4) / scale).abs();
        if !u5.is_finite() || !err.is_finite() {
            h *= 0.25;
        } else if err <= 1.0 {
            x = if (x1 - (x + h)) * dir <= 0.0 { x1 } else { x + h };
            u = u5;
            if u.abs() > bound {
                return None;
            }
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
        if h.abs() < h_min {
            return None;
        }
    }
    Some(u)
}

struct Shot {
    u_left: Vec<f64>,
    u_right: Vec<f64>,
    defect: f64,
}

/// Integrates from both edges to the matching node `i_m`.
fn shoot(potential: &PotentialSpec, params: PhysicalParams, grid: &GridSpec, energy: f64, i_m: usize) -> Result<Shot> {
    let r = Riccati {
        potential,
        params,
        energy,
    };
    let n = grid.n_points;
    let width = grid.x_max - grid.x_min;
    let v_span = grid
        .points()
        .iter()
        .map(|&x| (potential.value(x) - energy).abs())
        .fold(0.0, f64::max);
    let bound = 100.0 * ((2.0 * v_span / params.mass).sqrt() + params.hbar / (params.mass * width));
    let f = |x: f64, u: f64| r.rhs(x, u);
    let node = |x: f64| Error::NodeEncountered { x, energy };

    // Start a few decay lengths outside the grid so the error of the WKB
    // start value has died out by the first node.
    let run_in = |x: f64, sign: f64| -> Result<f64> {
        let u0 = r.wkb_start(x, sign)?;
        let decay = params.hbar / (2.0 * params.mass * u0.abs().max(1e-300));
        let x_start = x - sign * (RUN_IN_DECAY_LENGTHS * decay).min(width);
        let u_start = r.wkb_start(x_start, sign)?;
        dopri(&f, x_start, x, u_start, bound).ok_or_else(|| node(x))
    };

    let mut u_left = Vec::with_capacity(i_m + 1);
    let mut u = run_in(grid.x_min, 1.0)?;
    u_left.push(u);
    for i in 0..i_m {
        u = dopri(&f, grid.x(i), grid.x(i + 1), u, bound).ok_or_else(|| node(grid.x(i + 1)))?;
        u_left.push(u);
    }
    let mut u_right = vec![0.0; n - i_m];
    let mut u = run_in(grid.x_max, -1.0)?;
    u_right[n - 1 - i_m] = u;
    for i in (i_m..n - 1).rev() {
        u = dopri(&f, grid.x(i + 1), grid.x(i), u, bound).ok_or_else(|| node(grid.x(i)))?;
        u_right[i - i_m] = u;
    }
    let defect = u_left[i_m] - u_right[0];
    Ok(Shot {
        u_left,
        u_right,
        defect,
    })
}

/// `ρ ∝ exp((2m/ħ) ∫ u dx)` via a log-domain cumulative trapezoid, normalized on the grid.
pub fn density_from_osmotic(u_profile: &[f64], grid: &GridSpec, params: PhysicalParams) -> Result<Vec<f64>> {
    if u_profile.len() != grid.n_points {
        return Err(Error::invalid("osmotic profile length does not match the grid"));
    }
    if u_profile.iter().any(|u| !u.is_finite()) {
        return Err(Error::invalid("osmotic profile must be finite"));
    }
    let scale = 2.0 * params.mass / params.hbar;
    let log_rho: Vec<f64> = grid.cumulative(u_profile).iter().map(|c| scale * c).collect();
    let top = log_rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_rho.iter().map(|l| (l - top).exp()).collect();
    let z = grid.integrate(&raw);
    Ok(raw.into_iter().map(|r| r / z).collect())
}

/// Residual `(m/2)u² + (ħ/2)u′ − V + E` on interior nodes, with `u′` from
/// fourth-order central differences.
pub fn riccati_residual(
    u: &[f64],
    grid: &GridSpec,
    potential: &PotentialSpec,
    params: PhysicalParams,
    energy: f64,
) -> Vec<f64> {
    let n = grid.n_points;
    let h = grid.dx;
    (2..n - 2)
        .map(|i| {
            let du = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) / (12.0 * h);
            0.5 * params.mass * u[i] * u[i] + 0.5 * params.hbar * du - potential.value(grid.x(i)) + energy
        })
        .collect()
}

fn sign_changes(u: &[f64]) -> usize {
    let signs: Vec<f64> = u.iter().filter(|v| **v != 0.0).map(|v| v.signum()).collect();
    // exact zeros are skipped, so passing through zero counts once
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Node of the potential minimum. Degenerate global minima (symmetric double
/// wells) are matched at the node nearest their midpoint, so neither shot has
/// to pass the other well.
fn matching_node(potential: &PotentialSpec, grid: &GridSpec) -> usize {
    let xs = grid.points();
    let vs = potential.sample(&xs);
    let v_min = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-9 * (1.0 + v_min.abs());
    let first = vs.iter().position(|v| *v <= v_min + slack).unwrap_or(0);
    let last = vs.iter().rposition(|v| *v <= v_min + slack).unwrap_or(0);
    let mid = 0.5 * (xs[first] + xs[last]);
    let (i, a) = grid.locate(mid);
    let i = if a > 0.5 { i + 1 } else { i };
    i.clamp(2, grid.n_points - 3)
}

/// Bisection on the matching defect for the node-free ground state.
pub fn solve_stationary_ground(
    potential: &PotentialSpec,
    params: PhysicalParams,
    e_bracket: (f64, f64),
    grid: &GridSpec,
    tol: f64,
) -> Result<StationarySolution> {
    potential.validate()?;
    let (mut e_lo, mut e_hi) = e_bracket;
    if !(e_lo < e_hi) || !e_lo.is_finite() || !e_hi.is_finite() {
        return Err(Error::invalid("energy bracket must satisfy E_lo < E_hi"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be > 0"));
    }
    let (v_left, v_right) = (potential.value(grid.x_min), potential.value(grid.x_max));
    if !(v_left > e_hi && v_right > e_hi) {
        return Err(Error::invalid(format!(
            "potential is not confining on the grid: V(x_min) = {v_left}, V(x_max) = {v_right}, E_hi = {e_hi}"
        )));
    }
    let i_m = matching_node(potential, grid);

    let d_lo = shoot(potential, params, grid, e_lo, i_m)?.defect;
    let d_hi = shoot(potential, params, grid, e_hi, i_m)?.defect;
    if d_lo.signum() == d_hi.signum() && d_lo != 0.0 && d_hi != 0.0 {
        return Err(Error::NoBracket { e_lo, e_hi, d_lo, d_hi });
    }
    let decreasing = d_lo > d_hi;
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        let mid = 0.5 * (e_lo + e_hi);
        if mid <= e_lo || mid >= e_hi {
            break;
        }
        iterations += 1;
        let d = shoot(potential, params, grid, mid, i_m)?.defect;
        if d == 0.0 {
            e_lo = mid;
            e_hi = mid;
            break;
        }
        if (d > 0.0) == decreasing {
            e_lo = mid;
        } else {
            e_hi = mid;
        }
    }
    let energy = 0.5 * (e_lo + e_hi);
    let shot = shoot(potential, params, grid, energy, i_m)?;
    let mut u_profile = shot.u_left;
    u_profile[i_m] = 0.5 * (u_profile[i_m] + shot.u_right[0]);
    u_profile.extend_from_slice(&shot.u_right[1..]);

    let rho = density_from_osmotic(&u_profile, grid, params)?;
    let residual_sup = riccati_residual(&u_profile, grid, potential, params, energy)
        .iter()
        .fold(0.0f64, |a, r| a.max(r.abs()));
    let osmotic_zeros = sign_changes(&u_profile);
    Ok(StationarySolution {
        grid: grid.clone(),
        params,
        energy,
        tol,
        u_profile,
        rho,
        converged: (e_hi - e_lo) <= tol && residual_sup < RESIDUAL_TOLERANCE,
        iterations,
        residual_sup,
        osmotic_zeros,
        defect: shot.defect,
    })
}

/// Samples `dx = u dt + √(ħ/m) dW` from `ρ` and compares the final marginal to `ρ`.
pub fn verify_stationary_by_sampling(solution: &StationarySolution, config: &SdeConfig) -> Result<KsReport> {
    let grid = solution.grid.with_dt_pde(config.dt_sde.max(solution.grid.dt_pde))?;
    let field = StationaryField::new(grid.clone(), solution.u_profile.clone())?;
    let ens = sample_forward(&field, solution.params, config, &solution.rho)?;
    let cdf = crate::kinematics::GridCdf::new(&grid, &solution.rho)?;
    let xs = ens.live_column(ens.n_times() - 1);
    let statistic = ks_distance(&xs, |x| cdf.cdf(x))?;
    Ok(KsReport {
        statistic,
        n_samples: xs.len(),
        threshold: STATIONARY_KS_BUDGET,
        passed: statistic < STATIONARY_KS_BUDGET,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_ground_state() {
        let g = GridSpec::new(-8.0, 8.0, 801, 1e-3).unwrap();
        let p = PhysicalParams::default();
        let s = solve_stationary_ground(&PotentialSpec::harmonic(1.0, 1.0), p, (0.1, 1.2), &g, 1e-10).unwrap();
        assert!((s.energy - 0.5).abs() < 1e-6, "{}", s.energy);
        assert!(s.converged, "residual {}", s.residual_sup);
        let err = (40..761).map(|i| (s.u_profile[i] + g.x(i)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        assert_eq!(s.osmotic_zeros, 1);
    }

    #[test]
    fn bracket_without_sign_change() {
        let g = GridSpec::new(-8.0, 8.0, 401, 1e-3).unwrap();
        let r = solve_stationary_ground(&PotentialSpec::harmonic(1.0, 1.0), PhysicalParams::default(), (0.6, 1.2), &g, 1e-8);
        assert!(matches!(r, Err(Error::NoBracket { .. })));
    }

    #[test]
    fn pole_past_the_first_excited_level() {
        let g = GridSpec::new(-8.0, 8.0, 401, 1e-3).unwrap();
        let r = solve_stationary_ground(&PotentialSpec::harmonic(1.0, 1.0), PhysicalParams::default(), (0.1, 2.0), &g, 1e-8);
        assert!(matches!(r, Err(Error::NodeEncountered { .. })), "{r:?}");
    }

    #[test]
    fn double_well_osmotic_is_odd() {
        let g = GridSpec::new(-5.0, 5.0, 1001, 1e-3).unwrap();
        let v = PotentialSpec::DoubleWell { a: 1.0, b: 1.0 };
        let s = solve_stationary_ground(&v, PhysicalParams::default(), (0.3, 1.5), &g, 1e-10).unwrap();
        let n = g.n_points;
        let asym = (0..n).map(|i| (s.u_profile[i] + s.u_profile[n - 1 - i]).abs()).fold(0.0, f64::max);
        assert!(asym < 1e-6, "{asym}");
        assert!(s.converged);
    }

    #[test]
    fn density_of_linear_osmotic_is_gaussian() {
        let g = GridSpec::new(-8.0, 8.0, 1601, 1e-3).unwrap();
        let u: Vec<f64> = g.points().iter().map(|x| -x).collect();
        let rho = density_from_osmotic(&u, &g, PhysicalParams::default()).unwrap();
        let var = g.integrate(&g.points().iter().zip(&rho).map(|(x, r)| x * x * r).collect::<Vec<_>>());
        assert!((var - 0.5).abs() < 1e-4);
        let flat = density_from_osmotic(&vec![0.0; 1601], &g, PhysicalParams::default()).unwrap();
        assert!(flat.iter().all(|r| (r - 1.0 / 16.0).abs() < 1e-12));
    }

    #[test]
    fn density_round_trip() {
        let g = GridSpec::new(-3.0, 3.0, 601, 1e-3).unwrap();
        let u: Vec<f64> = g.points().iter().map(|x| -2.0 * x + 0.3).collect();
        let rho = density_from_osmotic(&u, &g, PhysicalParams::default()).unwrap();
        let ln: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
        let back = g.derivative(&ln);
        let err = (1..600).map(|i| (0.5 * back[i] - u[i]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }
}
