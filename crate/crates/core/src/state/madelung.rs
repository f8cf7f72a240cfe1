//! Hydrodynamic (Madelung) decomposition `ψ = √ρ exp(iS/ħ)` and the residuals
//! of the continuity and quantum Hamilton–Jacobi equations.

use std::f64::consts::PI;

use super::grid::{GridSpec, PhysicalParams};
use super::potential::PotentialSpec;
use super::wavefield::WaveField;
use crate::error::{Error, Result};

/// Points with `ρ < TRUST_FACTOR · ε` are flagged low-density.
pub const TRUST_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityFloor {
    Absolute(f64),
    /// Fraction of the largest density over all slices.
    RelativeToMax(f64),
}

impl Default for DensityFloor {
    fn default() -> Self {
        DensityFloor::RelativeToMax(1e-12)
    }
}

#[derive(Debug, Clone)]
pub struct MadelungFields {
    pub grid: GridSpec,
    pub params: PhysicalParams,
    pub times: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub action: Vec<Vec<f64>>,
    pub drift: Vec<Vec<f64>>,
    pub osmotic: Vec<Vec<f64>>,
    pub low_density: Vec<Vec<bool>>,
    pub density_floor: f64,
    /// `(time, x)` of interior points where the density fell below the floor.
    pub nodes: Vec<(f64, f64)>,
}

impl MadelungFields {
    pub fn node_detected(&self) -> bool {
        !self.nodes.is_empty()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Trusted means the point and both neighbours are above the low-density threshold.
    pub fn trusted(&self, k: usize, i: usize) -> bool {
        let n = self.grid.n_points;
        let flags = &self.low_density[k];
        !flags[i] && (i == 0 || !flags[i - 1]) && (i + 1 == n || !flags[i + 1])
    }

    /// Rows `(t, x, rho, S, v, u, flag_low_density)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,rho,S,v,u,flag_low_density\n");
        for (k, &t) in self.times.iter().enumerate() {
            for i in 0..self.grid.n_points {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    t,
                    self.grid.x(i),
                    self.rho[k][i],
                    self.action[k][i],
                    self.drift[k][i],
                    self.osmotic[k][i],
                    u8::from(self.low_density[k][i])
                ));
            }
        }
        out
    }

    /// Little-endian byte image of all stored fields, used for checksums.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [
            self.grid.x_min,
            self.grid.x_max,
            self.grid.dx,
            self.grid.dt_pde,
            self.params.mass,
            self.params.hbar,
            self.density_floor,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.grid.n_points as u64).to_le_bytes());
        for t in &self.times {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for block in [&self.rho, &self.action, &self.drift, &self.osmotic] {
            for row in block.iter() {
                for v in row {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Decomposes every slice of `field` into `ρ`, `S`, `v`, `u`.
///
/// The phase is unwrapped outward from the density maximum of each slice; the
/// global `2π` branch of that reference point is chosen to be continuous with
/// the previous slice so `∂ₜS` is meaningful.
pub fn madelung_decompose(
    field: &WaveField,
    params: PhysicalParams,
    floor: DensityFloor,
) -> Result<MadelungFields> {
    let grid = &field.grid;
    let n = grid.n_points;
    let rho: Vec<Vec<f64>> = (0..field.n_times()).map(|k| field.density(k)).collect();
    let max_rho = rho
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    let eps = match floor {
        DensityFloor::Absolute(e) => e,
        DensityFloor::RelativeToMax(f) => f * max_rho,
    };
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("density floor must be > 0, got {eps}")));
    }
    let hbar = params.hbar;
    let m = params.mass;

    let mut action = Vec::with_capacity(field.n_times());
    let mut drift = Vec::with_capacity(field.n_times());
    let mut osmotic = Vec::with_capacity(field.n_times());
    let mut low = Vec::with_capacity(field.n_times());
    let mut nodes = Vec::new();
    let mut prev_phase: Option<Vec<f64>> = None;

    for (k, psi) in field.psi.iter().enumerate() {
        let r = &rho[k];
        let raw: Vec<f64> = psi.iter().map(|c| c.arg()).collect();
        let i0 = r
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
            .0;
        let mut phase = vec![0.0; n];
        phase[i0] = match &prev_phase {
            Some(p) => raw[i0] + 2.0 * PI * ((p[i0] - raw[i0]) / (2.0 * PI)).round(),
            None => raw[i0],
        };
        for i in i0 + 1..n {
            phase[i] = phase[i - 1] + wrap_angle(raw[i] - raw[i - 1]);
        }
        for i in (0..i0).rev() {
            phase[i] = phase[i + 1] + wrap_angle(raw[i] - raw[i + 1]);
        }
        let s: Vec<f64> = phase.iter().map(|p| hbar * p).collect();
        let v: Vec<f64> = grid.derivative(&s).into_iter().map(|d| d / m).collect();
        let log_rho: Vec<f64> = r.iter().map(|&x| x.max(eps).ln()).collect();
        let u: Vec<f64> = grid
            .derivative(&log_rho)
            .into_iter()
            .map(|d| hbar / (2.0 * m) * d)
            .collect();
        let flags: Vec<bool> = r.iter().map(|&x| x < TRUST_FACTOR * eps).collect();

        let first = r.iter().position(|&x| x >= eps);
        let last = r.iter().rposition(|&x| x >= eps);
        if let (Some(a), Some(b)) = (first, last) {
            for i in a + 1..b {
                if r[i] < eps {
                    nodes.push((field.times[k], grid.x(i)));
                }
            }
        }

        action.push(s);
        drift.push(v);
        osmotic.push(u);
        low.push(flags);
        prev_phase = Some(phase);
    }

    Ok(MadelungFields {
        grid: grid.clone(),
        params,
        times: field.times.clone(),
        rho,
        action,
        drift,
        osmotic,
        low_density: low,
        density_floor: eps,
        nodes,
    })
}

/// Pointwise residuals of the Madelung equations on trusted interior points.
#[derive(Debug, Clone)]
pub struct MadelungResiduals {
    pub grid: GridSpec,
    /// Times of the slices where residuals were evaluated.
    pub times: Vec<f64>,
    /// Time weights `(t_{k+1} − t_{k−1})/2` for the L² norm.
    pub time_weights: Vec<f64>,
    /// `∂ₜρ + ∂ₓ(vρ)`; NaN where untrusted.
    pub continuity: Vec<Vec<f64>>,
    /// `∂ₜS + (∂ₓS)²/2m + V − (ħ²/2m) ∂ₓ²√ρ / √ρ`; NaN where untrusted.
    pub qhj: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub continuity_sup: f64,
    pub continuity_l2: f64,
    pub qhj_sup: f64,
    pub qhj_l2: f64,
    pub n_points: usize,
}

impl MadelungResiduals {
    pub fn norms(&self) -> ResidualNorms {
        self.norms_within(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Norms restricted to `x_lo ≤ x ≤ x_hi`.
    pub fn norms_within(&self, x_lo: f64, x_hi: f64) -> ResidualNorms {
        let mut out = ResidualNorms {
            continuity_sup: 0.0,
            continuity_l2: 0.0,
            qhj_sup: 0.0,
            qhj_l2: 0.0,
            n_points: 0,
        };
        let dx = self.grid.dx;
        for (k, w) in self.time_weights.iter().enumerate() {
            for i in 0..self.grid.n_points {
                let x = self.grid.x(i);
                if x < x_lo || x > x_hi {
                    continue;
                }
                let c = self.continuity[k][i];
                let q = self.qhj[k][i];
                if c.is_nan() || q.is_nan() {
                    continue;
                }
                out.n_points += 1;
                out.continuity_sup = out.continuity_sup.max(c.abs());
                out.qhj_sup = out.qhj_sup.max(q.abs());
                out.continuity_l2 += c * c * dx * w;
                out.qhj_l2 += q * q * dx * w;
            }
        }
        out.continuity_l2 = out.continuity_l2.sqrt();
        out.qhj_l2 = out.qhj_l2.sqrt();
        out
    }
}

pub fn madelung_residuals(
    fields: &MadelungFields,
    potential: &PotentialSpec,
) -> Result<MadelungResiduals> {
    let kt = fields.n_times();
    if kt < 3 {
        return Err(Error::InsufficientTimeSlices { needed: 3, got: kt });
    }
    let grid = &fields.grid;
    let n = grid.n_points;
    let dx = grid.dx;
    let m = fields.params.mass;
    let hbar = fields.params.hbar;
    let two_pi_hbar = 2.0 * PI * hbar;

    let mut times = Vec::with_capacity(kt - 2);
    let mut weights = Vec::with_capacity(kt - 2);
    let mut cont = Vec::with_capacity(kt - 2);
    let mut qhj = Vec::with_capacity(kt - 2);
    for k in 1..kt - 1 {
        let span = fields.times[k + 1] - fields.times[k - 1];
        let (rp, r0, rm) = (&fields.rho[k + 1], &fields.rho[k], &fields.rho[k - 1]);
        let (sp, sm) = (&fields.action[k + 1], &fields.action[k - 1]);
        let v = &fields.drift[k];
        let sqrt_rho: Vec<f64> = r0.iter().map(|r| r.sqrt()).collect();
        let mut c_row = vec![f64::NAN; n];
        let mut q_row = vec![f64::NAN; n];
        for i in 1..n - 1 {
            let ok = [k - 1, k, k + 1].iter().all(|&kk| fields.trusted(kk, i));
            if !ok {
                continue;
            }
            let dt_rho = (rp[i] - rm[i]) / span;
            let flux = (v[i + 1] * r0[i + 1] - v[i - 1] * r0[i - 1]) / (2.0 * dx);
            c_row[i] = dt_rho + flux;

            let ds = sp[i] - sm[i];
            let ds = ds - two_pi_hbar * (ds / two_pi_hbar).round();
            let dt_s = ds / span;
            let lap = (sqrt_rho[i + 1] - 2.0 * sqrt_rho[i] + sqrt_rho[i - 1]) / (dx * dx);
            let quantum = hbar * hbar / (2.0 * m) * lap / sqrt_rho[i];
            let x = grid.x(i);
            q_row[i] = dt_s + 0.5 * m * v[i] * v[i] + potential.value(x) - quantum;
        }
        times.push(fields.times[k]);
        weights.push(0.5 * span);
        cont.push(c_row);
        qhj.push(q_row);
    }
    Ok(MadelungResiduals {
        grid: grid.clone(),
        times,
        time_weights: weights,
        continuity: cont,
        qhj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::coherent::{harmonic_eigenstate, CoherentStateSpec};
    use num_complex::Complex64;

    fn unit() -> PhysicalParams {
        PhysicalParams::default()
    }

    fn ref_grid() -> GridSpec {
        GridSpec::new(-10.0, 10.0, 2001, 1e-3).unwrap()
    }

    #[test]
    fn plane_wave_fields() {
        let g = GridSpec::new(0.0, 10.0, 501, 1e-3).unwrap();
        let k = 1.3;
        let amp = (1.0 / 10.0f64).sqrt();
        let psi: Vec<Complex64> = g.points().iter().map(|x| Complex64::from_polar(amp, k * x)).collect();
        let wf = WaveField::single(g.clone(), 0.0, psi).unwrap();
        let f = madelung_decompose(&wf, unit(), DensityFloor::default()).unwrap();
        for i in 0..g.n_points {
            assert!((f.rho[0][i] - 0.1).abs() < 1e-14);
            assert!(f.osmotic[0][i].abs() < 1e-9);
            assert!((f.drift[0][i] - k).abs() < 1e-9);
        }
        // S = ħ k x up to a constant
        let c = f.action[0][0];
        for i in 0..g.n_points {
            assert!((f.action[0][i] - c - k * g.x(i)).abs() < 1e-9);
        }
        assert!(!f.node_detected());
    }

    #[test]
    fn ground_state_fields() {
        let g = ref_grid();
        let psi = harmonic_eigenstate(0, 1.0, unit(), 0.0, &g).unwrap();
        let wf = WaveField::single(g.clone(), 0.0, psi).unwrap();
        let f = madelung_decompose(&wf, unit(), DensityFloor::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 1..g.n_points - 1 {
            if f.trusted(0, i) {
                worst = worst.max((f.osmotic[0][i] + g.x(i)).abs());
                worst = worst.max(f.drift[0][i].abs());
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn first_excited_state_flags_node() {
        let g = ref_grid();
        let psi = harmonic_eigenstate(1, 1.0, unit(), 0.0, &g).unwrap();
        let wf = WaveField::single(g.clone(), 0.0, psi).unwrap();
        let f = madelung_decompose(&wf, unit(), DensityFloor::default()).unwrap();
        assert!(f.node_detected());
        assert!(f.nodes.iter().any(|&(_, x)| x.abs() < 1e-12));
        assert!(f.low_density[0][1000]);
        assert!(f.osmotic[0].iter().all(|u| u.is_finite()));
    }

    #[test]
    fn decomposition_matches_coherent_closed_form() {
        let g = GridSpec::new(-12.0, 12.0, 2401, 1e-3).unwrap();
        let s = CoherentStateSpec::new(1.0, 3.0, unit()).unwrap();
        for t in [0.0, 0.9, 2.2] {
            let wf = WaveField::single(g.clone(), t, s.wavefunction(t, &g).unwrap()).unwrap();
            let f = madelung_decompose(&wf, unit(), DensityFloor::default()).unwrap();
            let cf = s.velocity_fields(t);
            for i in 1..g.n_points - 1 {
                if !f.trusted(0, i) {
                    continue;
                }
                let x = g.x(i);
                assert!((f.drift[0][i] - cf.v(x)).abs() < 1e-3);
                assert!((f.osmotic[0][i] - cf.u(x)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn rewrapped_phase_matches_psi() {
        let g = GridSpec::new(-12.0, 12.0, 2401, 1e-3).unwrap();
        let s = CoherentStateSpec::new(1.0, 3.0, unit()).unwrap();
        let times = vec![0.0, 0.5, 1.0];
        let psi: Vec<_> = times.iter().map(|&t| s.wavefunction(t, &g).unwrap()).collect();
        let wf = WaveField::new(g.clone(), times, psi).unwrap();
        let f = madelung_decompose(&wf, unit(), DensityFloor::default()).unwrap();
        for k in 0..3 {
            for i in 0..g.n_points {
                if f.low_density[k][i] {
                    continue;
                }
                let d = wrap_angle(f.action[k][i] - wf.psi[k][i].arg());
                assert!(d.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn residuals_need_three_slices() {
        let g = ref_grid();
        let psi = harmonic_eigenstate(0, 1.0, unit(), 0.0, &g).unwrap();
        let wf = WaveField::single(g.clone(), 0.0, psi).unwrap();
        let f = madelung_decompose(&wf, unit(), DensityFloor::default()).unwrap();
        assert!(matches!(
            madelung_residuals(&f, &PotentialSpec::harmonic(1.0, 1.0)),
            Err(Error::InsufficientTimeSlices { .. })
        ));
    }

    #[test]
    fn static_ground_state_has_zero_continuity_residual() {
        let g = ref_grid();
        let times = vec![0.0, 0.01, 0.02];
        let psi: Vec<_> = times
            .iter()
            .map(|&t| harmonic_eigenstate(0, 1.0, unit(), t, &g).unwrap())
            .collect();
        let wf = WaveField::new(g.clone(), times, psi).unwrap();
        let f = madelung_decompose(&wf, unit(), DensityFloor::default()).unwrap();
        let r = madelung_residuals(&f, &PotentialSpec::harmonic(1.0, 1.0)).unwrap();
        let n = r.norms();
        assert!(n.continuity_sup < 1e-12, "{:?}", n);
        assert!(n.n_points > 1000);
    }

    /// Exact coherent-state fields: the residual is pure discretization error
    /// and must drop by ~4 when dx and dt are halved.
    #[test]
    fn coherent_residuals_converge_at_second_order() {
        let s = CoherentStateSpec::new(1.0, 3.0, unit()).unwrap();
        let v = s.harmonic_potential();
        let run = |n_points: usize, dt: f64| {
            let g = GridSpec::new(-10.0, 10.0, n_points, dt).unwrap();
            let times: Vec<f64> = (0..5).map(|k| 0.7 + k as f64 * dt).collect();
            let psi: Vec<_> = times.iter().map(|&t| s.wavefunction(t, &g).unwrap()).collect();
            let wf = WaveField::new(g, times, psi).unwrap();
            let f = madelung_decompose(&wf, unit(), DensityFloor::default()).unwrap();
            madelung_residuals(&f, &v).unwrap().norms_within(-2.0, 5.0)
        };
        let coarse = run(401, 0.04);
        let fine = run(801, 0.02);
        let rc = coarse.continuity_sup / fine.continuity_sup;
        let rq = coarse.qhj_sup / fine.qhj_sup;
        assert!(rc >= 3.5, "continuity ratio {rc}");
        assert!(rq >= 3.5, "qhj ratio {rq}");
    }
}
