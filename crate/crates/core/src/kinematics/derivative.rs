//! Conditional finite-difference estimators of the mean forward and backward
//! derivatives, and the stochastic Newton law built from them.

use serde::Serialize;

use super::ensemble::{Direction, TrajectoryEnsemble};
use super::field::VelocityField;
use crate::error::{Error, Result};
use crate::numerics::Estimate;
use crate::state::PotentialSpec;

/// Bins with fewer paths than this are reported but flagged untrusted.
pub const MIN_BIN_PATHS: usize = 50;

/// Position bins `[lo + i·width, lo + (i+1)·width)`, edges on multiples of `width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bins {
    pub lo: f64,
    pub width: f64,
    pub n: usize,
}

impl Bins {
    pub fn new(x_lo: f64, x_hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() || !(x_hi > x_lo) {
            return Err(Error::invalid("bins need width > 0 and x_lo < x_hi"));
        }
        let lo = (x_lo / width).floor() * width;
        let n = (((x_hi - lo) / width).floor() as usize) + 1;
        Ok(Bins { lo, width, n })
    }

    /// Bins spanning the range of `xs`.
    pub fn covering(xs: &[f64], width: f64) -> Result<Self> {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        Bins::new(lo, hi.max(lo + width * 0.5), width)
    }

    pub fn index(&self, x: f64) -> Option<usize> {
        let i = ((x - self.lo) / self.width).floor();
        if i >= 0.0 && (i as usize) < self.n {
            Some(i as usize)
        } else {
            None
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width
    }
}

/// Per-bin conditional estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedEstimate {
    pub bins: Bins,
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub counts: Vec<usize>,
    pub trusted: Vec<bool>,
    /// Time lag actually used (a whole number of stored steps).
    pub delta_t: f64,
}

impl BinnedEstimate {
    fn from_groups(bins: Bins, groups: Vec<Vec<f64>>, delta_t: f64) -> Self {
        let mut out = BinnedEstimate {
            bins,
            centers: Vec::with_capacity(bins.n),
            values: Vec::with_capacity(bins.n),
            stderrs: Vec::with_capacity(bins.n),
            counts: Vec::with_capacity(bins.n),
            trusted: Vec::with_capacity(bins.n),
            delta_t,
        };
        for (i, g) in groups.iter().enumerate() {
            let (value, se) = if g.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let e = Estimate::from_samples(g);
                (e.value, e.stderr)
            };
            out.centers.push(bins.center(i));
            out.values.push(value);
            out.stderrs.push(se);
            out.counts.push(g.len());
            out.trusted.push(g.len() >= MIN_BIN_PATHS);
        }
        out
    }

    /// Indices of trusted bins.
    pub fn trusted_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.values.len()).filter(|&i| self.trusted[i])
    }

    /// CSV columns `x, estimate, stderr, count, trusted`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,estimate,stderr,count,trusted\n");
        for i in 0..self.values.len() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                self.centers[i], self.values[i], self.stderrs[i], self.counts[i], self.trusted[i] as u8
            ));
        }
        s
    }
}

/// Resolves `(t, delta_t)` to stored-time indices `(j, lag)`.
fn resolve_lag(ens: &TrajectoryEnsemble, t: f64, delta_t: f64, derivative: Direction) -> Result<(usize, usize)> {
    if !(delta_t >= ens.dt_sde * (1.0 - 1e-9)) {
        return Err(Error::invalid(format!(
            "delta_t = {delta_t} is below the SDE step {}",
            ens.dt_sde
        )));
    }
    let j = ens.time_index(t)?;
    let lag = ((delta_t / ens.record_dt()).round() as usize).max(1);
    let ok = match derivative {
        Direction::Forward => j + lag < ens.n_times(),
        Direction::Backward => j >= lag,
    };
    if !ok {
        let (t_min, t_max) = (ens.times[0], ens.times[ens.n_times() - 1]);
        let t_bad = match derivative {
            Direction::Forward => t + delta_t,
            Direction::Backward => t - delta_t,
        };
        return Err(Error::TimeOutOfRange { t: t_bad, t_min, t_max });
    }
    Ok((j, lag))
}

/// Generic conditional increment `E[g(x(t±Δ), t±Δ) − g(x(t), t) | x(t)] / Δ`
/// binned on `x(t)`, signed so that the backward version is
/// `E[g(x(t), t) − g(x(t−Δ), t−Δ) | x(t)] / Δ`.
fn conditional_increment<G: Fn(f64, f64) -> f64>(
    ens: &TrajectoryEnsemble,
    bins: Bins,
    j: usize,
    lag: usize,
    derivative: Direction,
    g: G,
) -> BinnedEstimate {
    let j_other = match derivative {
        Direction::Forward => j + lag,
        Direction::Backward => j - lag,
    };
    let t = ens.times[j];
    let t_other = ens.times[j_other];
    let dt = (t_other - t).abs();
    let mut groups = vec![Vec::new(); bins.n];
    for k in 0..ens.n_paths {
        if !ens.alive_at(k, t) || !ens.alive_at(k, t_other) {
            continue;
        }
        let x = ens.position(k, j);
        let Some(b) = bins.index(x) else { continue };
        let y = ens.position(k, j_other);
        let inc = match derivative {
            Direction::Forward => g(y, t_other) - g(x, t),
            Direction::Backward => g(x, t) - g(y, t_other),
        };
        groups[b].push(inc / dt);
    }
    BinnedEstimate::from_groups(bins, groups, dt)
}

/// Binned `(D_f x)(x)` or `(D_b x)(x)` at time `t`.
///
/// Either derivative can be estimated from either ensemble since both sample
/// the same path law; `derivative` selects the look-ahead or look-back
/// difference. Bins span the occupied range of the live paths at `t`.
pub fn mean_derivative<F: VelocityField + ?Sized>(
    ensemble: &TrajectoryEnsemble,
    fields: &F,
    t: f64,
    delta_t: f64,
    bin_width: f64,
    derivative: Direction,
) -> Result<BinnedEstimate> {
    let (j, lag) = resolve_lag(ensemble, t, delta_t, derivative)?;
    let live = ensemble.live_column(j);
    let grid = fields.grid();
    let live: Vec<f64> = live.into_iter().filter(|x| grid.contains(*x)).collect();
    let bins = Bins::covering(&live, bin_width)?;
    Ok(conditional_increment(ensemble, bins, j, lag, derivative, |x, _| x))
}

/// Per-bin stochastic Newton law at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonResidual {
    pub centers: Vec<f64>,
    /// `(1/2)(D_f D_b + D_b D_f) x` estimated per bin.
    pub acceleration: Vec<f64>,
    pub acceleration_stderr: Vec<f64>,
    /// `m · acceleration − F(x_bin)`; the force is averaged over the paths in the bin.
    pub residual: Vec<f64>,
    pub residual_stderr: Vec<f64>,
    pub trusted: Vec<bool>,
    pub delta_t: f64,
}

impl NewtonResidual {
    pub fn trusted_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.residual.len()).filter(|&i| self.trusted[i])
    }

    /// Worst |residual| / s.e. over trusted bins.
    pub fn max_abs_z(&self) -> f64 {
        self.trusted_bins()
            .map(|i| (self.residual[i] / self.residual_stderr[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,acceleration,acceleration_stderr,residual,residual_stderr,trusted\n");
        for i in 0..self.residual.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.centers[i],
                self.acceleration[i],
                self.acceleration_stderr[i],
                self.residual[i],
                self.residual_stderr[i],
                self.trusted[i] as u8
            ));
        }
        s
    }
}

/// Stochastic Newton residual `(m/2)(D_f D_b + D_b D_f)x − F(x)` per bin.
///
/// The nested derivatives are applied to the interpolated fields rather than
/// to raw double differences: `D_f` acts on `v − u` along the forward ensemble
/// and `D_b` acts on `v + u` along the backward ensemble. The bins are shared
/// and the two halves are independent, so their standard errors add in
/// quadrature.
pub fn nelson_newton_residual<F: VelocityField + ?Sized>(
    ensemble_f: &TrajectoryEnsemble,
    ensemble_b: &TrajectoryEnsemble,
    fields: &F,
    potential: &PotentialSpec,
    mass: f64,
    t: f64,
    delta_t: f64,
    bins: Bins,
) -> Result<NewtonResidual> {
    if ensemble_f.direction != Direction::Forward || ensemble_b.direction != Direction::Backward {
        return Err(Error::invalid("expected a forward and a backward ensemble"));
    }
    let grid = fields.grid().clone();
    let (t_min, t_max) = fields.time_range();
    let eval = |x: f64, s: f64| {
        let x = x.clamp(grid.x_min, grid.x_max);
        let s = s.clamp(t_min, t_max);
        fields.velocities(x, s)
    };
    let (jf, lag_f) = resolve_lag(ensemble_f, t, delta_t, Direction::Forward)?;
    let (jb, lag_b) = resolve_lag(ensemble_b, t, delta_t, Direction::Backward)?;
    let df_gb = conditional_increment(ensemble_f, bins, jf, lag_f, Direction::Forward, |x, s| {
        let (v, u) = eval(x, s);
        v - u
    });
    let db_gf = conditional_increment(ensemble_b, bins, jb, lag_b, Direction::Backward, |x, s| {
        let (v, u) = eval(x, s);
        v + u
    });

    // force averaged over the positions that populate each bin, pooled across both ensembles
    let mut force_sum = vec![0.0; bins.n];
    let mut force_n = vec![0usize; bins.n];
    for (ens, j) in [(ensemble_f, jf), (ensemble_b, jb)] {
        let tj = ens.times[j];
        for k in 0..ens.n_paths {
            if !ens.alive_at(k, tj) {
                continue;
            }
            let x = ens.position(k, j);
            if let Some(b) = bins.index(x) {
                force_sum[b] += potential.force(x);
                force_n[b] += 1;
            }
        }
    }

    let n = bins.n;
    let mut out = NewtonResidual {
        centers: (0..n).map(|i| bins.center(i)).collect(),
        acceleration: Vec::with_capacity(n),
        acceleration_stderr: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
        residual_stderr: Vec::with_capacity(n),
        trusted: Vec::with_capacity(n),
        delta_t: 0.5 * (df_gb.delta_t + db_gf.delta_t),
    };
    for i in 0..n {
        let a = 0.5 * (df_gb.values[i] + db_gf.values[i]);
        let se = 0.5 * df_gb.stderrs[i].hypot(db_gf.stderrs[i]);
        let force = if force_n[i] > 0 {
            force_sum[i] / force_n[i] as f64
        } else {
            f64::NAN
        };
        out.acceleration.push(a);
        out.acceleration_stderr.push(se);
        out.residual.push(mass * a - force);
        out.residual_stderr.push(mass * se);
        out.trusted.push(df_gb.trusted[i] && db_gf.trusted[i]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::field::UniformField;
    use crate::kinematics::{sample_backward, sample_forward, SdeConfig};
    use crate::state::{GridSpec, PhysicalParams};

    #[test]
    fn bins_are_aligned_and_cover_range() {
        let b = Bins::new(-1.05, 0.93, 0.1).unwrap();
        assert!((b.lo + 1.1).abs() < 1e-12);
        assert_eq!(b.index(-1.05), Some(0));
        assert_eq!(b.index(0.93), Some(b.n - 1));
        assert_eq!(b.index(-2.0), None);
    }

    #[test]
    fn deterministic_drift_gives_exact_derivatives() {
        let g = GridSpec::new(-20.0, 20.0, 401, 1e-2).unwrap();
        let f = UniformField { grid: g.clone(), v: 0.7, u: 0.0 };
        let quiet = PhysicalParams::new(1.0, 1e-300).unwrap();
        let raw: Vec<f64> = g.points().iter().map(|x| (-x * x).exp()).collect();
        let z = g.integrate(&raw);
        let rho: Vec<f64> = raw.iter().map(|r| r / z).collect();
        let ens = sample_forward(&f, quiet, &SdeConfig::forward(4, 400, 1e-2, 0.0, 1.0), &rho).unwrap();
        for dir in [Direction::Forward, Direction::Backward] {
            let d = mean_derivative(&ens, &f, 0.5, 0.1, 0.5, dir).unwrap();
            for i in 0..d.values.len() {
                if d.counts[i] > 0 {
                    assert!((d.values[i] - 0.7).abs() < 1e-9, "{dir:?} {}", d.values[i]);
                }
            }
        }
    }

    #[test]
    fn horizon_and_lag_errors() {
        let g = GridSpec::new(-5.0, 5.0, 101, 1e-2).unwrap();
        let f = UniformField { grid: g.clone(), v: 0.0, u: 0.0 };
        let rho = vec![0.1; 101];
        let ens = sample_forward(&f, PhysicalParams::default(), &SdeConfig::forward(1, 10, 1e-2, 0.0, 1.0), &rho)
            .unwrap();
        assert!(mean_derivative(&ens, &f, 0.95, 0.1, 0.5, Direction::Forward).is_err());
        assert!(mean_derivative(&ens, &f, 0.05, 0.1, 0.5, Direction::Backward).is_err());
        assert!(mean_derivative(&ens, &f, 0.5, 1e-3, 0.5, Direction::Forward).is_err());
        let back = sample_backward(&f, PhysicalParams::default(), &SdeConfig::backward(1, 10, 1e-2, 0.0, 1.0), &rho)
            .unwrap();
        let bins = Bins::new(-5.0, 5.0, 1.0).unwrap();
        let pot = PotentialSpec::Free;
        assert!(nelson_newton_residual(&back, &ens, &f, &pot, 1.0, 0.5, 0.1, bins).is_err());
        let r = nelson_newton_residual(&ens, &back, &f, &pot, 1.0, 0.5, 0.1, bins).unwrap();
        // fewer than the minimum paths everywhere
        assert!(r.trusted.iter().all(|t| !t));
    }
}
