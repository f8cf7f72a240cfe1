//! Observables from trajectory ensembles: densities, KS distances,
//! autocorrelation, power spectra, and first-passage times.

use std::fmt::Write as _;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kinematics::TrajectoryEnsemble;
use crate::numerics::{self, Estimate};

/// Minimum sample size for a KS statistic.
pub const KS_MIN_SAMPLES: usize = 100;

/// Density-normalized histogram on uniform bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
    /// Samples that fell outside the edges.
    pub outside: usize,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        if !(hi > lo) || n_bins == 0 {
            return Err(Error::invalid("histogram needs lo < hi and at least one bin"));
        }
        let width = (hi - lo) / n_bins as f64;
        let mut counts = vec![0usize; n_bins];
        let mut outside = 0;
        for &x in samples {
            if !(x >= lo && x <= hi) {
                outside += 1;
                continue;
            }
            let b = (((x - lo) / width) as usize).min(n_bins - 1);
            counts[b] += 1;
        }
        let inside = samples.len() - outside;
        let density = counts
            .iter()
            .map(|&c| if inside > 0 { c as f64 / (inside as f64 * width) } else { 0.0 })
            .collect();
        Ok(Histogram {
            edges: (0..=n_bins).map(|i| lo + i as f64 * width).collect(),
            counts,
            density,
            outside,
        })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `∑ density · width`.
    pub fn total_mass(&self) -> f64 {
        let terms: Vec<f64> = self
            .density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .collect();
        numerics::sum(&terms)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_center,density\n");
        for (c, d) in self.centers().iter().zip(&self.density) {
            let _ = writeln!(s, "{c},{d}");
        }
        s
    }
}

/// Histogram of live paths at the stored time nearest `t`.
pub fn empirical_density(ensemble: &TrajectoryEnsemble, t: f64, lo: f64, hi: f64, n_bins: usize) -> Result<Histogram> {
    let j = ensemble.time_index(t)?;
    Histogram::from_samples(&ensemble.live_column(j), lo, hi, n_bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n_samples: usize,
    pub threshold: f64,
    pub passed: bool,
}

impl KsReport {
    pub fn new(statistic: f64, n_samples: usize, threshold: f64) -> Self {
        KsReport {
            statistic,
            n_samples,
            threshold,
            passed: statistic < threshold,
        }
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `sup |F_n(x) − F(x)|` against a reference CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], reference_cdf: F) -> Result<f64> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("samples contain NaN"));
    }
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = reference_cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Two-sample KS statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let short = a.len().min(b.len());
    if short < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: short,
        });
    }
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// CDF of `N(mean, variance)`.
pub fn gaussian_cdf(mean: f64, variance: f64) -> Result<impl Fn(f64) -> f64> {
    let n = Normal::new(mean, variance.sqrt()).map_err(|e| Error::invalid(format!("gaussian reference: {e}")))?;
    Ok(move |x| n.cdf(x))
}

/// How path values are centered before forming products.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Subtract the mean over all paths and times (stationary scenarios).
    #[default]
    GrandMean,
    /// Subtract the ensemble mean at each time (fluctuations around a moving centre).
    PerTime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Autocorrelation {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub n_paths: usize,
}

impl Autocorrelation {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,C,stderr\n");
        for i in 0..self.taus.len() {
            let _ = writeln!(s, "{},{},{}", self.taus[i], self.values[i], self.stderrs[i]);
        }
        s
    }
}

fn centered_paths(ensemble: &TrajectoryEnsemble, centering: Centering) -> Result<Vec<Vec<f64>>> {
    let live: Vec<usize> = (0..ensemble.n_paths).filter(|&k| !ensemble.is_absorbed(k)).collect();
    if live.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: live.len(),
        });
    }
    let n_t = ensemble.n_times();
    let centre: Vec<f64> = match centering {
        Centering::GrandMean => {
            let means: Vec<f64> = live.iter().map(|&k| numerics::mean(ensemble.path(k))).collect();
            vec![numerics::mean(&means); n_t]
        }
        Centering::PerTime => (0..n_t)
            .map(|j| numerics::mean(&live.iter().map(|&k| ensemble.position(k, j)).collect::<Vec<_>>()))
            .collect(),
    };
    Ok(live
        .iter()
        .map(|&k| ensemble.path(k).iter().zip(&centre).map(|(x, c)| x - c).collect())
        .collect())
}

/// Stationary autocorrelation `C(τ)` for lags `0..=max_lag` stored steps,
/// averaged over time origins within each path and then over paths; the
/// standard error is the spread of the per-path averages. With equal path
/// lengths `C(0)` is the pooled (1/N-normalized) variance.
pub fn autocorrelation(ensemble: &TrajectoryEnsemble, max_lag: usize, centering: Centering) -> Result<Autocorrelation> {
    let n_t = ensemble.n_times();
    if max_lag >= n_t {
        return Err(Error::invalid(format!(
            "max_lag = {max_lag} must be below the number of stored times {n_t}"
        )));
    }
    let paths = centered_paths(ensemble, centering)?;
    let per_path: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| {
            (0..=max_lag)
                .map(|lag| {
                    let prods: Vec<f64> = (0..n_t - lag).map(|j| p[j] * p[j + lag]).collect();
                    numerics::mean(&prods)
                })
                .collect()
        })
        .collect();
    let dt = ensemble.record_dt();
    let mut out = Autocorrelation {
        taus: (0..=max_lag).map(|l| l as f64 * dt).collect(),
        values: Vec::with_capacity(max_lag + 1),
        stderrs: Vec::with_capacity(max_lag + 1),
        n_paths: paths.len(),
    };
    for lag in 0..=max_lag {
        let e = Estimate::from_samples(&per_path.iter().map(|c| c[lag]).collect::<Vec<_>>());
        out.values.push(e.value);
        out.stderrs.push(e.stderr);
    }
    Ok(out)
}

/// Time-resolved two-point function `E[x(t_j) x(t_j + τ_l)]`, row `j`, column `l`
/// (NaN where `t_j + τ_l` leaves the horizon).
pub fn two_point_function(ensemble: &TrajectoryEnsemble, max_lag: usize) -> Result<Vec<Vec<f64>>> {
    let n_t = ensemble.n_times();
    if max_lag >= n_t {
        return Err(Error::invalid("max_lag must be below the number of stored times"));
    }
    let live: Vec<usize> = (0..ensemble.n_paths).filter(|&k| !ensemble.is_absorbed(k)).collect();
    Ok((0..n_t)
        .map(|j| {
            (0..=max_lag)
                .map(|l| {
                    if j + l >= n_t {
                        return f64::NAN;
                    }
                    let prods: Vec<f64> =
                        live.iter().map(|&k| ensemble.position(k, j) * ensemble.position(k, j + l)).collect();
                    numerics::mean(&prods)
                })
                .collect()
        })
        .collect())
}

/// One-sided Welch PSD in ordinary frequency, normalized so `∑ psd · df` is the variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub df: f64,
    pub segment_length: usize,
    pub overlap: usize,
    pub n_segments: usize,
    pub window: String,
    /// Variance of the mean-removed input.
    pub variance: f64,
}

/// Fewest segments accepted by [`power_spectral_density`].
pub const MIN_SEGMENTS: usize = 8;

impl SpectrumEstimate {
    pub fn integrated_power(&self) -> f64 {
        numerics::sum(&self.psd) * self.df
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq,psd\n");
        for (f, p) in self.freqs.iter().zip(&self.psd) {
            let _ = writeln!(s, "{f},{p}");
        }
        s
    }

    /// Lorentzian corner `ω_c` from a line fit of `1/S` against `Ω² = (2πf)²`
    /// over `0 < Ω ≤ omega_max`.
    pub fn fit_corner(&self, omega_max: f64) -> Result<f64> {
        let mut w2 = Vec::new();
        let mut inv = Vec::new();
        for (f, p) in self.freqs.iter().zip(&self.psd) {
            let om = 2.0 * std::f64::consts::PI * f;
            if *f > 0.0 && om <= omega_max && *p > 0.0 {
                w2.push(om * om);
                inv.push(1.0 / p);
            }
        }
        if w2.len() < 3 {
            return Err(Error::TooFewSamples { needed: 3, got: w2.len() });
        }
        let (a, b) = numerics::linear_fit(&w2, &inv);
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid("spectrum is not Lorentzian over the fit range"));
        }
        Ok((a / b).sqrt())
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate with a periodic Hann window, averaged over segments of all
/// live paths. The global mean is removed once, before segmentation.
pub fn power_spectral_density(ensemble: &TrajectoryEnsemble, segment_length: usize, overlap: usize) -> Result<SpectrumEstimate> {
    let n_t = ensemble.n_times();
    if segment_length < 4 || segment_length > n_t || overlap >= segment_length {
        return Err(Error::DegenerateSegmentation(format!(
            "segment_length = {segment_length}, overlap = {overlap}, n_times = {n_t}"
        )));
    }
    let paths = centered_paths(ensemble, Centering::GrandMean)?;
    let step = segment_length - overlap;
    let per_path = (n_t - segment_length) / step + 1;
    let n_segments = per_path * paths.len();
    if n_segments < MIN_SEGMENTS {
        return Err(Error::DegenerateSegmentation(format!(
            "{n_segments} segments, at least {MIN_SEGMENTS} needed"
        )));
    }
    let fs = 1.0 / ensemble.record_dt();
    let w = hann(segment_length);
    let w2 = numerics::sum(&w.iter().map(|v| v * v).collect::<Vec<_>>());
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_length);
    let n_freq = segment_length / 2 + 1;

    let per_path_psd: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| {
            let mut acc = vec![0.0; n_freq];
            let mut buf = vec![Complex::new(0.0, 0.0); segment_length];
            for s in 0..per_path {
                let start = s * step;
                for i in 0..segment_length {
                    buf[i] = Complex::new(p[start + i] * w[i], 0.0);
                }
                fft.process(&mut buf);
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += buf[k].norm_sqr();
                }
            }
            acc
        })
        .collect();

    let mut psd = Vec::with_capacity(n_freq);
    for k in 0..n_freq {
        let col: Vec<f64> = per_path_psd.iter().map(|a| a[k]).collect();
        let two_sided = numerics::sum(&col) / n_segments as f64 / (fs * w2);
        let nyquist = segment_length % 2 == 0 && k == n_freq - 1;
        psd.push(if k == 0 || nyquist { two_sided } else { 2.0 * two_sided });
    }
    let sq: Vec<f64> = paths.iter().flat_map(|p| p.iter().map(|x| x * x)).collect();
    Ok(SpectrumEstimate {
        freqs: (0..n_freq).map(|k| k as f64 * fs / segment_length as f64).collect(),
        psd,
        df: fs / segment_length as f64,
        segment_length,
        overlap,
        n_segments,
        window: "hann".into(),
        variance: numerics::mean(&sq),
    })
}

/// One-sided spectrum predicted by `C(τ)`: `4 ∫₀^τmax C(τ) cos(2πfτ) dτ` (trapezoid).
pub fn spectrum_from_autocorrelation(acf: &Autocorrelation, f: f64) -> f64 {
    let om = 2.0 * std::f64::consts::PI * f;
    let terms: Vec<f64> = acf.taus.iter().zip(&acf.values).map(|(t, c)| c * (om * t).cos()).collect();
    let n = terms.len();
    if n < 2 {
        return f64::NAN;
    }
    let h = acf.taus[1] - acf.taus[0];
    4.0 * h * (numerics::sum(&terms) - 0.5 * (terms[0] + terms[n - 1]))
}

/// Worst relative disagreement between the Welch PSD and the transformed
/// autocorrelation over `0 < f ≤ f_max`. The DC bin is left out: it is not
/// doubled in the one-sided estimate and absorbs the mean removal.
pub fn wiener_khinchin_check(acf: &Autocorrelation, psd: &SpectrumEstimate, f_max: f64) -> f64 {
    psd.freqs
        .iter()
        .zip(&psd.psd)
        .filter(|(f, _)| **f > 0.0 && **f <= f_max)
        .map(|(f, p)| {
            let q = spectrum_from_autocorrelation(acf, *f);
            ((p - q) / p).abs()
        })
        .fold(0.0, f64::max)
}

/// Spatial region for first-passage criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Interval { lo: f64, hi: f64 },
    Above { threshold: f64 },
    Below { threshold: f64 },
}

impl Region {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Region::Interval { lo, hi } => x >= lo && x <= hi,
            Region::Above { threshold } => x >= threshold,
            Region::Below { threshold } => x <= threshold,
        }
    }

    /// Boundary level crossed between an inside point and an outside point.
    fn boundary_between(&self, inside: f64, outside: f64) -> f64 {
        match *self {
            Region::Interval { lo, hi } => {
                if outside < lo || (outside <= hi && inside > hi) {
                    lo
                } else {
                    hi
                }
            }
            Region::Above { threshold } | Region::Below { threshold } => threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageSense {
    /// First time the path is inside the region (paths starting inside record 0).
    Enter,
    /// First time a path starting inside leaves the region.
    Exit,
    /// For an interval: paths starting below `lo` that first reach above `hi`.
    Traverse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageSummary {
    pub n_paths: usize,
    pub n_qualified: usize,
    pub n_censored: usize,
    pub n_never: usize,
    pub n_ineligible: usize,
    pub mean: f64,
    pub median: f64,
    pub censored_fraction: f64,
}

/// Per-path first-passage outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstPassage {
    pub region: Region,
    pub sense: PassageSense,
    /// Elapsed time from the first stored time; `None` if the criterion was never met.
    pub times: Vec<Option<f64>>,
    /// Traverse only: time between the last exit through `lo` and the crossing of `hi`.
    pub durations: Vec<Option<f64>>,
    /// Absorbed before qualifying.
    pub censored: Vec<bool>,
    /// Path did not start on the required side (Exit/Traverse).
    pub ineligible: Vec<bool>,
    pub summary: PassageSummary,
}

impl FirstPassage {
    pub fn qualified_times(&self) -> Vec<f64> {
        self.times.iter().flatten().copied().collect()
    }

    pub fn qualified_durations(&self) -> Vec<f64> {
        self.durations.iter().flatten().copied().collect()
    }

    /// Histogram of qualified first-passage times.
    pub fn histogram(&self, n_bins: usize) -> Result<Histogram> {
        let t = self.qualified_times();
        if t.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Histogram::from_samples(&t, lo, if hi > lo { hi } else { lo + 1.0 }, n_bins)
    }

    /// CSV columns `path_id, fpt, censored` (plus `duration` for traversals).
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |t| t.to_string());
        let traverse = self.sense == PassageSense::Traverse;
        let mut s = String::from(if traverse {
            "path_id,fpt,censored,duration\n"
        } else {
            "path_id,fpt,censored\n"
        });
        for k in 0..self.times.len() {
            let _ = write!(s, "{k},{},{}", fmt(self.times[k]), self.censored[k] as u8);
            if traverse {
                let _ = write!(s, ",{}", fmt(self.durations[k]));
            }
            s.push('\n');
        }
        s
    }
}

fn crossing_time(t0: f64, t1: f64, a: f64, b: f64, level: f64) -> f64 {
    if b == a {
        return t1;
    }
    let w = ((level - a) / (b - a)).clamp(0.0, 1.0);
    t0 + w * (t1 - t0)
}

struct PathPassage {
    time: Option<f64>,
    duration: Option<f64>,
    censored: bool,
    ineligible: bool,
}

fn path_passage(ens: &TrajectoryEnsemble, k: usize, region: Region, sense: PassageSense) -> PathPassage {
    let p = ens.path(k);
    let ts = &ens.times;
    let t0 = ts[0];
    let none = |ineligible| PathPassage {
        time: None,
        duration: None,
        censored: false,
        ineligible,
    };
    let mut out = match sense {
        PassageSense::Enter => {
            if region.contains(p[0]) {
                return PathPassage { time: Some(0.0), ..none(false) };
            }
            let mut hit = None;
            for j in 0..p.len() - 1 {
                if region.contains(p[j + 1]) {
                    let level = region.boundary_between(p[j + 1], p[j]);
                    hit = Some(crossing_time(ts[j], ts[j + 1], p[j], p[j + 1], level) - t0);
                    break;
                }
            }
            PathPassage { time: hit, ..none(false) }
        }
        PassageSense::Exit => {
            if !region.contains(p[0]) {
                return none(true);
            }
            let mut hit = None;
            for j in 0..p.len() - 1 {
                if !region.contains(p[j + 1]) {
                    let level = region.boundary_between(p[j], p[j + 1]);
                    hit = Some(crossing_time(ts[j], ts[j + 1], p[j], p[j + 1], level) - t0);
                    break;
                }
            }
            PathPassage { time: hit, ..none(false) }
        }
        PassageSense::Traverse => {
            let Region::Interval { lo, hi } = region else {
                return none(true);
            };
            if !(p[0] < lo) {
                return none(true);
            }
            let mut last_lo = None;
            let mut hit = None;
            for j in 0..p.len() - 1 {
                let (a, b) = (p[j], p[j + 1]);
                if a < lo && b >= lo {
                    last_lo = Some(crossing_time(ts[j], ts[j + 1], a, b, lo));
                }
                if b > hi {
                    let t_hi = crossing_time(ts[j], ts[j + 1], a, b, hi);
                    hit = Some((t_hi - t0, t_hi - last_lo.unwrap_or(t_hi)));
                    break;
                }
            }
            PathPassage {
                time: hit.map(|h| h.0),
                duration: hit.map(|h| h.1),
                ..none(false)
            }
        }
    };
    if let Some(ta) = ens.absorbed_at[k] {
        match out.time {
            Some(t) if t0 + t <= ta => {}
            _ => {
                out.time = None;
                out.duration = None;
                out.censored = !out.ineligible;
            }
        }
    }
    out
}

/// First-passage times for every path; absorbed paths that had not qualified
/// are censored and excluded from the summary statistics.
pub fn first_passage_times(ensemble: &TrajectoryEnsemble, region: Region, sense: PassageSense) -> Result<FirstPassage> {
    if let Region::Interval { lo, hi } = region {
        if !(lo < hi) {
            return Err(Error::invalid("region interval must satisfy lo < hi"));
        }
    }
    if sense == PassageSense::Traverse && !matches!(region, Region::Interval { .. }) {
        return Err(Error::invalid("traversal needs an interval region"));
    }
    if ensemble.n_times() < 2 {
        return Err(Error::invalid("need at least two stored times"));
    }
    let per: Vec<PathPassage> = (0..ensemble.n_paths)
        .into_par_iter()
        .map(|k| path_passage(ensemble, k, region, sense))
        .collect();
    let times: Vec<Option<f64>> = per.iter().map(|p| p.time).collect();
    let durations: Vec<Option<f64>> = per.iter().map(|p| p.duration).collect();
    let censored: Vec<bool> = per.iter().map(|p| p.censored).collect();
    let ineligible: Vec<bool> = per.iter().map(|p| p.ineligible).collect();
    let q: Vec<f64> = times.iter().flatten().copied().collect();
    let n_censored = censored.iter().filter(|c| **c).count();
    let n_ineligible = ineligible.iter().filter(|c| **c).count();
    let n_qualified = q.len();
    let eligible = ensemble.n_paths - n_ineligible;
    let summary = PassageSummary {
        n_paths: ensemble.n_paths,
        n_qualified,
        n_censored,
        n_never: eligible - n_qualified - n_censored,
        n_ineligible,
        mean: numerics::mean(&q),
        median: numerics::median(&q),
        censored_fraction: if eligible > 0 { n_censored as f64 / eligible as f64 } else { 0.0 },
    };
    Ok(FirstPassage {
        region,
        sense,
        times,
        durations,
        censored,
        ineligible,
        summary,
    })
}

/// Minimal SVG line plot: one polyline per series on shared axes.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, series: &[(&str, &[f64], &[f64])]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let finite = |v: &&f64| v.is_finite();
    let all_x = series.iter().flat_map(|s| s.1.iter().filter(finite));
    let all_y = series.iter().flat_map(|s| s.2.iter().filter(finite));
    let (mut x0, mut x1) = all_x.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let (mut y0, mut y1) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} V{} H{}" stroke="black" fill="none"/>"#,
        H - M,
        W - M
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (v, anchor, x, y) in [
        (x0, "start", M, H - M + 15.0),
        (x1, "end", W - M, H - M + 15.0),
        (y0, "end", M - 4.0, H - M),
        (y1, "end", M - 4.0, M + 4.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="10" text-anchor="{anchor}">{v:.3e}</text>"#);
    }
    for (i, (name, xs, ys)) in series.iter().enumerate() {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
