//! C ABI over `qamech`.
//!
//! Every fallible call returns a [`QamStatus`]; on failure the message is kept
//! per thread and read with [`qam_last_error_message`]. Objects are opaque
//! handles created by `*_new`/`*_solve`/`*_sample` calls and released with the
//! matching `*_free`. Array getters copy into caller buffers and report the
//! required length, so a call with `len = 0` is a size query.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qamech::analysis::{autocorrelation, first_passage_times, Centering, PassageSense, Region};
use qamech::cli::{self, CliError};
use qamech::kinematics::{sample_backward, sample_forward, CoherentField, SdeConfig, StationaryField, TrajectoryEnsemble};
use qamech::state::{CoherentStateSpec, GridSpec, PhysicalParams, PotentialSpec};
use qamech::stationary::{solve_stationary_ground, StationarySolution};
use qamech::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QamStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A numerical guard tripped (no bracket, node, leakage, truncation, ...).
    Numerical = 3,
    Io = 4,
    /// Scenario text failed to parse; the message lists every problem.
    Config = 5,
    /// The scenario ran but at least one consistency gate failed.
    GateFailed = 6,
    /// Output buffer shorter than required; nothing was written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Uniform grid description passed by value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QamGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dt_pde: f64,
}

/// Forward/backward time integration settings passed by value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QamSde {
    pub seed: u64,
    pub n_paths: usize,
    pub dt_sde: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Non-zero samples the backward diffusion instead of the forward one.
    pub backward: i32,
}

/// First-passage summary for the traversal of `[lo, hi]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QamPassageSummary {
    pub n_paths: usize,
    pub n_qualified: usize,
    pub n_censored: usize,
    pub n_never: usize,
    pub n_ineligible: usize,
    pub mean: f64,
    pub median: f64,
    pub censored_fraction: f64,
}

pub struct QamPotential(PotentialSpec);
pub struct QamStationary(StationarySolution);
pub struct QamEnsemble(TrajectoryEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> QamStatus {
    match err {
        Error::Io { .. } => QamStatus::Io,
        Error::InvalidArgument(_)
        | Error::InvertedBounds { .. }
        | Error::StabilityGuard { .. }
        | Error::FieldCoverage { .. }
        | Error::TimeOutOfRange { .. }
        | Error::HorizonMismatch(_)
        | Error::DegenerateSegmentation(_)
        | Error::Format(_) => QamStatus::InvalidArgument,
        _ => QamStatus::Numerical,
    }
}

/// Runs `f`, recording errors and converting panics into [`QamStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), (QamStatus, String)>) -> QamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QamStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QamStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (QamStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QamStatus, String) {
    (QamStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (QamStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copies `src` into `(buf, len)`; `*needed` always receives `src.len()`.
unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> Result<(), (QamStatus, String)> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if len == 0 && buf.is_null() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err((
            QamStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

fn grid_of(g: QamGrid) -> Result<GridSpec, (QamStatus, String)> {
    GridSpec::new(g.x_min, g.x_max, g.n_points, g.dt_pde).map_err(lib_err)
}

fn params_of(mass: f64, hbar: f64) -> Result<PhysicalParams, (QamStatus, String)> {
    PhysicalParams::new(mass, hbar).map_err(lib_err)
}

fn sde_of(s: QamSde) -> SdeConfig {
    let c = if s.backward != 0 {
        SdeConfig::backward(s.seed, s.n_paths, s.dt_sde, 0.0, s.t_end)
    } else {
        SdeConfig::forward(s.seed, s.n_paths, s.dt_sde, 0.0, s.t_end)
    };
    c.with_record_every(s.record_every)
}

/// Copies the calling thread's last error message (NUL-terminated) into
/// `buf` and returns its length without the NUL; returns 0 when there is
/// no error. The message is truncated to `len - 1` bytes if needed.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qam_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `V(x) = m ω² x² / 2`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qam_potential_harmonic(mass: f64, omega: f64, out: *mut *mut QamPotential) -> QamStatus {
    potential_new(PotentialSpec::harmonic(mass, omega), out)
}

/// `V(x) = Σ coeffs[i] xⁱ`.
///
/// # Safety
/// `coeffs` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qam_potential_polynomial(
    coeffs: *const f64,
    n: usize,
    out: *mut *mut QamPotential,
) -> QamStatus {
    if coeffs.is_null() {
        return guard(|| Err(null("coeffs")));
    }
    let coeffs = std::slice::from_raw_parts(coeffs, n).to_vec();
    potential_new(PotentialSpec::Polynomial { coeffs }, out)
}

/// `V(x) = a (x² − b²)²`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qam_potential_double_well(a: f64, b: f64, out: *mut *mut QamPotential) -> QamStatus {
    potential_new(PotentialSpec::DoubleWell { a, b }, out)
}

/// `V(x) = height · sech²((x − center)/width)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qam_potential_barrier(
    height: f64,
    width: f64,
    center: f64,
    out: *mut *mut QamPotential,
) -> QamStatus {
    potential_new(PotentialSpec::Barrier { height, width, center }, out)
}

unsafe fn potential_new(spec: PotentialSpec, out: *mut *mut QamPotential) -> QamStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        spec.validate().map_err(lib_err)?;
        put(out, QamPotential(spec));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from a `qam_potential_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn qam_potential_free(p: *mut QamPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Evaluates the potential at `x`.
///
/// # Safety
/// `p` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qam_potential_value(p: *const QamPotential, x: f64, out: *mut f64) -> QamStatus {
    guard(|| {
        let p = borrow(p, "potential")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = p.0.value(x);
        Ok(())
    })
}

/// Node-free ground state by Riccati shooting with energy bisection in `[e_lo, e_hi]`.
///
/// # Safety
/// `potential` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qam_stationary_solve(
    potential: *const QamPotential,
    mass: f64,
    hbar: f64,
    grid: QamGrid,
    e_lo: f64,
    e_hi: f64,
    tol: f64,
    out: *mut *mut QamStationary,
) -> QamStatus {
    guard(|| {
        let p = borrow(potential, "potential")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = grid_of(grid)?;
        let params = params_of(mass, hbar)?;
        let sol = solve_stationary_ground(&p.0, params, (e_lo, e_hi), &g, tol).map_err(lib_err)?;
        put(out, QamStationary(sol));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`qam_stationary_solve`], freed once.
#[no_mangle]
pub unsafe extern "C" fn qam_stationary_free(s: *mut QamStationary) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Ground-state energy, residual sup-norm and convergence flag.
///
/// # Safety
/// `s` must be a live handle; each out pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn qam_stationary_energy(
    s: *const QamStationary,
    energy: *mut f64,
    residual_sup: *mut f64,
    converged: *mut i32,
) -> QamStatus {
    guard(|| {
        let s = &borrow(s, "solution")?.0;
        if !energy.is_null() {
            *energy = s.energy;
        }
        if !residual_sup.is_null() {
            *residual_sup = s.residual_sup;
        }
        if !converged.is_null() {
            *converged = i32::from(s.converged);
        }
        Ok(())
    })
}

/// Copies the osmotic velocity `u(x)` on the grid.
///
/// # Safety
/// `s` must be a live handle; `buf` must hold `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn qam_stationary_osmotic(
    s: *const QamStationary,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> QamStatus {
    guard(|| copy_out(&borrow(s, "solution")?.0.u_profile, buf, len, needed))
}

/// Copies the density `ρ(x)` on the grid.
///
/// # Safety
/// As for [`qam_stationary_osmotic`].
#[no_mangle]
pub unsafe extern "C" fn qam_stationary_density(
    s: *const QamStationary,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> QamStatus {
    guard(|| copy_out(&borrow(s, "solution")?.0.rho, buf, len, needed))
}

/// Samples the stationary diffusion `dx = u dt + √(ħ/m) dW` started from `ρ`.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qam_sample_stationary(
    s: *const QamStationary,
    sde: QamSde,
    out: *mut *mut QamEnsemble,
) -> QamStatus {
    guard(|| {
        let s = &borrow(s, "solution")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = sde_of(sde);
        let grid = s.grid.with_dt_pde(sde.dt_sde.max(s.grid.dt_pde)).map_err(lib_err)?;
        let field = StationaryField::new(grid, s.u_profile.clone()).map_err(lib_err)?;
        let ens = if sde.backward != 0 {
            sample_backward(&field, s.params, &config, &s.rho)
        } else {
            sample_forward(&field, s.params, &config, &s.rho)
        }
        .map_err(lib_err)?;
        put(out, QamEnsemble(ens));
        Ok(())
    })
}

/// Samples the Nelson diffusion of an oscillator coherent state with mean
/// excitation `n_mean`, using the closed-form velocity fields.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qam_sample_coherent(
    omega: f64,
    n_mean: f64,
    mass: f64,
    hbar: f64,
    grid: QamGrid,
    sde: QamSde,
    out: *mut *mut QamEnsemble,
) -> QamStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = grid_of(grid)?;
        let params = params_of(mass, hbar)?;
        let spec = CoherentStateSpec::new(omega, n_mean, params).map_err(lib_err)?;
        let t_ref = if sde.backward != 0 { sde.t_end } else { 0.0 };
        let rho: Vec<f64> = spec.wavefunction(t_ref, &g).map_err(lib_err)?.iter().map(|z| z.norm_sqr()).collect();
        let z = g.integrate(&rho);
        let rho: Vec<f64> = rho.iter().map(|r| r / z).collect();
        let field = CoherentField {
            spec,
            grid: g,
            t_range: (0.0, sde.t_end),
        };
        let config = sde_of(sde);
        let ens = if sde.backward != 0 {
            sample_backward(&field, params, &config, &rho)
        } else {
            sample_forward(&field, params, &config, &rho)
        }
        .map_err(lib_err)?;
        put(out, QamEnsemble(ens));
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle from a `qam_sample_*` call, freed once.
#[no_mangle]
pub unsafe extern "C" fn qam_ensemble_free(e: *mut QamEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Number of paths and stored times.
///
/// # Safety
/// `e` must be a live handle; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn qam_ensemble_shape(e: *const QamEnsemble, n_paths: *mut usize, n_times: *mut usize) -> QamStatus {
    guard(|| {
        let e = &borrow(e, "ensemble")?.0;
        if !n_paths.is_null() {
            *n_paths = e.n_paths;
        }
        if !n_times.is_null() {
            *n_times = e.n_times();
        }
        Ok(())
    })
}

/// Copies the stored times.
///
/// # Safety
/// `e` must be a live handle; `buf` must hold `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn qam_ensemble_times(e: *const QamEnsemble, buf: *mut f64, len: usize, needed: *mut usize) -> QamStatus {
    guard(|| copy_out(&borrow(e, "ensemble")?.0.times, buf, len, needed))
}

/// Copies path `k` (positions at the stored times).
///
/// # Safety
/// As for [`qam_ensemble_times`].
#[no_mangle]
pub unsafe extern "C" fn qam_ensemble_path(
    e: *const QamEnsemble,
    k: usize,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> QamStatus {
    guard(|| {
        let e = &borrow(e, "ensemble")?.0;
        if k >= e.n_paths {
            return Err((QamStatus::InvalidArgument, format!("path {k} out of range (n_paths = {})", e.n_paths)));
        }
        copy_out(e.path(k), buf, len, needed)
    })
}

/// Stationary autocorrelation `C(τ)` for lags `0..=max_lag` stored steps
/// (grand-mean centering); `buf` receives `max_lag + 1` values.
///
/// # Safety
/// As for [`qam_ensemble_times`].
#[no_mangle]
pub unsafe extern "C" fn qam_ensemble_autocorrelation(
    e: *const QamEnsemble,
    max_lag: usize,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> QamStatus {
    guard(|| {
        let e = &borrow(e, "ensemble")?.0;
        let acf = autocorrelation(e, max_lag, Centering::GrandMean).map_err(lib_err)?;
        copy_out(&acf.values, buf, len, needed)
    })
}

/// Traversal statistics of `[lo, hi]` for paths starting below `lo`.
///
/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qam_ensemble_traversal(
    e: *const QamEnsemble,
    lo: f64,
    hi: f64,
    out: *mut QamPassageSummary,
) -> QamStatus {
    guard(|| {
        let e = &borrow(e, "ensemble")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(lo < hi) {
            return Err((QamStatus::InvalidArgument, "traversal needs lo < hi".into()));
        }
        let fp = first_passage_times(e, Region::Interval { lo, hi }, PassageSense::Traverse).map_err(lib_err)?;
        let s = &fp.summary;
        *out = QamPassageSummary {
            n_paths: s.n_paths,
            n_qualified: s.n_qualified,
            n_censored: s.n_censored,
            n_never: s.n_never,
            n_ineligible: s.n_ineligible,
            mean: s.mean,
            median: s.median,
            censored_fraction: s.censored_fraction,
        };
        Ok(())
    })
}

/// Parses and runs a scenario, writing its artifacts and manifest into
/// `out_dir`. `seed` overrides the scenario seed when `override_seed` is
/// non-zero. Returns [`QamStatus::GateFailed`] when outputs were written but a
/// consistency gate failed.
///
/// # Safety
/// `config_text` and `out_dir` must be valid NUL-terminated UTF-8 strings.
#[no_mangle]
pub unsafe extern "C" fn qam_run_scenario(
    config_text: *const c_char,
    out_dir: *const c_char,
    override_seed: i32,
    seed: u64,
) -> QamStatus {
    guard(|| {
        let text = str_arg(config_text, "config_text")?;
        let dir = str_arg(out_dir, "out_dir")?;
        let seed = (override_seed != 0).then_some(seed);
        let (manifest, results) = cli::execute(text, seed).map_err(|e| match e {
            CliError::Config(_) => (QamStatus::Config, e.to_string()),
            CliError::Run(err) => lib_err(err),
        })?;
        cli::emit_outputs(&results, &manifest, Path::new(dir)).map_err(lib_err)?;
        if !results.passed() {
            let failed: Vec<&str> = results.gates.iter().filter(|g| !g.passed).map(|g| g.name.as_str()).collect();
            return Err((QamStatus::GateFailed, format!("failed gates: {}", failed.join(", "))));
        }
        Ok(())
    })
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QamStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (QamStatus::InvalidArgument, format!("{what} is not UTF-8")))
}
