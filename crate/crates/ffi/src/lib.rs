//! C interface to `catbath`.
//!
//! All objects cross the boundary as opaque handles created by a `cb_*_new` or constructor
//! function and released with the matching `cb_*_free`. Every fallible call returns a
//! [`CbStatus`]; on failure the message is available from [`cb_last_error`] on the same thread.
//!
//! Matrices are passed as `2 * dim * dim` doubles, row-major, real and imaginary parts interleaved.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use catbath::config::{parse_config, ScenarioConfig};
use catbath::hilbert::{annihilation_op, cat_state, coherent_state, fock_state, number_op, DensityMatrix, FockOperator};
use catbath::linalg::{self, CMat};
use catbath::lindblad::{evolve, steady_state, EvolveOptions, LindbladChannel, Method, SteadyMethod, SteadyOptions};
use catbath::models::{effective_rates, signal_mode_hamiltonian, squid_hamiltonian, CircuitParams, CouplerParams};
use catbath::observables::{energy, entropy, fidelity, parity_expect, purity, trace_distance};
use catbath::phase_space::{cattiness, negativity, wigner, GridSpec};
use catbath::{presets, scenario, Error};
use num_complex::Complex64;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDimension = 3,
    InvalidState = 4,
    NotHermitian = 5,
    IntegrationFailure = 6,
    DegenerateNullSpace = 7,
    NonConvergence = 8,
    UndefinedReference = 9,
    InvalidGrid = 10,
    ScaleSeparation = 11,
    Config = 12,
    Numerical = 13,
    Io = 14,
    BufferTooSmall = 15,
    Panic = 16,
}

/// Dissipative channel operators.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CbChannelOp {
    /// a
    A = 0,
    /// a^2
    A2 = 1,
    /// a^dag a
    AdagA = 2,
}

/// Rectangular phase-space grid, cell-centred, in x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CbGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

/// Density matrix handle.
pub struct CbState(DensityMatrix);

/// Hamiltonian plus dissipative channels.
pub struct CbSystem {
    h: FockOperator,
    channels: Vec<LindbladChannel>,
}

/// Parsed scenario file.
pub struct CbScenario(ScenarioConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CbStatus {
    match e {
        Error::InvalidDimension { .. } | Error::OutOfRange { .. } | Error::DimensionMismatch { .. } => CbStatus::InvalidDimension,
        Error::NotHermitian { .. } => CbStatus::NotHermitian,
        Error::InvalidParameter { .. } => CbStatus::InvalidArgument,
        Error::InvalidState(_) => CbStatus::InvalidState,
        Error::IntegrationFailure { .. } => CbStatus::IntegrationFailure,
        Error::NoChannels => CbStatus::InvalidArgument,
        Error::DegenerateNullSpace { .. } => CbStatus::DegenerateNullSpace,
        Error::NonConvergence(_) => CbStatus::NonConvergence,
        Error::UndefinedReference => CbStatus::UndefinedReference,
        Error::InvalidGrid(_) => CbStatus::InvalidGrid,
        Error::ScaleSeparation(_) => CbStatus::ScaleSeparation,
        Error::Config(_) => CbStatus::Config,
        Error::Numerical(_) => CbStatus::Numerical,
        Error::Io(_) => CbStatus::Io,
    }
}

struct Fail(CbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: CbStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, records any error or panic, and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            CbStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(CbStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(CbStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let slot = deref_mut(out, "output pointer")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_f64(out: *mut f64, v: f64) -> Result<(), Fail> {
    *deref_mut(out, "output pointer")? = v;
    Ok(())
}

unsafe fn read_matrix(dim: usize, data: *const f64) -> Result<CMat, Fail> {
    if data.is_null() {
        return fail(CbStatus::NullPointer, "matrix data is null");
    }
    if dim == 0 {
        return fail(CbStatus::InvalidDimension, "dimension must be positive");
    }
    let s = std::slice::from_raw_parts(data, 2 * dim * dim);
    Ok(CMat::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        Complex64::new(s[k], s[k + 1])
    }))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return fail(CbStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(s).to_str().or_else(|_| fail(CbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn grid_spec(g: &CbGrid) -> GridSpec {
    GridSpec { x_min: g.x_min, x_max: g.x_max, nx: g.nx, p_min: g.p_min, p_max: g.p_max, np: g.np }
}

// ---------------------------------------------------------------------------------------------
// Errors and version

/// Message of the last failed call on this thread; empty after a successful call.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn cb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------------------------
// States

/// Fock state |n> in dimension `dim`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_state_fock(n: usize, dim: usize, out: *mut *mut CbState) -> CbStatus {
    guard(|| put(out, CbState(fock_state(n, dim)?.to_density())))
}

/// Coherent state |alpha>, renormalized after truncation.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_state_coherent(alpha_re: f64, alpha_im: f64, dim: usize, out: *mut *mut CbState) -> CbStatus {
    guard(|| put(out, CbState(coherent_state(Complex64::new(alpha_re, alpha_im), dim)?.to_density())))
}

/// Even (`even != 0`) or odd cat state built on |alpha> and |-alpha>.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_state_cat(alpha_re: f64, alpha_im: f64, even: i32, dim: usize, out: *mut *mut CbState) -> CbStatus {
    guard(|| put(out, CbState(cat_state(Complex64::new(alpha_re, alpha_im), even != 0, dim)?.to_density())))
}

/// Density matrix from `2 * dim * dim` doubles. Must be Hermitian, unit trace and positive semidefinite.
///
/// # Safety
/// `data` must point to `2 * dim * dim` readable doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_state_from_matrix(dim: usize, data: *const f64, out: *mut *mut CbState) -> CbStatus {
    guard(|| {
        let m = read_matrix(dim, data)?;
        put(out, CbState(DensityMatrix::new(m)?))
    })
}

/// # Safety
/// `state` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_state_free(state: *mut CbState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Hilbert-space dimension, 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_state_dim(state: *const CbState) -> usize {
    state.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the matrix into `buf` (`len` doubles, at least `2 * dim * dim`).
///
/// # Safety
/// `state` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cb_state_matrix(state: *const CbState, buf: *mut f64, len: usize) -> CbStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let n = s.0.dim();
        if buf.is_null() {
            return fail(CbStatus::NullPointer, "buffer is null");
        }
        if len < 2 * n * n {
            return fail(CbStatus::BufferTooSmall, format!("need {} doubles, got {len}", 2 * n * n));
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * n * n);
        let m = s.0.matrix();
        for i in 0..n {
            for j in 0..n {
                out[2 * (i * n + j)] = m[(i, j)].re;
                out[2 * (i * n + j) + 1] = m[(i, j)].im;
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------------------------
// Observables

/// Tr(rho^2).
///
/// # Safety
/// `state` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_purity(state: *const CbState, out: *mut f64) -> CbStatus {
    guard(|| write_f64(out, purity(&deref(state, "state")?.0)))
}

/// Von Neumann entropy in nats.
///
/// # Safety
/// `state` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_entropy(state: *const CbState, out: *mut f64) -> CbStatus {
    guard(|| write_f64(out, entropy(&deref(state, "state")?.0)?))
}

/// Photon-number parity expectation.
///
/// # Safety
/// `state` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_parity(state: *const CbState, out: *mut f64) -> CbStatus {
    guard(|| write_f64(out, parity_expect(&deref(state, "state")?.0)))
}

/// Tr(rho H) for the system Hamiltonian.
///
/// # Safety
/// `system` and `state` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_energy(system: *const CbSystem, state: *const CbState, out: *mut f64) -> CbStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        write_f64(out, energy(&deref(state, "state")?.0, &sys.h)?)
    })
}

/// (1/2) Tr|a - b|.
///
/// # Safety
/// `a`, `b` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_trace_distance(a: *const CbState, b: *const CbState, out: *mut f64) -> CbStatus {
    guard(|| write_f64(out, trace_distance(&deref(a, "a")?.0, &deref(b, "b")?.0)?))
}

/// Uhlmann fidelity, squared convention (1 for identical states).
///
/// # Safety
/// `a`, `b` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_fidelity(a: *const CbState, b: *const CbState, out: *mut f64) -> CbStatus {
    guard(|| write_f64(out, fidelity(&deref(a, "a")?.0, &deref(b, "b")?.0)?))
}

// ---------------------------------------------------------------------------------------------
// Phase space

/// Wigner function on `grid`, written to `buf` as `nx * np` doubles with x as the slow index.
///
/// # Safety
/// `state`, `grid` must be valid; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cb_wigner(state: *const CbState, grid: *const CbGrid, buf: *mut f64, len: usize) -> CbStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let spec = grid_spec(deref(grid, "grid")?);
        spec.validate()?;
        let need = spec.nx * spec.np;
        if buf.is_null() {
            return fail(CbStatus::NullPointer, "buffer is null");
        }
        if len < need {
            return fail(CbStatus::BufferTooSmall, format!("need {need} doubles, got {len}"));
        }
        let w = wigner(&s.0, &spec)?;
        let out = std::slice::from_raw_parts_mut(buf, need);
        for i in 0..spec.nx {
            for j in 0..spec.np {
                out[i * spec.np + j] = w.at(i, j);
            }
        }
        Ok(())
    })
}

/// Integrated negative part of the Wigner function on `grid`.
///
/// # Safety
/// `state`, `grid` must be valid handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_negativity(state: *const CbState, grid: *const CbGrid, out: *mut f64) -> CbStatus {
    guard(|| {
        let spec = grid_spec(deref(grid, "grid")?);
        write_f64(out, negativity(&wigner(&deref(state, "state")?.0, &spec)?))
    })
}

/// Negativity of `state` relative to that of `reference` on the same grid.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cb_cattiness(
    state: *const CbState,
    reference: *const CbState,
    grid: *const CbGrid,
    out: *mut f64,
) -> CbStatus {
    guard(|| {
        let spec = grid_spec(deref(grid, "grid")?);
        write_f64(out, cattiness(&deref(state, "state")?.0, &deref(reference, "reference")?.0, &spec)?)
    })
}

// ---------------------------------------------------------------------------------------------
// Models and rates

/// Effective two-photon loss and dephasing rates of the coupler after eliminating the buffer mode.
///
/// # Safety
/// `gamma2` and `gamma_perp` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cb_effective_rates(
    chi_a: f64,
    chi_b: f64,
    kappa_a: f64,
    kappa_b: f64,
    eps_re: f64,
    eps_im: f64,
    gamma2: *mut f64,
    gamma_perp: *mut f64,
) -> CbStatus {
    guard(|| {
        let cp = CouplerParams::new(chi_a, chi_b, kappa_a, kappa_b, Complex64::new(eps_re, eps_im))?;
        let r = effective_rates(&cp)?;
        write_f64(gamma2, r.gamma2)?;
        write_f64(gamma_perp, r.gamma_perp)
    })
}

/// rf-SQUID ring Hamiltonian (SI circuit values, flux as a fraction of the flux quantum), no channels.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_ring_system_new(
    inductance: f64,
    capacitance: f64,
    critical_current: f64,
    external_flux_frac: f64,
    dim: usize,
    out: *mut *mut CbSystem,
) -> CbStatus {
    guard(|| {
        let p = CircuitParams::new(inductance, capacitance, critical_current, external_flux_frac)?;
        put(out, CbSystem { h: squid_hamiltonian(&p, dim)?, channels: Vec::new() })
    })
}

/// Signal-mode Hamiltonian of the coupler, no channels.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_signal_system_new(
    chi_a: f64,
    chi_b: f64,
    kappa_a: f64,
    kappa_b: f64,
    eps_re: f64,
    eps_im: f64,
    dim: usize,
    out: *mut *mut CbSystem,
) -> CbStatus {
    guard(|| {
        let cp = CouplerParams::new(chi_a, chi_b, kappa_a, kappa_b, Complex64::new(eps_re, eps_im))?;
        put(out, CbSystem { h: signal_mode_hamiltonian(&cp, dim)?, channels: Vec::new() })
    })
}

/// System from an explicit Hermitian Hamiltonian (`2 * dim * dim` doubles).
///
/// # Safety
/// `data` must point to `2 * dim * dim` readable doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_system_from_hamiltonian(dim: usize, data: *const f64, out: *mut *mut CbSystem) -> CbStatus {
    guard(|| {
        let h = FockOperator::new(read_matrix(dim, data)?)?;
        h.check_hermitian()?;
        put(out, CbSystem { h, channels: Vec::new() })
    })
}

/// # Safety
/// `system` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_system_free(system: *mut CbSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Hilbert-space dimension, 0 for a null handle.
///
/// # Safety
/// `system` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_system_dim(system: *const CbSystem) -> usize {
    system.as_ref().map_or(0, |s| s.h.dim())
}

/// Adds the channel `rate * D[op]`.
///
/// # Safety
/// `system` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_system_add_channel(system: *mut CbSystem, op: CbChannelOp, rate: f64) -> CbStatus {
    guard(|| {
        let sys = deref_mut(system, "system")?;
        let dim = sys.h.dim();
        let a = annihilation_op(dim)?;
        let l = match op {
            CbChannelOp::A => a,
            CbChannelOp::A2 => a.pow(2),
            CbChannelOp::AdagA => number_op(dim)?,
        };
        sys.channels.push(LindbladChannel::new(l, rate)?);
        Ok(())
    })
}

/// Lowest `count` eigenvalues of the Hamiltonian, ascending.
///
/// # Safety
/// `system` must be a live handle and `buf` must point to `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cb_system_spectrum(system: *const CbSystem, buf: *mut f64, count: usize) -> CbStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        if count > sys.h.dim() {
            return fail(CbStatus::InvalidArgument, format!("{count} levels requested from dimension {}", sys.h.dim()));
        }
        if buf.is_null() {
            return fail(CbStatus::NullPointer, "buffer is null");
        }
        let mut ev = linalg::hermitian_eigenvalues(sys.h.matrix())?;
        ev.sort_by(f64::total_cmp);
        std::slice::from_raw_parts_mut(buf, count).copy_from_slice(&ev[..count]);
        Ok(())
    })
}

/// Evolves `state` for time `t` under the system's master equation (adaptive Dormand-Prince).
///
/// # Safety
/// `system`, `state` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_evolve(
    system: *const CbSystem,
    state: *const CbState,
    t: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut CbState,
) -> CbStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let rho = &deref(state, "state")?.0;
        if !(t >= 0.0 && t.is_finite()) {
            return fail(CbStatus::InvalidArgument, format!("t must be finite and nonnegative, got {t}"));
        }
        let opts = EvolveOptions {
            method: Method::Dopri5 { rtol, atol },
            keep_states: false,
            ..EvolveOptions::default()
        };
        let traj = evolve(rho, &sys.h, &sys.channels, &[0.0, t], &opts)?;
        let last = traj.final_state().cloned().ok_or(Fail(CbStatus::Numerical, "empty trajectory".into()))?;
        put(out, CbState(last))
    })
}

/// Steady state. `initial` may be null (vacuum); it only matters when the steady state is not unique.
///
/// # Safety
/// `system` must be a live handle, `initial` null or live, `out` a valid pointer; `residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn cb_steady_state(
    system: *const CbSystem,
    initial: *const CbState,
    out: *mut *mut CbState,
    residual: *mut f64,
) -> CbStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let opts = SteadyOptions {
            method: SteadyMethod::Auto,
            initial: initial.as_ref().map(|s| s.0.clone()),
            ..SteadyOptions::default()
        };
        let ss = steady_state(&sys.h, &sys.channels, &opts)?;
        if !residual.is_null() {
            *residual = ss.residual;
        }
        put(out, CbState(ss.rho))
    })
}

// ---------------------------------------------------------------------------------------------
// Scenarios

/// Scenario text of a shipped preset, or null if the name is unknown. Caller frees with [`cb_string_free`].
///
/// # Safety
/// `name` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cb_preset_text(name: *const c_char) -> *mut c_char {
    let Ok(name) = c_str(name, "name") else { return ptr::null_mut() };
    presets::get(name).and_then(|p| CString::new(p.text).ok()).map_or(ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn cb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates scenario TOML.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_scenario_parse(text: *const c_char, out: *mut *mut CbScenario) -> CbStatus {
    guard(|| put(out, CbScenario(parse_config(c_str(text, "text")?)?)))
}

/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_scenario_free(scenario: *mut CbScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario, writing results under `out_dir`. `failed_runs` (may be null) receives the
/// number of runs that failed; their manifests record why.
///
/// # Safety
/// `scenario` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cb_scenario_run(
    scenario: *const CbScenario,
    out_dir: *const c_char,
    workers: usize,
    failed_runs: *mut usize,
) -> CbStatus {
    guard(|| {
        let cfg = &deref(scenario, "scenario")?.0;
        let dir = c_str(out_dir, "out_dir")?;
        let outcome = scenario::run_scenario(cfg, Path::new(dir), workers)?;
        if !failed_runs.is_null() {
            *failed_runs = outcome.failures().count();
        }
        Ok(())
    })
}
