//! C ABI for `erasure-qec`.
//!
//! Every function returns an [`EqecStatus`]. On failure the message is kept
//! per thread and can be read with [`eqec_last_error_message`]. Simulators
//! are opaque handles created by [`eqec_simulator_new`] and released with
//! [`eqec_simulator_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use erasure_qec::analysis::{estimate_pfail, fit_threshold, Axis, PfailEstimate, SamplingConfig};
use erasure_qec::code_layout::build_layout;
use erasure_qec::device_physics::{leakage_estimate, DeviceParams};
use erasure_qec::gate_evolve::sqrt_iswap_sim;
use erasure_qec::noise::{NoiseParams, Scheme};
use erasure_qec::pauli_sim::Simulator;
use erasure_qec::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SimulationFailed = 3,
    FitFailed = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqecScheme {
    Erasure = 0,
    Standard = 1,
    CodeCapacity = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqecAxis {
    P = 0,
    E = 1,
}

/// Noise point. `p_m < 0` selects the default `2p/3`; `scheme` is an
/// [`EqecScheme`] value.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EqecNoise {
    pub p: f64,
    pub p_m: f64,
    pub e: f64,
    pub q_plus: f64,
    pub q_minus: f64,
    pub scheme: i32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EqecEstimate {
    /// An [`EqecScheme`] value.
    pub scheme: i32,
    pub d: u32,
    pub p: f64,
    pub p_m: f64,
    pub e: f64,
    pub shots: u64,
    pub failures: u64,
    pub p_fail: f64,
    pub std_error: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EqecFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub threshold: f64,
    pub threshold_stderr: f64,
    pub mu: f64,
    pub mu_stderr: f64,
    pub residual: f64,
}

/// Device parameters in rad/s and seconds.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EqecDeviceParams {
    pub omega0: f64,
    pub eta: f64,
    pub delta: f64,
    pub g_c: f64,
    pub g_12: f64,
    pub g_rt1: f64,
    pub g_rt2: f64,
    pub kappa: f64,
    pub n_bar: f64,
    pub eps_d: f64,
    pub t1: f64,
    pub t_gate: f64,
    pub t_meas: f64,
    pub t_ramp: f64,
    pub q_minus: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EqecGateResult {
    pub infidelity: f64,
    pub leakage: f64,
    pub theta: f64,
}

/// Opaque circuit-level simulator for one distance and round count.
pub struct EqecSimulator {
    inner: Simulator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> EqecStatus {
    match err {
        Error::InvalidParameter(_) | Error::Config(_) | Error::EmptyRecords => EqecStatus::InvalidArgument,
        Error::FitFailed(_) | Error::Optimizer { .. } => EqecStatus::FitFailed,
        _ => EqecStatus::SimulationFailed,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EqecStatus, String)>) -> EqecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EqecStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            EqecStatus::Panic
        }
    }
}

fn lift<T>(r: erasure_qec::Result<T>) -> Result<T, (EqecStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (EqecStatus, String) {
    (EqecStatus::NullPointer, "null pointer argument".into())
}

fn scheme_code(s: Scheme) -> i32 {
    match s {
        Scheme::Erasure => EqecScheme::Erasure as i32,
        Scheme::Standard => EqecScheme::Standard as i32,
        Scheme::CodeCapacity => EqecScheme::CodeCapacity as i32,
    }
}

fn scheme_from_code(code: i32) -> Option<Scheme> {
    match code {
        0 => Some(Scheme::Erasure),
        1 => Some(Scheme::Standard),
        2 => Some(Scheme::CodeCapacity),
        _ => None,
    }
}

impl From<&PfailEstimate> for EqecEstimate {
    fn from(e: &PfailEstimate) -> Self {
        EqecEstimate {
            scheme: scheme_code(e.scheme),
            d: e.d as u32,
            p: e.p,
            p_m: e.p_m,
            e: e.e,
            shots: e.shots,
            failures: e.failures,
            p_fail: e.p_fail,
            std_error: e.stderr,
        }
    }
}

impl From<DeviceParams> for EqecDeviceParams {
    fn from(p: DeviceParams) -> Self {
        EqecDeviceParams {
            omega0: p.omega0,
            eta: p.eta,
            delta: p.delta,
            g_c: p.g_c,
            g_12: p.g_12,
            g_rt1: p.g_rt1,
            g_rt2: p.g_rt2,
            kappa: p.kappa,
            n_bar: p.n_bar,
            eps_d: p.eps_d,
            t1: p.t1,
            t_gate: p.t_gate,
            t_meas: p.t_meas,
            t_ramp: p.t_ramp,
            q_minus: p.q_minus,
        }
    }
}

impl From<EqecDeviceParams> for DeviceParams {
    fn from(p: EqecDeviceParams) -> Self {
        DeviceParams {
            omega0: p.omega0,
            eta: p.eta,
            delta: p.delta,
            g_c: p.g_c,
            g_12: p.g_12,
            g_rt1: p.g_rt1,
            g_rt2: p.g_rt2,
            kappa: p.kappa,
            n_bar: p.n_bar,
            eps_d: p.eps_d,
            t1: p.t1,
            t_gate: p.t_gate,
            t_meas: p.t_meas,
            t_ramp: p.t_ramp,
            q_minus: p.q_minus,
        }
    }
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 when there is no message.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn eqec_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: the caller guarantees `buf` is valid for `len` bytes and n < len.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Build a simulator for distance `d` (odd, ≥ 3) with `rounds` noisy rounds.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn eqec_simulator_new(d: u32, rounds: u32, out: *mut *mut EqecSimulator) -> EqecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let sim = lift(build_layout(d as usize).and_then(|l| Simulator::new(l, rounds as usize)))?;
        // SAFETY: checked non-null above; the caller guarantees validity.
        unsafe { *out = Box::into_raw(Box::new(EqecSimulator { inner: sim })) };
        Ok(())
    })
}

/// Release a simulator. Null is ignored.
///
/// # Safety
/// `sim` must be null or a pointer from [`eqec_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eqec_simulator_free(sim: *mut EqecSimulator) {
    if !sim.is_null() {
        // SAFETY: the caller passes a pointer created by Box::into_raw.
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Logical failure rate at one noise point with `shots` total shots.
///
/// # Safety
/// `sim`, `noise` and `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn eqec_estimate_pfail(sim: *const EqecSimulator, noise: *const EqecNoise, shots: u64, seed: u64, out: *mut EqecEstimate) -> EqecStatus {
    guard(|| {
        // SAFETY: pointers are checked for null; the caller guarantees validity.
        let (sim, noise) = unsafe { (sim.as_ref().ok_or_else(null)?, noise.as_ref().ok_or_else(null)?) };
        if out.is_null() {
            return Err(null());
        }
        let scheme = scheme_from_code(noise.scheme).ok_or((EqecStatus::InvalidArgument, "unknown scheme".into()))?;
        let mut params = NoiseParams::new(noise.p, noise.e, scheme).with_detection(noise.q_plus, noise.q_minus);
        if noise.p_m >= 0.0 {
            params = params.with_p_m(noise.p_m);
        }
        let est = lift(estimate_pfail(&sim.inner, &params, &SamplingConfig::shots(shots), seed))?;
        // SAFETY: checked non-null above.
        unsafe { *out = (&est).into() };
        Ok(())
    })
}

/// Finite-size-scaling threshold fit over `n` estimates along `axis`, an
/// [`EqecAxis`] value.
///
/// # Safety
/// `records` must be valid for `n` elements and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn eqec_fit_threshold(records: *const EqecEstimate, n: usize, axis: i32, out: *mut EqecFit) -> EqecStatus {
    guard(|| {
        if records.is_null() || out.is_null() {
            return Err(null());
        }
        // SAFETY: the caller guarantees `records` holds `n` elements.
        let slice = unsafe { std::slice::from_raw_parts(records, n) };
        let data = slice
            .iter()
            .map(|r| {
                Ok(PfailEstimate {
                    scheme: scheme_from_code(r.scheme).ok_or((EqecStatus::InvalidArgument, "unknown scheme".to_string()))?,
                    d: r.d as usize,
                    p: r.p,
                    p_m: r.p_m,
                    e: r.e,
                    shots: r.shots,
                    failures: r.failures,
                    p_fail: r.p_fail,
                    stderr: r.std_error,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if data.is_empty() {
            return Err((EqecStatus::InvalidArgument, Error::EmptyRecords.to_string()));
        }
        let axis = match axis {
            a if a == EqecAxis::P as i32 => Axis::P,
            a if a == EqecAxis::E as i32 => Axis::E,
            _ => return Err((EqecStatus::InvalidArgument, format!("unknown axis {axis}"))),
        };
        let fit = lift(fit_threshold(&data, axis))?;
        // SAFETY: checked non-null above.
        unsafe {
            *out = EqecFit {
                a: fit.a,
                b: fit.b,
                c: fit.c,
                threshold: fit.threshold,
                threshold_stderr: fit.threshold_stderr(),
                mu: fit.mu,
                mu_stderr: fit.mu_stderr(),
                residual: fit.residual,
            }
        };
        Ok(())
    })
}

/// Fill `out` with the dual-rail √iSWAP example parameters.
///
/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eqec_device_params_default(out: *mut EqecDeviceParams) -> EqecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        // SAFETY: checked non-null above.
        unsafe { *out = DeviceParams::fig3().into() };
        Ok(())
    })
}

/// Simulate the dual-rail √iSWAP gate.
///
/// # Safety
/// `params` and `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn eqec_sqrt_iswap(params: *const EqecDeviceParams, levels: u32, tol: f64, out: *mut EqecGateResult) -> EqecStatus {
    guard(|| {
        // SAFETY: checked for null; the caller guarantees validity.
        let params = unsafe { params.as_ref().ok_or_else(null)? };
        if out.is_null() {
            return Err(null());
        }
        let r = lift(sqrt_iswap_sim(&(*params).into(), levels as usize, tol))?;
        // SAFETY: checked non-null above.
        unsafe {
            *out = EqecGateResult {
                infidelity: r.infidelity,
                leakage: r.leakage,
                theta: r.theta,
            }
        };
        Ok(())
    })
}

/// Leakage estimate 2g²/(Δ⁴T_ramp²) of a linear coupling ramp.
///
/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eqec_leakage_estimate(g_max: f64, delta: f64, t_ramp: f64, out: *mut f64) -> EqecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let l = lift(leakage_estimate(g_max, delta, t_ramp, None))?;
        // SAFETY: checked non-null above.
        unsafe { *out = l.p_leak };
        Ok(())
    })
}
