use std::ffi::CStr;
use std::ptr;

use erasure_qec_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { eqec_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn noise(p: f64, e: f64, scheme: EqecScheme) -> EqecNoise {
    EqecNoise {
        p,
        p_m: -1.0,
        e,
        q_plus: 0.0,
        q_minus: 0.0,
        scheme: scheme as i32,
    }
}

#[test]
fn simulator_lifecycle_and_noiseless_estimate() {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { eqec_simulator_new(3, 3, &mut sim) }, EqecStatus::Ok);
    assert!(!sim.is_null());
    let mut est = EqecEstimate::default();
    let n = noise(0.0, 0.0, EqecScheme::Standard);
    assert_eq!(unsafe { eqec_estimate_pfail(sim, &n, 500, 1, &mut est) }, EqecStatus::Ok);
    assert_eq!((est.d, est.shots, est.failures), (3, 500, 0));
    assert_eq!(est.scheme, EqecScheme::Standard as i32);
    unsafe { eqec_simulator_free(sim) };
    unsafe { eqec_simulator_free(ptr::null_mut()) };
}

#[test]
fn estimates_are_reproducible() {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { eqec_simulator_new(3, 3, &mut sim) }, EqecStatus::Ok);
    let n = noise(0.004, 0.02, EqecScheme::Erasure);
    let (mut a, mut b) = (EqecEstimate::default(), EqecEstimate::default());
    unsafe {
        assert_eq!(eqec_estimate_pfail(sim, &n, 3000, 9, &mut a), EqecStatus::Ok);
        assert_eq!(eqec_estimate_pfail(sim, &n, 3000, 9, &mut b), EqecStatus::Ok);
        eqec_simulator_free(sim);
    }
    assert_eq!(a, b);
    assert!(a.failures > 0);
    assert!((a.p_m - 2.0 * 0.004 / 3.0).abs() < 1e-15);
}

#[test]
fn invalid_arguments_set_status_and_message() {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { eqec_simulator_new(4, 3, &mut sim) }, EqecStatus::InvalidArgument);
    assert!(sim.is_null());
    assert!(last_error().contains("invalid"));
    assert_eq!(unsafe { eqec_simulator_new(3, 3, ptr::null_mut()) }, EqecStatus::NullPointer);
    assert!(last_error().contains("null"));

    assert_eq!(unsafe { eqec_simulator_new(3, 3, &mut sim) }, EqecStatus::Ok);
    let mut est = EqecEstimate::default();
    let bad = noise(1.5, 0.0, EqecScheme::Standard);
    assert_eq!(unsafe { eqec_estimate_pfail(sim, &bad, 10, 0, &mut est) }, EqecStatus::InvalidArgument);
    let mut weird = noise(0.0, 0.0, EqecScheme::Standard);
    weird.scheme = 17;
    assert_eq!(unsafe { eqec_estimate_pfail(sim, &weird, 10, 0, &mut est) }, EqecStatus::InvalidArgument);
    assert!(last_error().contains("scheme"));
    unsafe { eqec_simulator_free(sim) };
}

#[test]
fn truncated_error_buffer_is_terminated() {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { eqec_simulator_new(2, 3, &mut sim) }, EqecStatus::InvalidArgument);
    let mut buf = [1 as std::ffi::c_char; 8];
    let full = unsafe { eqec_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(full > 7);
    assert_eq!(buf[7], 0);
    assert_eq!(unsafe { eqec_last_error_message(ptr::null_mut(), 0) }, full);
}

#[test]
fn fit_rejects_empty_and_degenerate_input() {
    let mut fit = EqecFit::default();
    let one = EqecEstimate::default();
    assert_eq!(unsafe { eqec_fit_threshold(&one, 0, EqecAxis::P as i32, &mut fit) }, EqecStatus::InvalidArgument);
    assert_eq!(unsafe { eqec_fit_threshold(&one, 1, 9, &mut fit) }, EqecStatus::InvalidArgument);
    assert_eq!(unsafe { eqec_fit_threshold(&one, 1, EqecAxis::P as i32, &mut fit) }, EqecStatus::FitFailed);
}

#[test]
fn fit_recovers_a_synthetic_crossing() {
    let mut records = Vec::new();
    for d in [3u32, 5, 7] {
        for i in 0..7 {
            let p = 0.002 + 0.0005 * i as f64;
            let x = (p - 0.004) * (d as f64).powf(1.0);
            let p_fail = 0.05 + 20.0 * x + 3000.0 * x * x;
            records.push(EqecEstimate {
                scheme: EqecScheme::Standard as i32,
                d,
                p,
                p_m: 2.0 * p / 3.0,
                e: 0.0,
                shots: 100_000,
                failures: (p_fail * 1e5) as u64,
                p_fail,
                std_error: 1e-4,
            });
        }
    }
    let mut fit = EqecFit::default();
    assert_eq!(unsafe { eqec_fit_threshold(records.as_ptr(), records.len(), EqecAxis::P as i32, &mut fit) }, EqecStatus::Ok);
    assert!((fit.threshold - 0.004).abs() < 1e-6, "{fit:?}");
    assert!((fit.mu - 1.0).abs() < 1e-3, "{fit:?}");
}

#[test]
fn device_physics_entry_points() {
    let mut params = EqecDeviceParams::default();
    assert_eq!(unsafe { eqec_device_params_default(&mut params) }, EqecStatus::Ok);
    let mut p_leak = 0.0;
    assert_eq!(unsafe { eqec_leakage_estimate(params.g_c, params.delta, params.t_ramp, &mut p_leak) }, EqecStatus::Ok);
    assert!(p_leak > 1e-6 && p_leak < 3e-6);
    assert_eq!(unsafe { eqec_leakage_estimate(1.0, 0.0, 1.0, &mut p_leak) }, EqecStatus::InvalidArgument);

    let mut gate = EqecGateResult::default();
    assert_eq!(unsafe { eqec_sqrt_iswap(&params, 3, 1e-7, &mut gate) }, EqecStatus::Ok);
    assert!(gate.infidelity < 1e-3 && gate.leakage > 0.0 && gate.leakage < 1e-4, "{gate:?}");
    assert_eq!(unsafe { eqec_sqrt_iswap(&params, 1, 1e-7, &mut gate) }, EqecStatus::InvalidArgument);
}

#[test]
fn header_matches_exports() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/erasure_qec.h")).unwrap();
    for name in [
        "eqec_last_error_message",
        "eqec_simulator_new",
        "eqec_simulator_free",
        "eqec_estimate_pfail",
        "eqec_fit_threshold",
        "eqec_device_params_default",
        "eqec_sqrt_iswap",
        "eqec_leakage_estimate",
        "typedef struct EqecSimulator EqecSimulator;",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c_with_stdio() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile_dir();
    let src = dir.join("probe.c");
    std::fs::write(&src, "#include <stdio.h>\n#include \"erasure_qec.h\"\nint main(void) { EqecEstimate e; e.std_error = 0; return (int)e.std_error; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    let _ = std::fs::remove_dir_all(&dir);
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("eqec-header-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
