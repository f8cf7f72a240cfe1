use std::ffi::{c_char, CString};
use std::ptr;

use qamech_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { qam_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn grid() -> QamGrid {
    QamGrid {
        x_min: -8.0,
        x_max: 8.0,
        n_points: 801,
        dt_pde: 1e-2,
    }
}

#[test]
fn harmonic_ground_state_round_trip() {
    unsafe {
        let mut pot = ptr::null_mut();
        assert_eq!(qam_potential_harmonic(1.0, 1.0, &mut pot), QamStatus::Ok);
        let mut sol = ptr::null_mut();
        assert_eq!(qam_stationary_solve(pot, 1.0, 1.0, grid(), 0.1, 1.2, 1e-10, &mut sol), QamStatus::Ok);
        let (mut e, mut r, mut c) = (0.0, 0.0, 0);
        assert_eq!(qam_stationary_energy(sol, &mut e, &mut r, &mut c), QamStatus::Ok);
        assert!((e - 0.5).abs() < 1e-6, "{e}");
        assert_eq!(c, 1);

        let mut needed = 0;
        assert_eq!(qam_stationary_osmotic(sol, ptr::null_mut(), 0, &mut needed), QamStatus::Ok);
        assert_eq!(needed, 801);
        let mut small = vec![0.0; 10];
        assert_eq!(
            qam_stationary_osmotic(sol, small.as_mut_ptr(), small.len(), &mut needed),
            QamStatus::BufferTooSmall
        );
        assert!(last_error().contains("801"));
        let mut u = vec![0.0; needed];
        assert_eq!(qam_stationary_osmotic(sol, u.as_mut_ptr(), u.len(), ptr::null_mut()), QamStatus::Ok);
        assert!(u[400].abs() < 1e-6 && (u[450] + 1.0).abs() < 1e-4, "{} {}", u[400], u[450]);

        let sde = QamSde {
            seed: 5,
            n_paths: 500,
            dt_sde: 1e-2,
            t_end: 2.0,
            record_every: 10,
            backward: 0,
        };
        let mut ens = ptr::null_mut();
        assert_eq!(qam_sample_stationary(sol, sde, &mut ens), QamStatus::Ok);
        let (mut n_paths, mut n_times) = (0, 0);
        assert_eq!(qam_ensemble_shape(ens, &mut n_paths, &mut n_times), QamStatus::Ok);
        assert_eq!((n_paths, n_times), (500, 21));
        let mut acf = vec![0.0; 6];
        assert_eq!(qam_ensemble_autocorrelation(ens, 5, acf.as_mut_ptr(), 6, ptr::null_mut()), QamStatus::Ok);
        assert!(acf[0] > 0.4 && acf[0] < 0.6, "{}", acf[0]);
        assert!(acf[5] < acf[0]);
        assert_eq!(qam_ensemble_path(ens, 500, ptr::null_mut(), 0, ptr::null_mut()), QamStatus::InvalidArgument);

        qam_ensemble_free(ens);
        qam_stationary_free(sol);
        qam_potential_free(pot);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    unsafe {
        let mut pot = ptr::null_mut();
        assert_eq!(qam_potential_harmonic(-1.0, 1.0, &mut pot), QamStatus::InvalidArgument);
        assert!(pot.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(qam_potential_harmonic(1.0, 1.0, ptr::null_mut()), QamStatus::NullPointer);
        assert_eq!(qam_stationary_energy(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), QamStatus::NullPointer);

        assert_eq!(qam_potential_harmonic(1.0, 1.0, &mut pot), QamStatus::Ok);
        assert_eq!(qam_last_error_message(ptr::null_mut(), 0), 0);
        let mut sol = ptr::null_mut();
        let status = qam_stationary_solve(pot, 1.0, 1.0, grid(), 0.6, 1.2, 1e-8, &mut sol);
        assert_eq!(status, QamStatus::Numerical);
        assert!(last_error().contains("no bracket"), "{}", last_error());
        qam_potential_free(pot);
        qam_potential_free(ptr::null_mut());
    }
}

#[test]
fn coherent_paths_and_traversal() {
    unsafe {
        let g = QamGrid {
            x_min: -10.0,
            x_max: 10.0,
            n_points: 401,
            dt_pde: 1e-2,
        };
        let sde = QamSde {
            seed: 9,
            n_paths: 400,
            dt_sde: 1e-2,
            t_end: 3.2,
            record_every: 1,
            backward: 0,
        };
        let mut ens = ptr::null_mut();
        assert_eq!(qam_sample_coherent(1.0, 3.0, 1.0, 1.0, g, sde, &mut ens), QamStatus::Ok);
        let mut s = QamPassageSummary::default();
        assert_eq!(qam_ensemble_traversal(ens, -1.0, 1.0, &mut s), QamStatus::Ok);
        assert_eq!(s.n_paths, 400);
        assert_eq!(s.n_qualified + s.n_censored + s.n_never + s.n_ineligible, 400);
        assert!(s.n_qualified > 0);
        assert_eq!(qam_ensemble_traversal(ens, 1.0, -1.0, &mut s), QamStatus::InvalidArgument);
        qam_ensemble_free(ens);
    }
}

#[test]
fn scenario_config_errors_use_the_config_status() {
    let text = CString::new("scenario = \"coherent_oscillator\"\n[physics]\nomega_typo = 1\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let status = unsafe { qam_run_scenario(text.as_ptr(), out.as_ptr(), 0, 0) };
    assert_eq!(status, QamStatus::Config);
    assert!(last_error().contains("omega_typo"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { std::ffi::CStr::from_ptr(qam_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/qamech.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in ["qam_stationary_solve", "qam_run_scenario", "qam_last_error_message", "QAM_STATUS_GATE_FAILED"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler on PATH; header syntax check skipped");
        return;
    };
    assert!(status.success());
}
