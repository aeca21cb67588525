use std::ffi::{CStr, CString};
use std::ptr;

use bdris_est_ffi::*;

fn last_error() -> String {
    let p = bdris_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn noiseless_on_grid_trial_is_repeatable() {
    unsafe {
        let c = bdris_config_desk();
        assert_eq!(bdris_config_set_snr_db(c, f64::NAN), BDRIS_OK);
        assert_eq!(bdris_config_set_on_grid(c, true), BDRIS_OK);
        assert_eq!(bdris_config_set_seed(c, 7), BDRIS_OK);
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        assert_eq!(bdris_run_trial(c, 1, BDRIS_ESTIMATOR_PROPOSED, a.as_mut_ptr()), BDRIS_OK);
        assert_eq!(bdris_run_trial(c, 1, BDRIS_ESTIMATOR_PROPOSED, b.as_mut_ptr()), BDRIS_OK);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert!(a[0] < 1e-6, "nmse {}", a[0]);
        assert!(a[1].is_nan() && a[2].is_nan());
        bdris_config_free(c);
    }
}

#[test]
fn invalid_arguments_report_codes_and_messages() {
    unsafe {
        let mut out = [0.0; 3];
        assert_eq!(bdris_run_trial(ptr::null(), 0, 1, out.as_mut_ptr()), BDRIS_ERR_NULL_POINTER);
        assert!(last_error().contains("config"));

        let c = bdris_config_desk();
        assert_eq!(bdris_run_trial(c, 0, 0, out.as_mut_ptr()), BDRIS_ERR_INVALID_ARGUMENT);
        assert_eq!(bdris_run_trial(c, 0, 8, out.as_mut_ptr()), BDRIS_ERR_INVALID_ARGUMENT);
        assert_eq!(bdris_config_set_snr_db(c, f64::INFINITY), BDRIS_ERR_INVALID_ARGUMENT);
        bdris_config_free(c);
        bdris_config_free(ptr::null_mut());

        let mut h = ptr::null_mut();
        let bad = CString::new("seed = [").unwrap();
        assert_eq!(bdris_config_from_toml(bad.as_ptr(), &mut h), BDRIS_ERR_PARSE);
        assert!(h.is_null());
        assert!(last_error().contains("parse"));

        let missing = CString::new("/nonexistent/config.toml").unwrap();
        assert_eq!(bdris_config_load(missing.as_ptr(), &mut h), BDRIS_ERR_IO);
    }
}

#[test]
fn config_files_load_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("snr.csv");
    let toml_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml");
    unsafe {
        let mut c = ptr::null_mut();
        let p = CString::new(toml_path).unwrap();
        assert_eq!(bdris_config_load(p.as_ptr(), &mut c), BDRIS_OK);
        let snr = [-5.0, 5.0];
        let out = CString::new(csv.to_str().unwrap()).unwrap();
        let mask = BDRIS_ESTIMATOR_PROPOSED | BDRIS_ESTIMATOR_SBL;
        assert_eq!(bdris_run_snr_campaign(c, snr.as_ptr(), snr.len(), 2, mask, out.as_ptr()), BDRIS_OK);
        assert_eq!(bdris_run_snr_campaign(c, snr.as_ptr(), 0, 2, mask, out.as_ptr()), BDRIS_ERR_INVALID_ARGUMENT);
        bdris_config_free(c);
    }
    let text = std::fs::read_to_string(csv).unwrap();
    // header plus two SNR values times two estimators
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn steering_vector_has_unit_modulus_entries() {
    let mut v = vec![0.0; 2 * 12];
    unsafe {
        assert_eq!(bdris_upa_response(4, 3, 0.5, 0.3, -0.2, v.as_mut_ptr()), BDRIS_OK);
        assert_eq!(bdris_upa_response(0, 3, 0.5, 0.3, -0.2, v.as_mut_ptr()), BDRIS_ERR_CONFIG);
    }
    for z in v.chunks_exact(2) {
        assert!((z[0].hypot(z[1]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn nmse_matches_direct_formula() {
    let truth = [1.0, 0.0, 0.0, 2.0];
    let est = [1.0, 1.0, 0.0, 2.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(bdris_nmse(est.as_ptr(), truth.as_ptr(), 2, &mut out), BDRIS_OK);
    }
    assert!((out - 0.2).abs() < 1e-15);
}

#[test]
fn selftest_csv_round_trips_through_the_abi() {
    let mut s = ptr::null_mut();
    let mut passed = false;
    unsafe {
        assert_eq!(bdris_selftest(5, &mut s, &mut passed), BDRIS_OK);
        let csv = CStr::from_ptr(s).to_str().unwrap().to_owned();
        bdris_string_free(s);
        assert!(csv.starts_with("check,cases,worst,tolerance,pass"));
        assert_eq!(passed, !csv.contains(",false"));
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/bdris_est.h");
    for name in [
        "bdris_last_error_message",
        "bdris_config_full_scale",
        "bdris_config_desk",
        "bdris_config_from_toml",
        "bdris_config_load",
        "bdris_config_free",
        "bdris_config_set_snr_db",
        "bdris_config_set_on_grid",
        "bdris_config_set_seed",
        "bdris_run_trial",
        "bdris_run_snr_campaign",
        "bdris_selftest",
        "bdris_string_free",
        "bdris_upa_response",
        "bdris_nmse",
        "typedef struct BdrisConfig BdrisConfig",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let root = env!("CARGO_MANIFEST_DIR");
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(format!("{root}/include"))
        .arg(format!("{root}/examples/trial.c"))
        .status()
        .unwrap();
    assert!(status.success());
}
