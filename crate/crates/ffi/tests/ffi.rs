//! Exercises the C ABI from Rust and from a C program linked against the
//! static library.

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use comb_qmc_ffi::*;

fn model(beta: f64, j: f64) -> *mut CombQmcModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { comb_qmc_model_new(beta, j, &mut m) }, CombQmcStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = comb_qmc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn coefficients_at_theta_two() {
    let m = model(0.5 * 2.0f64.ln(), 1.0);
    let (mut t1, mut t2, mut t3, mut a) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { comb_qmc_model_coefficients(m, &mut t1, &mut t2, &mut t3, &mut a) }, CombQmcStatus::Ok);
    assert!((t1 - 3.5).abs() < 1e-12 && (t2 - 1.5).abs() < 1e-12 && (t3 - 3.0).abs() < 1e-12);
    assert!((a - 1.0 / 3.5).abs() < 1e-12);
    unsafe { comb_qmc_model_free(m) };
}

#[test]
fn routes_agree_through_the_abi() {
    let m = model(0.4, 1.5);
    let obs = CString::new(r#"{"factors": [{"site": [0, 0], "op": "sz"}, {"site": [1, 1], "op": "sz"}]}"#).unwrap();
    let mut values = Vec::new();
    for route in [CombQmcRoute::Iterative, CombQmcRoute::Product, CombQmcRoute::Oracle] {
        let (mut re, mut im) = (f64::NAN, f64::NAN);
        assert_eq!(unsafe { comb_qmc_evaluate(m, obs.as_ptr(), 2, route, &mut re, &mut im) }, CombQmcStatus::Ok);
        values.push((re, im));
    }
    for (re, im) in &values[1..] {
        assert!((re - values[0].0).abs() <= 1e-10 * (1.0 + values[0].0.abs()));
        assert!(im.abs() <= 1e-12);
    }
    unsafe { comb_qmc_model_free(m) };
}

#[test]
fn spine_rate_and_two_point() {
    let m = model(0.5 * 2.0f64.ln(), 1.0);
    let mut rate = 0.0;
    assert_eq!(unsafe { comb_qmc_clustering_rate(m, 5, &mut rate) }, CombQmcStatus::Ok);
    assert!((rate - 3.0 / 7.0).abs() < 1e-12);
    let mut v = 0.0;
    assert_eq!(unsafe { comb_qmc_two_point_zz(m, 0, 0, 2, 0, &mut v) }, CombQmcStatus::Ok);
    assert!((v - 9.0 / 49.0).abs() < 1e-12);
    unsafe { comb_qmc_model_free(m) };

    let flat = model(0.0, 1.0);
    assert_eq!(unsafe { comb_qmc_clustering_rate(flat, 4, &mut rate) }, CombQmcStatus::Undefined);
    assert!(rate.is_nan());
    unsafe { comb_qmc_model_free(flat) };
}

#[test]
fn errors_are_reported() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { comb_qmc_model_new(-1.0, 1.0, &mut m) }, CombQmcStatus::OutOfRange);
    assert!(m.is_null());
    assert!(last_error().contains("out of model range"));

    assert_eq!(unsafe { comb_qmc_model_new(1.0, 1.0, ptr::null_mut()) }, CombQmcStatus::NullArgument);

    let m = model(1.0, 1.0);
    let (mut re, mut im) = (0.0, 0.0);
    let bad = CString::new(r#"{"factors": [{"site": [0, 0], "op": "sx"}]}"#).unwrap();
    assert_eq!(
        unsafe { comb_qmc_evaluate(m, bad.as_ptr(), 1, CombQmcRoute::Iterative, &mut re, &mut im) },
        CombQmcStatus::InvalidArgument
    );
    let deep = CString::new(r#"{"factors": [{"site": [0, 0], "op": "sz"}]}"#).unwrap();
    assert_eq!(
        unsafe { comb_qmc_evaluate(m, deep.as_ptr(), 4, CombQmcRoute::Product, &mut re, &mut im) },
        CombQmcStatus::VolumeTooLarge
    );
    assert_eq!(unsafe { comb_qmc_two_point_zz(m, 0, 0, 0, 0, &mut re) }, CombQmcStatus::InvalidArgument);
    assert_eq!(
        unsafe { comb_qmc_evaluate(ptr::null(), deep.as_ptr(), 1, CombQmcRoute::Iterative, &mut re, &mut im) },
        CombQmcStatus::NullArgument
    );
    // a successful call clears the message
    let mut t = 0.0;
    assert_eq!(unsafe { comb_qmc_clustering_rate(m, 3, &mut t) }, CombQmcStatus::Ok);
    assert!(comb_qmc_last_error().is_null());
    unsafe { comb_qmc_model_free(m) };
    unsafe { comb_qmc_model_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_abi() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/comb_qmc.h")).unwrap();
    for name in [
        "comb_qmc_model_new",
        "comb_qmc_model_free",
        "comb_qmc_model_coefficients",
        "comb_qmc_evaluate",
        "comb_qmc_two_point_zz",
        "comb_qmc_clustering_rate",
        "comb_qmc_last_error",
        "COMB_QMC_STATUS_VOLUME_TOO_LARGE",
        "typedef struct CombQmcModel CombQmcModel",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "comb_qmc.h"

int main(void) {
    CombQmcModel *m = NULL;
    if (comb_qmc_model_new(0.34657359027997264, 1.0, &m) != COMB_QMC_STATUS_OK) return 1;
    double re = 0.0, im = 0.0;
    const char *obs = "{\"factors\": [{\"site\": [0, 0], \"op\": \"sz\"}, {\"site\": [1, 0], \"op\": \"sz\"}]}";
    if (comb_qmc_evaluate(m, obs, 1, COMB_QMC_ROUTE_ITERATIVE, &re, &im) != COMB_QMC_STATUS_OK) return 2;
    if (fabs(re - 3.0 / 7.0) > 1e-12) return 3;
    if (comb_qmc_model_new(-1.0, 1.0, &m) != COMB_QMC_STATUS_OUT_OF_RANGE) return 4;
    printf("%s\n", comb_qmc_last_error());
    comb_qmc_model_free(m);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.parent().unwrap().parent().unwrap();
    let lib = target_dir.join("libcomb_qmc_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let work = tempfile_dir();
    let src = work.join("probe.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = work.join("probe");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("out of model range"));
}

fn tempfile_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("c-probe-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
