use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ebc_ffi::*;

fn last_error() -> String {
    let n = unsafe { ebc_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; n];
    unsafe { ebc_last_error_message(buf.as_mut_ptr(), n) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn toy_joint(v: &[f64]) -> *mut EbcJoint {
    let mut j = ptr::null_mut();
    let rc = unsafe { ebc_joint_from_geometry(4.0, 0.2, 10.0, v.as_ptr(), v.len(), &mut j) };
    assert_eq!(rc, EBC_OK, "{}", last_error());
    j
}

#[test]
fn joint_and_region_round_trip() {
    let j = toy_joint(&[0.0, 144.0]);
    unsafe {
        let mut k = 0;
        assert_eq!(ebc_joint_num_receivers(j, &mut k), EBC_OK);
        assert_eq!(k, 2);
        let mut total = 0.0;
        for s in 0..4 {
            for sh in 0..4 {
                let mut p = 0.0;
                assert_eq!(ebc_joint_probability(j, s, sh, &mut p), EBC_OK);
                total += p;
            }
        }
        assert!((total - 1.0).abs() < 1e-12);

        let (mut rate, mut mu) = (0.0, 0.0);
        assert_eq!(ebc_sym_rate(j, &mut rate, &mut mu), EBC_OK);
        assert!(rate > 0.0 && rate < 0.5);

        let mut r = ptr::null_mut();
        assert_eq!(ebc_region_new(j, &mut r), EBC_OK);
        let mut n = 0;
        assert_eq!(ebc_region_num_vertices(r, &mut n), EBC_OK);
        assert!(n >= 3);
        let mut inside = false;
        assert_eq!(ebc_region_contains(r, rate, rate, 1e-9, &mut inside), EBC_OK);
        assert!(inside);
        assert_eq!(
            ebc_region_contains(r, rate + 1e-3, rate + 1e-3, 1e-9, &mut inside),
            EBC_OK
        );
        assert!(!inside);
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(ebc_region_vertex(r, n, &mut a, &mut b), EBC_ERR_INVALID_ARGUMENT);
        assert!(last_error().contains("out of range"));

        ebc_region_free(r);
        ebc_joint_free(j);
    }
}

#[test]
fn solve_and_simulate_agree_with_sym_rate() {
    let j = toy_joint(&[0.0, 144.0]);
    unsafe {
        let mut rate = 0.0;
        assert_eq!(ebc_sym_rate(j, &mut rate, ptr::null_mut()), EBC_OK);
        let mut rates = [0.0; 2];
        let mut value = 0.0;
        assert_eq!(ebc_solve_symmetric(j, 4, rates.as_mut_ptr(), 2, &mut value), EBC_OK);
        assert!((value - rate).abs() < 1e-3, "{value} vs {rate}");
        assert_eq!(
            ebc_solve_symmetric(j, 4, rates.as_mut_ptr(), 1, &mut value),
            EBC_ERR_INVALID_ARGUMENT
        );

        let (mut r1, mut r2) = (0.0, 0.0);
        assert_eq!(ebc_simulate(j, 0.02, 200_000, 7, &mut r1, &mut r2), EBC_OK);
        assert!(r1 > 0.9 * rate && r2 > 0.9 * rate, "{r1} {r2} vs {rate}");
        ebc_joint_free(j);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut j = ptr::null_mut();
        let v = [0.0, 60.0];
        assert_eq!(
            ebc_joint_from_geometry(-1.0, 0.2, 10.0, v.as_ptr(), 2, &mut j),
            EBC_ERR_INVALID_GEOMETRY
        );
        assert!(!last_error().is_empty());
        assert!(j.is_null());
        assert_eq!(
            ebc_joint_from_geometry(4.0, 0.2, 10.0, ptr::null(), 2, &mut j),
            EBC_ERR_NULL_POINTER
        );
        let mut k = 0;
        assert_eq!(ebc_joint_num_receivers(ptr::null(), &mut k), EBC_ERR_NULL_POINTER);

        let path = CString::new("/nonexistent/joint.csv").unwrap();
        assert_eq!(ebc_joint_from_csv(path.as_ptr(), false, &mut j), EBC_ERR_IO);

        let mut lam = 0.0;
        assert_eq!(
            ebc_min_density(0.9, 144.0, 0.2, 10.0, 50.0, 1e-4, &mut lam),
            EBC_ERR_UNREACHABLE
        );
        assert_eq!(ebc_min_density(0.4, 144.0, 0.2, 10.0, 50.0, 1e-4, &mut lam), EBC_OK);
        assert!(last_error().is_empty());
        assert!(lam > 1.0 && lam < 50.0);

        // Freeing null is a no-op.
        ebc_joint_free(ptr::null_mut());
        ebc_region_free(ptr::null_mut());
    }
}

#[test]
fn csv_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("joint.csv");
    let mut body = String::from("s,shat,p\n");
    for s in 0..4 {
        body.push_str(&format!("{s:02b},{s:02b},0.25\n"));
    }
    std::fs::write(&path, body).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut j = ptr::null_mut();
        assert_eq!(ebc_joint_from_csv(c.as_ptr(), true, &mut j), EBC_OK, "{}", last_error());
        let mut rate = 0.0;
        assert_eq!(ebc_sym_rate(j, &mut rate, ptr::null_mut()), EBC_OK);
        assert!(rate > 0.0);
        ebc_joint_free(j);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ebc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let lib = target_dir().join("libebc_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "ebc.h"
int main(void) {
    double v[2] = {0.0, 144.0};
    EbcJoint *j = NULL;
    if (ebc_joint_from_geometry(4.0, 0.2, 10.0, v, 2, &j) != EBC_OK) return 1;
    double rate = 0.0, mu = 0.0;
    if (ebc_sym_rate(j, &rate, &mu) != EBC_OK) return 2;
    EbcRegion *r = NULL;
    if (ebc_region_new(j, &r) != EBC_OK) return 3;
    size_t n = 0;
    ebc_region_num_vertices(r, &n);
    printf("%.6f %zu\n", rate, n);
    ebc_region_free(r);
    ebc_joint_free(j);
    return ebc_joint_num_receivers(NULL, &n) == EBC_ERR_NULL_POINTER ? 0 : 4;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    let rate: f64 = text.split_whitespace().next().unwrap().parse().unwrap();
    assert!(rate > 0.0 && rate < 0.5);
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
