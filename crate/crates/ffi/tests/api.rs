use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use nonlocal_fv_ffi::*;

fn last_error() -> String {
    let p = nfv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn preset(name: &str) -> *mut NfvConfig {
    let name = CString::new(name).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { nfv_config_preset(name.as_ptr(), &mut cfg) }, NfvStatus::Ok);
    cfg
}

const SMALL_1D: &str = r#"
[model]
id = "kk1d"

[grid]
lo = 0.0
hi = 4.0
dx = 0.05

[run]
t_final = 0.1
snapshots = []

[converge]
base_dx = 0.05
levels = 3
"#;

fn small_config() -> *mut NfvConfig {
    let text = CString::new(SMALL_1D).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { nfv_config_from_toml(text.as_ptr(), &mut cfg) }, NfvStatus::Ok);
    cfg
}

#[test]
fn run_through_handles() {
    let cfg = small_config();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(nfv_run(cfg, &mut run), NfvStatus::Ok);
        let (mut dim, mut comps, mut nx, mut ny) = (0, 0, 0, 0);
        assert_eq!(
            nfv_run_shape(run, &mut dim, &mut comps, &mut nx, &mut ny),
            NfvStatus::Ok
        );
        assert_eq!((dim, comps, nx, ny), (1, 2, 80, 1));
        let (mut t, mut steps) = (0.0, 0);
        assert_eq!(nfv_run_time(run, &mut t, &mut steps), NfvStatus::Ok);
        assert_eq!(t, 0.1);
        assert_eq!(steps, 14);
        let mut u = vec![0.0; 80];
        assert_eq!(nfv_run_copy_component(run, 1, u.as_mut_ptr(), 80), NfvStatus::Ok);
        assert!(u.iter().all(|v| *v >= -1e-14) && u.iter().any(|v| *v > 0.0));
        assert_eq!(nfv_run_copy_component(run, 2, u.as_mut_ptr(), 80), NfvStatus::Config);
        assert!(last_error().contains("out of range"));
        nfv_run_free(run);
        nfv_config_free(cfg);
    }
}

#[test]
fn two_dimensional_preset_runs() {
    let cfg = preset("paper-2d");
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(nfv_run(cfg, &mut run), NfvStatus::Ok);
        let (mut dim, mut comps, mut nx, mut ny) = (0, 0, 0, 0);
        nfv_run_shape(run, &mut dim, &mut comps, &mut nx, &mut ny);
        assert_eq!((dim, comps, nx, ny), (2, 2, 44, 44));
        let mut u = vec![0.0; nx * ny];
        assert_eq!(nfv_run_copy_component(run, 0, u.as_mut_ptr(), u.len()), NfvStatus::Ok);
        assert_eq!(
            nfv_run_copy_component(run, 0, u.as_mut_ptr(), 10),
            NfvStatus::BufferTooSmall
        );
        nfv_run_free(run);
        nfv_config_free(cfg);
    }
}

#[test]
fn errors_are_reported_with_messages() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("[model]\nid = \"kk1d\"\nbogus = 1\n").unwrap();
    unsafe {
        assert_eq!(nfv_config_from_toml(bad.as_ptr(), &mut cfg), NfvStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("bogus"));
        assert_eq!(nfv_config_from_toml(ptr::null(), &mut cfg), NfvStatus::NullPointer);
        let not_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(
            nfv_config_preset(not_utf8.as_ptr().cast(), &mut cfg),
            NfvStatus::InvalidUtf8
        );
        assert_eq!(nfv_run(ptr::null(), &mut ptr::null_mut()), NfvStatus::NullPointer);
    }
    let cfg = small_config();
    unsafe {
        assert_eq!(nfv_config_set_dx(cfg, -1.0), NfvStatus::Config);
        assert_eq!(nfv_config_set_final_time(cfg, f64::NAN), NfvStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(nfv_run(cfg, &mut run), NfvStatus::Config);
        assert!(run.is_null());
        nfv_config_free(cfg);
    }
    // a successful call clears the message
    let cfg = preset("paper-1d");
    assert!(nfv_last_error().is_null());
    unsafe { nfv_config_free(cfg) };
}

#[test]
fn convergence_table_through_buffers() {
    let cfg = small_config();
    let (mut dx, mut e, mut a) = ([0.0; 3], [0.0; 3], [0.0; 3]);
    unsafe {
        let status = nfv_converge(cfg, 3, dx.as_mut_ptr(), e.as_mut_ptr(), a.as_mut_ptr());
        assert!(matches!(status, NfvStatus::Ok | NfvStatus::MonitorViolation));
        assert_eq!(dx, [0.05, 0.025, 0.0125]);
        assert!(e.iter().all(|v| *v > 0.0));
        assert!(a[0].is_finite() && a[1].is_finite() && a[2].is_nan());
        assert_eq!(
            nfv_converge(cfg, 1, dx.as_mut_ptr(), e.as_mut_ptr(), a.as_mut_ptr()),
            NfvStatus::Config
        );
        nfv_config_free(cfg);
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(nfv_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(crate_dir().join("include/nonlocal_fv.h")).unwrap();
    for name in [
        "nfv_last_error",
        "nfv_version",
        "nfv_config_from_toml",
        "nfv_config_preset",
        "nfv_config_set_dx",
        "nfv_config_set_final_time",
        "nfv_config_free",
        "nfv_run",
        "nfv_run_free",
        "nfv_run_shape",
        "nfv_run_time",
        "nfv_run_copy_component",
        "nfv_converge",
        "typedef struct NfvConfig NfvConfig",
        "NFV_STATUS_MONITOR_VIOLATION = 2",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    // `cargo test` builds only the rlib; ask for the static library in a
    // separate target directory so the running build is not disturbed
    let target = crate_dir().join("../../target/c-smoke");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let built = Command::new(cargo)
        .args([
            "build",
            "--quiet",
            "--release",
            "-p",
            "nonlocal-fv-ffi",
            "--lib",
            "--target-dir",
        ])
        .arg(&target)
        .status()
        .unwrap();
    assert!(built.success(), "building the static library failed");
    let lib = target.join("release/libnonlocal_fv_ffi.a");
    assert!(lib.exists(), "no static library at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "smoke program failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("version"), "{stdout}");
}
