use std::ffi::{CStr, CString};
use std::ptr;

use membrane_id_ffi::*;

fn last_error() -> String {
    let p = mid_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn testcase_solves_and_reads_back() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(mid_problem_testcase(MidTestCase::Testcase1, 20, &mut p), MidStatus::Ok);
        assert_eq!(mid_problem_grid_n(p), 20);
        // the barrier leaves a small gap on the plateau, so no node would count as contact
        let mut cfg = mid_solver_config_default(MidMethod::Npg);
        cfg.max_iter = 20000;
        let mut s = ptr::null_mut();
        assert_eq!(mid_solve(p, &cfg, &mut s), MidStatus::Ok);
        assert!(mid_solution_converged(s));
        assert!(mid_solution_kkt(s) < 1e-8);
        let len = mid_solution_len(s);
        assert_eq!(len, 400);

        let mut u = vec![0.0; len];
        assert_eq!(mid_solution_u(s, u.as_mut_ptr(), len), MidStatus::Ok);
        assert!((u.iter().cloned().fold(f64::MIN, f64::max) - 1.0).abs() < 1e-3);
        let mut lambda = vec![0.0; len];
        assert_eq!(mid_solution_lambda(s, lambda.as_mut_ptr(), len), MidStatus::Ok);
        assert!(lambda.iter().all(|&l| l >= 0.0));
        let mut contact = vec![0u8; len];
        assert_eq!(mid_solution_contact(s, contact.as_mut_ptr(), len), MidStatus::Ok);
        assert!(contact.iter().any(|&c| c == 1));

        let mut r = f64::NAN;
        assert_eq!(mid_kkt_residual(p, u.as_ptr(), len, &mut r), MidStatus::Ok);
        assert!(r < 1e-7, "{r}");

        mid_solution_free(s);
        mid_problem_free(p);
    }
}

#[test]
fn short_buffer_is_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(mid_problem_testcase(MidTestCase::Testcase2, 8, &mut p), MidStatus::Ok);
        let cfg = mid_solver_config_default(MidMethod::Npg);
        let mut s = ptr::null_mut();
        assert_eq!(mid_solve(p, &cfg, &mut s), MidStatus::Ok);
        let mut u = vec![0.0; 10];
        assert_eq!(mid_solution_u(s, u.as_mut_ptr(), u.len()), MidStatus::BufferTooSmall);
        assert!(last_error().contains("64"));
        mid_solution_free(s);
        mid_problem_free(p);
    }
}

#[test]
fn null_handles_and_bad_sizes_fail_cleanly() {
    unsafe {
        let cfg = mid_solver_config_default(MidMethod::Pg);
        let mut s = ptr::null_mut();
        assert_eq!(mid_solve(ptr::null(), &cfg, &mut s), MidStatus::NullPointer);
        assert!(!last_error().is_empty());
        assert!(s.is_null());
        assert_eq!(mid_problem_grid_n(ptr::null()), 0);
        assert!(mid_solution_kkt(ptr::null()).is_nan());
        mid_problem_free(ptr::null_mut());
        mid_solution_free(ptr::null_mut());

        let v = vec![1.0; 9];
        let mut p = ptr::null_mut();
        let st = mid_problem_new(4, v.as_ptr(), v.as_ptr(), v.as_ptr(), v.len(), &mut p);
        assert_eq!(st, MidStatus::InvalidArgument);
        assert!(p.is_null());
        let st = mid_problem_new(1, v.as_ptr(), v.as_ptr(), v.as_ptr(), 1, &mut p);
        assert_eq!(st, MidStatus::InvalidArgument);
    }
}

#[test]
fn oversized_step_maps_to_its_code() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(mid_problem_testcase(MidTestCase::Testcase1, 10, &mut p), MidStatus::Ok);
        let mut cfg = mid_solver_config_default(MidMethod::Pg);
        cfg.tau = 1.0;
        let mut s = ptr::null_mut();
        assert_eq!(mid_solve(p, &cfg, &mut s), MidStatus::StepsizeTooLarge);
        mid_problem_free(p);
    }
}

#[test]
fn run_returns_cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = CString::new(tmp.path().join("out").to_str().unwrap()).unwrap();
    let good = CString::new(r#"{"grid": {"n": 10}, "problem": {"scenario": "TESTCASE1"}}"#).unwrap();
    assert_eq!(unsafe { mid_run(MidCommand::Forward, good.as_ptr(), out.as_ptr()) }, 0);
    assert!(tmp.path().join("out/u.csv").exists());

    let bad = CString::new(r#"{"problem": "#).unwrap();
    assert_eq!(unsafe { mid_run(MidCommand::Forward, bad.as_ptr(), out.as_ptr()) }, 1);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { mid_run(MidCommand::Forward, ptr::null(), ptr::null()) }, 1);
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/membrane_id.h")).unwrap();
    for name in ["mid_solve", "mid_problem_new", "mid_run", "MID_STATUS_BUFFER_TOO_SMALL", "typedef struct MidProblem"] {
        assert!(h.contains(name), "{name}");
    }
    let v = unsafe { CStr::from_ptr(mid_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
