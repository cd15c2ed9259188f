use std::ffi::{CStr, CString};
use std::ptr;

use conslaw_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    conslaw_string_free(p);
    s
}

unsafe fn last_error() -> String {
    CStr::from_ptr(conslaw_last_error()).to_str().unwrap().to_string()
}

unsafe fn parse(s: &str) -> *mut ConslawExpr {
    let mut e = ptr::null_mut();
    assert_eq!(conslaw_expr_parse(c(s).as_ptr(), &mut e), ConslawStatus::Ok);
    e
}

unsafe fn render(e: *const ConslawExpr) -> String {
    let mut s = ptr::null_mut();
    assert_eq!(conslaw_expr_render(e, &mut s), ConslawStatus::Ok);
    take_string(s)
}

#[test]
fn expression_round_trip_and_operators() {
    unsafe {
        let e = parse("u*u_x");
        assert_eq!(render(e), "u*u_x");
        let mut d = ptr::null_mut();
        assert_eq!(conslaw_total_derivative(e, CONSLAW_DIRECTION_X, &mut d), ConslawStatus::Ok);
        assert_eq!(render(d), "u*u_xx + u_x^2");
        let mut eu = ptr::null_mut();
        assert_eq!(conslaw_euler_operator(d, &mut eu), ConslawStatus::Ok);
        assert_eq!(render(eu), "0");
        let mut bad = ptr::null_mut();
        assert_eq!(conslaw_total_derivative(e, 7, &mut bad), ConslawStatus::ComputationError);
        assert!(bad.is_null());
        conslaw_expr_free(e);
        conslaw_expr_free(d);
        conslaw_expr_free(eu);
        conslaw_expr_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(conslaw_expr_parse(ptr::null(), &mut e), ConslawStatus::NullPointer);
        assert_eq!(conslaw_expr_parse(c("u +").as_ptr(), &mut e), ConslawStatus::ParseError);
        assert!(!last_error().is_empty());
        let invalid = [0xffu8, 0x00];
        assert_eq!(conslaw_expr_parse(invalid.as_ptr().cast(), &mut e), ConslawStatus::InvalidUtf8);
        assert_eq!(conslaw_expr_parse(c("u").as_ptr(), ptr::null_mut()), ConslawStatus::NullPointer);
        let mut p = ptr::null_mut();
        assert_eq!(conslaw_pde_parse(c("u_xx = u").as_ptr(), ptr::null(), &mut p), ConslawStatus::InvalidPde);
        assert_eq!(conslaw_pde_parse(c("u_t = u_x").as_ptr(), c("n").as_ptr(), &mut p), ConslawStatus::ParseError);
        let ok = parse("1");
        assert!(last_error().is_empty());
        conslaw_expr_free(ok);
    }
}

#[test]
fn derive_and_verify() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(conslaw_pde_parse(c("u_t + u^n*u_x + u_xxx = 0").as_ptr(), c("n=2").as_ptr(), &mut p), ConslawStatus::Ok);
        let mut json = ptr::null_mut();
        assert_eq!(conslaw_derive_json(p, 2, 1, 3, ptr::null(), &mut json), ConslawStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(v["dimensions"]["multipliers"], 4);
        assert!(v["laws"].as_array().unwrap().iter().all(|l| l["verified"] == true));

        let lam = parse("t*(u_xx + 1/3*u^3) - 1/3*x*u");
        let mut ok = false;
        let mut report = ptr::null_mut();
        assert_eq!(conslaw_verify_multiplier(p, lam, &mut ok, &mut report), ConslawStatus::Ok);
        assert!(ok);
        let r: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
        assert!(r["failure"].is_null());
        assert_eq!(r["lambda"], "1/3*t*u^3 + t*u_xx - 1/3*x*u");
        assert!(!r["phi_x"].as_str().unwrap().is_empty());
        let bad = parse("u_x^2");
        assert_eq!(conslaw_verify_multiplier(p, bad, &mut ok, ptr::null_mut()), ConslawStatus::Ok);
        assert!(!ok);
        conslaw_expr_free(lam);
        conslaw_expr_free(bad);
        conslaw_pde_free(p);
    }
}

#[test]
fn errors_are_thread_local() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(conslaw_expr_parse(c("(").as_ptr(), &mut e), ConslawStatus::ParseError);
    }
    let other = std::thread::spawn(|| unsafe { last_error() }).join().unwrap();
    assert!(other.is_empty());
    assert!(unsafe { !last_error().is_empty() });
}
