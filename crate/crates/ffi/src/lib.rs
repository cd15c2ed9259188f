//! C ABI over the conslaw core.
//!
//! Every function returns a [`ConslawStatus`]; on failure a message is available from
//! [`conslaw_last_error`] on the same thread. Handles and strings returned through out-pointers are
//! owned by the caller and released with the matching `*_free` function.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use conslaw::calculus::{euler_operator, total_derivative};
use conslaw::cli::{parse_params, run, split_top_level, CommandKind, Format, RunConfig};
use conslaw::conslaw::{verify_report, ConservationLaw};
use conslaw::jet::{parse_expression, parse_expression_with};
use conslaw::{Direction, JetExpression, PdeSpec, Rational};
use serde_json::{json, Value};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConslawStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidPde = 4,
    ComputationError = 5,
    Panic = 6,
}

/// Opaque parsed expression.
pub struct ConslawExpr {
    inner: JetExpression,
}

/// Opaque parsed equation together with its source text and parameters.
pub struct ConslawPde {
    inner: PdeSpec,
    text: String,
    params: BTreeMap<String, Rational>,
}

/// Direction argument of [`conslaw_total_derivative`].
pub const CONSLAW_DIRECTION_T: u32 = 0;
pub const CONSLAW_DIRECTION_X: u32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

type Failure = (ConslawStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ConslawStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ConslawStatus::Ok
        }
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
            ConslawStatus::Panic
        }
    }
}

fn null() -> Failure {
    (ConslawStatus::NullPointer, "null pointer argument".into())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|e| (ConslawStatus::InvalidUtf8, e.to_string()))
}

unsafe fn read_ref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(null)
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    let c = CString::new(s).map_err(|e| (ConslawStatus::ComputationError, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message describing the last failure on this thread; empty after a success. Valid until the next call.
#[no_mangle]
pub extern "C" fn conslaw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses an expression in the jet grammar.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn conslaw_expr_parse(text: *const c_char, out: *mut *mut ConslawExpr) -> ConslawStatus {
    guard(|| {
        let text = read_str(text)?;
        let e = parse_expression(text).map_err(|e| (ConslawStatus::ParseError, e.to_string()))?;
        write_out(out, ConslawExpr { inner: e })
    })
}

/// Renders an expression; free the result with [`conslaw_string_free`].
///
/// # Safety
/// `expr` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn conslaw_expr_render(expr: *const ConslawExpr, out: *mut *mut c_char) -> ConslawStatus {
    guard(|| {
        let e = read_ref(expr)?;
        write_string(out, e.inner.to_string())
    })
}

/// # Safety
/// `expr` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn conslaw_expr_free(expr: *mut ConslawExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Parses `lhs = rhs` with optional parameters `"n=2,c0=1"` (`params` may be null).
///
/// # Safety
/// String arguments must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn conslaw_pde_parse(
    text: *const c_char,
    params: *const c_char,
    out: *mut *mut ConslawPde,
) -> ConslawStatus {
    guard(|| {
        let text = read_str(text)?;
        let params = if params.is_null() { "" } else { read_str(params)? };
        let items: Vec<String> = split_top_level(params);
        let params = parse_params(&items).map_err(|e| (ConslawStatus::ParseError, e.to_string()))?;
        let pde = conslaw::parse_pde(text, &params).map_err(|e| (ConslawStatus::InvalidPde, e.to_string()))?;
        write_out(out, ConslawPde { inner: pde, text: text.to_string(), params })
    })
}

/// # Safety
/// `pde` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn conslaw_pde_free(pde: *mut ConslawPde) {
    if !pde.is_null() {
        drop(Box::from_raw(pde));
    }
}

/// Total derivative in the direction [`CONSLAW_DIRECTION_T`] or [`CONSLAW_DIRECTION_X`].
///
/// # Safety
/// `expr` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn conslaw_total_derivative(
    expr: *const ConslawExpr,
    direction: u32,
    out: *mut *mut ConslawExpr,
) -> ConslawStatus {
    guard(|| {
        let e = read_ref(expr)?;
        let dir = match direction {
            CONSLAW_DIRECTION_T => Direction::T,
            CONSLAW_DIRECTION_X => Direction::X,
            d => return Err((ConslawStatus::ComputationError, format!("unknown direction {d}"))),
        };
        write_out(out, ConslawExpr { inner: total_derivative(&e.inner, dir) })
    })
}

/// Euler operator E_u.
///
/// # Safety
/// `expr` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn conslaw_euler_operator(expr: *const ConslawExpr, out: *mut *mut ConslawExpr) -> ConslawStatus {
    guard(|| {
        let e = read_ref(expr)?;
        write_out(out, ConslawExpr { inner: euler_operator(&e.inner) })
    })
}

/// Runs the multiplier search and writes the derive report as JSON.
/// `atoms` is a comma-separated list or null.
///
/// # Safety
/// `pde` must come from this library; `atoms` null or nul-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn conslaw_derive_json(
    pde: *const ConslawPde,
    order: u16,
    deg_tx: u32,
    deg_u: u32,
    atoms: *const c_char,
    out_json: *mut *mut c_char,
) -> ConslawStatus {
    guard(|| {
        let pde = read_ref(pde)?;
        let atoms = if atoms.is_null() { Vec::new() } else { split_top_level(read_str(atoms)?) };
        for a in &atoms {
            parse_expression_with(a, &pde.params).map_err(|e| (ConslawStatus::ParseError, format!("`{a}`: {e}")))?;
        }
        let cfg = RunConfig {
            command: CommandKind::Derive,
            pde: pde.text.clone(),
            params: pde.params.clone(),
            order,
            deg_tx: deg_tx.to_string(),
            deg_u: deg_u.to_string(),
            atoms,
            utilde: None,
            lambdas: Vec::new(),
            scan: None,
            format: Format::Json,
            out: None,
            numcheck: None,
        };
        let report = run(&cfg).map_err(|e| (ConslawStatus::ComputationError, e.to_string()))?;
        write_string(out_json, report.render(Format::Json))
    })
}

/// Builds and verifies the conservation law of a multiplier. `out_json` may be null; otherwise it
/// receives `{pde, lambda, phi_t, phi_x, utilde, verified, failure}`.
///
/// # Safety
/// Handles must come from this library; `out_verified` must be writable.
#[no_mangle]
pub unsafe extern "C" fn conslaw_verify_multiplier(
    pde: *const ConslawPde,
    lambda: *const ConslawExpr,
    out_verified: *mut bool,
    out_json: *mut *mut c_char,
) -> ConslawStatus {
    guard(|| {
        let pde = read_ref(pde)?;
        let lambda = read_ref(lambda)?;
        if out_verified.is_null() {
            return Err(null());
        }
        let (verified, json) = match ConservationLaw::from_multiplier(&pde.inner, &lambda.inner, None) {
            Ok(cl) => {
                let failure = verify_report(&cl).failure();
                let mut v = serde_json::to_value(cl.record()).expect("serializable record");
                v["failure"] = failure.map_or(Value::Null, Value::String);
                (cl.verified, v)
            }
            Err(e) => (false, failed_record(&pde.inner, &lambda.inner, &e.to_string())),
        };
        *out_verified = verified;
        if !out_json.is_null() {
            write_string(out_json, json.to_string())?;
        }
        Ok(())
    })
}

fn failed_record(pde: &PdeSpec, lambda: &JetExpression, msg: &str) -> Value {
    json!({ "pde": pde.to_string(), "lambda": lambda.to_string(), "verified": false, "failure": msg })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn conslaw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
