//! C ABI over `epsw-core`.
//!
//! Every fallible call returns an `EpswStatus`; on failure the message is
//! available from `epsw_last_error()` on the same thread. Handles are opaque
//! and must be released with their `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use epsw_core::group_epsw::{build_phi_curve, complete_w1, firm2_profit, verify_group_core, PhiCurve};
use epsw_core::market::Market;
use epsw_core::nongroup::nongroup_core;
use epsw_core::scenario;
use epsw_core::wages::{WageFunction, WageSpec};
use epsw_core::{distributions::ProductivityDist, Error};

/// Opaque market handle.
pub struct EpswMarket(Market);
/// Opaque wage schedule handle.
pub struct EpswWage(WageFunction);
/// Opaque sampled phi curve.
pub struct EpswPhiCurve(PhiCurve);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpswStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDistribution = 3,
    InvalidWage = 4,
    NoConvergence = 5,
    NotCore = 6,
    Infeasible = 7,
    Config = 8,
    OutOfRange = 9,
    Panic = 10,
}

fn status_of(e: &Error) -> EpswStatus {
    match e {
        Error::Bracket { .. } | Error::Convergence { .. } | Error::Resolution(_) => EpswStatus::NoConvergence,
        Error::Normalization { .. } | Error::Density(_) | Error::Regularity(_) => EpswStatus::InvalidDistribution,
        Error::Domain { .. } => EpswStatus::OutOfRange,
        Error::Wage(_) => EpswStatus::InvalidWage,
        Error::NotCore(_) => EpswStatus::NotCore,
        Error::Infeasible(_) | Error::Inapplicable(_) => EpswStatus::Infeasible,
        Error::Config(_) | Error::Io(_) => EpswStatus::Config,
        Error::Parameter(_) | Error::Segments(_) | Error::Hiring(_) | Error::Feasibility(_) => {
            EpswStatus::InvalidArgument
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard<F: FnOnce() -> Result<(), EpswStatusMsg>>(f: F) -> EpswStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EpswStatus::Ok,
        Ok(Err(EpswStatusMsg(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            EpswStatus::Panic
        }
    }
}

struct EpswStatusMsg(EpswStatus, String);

impl From<Error> for EpswStatusMsg {
    fn from(e: Error) -> Self {
        EpswStatusMsg(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> EpswStatusMsg {
    EpswStatusMsg(EpswStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, EpswStatusMsg> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| EpswStatusMsg(EpswStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn href<'a, T>(p: *const T, what: &str) -> Result<&'a T, EpswStatusMsg> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), EpswStatusMsg> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn epsw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn epsw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Market from a preset name or scenario TOML text.
#[no_mangle]
pub unsafe extern "C" fn epsw_market_from_scenario(spec: *const c_char, out: *mut *mut EpswMarket) -> EpswStatus {
    guard(|| {
        let s = cstr(spec, "spec")?;
        let sc = match scenario::preset_text(s) {
            Some(_) => scenario::load(s)?,
            None => scenario::parse_scenario_str(s, "<ffi>")?,
        };
        let m = sc.market()?.clone();
        put(out, Box::into_raw(Box::new(EpswMarket(m))), "out")
    })
}

/// Market with power densities `F_A(v) = v^k_a`, `F_B(v) = v^k_b`.
#[no_mangle]
pub unsafe extern "C" fn epsw_market_power(beta: f64, k_a: u32, k_b: u32, out: *mut *mut EpswMarket) -> EpswStatus {
    guard(|| {
        let m = Market::new(beta, ProductivityDist::power(k_a)?, ProductivityDist::power(k_b)?)?;
        put(out, Box::into_raw(Box::new(EpswMarket(m))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn epsw_market_beta(m: *const EpswMarket, out: *mut f64) -> EpswStatus {
    guard(|| put(out, href(m, "market")?.0.beta(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn epsw_market_free(m: *mut EpswMarket) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Wage schedule from a descriptor such as `linear:0.5` or `knots:0,0;1,1`.
#[no_mangle]
pub unsafe extern "C" fn epsw_wage_parse(desc: *const c_char, out: *mut *mut EpswWage) -> EpswStatus {
    guard(|| {
        let w = cstr(desc, "desc")?.parse::<WageSpec>()?.build()?;
        put(out, Box::into_raw(Box::new(EpswWage(w))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn epsw_wage_eval(w: *const EpswWage, v: f64, out: *mut f64) -> EpswStatus {
    guard(|| {
        let x = href(w, "wage")?.0.eval(v)?;
        put(out, x, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn epsw_wage_free(w: *mut EpswWage) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Profit of the firm paying group B `w2`.
#[no_mangle]
pub unsafe extern "C" fn epsw_firm2_profit(m: *const EpswMarket, w2: *const EpswWage, out: *mut f64) -> EpswStatus {
    guard(|| {
        let p = firm2_profit(&href(m, "market")?.0, &href(w2, "w2")?.0);
        put(out, p, "out")
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EpswPhiPoint {
    pub epsilon: f64,
    pub phi: f64,
    pub w1hat_inv: f64,
    pub ndc_slack: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EpswPhiSummary {
    pub e_cap: f64,
    /// NaN when `has_eps_star` is 0.
    pub eps_star: f64,
    pub has_eps_star: i32,
    pub pi1_hat: f64,
    pub pi2: f64,
    pub core_exists: i32,
}

#[no_mangle]
pub unsafe extern "C" fn epsw_phi_curve_build(
    m: *const EpswMarket,
    w2: *const EpswWage,
    grid: usize,
    out: *mut *mut EpswPhiCurve,
) -> EpswStatus {
    guard(|| {
        let c = build_phi_curve(&href(m, "market")?.0, &href(w2, "w2")?.0, grid)?;
        put(out, Box::into_raw(Box::new(EpswPhiCurve(c))), "out")
    })
}

/// Number of grid points; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn epsw_phi_curve_len(c: *const EpswPhiCurve) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn epsw_phi_curve_point(c: *const EpswPhiCurve, i: usize, out: *mut EpswPhiPoint) -> EpswStatus {
    guard(|| {
        let c = &href(c, "curve")?.0;
        if i >= c.len() {
            return Err(EpswStatusMsg(EpswStatus::OutOfRange, format!("index {i} >= {}", c.len())));
        }
        let p = EpswPhiPoint { epsilon: c.eps_grid[i], phi: c.phi[i], w1hat_inv: c.w1hat_inv[i], ndc_slack: c.ndc_slack[i] };
        put(out, p, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn epsw_phi_curve_summary(
    c: *const EpswPhiCurve,
    tol: f64,
    out: *mut EpswPhiSummary,
) -> EpswStatus {
    guard(|| {
        let c = &href(c, "curve")?.0;
        let s = EpswPhiSummary {
            e_cap: c.e_cap,
            eps_star: c.eps_star.unwrap_or(f64::NAN),
            has_eps_star: c.eps_star.is_some() as i32,
            pi1_hat: c.pi1_hat,
            pi2: c.pi2,
            core_exists: (c.pi1_hat >= c.pi2 - tol) as i32,
        };
        put(out, s, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn epsw_phi_curve_free(c: *mut EpswPhiCurve) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Completed A wage schedule for `w2`; `x_star` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn epsw_complete_w1(
    m: *const EpswMarket,
    w2: *const EpswWage,
    tol: f64,
    out: *mut *mut EpswWage,
    x_star: *mut f64,
) -> EpswStatus {
    guard(|| {
        let c = complete_w1(&href(m, "market")?.0, &href(w2, "w2")?.0, None, tol)?;
        if !x_star.is_null() {
            x_star.write(c.x_star);
        }
        put(out, Box::into_raw(Box::new(EpswWage(c.w1))), "out")
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EpswGroupReport {
    pub is_core: i32,
    pub ir_ok: i32,
    pub equal_profit_ok: i32,
    pub ndc_ok: i32,
    pub equal_profit_residual: f64,
    pub ndc_worst_eps: f64,
    pub ndc_worst_slack: f64,
    pub profit_1: f64,
    pub profit_2: f64,
    pub gap: f64,
}

/// Verifies the segregated outcome `(w1, w2)`. Returns `Ok` with
/// `is_core = 0` for a negative verdict.
#[no_mangle]
pub unsafe extern "C" fn epsw_group_verify(
    m: *const EpswMarket,
    w1: *const EpswWage,
    w2: *const EpswWage,
    tol: f64,
    out: *mut EpswGroupReport,
) -> EpswStatus {
    use epsw_core::group_epsw::GroupCondition as C;
    guard(|| {
        let r = verify_group_core(&href(m, "market")?.0, &href(w1, "w1")?.0, &href(w2, "w2")?.0, tol);
        let ok = |c: C| (!r.failed.contains(&c)) as i32;
        let rep = EpswGroupReport {
            is_core: r.is_core as i32,
            ir_ok: ok(C::IndividualRationality),
            equal_profit_ok: ok(C::EqualProfit),
            ndc_ok: ok(C::NoDesegregation),
            equal_profit_residual: r.equal_profit_residual,
            ndc_worst_eps: r.ndc_worst.eps,
            ndc_worst_slack: r.ndc_worst.slack,
            profit_1: r.profit_1,
            profit_2: r.profit_2,
            gap: r.gap,
        };
        put(out, rep, "out")
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EpswNongroupCore {
    pub w1: f64,
    pub w2: f64,
    pub w1_star: f64,
    pub profit: f64,
    pub profit_abs: f64,
    pub unemployed_measure: f64,
    pub gap: f64,
}

/// Uniform-wage core with low wage `w1`; `NotCore` if `w1 > w1*`.
#[no_mangle]
pub unsafe extern "C" fn epsw_nongroup_core(m: *const EpswMarket, w1: f64, out: *mut EpswNongroupCore) -> EpswStatus {
    guard(|| {
        let c = nongroup_core(&href(m, "market")?.0, w1)?;
        let r = EpswNongroupCore {
            w1: c.w1,
            w2: c.w2,
            w1_star: c.w1_star,
            profit: c.profit,
            profit_abs: c.profit_abs,
            unemployed_measure: c.unemployed_measure,
            gap: c.gap,
        };
        put(out, r, "out")
    })
}
