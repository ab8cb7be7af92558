//! C ABI for sqlalign.
//!
//! Every fallible function returns a [`SqlaStatus`] and writes its result
//! through an out-pointer. On failure, [`sqla_last_error`] describes the most
//! recent error on the calling thread. Strings returned to the caller must be
//! released with [`sqla_string_free`]; handles with their matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sqlalign::metrics::{self, MetricsError};
use sqlalign::ngram::{build_distribution, NGramDistribution, NGramError};
use sqlalign::template::{templatize, StructuralTemplate};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    EmptyDistribution = 5,
    Panic = 6,
}

/// Templates of a growing set of queries.
pub struct SqlaQuerySet {
    l_max: usize,
    templates: Vec<StructuralTemplate>,
}

/// An immutable n-gram distribution.
pub struct SqlaDistribution(NGramDistribution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(SqlaStatus, String);

impl From<NGramError> for Fail {
    fn from(e: NGramError) -> Self {
        let status = match e {
            NGramError::InvalidLMax => SqlaStatus::InvalidArgument,
            NGramError::NoTemplates | NGramError::EmptyDistribution => {
                SqlaStatus::EmptyDistribution
            }
            NGramError::Import { .. } => SqlaStatus::ParseError,
        };
        Fail(status, e.to_string())
    }
}

impl From<MetricsError> for Fail {
    fn from(e: MetricsError) -> Self {
        let status = match e {
            MetricsError::EmptyDistribution | MetricsError::EmptyTargetSet => {
                SqlaStatus::EmptyDistribution
            }
            _ => SqlaStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> SqlaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SqlaStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            SqlaStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SqlaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SqlaStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("NULs removed")
        .into_raw()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next sqlalign call on the same thread.
#[no_mangle]
pub extern "C" fn sqla_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn sqla_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Writes the canonical template of `sql` (space-separated tokens) to `*out`.
///
/// # Safety
/// `sql` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_template(sql: *const c_char, out: *mut *mut c_char) -> SqlaStatus {
    guard(|| {
        let sql = str_arg(sql, "sql")?;
        let t = templatize(sql).map_err(|e| Fail(SqlaStatus::ParseError, e.to_string()))?;
        write_out(out, c_string(t.canonical_text()))
    })
}

/// Creates an empty query set; `l_max` must be at least 1.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_query_set_new(
    l_max: usize,
    out: *mut *mut SqlaQuerySet,
) -> SqlaStatus {
    guard(|| {
        if l_max == 0 {
            return Err(NGramError::InvalidLMax.into());
        }
        let set = Box::new(SqlaQuerySet {
            l_max,
            templates: Vec::new(),
        });
        write_out(out, Box::into_raw(set))
    })
}

/// Parses `sql` and adds its template. On a parse error the set is unchanged.
///
/// # Safety
/// `set` must be a live handle; `sql` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sqla_query_set_add(
    set: *mut SqlaQuerySet,
    sql: *const c_char,
) -> SqlaStatus {
    guard(|| {
        let set = set.as_mut().ok_or_else(|| null("set"))?;
        let sql = str_arg(sql, "sql")?;
        let t = templatize(sql).map_err(|e| Fail(SqlaStatus::ParseError, e.to_string()))?;
        set.templates.push(t);
        Ok(())
    })
}

/// Number of templates in the set.
///
/// # Safety
/// `set` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_query_set_len(
    set: *const SqlaQuerySet,
    out: *mut usize,
) -> SqlaStatus {
    guard(|| write_out(out, ref_arg(set, "set")?.templates.len()))
}

/// Builds the n-gram distribution of the set.
///
/// # Safety
/// `set` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_query_set_distribution(
    set: *const SqlaQuerySet,
    out: *mut *mut SqlaDistribution,
) -> SqlaStatus {
    guard(|| {
        let set = ref_arg(set, "set")?;
        let dist = build_distribution(&set.templates, set.l_max)?;
        write_out(out, Box::into_raw(Box::new(SqlaDistribution(dist))))
    })
}

/// Fraction of the distinct templates of `target` also present in `source`.
///
/// # Safety
/// Both handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_ovlp_ratio(
    target: *const SqlaQuerySet,
    source: *const SqlaQuerySet,
    out: *mut f64,
) -> SqlaStatus {
    guard(|| {
        let set = |s: &SqlaQuerySet| s.templates.iter().map(|t| t.canonical_text()).collect();
        let ratio = metrics::ovlp_ratio(
            &set(ref_arg(target, "target")?),
            &set(ref_arg(source, "source")?),
        )?;
        write_out(out, ratio)
    })
}

/// # Safety
/// `set` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sqla_query_set_free(set: *mut SqlaQuerySet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Total n-gram count.
///
/// # Safety
/// `dist` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_distribution_total(
    dist: *const SqlaDistribution,
    out: *mut u64,
) -> SqlaStatus {
    guard(|| write_out(out, ref_arg(dist, "dist")?.0.total()))
}

/// Serializes the distribution as JSON.
///
/// # Safety
/// `dist` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_distribution_to_json(
    dist: *const SqlaDistribution,
    out: *mut *mut c_char,
) -> SqlaStatus {
    guard(|| write_out(out, c_string(ref_arg(dist, "dist")?.0.to_json())))
}

/// Reads a distribution written by `sqla_distribution_to_json`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_distribution_from_json(
    json: *const c_char,
    out: *mut *mut SqlaDistribution,
) -> SqlaStatus {
    guard(|| {
        let dist = NGramDistribution::from_json(str_arg(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(SqlaDistribution(dist))))
    })
}

/// # Safety
/// `dist` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sqla_distribution_free(dist: *mut SqlaDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Smoothed `D_KL(p || q)` in nats.
///
/// # Safety
/// Both handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_kl_divergence(
    p: *const SqlaDistribution,
    q: *const SqlaDistribution,
    alpha: f64,
    out: *mut f64,
) -> SqlaStatus {
    guard(|| {
        let d = metrics::kl_divergence(&ref_arg(p, "p")?.0, &ref_arg(q, "q")?.0, alpha)?;
        write_out(out, d)
    })
}

/// `exp(-d_kl / c)`; `c` must be positive and finite.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_kl_alignment(d_kl: f64, c: f64, out: *mut f64) -> SqlaStatus {
    guard(|| {
        if !(c > 0.0 && c.is_finite()) {
            return Err(MetricsError::InvalidScale(c).into());
        }
        write_out(out, metrics::kl_alignment(d_kl, c))
    })
}

/// Alignment ratio of `train` over `pred` against `target` with a shared `c`.
///
/// # Safety
/// All handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqla_alignment_ratio(
    target: *const SqlaDistribution,
    train: *const SqlaDistribution,
    pred: *const SqlaDistribution,
    alpha: f64,
    c: f64,
    out: *mut f64,
) -> SqlaStatus {
    guard(|| {
        let r = metrics::alignment_ratio(
            &ref_arg(target, "target")?.0,
            &ref_arg(train, "train")?.0,
            &ref_arg(pred, "pred")?.0,
            alpha,
            c,
        )?;
        write_out(out, r.ar)
    })
}
