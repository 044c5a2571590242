//! C ABI over the detcost analysis library: opaque config handles, status
//! codes, JSON/CSV/SVG string outputs.
//!
//! Ownership rules: every `DetcostConfig*` produced here is released with
//! [`detcost_config_free`]; every `char*` output is released with
//! [`detcost_string_free`]. On a non-OK status the failure detail is
//! available from [`detcost_last_error_message`] (per thread).

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use detcost::builders::build_retinanet;
use detcost::chart::render_distribution_chart;
use detcost::config::{preset, ModelConfig, PRESET_NAMES};
use detcost::cost::{cost_report, CostOptions};
use detcost::transform::{apply_chain, param_overhead, transforms_from_json};

/// Opaque handle for a validated model configuration.
pub struct DetcostConfig {
    inner: ModelConfig,
}

/// Result of every fallible API call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DetcostStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A JSON document failed to parse.
    ParseError = 3,
    /// The configuration violates a model invariant.
    InvalidConfig = 4,
    /// Graph construction or costing failed.
    BuildError = 5,
    /// An internal invariant failed; report this as a bug.
    InternalError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: DetcostStatus, message: impl std::fmt::Display) -> DetcostStatus {
    set_error(message.to_string());
    status
}

fn guarded(f: impl FnOnce() -> DetcostStatus) -> DetcostStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(DetcostStatus::InternalError, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for the call.
unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, DetcostStatus> {
    if ptr.is_null() {
        return Err(fail(DetcostStatus::NullArgument, "string argument is null"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| fail(DetcostStatus::InvalidUtf8, e))
}

unsafe fn config_arg<'a>(ptr: *const DetcostConfig) -> Result<&'a ModelConfig, DetcostStatus> {
    if ptr.is_null() {
        return Err(fail(DetcostStatus::NullArgument, "config argument is null"));
    }
    Ok(&(*ptr).inner)
}

unsafe fn write_config(out: *mut *mut DetcostConfig, cfg: ModelConfig) -> DetcostStatus {
    if out.is_null() {
        return fail(DetcostStatus::NullArgument, "output argument is null");
    }
    *out = Box::into_raw(Box::new(DetcostConfig { inner: cfg }));
    clear_error();
    DetcostStatus::Ok
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> DetcostStatus {
    if out.is_null() {
        return fail(DetcostStatus::NullArgument, "output argument is null");
    }
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            clear_error();
            DetcostStatus::Ok
        }
        Err(e) => fail(DetcostStatus::InternalError, e),
    }
}

/// Looks up a built-in preset (`baseline-800`, `lw-v2-reg`, `lw-v3-reg`,
/// `lw-v3-both`, `lw-v3-both-pred`) and returns a new config handle.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn detcost_config_preset(
    name: *const c_char,
    out: *mut *mut DetcostConfig,
) -> DetcostStatus {
    guarded(|| {
        let name = match str_arg(name) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match preset(name) {
            Some(cfg) => write_config(out, cfg),
            None => fail(
                DetcostStatus::InvalidConfig,
                format!("unknown preset `{name}`; available: {}", PRESET_NAMES.join(", ")),
            ),
        }
    })
}

/// Parses and validates a config JSON document into a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn detcost_config_from_json(
    json: *const c_char,
    out: *mut *mut DetcostConfig,
) -> DetcostStatus {
    guarded(|| {
        let text = match str_arg(json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let cfg = match ModelConfig::from_json(text) {
            Ok(cfg) => cfg,
            Err(e) => return fail(DetcostStatus::ParseError, e),
        };
        if let Err(e) = cfg.validate() {
            return fail(DetcostStatus::InvalidConfig, e);
        }
        write_config(out, cfg)
    })
}

/// Serializes a config handle back to JSON.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn detcost_config_to_json(
    cfg: *const DetcostConfig,
    out: *mut *mut c_char,
) -> DetcostStatus {
    guarded(|| match config_arg(cfg) {
        Ok(cfg) => write_string(out, cfg.to_json()),
        Err(status) => status,
    })
}

/// Applies a transform document (one JSON object or an array, applied left
/// to right) and returns the rewritten config as a new handle.
///
/// # Safety
/// `cfg` must be a live handle; `transforms_json` must be NUL-terminated;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn detcost_config_apply_transforms(
    cfg: *const DetcostConfig,
    transforms_json: *const c_char,
    out: *mut *mut DetcostConfig,
) -> DetcostStatus {
    guarded(|| {
        let cfg = match config_arg(cfg) {
            Ok(c) => c,
            Err(status) => return status,
        };
        let text = match str_arg(transforms_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let transforms = match transforms_from_json(text) {
            Ok(t) => t,
            Err(e) => return fail(DetcostStatus::ParseError, e),
        };
        match apply_chain(cfg, &transforms) {
            Ok(next) => write_config(out, next),
            Err(e) => fail(DetcostStatus::InvalidConfig, e),
        }
    })
}

/// Releases a config handle. Null is ignored.
///
/// # Safety
/// `cfg` must be null or a handle produced by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn detcost_config_free(cfg: *mut DetcostConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn profile(cfg: &ModelConfig, include_elementwise: bool) -> Result<detcost::cost::CostReport, DetcostStatus> {
    let graph = build_retinanet(cfg).map_err(|e| fail(DetcostStatus::BuildError, e))?;
    let opts = CostOptions {
        count_elementwise: include_elementwise,
        ..Default::default()
    };
    cost_report(&graph, &opts).map_err(|e| fail(DetcostStatus::BuildError, e))
}

/// Builds the network and returns the full cost report as JSON
/// (`per_node`, `per_block`, `totals`, `block_fractions`).
///
/// # Safety
/// `cfg` must be a live handle; `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn detcost_profile_json(
    cfg: *const DetcostConfig,
    include_elementwise: bool,
    out_json: *mut *mut c_char,
) -> DetcostStatus {
    guarded(|| {
        let cfg = match config_arg(cfg) {
            Ok(c) => c,
            Err(status) => return status,
        };
        match profile(cfg, include_elementwise) {
            Ok(report) => write_string(out_json, report.to_json()),
            Err(status) => status,
        }
    })
}

/// Like [`detcost_profile_json`] but returns the per-block CSV
/// (`block,branch,macs,params,fraction`).
///
/// # Safety
/// `cfg` must be a live handle; `out_csv` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn detcost_profile_csv(
    cfg: *const DetcostConfig,
    out_csv: *mut *mut c_char,
) -> DetcostStatus {
    guarded(|| {
        let cfg = match config_arg(cfg) {
            Ok(c) => c,
            Err(status) => return status,
        };
        match profile(cfg, false) {
            Ok(report) => write_string(out_csv, report.to_csv()),
            Err(status) => status,
        }
    })
}

/// Total multiply-accumulates and deduplicated parameters for a config.
/// Either output pointer may be null if that total is not wanted.
///
/// # Safety
/// `cfg` must be a live handle; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn detcost_totals(
    cfg: *const DetcostConfig,
    out_macs: *mut u64,
    out_params: *mut u64,
) -> DetcostStatus {
    guarded(|| {
        let cfg = match config_arg(cfg) {
            Ok(c) => c,
            Err(status) => return status,
        };
        match profile(cfg, false) {
            Ok(report) => {
                if !out_macs.is_null() {
                    *out_macs = report.totals.macs;
                }
                if !out_params.is_null() {
                    *out_params = report.totals.params;
                }
                clear_error();
                DetcostStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Sharing-aware relative parameter change from `before` to `after`.
///
/// # Safety
/// Both handles must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn detcost_param_overhead(
    before: *const DetcostConfig,
    after: *const DetcostConfig,
    out: *mut f64,
) -> DetcostStatus {
    guarded(|| {
        let (before, after) = match (config_arg(before), config_arg(after)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        if out.is_null() {
            return fail(DetcostStatus::NullArgument, "output argument is null");
        }
        match param_overhead(before, after) {
            Ok(overhead) => {
                *out = overhead;
                clear_error();
                DetcostStatus::Ok
            }
            Err(e) => fail(DetcostStatus::BuildError, e),
        }
    })
}

/// Renders the per-block MAC/parameter distribution as a standalone SVG.
///
/// # Safety
/// `cfg` must be a live handle; `out_svg` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn detcost_distribution_svg(
    cfg: *const DetcostConfig,
    out_svg: *mut *mut c_char,
) -> DetcostStatus {
    guarded(|| {
        let cfg = match config_arg(cfg) {
            Ok(c) => c,
            Err(status) => return status,
        };
        match profile(cfg, false) {
            Ok(report) => write_string(out_svg, render_distribution_chart(&report)),
            Err(status) => status,
        }
    })
}

/// Returns a copy of the current thread's last error message, or null when
/// the previous call succeeded. Release with [`detcost_string_free`].
#[no_mangle]
pub extern "C" fn detcost_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(message) => message.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string produced by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn detcost_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
