//! Exercises the C ABI through the exported extern functions, plus a syntax
//! check of the generated header when a C compiler is around.

use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use detcost_capi::{
    detcost_config_apply_transforms, detcost_config_free, detcost_config_from_json,
    detcost_config_preset, detcost_config_to_json, detcost_distribution_svg,
    detcost_last_error_message, detcost_param_overhead, detcost_profile_csv,
    detcost_profile_json, detcost_string_free, detcost_totals, DetcostConfig, DetcostStatus,
};

fn preset(name: &str) -> *mut DetcostConfig {
    let name = CString::new(name).unwrap();
    let mut cfg: *mut DetcostConfig = ptr::null_mut();
    let status = unsafe { detcost_config_preset(name.as_ptr(), &mut cfg) };
    assert_eq!(status, DetcostStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    let text = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_owned();
    unsafe { detcost_string_free(ptr) };
    text
}

fn last_error() -> Option<String> {
    let ptr = detcost_last_error_message();
    if ptr.is_null() {
        None
    } else {
        Some(take_string(ptr))
    }
}

#[test]
fn preset_profile_matches_the_library_totals() {
    let cfg = preset("baseline-800");
    let mut macs = 0u64;
    let mut params = 0u64;
    let status = unsafe { detcost_totals(cfg, &mut macs, &mut params) };
    assert_eq!(status, DetcostStatus::Ok);
    assert_eq!(macs, 149_194_714_112);
    assert_eq!(params, 37_968_692);

    let mut json: *mut c_char = ptr::null_mut();
    let status = unsafe { detcost_profile_json(cfg, false, &mut json) };
    assert_eq!(status, DetcostStatus::Ok);
    let report = detcost::cost::CostReport::from_json(&take_string(json)).unwrap();
    assert_eq!(report.totals.macs, macs);

    let mut csv: *mut c_char = ptr::null_mut();
    let status = unsafe { detcost_profile_csv(cfg, &mut csv) };
    assert_eq!(status, DetcostStatus::Ok);
    let csv = take_string(csv);
    assert!(csv.starts_with("block,branch,macs,params,fraction"));

    unsafe { detcost_config_free(cfg) };
}

#[test]
fn config_json_round_trips_through_the_abi() {
    let cfg = preset("lw-v3-both");
    let mut json: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { detcost_config_to_json(cfg, &mut json) },
        DetcostStatus::Ok
    );
    let text = take_string(json);

    let c_text = CString::new(text.clone()).unwrap();
    let mut back: *mut DetcostConfig = ptr::null_mut();
    assert_eq!(
        unsafe { detcost_config_from_json(c_text.as_ptr(), &mut back) },
        DetcostStatus::Ok
    );

    let mut again: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { detcost_config_to_json(back, &mut again) },
        DetcostStatus::Ok
    );
    assert_eq!(take_string(again), text);

    unsafe { detcost_config_free(cfg) };
    unsafe { detcost_config_free(back) };
}

#[test]
fn transforms_apply_through_the_abi() {
    let cfg = preset("baseline-800");
    let doc = CString::new(r#"{"type": "ScaleInput", "target_size": 640}"#).unwrap();
    let mut scaled: *mut DetcostConfig = ptr::null_mut();
    assert_eq!(
        unsafe { detcost_config_apply_transforms(cfg, doc.as_ptr(), &mut scaled) },
        DetcostStatus::Ok
    );

    let mut json: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { detcost_config_to_json(scaled, &mut json) },
        DetcostStatus::Ok
    );
    assert!(take_string(json).contains("\"input_size\": 640"));

    let mut overhead = f64::NAN;
    assert_eq!(
        unsafe { detcost_param_overhead(cfg, scaled, &mut overhead) },
        DetcostStatus::Ok
    );
    assert_eq!(overhead, 0.0, "scaling does not touch parameters");

    unsafe { detcost_config_free(scaled) };
    unsafe { detcost_config_free(cfg) };
}

#[test]
fn sharing_overhead_through_the_abi_stays_under_one_percent() {
    let baseline = preset("baseline-800");
    let lw = preset("lw-v3-reg");
    let mut overhead = f64::NAN;
    assert_eq!(
        unsafe { detcost_param_overhead(baseline, lw, &mut overhead) },
        DetcostStatus::Ok
    );
    assert!(overhead > 0.0 && overhead < 0.01, "{overhead}");
    unsafe { detcost_config_free(baseline) };
    unsafe { detcost_config_free(lw) };
}

#[test]
fn failures_set_status_and_message() {
    let name = CString::new("not-a-preset").unwrap();
    let mut cfg: *mut DetcostConfig = ptr::null_mut();
    let status = unsafe { detcost_config_preset(name.as_ptr(), &mut cfg) };
    assert_eq!(status, DetcostStatus::InvalidConfig);
    assert!(cfg.is_null());
    let message = last_error().expect("error message set");
    assert!(message.contains("not-a-preset"));

    let bad = CString::new("{ not json").unwrap();
    let status = unsafe { detcost_config_from_json(bad.as_ptr(), &mut cfg) };
    assert_eq!(status, DetcostStatus::ParseError);

    let undersized = CString::new(r#"{"type": "ScaleInput", "target_size": 16}"#).unwrap();
    let base = preset("baseline-800");
    let mut out: *mut DetcostConfig = ptr::null_mut();
    let status = unsafe { detcost_config_apply_transforms(base, undersized.as_ptr(), &mut out) };
    assert_eq!(status, DetcostStatus::InvalidConfig);
    assert!(last_error().unwrap().contains("input_size"));
    unsafe { detcost_config_free(base) };
}

#[test]
fn null_arguments_are_rejected_not_crashed() {
    let mut cfg: *mut DetcostConfig = ptr::null_mut();
    assert_eq!(
        unsafe { detcost_config_preset(ptr::null(), &mut cfg) },
        DetcostStatus::NullArgument
    );
    assert_eq!(
        unsafe { detcost_profile_json(ptr::null(), false, &mut (ptr::null_mut())) },
        DetcostStatus::NullArgument
    );
    let base = preset("baseline-800");
    assert_eq!(
        unsafe { detcost_profile_json(base, false, ptr::null_mut()) },
        DetcostStatus::NullArgument
    );
    unsafe { detcost_config_free(base) };
    unsafe { detcost_config_free(ptr::null_mut()) };
    unsafe { detcost_string_free(ptr::null_mut()) };
}

#[test]
fn svg_renders_through_the_abi() {
    let cfg = preset("baseline-800");
    let mut svg: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { detcost_distribution_svg(cfg, &mut svg) },
        DetcostStatus::Ok
    );
    let svg = take_string(svg);
    assert!(svg.starts_with("<svg "));
    assert!(svg.contains("data-block=\"D3\""));
    unsafe { detcost_config_free(cfg) };
}

#[test]
fn generated_header_declares_the_api_and_compiles_as_c() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("detcost.h");
    let text = std::fs::read_to_string(&header).expect("header generated at build time");
    for symbol in [
        "typedef struct DetcostConfig DetcostConfig;",
        "detcost_config_preset",
        "detcost_config_from_json",
        "detcost_config_apply_transforms",
        "detcost_profile_json",
        "detcost_totals",
        "detcost_param_overhead",
        "detcost_distribution_svg",
        "detcost_last_error_message",
        "detcost_string_free",
        "DETCOST_STATUS_OK",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }

    // syntax-check with a C compiler when one is installed
    let gcc = std::process::Command::new("gcc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99"])
        .arg(&header)
        .status();
    match gcc {
        Ok(status) => assert!(status.success(), "header fails C syntax check"),
        Err(_) => eprintln!("gcc not found; skipping header syntax check"),
    }
}
