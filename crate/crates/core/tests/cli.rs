//! CLI contract tests: exit codes, error channels and the documented
//! subcommand flows.

use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_detcost"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, stderr) = run(&["profile", "--config", "preset:baseline-800", "--frobnicate"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--frobnicate"), "{stderr}");
}

#[test]
fn unknown_preset_is_a_usage_error_listing_the_presets() {
    let (code, _, stderr) = run(&["profile", "--config", "preset:nope"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("baseline-800"), "{stderr}");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let (code, _, stderr) = run(&["profile", "--config", "/no/such/file.json"]);
    assert_eq!(code, 3);
    assert!(stderr.contains("error:"), "{stderr}");
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, "{\"input_size\": \"eight hundred\"}");
    let (code, _, stderr) = run(&["profile", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("error:"), "{stderr}");
}

#[test]
fn conflicting_sharing_transform_exits_2_with_a_weight_group_explanation() {
    let dir = tempfile::tempdir().unwrap();
    let transform = dir.path().join("reshare.json");
    write(&transform, r#"{"type": "SetSharing", "scheme": "FullyShared"}"#);
    let out = dir.path().join("out.json");
    let (code, _, stderr) = run(&[
        "transform",
        "--config",
        "preset:lw-v3-reg",
        "--apply",
        transform.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("weight group mismatch"), "{stderr}");
    assert!(!out.exists(), "no output on failure");
}

#[test]
fn sweep_with_an_empty_suite_writes_the_baseline_point_only() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    write(&suite, r#"{"chains": [], "input_scaling_sizes": []}"#);
    let csv = dir.path().join("points.csv");
    let (code, stdout, _) = run(&[
        "sweep",
        "--config",
        "preset:baseline-800",
        "--suite",
        suite.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("baseline-800"));

    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert_eq!(
        lines[0],
        "label,family,gmacs,reduction_factor_vs_baseline,map_percent,map_source"
    );
    assert!(lines[1].starts_with("baseline-800,Proposed,"));
}

#[test]
fn failing_chains_keep_their_points_out_but_others_in() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    write(
        &suite,
        r#"{
            "chains": [
                {"label": "broken", "transforms": [{"type": "ScaleInput", "target_size": 8}]},
                {"label": "half", "transforms": [{"type": "ScaleInput", "target_size": 400}]}
            ],
            "input_scaling_sizes": []
        }"#,
    );
    let csv = dir.path().join("points.csv");
    let (code, _, stderr) = run(&[
        "sweep",
        "--config",
        "preset:baseline-800",
        "--suite",
        suite.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "a failed chain surfaces in the exit code");
    assert!(stderr.contains("broken"), "{stderr}");

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("\nhalf,"), "{text}");
    assert!(!text.contains("broken"), "{text}");
}

#[test]
fn every_subcommand_documents_its_flags() {
    let expectations: [(&str, &[&str]); 5] = [
        ("profile", &["--config", "--csv", "--json", "--include-elementwise", "--macs-per-flop"]),
        ("transform", &["--config", "--apply", "--out"]),
        ("sweep", &["--config", "--suite", "--csv", "--json"]),
        ("compare", &["--a", "--b"]),
        ("render", &["--points", "--report", "--out"]),
    ];
    for (cmd, flags) in expectations {
        let (code, stdout, _) = run(&[cmd, "--help"]);
        assert_eq!(code, 0, "{cmd} --help");
        for flag in flags {
            assert!(stdout.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

#[test]
fn profile_prints_the_resolved_config_before_results() {
    let (code, stdout, _) = run(&["profile", "--config", "preset:lw-v3-both"]);
    assert_eq!(code, 0);
    let config_at = stdout.find("resolved config").unwrap();
    let totals_at = stdout.find("GMACs:").unwrap();
    assert!(config_at < totals_at);
    assert!(stdout.contains("\"variant_cls\": \"V3\""));
}

#[test]
fn render_requires_exactly_one_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.svg");
    let (code, _, _) = run(&["render", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);

    let points = dir.path().join("p.csv");
    let report = dir.path().join("r.json");
    write(&points, "label,family,gmacs,reduction_factor_vs_baseline,map_percent,map_source\n");
    write(&report, "{}");
    let (code, _, _) = run(&[
        "render",
        "--points",
        points.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn transform_then_profile_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.json");
    write(
        &chain,
        r#"[
            {"type": "SubstituteHead", "variant": "V3",
             "branches": ["Regression"], "levels": [3],
             "predictor_policy": "KeepPredictor3x3"},
            {"type": "ScaleInput", "target_size": 640}
        ]"#,
    );
    let out = dir.path().join("derived.json");
    let (code, stdout, _) = run(&[
        "transform",
        "--config",
        "preset:baseline-800",
        "--apply",
        chain.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("transformed config"));

    let cfg = detcost::config::ModelConfig::from_json(&std::fs::read_to_string(&out).unwrap())
        .expect("output parses as a config");
    assert_eq!(cfg.input_size, 640);

    let (code, stdout, _) = run(&["profile", "--config", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("GMACs:"));
}

#[test]
fn render_produces_svg_files_from_both_sources() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    write(&suite, r#"{"chains": [], "input_scaling_sizes": [800, 400]}"#);
    let points_csv = dir.path().join("points.csv");
    let report_json = dir.path().join("report.json");
    let fig6 = dir.path().join("fig6.svg");
    let fig3 = dir.path().join("fig3.svg");

    let (code, _, _) = run(&[
        "sweep", "--config", "preset:baseline-800",
        "--suite", suite.to_str().unwrap(),
        "--csv", points_csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&[
        "profile", "--config", "preset:baseline-800",
        "--json", report_json.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let (code, _, _) = run(&[
        "render", "--points", points_csv.to_str().unwrap(),
        "--out", fig6.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&[
        "render", "--report", report_json.to_str().unwrap(),
        "--out", fig3.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let fig6_svg = std::fs::read_to_string(&fig6).unwrap();
    assert!(fig6_svg.starts_with("<svg "));
    assert!(fig6_svg.contains("class=\"rug\""), "input-400 has no annotation");
    let fig3_svg = std::fs::read_to_string(&fig3).unwrap();
    assert!(fig3_svg.starts_with("<svg "));
    assert!(fig3_svg.contains("data-block=\"D3\""));
}

#[test]
fn unwritable_output_path_is_an_io_error() {
    let (code, _, stderr) = run(&[
        "profile",
        "--config",
        "preset:baseline-800",
        "--json",
        "/no/such/dir/report.json",
    ]);
    assert_eq!(code, 3);
    assert!(stderr.contains("error:"), "{stderr}");
}
