//! `detcost`: profile, transform, sweep, compare and render detection-net
//! cost models from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use serde::Deserialize;

use detcost::builders::build_retinanet;
use detcost::chart::{render_distribution_chart, render_tradeoff_chart};
use detcost::config::{preset, ModelConfig, PRESET_NAMES};
use detcost::cost::{cost_report, CostOptions, CostReport, MacsPerFlop};
use detcost::graph::BlockTag;
use detcost::tradeoff::{
    input_scaling_baseline, points_from_csv, points_to_csv, points_to_json, sweep,
    AnnotationTable, TradeoffPoint, TransformChain,
};
use detcost::transform::{apply_chain, param_overhead, transforms_from_json};

const CONFIG_HELP: &str =
    "Model config: a JSON file path, or `preset:<name>` for a built-in preset";

#[derive(Parser)]
#[command(
    name = "detcost",
    version,
    about = "Static MAC/parameter profiler for FPN-based detection networks",
    after_help = preset_help()
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

fn preset_help() -> String {
    format!("Built-in presets: {}", PRESET_NAMES.join(", "))
}

#[derive(Subcommand)]
enum Cmd {
    /// Count MACs and parameters per block and in total
    Profile {
        #[arg(long, help = CONFIG_HELP)]
        config: String,
        /// Write the per-block report as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the full report as JSON
        #[arg(long)]
        json: Option<PathBuf>,
        /// Count elementwise ops (batch norm, activations, adds) too
        #[arg(long)]
        include_elementwise: bool,
        /// FLOPs per multiply-accumulate in the reported GFLOPs line
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2), default_value_t = 1)]
        macs_per_flop: u8,
    },
    /// Apply a transform file to a config and write the result
    Transform {
        #[arg(long, help = CONFIG_HELP)]
        config: String,
        /// Transform JSON: one object or an array (applied left to right)
        #[arg(long)]
        apply: Option<PathBuf>,
        /// Output path for the transformed config
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a suite of transform chains plus input-scaling sizes
    Sweep {
        #[arg(long, help = CONFIG_HELP)]
        config: String,
        /// Suite JSON: {"chains":[{"label","transforms":[...]}],"input_scaling_sizes":[...]}
        #[arg(long)]
        suite: PathBuf,
        /// Write the trade-off points as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the trade-off points as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare two configs block by block
    Compare {
        #[arg(long, help = CONFIG_HELP)]
        a: String,
        #[arg(long, help = CONFIG_HELP)]
        b: String,
    },
    /// Render an SVG chart from sweep points or a profile report
    #[command(group(ArgGroup::new("source").required(true).args(["points", "report"])))]
    Render {
        /// Trade-off points CSV (from `sweep --csv`), rendered as a scatter
        #[arg(long)]
        points: Option<PathBuf>,
        /// Cost report JSON (from `profile --json`), rendered as bars
        #[arg(long)]
        report: Option<PathBuf>,
        /// Output SVG path
        #[arg(long)]
        out: PathBuf,
    },
}

enum AppError {
    Usage(String),
    Invalid(String),
    Io(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Invalid(_) => 2,
            AppError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Invalid(m) | AppError::Io(m) => m,
        }
    }
}

fn invalid(err: impl std::fmt::Display) -> AppError {
    AppError::Invalid(err.to_string())
}

fn read_file(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| AppError::Io(format!("reading {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), AppError> {
    std::fs::write(path, contents).map_err(|e| AppError::Io(format!("writing {}: {e}", path.display())))
}

/// Resolves a `--config` value to a validated config and a point label.
fn load_config(spec: &str) -> Result<(ModelConfig, String), AppError> {
    let (cfg, label) = if let Some(name) = spec.strip_prefix("preset:") {
        let cfg = preset(name).ok_or_else(|| {
            AppError::Usage(format!(
                "unknown preset `{name}`; available: {}",
                PRESET_NAMES.join(", ")
            ))
        })?;
        (cfg, name.to_string())
    } else {
        let path = Path::new(spec);
        let text = read_file(path)?;
        let cfg = ModelConfig::from_json(&text)
            .map_err(|e| AppError::Invalid(format!("parsing {}: {e}", path.display())))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "base".to_string());
        (cfg, label)
    };
    cfg.validate().map_err(invalid)?;
    Ok((cfg, label))
}

fn print_config(title: &str, cfg: &ModelConfig) {
    println!("{title}:\n{}\n", cfg.to_json());
}

fn block_row_label(block: &BlockTag) -> (String, &'static str) {
    match block {
        BlockTag::Head { level, branch } => (format!("D{level}"), branch.short()),
        other => (other.to_string(), "-"),
    }
}

fn print_report_table(report: &CostReport) {
    println!(
        "{:<6} {:<7} {:>16} {:>12} {:>10}",
        "block", "branch", "MACs", "params", "fraction"
    );
    for (block, cost) in &report.per_block {
        let (label, branch) = block_row_label(block);
        let fraction = report.block_fractions.get(block).copied().unwrap_or(0.0);
        println!(
            "{label:<6} {branch:<7} {:>16} {:>12} {:>10.4}",
            cost.macs, cost.params, fraction
        );
    }
    println!();
    println!("total MACs: {}", report.totals.macs);
    println!("total params: {}", report.totals.params);
    println!("GMACs: {:.3}", report.gmacs());
}

fn run_profile(
    config: &str,
    csv: Option<&Path>,
    json: Option<&Path>,
    include_elementwise: bool,
    macs_per_flop: u8,
) -> Result<(), AppError> {
    let (cfg, _) = load_config(config)?;
    print_config("resolved config", &cfg);

    let opts = CostOptions {
        count_elementwise: include_elementwise,
        macs_per_flop: if macs_per_flop == 2 {
            MacsPerFlop::MacIsTwoFlops
        } else {
            MacsPerFlop::MacIsOneFlop
        },
    };
    let graph = build_retinanet(&cfg).map_err(invalid)?;
    let report = cost_report(&graph, &opts).map_err(invalid)?;

    print_report_table(&report);
    let fpm = opts.macs_per_flop.flops_per_mac();
    println!(
        "GFLOPs: {:.3} ({fpm} FLOP per MAC)",
        (report.totals.macs * fpm) as f64 / 1e9
    );

    if let Some(path) = csv {
        write_file(path, &report.to_csv())?;
    }
    if let Some(path) = json {
        write_file(path, &report.to_json())?;
    }
    Ok(())
}

fn run_transform(config: &str, apply: Option<&Path>, out: &Path) -> Result<(), AppError> {
    let (cfg, _) = load_config(config)?;
    print_config("resolved config", &cfg);

    let transforms = match apply {
        Some(path) => {
            let text = read_file(path)?;
            transforms_from_json(&text)
                .map_err(|e| AppError::Invalid(format!("parsing {}: {e}", path.display())))?
        }
        None => Vec::new(),
    };
    let result = apply_chain(&cfg, &transforms).map_err(invalid)?;
    print_config("transformed config", &result);
    write_file(out, &result.to_json())
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SuiteDoc {
    #[serde(default)]
    chains: Vec<TransformChain>,
    #[serde(default)]
    input_scaling_sizes: Vec<u32>,
}

fn print_points_table(points: &[TradeoffPoint], baseline: &TradeoffPoint) {
    println!(
        "{:<22} {:<13} {:>10} {:>10} {:>8}",
        "label", "family", "GMACs", "reduction", "mAP"
    );
    for p in points {
        let reduction = baseline.macs as f64 / p.macs.max(1) as f64;
        let map = p
            .map_annotation
            .as_ref()
            .map(|a| format!("{:.1}", a.value_percent))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{:<22} {:<13} {:>10.3} {:>9.3}x {:>8}",
            p.label,
            p.family.label(),
            p.gmacs(),
            reduction,
            map
        );
    }
}

fn run_sweep(
    config: &str,
    suite_path: &Path,
    csv: Option<&Path>,
    json: Option<&Path>,
) -> Result<(), AppError> {
    let (cfg, label) = load_config(config)?;
    print_config("resolved config", &cfg);

    let suite: SuiteDoc = serde_json::from_str(&read_file(suite_path)?)
        .map_err(|e| AppError::Invalid(format!("parsing {}: {e}", suite_path.display())))?;

    let opts = CostOptions::default();
    let table = AnnotationTable::builtin();
    let outcome = sweep(&label, &cfg, &suite.chains, &opts, &table).map_err(invalid)?;
    let scaling =
        input_scaling_baseline(&cfg, &suite.input_scaling_sizes, &opts, &table).map_err(invalid)?;

    let mut points = outcome.points.clone();
    points.extend(scaling);
    let baseline = points[0].clone();

    print_points_table(&points, &baseline);
    for failure in &outcome.failures {
        eprintln!("chain `{}` failed: {}", failure.label, failure.message);
    }

    if let Some(path) = csv {
        write_file(path, &points_to_csv(&points, &baseline))?;
    }
    if let Some(path) = json {
        write_file(path, &points_to_json(&points))?;
    }

    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(AppError::Invalid(format!(
            "{} chain(s) failed; see diagnostics above",
            outcome.failures.len()
        )))
    }
}

fn run_compare(a: &str, b: &str) -> Result<(), AppError> {
    let (cfg_a, label_a) = load_config(a)?;
    let (cfg_b, label_b) = load_config(b)?;
    print_config(&format!("resolved config A ({label_a})"), &cfg_a);
    print_config(&format!("resolved config B ({label_b})"), &cfg_b);

    let opts = CostOptions::default();
    let report_a = cost_report(&build_retinanet(&cfg_a).map_err(invalid)?, &opts).map_err(invalid)?;
    let report_b = cost_report(&build_retinanet(&cfg_b).map_err(invalid)?, &opts).map_err(invalid)?;

    let mut rows: BTreeMap<BlockTag, [(u64, u64); 2]> = BTreeMap::new();
    for (i, report) in [&report_a, &report_b].into_iter().enumerate() {
        for (block, cost) in &report.per_block {
            rows.entry(*block).or_default()[i] = (cost.macs, cost.params);
        }
    }

    println!(
        "{:<6} {:<7} {:>16} {:>16} {:>14} {:>12} {:>12}",
        "block", "branch", "MACs A", "MACs B", "MACs delta", "params A", "params B"
    );
    for (block, [(ma, pa), (mb, pb)]) in &rows {
        let (label, branch) = block_row_label(block);
        println!(
            "{label:<6} {branch:<7} {ma:>16} {mb:>16} {:>14} {pa:>12} {pb:>12}",
            *mb as i128 - *ma as i128
        );
    }
    println!();
    println!(
        "total MACs: {} -> {} (GMACs {:.3} -> {:.3})",
        report_a.totals.macs,
        report_b.totals.macs,
        report_a.gmacs(),
        report_b.gmacs()
    );
    println!(
        "total params: {} -> {}",
        report_a.totals.params, report_b.totals.params
    );

    let overhead = param_overhead(&cfg_a, &cfg_b).map_err(invalid)?;
    println!("param overhead (B vs A): {:+.4}%", overhead * 100.0);
    if report_b.totals.macs > 0 {
        println!(
            "MAC reduction factor (A/B): {:.3}x",
            report_a.totals.macs as f64 / report_b.totals.macs as f64
        );
    }
    Ok(())
}

fn run_render(points: Option<&Path>, report: Option<&Path>, out: &Path) -> Result<(), AppError> {
    let svg = match (points, report) {
        (Some(points_path), None) => {
            let parsed = points_from_csv(&read_file(points_path)?).map_err(invalid)?;
            render_tradeoff_chart(&parsed)
        }
        (None, Some(report_path)) => {
            let parsed = CostReport::from_json(&read_file(report_path)?).map_err(invalid)?;
            render_distribution_chart(&parsed)
        }
        _ => {
            return Err(AppError::Usage(
                "render needs exactly one of --points or --report".into(),
            ))
        }
    };
    write_file(out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.cmd {
        Cmd::Profile {
            config,
            csv,
            json,
            include_elementwise,
            macs_per_flop,
        } => run_profile(
            &config,
            csv.as_deref(),
            json.as_deref(),
            include_elementwise,
            macs_per_flop,
        ),
        Cmd::Transform { config, apply, out } => run_transform(&config, apply.as_deref(), &out),
        Cmd::Sweep {
            config,
            suite,
            csv,
            json,
        } => run_sweep(&config, &suite, csv.as_deref(), json.as_deref()),
        Cmd::Compare { a, b } => run_compare(&a, &b),
        Cmd::Render { points, report, out } => run_render(points.as_deref(), report.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
