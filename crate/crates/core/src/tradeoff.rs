//! Config sweeps and FLOPs/accuracy trade-off points.
//!
//! Accuracy never comes from this toolkit: mAP values are static annotations
//! carried over from published results, attached by label. Unannotated
//! points stay unannotated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builders::build_retinanet;
use crate::config::ModelConfig;
use crate::cost::{cost_report, CostOptions};
use crate::transform::{apply_chain, Transform, TransformError};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum PointFamily {
    Proposed,
    InputScaling,
}

impl PointFamily {
    pub fn label(&self) -> &'static str {
        match self {
            PointFamily::Proposed => "Proposed",
            PointFamily::InputScaling => "InputScaling",
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct MapAnnotation {
    pub value_percent: f64,
    pub source: String,
}

/// One point of the FLOPs/accuracy trade-off.
#[derive(Clone, PartialEq, Debug)]
pub struct TradeoffPoint {
    pub label: String,
    /// Raw MAC total; `gmacs()` derives the reported value.
    pub macs: u64,
    pub map_annotation: Option<MapAnnotation>,
    pub family: PointFamily,
}

impl TradeoffPoint {
    pub fn gmacs(&self) -> f64 {
        self.macs as f64 / 1e9
    }
}

// ── Annotation table ────────────────────────────────────────────────────────

/// A published accuracy figure, either an absolute mAP for a labelled
/// configuration or a relative gap between two block designs.
#[derive(Clone, PartialEq, Debug)]
pub enum Annotation {
    Absolute {
        key: String,
        value_percent: f64,
        source: String,
    },
    RelativeGap {
        lower: String,
        higher: String,
        delta_percent: f64,
        source: String,
    },
}

/// The shipped accuracy annotations. Only values quotable from published
/// prose are included; nothing is interpolated and relative gaps without an
/// absolute anchor never attach to points.
#[derive(Clone, PartialEq, Debug)]
pub struct AnnotationTable {
    entries: Vec<Annotation>,
}

impl AnnotationTable {
    pub fn builtin() -> Self {
        let baseline_source =
            "published COCO test-dev mAP for RetinaNet-ResNet50-FPN at 800px input";
        AnnotationTable {
            entries: vec![
                Annotation::Absolute {
                    key: "baseline-800".into(),
                    value_percent: 35.7,
                    source: baseline_source.into(),
                },
                Annotation::Absolute {
                    key: "input-800".into(),
                    value_percent: 35.7,
                    source: baseline_source.into(),
                },
                Annotation::Absolute {
                    key: "lw-v2-reg".into(),
                    value_percent: 35.6,
                    source: "published COCO test-dev result for the regression-branch \
                             D-block-v2 variant: 0.1 mAP below the 35.7 baseline"
                        .into(),
                },
                Annotation::RelativeGap {
                    lower: "d-block-v1".into(),
                    higher: "d-block-v3".into(),
                    delta_percent: 0.8,
                    source: "published ablation: D-block-v1 scores 0.8 mAP below \
                             D-block-v3 at the same FLOPs reduction"
                        .into(),
                },
            ],
        }
    }

    pub fn empty() -> Self {
        AnnotationTable { entries: Vec::new() }
    }

    pub fn entries(&self) -> &[Annotation] {
        &self.entries
    }

    /// Absolute annotation for a point label, if one is shipped.
    pub fn lookup(&self, label: &str) -> Option<MapAnnotation> {
        self.entries.iter().find_map(|entry| match entry {
            Annotation::Absolute {
                key,
                value_percent,
                source,
            } if key == label => Some(MapAnnotation {
                value_percent: *value_percent,
                source: source.clone(),
            }),
            _ => None,
        })
    }
}

// ── Sweeps ──────────────────────────────────────────────────────────────────

/// A named list of transforms evaluated as one sweep point.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TransformChain {
    pub label: String,
    pub transforms: Vec<Transform>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("base configuration `{label}` failed: {source}")]
    Base {
        label: String,
        source: TransformError,
    },
    #[error("input-scaling size {size} failed: {source}")]
    Scale {
        size: u32,
        source: TransformError,
    },
    #[error("point `{label}` has zero MACs")]
    ZeroMacs { label: String },
}

/// A chain that failed to evaluate; the remaining points are still produced.
#[derive(Clone, PartialEq, Debug)]
pub struct ChainFailure {
    pub label: String,
    pub message: String,
}

#[derive(Clone, PartialEq, Debug)]
pub struct SweepOutcome {
    /// Base point first, then one point per chain in input order.
    pub points: Vec<TradeoffPoint>,
    pub failures: Vec<ChainFailure>,
}

fn evaluate(
    label: &str,
    cfg: &ModelConfig,
    family: PointFamily,
    opts: &CostOptions,
    table: &AnnotationTable,
) -> Result<TradeoffPoint, TransformError> {
    let graph = build_retinanet(cfg)?;
    let report = cost_report(&graph, opts)?;
    Ok(TradeoffPoint {
        label: label.to_string(),
        macs: report.totals.macs,
        map_annotation: table.lookup(label),
        family,
    })
}

/// Evaluates the base config plus every named chain. Chain failures are
/// collected per point; the sweep keeps going.
pub fn sweep(
    base_label: &str,
    base: &ModelConfig,
    chains: &[TransformChain],
    opts: &CostOptions,
    table: &AnnotationTable,
) -> Result<SweepOutcome, SweepError> {
    let base_point =
        evaluate(base_label, base, PointFamily::Proposed, opts, table).map_err(|source| {
            SweepError::Base {
                label: base_label.to_string(),
                source,
            }
        })?;

    let mut points = vec![base_point];
    let mut failures = Vec::new();
    for chain in chains {
        let result = apply_chain(base, &chain.transforms)
            .and_then(|cfg| evaluate(&chain.label, &cfg, PointFamily::Proposed, opts, table));
        match result {
            Ok(point) => points.push(point),
            Err(err) => failures.push(ChainFailure {
                label: chain.label.clone(),
                message: err.to_string(),
            }),
        }
    }
    Ok(SweepOutcome { points, failures })
}

/// The conventional trade-off baseline: the same architecture at shrinking
/// input sizes. One point per size, labelled `input-<size>`.
pub fn input_scaling_baseline(
    base: &ModelConfig,
    sizes: &[u32],
    opts: &CostOptions,
    table: &AnnotationTable,
) -> Result<Vec<TradeoffPoint>, SweepError> {
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let scaled = apply_chain(base, &[Transform::ScaleInput { target_size: size }])
            .map_err(|source| SweepError::Scale { size, source })?;
        let label = format!("input-{size}");
        let point = evaluate(&label, &scaled, PointFamily::InputScaling, opts, table)
            .map_err(|source| SweepError::Scale { size, source })?;
        points.push(point);
    }
    Ok(points)
}

/// How many times cheaper `point` is than `baseline`.
pub fn reduction_factor(point: &TradeoffPoint, baseline: &TradeoffPoint) -> Result<f64, SweepError> {
    if point.macs == 0 {
        return Err(SweepError::ZeroMacs {
            label: point.label.clone(),
        });
    }
    Ok(baseline.macs as f64 / point.macs as f64)
}

// ── Point serialization ─────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct PointDoc {
    label: String,
    family: PointFamily,
    gmacs: f64,
    macs: u64,
    map_annotation: Option<MapAnnotation>,
}

#[derive(Debug, Error)]
pub enum PointsIoError {
    #[error("malformed points document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed points CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("points CSV row {row}: {message}")]
    Row { row: usize, message: String },
}

/// JSON mirror of the point list; raw MAC totals are preserved for bit-exact
/// comparison.
pub fn points_to_json(points: &[TradeoffPoint]) -> String {
    let docs: Vec<PointDoc> = points
        .iter()
        .map(|p| PointDoc {
            label: p.label.clone(),
            family: p.family,
            gmacs: p.gmacs(),
            macs: p.macs,
            map_annotation: p.map_annotation.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("points serialize")
}

pub fn points_from_json(text: &str) -> Result<Vec<TradeoffPoint>, PointsIoError> {
    let docs: Vec<PointDoc> = serde_json::from_str(text)?;
    Ok(docs
        .into_iter()
        .map(|d| TradeoffPoint {
            label: d.label,
            macs: d.macs,
            map_annotation: d.map_annotation,
            family: d.family,
        })
        .collect())
}

/// CSV columns: `label,family,gmacs,reduction_factor_vs_baseline,map_percent,map_source`.
/// `gmacs` uses the shortest round-tripping float form; reduction factors are
/// relative to `baseline`.
pub fn points_to_csv(points: &[TradeoffPoint], baseline: &TradeoffPoint) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "label",
            "family",
            "gmacs",
            "reduction_factor_vs_baseline",
            "map_percent",
            "map_source",
        ])
        .expect("csv header");
    for p in points {
        let reduction = if p.macs == 0 {
            String::new()
        } else {
            format!("{:.6}", baseline.macs as f64 / p.macs as f64)
        };
        let (map_percent, map_source) = match &p.map_annotation {
            Some(a) => (a.value_percent.to_string(), a.source.clone()),
            None => (String::new(), String::new()),
        };
        writer
            .write_record([
                p.label.as_str(),
                p.family.label(),
                &p.gmacs().to_string(),
                &reduction,
                &map_percent,
                &map_source,
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv is utf-8")
}

pub fn points_from_csv(text: &str) -> Result<Vec<TradeoffPoint>, PointsIoError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let bad = |message: String| PointsIoError::Row { row: row + 2, message };

        let family = match field(1).as_str() {
            "Proposed" => PointFamily::Proposed,
            "InputScaling" => PointFamily::InputScaling,
            other => return Err(bad(format!("unknown family `{other}`"))),
        };
        let gmacs: f64 = field(2)
            .parse()
            .map_err(|e| bad(format!("bad gmacs: {e}")))?;
        let map_percent = field(4);
        let map_annotation = if map_percent.is_empty() {
            None
        } else {
            Some(MapAnnotation {
                value_percent: map_percent
                    .parse()
                    .map_err(|e| bad(format!("bad map_percent: {e}")))?,
                source: field(5),
            })
        };
        points.push(TradeoffPoint {
            label: field(0),
            macs: (gmacs * 1e9).round() as u64,
            map_annotation,
            family,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;

    fn opts() -> CostOptions {
        CostOptions::default()
    }

    #[test]
    fn empty_sweep_yields_the_base_point_only() {
        let base = ModelConfig::default();
        let outcome = sweep(
            "baseline-800",
            &base,
            &[],
            &opts(),
            &AnnotationTable::builtin(),
        )
        .unwrap();
        assert_eq!(outcome.points.len(), 1);
        assert!(outcome.failures.is_empty());
        let point = &outcome.points[0];
        assert_eq!(point.label, "baseline-800");
        assert!(point.gmacs() > 140.0 && point.gmacs() < 172.0);
        assert_eq!(point.map_annotation.as_ref().unwrap().value_percent, 35.7);
    }

    #[test]
    fn failing_chains_do_not_block_other_points() {
        let base = ModelConfig::default();
        let chains = [
            TransformChain {
                label: "bad".into(),
                transforms: vec![Transform::ScaleInput { target_size: 10 }],
            },
            TransformChain {
                label: "smaller".into(),
                transforms: vec![Transform::ScaleInput { target_size: 640 }],
            },
        ];
        let outcome = sweep(
            "base",
            &base,
            &chains,
            &opts(),
            &AnnotationTable::empty(),
        )
        .unwrap();
        assert_eq!(outcome.points.len(), 2);
        assert_eq!(outcome.failures.len(), 1);
        assert_eq!(outcome.failures[0].label, "bad");
        assert_eq!(outcome.points[1].label, "smaller");
    }

    #[test]
    fn sweep_is_deterministic() {
        let base = preset("lw-v3-both").unwrap();
        let run = || {
            sweep("p", &base, &[], &opts(), &AnnotationTable::builtin())
                .unwrap()
                .points
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn scaling_series_is_strictly_decreasing_and_anchored_at_the_base() {
        let base = ModelConfig::default();
        let points = input_scaling_baseline(
            &base,
            &[800, 700, 600, 500, 400],
            &opts(),
            &AnnotationTable::builtin(),
        )
        .unwrap();
        assert_eq!(points.len(), 5);
        for pair in points.windows(2) {
            assert!(pair[0].macs > pair[1].macs);
        }
        assert!(points.iter().all(|p| p.family == PointFamily::InputScaling));

        let base_point = sweep("x", &base, &[], &opts(), &AnnotationTable::empty())
            .unwrap()
            .points
            .remove(0);
        assert_eq!(points[0].macs, base_point.macs, "size 800 equals the base bit-exactly");
    }

    #[test]
    fn undersized_scaling_point_is_an_error() {
        let err = input_scaling_baseline(
            &ModelConfig::default(),
            &[64],
            &opts(),
            &AnnotationTable::empty(),
        );
        assert!(matches!(err, Err(SweepError::Scale { size: 64, .. })));
    }

    #[test]
    fn reduction_factor_of_a_point_against_itself_is_one() {
        let p = TradeoffPoint {
            label: "x".into(),
            macs: 123,
            map_annotation: None,
            family: PointFamily::Proposed,
        };
        assert_eq!(reduction_factor(&p, &p).unwrap(), 1.0);
    }

    #[test]
    fn annotations_come_only_from_the_table() {
        let base = preset("lw-v3-both").unwrap();
        let outcome = sweep(
            "lw-v3-both",
            &base,
            &[],
            &opts(),
            &AnnotationTable::builtin(),
        )
        .unwrap();
        assert!(outcome.points[0].map_annotation.is_none());

        // relative gaps never attach
        let table = AnnotationTable::builtin();
        assert!(table.lookup("d-block-v1").is_none());
        assert!(table
            .entries()
            .iter()
            .any(|e| matches!(e, Annotation::RelativeGap { delta_percent, .. } if *delta_percent == 0.8)));
    }

    #[test]
    fn every_annotation_entry_carries_a_source() {
        for entry in AnnotationTable::builtin().entries() {
            let source = match entry {
                Annotation::Absolute { source, .. } => source,
                Annotation::RelativeGap { source, .. } => source,
            };
            assert!(!source.is_empty());
        }
    }

    fn sample_points() -> Vec<TradeoffPoint> {
        vec![
            TradeoffPoint {
                label: "baseline-800".into(),
                macs: 149_194_714_112,
                map_annotation: AnnotationTable::builtin().lookup("baseline-800"),
                family: PointFamily::Proposed,
            },
            TradeoffPoint {
                label: "input-400".into(),
                macs: 36_637_071_360,
                map_annotation: None,
                family: PointFamily::InputScaling,
            },
        ]
    }

    #[test]
    fn csv_round_trip_preserves_label_gmacs_and_family() {
        let points = sample_points();
        let text = points_to_csv(&points, &points[0]);
        let back = points_from_csv(&text).unwrap();
        assert_eq!(back.len(), points.len());
        for (a, b) in points.iter().zip(&back) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.family, b.family);
            assert_eq!(a.gmacs(), b.gmacs());
            assert_eq!(a.macs, b.macs);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let points = sample_points();
        let back = points_from_json(&points_to_json(&points)).unwrap();
        assert_eq!(points, back);
    }
}
