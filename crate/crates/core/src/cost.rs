//! Analytic MAC and parameter counting with sharing-aware aggregation, plus
//! a brute-force loop-count oracle the closed forms are tested against.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    infer_shapes_with_inputs, BlockTag, ConvAttrs, Graph, Node, NodeId, OpKind,
    ShapeError, TensorShape, WeightGroupId,
};

/// MAC-to-FLOP convention. One multiply-accumulate reported as one FLOP is
/// the convention that reproduces detection-literature totals; counting the
/// multiply and the add separately doubles every figure.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub enum MacsPerFlop {
    #[default]
    MacIsOneFlop,
    MacIsTwoFlops,
}

impl MacsPerFlop {
    pub fn flops_per_mac(&self) -> u64 {
        match self {
            MacsPerFlop::MacIsOneFlop => 1,
            MacsPerFlop::MacIsTwoFlops => 2,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct CostOptions {
    /// Count batch norm, activations and elementwise adds as one MAC per
    /// output element. Off by default: conv layers dominate and published
    /// totals are conv-only.
    pub count_elementwise: bool,
    pub macs_per_flop: MacsPerFlop,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct NodeCost {
    pub macs: u64,
    pub params: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct BlockCost {
    pub macs: u64,
    pub params: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Totals {
    pub macs: u64,
    pub params: u64,
}

/// Per-node and per-block cost breakdown of one graph.
///
/// Parameters of a weight group are attributed to every block that uses the
/// group (the per-level memory view), but counted exactly once in `totals`.
#[derive(Clone, PartialEq, Debug)]
pub struct CostReport {
    pub per_node: BTreeMap<NodeId, NodeCost>,
    pub per_block: BTreeMap<BlockTag, BlockCost>,
    pub totals: Totals,
    pub block_fractions: BTreeMap<BlockTag, f64>,
}

#[derive(Debug, Error)]
pub enum CostError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("cost arithmetic overflowed at node {node}")]
    Overflow { node: NodeId },
}

fn wide_product(factors: [u64; 6]) -> u128 {
    factors.iter().fold(1u128, |acc, &f| acc * f as u128)
}

/// MACs of one op given its output shape.
///
/// Convolution: `out_h * out_w * out_c * (in_c/groups) * kernel_h * kernel_w`.
/// Pooling and upsampling perform no multiplies and cost zero; elementwise
/// ops cost one MAC per output element only when `count_elementwise` is set.
pub fn op_macs(node: &Node, out_shape: TensorShape, opts: &CostOptions) -> Result<u64, CostError> {
    let wide = match &node.kind {
        OpKind::Conv(a) => wide_product([
            out_shape.h as u64,
            out_shape.w as u64,
            a.out_channels as u64,
            (a.in_channels / a.groups) as u64,
            a.kernel_h as u64,
            a.kernel_w as u64,
        ]),
        OpKind::BatchNorm { .. } | OpKind::Relu | OpKind::Sigmoid | OpKind::Add => {
            if opts.count_elementwise {
                out_shape.elements() as u128
            } else {
                0
            }
        }
        OpKind::Input { .. } | OpKind::MaxPool { .. } | OpKind::NearestUpsample { .. } => 0,
    };
    u64::try_from(wide).map_err(|_| CostError::Overflow { node: node.id })
}

/// Parameter count of one op: conv weights (plus bias when present) and the
/// batch-norm scale/shift pair; everything else is parameter-free.
pub fn op_params(node: &Node) -> u64 {
    match &node.kind {
        OpKind::Conv(a) => {
            let weights = a.out_channels as u64
                * (a.in_channels / a.groups) as u64
                * a.kernel_h as u64
                * a.kernel_w as u64;
            weights + if a.has_bias { a.out_channels as u64 } else { 0 }
        }
        OpKind::BatchNorm { channels } => 2 * *channels as u64,
        _ => 0,
    }
}

/// Costs every node of a valid graph and aggregates by block with
/// weight-group deduplication in the totals.
pub fn cost_report(graph: &Graph, opts: &CostOptions) -> Result<CostReport, CostError> {
    cost_report_with_inputs(graph, &BTreeMap::new(), opts)
}

/// Like [`cost_report`] with explicit shapes for selected `Input` nodes.
pub fn cost_report_with_inputs(
    graph: &Graph,
    input_shapes: &BTreeMap<NodeId, TensorShape>,
    opts: &CostOptions,
) -> Result<CostReport, CostError> {
    let shapes = infer_shapes_with_inputs(graph, input_shapes)?;

    let mut per_node = BTreeMap::new();
    let mut per_block: BTreeMap<BlockTag, BlockCost> = BTreeMap::new();
    let mut block_groups: BTreeSet<(BlockTag, &WeightGroupId)> = BTreeSet::new();
    let mut counted_groups: BTreeSet<&WeightGroupId> = BTreeSet::new();
    let mut totals = Totals::default();

    for node in graph.nodes() {
        let macs = op_macs(node, shapes[&node.id], opts)?;
        let params = op_params(node);
        per_node.insert(node.id, NodeCost { macs, params });

        totals.macs = totals
            .macs
            .checked_add(macs)
            .ok_or(CostError::Overflow { node: node.id })?;
        match &node.weight_group {
            Some(group) => {
                if counted_groups.insert(group) {
                    totals.params += params;
                }
            }
            None => totals.params += params,
        }

        if let Some(block) = node.block {
            let entry = per_block.entry(block).or_default();
            entry.macs += macs;
            match &node.weight_group {
                // A group used twice inside one block still counts once there.
                Some(group) => {
                    if block_groups.insert((block, group)) {
                        entry.params += params;
                    }
                }
                None => entry.params += params,
            }
        }
    }

    let block_fractions = per_block
        .iter()
        .map(|(&block, cost)| {
            let fraction = if totals.macs == 0 {
                0.0
            } else {
                cost.macs as f64 / totals.macs as f64
            };
            (block, fraction)
        })
        .collect();

    Ok(CostReport {
        per_node,
        per_block,
        totals,
        block_fractions,
    })
}

impl CostReport {
    pub fn gmacs(&self) -> f64 {
        self.totals.macs as f64 / 1e9
    }

    /// Summed MAC fraction of the level-3 head blocks (both branches).
    pub fn d3_fraction(&self) -> f64 {
        self.block_fractions
            .iter()
            .filter(|(block, _)| matches!(block, BlockTag::Head { level: 3, .. }))
            .map(|(_, f)| f)
            .sum()
    }

    /// Rows for charts and tables: report order, with the two branches of
    /// each head level combined into one `D<level>` row.
    pub fn display_blocks(&self) -> Vec<DisplayBlock> {
        let mut rows: Vec<DisplayBlock> = Vec::new();
        for (block, cost) in &self.per_block {
            let label = match block {
                BlockTag::Head { level, .. } => format!("D{level}"),
                other => other.to_string(),
            };
            match rows.last_mut() {
                Some(last) if last.label == label => {
                    last.macs += cost.macs;
                    last.params += cost.params;
                }
                _ => rows.push(DisplayBlock {
                    label,
                    macs: cost.macs,
                    params: cost.params,
                }),
            }
        }
        rows
    }
}

/// One combined row of the block distribution (head branches merged).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DisplayBlock {
    pub label: String,
    pub macs: u64,
    pub params: u64,
}

// ── Serialization ───────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct CostReportDoc {
    per_node: BTreeMap<u32, NodeCost>,
    per_block: BTreeMap<String, BlockCost>,
    totals: Totals,
    block_fractions: BTreeMap<String, f64>,
}

#[derive(Debug, Error)]
pub enum ReportJsonError {
    #[error("malformed cost report: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad block tag in cost report: {0}")]
    BadBlock(String),
}

impl CostReport {
    pub fn to_json(&self) -> String {
        let doc = CostReportDoc {
            per_node: self.per_node.iter().map(|(id, c)| (id.0, *c)).collect(),
            per_block: self
                .per_block
                .iter()
                .map(|(b, c)| (b.to_string(), *c))
                .collect(),
            totals: self.totals,
            block_fractions: self
                .block_fractions
                .iter()
                .map(|(b, f)| (b.to_string(), *f))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportJsonError> {
        let doc: CostReportDoc = serde_json::from_str(text)?;
        let parse_block = |s: &str| s.parse::<BlockTag>().map_err(ReportJsonError::BadBlock);
        let mut per_block = BTreeMap::new();
        for (block, cost) in &doc.per_block {
            per_block.insert(parse_block(block)?, *cost);
        }
        let mut block_fractions = BTreeMap::new();
        for (block, fraction) in &doc.block_fractions {
            block_fractions.insert(parse_block(block)?, *fraction);
        }
        Ok(CostReport {
            per_node: doc
                .per_node
                .into_iter()
                .map(|(id, c)| (NodeId(id), c))
                .collect(),
            per_block,
            totals: doc.totals,
            block_fractions,
        })
    }

    /// CSV with one row per (block, branch): `block,branch,macs,params,fraction`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,branch,macs,params,fraction\n");
        for (block, cost) in &self.per_block {
            let (label, branch) = match block {
                BlockTag::Head { level, branch } => {
                    (format!("D{level}"), branch.short())
                }
                other => (other.to_string(), ""),
            };
            let fraction = self.block_fractions.get(block).copied().unwrap_or(0.0);
            out.push_str(&format!(
                "{label},{branch},{},{},{:.6}\n",
                cost.macs, cost.params, fraction
            ));
        }
        out
    }
}

// ── Loop-count oracle ───────────────────────────────────────────────────────

/// Extent guard for [`loop_count_oracle`].
pub const ORACLE_MAX_EXTENT: u32 = 16;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Error)]
pub enum OracleError {
    #[error("{field} = {value} exceeds the oracle guard of {ORACLE_MAX_EXTENT}")]
    GuardExceeded { field: &'static str, value: u32 },
    #[error("channels ({in_channels}/{out_channels}) not divisible by groups {groups}")]
    BadGroups {
        in_channels: u32,
        out_channels: u32,
        groups: u32,
    },
}

/// Counts convolution multiply-accumulates by explicit enumeration: the
/// kernel origin slides over the zero-padded input, and every tap of every
/// output channel accumulates one MAC. No closed form is reused, so this is
/// an independent check of [`op_macs`] at small extents.
pub fn loop_count_oracle(attrs: &ConvAttrs, in_shape: TensorShape) -> Result<u64, OracleError> {
    for (field, value) in [
        ("input height", in_shape.h),
        ("input width", in_shape.w),
        ("in_channels", attrs.in_channels),
        ("out_channels", attrs.out_channels),
        ("kernel_h", attrs.kernel_h),
        ("kernel_w", attrs.kernel_w),
        ("padding", attrs.padding),
    ] {
        if value > ORACLE_MAX_EXTENT {
            return Err(OracleError::GuardExceeded { field, value });
        }
    }
    if attrs.groups == 0
        || !attrs.in_channels.is_multiple_of(attrs.groups)
        || !attrs.out_channels.is_multiple_of(attrs.groups)
    {
        return Err(OracleError::BadGroups {
            in_channels: attrs.in_channels,
            out_channels: attrs.out_channels,
            groups: attrs.groups,
        });
    }

    let padded_h = in_shape.h + 2 * attrs.padding;
    let padded_w = in_shape.w + 2 * attrs.padding;
    let in_per_group = attrs.in_channels / attrs.groups;
    let out_per_group = attrs.out_channels / attrs.groups;

    let mut macs: u64 = 0;
    let mut origin_y = 0;
    while origin_y + attrs.kernel_h <= padded_h {
        let mut origin_x = 0;
        while origin_x + attrs.kernel_w <= padded_w {
            for _group in 0..attrs.groups {
                for _out in 0..out_per_group {
                    for _in in 0..in_per_group {
                        for _ky in 0..attrs.kernel_h {
                            for _kx in 0..attrs.kernel_w {
                                macs += 1;
                            }
                        }
                    }
                }
            }
            origin_x += attrs.stride;
        }
        origin_y += attrs.stride;
    }
    Ok(macs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BlockTag, Branch, GraphBuilder};

    fn conv_node(attrs: ConvAttrs) -> Node {
        Node {
            id: NodeId(0),
            kind: OpKind::Conv(attrs),
            inputs: vec![NodeId(99)],
            block: Some(BlockTag::Stem),
            weight_group: None,
        }
    }

    fn attrs(k: u32, in_c: u32, out_c: u32, groups: u32, bias: bool) -> ConvAttrs {
        ConvAttrs {
            kernel_h: k,
            kernel_w: k,
            stride: 1,
            padding: k / 2,
            in_channels: in_c,
            out_channels: out_c,
            groups,
            has_bias: bias,
        }
    }

    #[test]
    fn single_tap_conv_is_one_mac() {
        let node = conv_node(attrs(1, 1, 1, 1, false));
        let macs = op_macs(&node, TensorShape::chw(1, 1, 1), &CostOptions::default()).unwrap();
        assert_eq!(macs, 1);
    }

    #[test]
    fn dense_3x3_conv_at_256ch_100px() {
        let node = conv_node(attrs(3, 256, 256, 1, true));
        let macs = op_macs(&node, TensorShape::chw(256, 100, 100), &CostOptions::default()).unwrap();
        assert_eq!(macs, 5_898_240_000);
    }

    #[test]
    fn depthwise_3x3_conv_at_256ch_100px() {
        let node = conv_node(attrs(3, 256, 256, 256, false));
        let macs = op_macs(&node, TensorShape::chw(256, 100, 100), &CostOptions::default()).unwrap();
        assert_eq!(macs, 23_040_000);
    }

    #[test]
    fn elementwise_ops_cost_zero_unless_opted_in() {
        let node = Node {
            id: NodeId(0),
            kind: OpKind::Relu,
            inputs: vec![NodeId(1)],
            block: Some(BlockTag::Stem),
            weight_group: None,
        };
        let shape = TensorShape::chw(8, 4, 4);
        assert_eq!(op_macs(&node, shape, &CostOptions::default()).unwrap(), 0);
        let opts = CostOptions { count_elementwise: true, ..Default::default() };
        assert_eq!(op_macs(&node, shape, &opts).unwrap(), 128);
    }

    #[test]
    fn param_formulas_match_hand_counts() {
        assert_eq!(op_params(&conv_node(attrs(3, 256, 256, 1, true))), 590_080);
        assert_eq!(op_params(&conv_node(attrs(3, 256, 256, 256, false))), 2_304);
        let bn = Node {
            id: NodeId(0),
            kind: OpKind::BatchNorm { channels: 64 },
            inputs: vec![NodeId(1)],
            block: Some(BlockTag::Stem),
            weight_group: None,
        };
        assert_eq!(op_params(&bn), 128);
    }

    #[test]
    fn oracle_single_tap() {
        let macs = loop_count_oracle(&attrs(1, 1, 1, 1, false), TensorShape::chw(1, 1, 1)).unwrap();
        assert_eq!(macs, 1);
    }

    #[test]
    fn oracle_padded_3x3() {
        // 3x3, 2 -> 4 channels, 5x5 map, pad 1, stride 1: 5*5*4*2*9
        let macs = loop_count_oracle(&attrs(3, 2, 4, 1, false), TensorShape::chw(2, 5, 5)).unwrap();
        assert_eq!(macs, 1_800);
    }

    #[test]
    fn oracle_grouped_1x1() {
        // groups=2, 4 -> 4 channels, 1x1, 3x3 map: 3*3*4*2*1
        let macs = loop_count_oracle(&attrs(1, 4, 4, 2, false), TensorShape::chw(4, 3, 3)).unwrap();
        assert_eq!(macs, 72);
    }

    #[test]
    fn oracle_guard_rejects_large_extents() {
        let err = loop_count_oracle(&attrs(3, 2, 2, 1, false), TensorShape::chw(2, 17, 5));
        assert!(matches!(err, Err(OracleError::GuardExceeded { .. })));
    }

    #[test]
    fn input_only_graph_reports_zero_totals() {
        let mut g = GraphBuilder::new();
        let x = g.input(TensorShape::chw(3, 8, 8));
        let g = g.finish(vec![x]);
        let report = cost_report(&g, &CostOptions::default()).unwrap();
        assert_eq!(report.totals, Totals { macs: 0, params: 0 });
        assert!(report.per_block.is_empty());
    }

    #[test]
    fn shared_groups_count_once_in_totals_but_per_block_everywhere() {
        let mut g = GraphBuilder::new();
        let x = g.input(TensorShape::chw(8, 8, 8));
        let shared = WeightGroupId::new("shared");
        let a = g
            .add(
                OpKind::Conv(attrs(3, 8, 8, 1, true)),
                &[x],
                BlockTag::Head { level: 3, branch: Branch::Classification },
                Some(shared.clone()),
            )
            .unwrap();
        let b = g
            .add(
                OpKind::Conv(attrs(3, 8, 8, 1, true)),
                &[a],
                BlockTag::Head { level: 4, branch: Branch::Classification },
                Some(shared.clone()),
            )
            .unwrap();
        let g = g.finish(vec![b]);
        let report = cost_report(&g, &CostOptions::default()).unwrap();

        let each = 8 * 8 * 3 * 3 + 8;
        assert_eq!(report.totals.params, each);
        let blocks: Vec<u64> = report.per_block.values().map(|c| c.params).collect();
        assert_eq!(blocks, vec![each, each]);
        // MACs are physical per-level compute and never dedupe
        let mac_sum: u64 = report.per_block.values().map(|c| c.macs).sum();
        assert_eq!(mac_sum, report.totals.macs);
        assert!(report.totals.macs > 0);
    }

    #[test]
    fn block_fractions_sum_to_one() {
        let mut g = GraphBuilder::new();
        let x = g.input(TensorShape::chw(3, 16, 16));
        let a = g
            .add(OpKind::Conv(attrs(3, 3, 8, 1, true)), &[x], BlockTag::Stem, None)
            .unwrap();
        let b = g
            .add(OpKind::Conv(attrs(1, 8, 8, 1, true)), &[a], BlockTag::Fpn, None)
            .unwrap();
        let g = g.finish(vec![b]);
        let report = cost_report(&g, &CostOptions::default()).unwrap();
        let sum: f64 = report.block_fractions.values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_json_round_trips() {
        let mut g = GraphBuilder::new();
        let x = g.input(TensorShape::chw(3, 16, 16));
        let a = g
            .add(OpKind::Conv(attrs(3, 3, 8, 1, true)), &[x], BlockTag::Stem, None)
            .unwrap();
        let g = g.finish(vec![a]);
        let report = cost_report(&g, &CostOptions::default()).unwrap();
        let back = CostReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn v1_trunk_layer_reduction_is_9c_over_c_plus_9() {
        let map = TensorShape::chw(256, 100, 100);
        let opts = CostOptions::default();
        let original = op_macs(&conv_node(attrs(3, 256, 256, 1, true)), map, &opts).unwrap();
        let dw = op_macs(&conv_node(attrs(3, 256, 256, 256, true)), map, &opts).unwrap();
        let pw = op_macs(&conv_node(attrs(1, 256, 256, 1, true)), map, &opts).unwrap();
        let ratio = original as f64 / (dw + pw) as f64;
        let expected = 9.0 * 256.0 / (256.0 + 9.0);
        assert!((ratio - expected).abs() < 1e-9, "{ratio} vs {expected}");
    }
}
