//! Typed computation-graph IR for convolutional detection networks.
//!
//! Graphs are immutable after construction; validation, topological ordering
//! and shape inference are pure read-only passes, so a `Graph` can be shared
//! freely across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a node inside one [`Graph`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// N×C×H×W extents of a feature map. Batch is kept at 1 for all analyses;
/// per-image counts are what the cost model reports.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct TensorShape {
    pub n: u32,
    pub c: u32,
    pub h: u32,
    pub w: u32,
}

impl TensorShape {
    pub fn new(n: u32, c: u32, h: u32, w: u32) -> Self {
        TensorShape { n, c, h, w }
    }

    /// Single-image feature map, the common case.
    pub fn chw(c: u32, h: u32, w: u32) -> Self {
        TensorShape { n: 1, c, h, w }
    }

    pub fn elements(&self) -> u64 {
        self.n as u64 * self.c as u64 * self.h as u64 * self.w as u64
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Attributes of a 2-d convolution. Depthwise convolution is expressed as
/// `groups == in_channels == out_channels`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct ConvAttrs {
    pub kernel_h: u32,
    pub kernel_w: u32,
    pub stride: u32,
    pub padding: u32,
    pub in_channels: u32,
    pub out_channels: u32,
    pub groups: u32,
    pub has_bias: bool,
}

/// Operation vocabulary. This is intentionally small: exactly the ops needed
/// to express a ResNet backbone, an FPN and the detection head variants.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OpKind {
    Input { shape: TensorShape },
    Conv(ConvAttrs),
    BatchNorm { channels: u32 },
    Relu,
    Sigmoid,
    Add,
    MaxPool { kernel: u32, stride: u32, padding: u32 },
    NearestUpsample { factor: u32 },
}

impl OpKind {
    /// Number of inputs the op consumes.
    pub fn arity(&self) -> usize {
        match self {
            OpKind::Input { .. } => 0,
            OpKind::Add => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Input { .. } => "Input",
            OpKind::Conv(_) => "Conv",
            OpKind::BatchNorm { .. } => "BatchNorm",
            OpKind::Relu => "ReLU",
            OpKind::Sigmoid => "Sigmoid",
            OpKind::Add => "Add",
            OpKind::MaxPool { .. } => "MaxPool",
            OpKind::NearestUpsample { .. } => "NearestUpsample",
        }
    }
}

/// Which detection branch a head block belongs to.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Branch {
    Classification,
    Regression,
}

impl Branch {
    pub fn short(&self) -> &'static str {
        match self {
            Branch::Classification => "cls",
            Branch::Regression => "reg",
        }
    }
}

/// Coarse architectural block a node is attributed to in cost reports.
///
/// The derived ordering (`Stem`, `Res2`..`Res5`, `FPN`, then head blocks by
/// level and branch) is the canonical report/chart order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum BlockTag {
    Stem,
    Res2,
    Res3,
    Res4,
    Res5,
    Fpn,
    Head { level: u8, branch: Branch },
}

impl fmt::Display for BlockTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockTag::Stem => write!(f, "Stem"),
            BlockTag::Res2 => write!(f, "Res2"),
            BlockTag::Res3 => write!(f, "Res3"),
            BlockTag::Res4 => write!(f, "Res4"),
            BlockTag::Res5 => write!(f, "Res5"),
            BlockTag::Fpn => write!(f, "FPN"),
            BlockTag::Head { level, branch } => write!(f, "D{}:{}", level, branch.short()),
        }
    }
}

impl FromStr for BlockTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Stem" => return Ok(BlockTag::Stem),
            "Res2" => return Ok(BlockTag::Res2),
            "Res3" => return Ok(BlockTag::Res3),
            "Res4" => return Ok(BlockTag::Res4),
            "Res5" => return Ok(BlockTag::Res5),
            "FPN" => return Ok(BlockTag::Fpn),
            _ => {}
        }
        let rest = s.strip_prefix('D').ok_or_else(|| format!("unknown block tag `{s}`"))?;
        let (level, branch) = rest
            .split_once(':')
            .ok_or_else(|| format!("unknown block tag `{s}`"))?;
        let level: u8 = level.parse().map_err(|_| format!("unknown block tag `{s}`"))?;
        let branch = match branch {
            "cls" => Branch::Classification,
            "reg" => Branch::Regression,
            _ => return Err(format!("unknown branch `{branch}` in block tag `{s}`")),
        };
        Ok(BlockTag::Head { level, branch })
    }
}

/// Label tying nodes to one physical weight tensor. Nodes sharing a group
/// must have identical parameterised attributes; the cost model counts the
/// group's parameters once in totals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightGroupId(pub String);

impl WeightGroupId {
    pub fn new(label: impl Into<String>) -> Self {
        WeightGroupId(label.into())
    }
}

impl fmt::Display for WeightGroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Node {
    pub id: NodeId,
    pub kind: OpKind,
    pub inputs: Vec<NodeId>,
    /// Required on every non-Input node.
    pub block: Option<BlockTag>,
    pub weight_group: Option<WeightGroupId>,
}

/// An immutable DAG of typed ops.
#[derive(Clone, PartialEq, Debug)]
pub struct Graph {
    nodes: BTreeMap<NodeId, Node>,
    outputs: Vec<NodeId>,
}

impl Graph {
    /// Assembles a graph without validating it; run [`validate`] to check
    /// the structural invariants.
    pub fn new(nodes: Vec<Node>, outputs: Vec<NodeId>) -> Self {
        let nodes = nodes.into_iter().map(|n| (n.id, n)).collect();
        Graph { nodes, outputs }
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }
}

// ── Validation ──────────────────────────────────────────────────────────────

/// One structural invariant violation found by [`validate`].
#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum Violation {
    #[error("node {node} references missing input {input}")]
    DanglingEdge { node: NodeId, input: NodeId },
    #[error("output list references missing node {output}")]
    UnknownOutput { output: NodeId },
    #[error("graph has no outputs")]
    OutputsEmpty,
    #[error("node {node} ({kind}) expects {expected} inputs, has {found}")]
    ArityMismatch {
        node: NodeId,
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("graph contains a cycle through nodes {nodes:?}")]
    Cycle { nodes: Vec<NodeId> },
    #[error("node {node}: {reason}")]
    InvalidOpAttrs { node: NodeId, reason: String },
    #[error("node {node} ({kind}) carries no block tag")]
    MissingBlockTag { node: NodeId, kind: &'static str },
    #[error("node {node} block tag has head level {level}, expected 3..=7")]
    InvalidHeadLevel { node: NodeId, level: u8 },
    #[error(
        "weight group `{group}` mixes incompatible ops (node {first} vs node {second}); \
         shared weights require identical kernel/channel configuration"
    )]
    WeightGroupMismatch {
        group: WeightGroupId,
        first: NodeId,
        second: NodeId,
    },
}

fn check_op_attrs(node: &Node, out: &mut Vec<Violation>) {
    let bad = |reason: String| Violation::InvalidOpAttrs {
        node: node.id,
        reason,
    };
    match &node.kind {
        OpKind::Input { shape } => {
            if shape.n < 1 || shape.c < 1 || shape.h < 1 || shape.w < 1 {
                out.push(bad(format!("input shape {shape} has a zero extent")));
            }
        }
        OpKind::Conv(a) => {
            if a.kernel_h < 1 || a.kernel_w < 1 {
                out.push(bad(format!("conv kernel {}x{} must be >= 1", a.kernel_h, a.kernel_w)));
            }
            if a.stride < 1 {
                out.push(bad("conv stride must be >= 1".into()));
            }
            if a.groups < 1 {
                out.push(bad("conv groups must be >= 1".into()));
            } else {
                if a.in_channels % a.groups != 0 {
                    out.push(bad(format!(
                        "in_channels {} not divisible by groups {}",
                        a.in_channels, a.groups
                    )));
                }
                if a.out_channels % a.groups != 0 {
                    out.push(bad(format!(
                        "out_channels {} not divisible by groups {}",
                        a.out_channels, a.groups
                    )));
                }
            }
            if a.in_channels < 1 || a.out_channels < 1 {
                out.push(bad("conv channel counts must be >= 1".into()));
            }
        }
        OpKind::BatchNorm { channels } => {
            if *channels < 1 {
                out.push(bad("batch norm channels must be >= 1".into()));
            }
        }
        OpKind::MaxPool { kernel, stride, .. } => {
            if *kernel < 1 || *stride < 1 {
                out.push(bad("max pool kernel and stride must be >= 1".into()));
            }
        }
        OpKind::NearestUpsample { factor } => {
            if *factor < 1 {
                out.push(bad("upsample factor must be >= 1".into()));
            }
        }
        OpKind::Relu | OpKind::Sigmoid | OpKind::Add => {}
    }
}

/// Returns every structural violation in `graph`; an empty list means the
/// graph satisfies all IR invariants.
pub fn validate(graph: &Graph) -> Vec<Violation> {
    let mut out = Vec::new();

    if graph.outputs().is_empty() {
        out.push(Violation::OutputsEmpty);
    }
    for &output in graph.outputs() {
        if graph.node(output).is_none() {
            out.push(Violation::UnknownOutput { output });
        }
    }

    for node in graph.nodes() {
        for &input in &node.inputs {
            if graph.node(input).is_none() {
                out.push(Violation::DanglingEdge { node: node.id, input });
            }
        }
        let expected = node.kind.arity();
        if node.inputs.len() != expected {
            out.push(Violation::ArityMismatch {
                node: node.id,
                kind: node.kind.name(),
                expected,
                found: node.inputs.len(),
            });
        }
        check_op_attrs(node, &mut out);
        match (&node.kind, node.block) {
            (OpKind::Input { .. }, _) => {}
            (_, None) => out.push(Violation::MissingBlockTag {
                node: node.id,
                kind: node.kind.name(),
            }),
            (_, Some(BlockTag::Head { level, .. })) if !(3..=7).contains(&level) => {
                out.push(Violation::InvalidHeadLevel { node: node.id, level })
            }
            _ => {}
        }
    }

    if let Err(cycle) = topo_order(graph) {
        out.push(cycle);
    }

    // Weight groups: all members must agree on the parameterised attributes.
    let mut rep: BTreeMap<&WeightGroupId, &Node> = BTreeMap::new();
    for node in graph.nodes() {
        let Some(group) = &node.weight_group else { continue };
        match rep.get(group) {
            None => {
                rep.insert(group, node);
            }
            Some(first) if first.kind != node.kind => {
                out.push(Violation::WeightGroupMismatch {
                    group: group.clone(),
                    first: first.id,
                    second: node.id,
                });
            }
            Some(_) => {}
        }
    }

    out
}

// ── Topological order ───────────────────────────────────────────────────────

/// Kahn's algorithm with ascending-id tie breaking, so the order is a pure
/// function of the graph. Unresolvable edges are ignored here; `validate`
/// reports them separately.
pub fn topo_order(graph: &Graph) -> Result<Vec<NodeId>, Violation> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut indegree: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut consumers: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for node in graph.nodes() {
        let en = indegree.entry(node.id).or_insert(0);
        *en += node
            .inputs
            .iter()
            .filter(|i| graph.node(**i).is_some())
            .count();
        for &input in &node.inputs {
            if graph.node(input).is_some() {
                consumers.entry(input).or_default().push(node.id);
            }
        }
    }

    let mut ready: BinaryHeap<Reverse<NodeId>> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| Reverse(id))
        .collect();
    let mut order = Vec::with_capacity(graph.node_count());

    while let Some(Reverse(id)) = ready.pop() {
        order.push(id);
        for &consumer in consumers.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(&consumer).expect("consumer is in graph");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(consumer));
            }
        }
    }

    if order.len() != graph.node_count() {
        let nodes = indegree
            .into_iter()
            .filter(|(_, d)| *d > 0)
            .map(|(id, _)| id)
            .collect();
        return Err(Violation::Cycle { nodes });
    }
    Ok(order)
}

// ── Shape inference ─────────────────────────────────────────────────────────

/// Per-op reason shape inference failed.
#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum ShapeIssue {
    #[error("add operands have mismatched shapes {0} vs {1}")]
    AddMismatch(TensorShape, TensorShape),
    #[error("op expects {expected} input channels, got {found}")]
    ChannelMismatch { expected: u32, found: u32 },
    #[error(
        "computed spatial extent is not positive: input {extent} with kernel {kernel}, \
         stride {stride}, padding {padding}"
    )]
    ExtentUnderflow {
        extent: u32,
        kernel: u32,
        stride: u32,
        padding: u32,
    },
    #[error("extent arithmetic overflowed")]
    Overflow,
    #[error("op expects {expected} inputs, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("input node has no shape")]
    MissingInputShape,
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
#[error("shape inference failed at node {node}: {issue}")]
pub struct ShapeError {
    pub node: NodeId,
    pub issue: ShapeIssue,
}

/// Shapes assigned to every node of a graph.
pub type ShapeMap = BTreeMap<NodeId, TensorShape>;

/// Standard convolution/pooling output extent: floor((in + 2p - k)/s) + 1.
fn conv_extent(extent: u32, kernel: u32, stride: u32, padding: u32) -> Result<u32, ShapeIssue> {
    let padded = extent as u64 + 2 * padding as u64;
    if padded < kernel as u64 {
        return Err(ShapeIssue::ExtentUnderflow {
            extent,
            kernel,
            stride,
            padding,
        });
    }
    let out = (padded - kernel as u64) / stride as u64 + 1;
    u32::try_from(out).map_err(|_| ShapeIssue::Overflow)
}

/// Output shape of a single op given its input shapes.
pub fn op_output_shape(kind: &OpKind, inputs: &[TensorShape]) -> Result<TensorShape, ShapeIssue> {
    let expect_arity = |n: usize| {
        if inputs.len() != n {
            Err(ShapeIssue::Arity {
                expected: n,
                found: inputs.len(),
            })
        } else {
            Ok(())
        }
    };
    match kind {
        OpKind::Input { shape } => {
            expect_arity(0)?;
            Ok(*shape)
        }
        OpKind::Conv(a) => {
            expect_arity(1)?;
            let x = inputs[0];
            if x.c != a.in_channels {
                return Err(ShapeIssue::ChannelMismatch {
                    expected: a.in_channels,
                    found: x.c,
                });
            }
            Ok(TensorShape {
                n: x.n,
                c: a.out_channels,
                h: conv_extent(x.h, a.kernel_h, a.stride, a.padding)?,
                w: conv_extent(x.w, a.kernel_w, a.stride, a.padding)?,
            })
        }
        OpKind::BatchNorm { channels } => {
            expect_arity(1)?;
            let x = inputs[0];
            if x.c != *channels {
                return Err(ShapeIssue::ChannelMismatch {
                    expected: *channels,
                    found: x.c,
                });
            }
            Ok(x)
        }
        OpKind::Relu | OpKind::Sigmoid => {
            expect_arity(1)?;
            Ok(inputs[0])
        }
        OpKind::Add => {
            expect_arity(2)?;
            if inputs[0] != inputs[1] {
                return Err(ShapeIssue::AddMismatch(inputs[0], inputs[1]));
            }
            Ok(inputs[0])
        }
        OpKind::MaxPool {
            kernel,
            stride,
            padding,
        } => {
            expect_arity(1)?;
            let x = inputs[0];
            Ok(TensorShape {
                n: x.n,
                c: x.c,
                h: conv_extent(x.h, *kernel, *stride, *padding)?,
                w: conv_extent(x.w, *kernel, *stride, *padding)?,
            })
        }
        OpKind::NearestUpsample { factor } => {
            expect_arity(1)?;
            let x = inputs[0];
            let scale = |e: u32| {
                e.checked_mul(*factor).ok_or(ShapeIssue::Overflow)
            };
            Ok(TensorShape {
                n: x.n,
                c: x.c,
                h: scale(x.h)?,
                w: scale(x.w)?,
            })
        }
    }
}

/// Infers a shape for every node using the shapes embedded in `Input` ops.
///
/// Expects a structurally valid graph (see [`validate`]).
pub fn infer_shapes(graph: &Graph) -> Result<ShapeMap, ShapeError> {
    infer_shapes_with_inputs(graph, &BTreeMap::new())
}

/// Like [`infer_shapes`] but `overrides` replaces the embedded shape of the
/// given `Input` nodes.
pub fn infer_shapes_with_inputs(
    graph: &Graph,
    overrides: &BTreeMap<NodeId, TensorShape>,
) -> Result<ShapeMap, ShapeError> {
    let order = topo_order(graph).map_err(|_| ShapeError {
        node: NodeId(0),
        issue: ShapeIssue::MissingInputShape,
    })?;

    let mut shapes = ShapeMap::new();
    for id in order {
        let node = graph.node(id).expect("topo order only yields graph nodes");
        let fail = |issue| ShapeError { node: id, issue };

        let shape = if let OpKind::Input { .. } = node.kind {
            match overrides.get(&id) {
                Some(s) => *s,
                None => op_output_shape(&node.kind, &[]).map_err(fail)?,
            }
        } else {
            let mut ins = Vec::with_capacity(node.inputs.len());
            for input in &node.inputs {
                ins.push(*shapes.get(input).ok_or(ShapeError {
                    node: id,
                    issue: ShapeIssue::MissingInputShape,
                })?);
            }
            op_output_shape(&node.kind, &ins).map_err(fail)?
        };
        shapes.insert(id, shape);
    }
    Ok(shapes)
}

// ── Incremental builder ─────────────────────────────────────────────────────

/// Constructs a graph node by node, inferring shapes eagerly so builders can
/// branch on intermediate extents.
#[derive(Default, Debug)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    shapes: BTreeMap<NodeId, TensorShape>,
    next: u32,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, shape: TensorShape) -> NodeId {
        let id = NodeId(self.next);
        self.next += 1;
        self.nodes.push(Node {
            id,
            kind: OpKind::Input { shape },
            inputs: Vec::new(),
            block: None,
            weight_group: None,
        });
        self.shapes.insert(id, shape);
        id
    }

    /// Appends a node. Panics if an input id is unknown (a caller bug);
    /// data-dependent failures surface as [`ShapeError`].
    pub fn add(
        &mut self,
        kind: OpKind,
        inputs: &[NodeId],
        block: BlockTag,
        weight_group: Option<WeightGroupId>,
    ) -> Result<NodeId, ShapeError> {
        let in_shapes: Vec<TensorShape> = inputs
            .iter()
            .map(|i| {
                *self
                    .shapes
                    .get(i)
                    .unwrap_or_else(|| panic!("unknown input node {i}"))
            })
            .collect();
        let id = NodeId(self.next);
        let shape =
            op_output_shape(&kind, &in_shapes).map_err(|issue| ShapeError { node: id, issue })?;
        self.next += 1;
        self.nodes.push(Node {
            id,
            kind,
            inputs: inputs.to_vec(),
            block: Some(block),
            weight_group,
        });
        self.shapes.insert(id, shape);
        Ok(id)
    }

    /// Shape of an already-added node.
    pub fn shape(&self, id: NodeId) -> TensorShape {
        self.shapes[&id]
    }

    pub fn finish(self, outputs: Vec<NodeId>) -> Graph {
        Graph::new(self.nodes, outputs)
    }
}

// ── JSON serialization ──────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum GraphJsonError {
    #[error("malformed graph document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown op kind `{kind}`")]
    UnknownOpKind { kind: String },
    #[error("bad attrs for op kind `{kind}`: {source}")]
    BadAttrs {
        kind: String,
        source: serde_json::Error,
    },
    #[error("unknown block tag: {0}")]
    UnknownBlock(String),
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: NodeId,
    kind: String,
    attrs: serde_json::Value,
    inputs: Vec<NodeId>,
    block: Option<String>,
    weight_group: Option<WeightGroupId>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<NodeDoc>,
    outputs: Vec<NodeId>,
}

fn kind_to_doc(kind: &OpKind) -> (String, serde_json::Value) {
    use serde_json::json;
    let attrs = match kind {
        OpKind::Input { shape } => json!({ "shape": shape }),
        OpKind::Conv(a) => serde_json::to_value(a).expect("conv attrs serialize"),
        OpKind::BatchNorm { channels } => json!({ "channels": channels }),
        OpKind::MaxPool {
            kernel,
            stride,
            padding,
        } => json!({ "kernel": kernel, "stride": stride, "padding": padding }),
        OpKind::NearestUpsample { factor } => json!({ "factor": factor }),
        OpKind::Relu | OpKind::Sigmoid | OpKind::Add => json!({}),
    };
    (kind.name().to_string(), attrs)
}

fn kind_from_doc(kind: &str, attrs: serde_json::Value) -> Result<OpKind, GraphJsonError> {
    let bad = |source| GraphJsonError::BadAttrs {
        kind: kind.to_string(),
        source,
    };
    #[derive(Deserialize)]
    struct InputAttrs {
        shape: TensorShape,
    }
    #[derive(Deserialize)]
    struct BnAttrs {
        channels: u32,
    }
    #[derive(Deserialize)]
    struct PoolAttrs {
        kernel: u32,
        stride: u32,
        padding: u32,
    }
    #[derive(Deserialize)]
    struct UpAttrs {
        factor: u32,
    }
    Ok(match kind {
        "Input" => {
            let a: InputAttrs = serde_json::from_value(attrs).map_err(bad)?;
            OpKind::Input { shape: a.shape }
        }
        "Conv" => OpKind::Conv(serde_json::from_value(attrs).map_err(bad)?),
        "BatchNorm" => {
            let a: BnAttrs = serde_json::from_value(attrs).map_err(bad)?;
            OpKind::BatchNorm { channels: a.channels }
        }
        "ReLU" => OpKind::Relu,
        "Sigmoid" => OpKind::Sigmoid,
        "Add" => OpKind::Add,
        "MaxPool" => {
            let a: PoolAttrs = serde_json::from_value(attrs).map_err(bad)?;
            OpKind::MaxPool {
                kernel: a.kernel,
                stride: a.stride,
                padding: a.padding,
            }
        }
        "NearestUpsample" => {
            let a: UpAttrs = serde_json::from_value(attrs).map_err(bad)?;
            OpKind::NearestUpsample { factor: a.factor }
        }
        other => {
            return Err(GraphJsonError::UnknownOpKind {
                kind: other.to_string(),
            })
        }
    })
}

impl Graph {
    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            nodes: self
                .nodes()
                .map(|n| {
                    let (kind, attrs) = kind_to_doc(&n.kind);
                    NodeDoc {
                        id: n.id,
                        kind,
                        attrs,
                        inputs: n.inputs.clone(),
                        block: n.block.map(|b| b.to_string()),
                        weight_group: n.weight_group.clone(),
                    }
                })
                .collect(),
            outputs: self.outputs.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("graph document serializes")
    }

    /// Parses a graph document. The result is not validated; callers that
    /// accept untrusted documents should run [`validate`] next.
    pub fn from_json(text: &str) -> Result<Self, GraphJsonError> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for n in doc.nodes {
            let kind = kind_from_doc(&n.kind, n.attrs)?;
            let block = match n.block {
                Some(s) => Some(s.parse::<BlockTag>().map_err(GraphJsonError::UnknownBlock)?),
                None => None,
            };
            nodes.push(Node {
                id: n.id,
                kind,
                inputs: n.inputs,
                block,
                weight_group: n.weight_group,
            });
        }
        Ok(Graph::new(nodes, doc.outputs))
    }
}
