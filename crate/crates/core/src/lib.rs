//! Static MAC/parameter analysis and architecture surgery for FPN-based
//! detection networks.
//!
//! The crate models a RetinaNet-style network (ResNet-50 backbone, FPN
//! decoder, per-level detection heads) as a typed computation graph, counts
//! multiply-accumulates and parameters analytically, rewrites configurations
//! (light-weight head blocks, weight-sharing schemes, input scaling) and
//! reports FLOPs/accuracy trade-offs. Accuracy figures are static published
//! annotations; nothing here trains or runs a network.

pub mod builders;
pub mod chart;
pub mod config;
pub mod cost;
pub mod graph;
pub mod tradeoff;
pub mod transform;

pub use builders::{build_backbone_resnet50, build_fpn, build_head_block, build_retinanet};
pub use config::{preset, HeadVariant, ModelConfig, PredictorPolicy, SharingScheme, PRESET_NAMES};
pub use cost::{cost_report, loop_count_oracle, op_macs, op_params, CostOptions, CostReport};
pub use graph::{infer_shapes, topo_order, validate, Graph, TensorShape};
pub use tradeoff::{
    input_scaling_baseline, reduction_factor, sweep, AnnotationTable, PointFamily, TradeoffPoint,
    TransformChain,
};
pub use transform::{apply, apply_chain, param_overhead, Transform};
