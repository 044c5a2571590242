//! Graph constructors: ResNet-50 backbone, FPN decoder and the detection
//! head variants, assembled into a full network from a [`ModelConfig`].

use thiserror::Error;

use crate::config::{ConfigError, HeadVariant, ModelConfig, PredictorPolicy};
use crate::graph::{
    validate, BlockTag, Branch, ConvAttrs, Graph, GraphBuilder, NodeId, OpKind, ShapeError,
    TensorShape, Violation, WeightGroupId,
};

/// Smallest input extent that still reaches the stride-32 tap.
pub const MIN_BACKBONE_INPUT: u32 = 32;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("input {h}x{w} is too small to reach the stride-32 backbone tap (minimum {MIN_BACKBONE_INPUT})")]
    InputTooSmall { h: u32, w: u32 },
    #[error("backbone expects a 3-channel input, got {found} channels")]
    StemChannels { found: u32 },
    #[error("upsampled map {upsampled} cannot be aligned to lateral map {lateral}")]
    FpnAlignment {
        upsampled: TensorShape,
        lateral: TensorShape,
    },
    #[error("built graph failed validation: {0:?}")]
    Invalid(Vec<Violation>),
}

/// Backbone feature taps at strides 8, 16 and 32.
#[derive(Clone, Copy, Debug)]
pub struct BackboneTaps {
    pub c3: NodeId,
    pub c4: NodeId,
    pub c5: NodeId,
}

/// Pyramid outputs P3..P7.
#[derive(Clone, Copy, Debug)]
pub struct FpnTaps {
    pub p3: NodeId,
    pub p4: NodeId,
    pub p5: NodeId,
    pub p6: NodeId,
    pub p7: NodeId,
}

impl FpnTaps {
    pub fn by_level(&self) -> [(u8, NodeId); 5] {
        [
            (3, self.p3),
            (4, self.p4),
            (5, self.p5),
            (6, self.p6),
            (7, self.p7),
        ]
    }
}

fn conv_attrs(k: u32, stride: u32, in_c: u32, out_c: u32, groups: u32, bias: bool) -> ConvAttrs {
    ConvAttrs {
        kernel_h: k,
        kernel_w: k,
        stride,
        padding: k / 2,
        in_channels: in_c,
        out_channels: out_c,
        groups,
        has_bias: bias,
    }
}

/// Backbone convolution: bias-free conv followed by batch norm.
fn conv_bn(
    g: &mut GraphBuilder,
    x: NodeId,
    k: u32,
    stride: u32,
    in_c: u32,
    out_c: u32,
    tag: BlockTag,
) -> Result<NodeId, ShapeError> {
    let c = g.add(
        OpKind::Conv(conv_attrs(k, stride, in_c, out_c, 1, false)),
        &[x],
        tag,
        None,
    )?;
    g.add(OpKind::BatchNorm { channels: out_c }, &[c], tag, None)
}

fn relu(g: &mut GraphBuilder, x: NodeId, tag: BlockTag) -> Result<NodeId, ShapeError> {
    g.add(OpKind::Relu, &[x], tag, None)
}

fn bottleneck(
    g: &mut GraphBuilder,
    x: NodeId,
    in_c: u32,
    mid_c: u32,
    out_c: u32,
    stride: u32,
    tag: BlockTag,
) -> Result<NodeId, ShapeError> {
    let y = conv_bn(g, x, 1, 1, in_c, mid_c, tag)?;
    let y = relu(g, y, tag)?;
    let y = conv_bn(g, y, 3, stride, mid_c, mid_c, tag)?;
    let y = relu(g, y, tag)?;
    let y = conv_bn(g, y, 1, 1, mid_c, out_c, tag)?;
    let identity = if in_c != out_c || stride != 1 {
        conv_bn(g, x, 1, stride, in_c, out_c, tag)?
    } else {
        x
    };
    let sum = g.add(OpKind::Add, &[y, identity], tag, None)?;
    relu(g, sum, tag)
}

struct StageSpec {
    in_c: u32,
    mid_c: u32,
    out_c: u32,
    blocks: u32,
    stride: u32,
}

fn stage(
    g: &mut GraphBuilder,
    mut x: NodeId,
    spec: StageSpec,
    tag: BlockTag,
) -> Result<NodeId, ShapeError> {
    for i in 0..spec.blocks {
        let (block_in, block_stride) = if i == 0 {
            (spec.in_c, spec.stride)
        } else {
            (spec.out_c, 1)
        };
        x = bottleneck(g, x, block_in, spec.mid_c, spec.out_c, block_stride, tag)?;
    }
    Ok(x)
}

/// Builds a ResNet-50 feature extractor (classification head omitted) on top
/// of `input` and returns the C3/C4/C5 taps.
pub fn build_backbone_resnet50(
    g: &mut GraphBuilder,
    input: NodeId,
) -> Result<BackboneTaps, BuildError> {
    let in_shape = g.shape(input);
    if in_shape.c != 3 {
        return Err(BuildError::StemChannels { found: in_shape.c });
    }
    if in_shape.h < MIN_BACKBONE_INPUT || in_shape.w < MIN_BACKBONE_INPUT {
        return Err(BuildError::InputTooSmall {
            h: in_shape.h,
            w: in_shape.w,
        });
    }

    let stem = conv_bn(g, input, 7, 2, 3, 64, BlockTag::Stem)?;
    let stem = relu(g, stem, BlockTag::Stem)?;
    let pooled = g.add(
        OpKind::MaxPool { kernel: 3, stride: 2, padding: 1 },
        &[stem],
        BlockTag::Stem,
        None,
    )?;

    let spec = |in_c, mid_c, out_c, blocks, stride| StageSpec { in_c, mid_c, out_c, blocks, stride };
    let c2 = stage(g, pooled, spec(64, 64, 256, 3, 1), BlockTag::Res2)?;
    let c3 = stage(g, c2, spec(256, 128, 512, 4, 2), BlockTag::Res3)?;
    let c4 = stage(g, c3, spec(512, 256, 1024, 6, 2), BlockTag::Res4)?;
    let c5 = stage(g, c4, spec(1024, 512, 2048, 3, 2), BlockTag::Res5)?;
    Ok(BackboneTaps { c3, c4, c5 })
}

/// Doubles `coarse` and trims it to the lateral extent. Odd lateral extents
/// make the doubled map overshoot by one pixel; a stride-1 2x2 max pool
/// (zero modeled MACs) crops it, matching resize-to-target upsampling.
fn upsample_to(
    g: &mut GraphBuilder,
    coarse: NodeId,
    lateral: NodeId,
) -> Result<NodeId, BuildError> {
    let up = g.add(
        OpKind::NearestUpsample { factor: 2 },
        &[coarse],
        BlockTag::Fpn,
        None,
    )?;
    let us = g.shape(up);
    let ls = g.shape(lateral);
    if us.h == ls.h && us.w == ls.w {
        return Ok(up);
    }
    if us.h == ls.h + 1 && us.w == ls.w + 1 {
        return Ok(g.add(
            OpKind::MaxPool { kernel: 2, stride: 1, padding: 0 },
            &[up],
            BlockTag::Fpn,
            None,
        )?);
    }
    Err(BuildError::FpnAlignment {
        upsampled: us,
        lateral: ls,
    })
}

/// Builds the FPN decoder over the backbone taps: lateral 1x1 convolutions,
/// top-down merge, 3x3 output convolutions, plus stride-2 P6/P7 extensions.
pub fn build_fpn(
    g: &mut GraphBuilder,
    taps: &BackboneTaps,
    channels: u32,
) -> Result<FpnTaps, BuildError> {
    let tag = BlockTag::Fpn;
    let lateral = |g: &mut GraphBuilder, tap: NodeId| -> Result<NodeId, ShapeError> {
        let in_c = g.shape(tap).c;
        g.add(
            OpKind::Conv(conv_attrs(1, 1, in_c, channels, 1, true)),
            &[tap],
            tag,
            None,
        )
    };

    let lat5 = lateral(g, taps.c5)?;
    let lat4 = lateral(g, taps.c4)?;
    let lat3 = lateral(g, taps.c3)?;

    let td5 = lat5;
    let up4 = upsample_to(g, td5, lat4)?;
    let td4 = g.add(OpKind::Add, &[up4, lat4], tag, None)?;
    let up3 = upsample_to(g, td4, lat3)?;
    let td3 = g.add(OpKind::Add, &[up3, lat3], tag, None)?;

    let smooth = |g: &mut GraphBuilder, x: NodeId| -> Result<NodeId, ShapeError> {
        g.add(
            OpKind::Conv(conv_attrs(3, 1, channels, channels, 1, true)),
            &[x],
            tag,
            None,
        )
    };
    let p3 = smooth(g, td3)?;
    let p4 = smooth(g, td4)?;
    let p5 = smooth(g, td5)?;

    let c5_channels = g.shape(taps.c5).c;
    let p6 = g.add(
        OpKind::Conv(conv_attrs(3, 2, c5_channels, channels, 1, true)),
        &[taps.c5],
        tag,
        None,
    )?;
    let p7 = relu(g, p6, tag)?;
    let p7 = g.add(
        OpKind::Conv(conv_attrs(3, 2, channels, channels, 1, true)),
        &[p7],
        tag,
        None,
    )?;

    Ok(FpnTaps { p3, p4, p5, p6, p7 })
}

/// Weight-group prefix for one (branch, level): `cls`/`reg` when the level
/// shares the branch parameter set, `cls.d3`/`reg.d3` when level 3 carries
/// its own.
fn group_prefix(cfg: &ModelConfig, branch: Branch, level: u8) -> String {
    if level == 3 && cfg.d3_independent(branch) {
        format!("{}.d3", branch.short())
    } else {
        branch.short().to_string()
    }
}

/// Builds one head branch (trunk per variant plus predictor) on pyramid
/// level `level` and returns the branch output node.
pub fn build_head_block(
    g: &mut GraphBuilder,
    p: NodeId,
    level: u8,
    branch: Branch,
    cfg: &ModelConfig,
) -> Result<NodeId, BuildError> {
    let tag = BlockTag::Head { level, branch };
    let variant = cfg.level_variant(branch, level);
    let prefix = group_prefix(cfg, branch, level);
    let width = cfg.head_channels;
    let group = |name: String| Some(WeightGroupId::new(name));

    let mut x = p;
    for i in 0..cfg.head_depth {
        let in_c = if i == 0 { cfg.fpn_channels } else { width };
        match variant {
            HeadVariant::Original => {
                x = g.add(
                    OpKind::Conv(conv_attrs(3, 1, in_c, width, 1, true)),
                    &[x],
                    tag,
                    group(format!("{prefix}.t{i}")),
                )?;
                x = relu(g, x, tag)?;
            }
            HeadVariant::V1 => {
                x = g.add(
                    OpKind::Conv(conv_attrs(3, 1, in_c, in_c, in_c, true)),
                    &[x],
                    tag,
                    group(format!("{prefix}.t{i}.dw")),
                )?;
                x = relu(g, x, tag)?;
                x = g.add(
                    OpKind::Conv(conv_attrs(1, 1, in_c, width, 1, true)),
                    &[x],
                    tag,
                    group(format!("{prefix}.t{i}.pw")),
                )?;
                x = relu(g, x, tag)?;
            }
            HeadVariant::V2 => {
                let k = if i % 2 == 0 { 3 } else { 1 };
                x = g.add(
                    OpKind::Conv(conv_attrs(k, 1, in_c, width, 1, true)),
                    &[x],
                    tag,
                    group(format!("{prefix}.t{i}")),
                )?;
                x = relu(g, x, tag)?;
            }
            HeadVariant::V3 => {
                x = g.add(
                    OpKind::Conv(conv_attrs(1, 1, in_c, width, 1, true)),
                    &[x],
                    tag,
                    group(format!("{prefix}.t{i}")),
                )?;
                x = relu(g, x, tag)?;
            }
        }
    }

    let out_c = match branch {
        Branch::Classification => cfg.num_classes * cfg.anchors_per_location,
        Branch::Regression => 4 * cfg.anchors_per_location,
    };
    let pred_k = if variant == HeadVariant::V3
        && cfg.predictor_policy == PredictorPolicy::ReplacePredictorToo
    {
        1
    } else {
        3
    };
    x = g.add(
        OpKind::Conv(conv_attrs(pred_k, 1, width, out_c, 1, true)),
        &[x],
        tag,
        group(format!("{prefix}.pred")),
    )?;
    if branch == Branch::Classification {
        x = g.add(OpKind::Sigmoid, &[x], tag, None)?;
    }
    Ok(x)
}

/// Builds the complete network described by `cfg`: backbone, FPN, and one
/// classification plus one regression branch per pyramid level, with weight
/// groups assigned per the sharing scheme. The result always validates.
pub fn build_retinanet(cfg: &ModelConfig) -> Result<Graph, BuildError> {
    cfg.validate()?;
    let mut g = GraphBuilder::new();
    let input = g.input(TensorShape::chw(3, cfg.input_size, cfg.input_size));
    let taps = build_backbone_resnet50(&mut g, input)?;
    let fpn = build_fpn(&mut g, &taps, cfg.fpn_channels)?;

    let mut outputs = Vec::with_capacity(10);
    for (level, p) in fpn.by_level() {
        for branch in [Branch::Classification, Branch::Regression] {
            outputs.push(build_head_block(&mut g, p, level, branch, cfg)?);
        }
    }

    let graph = g.finish(outputs);
    let violations = validate(&graph);
    if !violations.is_empty() {
        return Err(BuildError::Invalid(violations));
    }
    Ok(graph)
}

// Sanity check used by sharing-scheme tests and the parameter counter: the
// paper-level constraint that classification and regression branches never
// share weights is enforced by the `cls`/`reg` group prefixes.
