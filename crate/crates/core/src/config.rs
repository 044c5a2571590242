//! Declarative description of a RetinaNet variant and the built-in presets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Branch;

/// Trunk structure of a detection-head branch.
///
/// * `Original`: four 3x3 convolutions at constant width, each with ReLU.
/// * `V1`: each 3x3 replaced by a depthwise 3x3 plus a pointwise 1x1, each
///   with ReLU.
/// * `V2`: kernels alternate 3x3, 1x1, 3x3, 1x1 at constant width.
/// * `V3`: every trunk convolution is 1x1.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum HeadVariant {
    Original,
    V1,
    V2,
    V3,
}

/// How head weights are shared across pyramid levels.
///
/// Under `FullyShared` each branch uses one trunk+predictor parameter set for
/// levels 3..7. Under `PartialD3Independent`, levels 4..7 share and level 3
/// carries its own parameters, in the branches whose level-3 block is
/// substituted; an untouched branch keeps the original fully shared weights.
/// When no substitution is configured at all, an explicit partial scheme
/// gives every branch an independent level-3 parameter set.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SharingScheme {
    FullyShared,
    PartialD3Independent,
}

/// Whether a V3 substitution also shrinks the predictor convolution to 1x1.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum PredictorPolicy {
    KeepPredictor3x3,
    ReplacePredictorToo,
}

pub const MIN_INPUT_SIZE: u32 = 128;
pub const HEAD_LEVELS: [u8; 5] = [3, 4, 5, 6, 7];

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Square input extent in pixels.
    pub input_size: u32,
    pub num_classes: u32,
    pub anchors_per_location: u32,
    pub head_channels: u32,
    pub head_depth: u32,
    pub fpn_channels: u32,
    pub variant_cls: HeadVariant,
    pub variant_reg: HeadVariant,
    /// Pyramid levels the light-weight variant applies to.
    pub lw_levels: BTreeSet<u8>,
    pub sharing: SharingScheme,
    pub predictor_policy: PredictorPolicy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_size: 800,
            num_classes: 80,
            anchors_per_location: 9,
            head_channels: 256,
            head_depth: 4,
            fpn_channels: 256,
            variant_cls: HeadVariant::Original,
            variant_reg: HeadVariant::Original,
            lw_levels: BTreeSet::from([3]),
            sharing: SharingScheme::FullyShared,
            predictor_policy: PredictorPolicy::KeepPredictor3x3,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum ConfigError {
    #[error("input_size {size} is below the minimum of {MIN_INPUT_SIZE} (the network downsamples by 128 at the coarsest level)")]
    InputTooSmall { size: u32 },
    #[error("{field} must be >= 1")]
    ZeroField { field: &'static str },
    #[error("lw_levels contains {level}, valid levels are 3..=7")]
    LevelOutOfRange { level: u8 },
    #[error(
        "weight group mismatch: levels {lw_levels:?} use a different block shape than the \
         remaining levels, and differently-shaped blocks cannot share weights; \
         use PartialD3Independent sharing"
    )]
    UnshareableSubstitution { lw_levels: Vec<u8> },
    #[error(
        "partial sharing isolates only level 3: substituting levels {lw_levels:?} would leave \
         levels 4..7 with mixed block shapes that cannot share weights"
    )]
    UnshareableLevels { lw_levels: Vec<u8> },
}

impl ModelConfig {
    pub fn variant(&self, branch: Branch) -> HeadVariant {
        match branch {
            Branch::Classification => self.variant_cls,
            Branch::Regression => self.variant_reg,
        }
    }

    /// True when `branch` actually differs from the original head somewhere.
    pub fn is_substituted(&self, branch: Branch) -> bool {
        self.variant(branch) != HeadVariant::Original && !self.lw_levels.is_empty()
    }

    pub fn any_substitution(&self) -> bool {
        self.is_substituted(Branch::Classification) || self.is_substituted(Branch::Regression)
    }

    /// Variant in effect for one (branch, level) pair.
    pub fn level_variant(&self, branch: Branch, level: u8) -> HeadVariant {
        if self.lw_levels.contains(&level) {
            self.variant(branch)
        } else {
            HeadVariant::Original
        }
    }

    /// Whether `branch` gets an independent level-3 parameter set under the
    /// configured sharing scheme (see [`SharingScheme`]).
    pub fn d3_independent(&self, branch: Branch) -> bool {
        if self.sharing != SharingScheme::PartialD3Independent {
            return false;
        }
        let substituted_at_3 = self.is_substituted(branch) && self.lw_levels.contains(&3);
        substituted_at_3 || !self.any_substitution()
    }

    fn substitutes_all_levels(&self) -> bool {
        HEAD_LEVELS.iter().all(|l| self.lw_levels.contains(l))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.input_size < MIN_INPUT_SIZE {
            return Err(ConfigError::InputTooSmall { size: self.input_size });
        }
        for (field, value) in [
            ("num_classes", self.num_classes),
            ("anchors_per_location", self.anchors_per_location),
            ("head_channels", self.head_channels),
            ("head_depth", self.head_depth),
            ("fpn_channels", self.fpn_channels),
        ] {
            if value < 1 {
                return Err(ConfigError::ZeroField { field });
            }
        }
        if let Some(&level) = self.lw_levels.iter().find(|l| !(3..=7).contains(*l)) {
            return Err(ConfigError::LevelOutOfRange { level });
        }
        if self.any_substitution() && !self.substitutes_all_levels() {
            let lw: Vec<u8> = self.lw_levels.iter().copied().collect();
            if self.sharing == SharingScheme::FullyShared {
                return Err(ConfigError::UnshareableSubstitution { lw_levels: lw });
            }
            if lw != [3] {
                return Err(ConfigError::UnshareableLevels { lw_levels: lw });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

// ── Presets ─────────────────────────────────────────────────────────────────
//
// Named configurations exposed by the CLI. These are this toolkit's
// interpretations of the commonly studied light-weight variants; the exact
// published configurations differ only in which branches/levels they touch.

pub const PRESET_NAMES: [&str; 5] = [
    "baseline-800",
    "lw-v2-reg",
    "lw-v3-reg",
    "lw-v3-both",
    "lw-v3-both-pred",
];

/// Looks up a built-in preset by CLI name.
pub fn preset(name: &str) -> Option<ModelConfig> {
    let base = ModelConfig::default;
    let cfg = match name {
        "baseline-800" => base(),
        // V2 in the regression branch at every level; the blocks stay uniform
        // across levels so full sharing still applies.
        "lw-v2-reg" => ModelConfig {
            variant_reg: HeadVariant::V2,
            lw_levels: BTreeSet::from(HEAD_LEVELS),
            ..base()
        },
        // V3 in the regression branch at level 3 only, with an independent
        // level-3 parameter set.
        "lw-v3-reg" => ModelConfig {
            variant_reg: HeadVariant::V3,
            lw_levels: BTreeSet::from([3]),
            sharing: SharingScheme::PartialD3Independent,
            ..base()
        },
        "lw-v3-both" => ModelConfig {
            variant_cls: HeadVariant::V3,
            variant_reg: HeadVariant::V3,
            lw_levels: BTreeSet::from([3]),
            sharing: SharingScheme::PartialD3Independent,
            ..base()
        },
        // Like lw-v3-both but the predictor convolutions shrink to 1x1 too.
        "lw-v3-both-pred" => ModelConfig {
            variant_cls: HeadVariant::V3,
            variant_reg: HeadVariant::V3,
            lw_levels: BTreeSet::from([3]),
            sharing: SharingScheme::PartialD3Independent,
            predictor_policy: PredictorPolicy::ReplacePredictorToo,
            ..base()
        },
        _ => return None,
    };
    Some(cfg)
}
