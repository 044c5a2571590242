//! Config-level rewrites: head-block substitution, sharing changes and
//! input-image scaling. Rewrites at this level cannot produce invalid
//! graphs; every result is re-validated as a [`ModelConfig`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builders::{build_retinanet, BuildError};
use crate::config::{ConfigError, HeadVariant, ModelConfig, PredictorPolicy, SharingScheme, HEAD_LEVELS};
use crate::cost::{cost_report, CostError, CostOptions};
use crate::graph::Branch;

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Transform {
    SubstituteHead {
        variant: HeadVariant,
        branches: BTreeSet<Branch>,
        levels: BTreeSet<u8>,
        predictor_policy: PredictorPolicy,
    },
    SetSharing {
        scheme: SharingScheme,
    },
    ScaleInput {
        target_size: u32,
    },
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Applies one transform, returning a new validated config.
///
/// Substituting on a proper subset of levels forces partial sharing, since a
/// substituted level can no longer share weights with the untouched ones.
pub fn apply(cfg: &ModelConfig, t: &Transform) -> Result<ModelConfig, TransformError> {
    let mut next = cfg.clone();
    match t {
        Transform::SubstituteHead {
            variant,
            branches,
            levels,
            predictor_policy,
        } => {
            for branch in branches {
                match branch {
                    Branch::Classification => next.variant_cls = *variant,
                    Branch::Regression => next.variant_reg = *variant,
                }
            }
            next.lw_levels = levels.clone();
            next.predictor_policy = *predictor_policy;
            let full = HEAD_LEVELS.iter().all(|l| levels.contains(l));
            if next.any_substitution() && !full {
                next.sharing = SharingScheme::PartialD3Independent;
            }
        }
        Transform::SetSharing { scheme } => next.sharing = *scheme,
        Transform::ScaleInput { target_size } => next.input_size = *target_size,
    }
    next.validate()?;
    Ok(next)
}

/// Applies a chain of transforms left to right.
pub fn apply_chain(cfg: &ModelConfig, chain: &[Transform]) -> Result<ModelConfig, TransformError> {
    let mut current = cfg.clone();
    for t in chain {
        current = apply(&current, t)?;
    }
    Ok(current)
}

/// Sharing-aware relative parameter change from `before` to `after`:
/// `(params_after - params_before) / params_before`.
pub fn param_overhead(before: &ModelConfig, after: &ModelConfig) -> Result<f64, TransformError> {
    let opts = CostOptions::default();
    let params_before = cost_report(&build_retinanet(before)?, &opts)?.totals.params;
    let params_after = cost_report(&build_retinanet(after)?, &opts)?.totals.params;
    Ok((params_after as f64 - params_before as f64) / params_before as f64)
}

/// Parses a transform document: either one transform object or an array.
pub fn transforms_from_json(text: &str) -> Result<Vec<Transform>, serde_json::Error> {
    match serde_json::from_str::<Vec<Transform>>(text) {
        Ok(list) => Ok(list),
        Err(_) => serde_json::from_str::<Transform>(text).map(|t| vec![t]),
    }
}
