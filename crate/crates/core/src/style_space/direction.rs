use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::OptimizeConfig;

use super::mask::ChannelMask;
use super::vector::StyleVector;

pub const DIRECTION_FORMAT_VERSION: u32 = 1;

/// The text that produced a direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PromptSpec {
    /// One target prompt (multi-channel search).
    Single { text: String },
    /// Target/neutral pair (single-channel search).
    Contrastive { positive: String, negative: String },
}

impl PromptSpec {
    pub fn single(text: impl Into<String>) -> Self {
        PromptSpec::Single { text: text.into() }
    }

    pub fn contrastive(positive: impl Into<String>, negative: impl Into<String>) -> Self {
        PromptSpec::Contrastive {
            positive: positive.into(),
            negative: negative.into(),
        }
    }

    /// Primary prompt text, used for listing and filtering.
    pub fn text(&self) -> &str {
        match self {
            PromptSpec::Single { text } => text,
            PromptSpec::Contrastive { positive, .. } => positive,
        }
    }

    /// Case-insensitive substring match against either prompt.
    pub fn matches(&self, needle: &str) -> bool {
        let needle = needle.to_lowercase();
        let hit = |t: &str| t.to_lowercase().contains(&needle);
        match self {
            PromptSpec::Single { text } => hit(text),
            PromptSpec::Contrastive { positive, negative } => hit(positive) || hit(negative),
        }
    }
}

/// A global edit direction in style space plus everything needed to
/// reproduce and safely apply it.
///
/// The delta is kept at single precision (values are rounded on
/// construction) so that the on-disk payload round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    delta: StyleVector,
    mask: ChannelMask,
    pub prompt: PromptSpec,
    pub hyperparams: OptimizeConfig,
    pub backend_fingerprint: String,
    pub created_at: DateTime<Utc>,
    pub format_version: u32,
}

impl Direction {
    pub fn new(
        mut delta: StyleVector,
        mask: ChannelMask,
        prompt: PromptSpec,
        hyperparams: OptimizeConfig,
        backend_fingerprint: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> Result<Self> {
        delta.layout().check_same(mask.layout())?;
        if let Some(i) = delta
            .values()
            .iter()
            .zip(mask.include())
            .position(|(v, keep)| !keep && *v != 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "direction is nonzero at masked-out coordinate {i}"
            )));
        }
        hyperparams.validate_scalars()?;
        delta.round_to_f32();
        // Canonicalize -0.0 so masked coordinates are hard zeros bit-for-bit.
        for (v, keep) in delta.values_mut().iter_mut().zip(mask.include()) {
            if !keep {
                *v = 0.0;
            }
        }
        Ok(Direction {
            delta,
            mask,
            prompt,
            hyperparams,
            backend_fingerprint: backend_fingerprint.into(),
            created_at,
            format_version: DIRECTION_FORMAT_VERSION,
        })
    }

    pub fn delta(&self) -> &StyleVector {
        &self.delta
    }

    pub fn mask(&self) -> &ChannelMask {
        &self.mask
    }

    pub fn norm(&self) -> f64 {
        self.delta.norm()
    }

    pub fn active_channels(&self) -> usize {
        self.delta.count_nonzero()
    }

    pub fn ensure_backend(&self, backend_fingerprint: &str) -> Result<()> {
        if self.backend_fingerprint == backend_fingerprint {
            Ok(())
        } else {
            Err(Error::FingerprintMismatch {
                direction: self.backend_fingerprint.clone(),
                backend: backend_fingerprint.to_string(),
            })
        }
    }
}
