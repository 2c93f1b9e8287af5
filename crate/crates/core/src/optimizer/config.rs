use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::style_space::{default_mask, ChannelMask, LayoutRef};

/// Which search a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    MultiChannel,
    SingleChannel,
}

pub const DEFAULT_LAMBDA_C: f64 = 1.0;
pub const DEFAULT_LAMBDA_ID: f64 = 0.5;
pub const MAX_LAMBDA_ID: f64 = 10.0;
pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_OPT_RESOLUTION: u32 = 256;
pub const DEFAULT_ITERATIONS: usize = 30;
pub const DEFAULT_STEP_SIZE: f64 = 0.01;
pub const DEFAULT_EXCLUDE_TOP_BLOCKS: usize = 4;

/// Hyperparameters of a direction search. Every field has a default, so a
/// partial JSON object deserializes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub lambda_c: f64,
    pub lambda_id: f64,
    pub batch_size: usize,
    pub opt_resolution: u32,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    pub exclude_trgb: bool,
    pub exclude_top_blocks: usize,
    pub mode: SearchMode,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Single-channel mode only: align with the unit-normalized prompt
    /// difference instead of the raw difference.
    pub normalized_difference: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            lambda_c: DEFAULT_LAMBDA_C,
            lambda_id: DEFAULT_LAMBDA_ID,
            batch_size: DEFAULT_BATCH_SIZE,
            opt_resolution: DEFAULT_OPT_RESOLUTION,
            iterations: DEFAULT_ITERATIONS,
            step_size: DEFAULT_STEP_SIZE,
            seed: 0,
            exclude_trgb: true,
            exclude_top_blocks: DEFAULT_EXCLUDE_TOP_BLOCKS,
            mode: SearchMode::MultiChannel,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            normalized_difference: false,
        }
    }
}

impl OptimizeConfig {
    /// Defaults adapted to a layout that lacks the reference resolutions.
    ///
    /// When 256 is not a layout resolution the search truncates two blocks
    /// below the top, and at most `blocks - 1` top blocks are excluded.
    pub fn for_layout(layout: &LayoutRef) -> Self {
        let mut config = OptimizeConfig::default();
        config.adapt_to(layout);
        config
    }

    /// Applies the [`OptimizeConfig::for_layout`] adjustments in place to the
    /// resolution and exclusion fields only, and only where they would
    /// otherwise be invalid.
    pub fn adapt_to(&mut self, layout: &LayoutRef) {
        let resolutions: Vec<u32> = layout.resolutions().collect();
        if !layout.has_resolution(self.opt_resolution) {
            let idx = resolutions.len().saturating_sub(3);
            self.opt_resolution = resolutions[idx];
        }
        let n_blocks = layout.blocks().len();
        if self.exclude_top_blocks >= n_blocks {
            self.exclude_top_blocks = n_blocks - 1;
        }
    }

    /// Checks the layout-independent invariants.
    pub fn validate_scalars(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda_c.is_finite() && self.lambda_c > 0.0) {
            return bad(format!("lambda_c must be > 0, got {}", self.lambda_c));
        }
        if !(self.lambda_id.is_finite() && (0.0..=MAX_LAMBDA_ID).contains(&self.lambda_id)) {
            return bad(format!(
                "lambda_id must lie in [0, {MAX_LAMBDA_ID}], got {}",
                self.lambda_id
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        // Zero is accepted so a search can be run as a pure evaluation.
        if !(self.step_size.is_finite() && self.step_size >= 0.0) {
            return bad(format!("step_size must be >= 0, got {}", self.step_size));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be > 0".into());
        }
        Ok(())
    }

    /// Checks every invariant, including those that depend on the layout.
    pub fn validate(&self, layout: &LayoutRef) -> Result<()> {
        self.validate_scalars()?;
        if !layout.has_resolution(self.opt_resolution) {
            return Err(Error::InvalidConfig(format!(
                "opt_resolution {} is not one of the layout resolutions {:?}",
                self.opt_resolution,
                layout.resolutions().collect::<Vec<_>>()
            )));
        }
        self.mask_policy(layout).map(|_| ())
    }

    /// The exclusion mask alone, before truncation.
    pub fn mask_policy(&self, layout: &LayoutRef) -> Result<ChannelMask> {
        default_mask(layout, self.exclude_trgb, self.exclude_top_blocks)
    }

    /// The coordinates a search may move: the exclusion mask restricted to
    /// blocks the truncated synthesis actually visits.
    pub fn search_mask(&self, layout: &LayoutRef) -> Result<ChannelMask> {
        self.validate(layout)?;
        Ok(self.mask_policy(layout)?.restricted_to(self.opt_resolution))
    }

    /// Parses a full or partial config; missing fields take the defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// `self` with the fields present in `overrides` (a JSON object)
    /// replaced. Unknown fields are rejected. The result is not validated.
    pub fn overlay(&self, overrides: &serde_json::Value) -> Result<Self> {
        let serde_json::Value::Object(fields) = overrides else {
            return Err(Error::InvalidConfig("config overrides must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(self).expect("config serializes");
        let target = merged.as_object_mut().expect("config is an object");
        for (k, v) in fields {
            target.insert(k.clone(), v.clone());
        }
        serde_json::from_value(merged).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
