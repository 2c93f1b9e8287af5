//! Block/layer structure of a generator's style space.
//!
//! A layout is built from a [`LayoutConfig`] (usually one of the shipped
//! presets) and is immutable afterwards. Style vectors, masks and directions
//! all hold an `Arc` to the layout they were built against.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const LAYOUT_FORMAT_VERSION: u32 = 1;

/// Reference 1024px face generator (26 style layers, 9088 channels).
pub const PRESET_FFHQ_1024: &str = "stylegan2-ffhq-1024";
/// Six-block desk-scale layout used by the toy backend.
pub const PRESET_TOY_128: &str = "toy-128";

const PRESETS: &[(&str, &str)] = &[
    (
        PRESET_FFHQ_1024,
        include_str!("../../presets/stylegan2-ffhq-1024.json"),
    ),
    (PRESET_TOY_128, include_str!("../../presets/toy-128.json")),
];

pub type LayoutRef = Arc<StyleLayout>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv1,
    #[serde(alias = "conv")]
    Conv2,
    #[serde(rename = "trgb", alias = "torgb")]
    ToRgb,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Conv1 => "conv1",
            LayerKind::Conv2 => "conv2",
            LayerKind::ToRgb => "trgb",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub kind: LayerKind,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub resolution: u32,
    pub layers: Vec<LayerConfig>,
}

/// On-disk description of a generator's style space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutConfig {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub model: String,
    pub blocks: Vec<BlockConfig>,
}

fn default_format_version() -> u32 {
    LAYOUT_FORMAT_VERSION
}

impl LayoutConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: LayoutConfig = serde_json::from_str(text)?;
        if config.format_version != LAYOUT_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: config.format_version,
                supported: LAYOUT_FORMAT_VERSION,
            });
        }
        Ok(config)
    }

    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| LayoutConfig::from_json(text))
            .unwrap_or_else(|| Err(Error::NotFound(format!("layout preset {name:?}"))))
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub index: usize,
    pub resolution: u32,
    pub layers: Vec<LayerConfig>,
}

/// Flattened view of one style layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerInfo {
    pub block: usize,
    pub resolution: u32,
    pub kind: LayerKind,
    pub channels: usize,
    /// Offset of the layer's first channel in the flat style vector.
    pub offset: usize,
}

impl LayerInfo {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.channels
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct StyleLayout {
    model: String,
    blocks: Vec<BlockSpec>,
    layers: Vec<LayerInfo>,
    total_channels: usize,
    fingerprint: String,
    config: LayoutConfig,
}

impl StyleLayout {
    /// Validates `config` and computes offsets and the fingerprint.
    pub fn build(config: &LayoutConfig) -> Result<LayoutRef> {
        if config.model.trim().is_empty() {
            return Err(Error::InvalidLayout("model name is empty".into()));
        }
        if config.blocks.is_empty() {
            return Err(Error::InvalidLayout("layout has no blocks".into()));
        }

        let mut blocks = Vec::with_capacity(config.blocks.len());
        let mut layers = Vec::new();
        let mut offset = 0usize;
        let mut prev_res = 0u32;
        for (index, block) in config.blocks.iter().enumerate() {
            let res = block.resolution;
            if res < 4 || !res.is_power_of_two() {
                return Err(Error::InvalidLayout(format!(
                    "block {index}: resolution {res} is not a power of two >= 4"
                )));
            }
            if res <= prev_res {
                return Err(Error::InvalidLayout(format!(
                    "block {index}: resolution {res} does not increase over {prev_res}"
                )));
            }
            prev_res = res;
            validate_block_layers(index, &block.layers)?;
            for layer in &block.layers {
                layers.push(LayerInfo {
                    block: index,
                    resolution: res,
                    kind: layer.kind,
                    channels: layer.channels,
                    offset,
                });
                offset += layer.channels;
            }
            blocks.push(BlockSpec {
                index,
                resolution: res,
                layers: block.layers.clone(),
            });
        }

        let canonical = serde_json::to_vec(&(&config.model, &config.blocks))?;
        let digest = Sha256::digest(&canonical);
        let fingerprint = format!("{}-{}", config.model, &hex::encode(digest)[..16]);

        Ok(Arc::new(StyleLayout {
            model: config.model.clone(),
            blocks,
            layers,
            total_channels: offset,
            fingerprint,
            config: config.clone(),
        }))
    }

    pub fn preset(name: &str) -> Result<LayoutRef> {
        StyleLayout::build(&LayoutConfig::preset(name)?)
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn layers(&self) -> &[LayerInfo] {
        &self.layers
    }

    pub fn total_channels(&self) -> usize {
        self.total_channels
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn config(&self) -> &LayoutConfig {
        &self.config
    }

    pub fn resolutions(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks.iter().map(|b| b.resolution)
    }

    pub fn max_resolution(&self) -> u32 {
        self.blocks.last().map(|b| b.resolution).unwrap_or(0)
    }

    pub fn has_resolution(&self, res: u32) -> bool {
        self.blocks.iter().any(|b| b.resolution == res)
    }

    /// Index of the block running at `res`.
    pub fn block_index(&self, res: u32) -> Result<usize> {
        self.blocks
            .iter()
            .position(|b| b.resolution == res)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "resolution {res} is not a block resolution of {}",
                    self.fingerprint
                ))
            })
    }

    /// Number of style channels in blocks at or below `res`.
    pub fn channels_up_to(&self, res: u32) -> usize {
        self.layers
            .iter()
            .filter(|l| l.resolution <= res)
            .map(|l| l.channels)
            .sum()
    }

    /// Locates the layer that owns flat coordinate `index`.
    pub fn locate(&self, index: usize) -> Option<(usize, &LayerInfo)> {
        if index >= self.total_channels {
            return None;
        }
        let pos = self.layers.partition_point(|l| l.offset + l.channels <= index);
        self.layers.get(pos).map(|l| (pos, l))
    }

    pub fn same_as(&self, other: &StyleLayout) -> bool {
        std::ptr::eq(self, other) || self.fingerprint == other.fingerprint
    }

    pub(crate) fn check_same(&self, other: &StyleLayout) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::LayoutMismatch {
                expected: self.fingerprint.clone(),
                found: other.fingerprint.clone(),
            })
        }
    }
}

/// Shorthand for [`StyleLayout::build`].
pub fn build_layout(config: &LayoutConfig) -> Result<LayoutRef> {
    StyleLayout::build(config)
}

fn validate_block_layers(index: usize, layers: &[LayerConfig]) -> Result<()> {
    let count = |kind| layers.iter().filter(|l| l.kind == kind).count();
    let (conv1, conv2, trgb) = (
        count(LayerKind::Conv1),
        count(LayerKind::Conv2),
        count(LayerKind::ToRgb),
    );
    if trgb != 1 {
        return Err(Error::InvalidLayout(format!(
            "block {index}: expected exactly one trgb layer, found {trgb}"
        )));
    }
    if conv2 != 1 || conv1 > 1 {
        return Err(Error::InvalidLayout(format!(
            "block {index}: expected one conv2 and at most one conv1 layer"
        )));
    }
    if index > 0 && conv1 != 1 {
        return Err(Error::InvalidLayout(format!(
            "block {index}: only the first block may omit conv1"
        )));
    }
    let order = |k: LayerKind| match k {
        LayerKind::Conv1 => 0,
        LayerKind::Conv2 => 1,
        LayerKind::ToRgb => 2,
    };
    if layers.windows(2).any(|w| order(w[0].kind) >= order(w[1].kind)) {
        return Err(Error::InvalidLayout(format!(
            "block {index}: layers must be ordered conv1, conv2, trgb"
        )));
    }
    if let Some(l) = layers.iter().find(|l| l.channels == 0) {
        return Err(Error::InvalidLayout(format!(
            "block {index}: {} layer has zero channels",
            l.kind
        )));
    }
    Ok(())
}
