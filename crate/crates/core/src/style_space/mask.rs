use crate::error::{Error, Result};

use super::layout::{LayerKind, LayoutRef};

/// Per-channel inclusion flags over a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMask {
    layout: LayoutRef,
    include: Vec<bool>,
}

impl ChannelMask {
    pub fn from_include(layout: LayoutRef, include: Vec<bool>) -> Result<Self> {
        if include.len() != layout.total_channels() {
            return Err(Error::InvalidInput(format!(
                "mask has {} entries, layout needs {}",
                include.len(),
                layout.total_channels()
            )));
        }
        Ok(ChannelMask { layout, include })
    }

    pub fn all(layout: &LayoutRef) -> Self {
        ChannelMask {
            layout: layout.clone(),
            include: vec![true; layout.total_channels()],
        }
    }

    pub fn none(layout: &LayoutRef) -> Self {
        ChannelMask {
            layout: layout.clone(),
            include: vec![false; layout.total_channels()],
        }
    }

    pub fn layout(&self) -> &LayoutRef {
        &self.layout
    }

    pub fn include(&self) -> &[bool] {
        &self.include
    }

    pub fn is_included(&self, index: usize) -> bool {
        self.include.get(index).copied().unwrap_or(false)
    }

    pub fn count_included(&self) -> usize {
        self.include.iter().filter(|b| **b).count()
    }

    pub fn included_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.include
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
    }

    /// Drops every layer above `max_resolution`.
    pub fn restricted_to(&self, max_resolution: u32) -> ChannelMask {
        let mut include = self.include.clone();
        for layer in self.layout.layers() {
            if layer.resolution > max_resolution {
                include[layer.range()].fill(false);
            }
        }
        ChannelMask {
            layout: self.layout.clone(),
            include,
        }
    }

    /// Packs the flags LSB-first into bytes.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.include.len().div_ceil(8)];
        for (i, _) in self.include.iter().enumerate().filter(|(_, b)| **b) {
            bytes[i / 8] |= 1 << (i % 8);
        }
        bytes
    }

    pub fn from_packed(layout: LayoutRef, bytes: &[u8]) -> Result<Self> {
        let n = layout.total_channels();
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::Integrity(format!(
                "packed mask has {} bytes, expected {}",
                bytes.len(),
                n.div_ceil(8)
            )));
        }
        let include = (0..n).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect();
        Ok(ChannelMask { layout, include })
    }
}

/// Builds the optimization mask: optionally drops tRGB layers and every
/// layer of the `exclude_top_blocks` highest-resolution blocks.
pub fn default_mask(
    layout: &LayoutRef,
    exclude_trgb: bool,
    exclude_top_blocks: usize,
) -> Result<ChannelMask> {
    let n_blocks = layout.blocks().len();
    if exclude_top_blocks >= n_blocks {
        return Err(Error::InvalidConfig(format!(
            "cannot exclude {exclude_top_blocks} top blocks of a {n_blocks}-block layout"
        )));
    }
    let first_excluded = n_blocks - exclude_top_blocks;
    let mut include = vec![true; layout.total_channels()];
    for layer in layout.layers() {
        let drop = layer.block >= first_excluded || (exclude_trgb && layer.kind == LayerKind::ToRgb);
        if drop {
            include[layer.range()].fill(false);
        }
    }
    Ok(ChannelMask {
        layout: layout.clone(),
        include,
    })
}
