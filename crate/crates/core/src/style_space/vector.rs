use std::fmt;

use crate::error::{Error, Result};

use super::layout::{LayoutRef, StyleLayout};
use super::mask::ChannelMask;

/// One point in style space, stored flat in layout order.
#[derive(Clone, PartialEq)]
pub struct StyleVector {
    layout: LayoutRef,
    values: Vec<f64>,
}

impl fmt::Debug for StyleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StyleVector")
            .field("layout", &self.layout.fingerprint())
            .field("len", &self.values.len())
            .finish()
    }
}

impl StyleVector {
    pub fn from_values(layout: LayoutRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_channels() {
            return Err(Error::InvalidInput(format!(
                "style vector has {} values, layout {} needs {}",
                values.len(),
                layout.fingerprint(),
                layout.total_channels()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "style vector value at {i} is not finite"
            )));
        }
        Ok(StyleVector { layout, values })
    }

    /// Builds a vector from per-layer arrays.
    pub fn from_layers(layout: LayoutRef, layers: &[Vec<f64>]) -> Result<Self> {
        if layers.len() != layout.layers().len() {
            return Err(Error::InvalidInput(format!(
                "expected {} layers, got {}",
                layout.layers().len(),
                layers.len()
            )));
        }
        let mut values = Vec::with_capacity(layout.total_channels());
        for (info, layer) in layout.layers().iter().zip(layers) {
            if layer.len() != info.channels {
                return Err(Error::InvalidInput(format!(
                    "layer at offset {} has {} values, expected {}",
                    info.offset,
                    layer.len(),
                    info.channels
                )));
            }
            values.extend_from_slice(layer);
        }
        StyleVector::from_values(layout, values)
    }

    pub fn zeros_like(layout: &LayoutRef) -> Self {
        StyleVector {
            layout: layout.clone(),
            values: vec![0.0; layout.total_channels()],
        }
    }

    pub fn layout(&self) -> &LayoutRef {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layer(&self, index: usize) -> &[f64] {
        &self.values[self.layout.layers()[index].range()]
    }

    /// Values may only be changed through this crate so that finiteness holds.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn ensure_layout(&self, layout: &StyleLayout) -> Result<()> {
        layout.check_same(&self.layout)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &StyleVector) -> Result<f64> {
        self.layout.check_same(&other.layout)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// Cosine similarity; zero if either vector is zero.
    pub fn cosine(&self, other: &StyleVector) -> Result<f64> {
        let dot = self.dot(other)?;
        let denom = self.norm() * other.norm();
        Ok(if denom > 0.0 { dot / denom } else { 0.0 })
    }

    pub fn scaled(&self, factor: f64) -> Result<StyleVector> {
        StyleVector::from_values(
            self.layout.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn count_nonzero(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Rounds every value to the nearest single-precision float.
    pub(crate) fn round_to_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }
}

/// `s + alpha * d`, elementwise.
pub fn axpy(s: &StyleVector, alpha: f64, d: &StyleVector) -> Result<StyleVector> {
    s.layout.check_same(&d.layout)?;
    if !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("strength {alpha} is not finite")));
    }
    let values = s
        .values
        .iter()
        .zip(&d.values)
        .map(|(a, b)| a + alpha * b)
        .collect();
    StyleVector::from_values(s.layout.clone(), values)
}

/// All-zero vector over `layout`.
pub fn zeros_like(layout: &LayoutRef) -> StyleVector {
    StyleVector::zeros_like(layout)
}

/// Zeroes every coordinate the mask excludes.
pub fn project_mask(d: &StyleVector, mask: &ChannelMask) -> Result<StyleVector> {
    d.layout.check_same(mask.layout())?;
    let values = d
        .values
        .iter()
        .zip(mask.include())
        .map(|(v, keep)| if *keep { *v } else { 0.0 })
        .collect();
    Ok(StyleVector {
        layout: d.layout.clone(),
        values,
    })
}
