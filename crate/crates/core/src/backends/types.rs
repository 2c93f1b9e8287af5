use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-norm contract of embeddings.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatentSpace {
    Z,
    W,
    #[serde(rename = "W+")]
    WPlus,
}

/// A latent code. `Z` and `W` codes carry one vector; `W+` carries one
/// vector per style layer of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub space: LatentSpace,
    pub values: Vec<Vec<f64>>,
}

impl LatentCode {
    pub fn new(space: LatentSpace, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("latent code has no vectors".into()));
        }
        if space != LatentSpace::WPlus && values.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "{space:?} code must hold exactly one vector, got {}",
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("latent code is not finite".into()));
        }
        Ok(LatentCode { space, values })
    }

    pub fn z(values: Vec<f64>) -> Result<Self> {
        LatentCode::new(LatentSpace::Z, vec![values])
    }

    pub fn w(values: Vec<f64>) -> Result<Self> {
        LatentCode::new(LatentSpace::W, vec![values])
    }

    pub fn w_plus(values: Vec<Vec<f64>>) -> Result<Self> {
        LatentCode::new(LatentSpace::WPlus, values)
    }
}

/// Row-major `height x width x 3` float image. The nominal value range is
/// [-1, 1]; values outside it are kept internally and clamped when encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: u32,
    width: u32,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: u32, width: u32, data: Vec<f64>) -> Result<Self> {
        let expected = height as usize * width as usize * 3;
        if height == 0 || width == 0 || data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "image {height}x{width} needs {expected} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("image contains non-finite values".into()));
        }
        Ok(ImageTensor {
            height,
            width,
            data,
        })
    }

    /// Skips the finiteness scan; for crate-internal producers only.
    pub(crate) fn from_raw(height: u32, width: u32, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height as usize * width as usize * 3);
        ImageTensor {
            height,
            width,
            data,
        }
    }

    pub fn zeros(height: u32, width: u32) -> Self {
        ImageTensor::from_raw(height, width, vec![0.0; height as usize * width as usize * 3])
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, y: u32, x: u32) -> [f64; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("image contains non-finite values".into()))
        }
    }

    pub fn max_abs_diff(&self, other: &ImageTensor) -> Option<f64> {
        if self.height != other.height || self.width != other.width {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &ImageTensor) -> bool {
        self.height == other.height
            && self.width == other.width
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSpace {
    Joint,
    Identity,
}

/// A unit-norm embedding tagged with the space it lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    space: EmbeddingSpace,
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalizes `raw` to unit length.
    pub fn normalized(space: EmbeddingSpace, raw: Vec<f64>) -> Result<Self> {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidInput(format!(
                "cannot normalize embedding with norm {norm}"
            )));
        }
        Ok(EmbeddingVector {
            space,
            values: raw.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Wraps values that are already unit norm.
    pub fn from_unit(space: EmbeddingSpace, values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "embedding norm {norm} is not 1"
            )));
        }
        Ok(EmbeddingVector { space, values })
    }

    pub fn space(&self) -> EmbeddingSpace {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn ensure_space(&self, other: &EmbeddingVector) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!(
                "{:?} vs {:?}",
                self.space, other.space
            )));
        }
        if self.values.len() != other.values.len() {
            return Err(Error::SpaceMismatch(format!(
                "dimension {} vs {}",
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(())
    }

    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64> {
        self.ensure_space(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// Cosine similarity; both sides are unit norm so this is the dot product.
    pub fn cosine(&self, other: &EmbeddingVector) -> Result<f64> {
        self.dot(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_code_shape_rules() {
        assert!(LatentCode::z(vec![0.0; 4]).is_ok());
        assert!(LatentCode::new(LatentSpace::W, vec![vec![0.0]; 2]).is_err());
        assert!(LatentCode::w_plus(vec![vec![0.0; 4]; 3]).is_ok());
        assert!(LatentCode::z(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn image_rejects_bad_shapes() {
        assert!(ImageTensor::new(2, 2, vec![0.0; 12]).is_ok());
        assert!(ImageTensor::new(2, 2, vec![0.0; 11]).is_err());
        assert!(ImageTensor::new(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn embeddings_are_unit_norm_and_space_checked() {
        let a = EmbeddingVector::normalized(EmbeddingSpace::Joint, vec![3.0, 4.0]).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!((a.cosine(&a).unwrap() - 1.0).abs() < 1e-12);
        let b = EmbeddingVector::normalized(EmbeddingSpace::Identity, vec![3.0, 4.0]).unwrap();
        assert!(matches!(a.cosine(&b), Err(Error::SpaceMismatch(_))));
        assert!(EmbeddingVector::normalized(EmbeddingSpace::Joint, vec![0.0, 0.0]).is_err());
        assert!(EmbeddingVector::from_unit(EmbeddingSpace::Joint, vec![0.5, 0.5]).is_err());
    }
}
