//! Contracts for the external models the pipeline depends on (generator,
//! joint text-image embedder, identity network, inverter), the
//! differentiability contract the optimizer relies on, and a deterministic
//! linear toy implementation of all four.
//!
//! Real pretrained adapters implement the same traits and are discovered
//! through a [`BackendManifest`]; their weights are not part of this crate.

mod gradient;
mod manifest;
pub mod resize;
pub mod toy;
mod types;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::style_space::{LayoutRef, StyleVector};

pub use gradient::{loss_gradient, LossFunctional, LossProblem, LossTerms};
pub use manifest::{resolve_backend, BackendManifest, MANIFEST_FORMAT_VERSION};
pub use types::{EmbeddingSpace, EmbeddingVector, ImageTensor, LatentCode, LatentSpace};

/// Default square input size of a joint embedder (CLIP ViT family).
pub const DEFAULT_EMBED_INPUT_SIZE: u32 = 224;

fn not_differentiable(what: &str) -> Error {
    Error::Capability(format!("{what} does not provide gradients"))
}

/// A style-based generator: prior, mapping network, affine style maps and a
/// synthesis network that can be truncated at any block resolution.
pub trait Generator: Send + Sync {
    fn fingerprint(&self) -> &str;

    fn layout(&self) -> &LayoutRef;

    fn latent_dim(&self) -> usize;

    /// Draws `n` codes from the prior. Code `i` depends only on `(seed, i)`.
    fn sample_latents(&self, n: usize, seed: u64) -> Result<Vec<LatentCode>>;

    fn map_to_style(&self, code: &LatentCode) -> Result<StyleVector>;

    /// Runs the synthesis blocks up to and including `max_resolution`.
    fn synthesize(&self, s: &StyleVector, max_resolution: u32) -> Result<ImageTensor>;

    /// Vector-Jacobian product of [`Generator::synthesize`] at `s`.
    fn synthesize_vjp(
        &self,
        _s: &StyleVector,
        _max_resolution: u32,
        _upstream: &ImageTensor,
    ) -> Result<StyleVector> {
        Err(not_differentiable("generator"))
    }

    fn differentiable(&self) -> bool {
        false
    }
}

/// Joint text-image embedding model.
pub trait JointEmbedder: Send + Sync {
    /// Square side length images are resized to before embedding.
    fn input_size(&self) -> u32 {
        DEFAULT_EMBED_INPUT_SIZE
    }

    fn embed_image(&self, img: &ImageTensor) -> Result<EmbeddingVector>;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector>;

    /// Gradient of `<upstream, embed_image(img)>` with respect to `img`.
    fn embed_image_vjp(&self, _img: &ImageTensor, _upstream: &[f64]) -> Result<ImageTensor> {
        Err(not_differentiable("embedder"))
    }

    fn differentiable(&self) -> bool {
        false
    }
}

/// Identity (face recognition style) embedding network.
pub trait IdentityNet: Send + Sync {
    fn identity_embed(&self, img: &ImageTensor) -> Result<EmbeddingVector>;

    fn identity_embed_vjp(&self, _img: &ImageTensor, _upstream: &[f64]) -> Result<ImageTensor> {
        Err(not_differentiable("identity network"))
    }

    fn differentiable(&self) -> bool {
        false
    }
}

/// Encoder from real images to style space.
pub trait Inverter: Send + Sync {
    fn invert_image(&self, img: &ImageTensor) -> Result<StyleVector>;
}

/// Whether a bundle may be used from several threads at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concurrency {
    Shared,
    SingleConsumer,
}

/// The set of models one search or edit runs against.
#[derive(Clone)]
pub struct BackendBundle {
    pub generator: Arc<dyn Generator>,
    pub embedder: Arc<dyn JointEmbedder>,
    pub identity: Arc<dyn IdentityNet>,
    pub inverter: Option<Arc<dyn Inverter>>,
    pub concurrency: Concurrency,
    name: String,
}

impl fmt::Debug for BackendBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendBundle")
            .field("name", &self.name)
            .field("fingerprint", &self.fingerprint())
            .field("inverter", &self.inverter.is_some())
            .field("concurrency", &self.concurrency)
            .finish()
    }
}

impl BackendBundle {
    pub fn new(
        name: impl Into<String>,
        generator: Arc<dyn Generator>,
        embedder: Arc<dyn JointEmbedder>,
        identity: Arc<dyn IdentityNet>,
        inverter: Option<Arc<dyn Inverter>>,
        concurrency: Concurrency,
    ) -> Self {
        BackendBundle {
            generator,
            embedder,
            identity,
            inverter,
            concurrency,
            name: name.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Directions are bound to the generator they were optimized for.
    pub fn fingerprint(&self) -> &str {
        self.generator.fingerprint()
    }

    pub fn layout(&self) -> &LayoutRef {
        self.generator.layout()
    }

    pub fn differentiable(&self) -> bool {
        self.generator.differentiable()
            && self.embedder.differentiable()
            && self.identity.differentiable()
    }

    pub fn require_differentiable(&self) -> Result<()> {
        if self.differentiable() {
            Ok(())
        } else {
            Err(Error::Capability(format!(
                "backend {} is not differentiable",
                self.name
            )))
        }
    }

    pub fn inverter(&self) -> Result<&Arc<dyn Inverter>> {
        self.inverter
            .as_ref()
            .ok_or_else(|| Error::Capability(format!("backend {} has no inverter", self.name)))
    }

    /// Samples `n` codes and maps them to style space.
    pub fn sample_styles(&self, n: usize, seed: u64) -> Result<Vec<StyleVector>> {
        self.generator
            .sample_latents(n, seed)?
            .iter()
            .map(|code| self.generator.map_to_style(code))
            .collect()
    }
}
