//! Applying directions: `G(s + alpha * delta)`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::{BackendBundle, ImageTensor};
use crate::error::{Error, Result};
use crate::style_space::{axpy, Direction, StyleVector};

/// Where the unedited style vector comes from.
#[derive(Debug, Clone)]
pub enum StyleSource {
    /// First latent of the seeded batch, mapped to style space.
    Seed(u64),
    Style(StyleVector),
    /// Inverted through the bundle's inverter.
    Image(ImageTensor),
}

#[derive(Debug, Clone)]
pub struct ManipulationRequest {
    pub source: StyleSource,
    pub alpha: f64,
    pub out_resolution: u32,
}

impl ManipulationRequest {
    pub fn validate(&self, bundle: &BackendBundle) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::InvalidInput(format!("alpha {} is not finite", self.alpha)));
        }
        bundle.layout().block_index(self.out_resolution)?;
        Ok(())
    }
}

/// Result of [`apply`]: the edited image and the style vector it started from.
#[derive(Debug, Clone)]
pub struct Manipulation {
    pub image: ImageTensor,
    pub source_style: StyleVector,
    /// Image sources only: whether the inversion came from the cache.
    pub cache_hit: bool,
}

fn check_direction(bundle: &BackendBundle, s: &StyleVector, d: &Direction) -> Result<()> {
    d.ensure_backend(bundle.fingerprint())?;
    bundle.layout().check_same(d.delta().layout())?;
    s.ensure_layout(bundle.layout())
}

/// `synthesize(s + alpha * delta, out_resolution)`.
pub fn manipulate(
    bundle: &BackendBundle,
    s: &StyleVector,
    d: &Direction,
    alpha: f64,
    out_resolution: u32,
) -> Result<ImageTensor> {
    check_direction(bundle, s, d)?;
    let edited = axpy(s, alpha, d.delta())?;
    bundle.generator.synthesize(&edited, out_resolution)
}

/// One image per alpha, in order.
pub fn sweep(
    bundle: &BackendBundle,
    s: &StyleVector,
    d: &Direction,
    alphas: &[f64],
    out_resolution: u32,
) -> Result<Vec<ImageTensor>> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one alpha".into()));
    }
    alphas
        .iter()
        .map(|&a| manipulate(bundle, s, d, a, out_resolution))
        .collect()
}

/// Inverts `img`, then edits the inversion. The alpha = 0 output is the
/// reconstruction, not `img`.
pub fn manipulate_real(
    bundle: &BackendBundle,
    img: &ImageTensor,
    d: &Direction,
    alpha: f64,
    out_resolution: u32,
    cache: Option<&InversionCache>,
) -> Result<Manipulation> {
    let inverter = bundle.inverter()?;
    d.ensure_backend(bundle.fingerprint())?;
    let (style, cache_hit) = match cache {
        Some(cache) => cache.get_or_invert(bundle.fingerprint(), img, |i| inverter.invert_image(i))?,
        None => (inverter.invert_image(img)?, false),
    };
    let image = manipulate(bundle, &style, d, alpha, out_resolution)?;
    Ok(Manipulation {
        image,
        source_style: style,
        cache_hit,
    })
}

/// Resolves the request's source and applies `d` to it.
pub fn apply(
    bundle: &BackendBundle,
    d: &Direction,
    request: &ManipulationRequest,
    cache: Option<&InversionCache>,
) -> Result<Manipulation> {
    request.validate(bundle)?;
    match &request.source {
        StyleSource::Image(img) => {
            manipulate_real(bundle, img, d, request.alpha, request.out_resolution, cache)
        }
        StyleSource::Seed(seed) => {
            let s = seed_style(bundle, *seed)?;
            let image = manipulate(bundle, &s, d, request.alpha, request.out_resolution)?;
            Ok(Manipulation {
                image,
                source_style: s,
                cache_hit: false,
            })
        }
        StyleSource::Style(s) => {
            let image = manipulate(bundle, s, d, request.alpha, request.out_resolution)?;
            Ok(Manipulation {
                image,
                source_style: s.clone(),
                cache_hit: false,
            })
        }
    }
}

/// The style vector a seed source denotes.
pub fn seed_style(bundle: &BackendBundle, seed: u64) -> Result<StyleVector> {
    Ok(bundle.sample_styles(1, seed)?.remove(0))
}

/// Hex sha256 over the image dimensions and its f64 samples.
pub fn image_content_hash(img: &ImageTensor) -> String {
    let mut h = Sha256::new();
    h.update(img.height().to_le_bytes());
    h.update(img.width().to_le_bytes());
    for v in img.data() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

/// In-memory inversions keyed by backend fingerprint and image content hash.
#[derive(Default)]
pub struct InversionCache {
    entries: Mutex<HashMap<(String, String), StyleVector>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl InversionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, fingerprint: &str, image_hash: &str) -> Option<StyleVector> {
        self.entries
            .lock()
            .expect("inversion cache poisoned")
            .get(&(fingerprint.to_string(), image_hash.to_string()))
            .cloned()
    }

    pub fn insert(&self, fingerprint: &str, image_hash: &str, style: StyleVector) {
        self.entries
            .lock()
            .expect("inversion cache poisoned")
            .insert((fingerprint.to_string(), image_hash.to_string()), style);
    }

    /// Returns the cached inversion or computes, stores and returns it.
    /// The flag is true on a hit.
    pub fn get_or_invert(
        &self,
        fingerprint: &str,
        img: &ImageTensor,
        invert: impl FnOnce(&ImageTensor) -> Result<StyleVector>,
    ) -> Result<(StyleVector, bool)> {
        let key = image_content_hash(img);
        if let Some(s) = self.get(fingerprint, &key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok((s, true));
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let s = invert(img)?;
        self.insert(fingerprint, &key, s.clone());
        Ok((s, false))
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.entries.lock().expect("inversion cache poisoned").len(),
        }
    }
}
