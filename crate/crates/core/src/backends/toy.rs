//! Deterministic linear toy backend.
//!
//! The generator mirrors the block structure of a style-based generator:
//! every style channel owns a fixed separable RGB pattern at its block's
//! resolution, each block adds `sum_c s_c * pattern_c` on top of the
//! nearest-upsampled output of the previous block (skip style), and
//! synthesis stops at the requested block. The image is therefore linear in
//! `s`, which gives closed-form gradients, an exact least-squares inverter,
//! and truncation that never reads a higher block.
//!
//! Both embedders are `normalize(M * flatten(resize(img)))` with fixed
//! random matrices; the text side is a fixed vocabulary of unit vectors.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::style_space::{LayoutConfig, LayoutRef, StyleLayout, StyleVector, PRESET_TOY_128};

use super::resize::{resize_to_square, upsample_nearest, upsample_nearest_adjoint, BilinearResize};
use super::{
    BackendBundle, Concurrency, EmbeddingSpace, EmbeddingVector, Generator, IdentityNet,
    ImageTensor, Inverter, JointEmbedder, LatentCode, LatentSpace,
};

pub const TOY_PARAMS_VERSION: u32 = 1;

/// Seed of the toy parameters behind the built-in `toy` backend.
pub const DEFAULT_TOY_SEED: u64 = 0;

/// Prompts the toy embedder understands.
pub const TOY_VOCABULARY: &[&str] = &[
    "beard",
    "smile",
    "happy",
    "sad",
    "frowning",
    "excited",
    "relieved",
    "tanned",
    "makeup",
    "lipstick",
    "eyeglasses",
    "old",
    "young",
    "blonde",
    "blonde hair",
    "curly hair",
    "long hair",
    "mohawk",
    "a man with mohawk hairstyle",
    "a man with hair",
    "a face",
];

/// `s_layer = weight * w + bias`, `weight` row-major `channels x latent_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Separable pattern `color * cos(pi fx (x+.5)/r + px) * cos(pi fy (y+.5)/r + py)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPattern {
    pub color: [f64; 3],
    pub freq_x: f64,
    pub freq_y: f64,
    pub phase_x: f64,
    pub phase_y: f64,
}

/// Row-major `dim x (input_size^2 * 3)` projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    pub input_size: u32,
    pub dim: usize,
    pub matrix: Vec<f64>,
}

impl ProjectionParams {
    fn input_len(&self) -> usize {
        self.input_size as usize * self.input_size as usize * 3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub prompt: String,
    pub embedding: Vec<f64>,
}

/// Every number the toy backend uses. Serialized as the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub format_version: u32,
    pub seed: u64,
    pub layout: LayoutConfig,
    pub latent_dim: usize,
    /// One map per style layer, in layout order.
    pub affine: Vec<AffineMap>,
    /// One pattern per channel, grouped by style layer.
    pub patterns: Vec<Vec<ChannelPattern>>,
    pub joint: ProjectionParams,
    pub vocabulary: Vec<VocabEntry>,
    pub identity: ProjectionParams,
}

/// Shape and scale knobs for [`ToyParams::generate`].
#[derive(Debug, Clone)]
pub struct ToySpec {
    pub layout: LayoutConfig,
    pub latent_dim: usize,
    pub joint_dim: usize,
    pub identity_dim: usize,
    /// Native input side of both toy embedders.
    pub embed_input_size: u32,
    /// Per-channel pattern amplitude.
    pub amplitude: f64,
    /// Typical magnitude of a sampled style coordinate.
    pub style_scale: f64,
    pub vocabulary: Vec<String>,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            layout: LayoutConfig::preset(PRESET_TOY_128).expect("toy preset parses"),
            latent_dim: 8,
            joint_dim: 128,
            identity_dim: 64,
            embed_input_size: 16,
            amplitude: 0.1,
            style_scale: 0.1,
            vocabulary: TOY_VOCABULARY.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Canonical prompt key: trimmed, lowercase, single spaces.
pub fn normalize_prompt(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl ToyParams {
    pub fn generate(spec: &ToySpec, seed: u64) -> Result<Self> {
        let layout = StyleLayout::build(&spec.layout)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent_scale = spec.style_scale / (spec.latent_dim as f64).sqrt();

        let affine = layout
            .layers()
            .iter()
            .map(|layer| AffineMap {
                weight: (0..layer.channels * spec.latent_dim)
                    .map(|_| normal(&mut rng) * latent_scale)
                    .collect(),
                bias: (0..layer.channels)
                    .map(|_| 0.1 * spec.style_scale * normal(&mut rng))
                    .collect(),
            })
            .collect();

        let patterns = layout
            .layers()
            .iter()
            .map(|layer| {
                let r = layer.resolution;
                let (lo, hi) = (r / 8, r / 2);
                (0..layer.channels)
                    .map(|_| {
                        let color = unit_vector(&mut rng, 3);
                        let gain = spec.amplitude * rng.random_range(0.5..1.5);
                        ChannelPattern {
                            color: [color[0] * gain, color[1] * gain, color[2] * gain],
                            freq_x: rng.random_range(lo..=hi) as f64,
                            freq_y: rng.random_range(lo..=hi) as f64,
                            phase_x: rng.random_range(0.0..2.0 * PI),
                            phase_y: rng.random_range(0.0..2.0 * PI),
                        }
                    })
                    .collect()
            })
            .collect();

        let mut projection = |dim: usize| {
            let input_len = spec.embed_input_size as usize * spec.embed_input_size as usize * 3;
            let scale = 1.0 / (input_len as f64).sqrt();
            ProjectionParams {
                input_size: spec.embed_input_size,
                dim,
                matrix: (0..dim * input_len)
                    .map(|_| normal(&mut rng) * scale)
                    .collect(),
            }
        };
        let joint = projection(spec.joint_dim);
        let identity = projection(spec.identity_dim);

        let vocabulary = spec
            .vocabulary
            .iter()
            .map(|prompt| VocabEntry {
                prompt: normalize_prompt(prompt),
                embedding: unit_vector(&mut rng, spec.joint_dim),
            })
            .collect();

        let params = ToyParams {
            format_version: TOY_PARAMS_VERSION,
            seed,
            layout: spec.layout.clone(),
            latent_dim: spec.latent_dim,
            affine,
            patterns,
            joint,
            vocabulary,
            identity,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != TOY_PARAMS_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.format_version,
                supported: TOY_PARAMS_VERSION,
            });
        }
        let layout = StyleLayout::build(&self.layout)?;
        let bad = |what: &str| Err(Error::InvalidInput(format!("toy params: {what}")));
        if self.latent_dim == 0 {
            return bad("latent_dim is zero");
        }
        if self.affine.len() != layout.layers().len() || self.patterns.len() != layout.layers().len()
        {
            return bad("per-layer tables do not match the layout");
        }
        for (layer, (map, pats)) in layout.layers().iter().zip(self.affine.iter().zip(&self.patterns)) {
            if map.weight.len() != layer.channels * self.latent_dim
                || map.bias.len() != layer.channels
                || pats.len() != layer.channels
            {
                return bad("layer table has the wrong size");
            }
        }
        for proj in [&self.joint, &self.identity] {
            if proj.dim == 0 || proj.input_size == 0 || proj.matrix.len() != proj.dim * proj.input_len() {
                return bad("projection has the wrong size");
            }
        }
        for entry in &self.vocabulary {
            if entry.embedding.len() != self.joint.dim {
                return bad("vocabulary entry has the wrong dimension");
            }
            let n = entry.embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return bad("vocabulary entry is not unit norm");
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("toy params serialize");
        format!("toy-{}", &hex::encode(Sha256::digest(&bytes))[..16])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: ToyParams = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ToyParams::from_json(&text)
    }
}

/// Pattern evaluated on its block grid, amplitude folded into `color`.
#[derive(Debug, Clone)]
struct Profile {
    ux: Vec<f64>,
    vy: Vec<f64>,
    color: [f64; 3],
}

impl Profile {
    fn new(p: &ChannelPattern, res: u32) -> Self {
        let wave = |freq: f64, phase: f64| {
            (0..res)
                .map(|i| (PI * freq * (i as f64 + 0.5) / res as f64 + phase).cos())
                .collect()
        };
        Profile {
            ux: wave(p.freq_x, p.phase_x),
            vy: wave(p.freq_y, p.phase_y),
            color: p.color,
        }
    }

    fn accumulate(&self, weight: f64, out: &mut [f64], res: usize) {
        if weight == 0.0 {
            return;
        }
        for (y, vy) in self.vy.iter().enumerate() {
            let a = weight * vy;
            let row = &mut out[y * res * 3..(y + 1) * res * 3];
            for (x, ux) in self.ux.iter().enumerate() {
                let b = a * ux;
                row[x * 3] += b * self.color[0];
                row[x * 3 + 1] += b * self.color[1];
                row[x * 3 + 2] += b * self.color[2];
            }
        }
    }

    fn correlate(&self, grad: &[f64], res: usize) -> f64 {
        let mut total = 0.0;
        for (y, vy) in self.vy.iter().enumerate() {
            let row = &grad[y * res * 3..(y + 1) * res * 3];
            let mut acc = 0.0;
            for (x, ux) in self.ux.iter().enumerate() {
                acc += ux
                    * (row[x * 3] * self.color[0]
                        + row[x * 3 + 1] * self.color[1]
                        + row[x * 3 + 2] * self.color[2]);
            }
            total += vy * acc;
        }
        total
    }
}

pub struct ToyGenerator {
    params: Arc<ToyParams>,
    layout: LayoutRef,
    fingerprint: String,
    /// Per style layer, per channel.
    profiles: Vec<Vec<Profile>>,
    layer_visits: AtomicU64,
}

impl ToyGenerator {
    pub fn new(params: Arc<ToyParams>) -> Result<Self> {
        params.validate()?;
        let layout = StyleLayout::build(&params.layout)?;
        let profiles = layout
            .layers()
            .iter()
            .zip(&params.patterns)
            .map(|(layer, pats)| pats.iter().map(|p| Profile::new(p, layer.resolution)).collect())
            .collect();
        Ok(ToyGenerator {
            fingerprint: params.fingerprint(),
            params,
            layout,
            profiles,
            layer_visits: AtomicU64::new(0),
        })
    }

    pub fn params(&self) -> &ToyParams {
        &self.params
    }

    /// Total style layers evaluated by `synthesize` since construction.
    pub fn layer_visits(&self) -> u64 {
        self.layer_visits.load(Ordering::Relaxed)
    }

    fn check_resolution(&self, max_resolution: u32) -> Result<usize> {
        self.layout.block_index(max_resolution)
    }
}

impl Generator for ToyGenerator {
    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn layout(&self) -> &LayoutRef {
        &self.layout
    }

    fn latent_dim(&self) -> usize {
        self.params.latent_dim
    }

    fn sample_latents(&self, n: usize, seed: u64) -> Result<Vec<LatentCode>> {
        if n == 0 {
            return Err(Error::InvalidInput("cannot sample zero latents".into()));
        }
        let dim = self.params.latent_dim;
        (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                LatentCode::z((0..dim).map(|_| normal(&mut rng)).collect())
            })
            .collect()
    }

    fn map_to_style(&self, code: &LatentCode) -> Result<StyleVector> {
        let dim = self.params.latent_dim;
        let n_layers = self.layout.layers().len();
        if code.values.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidInput(format!(
                "latent vectors must have dimension {dim}"
            )));
        }
        // The toy mapping network is the identity, so Z and W coincide.
        let per_layer: Vec<&Vec<f64>> = match code.space {
            LatentSpace::Z | LatentSpace::W => vec![&code.values[0]; n_layers],
            LatentSpace::WPlus => {
                if code.values.len() != n_layers {
                    return Err(Error::InvalidInput(format!(
                        "W+ code has {} vectors, generator has {n_layers} style layers",
                        code.values.len()
                    )));
                }
                code.values.iter().collect()
            }
        };
        let mut values = Vec::with_capacity(self.layout.total_channels());
        for ((layer, map), w) in self.layout.layers().iter().zip(&self.params.affine).zip(per_layer) {
            for c in 0..layer.channels {
                let row = &map.weight[c * dim..(c + 1) * dim];
                values.push(map.bias[c] + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        StyleVector::from_values(self.layout.clone(), values)
    }

    fn synthesize(&self, s: &StyleVector, max_resolution: u32) -> Result<ImageTensor> {
        s.ensure_layout(&self.layout)?;
        let top = self.check_resolution(max_resolution)?;
        let mut image: Option<ImageTensor> = None;
        for block in &self.layout.blocks()[..=top] {
            let res = block.resolution;
            let mut current = match image.take() {
                Some(prev) => upsample_nearest(&prev, res),
                None => ImageTensor::zeros(res, res),
            };
            let out = current.data_mut();
            for (li, layer) in self.layout.layers().iter().enumerate() {
                if layer.block != block.index {
                    continue;
                }
                self.layer_visits.fetch_add(1, Ordering::Relaxed);
                let values = &s.values()[layer.range()];
                for (profile, weight) in self.profiles[li].iter().zip(values) {
                    profile.accumulate(*weight, out, res as usize);
                }
            }
            image = Some(current);
        }
        Ok(image.expect("layout has at least one block"))
    }

    fn synthesize_vjp(
        &self,
        s: &StyleVector,
        max_resolution: u32,
        upstream: &ImageTensor,
    ) -> Result<StyleVector> {
        s.ensure_layout(&self.layout)?;
        let top = self.check_resolution(max_resolution)?;
        if upstream.width() != max_resolution || upstream.height() != max_resolution {
            return Err(Error::InvalidInput(format!(
                "upstream gradient is {}x{}, expected {max_resolution}x{max_resolution}",
                upstream.height(),
                upstream.width()
            )));
        }
        let mut grad = vec![0.0; self.layout.total_channels()];
        let blocks = &self.layout.blocks()[..=top];
        let mut g = upstream.clone();
        for (bi, block) in blocks.iter().enumerate().rev() {
            let res = block.resolution as usize;
            for (li, layer) in self.layout.layers().iter().enumerate() {
                if layer.block != block.index {
                    continue;
                }
                for (c, profile) in self.profiles[li].iter().enumerate() {
                    grad[layer.offset + c] = profile.correlate(g.data(), res);
                }
            }
            if bi > 0 {
                g = upsample_nearest_adjoint(&g, blocks[bi - 1].resolution);
            }
        }
        StyleVector::from_values(self.layout.clone(), grad)
    }

    fn differentiable(&self) -> bool {
        true
    }
}

fn project(proj: &ProjectionParams, img: &ImageTensor) -> Result<(Vec<f64>, BilinearResize)> {
    img.check_finite()?;
    if img.height() != img.width() {
        return Err(Error::InvalidInput("toy embedders expect square images".into()));
    }
    let resize = BilinearResize::new(img.width(), proj.input_size);
    let x = resize.apply(img);
    let n = proj.input_len();
    let v = (0..proj.dim)
        .map(|r| {
            proj.matrix[r * n..(r + 1) * n]
                .iter()
                .zip(x.data())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok((v, resize))
}

/// Gradient of `<upstream, normalize(M resize(img))>` with respect to `img`.
fn project_vjp(proj: &ProjectionParams, img: &ImageTensor, upstream: &[f64]) -> Result<ImageTensor> {
    if upstream.len() != proj.dim {
        return Err(Error::InvalidInput(format!(
            "upstream gradient has dimension {}, embedding has {}",
            upstream.len(),
            proj.dim
        )));
    }
    let (v, resize) = project(proj, img)?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("embedding of a zero image is undefined".into()));
    }
    let e: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let eu: f64 = e.iter().zip(upstream).map(|(a, b)| a * b).sum();
    let gv: Vec<f64> = upstream
        .iter()
        .zip(&e)
        .map(|(u, ei)| (u - ei * eu) / norm)
        .collect();
    let n = proj.input_len();
    let mut gx = vec![0.0; n];
    for (r, g) in gv.iter().enumerate() {
        for (acc, m) in gx.iter_mut().zip(&proj.matrix[r * n..(r + 1) * n]) {
            *acc += g * m;
        }
    }
    let gx = ImageTensor::from_raw(proj.input_size, proj.input_size, gx);
    Ok(resize.adjoint(&gx))
}

pub struct ToyEmbedder {
    params: Arc<ToyParams>,
    vocabulary: HashMap<String, usize>,
}

impl ToyEmbedder {
    pub fn new(params: Arc<ToyParams>) -> Self {
        let vocabulary = params
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, e)| (e.prompt.clone(), i))
            .collect();
        ToyEmbedder { params, vocabulary }
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.params.vocabulary.iter().map(|e| e.prompt.as_str())
    }
}

impl JointEmbedder for ToyEmbedder {
    fn input_size(&self) -> u32 {
        self.params.joint.input_size
    }

    fn embed_image(&self, img: &ImageTensor) -> Result<EmbeddingVector> {
        let (v, _) = project(&self.params.joint, img)?;
        EmbeddingVector::normalized(EmbeddingSpace::Joint, v)
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        let key = normalize_prompt(text);
        if key.is_empty() {
            return Err(Error::EmptyPrompt);
        }
        let index = *self
            .vocabulary
            .get(&key)
            .ok_or_else(|| Error::UnknownToken(text.to_string()))?;
        EmbeddingVector::from_unit(
            EmbeddingSpace::Joint,
            self.params.vocabulary[index].embedding.clone(),
        )
    }

    fn embed_image_vjp(&self, img: &ImageTensor, upstream: &[f64]) -> Result<ImageTensor> {
        project_vjp(&self.params.joint, img, upstream)
    }

    fn differentiable(&self) -> bool {
        true
    }
}

pub struct ToyIdentityNet {
    params: Arc<ToyParams>,
}

impl ToyIdentityNet {
    pub fn new(params: Arc<ToyParams>) -> Self {
        ToyIdentityNet { params }
    }
}

impl IdentityNet for ToyIdentityNet {
    fn identity_embed(&self, img: &ImageTensor) -> Result<EmbeddingVector> {
        let (v, _) = project(&self.params.identity, img)?;
        EmbeddingVector::normalized(EmbeddingSpace::Identity, v)
    }

    fn identity_embed_vjp(&self, img: &ImageTensor, upstream: &[f64]) -> Result<ImageTensor> {
        project_vjp(&self.params.identity, img, upstream)
    }

    fn differentiable(&self) -> bool {
        true
    }
}

/// Exact least-squares inverse of the toy generator at full resolution.
pub struct ToyInverter {
    generator: Arc<ToyGenerator>,
    gram: OnceLock<Option<Cholesky<f64, Dyn>>>,
}

impl ToyInverter {
    pub fn new(generator: Arc<ToyGenerator>) -> Self {
        ToyInverter {
            generator,
            gram: OnceLock::new(),
        }
    }

    /// `G^T G` over all style channels, built column by column from the
    /// generator's own forward and adjoint passes.
    fn factorized_gram(&self) -> Result<&Cholesky<f64, Dyn>> {
        self.gram
            .get_or_init(|| {
                let gen = &self.generator;
                let layout = gen.layout().clone();
                let n = layout.total_channels();
                let full = layout.max_resolution();
                let mut gram = DMatrix::<f64>::zeros(n, n);
                for j in 0..n {
                    let mut e = StyleVector::zeros_like(&layout);
                    e.values_mut()[j] = 1.0;
                    let img = gen.synthesize(&e, full).ok()?;
                    let col = gen.synthesize_vjp(&e, full, &img).ok()?;
                    gram.set_column(j, &DVector::from_column_slice(col.values()));
                }
                gram.cholesky()
            })
            .as_ref()
            .ok_or_else(|| Error::Backend("toy generator Gram matrix is singular".into()))
    }
}

impl Inverter for ToyInverter {
    fn invert_image(&self, img: &ImageTensor) -> Result<StyleVector> {
        img.check_finite()?;
        let gen = &self.generator;
        let layout = gen.layout().clone();
        let full = layout.max_resolution();
        let target = if img.height() == full && img.width() == full {
            img.clone()
        } else {
            resize_to_square(img, full)
        };
        let zero = StyleVector::zeros_like(&layout);
        // G^T x through the adjoint; the generator is linear so the
        // linearization point does not matter.
        let rhs = gen.synthesize_vjp(&zero, full, &target)?;
        let chol = self.factorized_gram()?;
        let solution = chol.solve(&DVector::from_column_slice(rhs.values()));
        StyleVector::from_values(layout, solution.iter().copied().collect())
    }
}

/// All four toy models sharing one parameter set.
#[derive(Clone)]
pub struct ToyBackend {
    pub params: Arc<ToyParams>,
    pub generator: Arc<ToyGenerator>,
    pub embedder: Arc<ToyEmbedder>,
    pub identity: Arc<ToyIdentityNet>,
    pub inverter: Arc<ToyInverter>,
}

impl ToyBackend {
    pub fn new(params: ToyParams) -> Result<Self> {
        let params = Arc::new(params);
        let generator = Arc::new(ToyGenerator::new(params.clone())?);
        Ok(ToyBackend {
            embedder: Arc::new(ToyEmbedder::new(params.clone())),
            identity: Arc::new(ToyIdentityNet::new(params.clone())),
            inverter: Arc::new(ToyInverter::new(generator.clone())),
            generator,
            params,
        })
    }

    pub fn generate(seed: u64) -> Result<Self> {
        ToyBackend::new(ToyParams::generate(&ToySpec::default(), seed)?)
    }

    pub fn bundle(&self) -> BackendBundle {
        BackendBundle::new(
            "toy",
            self.generator.clone(),
            self.embedder.clone(),
            self.identity.clone(),
            Some(self.inverter.clone()),
            Concurrency::Shared,
        )
    }

    /// Same models without an inverter.
    pub fn bundle_without_inverter(&self) -> BackendBundle {
        BackendBundle::new(
            "toy",
            self.generator.clone(),
            self.embedder.clone(),
            self.identity.clone(),
            None,
            Concurrency::Shared,
        )
    }
}

/// The built-in `toy` backend.
pub fn default_toy() -> Result<ToyBackend> {
    ToyBackend::generate(DEFAULT_TOY_SEED)
}
