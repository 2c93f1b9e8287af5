//! Differentiable loss evaluation over a batch of style vectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::losses;
use crate::style_space::{axpy, ChannelMask, StyleVector};

use super::{BackendBundle, EmbeddingVector, ImageTensor};

/// The loss forms a search can minimize.
#[derive(Debug, Clone, PartialEq)]
pub enum LossFunctional {
    /// Mean text-image cosine distance.
    Clip { text: EmbeddingVector },
    /// Mean identity loss between original and edited images.
    Identity,
    /// `lambda_c * clip + lambda_id * identity`, averaged over the batch.
    Composite {
        text: EmbeddingVector,
        lambda_c: f64,
        lambda_id: f64,
    },
    /// `1 - <e, t1 - t2>` (or the normalized difference when `normalized`).
    SingleChannel {
        positive: EmbeddingVector,
        negative: EmbeddingVector,
        normalized: bool,
    },
}

impl LossFunctional {
    fn weights(&self) -> (f64, f64) {
        match self {
            LossFunctional::Clip { .. } | LossFunctional::SingleChannel { .. } => (1.0, 0.0),
            LossFunctional::Identity => (0.0, 1.0),
            LossFunctional::Composite {
                lambda_c, lambda_id, ..
            } => (*lambda_c, *lambda_id),
        }
    }

    /// Whether the identity term is evaluated (reported even at zero weight).
    fn uses_identity(&self) -> bool {
        matches!(self, LossFunctional::Identity | LossFunctional::Composite { .. })
    }

    /// Embedding-space target `u` such that the text term is `1 - <e, u>`.
    fn text_target(&self) -> Result<Option<Vec<f64>>> {
        match self {
            LossFunctional::Clip { text } | LossFunctional::Composite { text, .. } => {
                Ok(Some(text.values().to_vec()))
            }
            LossFunctional::Identity => Ok(None),
            LossFunctional::SingleChannel {
                positive,
                negative,
                normalized,
            } => losses::contrastive_target(positive, negative, *normalized).map(Some),
        }
    }
}

/// Batch-mean loss terms. For single-channel functionals `clip` holds L_S.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub clip: f64,
    pub identity: f64,
}

impl LossTerms {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.clip.is_finite() && self.identity.is_finite()
    }
}

/// A batch, a loss functional and a mask, ready to be evaluated at any delta.
///
/// Identity embeddings of the unedited images are computed once up front.
pub struct LossProblem<'a> {
    bundle: &'a BackendBundle,
    styles: Vec<StyleVector>,
    originals: Vec<Option<EmbeddingVector>>,
    functional: LossFunctional,
    target: Option<Vec<f64>>,
    mask: ChannelMask,
    resolution: u32,
}

struct ImageLoss {
    clip: f64,
    identity: f64,
    grad: Option<Vec<f64>>,
}

impl<'a> LossProblem<'a> {
    pub fn new(
        bundle: &'a BackendBundle,
        styles: Vec<StyleVector>,
        functional: LossFunctional,
        mask: ChannelMask,
        resolution: u32,
    ) -> Result<Self> {
        if styles.is_empty() {
            return Err(Error::InvalidInput("loss batch is empty".into()));
        }
        let layout = bundle.layout();
        layout.block_index(resolution)?;
        layout.check_same(mask.layout())?;
        for s in &styles {
            s.ensure_layout(layout)?;
        }
        let target = functional.text_target()?;
        let originals = if functional.uses_identity() {
            styles
                .par_iter()
                .map(|s| {
                    let img = bundle.generator.synthesize(s, resolution)?;
                    bundle.identity.identity_embed(&img).map(Some)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![None; styles.len()]
        };
        Ok(LossProblem {
            bundle,
            styles,
            originals,
            functional,
            target,
            mask,
            resolution,
        })
    }

    pub fn styles(&self) -> &[StyleVector] {
        &self.styles
    }

    pub fn mask(&self) -> &ChannelMask {
        &self.mask
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn functional(&self) -> &LossFunctional {
        &self.functional
    }

    fn image_loss(&self, index: usize, delta: &StyleVector, with_grad: bool) -> Result<ImageLoss> {
        let bundle = self.bundle;
        let (lambda_c, lambda_id) = self.functional.weights();
        let edited = axpy(&self.styles[index], 1.0, delta)?;
        let img = bundle.generator.synthesize(&edited, self.resolution)?;

        let mut clip = 0.0;
        let mut grad_img: Option<ImageTensor> = None;
        if let Some(target) = &self.target {
            let e = bundle.embedder.embed_image(&img)?;
            clip = losses::alignment_loss(e.values(), target);
            if with_grad && lambda_c != 0.0 {
                let upstream: Vec<f64> = target.iter().map(|t| -lambda_c * t).collect();
                grad_img = Some(bundle.embedder.embed_image_vjp(&img, &upstream)?);
            }
        }

        let mut identity = 0.0;
        if let Some(original) = &self.originals[index] {
            let r = bundle.identity.identity_embed(&img)?;
            identity = losses::identity_loss(original, &r)?;
            if with_grad && lambda_id != 0.0 {
                let upstream: Vec<f64> = original.values().iter().map(|v| -lambda_id * v).collect();
                let g = bundle.identity.identity_embed_vjp(&img, &upstream)?;
                grad_img = Some(match grad_img {
                    Some(mut acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                        acc
                    }
                    None => g,
                });
            }
        }

        let grad = match (with_grad, grad_img) {
            (false, _) => None,
            (true, Some(g)) => Some(
                bundle
                    .generator
                    .synthesize_vjp(&edited, self.resolution, &g)?
                    .into_values(),
            ),
            (true, None) => Some(vec![0.0; delta.len()]),
        };
        Ok(ImageLoss {
            clip,
            identity,
            grad,
        })
    }

    fn run(&self, delta: &StyleVector, with_grad: bool) -> Result<(LossTerms, Option<StyleVector>)> {
        delta.ensure_layout(self.bundle.layout())?;
        if with_grad {
            self.bundle.require_differentiable()?;
        }
        // Per-image work in parallel; reduction sequential so results are
        // independent of scheduling.
        let per_image = (0..self.styles.len())
            .into_par_iter()
            .map(|i| self.image_loss(i, delta, with_grad))
            .collect::<Result<Vec<_>>>()?;

        let n = per_image.len() as f64;
        let (lambda_c, lambda_id) = self.functional.weights();
        let mut clip = 0.0;
        let mut identity = 0.0;
        let mut grad = with_grad.then(|| vec![0.0; delta.len()]);
        for item in &per_image {
            clip += item.clip;
            identity += item.identity;
            if let (Some(acc), Some(g)) = (grad.as_mut(), item.grad.as_ref()) {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
        clip /= n;
        identity /= n;
        let terms = LossTerms {
            total: lambda_c * clip + lambda_id * identity,
            clip,
            identity,
        };
        let grad = match grad {
            Some(mut g) => {
                for (v, keep) in g.iter_mut().zip(self.mask.include()) {
                    *v = if *keep { *v / n } else { 0.0 };
                }
                Some(StyleVector::from_values(self.bundle.layout().clone(), g)?)
            }
            None => None,
        };
        Ok((terms, grad))
    }

    /// Loss terms at `delta` without gradients.
    pub fn evaluate(&self, delta: &StyleVector) -> Result<LossTerms> {
        Ok(self.run(delta, false)?.0)
    }

    /// Loss terms and the masked gradient with respect to `delta`.
    pub fn loss_gradient(&self, delta: &StyleVector) -> Result<(LossTerms, StyleVector)> {
        let (terms, grad) = self.run(delta, true)?;
        Ok((terms, grad.expect("gradient requested")))
    }
}

/// One-shot form of [`LossProblem::loss_gradient`].
pub fn loss_gradient(
    bundle: &BackendBundle,
    batch: &[StyleVector],
    delta: &StyleVector,
    functional: &LossFunctional,
    mask: &ChannelMask,
    resolution: u32,
) -> Result<(LossTerms, StyleVector)> {
    LossProblem::new(bundle, batch.to_vec(), functional.clone(), mask.clone(), resolution)?
        .loss_gradient(delta)
}
