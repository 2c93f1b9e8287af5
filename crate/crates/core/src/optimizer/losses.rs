//! Scalar loss forms on embeddings.

use crate::backends::{
    BackendBundle, EmbeddingSpace, EmbeddingVector, LossFunctional, LossProblem,
};
use crate::error::{Error, Result};
use crate::style_space::{ChannelMask, StyleVector};

use super::OptimizeConfig;

fn require_space(e: &EmbeddingVector, space: EmbeddingSpace, what: &str) -> Result<()> {
    if e.space() != space {
        return Err(Error::SpaceMismatch(format!(
            "{what} must be a {space:?} embedding, got {:?}",
            e.space()
        )));
    }
    Ok(())
}

/// `1 - <e, target>`.
pub(crate) fn alignment_loss(e: &[f64], target: &[f64]) -> f64 {
    1.0 - e.iter().zip(target).map(|(a, b)| a * b).sum::<f64>()
}

fn cosine_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    a.ensure_space(b)?;
    if a.values() == b.values() {
        return Ok(0.0);
    }
    Ok(1.0 - a.cosine(b)?)
}

/// Cosine distance between an image and a text embedding, in `[0, 2]`.
pub fn clip_loss(image: &EmbeddingVector, text: &EmbeddingVector) -> Result<f64> {
    require_space(image, EmbeddingSpace::Joint, "image embedding")?;
    require_space(text, EmbeddingSpace::Joint, "text embedding")?;
    cosine_distance(image, text)
}

/// `1 - <R(G(s)), R(G(s + delta))>`.
pub fn identity_loss(original: &EmbeddingVector, edited: &EmbeddingVector) -> Result<f64> {
    require_space(original, EmbeddingSpace::Identity, "original embedding")?;
    require_space(edited, EmbeddingSpace::Identity, "edited embedding")?;
    cosine_distance(original, edited)
}

/// The vector the single-channel loss aligns image embeddings with:
/// `t1 - t2`, or its normalization.
pub(crate) fn contrastive_target(
    positive: &EmbeddingVector,
    negative: &EmbeddingVector,
    normalized: bool,
) -> Result<Vec<f64>> {
    require_space(positive, EmbeddingSpace::Joint, "positive prompt embedding")?;
    require_space(negative, EmbeddingSpace::Joint, "negative prompt embedding")?;
    positive.ensure_space(negative)?;
    let diff: Vec<f64> = positive
        .values()
        .iter()
        .zip(negative.values())
        .map(|(a, b)| a - b)
        .collect();
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::DegeneratePrompt(
            "positive and negative prompts embed identically".into(),
        ));
    }
    Ok(if normalized {
        diff.into_iter().map(|v| v / norm).collect()
    } else {
        diff
    })
}

/// `1 - <e, t1 - t2>` with the unnormalized prompt difference.
pub fn single_channel_loss(
    image: &EmbeddingVector,
    positive: &EmbeddingVector,
    negative: &EmbeddingVector,
) -> Result<f64> {
    single_channel_loss_with(image, positive, negative, false)
}

/// [`single_channel_loss`], optionally against the unit-normalized difference.
pub fn single_channel_loss_with(
    image: &EmbeddingVector,
    positive: &EmbeddingVector,
    negative: &EmbeddingVector,
    normalized: bool,
) -> Result<f64> {
    require_space(image, EmbeddingSpace::Joint, "image embedding")?;
    let target = contrastive_target(positive, negative, normalized)?;
    if image.dim() != target.len() {
        return Err(Error::SpaceMismatch("embedding dimensions differ".into()));
    }
    Ok(alignment_loss(image.values(), &target))
}

/// Batch-mean `lambda_c * clip + lambda_id * identity` at `config.opt_resolution`.
pub fn composite_loss(
    bundle: &BackendBundle,
    batch: &[StyleVector],
    delta: &StyleVector,
    prompt: &str,
    config: &OptimizeConfig,
) -> Result<f64> {
    config.validate(bundle.layout())?;
    let text = bundle.embedder.embed_text(prompt)?;
    let problem = LossProblem::new(
        bundle,
        batch.to_vec(),
        LossFunctional::Composite {
            text,
            lambda_c: config.lambda_c,
            lambda_id: config.lambda_id,
        },
        ChannelMask::all(bundle.layout()),
        config.opt_resolution,
    )?;
    Ok(problem.evaluate(delta)?.total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(v: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector::normalized(EmbeddingSpace::Joint, v).unwrap()
    }

    fn ident(v: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector::normalized(EmbeddingSpace::Identity, v).unwrap()
    }

    #[test]
    fn clip_loss_extremes() {
        let a = joint(vec![1.0, 2.0, 3.0]);
        assert_eq!(clip_loss(&a, &a).unwrap(), 0.0);
        let neg = joint(vec![-1.0, -2.0, -3.0]);
        assert!((clip_loss(&a, &neg).unwrap() - 2.0).abs() < 1e-12);
        let x = joint(vec![1.0, 0.0, 0.0]);
        let y = joint(vec![0.0, 1.0, 0.0]);
        assert!((clip_loss(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_loss_rejects_identity_space() {
        let a = joint(vec![1.0, 0.0]);
        let b = ident(vec![1.0, 0.0]);
        assert!(matches!(clip_loss(&a, &b), Err(Error::SpaceMismatch(_))));
        assert!(matches!(identity_loss(&a, &a), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn identity_loss_cases() {
        let a = ident(vec![0.3, -0.2, 0.9]);
        assert_eq!(identity_loss(&a, &a).unwrap(), 0.0);
        let x = ident(vec![1.0, 0.0, 0.0]);
        let y = ident(vec![0.0, 0.0, 1.0]);
        assert!((identity_loss(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_channel_degenerate_pair() {
        let t = joint(vec![0.0, 1.0]);
        let img = joint(vec![1.0, 0.0]);
        assert!(matches!(
            single_channel_loss(&img, &t, &t),
            Err(Error::DegeneratePrompt(_))
        ));
    }

    #[test]
    fn single_channel_aligned_image() {
        // e aligned with (t1 - t2)/|t1 - t2| gives 1 - |t1 - t2|.
        let t1 = joint(vec![0.6, 0.8, 0.0]);
        let t2 = joint(vec![0.0, 0.6, 0.8]);
        let diff: Vec<f64> = t1.values().iter().zip(t2.values()).map(|(a, b)| a - b).collect();
        let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        let img = joint(diff.clone());
        let loss = single_channel_loss(&img, &t1, &t2).unwrap();
        assert!((loss - (1.0 - norm)).abs() < 1e-12);
        let normalized = single_channel_loss_with(&img, &t1, &t2, true).unwrap();
        assert!(normalized.abs() < 1e-12);
    }
}
