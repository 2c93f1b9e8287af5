use std::time::Instant;

use chrono::{DateTime, Utc};

use crate::backends::{BackendBundle, LossFunctional, LossProblem, LossTerms};
use crate::error::{Error, Result};
use crate::style_space::{ChannelMask, Direction, PromptSpec, StyleVector};

use super::adam::Adam;
use super::{OptimizeConfig, OptimizeReport, SearchMode};

/// Loss ratio to the initial value that counts as blow-up.
pub const DIVERGENCE_FACTOR: f64 = 10.0;
/// Consecutive blown-up iterations tolerated before aborting.
pub const DIVERGENCE_PATIENCE: usize = 5;

/// Emitted after every update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    /// 1-based.
    pub iteration: usize,
    pub iterations: usize,
    pub loss: LossTerms,
}

/// Optional knobs of a search that are not hyperparameters.
#[derive(Default)]
pub struct SearchOptions<'a> {
    /// Timestamp recorded on the direction; defaults to [`crate::clock::now`].
    pub created_at: Option<DateTime<Utc>>,
    pub progress: Option<&'a mut (dyn FnMut(&Progress) + Send)>,
}

impl SearchOptions<'_> {
    fn notify(&mut self, p: Progress) {
        if let Some(f) = self.progress.as_mut() {
            f(&p);
        }
    }
}

/// Multi-channel global direction search for `prompt`.
pub fn find_direction(
    prompt: &str,
    bundle: &BackendBundle,
    config: &OptimizeConfig,
) -> Result<(Direction, OptimizeReport)> {
    find_direction_with(prompt, bundle, config, SearchOptions::default())
}

pub fn find_direction_with(
    prompt: &str,
    bundle: &BackendBundle,
    config: &OptimizeConfig,
    mut options: SearchOptions<'_>,
) -> Result<(Direction, OptimizeReport)> {
    let started = Instant::now();
    if config.mode != SearchMode::MultiChannel {
        return Err(Error::InvalidConfig(
            "find_direction requires mode multi_channel".into(),
        ));
    }
    bundle.require_differentiable()?;
    let mask = config.search_mask(bundle.layout())?;
    let text = bundle.embedder.embed_text(prompt)?;
    let styles = bundle.sample_styles(config.batch_size, config.seed)?;
    let problem = LossProblem::new(
        bundle,
        styles,
        LossFunctional::Composite {
            text,
            lambda_c: config.lambda_c,
            lambda_id: config.lambda_id,
        },
        mask.clone(),
        config.opt_resolution,
    )?;

    let mut adam = Adam::new(mask.include().len(), config.beta1, config.beta2, config.epsilon);
    let (delta, mut report) = descend(&problem, config, &mut options, started, |delta, grad| {
        adam.step(delta, grad, config.step_size)
    })?;
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    let direction = Direction::new(
        delta,
        mask,
        PromptSpec::single(prompt),
        config.clone(),
        bundle.fingerprint(),
        options.created_at.unwrap_or_else(crate::clock::now),
    )?;
    report.final_direction_norm = direction.norm();
    Ok((direction, report))
}

/// Contrastive search under the single-channel loss, projected onto its
/// largest-magnitude coordinate.
///
/// Updates are plain gradient steps scaled by the largest initial gradient
/// component, so that coordinate magnitudes keep the ordering of gradient
/// magnitudes. Sign-normalizing updates would move every active coordinate
/// at the same rate and make the selection arbitrary.
pub fn find_single_channel_direction(
    positive: &str,
    negative: &str,
    bundle: &BackendBundle,
    config: &OptimizeConfig,
) -> Result<(Direction, OptimizeReport)> {
    find_single_channel_direction_with(positive, negative, bundle, config, SearchOptions::default())
}

pub fn find_single_channel_direction_with(
    positive: &str,
    negative: &str,
    bundle: &BackendBundle,
    config: &OptimizeConfig,
    mut options: SearchOptions<'_>,
) -> Result<(Direction, OptimizeReport)> {
    let started = Instant::now();
    if config.mode != SearchMode::SingleChannel {
        return Err(Error::InvalidConfig(
            "find_single_channel_direction requires mode single_channel".into(),
        ));
    }
    bundle.require_differentiable()?;
    let mask = config.search_mask(bundle.layout())?;
    let pos = bundle.embedder.embed_text(positive)?;
    let neg = bundle.embedder.embed_text(negative)?;
    if pos == neg {
        return Err(Error::DegeneratePrompt(format!(
            "{positive:?} and {negative:?} have identical embeddings"
        )));
    }
    let styles = bundle.sample_styles(config.batch_size, config.seed)?;
    let problem = LossProblem::new(
        bundle,
        styles,
        LossFunctional::SingleChannel {
            positive: pos,
            negative: neg,
            normalized: config.normalized_difference,
        },
        mask.clone(),
        config.opt_resolution,
    )?;

    let mut scale: Option<f64> = None;
    let (delta, mut report) = descend(&problem, config, &mut options, started, |delta, grad| {
        let s = *scale.get_or_insert_with(|| grad.iter().fold(0.0_f64, |m, g| m.max(g.abs())));
        if s > 0.0 {
            for (d, g) in delta.iter_mut().zip(grad) {
                *d -= config.step_size * g / s;
            }
        }
    })?;

    let selected = argmax_abs(delta.values(), &mask).ok_or_else(|| {
        Error::InvalidInput("no channel moved under the single-channel loss".into())
    })?;
    let mut single = vec![0.0; delta.len()];
    single[selected] = delta.values()[selected];
    let single = StyleVector::from_values(delta.layout().clone(), single)?;
    let direction = Direction::new(
        single,
        mask,
        PromptSpec::contrastive(positive, negative),
        config.clone(),
        bundle.fingerprint(),
        options.created_at.unwrap_or_else(crate::clock::now),
    )?;
    report.projected = Some(problem.evaluate(direction.delta())?);
    report.selected_channel = Some(selected);
    report.final_direction_norm = direction.norm();
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok((direction, report))
}

/// Lowest index among the largest nonzero magnitudes inside the mask.
fn argmax_abs(values: &[f64], mask: &ChannelMask) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in mask.included_indices() {
        let m = values[i].abs();
        if m > 0.0 && best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i)
}

/// Runs `config.iterations` updates from zero. `update` receives the
/// current delta and the masked gradient; the mask is reapplied after it.
fn descend(
    problem: &LossProblem<'_>,
    config: &OptimizeConfig,
    options: &mut SearchOptions<'_>,
    started: Instant,
    mut update: impl FnMut(&mut [f64], &[f64]),
) -> Result<(StyleVector, OptimizeReport)> {
    let layout = problem.mask().layout().clone();
    let include = problem.mask().include().to_vec();
    let mut delta = StyleVector::zeros_like(&layout);
    let (initial, mut grad) = problem.loss_gradient(&delta)?;
    let mut report = OptimizeReport::new(config.clone(), initial);
    if !initial.is_finite() {
        return Err(diverged(report, "initial loss is not finite".into(), started));
    }

    let mut blown_up = 0;
    for k in 1..=config.iterations {
        let mut values = delta.values().to_vec();
        update(&mut values, grad.values());
        for (v, keep) in values.iter_mut().zip(&include) {
            if !keep {
                *v = 0.0;
            }
        }
        delta = match StyleVector::from_values(layout.clone(), values) {
            Ok(d) => d,
            Err(_) => {
                let reason = format!("direction became non-finite at iteration {k}");
                return Err(diverged(report, reason, started));
            }
        };
        let need_grad = k < config.iterations;
        let evaluated = if need_grad {
            problem.loss_gradient(&delta).map(|(t, g)| (t, Some(g)))
        } else {
            problem.evaluate(&delta).map(|t| (t, None))
        };
        let terms = match evaluated {
            Ok((t, g)) => {
                if let Some(g) = g {
                    grad = g;
                }
                t
            }
            // Finite deltas only fail evaluation through overflow downstream.
            Err(e @ Error::InvalidInput(_)) => {
                let reason = format!("evaluation failed at iteration {k}: {e}");
                return Err(diverged(report, reason, started));
            }
            Err(e) => return Err(e),
        };
        report.trace.push(terms);
        report.final_direction_norm = delta.norm();
        if !terms.is_finite() {
            return Err(diverged(report, format!("loss is not finite at iteration {k}"), started));
        }
        if initial.total > 0.0 && terms.total > DIVERGENCE_FACTOR * initial.total {
            blown_up += 1;
            if blown_up >= DIVERGENCE_PATIENCE {
                let reason = format!(
                    "loss stayed above {DIVERGENCE_FACTOR}x its initial value for {DIVERGENCE_PATIENCE} iterations"
                );
                return Err(diverged(report, reason, started));
            }
        } else {
            blown_up = 0;
        }
        options.notify(Progress {
            iteration: k,
            iterations: config.iterations,
            loss: terms,
        });
    }
    Ok((delta, report))
}

fn diverged(mut report: OptimizeReport, reason: String, started: Instant) -> Error {
    report.failed = true;
    report.failure_reason = Some(reason.clone());
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    Error::Divergence {
        reason,
        report: Box::new(report),
    }
}
