//! Scaled ablations. Timing claims are ordinal only: each configuration is
//! run once to warm up, then `runs` more times, and the mean is compared.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{BackendBundle, ImageTensor, LossFunctional, LossProblem, LossTerms};
use crate::error::{Error, Result};
use crate::imageio::{hstack, save_png, BitDepth};
use crate::optimizer::{
    find_direction, find_single_channel_direction, OptimizeConfig, OptimizeReport, SearchMode,
};
use crate::style_space::{axpy, ChannelMask, Direction, StyleVector};

/// Added to the search seed to draw the held-out batch.
pub const HELD_OUT_SEED_OFFSET: u64 = 1_000_003;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub base: OptimizeConfig,
    /// Timed runs per configuration, after `warmup` discarded runs.
    pub runs: usize,
    pub warmup: usize,
    /// Evaluate configurations concurrently. Timings become unreliable.
    pub parallel: bool,
}

impl BenchConfig {
    pub fn new(base: OptimizeConfig) -> Self {
        BenchConfig {
            base,
            runs: 5,
            warmup: 1,
            parallel: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("bench needs at least one timed run".into()));
        }
        if self.parallel {
            tracing::warn!("parallel bench: wall-clock timings are not comparable");
        }
        Ok(())
    }
}

/// A named pass/fail fact a report asserts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

fn check(name: &str, passed: bool) -> Check {
    Check {
        name: name.to_string(),
        passed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_secs: f64,
    pub runs_secs: Vec<f64>,
}

struct Timed {
    timing: Timing,
    direction: Direction,
    report: OptimizeReport,
}

fn timed_search(bundle: &BackendBundle, prompt: &str, config: &OptimizeConfig, bench: &BenchConfig) -> Result<Timed> {
    let mut last = None;
    let mut runs = Vec::with_capacity(bench.runs);
    for k in 0..bench.warmup + bench.runs {
        let t = Instant::now();
        let out = find_direction(prompt, bundle, config)?;
        let secs = t.elapsed().as_secs_f64();
        if k >= bench.warmup {
            runs.push(secs);
        }
        last = Some(out);
    }
    let (direction, report) = last.expect("at least one run");
    Ok(Timed {
        timing: Timing {
            mean_secs: runs.iter().sum::<f64>() / runs.len() as f64,
            runs_secs: runs,
        },
        direction,
        report,
    })
}

/// Evaluates `f` over `items`, concurrently when asked.
fn map_rows<T: Sync, R: Send>(parallel: bool, items: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn cosine_or_none(a: &Direction, b: &Direction) -> Option<f64> {
    a.delta().cosine(b.delta()).ok().filter(|c| c.is_finite())
}

/// Mean `1 - <e, t>` of the held-out batch with `delta` applied.
fn clip_on_batch(bundle: &BackendBundle, styles: &[StyleVector], prompt: &str, delta: &StyleVector, resolution: u32) -> Result<f64> {
    let text = bundle.embedder.embed_text(prompt)?;
    let problem = LossProblem::new(
        bundle,
        styles.to_vec(),
        LossFunctional::Clip { text },
        ChannelMask::all(bundle.layout()),
        resolution,
    )?;
    Ok(problem.evaluate(delta)?.clip)
}

/// Mean identity cosine similarity `<R(G(s)), R(G(s + delta))>`.
pub fn mean_identity_similarity(bundle: &BackendBundle, styles: &[StyleVector], delta: &StyleVector, resolution: u32) -> Result<f64> {
    let problem = LossProblem::new(
        bundle,
        styles.to_vec(),
        LossFunctional::Identity,
        ChannelMask::all(bundle.layout()),
        resolution,
    )?;
    Ok(1.0 - problem.evaluate(delta)?.identity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRow {
    pub resolution: u32,
    pub timing: Timing,
    pub final_loss: f64,
    pub direction_norm: f64,
    /// Cosine with the previous row's direction (informational).
    pub cosine_to_previous: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub prompt: String,
    pub rows: Vec<ResolutionRow>,
    pub checks: Vec<Check>,
}

pub fn run_resolution_ablation(bundle: &BackendBundle, prompt: &str, resolutions: &[u32], bench: &BenchConfig) -> Result<ResolutionReport> {
    bench.validate()?;
    if resolutions.is_empty() {
        return Err(Error::InvalidInput("no resolutions given".into()));
    }
    for &r in resolutions {
        bundle.layout().block_index(r)?;
    }
    let timed = map_rows(bench.parallel, resolutions, |&r| {
        let config = OptimizeConfig {
            opt_resolution: r,
            ..bench.base.clone()
        };
        timed_search(bundle, prompt, &config, bench)
    })?;
    let rows: Vec<ResolutionRow> = timed
        .iter()
        .enumerate()
        .map(|(i, t)| ResolutionRow {
            resolution: resolutions[i],
            timing: t.timing.clone(),
            final_loss: t.report.final_loss(),
            direction_norm: t.direction.norm(),
            cosine_to_previous: i
                .checked_sub(1)
                .and_then(|p| cosine_or_none(&timed[p].direction, &t.direction)),
        })
        .collect();
    let times: Vec<f64> = rows.iter().map(|r| r.timing.mean_secs).collect();
    let sorted_input = resolutions.windows(2).all(|w| w[0] < w[1]);
    Ok(ResolutionReport {
        prompt: prompt.to_string(),
        checks: vec![check(
            "wall-clock strictly increasing with resolution",
            sorted_input && strictly_increasing(&times),
        )],
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub batch_size: usize,
    pub timing: Timing,
    pub final_loss: f64,
    pub direction_norm: f64,
    pub cosine_to_previous: Option<f64>,
    /// Mean text loss on the held-out batch without and with the direction.
    pub held_out_clip_zero: f64,
    pub held_out_clip_edited: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub prompt: String,
    pub held_out_seed: u64,
    pub rows: Vec<BatchRow>,
    pub checks: Vec<Check>,
}

pub fn run_batch_ablation(bundle: &BackendBundle, prompt: &str, batch_sizes: &[usize], bench: &BenchConfig) -> Result<BatchReport> {
    bench.validate()?;
    if batch_sizes.is_empty() {
        return Err(Error::InvalidInput("no batch sizes given".into()));
    }
    if batch_sizes.contains(&0) {
        return Err(Error::InvalidConfig("batch size must be >= 1".into()));
    }
    bench.base.validate(bundle.layout())?;
    let held_out_seed = bench.base.seed.wrapping_add(HELD_OUT_SEED_OFFSET);
    let held_out_size = *batch_sizes.iter().max().expect("non-empty");
    let held_out = bundle.sample_styles(held_out_size, held_out_seed)?;
    let zero = StyleVector::zeros_like(bundle.layout());
    let res = bench.base.opt_resolution;
    let held_out_clip_zero = clip_on_batch(bundle, &held_out, prompt, &zero, res)?;

    let timed = map_rows(bench.parallel, batch_sizes, |&b| {
        let config = OptimizeConfig {
            batch_size: b,
            ..bench.base.clone()
        };
        timed_search(bundle, prompt, &config, bench)
    })?;
    let mut rows = Vec::with_capacity(timed.len());
    for (i, t) in timed.iter().enumerate() {
        rows.push(BatchRow {
            batch_size: batch_sizes[i],
            timing: t.timing.clone(),
            final_loss: t.report.final_loss(),
            direction_norm: t.direction.norm(),
            cosine_to_previous: i
                .checked_sub(1)
                .and_then(|p| cosine_or_none(&timed[p].direction, &t.direction)),
            held_out_clip_zero,
            held_out_clip_edited: clip_on_batch(bundle, &held_out, prompt, t.direction.delta(), res)?,
        });
    }
    let times: Vec<f64> = rows.iter().map(|r| r.timing.mean_secs).collect();
    let sorted_input = batch_sizes.windows(2).all(|w| w[0] < w[1]);
    let transfers = rows.iter().all(|r| r.held_out_clip_edited < r.held_out_clip_zero);
    Ok(BatchReport {
        prompt: prompt.to_string(),
        held_out_seed,
        checks: vec![
            check("wall-clock strictly increasing with batch size", sorted_input && strictly_increasing(&times)),
            check("every direction lowers held-out text loss", transfers),
        ],
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub lambda_id: f64,
    pub mean_identity_similarity: f64,
    pub final_clip: f64,
    pub final_loss: f64,
    pub direction_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub prompt: String,
    pub rows: Vec<IdentityRow>,
    pub checks: Vec<Check>,
    /// Per sample image: original followed by one edit per lambda.
    #[serde(skip)]
    pub strips: Vec<ImageTensor>,
}

/// Number of sample images rendered into identity strips.
pub const IDENTITY_STRIP_SAMPLES: usize = 3;

pub fn run_identity_ablation(bundle: &BackendBundle, prompt: &str, lambda_ids: &[f64], bench: &BenchConfig) -> Result<IdentityReport> {
    bench.validate()?;
    if lambda_ids.is_empty() {
        return Err(Error::InvalidInput("no lambda values given".into()));
    }
    if let Some(l) = lambda_ids.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidConfig(format!("lambda_id must be >= 0, got {l}")));
    }
    let base = &bench.base;
    base.validate(bundle.layout())?;
    let styles = bundle.sample_styles(base.batch_size, base.seed)?;
    let results = map_rows(bench.parallel, lambda_ids, |&l| {
        let config = OptimizeConfig {
            lambda_id: l,
            ..base.clone()
        };
        let (d, r) = find_direction(prompt, bundle, &config)?;
        let sim = mean_identity_similarity(bundle, &styles, d.delta(), base.opt_resolution)?;
        Ok((d, r, sim))
    })?;
    let rows: Vec<IdentityRow> = lambda_ids
        .iter()
        .zip(&results)
        .map(|(&l, (d, r, sim))| IdentityRow {
            lambda_id: l,
            mean_identity_similarity: *sim,
            final_clip: r.final_terms().clip,
            final_loss: r.final_loss(),
            direction_norm: d.norm(),
        })
        .collect();

    let full = bundle.layout().max_resolution();
    let mut strips = Vec::new();
    for s in styles.iter().take(IDENTITY_STRIP_SAMPLES) {
        let mut frames = vec![bundle.generator.synthesize(s, full)?];
        for (d, _, _) in &results {
            frames.push(bundle.generator.synthesize(&axpy(s, 1.0, d.delta())?, full)?);
        }
        strips.push(hstack(&frames)?);
    }

    let mut by_lambda: Vec<&IdentityRow> = rows.iter().collect();
    by_lambda.sort_by(|a, b| a.lambda_id.total_cmp(&b.lambda_id));
    let sims: Vec<f64> = by_lambda.iter().map(|r| r.mean_identity_similarity).collect();
    let non_decreasing = sims.windows(2).all(|w| w[0] <= w[1]);
    let ends = match (by_lambda.first(), by_lambda.last()) {
        (Some(lo), Some(hi)) => hi.mean_identity_similarity >= lo.mean_identity_similarity,
        _ => true,
    };
    Ok(IdentityReport {
        prompt: prompt.to_string(),
        checks: vec![
            check("similarity at largest lambda >= at smallest", ends),
            check("similarity non-decreasing in lambda", non_decreasing),
        ],
        rows,
        strips,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: SearchMode,
    pub active_channels: usize,
    /// Mean `|R(G(s + delta)) - R(G(s))|` over the batch.
    pub identity_shift: f64,
    /// Mean change of `<E(G(s)), t>` for the target prompt.
    pub prompt_similarity_gain: f64,
    pub initial: LossTerms,
    pub trace: Vec<LossTerms>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_channel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModeReport {
    pub prompt: String,
    pub positive: String,
    pub negative: String,
    pub multi: ModeRow,
    pub single: ModeRow,
    pub checks: Vec<Check>,
}

fn mode_effects(bundle: &BackendBundle, styles: &[StyleVector], prompt: &str, delta: &StyleVector, res: u32) -> Result<(f64, f64)> {
    let text = bundle.embedder.embed_text(prompt)?;
    let mut shift = 0.0;
    let mut gain = 0.0;
    for s in styles {
        let before = bundle.generator.synthesize(s, res)?;
        let after = bundle.generator.synthesize(&axpy(s, 1.0, delta)?, res)?;
        let (rb, ra) = (bundle.identity.identity_embed(&before)?, bundle.identity.identity_embed(&after)?);
        shift += rb
            .values()
            .iter()
            .zip(ra.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        gain += bundle.embedder.embed_image(&after)?.dot(&text)? - bundle.embedder.embed_image(&before)?.dot(&text)?;
    }
    let n = styles.len() as f64;
    Ok((shift / n, gain / n))
}

/// Multi-channel search for `prompt` against single-channel search for
/// `positive` vs `negative`, both on the base config's batch.
pub fn run_channel_mode_comparison(
    bundle: &BackendBundle,
    prompt: &str,
    positive: &str,
    negative: &str,
    bench: &BenchConfig,
) -> Result<ChannelModeReport> {
    let base = &bench.base;
    let multi_cfg = OptimizeConfig {
        mode: SearchMode::MultiChannel,
        ..base.clone()
    };
    let single_cfg = OptimizeConfig {
        mode: SearchMode::SingleChannel,
        ..base.clone()
    };
    let (dm, rm) = find_direction(prompt, bundle, &multi_cfg)?;
    let (ds, rs) = find_single_channel_direction(positive, negative, bundle, &single_cfg)?;
    let styles = bundle.sample_styles(base.batch_size, base.seed)?;
    let res = base.opt_resolution;
    let row = |mode, d: &Direction, r: &OptimizeReport| -> Result<ModeRow> {
        let (identity_shift, prompt_similarity_gain) = mode_effects(bundle, &styles, prompt, d.delta(), res)?;
        Ok(ModeRow {
            mode,
            active_channels: d.active_channels(),
            identity_shift,
            prompt_similarity_gain,
            initial: r.initial,
            trace: r.trace.clone(),
            selected_channel: r.selected_channel,
        })
    };
    let multi = row(SearchMode::MultiChannel, &dm, &rm)?;
    let single = row(SearchMode::SingleChannel, &ds, &rs)?;
    Ok(ChannelModeReport {
        prompt: prompt.to_string(),
        positive: positive.to_string(),
        negative: negative.to_string(),
        checks: vec![check("single-channel direction has exactly one active coordinate", single.active_channels == 1)],
        multi,
        single,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|c| c.to_string()).unwrap_or_default()
}

fn csv_to_path(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl ResolutionReport {
    /// CSV columns: `resolution,mean_secs,final_loss,direction_norm,cosine_to_previous`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.resolution.to_string(),
                    r.timing.mean_secs.to_string(),
                    r.final_loss.to_string(),
                    r.direction_norm.to_string(),
                    fmt_opt(r.cosine_to_previous),
                ]
            })
            .collect();
        csv_to_path(path, &["resolution", "mean_secs", "final_loss", "direction_norm", "cosine_to_previous"], rows)
    }

    pub fn plot_svg(&self) -> String {
        let labels: Vec<String> = self.rows.iter().map(|r| r.resolution.to_string()).collect();
        let times: Vec<f64> = self.rows.iter().map(|r| r.timing.mean_secs).collect();
        line_plot_svg(&format!("search time vs resolution ({})", self.prompt), "seconds", &labels, &times)
    }
}

impl BatchReport {
    /// CSV columns: `batch_size,mean_secs,final_loss,direction_norm,cosine_to_previous,held_out_clip_zero,held_out_clip_edited`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.batch_size.to_string(),
                    r.timing.mean_secs.to_string(),
                    r.final_loss.to_string(),
                    r.direction_norm.to_string(),
                    fmt_opt(r.cosine_to_previous),
                    r.held_out_clip_zero.to_string(),
                    r.held_out_clip_edited.to_string(),
                ]
            })
            .collect();
        csv_to_path(
            path,
            &["batch_size", "mean_secs", "final_loss", "direction_norm", "cosine_to_previous", "held_out_clip_zero", "held_out_clip_edited"],
            rows,
        )
    }

    pub fn plot_svg(&self) -> String {
        let labels: Vec<String> = self.rows.iter().map(|r| r.batch_size.to_string()).collect();
        let times: Vec<f64> = self.rows.iter().map(|r| r.timing.mean_secs).collect();
        line_plot_svg(&format!("search time vs batch size ({})", self.prompt), "seconds", &labels, &times)
    }
}

impl IdentityReport {
    /// CSV columns: `lambda_id,mean_identity_similarity,final_clip,final_loss,direction_norm`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.lambda_id.to_string(),
                    r.mean_identity_similarity.to_string(),
                    r.final_clip.to_string(),
                    r.final_loss.to_string(),
                    r.direction_norm.to_string(),
                ]
            })
            .collect();
        csv_to_path(path, &["lambda_id", "mean_identity_similarity", "final_clip", "final_loss", "direction_norm"], rows)
    }

    pub fn plot_svg(&self) -> String {
        let labels: Vec<String> = self.rows.iter().map(|r| r.lambda_id.to_string()).collect();
        let sims: Vec<f64> = self.rows.iter().map(|r| r.mean_identity_similarity).collect();
        line_plot_svg(&format!("identity similarity vs lambda_id ({})", self.prompt), "similarity", &labels, &sims)
    }

    /// Writes `strip_<k>.png` per sample image into `dir`.
    pub fn write_strips(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let mut paths = Vec::new();
        for (k, strip) in self.strips.iter().enumerate() {
            let p = dir.join(format!("strip_{k}.png"));
            save_png(&p, strip, BitDepth::Eight)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

impl ChannelModeReport {
    /// CSV columns: `mode,active_channels,identity_shift,prompt_similarity_gain,initial_loss,final_loss`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = [&self.multi, &self.single]
            .iter()
            .map(|r| {
                vec![
                    serde_json::to_value(r.mode).expect("mode serializes").as_str().unwrap_or_default().to_string(),
                    r.active_channels.to_string(),
                    r.identity_shift.to_string(),
                    r.prompt_similarity_gain.to_string(),
                    r.initial.total.to_string(),
                    r.trace.last().map(|t| t.total).unwrap_or(r.initial.total).to_string(),
                ]
            })
            .collect();
        csv_to_path(
            path,
            &["mode", "active_channels", "identity_shift", "prompt_similarity_gain", "initial_loss", "final_loss"],
            rows,
        )
    }
}

/// A minimal single-series line chart with categorical x labels.
pub fn line_plot_svg(title: &str, y_label: &str, x_labels: &[String], values: &[f64]) -> String {
    let (w, h) = (480.0, 320.0);
    let (left, right, top, bottom) = (64.0, 16.0, 36.0, 44.0);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() || hi <= lo {
        hi = lo + 1.0;
    }
    let n = values.len().max(1);
    let x = |i: usize| left + (w - left - right) * (i as f64 + 0.5) / n as f64;
    let y = |v: f64| top + (h - top - bottom) * (1.0 - (v - lo) / (hi - lo));
    let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom,
        h - bottom
    );
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#, left - 6.0, y(v) + 4.0, v);
    }
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        h / 2.0,
        h / 2.0,
        esc(y_label)
    );
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, v)| format!("{:.1},{:.1}", x(i), y(*v)))
        .collect();
    let _ = writeln!(svg, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, points.join(" "));
    for (i, v) in values.iter().enumerate() {
        if v.is_finite() {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#, x(i), y(*v));
        }
        let label = x_labels.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, x(i), h - bottom + 16.0, esc(label));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = line_plot_svg("t<1>", "s", &["a".into(), "b".into()], &[1.0, f64::NAN]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("t&lt;1&gt;"));
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn ordering_helpers() {
        assert!(strictly_increasing(&[1.0, 2.0, 3.0]));
        assert!(!strictly_increasing(&[1.0, 1.0]));
        assert!(strictly_increasing(&[5.0]));
    }
}
