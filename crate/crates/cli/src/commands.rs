use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, TimeZone, Utc};
use clap::ArgMatches;
use serde::Serialize;
use serde_json::json;

use stylesteer::backends::{resolve_backend, BackendBundle, ImageTensor};
use stylesteer::bench::{
    run_batch_ablation, run_channel_mode_comparison, run_identity_ablation, run_resolution_ablation, BenchConfig,
    Check,
};
use stylesteer::clock;
use stylesteer::error::Error;
use stylesteer::imageio::{hstack, load_png, save_png, BitDepth};
use stylesteer::manipulator::{apply, seed_style, sweep, ManipulationRequest, StyleSource};
use stylesteer::optimizer::{
    find_direction_with, find_single_channel_direction_with, OptimizeConfig, OptimizeReport, Progress, SearchMode,
    SearchOptions,
};
use stylesteer::store::{
    export_id, read_direction_file, write_direction_file, write_style_file, DirectionStore, ListFilter,
    ReportSummary, DIRECTION_EXT,
};
use stylesteer::store::read_style_file;
use stylesteer::style_space::{Direction, StyleVector};

use crate::args::{
    ApplyArgs, BenchArgs, BenchKind, Cli, Command, ConfigArgs, FindArgs, InvertArgs, ListArgs, ServeArgs, SourceArgs,
    SweepArgs,
};

pub fn run(cli: Cli, matches: &ArgMatches) -> anyhow::Result<()> {
    let ctx = Ctx {
        backend: cli.backend,
        store: cli.store,
    };
    match cli.command {
        Command::Find(a) => find(&ctx, a, matches),
        Command::Apply(a) => apply_cmd(&ctx, a),
        Command::Sweep(a) => sweep_cmd(&ctx, a),
        Command::Invert(a) => invert(&ctx, a),
        Command::Bench(a) => bench(&ctx, a, matches),
        Command::Serve(a) => serve(&ctx, a),
        Command::List(a) => list(&ctx, a),
    }
}

/// Global flags. The store is opened on demand so commands that never touch
/// it do not create its directory.
struct Ctx {
    backend: String,
    store: PathBuf,
}

impl Ctx {
    fn bundle(&self) -> anyhow::Result<BackendBundle> {
        resolve_backend(&self.backend).with_context(|| format!("backend {:?}", self.backend))
    }

    fn store(&self) -> anyhow::Result<DirectionStore> {
        Ok(DirectionStore::open(&self.store)?)
    }
}

fn print_line(value: serde_json::Value) {
    println!("{value}");
}

fn layered_config(bundle: &BackendBundle, args: &ConfigArgs, matches: &ArgMatches) -> anyhow::Result<OptimizeConfig> {
    let overrides = args.overrides(matches)?;
    Ok(OptimizeConfig::for_layout(bundle.layout()).overlay(&overrides)?)
}

/// Exports carry no wall-clock state: the timestamp is `SOURCE_DATE_EPOCH`
/// or the Unix epoch.
fn export_time() -> DateTime<Utc> {
    std::env::var(clock::SOURCE_DATE_EPOCH)
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|secs| Utc.timestamp_opt(secs, 0).single())
        .unwrap_or(DateTime::UNIX_EPOCH)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_trace(path: &Path, report: &OptimizeReport) -> anyhow::Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    report.write_trace_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

fn find(ctx: &Ctx, a: FindArgs, matches: &ArgMatches) -> anyhow::Result<()> {
    let bundle = ctx.bundle()?;
    let mut config = layered_config(&bundle, &a.config, matches)?;
    let overrides = a.config.overrides(matches)?;
    let explicit_mode = overrides.get("mode").is_some();
    let wanted = if a.prompt_neg.is_some() {
        SearchMode::SingleChannel
    } else {
        SearchMode::MultiChannel
    };
    if explicit_mode && config.mode != wanted {
        return Err(crate::usage(format!(
            "config mode {:?} conflicts with the prompts given (single-channel needs --prompt-neg)",
            config.mode
        )));
    }
    config.mode = wanted;
    config.validate(bundle.layout())?;

    let created_at = if a.out.is_some() { export_time() } else { clock::now() };
    let mut progress = |p: &Progress| {
        tracing::info!(iteration = p.iteration, iterations = p.iterations, loss = p.loss.total, "progress");
    };
    let options = SearchOptions {
        created_at: Some(created_at),
        progress: Some(&mut progress),
    };
    let result = match &a.prompt_neg {
        Some(neg) => find_single_channel_direction_with(&a.prompt, neg, &bundle, &config, options),
        None => find_direction_with(&a.prompt, &bundle, &config, options),
    };
    let (direction, report) = match result {
        Ok(r) => r,
        Err(Error::Divergence { reason, report }) => {
            let path = match (&a.report, &a.out) {
                (Some(p), _) => p.clone(),
                (None, Some(out)) => out.with_extension("report.json"),
                (None, None) => {
                    let dir = ctx.store.join("reports");
                    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    dir.join(format!("{}.report.json", uuid::Uuid::new_v4()))
                }
            };
            write_json(&path, &report)?;
            if let Some(t) = &a.trace_csv {
                write_trace(t, &report)?;
            }
            let shown = path.display().to_string();
            return Err(crate::diverged(Error::Divergence { reason, report }, shown));
        }
        Err(e) => return Err(e.into()),
    };

    let summary = ReportSummary::from(&report);
    let (id, path) = match &a.out {
        Some(out) => {
            let id = export_id(&direction);
            write_direction_file(out, &id, &direction, &summary)?;
            (id, out.clone())
        }
        None => {
            let store = ctx.store()?;
            let id = store.save_direction(&direction, &report)?;
            let path = store.record_path(&direction.backend_fingerprint, &id)?;
            (id, path)
        }
    };
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    if let Some(t) = &a.trace_csv {
        write_trace(t, &report)?;
    }
    print_line(json!({
        "id": id,
        "path": path,
        "prompt": direction.prompt,
        "lambda_id": direction.hyperparams.lambda_id,
        "initial_loss": report.initial_loss(),
        "final_loss": report.final_loss(),
        "active_channels": direction.active_channels(),
        "direction_norm": direction.norm(),
        "wall_clock_secs": report.wall_clock_secs,
    }));
    Ok(())
}

/// An existing path (or anything ending in `.dir`) is read as a file,
/// anything else is a store id.
fn load_direction(ctx: &Ctx, spec: &str) -> anyhow::Result<Direction> {
    let path = Path::new(spec);
    let is_file = path.extension().is_some_and(|e| e == DIRECTION_EXT) || path.is_file();
    let record = if is_file {
        read_direction_file(path)?
    } else {
        ctx.store()?.load_direction(spec)?
    };
    Ok(record.direction)
}

fn resolve_source(source: &SourceArgs) -> anyhow::Result<StyleSource> {
    Ok(match (&source.style_file, &source.image) {
        (Some(p), _) => StyleSource::Style(read_style_file(p)?),
        (_, Some(p)) => StyleSource::Image(load_png(p)?),
        _ => StyleSource::Seed(source.seed.unwrap_or(0)),
    })
}

fn apply_cmd(ctx: &Ctx, a: ApplyArgs) -> anyhow::Result<()> {
    let bundle = ctx.bundle()?;
    let depth = BitDepth::from_bits(a.bits)?;
    let direction = load_direction(ctx, &a.direction)?;
    let request = ManipulationRequest {
        source: resolve_source(&a.source)?,
        alpha: a.alpha,
        out_resolution: a.res.unwrap_or_else(|| bundle.layout().max_resolution()),
    };
    let out = apply(&bundle, &direction, &request, None)?;
    save_png(&a.out, &out.image, depth)?;
    print_line(json!({ "out": a.out, "alpha": a.alpha, "resolution": request.out_resolution }));
    Ok(())
}

fn source_style(bundle: &BackendBundle, source: StyleSource) -> anyhow::Result<StyleVector> {
    Ok(match source {
        StyleSource::Seed(seed) => seed_style(bundle, seed)?,
        StyleSource::Style(s) => s,
        StyleSource::Image(img) => bundle.inverter()?.invert_image(&img)?,
    })
}

fn sweep_cmd(ctx: &Ctx, a: SweepArgs) -> anyhow::Result<()> {
    let bundle = ctx.bundle()?;
    let depth = BitDepth::from_bits(a.bits)?;
    if a.alphas.iter().any(|x| !x.is_finite()) {
        return Err(crate::usage("alphas must be finite"));
    }
    let direction = load_direction(ctx, &a.direction)?;
    let s = source_style(&bundle, resolve_source(&a.source)?)?;
    let res = a.res.unwrap_or_else(|| bundle.layout().max_resolution());
    let frames = sweep(&bundle, &s, &direction, &a.alphas, res)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut files = Vec::with_capacity(frames.len());
    for (k, (frame, alpha)) in frames.iter().zip(&a.alphas).enumerate() {
        let path = a.out_dir.join(format!("alpha_{k:02}.png"));
        save_png(&path, frame, depth)?;
        files.push(json!({ "alpha": alpha, "path": path }));
    }
    let strip_path = a.out_dir.join("strip.png");
    save_png(&strip_path, &hstack(&frames)?, depth)?;
    print_line(json!({ "frames": files, "strip": strip_path }));
    Ok(())
}

fn rms(a: &ImageTensor, b: &ImageTensor) -> f64 {
    let n = a.data().len().max(1) as f64;
    let ss: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / n).sqrt()
}

fn invert(ctx: &Ctx, a: InvertArgs) -> anyhow::Result<()> {
    let bundle = ctx.bundle()?;
    let img = load_png(&a.image)?;
    if img.height() != img.width() {
        return Err(crate::usage(format!("image must be square, got {}x{}", img.width(), img.height())));
    }
    let style = bundle.inverter()?.invert_image(&img)?;
    let recon = bundle.generator.synthesize(&style, img.height())?;
    write_style_file(&a.out, &style)?;
    if let Some(p) = &a.recon {
        save_png(p, &recon, BitDepth::Sixteen)?;
    }
    print_line(json!({
        "out": a.out,
        "max_abs_error": img.max_abs_diff(&recon),
        "rms_error": rms(&img, &recon),
    }));
    Ok(())
}

fn bench(ctx: &Ctx, a: BenchArgs, matches: &ArgMatches) -> anyhow::Result<()> {
    let bundle = ctx.bundle()?;
    let base = layered_config(&bundle, &a.config, matches)?;
    let mut cfg = BenchConfig::new(base);
    cfg.runs = a.runs;
    cfg.warmup = a.warmup;
    cfg.parallel = a.parallel;
    let dir = &a.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write_svg = |name: &str, svg: String| -> anyhow::Result<()> {
        let p = dir.join(name);
        fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
        Ok(())
    };
    let mut checks: Vec<(String, Check)> = Vec::new();
    let all = a.kind == BenchKind::All;
    if all || a.kind == BenchKind::Resolution {
        let r = run_resolution_ablation(&bundle, &a.prompt, &a.resolutions, &cfg)?;
        r.write_csv(&dir.join("resolution.csv"))?;
        write_svg("resolution.svg", r.plot_svg())?;
        write_json(&dir.join("resolution.json"), &r)?;
        checks.extend(r.checks.iter().map(|c| ("resolution".to_string(), c.clone())));
    }
    if all || a.kind == BenchKind::Batch {
        let r = run_batch_ablation(&bundle, &a.prompt, &a.batches, &cfg)?;
        r.write_csv(&dir.join("batch.csv"))?;
        write_svg("batch.svg", r.plot_svg())?;
        write_json(&dir.join("batch.json"), &r)?;
        checks.extend(r.checks.iter().map(|c| ("batch".to_string(), c.clone())));
    }
    if all || a.kind == BenchKind::Identity {
        let r = run_identity_ablation(&bundle, &a.prompt, &a.lambdas, &cfg)?;
        r.write_csv(&dir.join("identity.csv"))?;
        write_svg("identity.svg", r.plot_svg())?;
        write_json(&dir.join("identity.json"), &r)?;
        r.write_strips(dir)?;
        checks.extend(r.checks.iter().map(|c| ("identity".to_string(), c.clone())));
    }
    if all || a.kind == BenchKind::Modes {
        let r = run_channel_mode_comparison(&bundle, &a.prompt, &a.positive, &a.negative, &cfg)?;
        r.write_csv(&dir.join("modes.csv"))?;
        write_json(&dir.join("modes.json"), &r)?;
        checks.extend(r.checks.iter().map(|c| ("modes".to_string(), c.clone())));
    }
    let checks: Vec<_> = checks
        .into_iter()
        .map(|(ablation, c)| json!({ "ablation": ablation, "name": c.name, "passed": c.passed }))
        .collect();
    print_line(json!({ "out_dir": dir, "checks": checks }));
    Ok(())
}

fn serve(ctx: &Ctx, a: ServeArgs) -> anyhow::Result<()> {
    let bundle = ctx.bundle()?;
    let store = ctx.store()?;
    let config = stylesteer_service::ServiceConfig {
        workers: a.workers,
        queue_capacity: a.queue,
        max_upload_bytes: a.max_upload_bytes,
    };
    if a.workers == 0 || a.queue == 0 {
        return Err(crate::usage("--workers and --queue must be at least 1"));
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?;
    runtime.block_on(stylesteer_service::run(a.addr, bundle, store, config))?;
    Ok(())
}

const LIST_HEADER: [&str; 8] = ["id", "created_at", "prompt", "lambda_id", "res", "channels", "final_loss", "backend"];

fn list(ctx: &Ctx, a: ListArgs) -> anyhow::Result<()> {
    let store = ctx.store()?;
    let filter = ListFilter {
        prompt: a.prompt,
        fingerprint: a.fingerprint,
    };
    let records = store.list_directions(&filter)?;
    if a.json {
        for r in &records {
            println!("{}", serde_json::to_string(r)?);
        }
        return Ok(());
    }
    println!("{}", LIST_HEADER.join("\t"));
    for r in &records {
        let prompt = match &r.prompt {
            stylesteer::style_space::PromptSpec::Single { text } => text.clone(),
            stylesteer::style_space::PromptSpec::Contrastive { positive, negative } => {
                format!("{positive} vs {negative}")
            }
        };
        let fingerprint: String = r.backend_fingerprint.chars().take(12).collect();
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}",
            r.id, r.created_at, prompt, r.lambda_id, r.opt_resolution, r.active_channels, r.final_loss, fingerprint
        );
    }
    Ok(())
}
