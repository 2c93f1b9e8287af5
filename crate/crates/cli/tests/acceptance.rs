//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any fails. Criteria run one after another so the timing
//! checks are not disturbed by concurrent work.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::process::Command;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::toy_oracle::{ReducedProblem, ToyOracle};
use common::{cosine, rel_err};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stylesteer::backends::toy::{ToyBackend, ToyParams, ToySpec, VocabEntry};
use stylesteer::backends::{loss_gradient, BackendBundle, LossFunctional};
use stylesteer::bench::{mean_identity_similarity, run_batch_ablation, run_resolution_ablation, BenchConfig};
use stylesteer::manipulator::{manipulate, sweep};
use stylesteer::optimizer::{
    composite_loss, find_direction, find_single_channel_direction, OptimizeConfig, SearchMode,
};
use stylesteer::store::{DirectionStore, FaultPoint, ListFilter};
use stylesteer::style_space::{axpy, default_mask, ChannelMask, Direction, LayerKind, PromptSpec, StyleVector};
use stylesteer::ErrorKind;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn toy() -> ToyBackend {
    ToyBackend::generate(0).expect("toy backend")
}

fn random_vector(bundle: &BackendBundle, rng: &mut ChaCha8Rng, scale: f64) -> StyleVector {
    let n = bundle.layout().total_channels();
    let values = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    StyleVector::from_values(bundle.layout().clone(), values).unwrap()
}

/// Analytic loss gradients against central differences, 5 pairs x 24
/// coordinates x 4 functionals.
fn gradient_oracle() -> Outcome {
    const RES: u32 = 32;
    const H: f64 = 1e-5;
    let toy = toy();
    let bundle = toy.bundle();
    let layout = bundle.layout().clone();
    let mask = ChannelMask::all(&layout);
    let active = layout.channels_up_to(RES);
    let text = bundle.embedder.embed_text("beard").map_err(|e| e.to_string())?;
    let neg = bundle.embedder.embed_text("a face").map_err(|e| e.to_string())?;
    let functionals = [
        ("clip", LossFunctional::Clip { text: text.clone() }),
        ("identity", LossFunctional::Identity),
        ("composite", LossFunctional::Composite { text: text.clone(), lambda_c: 1.0, lambda_id: 0.7 }),
        ("single", LossFunctional::SingleChannel { positive: text, negative: neg, normalized: false }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for pair in 0..5u64 {
        let batch = bundle.sample_styles(2, 40 + pair).unwrap();
        let delta = random_vector(&bundle, &mut rng, 0.05);
        let coords: Vec<usize> = (0..24).map(|_| rng.random_range(0..active)).collect();
        for (name, f) in &functionals {
            let (_, grad) = loss_gradient(&bundle, &batch, &delta, f, &mask, RES).map_err(|e| e.to_string())?;
            let scale = grad.values().iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for &c in &coords {
                let mut e = vec![0.0; layout.total_channels()];
                e[c] = 1.0;
                let e = StyleVector::from_values(layout.clone(), e).unwrap();
                let at = |h: f64| loss_gradient(&bundle, &batch, &axpy(&delta, h, &e).unwrap(), f, &mask, RES).unwrap().0.total;
                let fd = (at(H) - at(-H)) / (2.0 * H);
                let err = rel_err(grad.values()[c], fd, 1e-6 * scale.max(1e-12));
                worst = worst.max(err);
                checked += 1;
                ensure(err <= 1e-3, || format!("{name} pair {pair} coord {c}: analytic {} vs fd {fd}", grad.values()[c]))?;
            }
        }
    }
    Ok(format!("{checked} derivatives, worst relative error {worst:.1e} (limit 1e-3)"))
}

/// Default search, 100 iterations, against the converged gradient-descent
/// oracle on the reduced problem.
fn direction_recovery() -> Outcome {
    let toy = toy();
    let bundle = toy.bundle();
    let oracle = ToyOracle::new(&toy.params);
    let config = OptimizeConfig { iterations: 100, ..OptimizeConfig::for_layout(bundle.layout()) };
    let styles = oracle.batch(config.batch_size, config.seed);
    let mask = oracle.mask(config.opt_resolution, config.exclude_trgb, config.exclude_top_blocks);
    let mut worst = 1.0f64;
    for prompt in ["beard", "smile", "old"] {
        let reduced = ReducedProblem::new(
            &oracle,
            &styles,
            &mask,
            config.opt_resolution,
            oracle.text(prompt),
            config.lambda_c,
            config.lambda_id,
        );
        let (x, _, grad_norm, _) = reduced.descend(1e-6, 100_000);
        ensure(grad_norm < 1e-6, || format!("{prompt}: oracle did not converge ({grad_norm:.1e})"))?;
        let expected = reduced.expand(&x, oracle.n());
        let (d, _) = find_direction(prompt, &bundle, &config).map_err(|e| e.to_string())?;
        let c = cosine(d.delta().values(), &expected);
        worst = worst.min(c);
        ensure(c >= 0.99, || format!("{prompt}: cosine {c:.4}"))?;
    }
    Ok(format!("3 prompts, {} iterations, min cosine {worst:.4} (limit 0.99)", config.iterations))
}

fn zero_strength_identity() -> Outcome {
    let toy = toy();
    let bundle = toy.bundle();
    let layout = bundle.layout().clone();
    let resolutions: Vec<u32> = layout.resolutions().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for k in 0..50 {
        let s = random_vector(&bundle, &mut rng, 0.1);
        let mask = default_mask(&layout, true, rng.random_range(0..4)).unwrap();
        let values = (0..layout.total_channels())
            .map(|i| if mask.is_included(i) { 0.3 * rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
            .collect();
        let d = Direction::new(
            StyleVector::from_values(layout.clone(), values).unwrap(),
            mask,
            PromptSpec::single("beard"),
            OptimizeConfig::for_layout(&layout),
            bundle.fingerprint(),
            chrono::DateTime::UNIX_EPOCH,
        )
        .unwrap();
        let r = resolutions[k % resolutions.len()];
        let base = bundle.generator.synthesize(&s, r).unwrap();
        ensure(manipulate(&bundle, &s, &d, 0.0, r).unwrap().bit_eq(&base), || format!("case {k}: manipulate differs"))?;
        let frames = sweep(&bundle, &s, &d, &[-1.0, 0.0, 1.0], r).unwrap();
        ensure(frames[1].bit_eq(&base), || format!("case {k}: sweep alpha=0 differs"))?;
    }
    Ok("50 random (s, d) pairs bit-identical, sweep middle frames too".into())
}

fn mask_hardness() -> Outcome {
    let toy = toy();
    let bundle = toy.bundle();
    let layout = bundle.layout().clone();
    let n_blocks = layout.blocks().len();
    let mut searches = 0;
    for exclude_top in [0usize, 2, 4] {
        let config = OptimizeConfig { batch_size: 16, exclude_top_blocks: exclude_top, ..OptimizeConfig::for_layout(&layout) };
        let (multi, _) = find_direction("beard", &bundle, &config).map_err(|e| e.to_string())?;
        let single_cfg = OptimizeConfig { mode: SearchMode::SingleChannel, ..config.clone() };
        let (single, _) =
            find_single_channel_direction("beard", "a face", &bundle, &single_cfg).map_err(|e| e.to_string())?;
        for (mode, d) in [("multi", &multi), ("single", &single)] {
            searches += 1;
            for l in layout.layers() {
                if l.kind == LayerKind::ToRgb || l.block + exclude_top >= n_blocks {
                    for i in l.range() {
                        ensure(d.delta().values()[i].to_bits() == 0, || {
                            format!("{mode}, exclude_top {exclude_top}: channel {i} = {}", d.delta().values()[i])
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("{searches} searches, all tRGB and excluded-block channels exactly +0.0"))
}

fn identity_effect() -> Outcome {
    let toy = toy();
    let bundle = toy.bundle();
    let base = OptimizeConfig::for_layout(bundle.layout());
    let full = bundle.layout().max_resolution();
    let (mut strict, mut cases) = (0, 0);
    for prompt in ["beard", "smile", "old"] {
        for seed in 0..3u64 {
            let styles = bundle.sample_styles(base.batch_size, seed).unwrap();
            let sim = |lambda_id: f64| -> Result<f64, String> {
                let cfg = OptimizeConfig { lambda_id, seed, ..base.clone() };
                let (d, _) = find_direction(prompt, &bundle, &cfg).map_err(|e| e.to_string())?;
                mean_identity_similarity(&bundle, &styles, d.delta(), full).map_err(|e| e.to_string())
            };
            let (s0, s10) = (sim(0.0)?, sim(10.0)?);
            ensure(s10 >= s0, || format!("{prompt} seed {seed}: sim(10) {s10:.6} < sim(0) {s0:.6}"))?;
            cases += 1;
            if s10 > s0 {
                strict += 1;
            }
        }
    }
    ensure(strict >= 7, || format!("only {strict}/{cases} strict"))?;
    Ok(format!("sim(10) >= sim(0) in {cases}/{cases}, strict in {strict}/{cases} (need 7)"))
}

fn global_transfer() -> Outcome {
    let toy = toy();
    let bundle = toy.bundle();
    let base = OptimizeConfig::for_layout(bundle.layout());
    let clip_only = OptimizeConfig { lambda_id: 0.0, ..base.clone() };
    let zero = StyleVector::zeros_like(bundle.layout());
    let prompts = ["beard", "smile", "old", "blonde hair", "curly hair"];
    let mut gains = Vec::new();
    for (k, (a, b)) in [(0u64, 100u64), (1, 101), (2, 102), (3, 103), (4, 104)].into_iter().enumerate() {
        let prompt = prompts[k];
        let (d, _) = find_direction(prompt, &bundle, &OptimizeConfig { seed: a, ..base.clone() }).map_err(|e| e.to_string())?;
        let fresh = bundle.sample_styles(base.batch_size, b).unwrap();
        let before = composite_loss(&bundle, &fresh, &zero, prompt, &clip_only).map_err(|e| e.to_string())?;
        let after = composite_loss(&bundle, &fresh, d.delta(), prompt, &clip_only).map_err(|e| e.to_string())?;
        ensure(after < before, || format!("{prompt} ({a} -> {b}): {before:.6} -> {after:.6}"))?;
        gains.push(format!("{:.3}", before - after));
    }
    Ok(format!("5 pairs reduce held-out clip loss by [{}]", gains.join(", ")))
}

fn ordinal_timing() -> Outcome {
    let toy = toy();
    let bundle = toy.bundle();
    let cfg = BenchConfig::new(OptimizeConfig::for_layout(bundle.layout()));
    let res = run_resolution_ablation(&bundle, "beard", &[16, 32, 64], &cfg).map_err(|e| e.to_string())?;
    let res_t: Vec<f64> = res.rows.iter().map(|r| r.timing.mean_secs).collect();
    let batch = run_batch_ablation(&bundle, "beard", &[4, 16, 64], &cfg).map_err(|e| e.to_string())?;
    let batch_t: Vec<f64> = batch.rows.iter().map(|r| r.timing.mean_secs).collect();
    let fmt = |v: &[f64]| v.iter().map(|t| format!("{t:.3}s")).collect::<Vec<_>>().join(" < ");
    ensure(res_t.windows(2).all(|w| w[0] < w[1]), || format!("resolution 16,32,64: {res_t:?}"))?;
    ensure(batch_t.windows(2).all(|w| w[0] < w[1]), || format!("batch 4,16,64: {batch_t:?}"))?;
    Ok(format!("res 16/32/64: {}; batch 4/16/64: {} (5 warm runs each)", fmt(&res_t), fmt(&batch_t)))
}

const UP: &str = "planted up";
const DOWN: &str = "planted down";

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Boosts one searchable channel's pattern 5x and adds a prompt pair whose
/// difference points along that channel's batch-mean projected joint column.
fn planted(seed: u64, pick: usize, config: &OptimizeConfig) -> (ToyParams, usize) {
    let mut params = ToyParams::generate(&ToySpec::default(), seed).unwrap();
    let oracle = ToyOracle::new(&params);
    let mask = oracle.mask(config.opt_resolution, config.exclude_trgb, config.exclude_top_blocks);
    let channel = (0..oracle.n()).filter(|&c| mask[c]).nth(pick).unwrap();
    let ch = oracle.channels[channel].clone();
    for v in params.patterns[ch.layer][ch.index_in_layer].color.iter_mut() {
        *v *= 5.0;
    }
    let oracle = ToyOracle::new(&params);
    let styles = oracle.batch(config.batch_size, config.seed);
    let dim = params.joint.dim;
    let probe = ReducedProblem::new(&oracle, &styles, &mask, config.opt_resolution, vec![0.0; dim], 1.0, 0.0);
    let k = probe.coords.iter().position(|&c| c == channel).unwrap();
    let mut q = vec![0.0; dim];
    for v in &probe.base_joint {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let e: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let a: Vec<f64> = probe.bj.iter().map(|row| row[k]).collect();
        let ea: f64 = e.iter().zip(&a).map(|(x, y)| x * y).sum();
        for r in 0..dim {
            q[r] += (a[r] - e[r] * ea) / nv;
        }
    }
    let q = unit(q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut w: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let wq: f64 = w.iter().zip(&q).map(|(a, b)| a * b).sum();
    for (x, y) in w.iter_mut().zip(&q) {
        *x -= wq * y;
    }
    let w = unit(w);
    params.vocabulary.push(VocabEntry { prompt: UP.into(), embedding: unit(w.iter().zip(&q).map(|(a, b)| a + b).collect()) });
    params.vocabulary.push(VocabEntry { prompt: DOWN.into(), embedding: unit(w.iter().zip(&q).map(|(a, b)| a - b).collect()) });
    (params, channel)
}

/// The channel whose best one-dimensional line search lowers the loss most.
fn exhaustive_best(params: &ToyParams, config: &OptimizeConfig) -> usize {
    let oracle = ToyOracle::new(params);
    let styles = oracle.batch(config.batch_size, config.seed);
    let mask = oracle.mask(config.opt_resolution, config.exclude_trgb, config.exclude_top_blocks);
    let target: Vec<f64> = oracle.text(UP).iter().zip(oracle.text(DOWN)).map(|(a, b)| a - b).collect();
    let problem = ReducedProblem::new(&oracle, &styles, &mask, config.opt_resolution, target, 1.0, 0.0);
    let m = problem.coords.len();
    let steps: Vec<f64> = (0..40).map(|i| 1e-3 * 1.3f64.powi(i)).collect();
    let score = |k: usize| {
        steps
            .iter()
            .flat_map(|&t| [t, -t])
            .map(|t| {
                let mut x = vec![0.0; m];
                x[k] = t;
                problem.eval(&x).0.total
            })
            .fold(f64::INFINITY, f64::min)
    };
    let best = (0..m).min_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap();
    problem.coords[best]
}

fn single_channel_structure() -> Outcome {
    let base = toy();
    let config = OptimizeConfig {
        mode: SearchMode::SingleChannel,
        batch_size: 32,
        ..OptimizeConfig::for_layout(base.bundle().layout())
    };
    let mut picked = Vec::new();
    for (seed, pick) in [(0u64, 3usize), (1, 10), (2, 17)] {
        let (params, channel) = planted(seed, pick, &config);
        let oracle_best = exhaustive_best(&params, &config);
        ensure(oracle_best == channel, || format!("seed {seed}: oracle prefers {oracle_best}, planted {channel}"))?;
        let toy = ToyBackend::new(params).unwrap();
        let (d, _) = find_single_channel_direction(UP, DOWN, &toy.bundle(), &config).map_err(|e| e.to_string())?;
        let nonzero: Vec<usize> = (0..d.delta().len()).filter(|&i| d.delta().values()[i] != 0.0).collect();
        ensure(nonzero == vec![channel], || format!("seed {seed}: nonzero {nonzero:?}, planted {channel}"))?;
        picked.push(channel);
    }
    let bundle = base.bundle();
    for (pos, neg) in [("smile", "a face"), ("old", "young")] {
        let (d, _) = find_single_channel_direction(pos, neg, &bundle, &config).map_err(|e| e.to_string())?;
        ensure(d.delta().count_nonzero() == 1, || format!("{pos} vs {neg}: {} nonzero", d.delta().count_nonzero()))?;
    }
    Ok(format!("planted channels {picked:?} recovered; unplanted pairs keep exactly one coordinate"))
}

fn persistence() -> Outcome {
    let toy = toy();
    let bundle = toy.bundle();
    let config = OptimizeConfig { batch_size: 8, iterations: 10, ..OptimizeConfig::for_layout(bundle.layout()) };
    let (d, report) = find_direction("beard", &bundle, &config).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().unwrap();
    let crash = Arc::new(AtomicBool::new(false));
    let flag = crash.clone();
    let store = DirectionStore::open(tmp.path()).unwrap().with_fault_hook(Arc::new(move |_: &FaultPoint| {
        if flag.load(Ordering::SeqCst) {
            Err(std::io::Error::other("injected crash"))
        } else {
            Ok(())
        }
    }));
    let id = store.save_direction(&d, &report).map_err(|e| e.to_string())?;
    let loaded = store.load_direction(&id).map_err(|e| e.to_string())?;
    let bits = |d: &Direction| d.delta().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&loaded.direction) == bits(&d) && loaded.direction == d, || "round trip differs".into())?;

    let path = store.record_path(&d.backend_fingerprint, &id).unwrap();
    let clean = fs::read(&path).unwrap();
    let positions: Vec<usize> = (0..clean.len()).step_by((clean.len() / 200).max(1)).chain([clean.len() - 1]).collect();
    for &pos in &positions {
        let mut bad = clean.clone();
        bad[pos] ^= 0x01;
        fs::write(&path, &bad).unwrap();
        let kind = store.load_direction(&id).err().map(|e| e.kind());
        ensure(kind == Some(ErrorKind::Integrity), || format!("flip at byte {pos}: {kind:?}"))?;
    }
    fs::write(&path, &clean).unwrap();

    crash.store(true, Ordering::SeqCst);
    ensure(store.save_direction(&d, &report).is_err(), || "injected crash did not abort the save".into())?;
    let listed = store.list_directions(&ListFilter::default()).map_err(|e| e.to_string())?;
    ensure(listed.len() == 1 && listed[0].id == id, || format!("after crash: {} records", listed.len()))?;
    crash.store(false, Ordering::SeqCst);
    let again = store.save_direction(&d, &report).map_err(|e| e.to_string())?;
    let leftovers = fs::read_dir(path.parent().unwrap())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
        .count();
    ensure(leftovers == 0, || format!("{leftovers} temporary files left"))?;
    ensure(store.load_direction(&again).is_ok(), || "save after crash unreadable".into())?;
    Ok(format!("bit-exact round trip, {} single-byte flips rejected, crash leaves no record", positions.len()))
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a.dir", "b.dir"] {
        let out = Command::new(env!("CARGO_BIN_EXE_stylesteer"))
            .args(["find", "--prompt", "beard", "--backend", "toy", "--seed", "7", "--out", name])
            .current_dir(tmp.path())
            .env_remove("SOURCE_DATE_EPOCH")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        outputs.push(fs::read(tmp.path().join(name)).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "exports differ".into())?;
    Ok(format!("two `find --seed 7` runs wrote identical {}-byte files", outputs[0].len()))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("gradient oracle", Duration::from_secs(10), gradient_oracle),
        ("direction recovery", Duration::from_secs(30), direction_recovery),
        ("zero-strength identity", Duration::from_secs(10), zero_strength_identity),
        ("mask hardness", Duration::MAX, mask_hardness),
        ("identity-loss effect", Duration::from_secs(60), identity_effect),
        ("global transfer", Duration::from_secs(60), global_transfer),
        ("ordinal timing", Duration::from_secs(120), ordinal_timing),
        ("single-channel structure", Duration::MAX, single_channel_structure),
        ("persistence", Duration::MAX, persistence),
        ("cli determinism", Duration::MAX, cli_determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.1?}, budget {budget:.0?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({:.1}s): {detail}", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({:.1}s): {detail}", elapsed.as_secs_f64());
            }
        }
    }
    println!("{} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
