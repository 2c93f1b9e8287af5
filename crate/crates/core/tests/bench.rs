//! Bench report structure. Timing order is asserted by the acceptance
//! suite, which runs alone.

use stylesteer::backends::toy::ToyBackend;
use stylesteer::bench::{
    run_batch_ablation, run_channel_mode_comparison, run_identity_ablation, run_resolution_ablation, BenchConfig,
};
use stylesteer::optimizer::OptimizeConfig;

fn quick(bundle: &stylesteer::backends::BackendBundle) -> BenchConfig {
    BenchConfig {
        runs: 2,
        warmup: 1,
        ..BenchConfig::new(OptimizeConfig {
            batch_size: 8,
            iterations: 5,
            ..OptimizeConfig::for_layout(bundle.layout())
        })
    }
}

fn header(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn resolution_and_batch_reports() {
    let toy = ToyBackend::generate(0).unwrap();
    let bundle = toy.bundle();
    let cfg = quick(&bundle);
    let dir = tempfile::tempdir().unwrap();

    let r = run_resolution_ablation(&bundle, "beard", &[16, 32, 64], &cfg).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert!(r.rows.iter().all(|row| row.timing.runs_secs.len() == 2));
    assert!(r.rows[0].cosine_to_previous.is_none() && r.rows[1].cosine_to_previous.is_some());
    let p = dir.path().join("res.csv");
    r.write_csv(&p).unwrap();
    assert_eq!(header(&p), "resolution,mean_secs,final_loss,direction_norm,cosine_to_previous");
    assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 4);
    assert!(r.plot_svg().contains("<polyline"));
    assert!(run_resolution_ablation(&bundle, "beard", &[48], &cfg).is_err());

    let b = run_batch_ablation(&bundle, "beard", &[4, 8], &cfg).unwrap();
    assert_eq!(b.rows.len(), 2);
    assert!(b.rows.iter().all(|row| row.held_out_clip_edited < row.held_out_clip_zero));
    let p = dir.path().join("batch.csv");
    b.write_csv(&p).unwrap();
    assert!(header(&p).starts_with("batch_size,mean_secs"));
    assert!(run_batch_ablation(&bundle, "beard", &[0], &cfg).is_err());
}

#[test]
fn identity_and_mode_reports() {
    let toy = ToyBackend::generate(0).unwrap();
    let bundle = toy.bundle();
    let cfg = quick(&bundle);
    let dir = tempfile::tempdir().unwrap();

    let id = run_identity_ablation(&bundle, "smile", &[0.0, 10.0], &cfg).unwrap();
    assert_eq!(id.rows.len(), 2);
    assert!(id.checks.iter().all(|c| c.passed), "{:?}", id.checks);
    let strips = id.write_strips(dir.path()).unwrap();
    assert_eq!(strips.len(), 3);
    let full = bundle.layout().max_resolution();
    let strip = stylesteer::imageio::load_png(&strips[0]).unwrap();
    assert_eq!((strip.height(), strip.width()), (full, 3 * full));
    id.write_csv(&dir.path().join("id.csv")).unwrap();
    assert!(run_identity_ablation(&bundle, "smile", &[-1.0], &cfg).is_err());

    let m = run_channel_mode_comparison(&bundle, "smile", "smile", "a face", &cfg).unwrap();
    assert_eq!(m.single.active_channels, 1);
    assert!(m.multi.active_channels > 1);
    assert_eq!(m.multi.trace.len(), 5);
    assert!(m.multi.prompt_similarity_gain > 0.0);
    let p = dir.path().join("modes.csv");
    m.write_csv(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.contains("multi_channel") && text.contains("single_channel"));
}
