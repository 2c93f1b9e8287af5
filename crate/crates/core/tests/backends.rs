//! Toy backend contract: oracle agreement, truncation, determinism.

mod common;

use common::toy_oracle::ToyOracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stylesteer::backends::toy::{ToyBackend, ToyParams, ToySpec};
use stylesteer::backends::{resolve_backend, Generator, ImageTensor};
use stylesteer::style_space::{LayerKind, StyleVector};
use stylesteer::Error;

#[test]
fn synthesis_and_embeddings_match_the_oracle() {
    let toy = ToyBackend::generate(2).unwrap();
    let bundle = toy.bundle();
    let oracle = ToyOracle::new(&toy.params);
    let styles = bundle.sample_styles(4, 8).unwrap();
    for (lib, raw) in styles.iter().zip(oracle.batch(4, 8)) {
        let worst = lib.values().iter().zip(&raw).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12);
        for res in oracle.resolutions.clone() {
            let img = bundle.generator.synthesize(lib, res).unwrap();
            let want = oracle.image(&raw, res);
            let worst = img.data().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-10, "res {res}: {worst}");
            let (j, i) = oracle.raw_embeddings(&raw, res);
            let unit = |v: Vec<f64>| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect::<Vec<_>>()
            };
            let e = bundle.embedder.embed_image(&img).unwrap();
            let r = bundle.identity.identity_embed(&img).unwrap();
            for (a, b) in e.values().iter().zip(unit(j)) {
                assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in r.values().iter().zip(unit(i)) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!((e.norm() - 1.0).abs() < 1e-5 && (r.norm() - 1.0).abs() < 1e-5);
        }
    }
}

#[test]
fn truncated_synthesis_ignores_higher_blocks() {
    let toy = ToyBackend::generate(0).unwrap();
    let bundle = toy.bundle();
    let layout = bundle.layout().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = bundle.sample_styles(1, 3).unwrap().remove(0);
    for res in layout.resolutions() {
        let cut = layout.channels_up_to(res);
        let mut v = s.values().to_vec();
        for x in &mut v[cut..] {
            *x += rng.random_range(-5.0..5.0);
        }
        let perturbed = StyleVector::from_values(layout.clone(), v).unwrap();
        let a = bundle.generator.synthesize(&s, res).unwrap();
        let b = bundle.generator.synthesize(&perturbed, res).unwrap();
        assert!(a.bit_eq(&b), "resolution {res}");
        assert_eq!((a.height(), a.width()), (res, res));
    }
}

#[test]
fn every_block_contributes_through_its_rgb_layer() {
    let toy = ToyBackend::generate(0).unwrap();
    let bundle = toy.bundle();
    let layout = bundle.layout().clone();
    let full = layout.max_resolution();
    let zero = StyleVector::zeros_like(&layout);
    let base = bundle.generator.synthesize(&zero, full).unwrap();
    for l in layout.layers().iter().filter(|l| l.kind == LayerKind::ToRgb) {
        let mut v = vec![0.0; layout.total_channels()];
        v[l.offset] = 1.0;
        let img = bundle.generator.synthesize(&StyleVector::from_values(layout.clone(), v).unwrap(), full).unwrap();
        assert!(!img.bit_eq(&base), "block at {} has no effect", l.resolution);
    }
}

#[test]
fn backends_are_deterministic() {
    let a = ToyBackend::generate(5).unwrap();
    let b = ToyBackend::generate(5).unwrap();
    assert_eq!(a.generator.fingerprint(), b.generator.fingerprint());
    assert_ne!(a.generator.fingerprint(), ToyBackend::generate(6).unwrap().generator.fingerprint());
    let (sa, sb) = (a.bundle().sample_styles(3, 1).unwrap(), b.bundle().sample_styles(3, 1).unwrap());
    assert_eq!(sa, sb);
    assert!(a.generator.synthesize(&sa[0], 64).unwrap().bit_eq(&b.generator.synthesize(&sb[0], 64).unwrap()));

    let json = a.params.to_json().unwrap();
    let back = ToyParams::from_json(&json).unwrap();
    assert_eq!(back.fingerprint(), a.params.fingerprint());
    assert_eq!(resolve_backend("toy").unwrap().fingerprint(), resolve_backend("toy").unwrap().fingerprint());
}

#[test]
fn vocabulary_is_fixed_and_strict() {
    let toy = ToyBackend::generate(0).unwrap();
    assert!(toy.embedder.vocabulary().count() >= 16);
    let bundle = toy.bundle();
    let a = bundle.embedder.embed_text("  Curly   HAIR ").unwrap();
    let b = bundle.embedder.embed_text("curly hair").unwrap();
    assert_eq!(a, b);
    assert!((a.norm() - 1.0).abs() < 1e-12);
    assert!(matches!(bundle.embedder.embed_text("zebra"), Err(Error::UnknownToken(_))));
    assert!(matches!(bundle.embedder.embed_text("   "), Err(Error::EmptyPrompt)));
}

#[test]
fn embedders_accept_any_square_size() {
    let toy = ToyBackend::generate(0).unwrap();
    let bundle = toy.bundle();
    for side in [4u32, 16, 33, 128] {
        let img = ImageTensor::new(side, side, vec![0.25; (side * side * 3) as usize]).unwrap();
        let e = bundle.embedder.embed_image(&img).unwrap();
        assert!((e.norm() - 1.0).abs() < 1e-9);
    }
    let wide = ImageTensor::zeros(4, 8);
    assert!(bundle.embedder.embed_image(&wide).is_err());
}

#[test]
fn custom_specs_generate_consistent_params() {
    let spec = ToySpec {
        joint_dim: 32,
        identity_dim: 16,
        ..ToySpec::default()
    };
    let toy = ToyBackend::new(ToyParams::generate(&spec, 3).unwrap()).unwrap();
    let bundle = toy.bundle();
    let s = bundle.sample_styles(1, 0).unwrap().remove(0);
    let img = bundle.generator.synthesize(&s, 32).unwrap();
    assert_eq!(bundle.embedder.embed_image(&img).unwrap().dim(), 32);
    assert_eq!(bundle.identity.identity_embed(&img).unwrap().dim(), 16);
}
