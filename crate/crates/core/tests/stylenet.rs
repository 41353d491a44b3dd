mod common;

use common::grad::random;
use common::Rng;
use inkportrait_core::fixtures::{face, line_sketch};
use inkportrait_core::maskops::{derive_sparsity_mask, remove_background};
use inkportrait_core::moments::channel_moments;
use inkportrait_core::stylenet::{adain, synthesize, train, Checkpoint, ContentSample, TrainConfig, TrainData};
use inkportrait_core::Dims;

#[test]
fn adain_transfers_moments_and_fixes_itself() {
    let mut rng = Rng::new(12);
    let content = random(Dims::new(2, 5, 9, 7), &mut rng, -1.0, 3.0);
    let style = random(Dims::new(1, 5, 6, 6), &mut rng, 0.5, 1.5);
    let out = adain(&content, &style).unwrap();
    let (mo, ms) = (channel_moments(&out).unwrap(), channel_moments(&style).unwrap());
    for n in 0..2 {
        for c in 0..5 {
            assert!((mo.mean[n * 5 + c] - ms.mean[c]).abs() < 1e-5);
            assert!((mo.std[n * 5 + c] - ms.std[c]).abs() < 1e-5);
        }
    }
    let same = adain(&content, &content).unwrap();
    let err = same
        .data()
        .iter()
        .zip(content.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
    assert!(adain(&content, &random(Dims::new(1, 4, 6, 6), &mut rng, 0.0, 1.0)).is_err());
}

fn toy_data() -> TrainData {
    let contents = (1..=3)
        .map(|s| {
            let f = face(16, s);
            ContentSample {
                photo: remove_background(&f.photo, &f.labels).unwrap(),
                mask: derive_sparsity_mask(&f.labels),
            }
        })
        .collect();
    TrainData {
        contents,
        styles: vec![line_sketch(16, 0)],
    }
}

#[test]
fn training_is_deterministic_and_checkpoints_reload() {
    let cfg = TrainConfig {
        iterations: 4,
        batch_size: 2,
        seed: 3,
        ..Default::default()
    };
    let data = toy_data();
    let a = train(&cfg, &data).unwrap();
    let b = train(&cfg, &data).unwrap();
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
    assert_eq!(a.log.len(), 4);
    let reloaded = Checkpoint::from_bytes(&a.checkpoint.to_bytes()).unwrap();
    let f = face(16, 9);
    let style = line_sketch(16, 0);
    assert_eq!(
        synthesize(&f.photo, &style, &reloaded).unwrap(),
        synthesize(&f.photo, &style, &a.checkpoint).unwrap()
    );
    let other = train(&TrainConfig { seed: 4, ..cfg }, &data).unwrap();
    assert_ne!(other.checkpoint.to_bytes(), a.checkpoint.to_bytes());
}
