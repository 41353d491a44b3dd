//! Regenerates the bundled 64x64 demo under `crates/cli/fixtures` and trains
//! its checkpoint with `demo.toml`.
//!
//!     cargo run --release -p inkportrait --example make_fixtures

use std::path::Path;
use std::time::Instant;

use inkportrait::config::PipelineConfig;
use inkportrait::io::{labels_png, raster_png, write_file};
use inkportrait::{cmd_train, CliResult};
use inkportrait_core::fixtures::{eyebrow_patches, face, line_sketch};

const SIZE: usize = 64;
const PORTRAIT_SEED: u64 = 1000;
const TRAIN_FACES: u64 = 8;

fn main() -> CliResult<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    let f = face(SIZE, PORTRAIT_SEED);
    write_file(&dir.join("photo.png"), &raster_png(&f.photo))?;
    write_file(&dir.join("labels.png"), &labels_png(&f.labels))?;
    let mut brows = Vec::new();
    for (i, p) in eyebrow_patches(SIZE, PORTRAIT_SEED).into_iter().enumerate() {
        let name = format!("brow_{i}.png");
        write_file(&dir.join(&name), &raster_png(&p.image))?;
        let r = p.rect;
        brows.push(serde_json::json!({
            "x": r.x, "y": r.y, "width": r.width, "height": r.height, "image": name,
        }));
    }
    let ann = serde_json::json!({
        "left_eye": f.annotations.left_eye,
        "right_eye": f.annotations.right_eye,
        "eyebrows": brows,
    });
    let mut text = serde_json::to_string_pretty(&ann).expect("json");
    text.push('\n');
    write_file(&dir.join("annotations.json"), text.as_bytes())?;

    write_file(&dir.join("style_outline.png"), &raster_png(&line_sketch(SIZE, 0)))?;
    write_file(&dir.join("style_heavy.png"), &raster_png(&line_sketch(SIZE, 1)))?;
    for seed in 1..=TRAIN_FACES {
        let t = face(SIZE, seed);
        write_file(&dir.join(format!("train/photo_{seed:02}.png")), &raster_png(&t.photo))?;
        write_file(&dir.join(format!("train/labels_{seed:02}.png")), &labels_png(&t.labels))?;
    }

    let cfg = PipelineConfig::load(&dir.join("demo.toml"))?;
    let t = Instant::now();
    let out = cmd_train(&cfg)?;
    let (first, last) = (out.log[0].terms.total, out.log.last().expect("log").terms.total);
    println!("trained in {:.1?}: total loss {first:.5} -> {last:.5}", t.elapsed());
    Ok(())
}
