//! Build both network variants, report their sizes, and run one forward pass.
//!
//! cargo run --release --example model_forward

use swinfreq::model::{model_forward, param_count, ModelConfig, ParameterStore, Variant};
use swinfreq::signal::{sample_scene, synthesize, SceneConfig};

fn main() -> swinfreq::Result<()> {
    for variant in [Variant::SwinFreq, Variant::CvSwinFreq] {
        let cfg = ModelConfig::default_for(variant);
        println!("{variant:?}: {} real parameters", param_count(&cfg));
    }

    let cfg = ModelConfig::toy(Variant::CvSwinFreq);
    let mut r = swinfreq::rng::seeded(11);
    let store = ParameterStore::init(&cfg, &mut r)?;
    let scene = sample_scene(&mut r, &SceneConfig::for_grid(cfg.n_sr))?;
    let x = synthesize(&scene, cfg.n, 20.0, &mut r)?;
    let t = std::time::Instant::now();
    let y = model_forward(&x, &store)?;
    let peak = y.values.iter().copied().fold(0.0, f64::max);
    println!(
        "toy {:?} forward: {} -> {} bins in {:.1} ms, peak {peak:.3}, config {}",
        cfg.variant,
        cfg.n,
        y.len(),
        t.elapsed().as_secs_f64() * 1e3,
        &cfg.hash()[..12]
    );
    Ok(())
}
