//! Draw a random line-spectrum scene, synthesize noisy samples and render the
//! super-resolution target.
//!
//! cargo run --example synth_scene -- [seed] [snr_db]

use swinfreq::rng;
use swinfreq::signal::{io, minmax_normalize, render_target, sample_scene, synthesize, default_sigma_f, SceneConfig};

fn main() -> swinfreq::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let snr_db = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(20.0);
    let (n, n_sr) = (64, 4096);

    let mut r = rng::seeded(seed);
    let scene = sample_scene(&mut r, &SceneConfig::for_grid(n_sr).with_components(2, 5))?;
    for (f, a) in scene.freqs.iter().zip(&scene.amps) {
        println!("f = {f:+.5}  |a| = {:.3}  arg a = {:+.3}", a.norm(), a.arg());
    }

    let x = synthesize(&scene, n, snr_db, &mut r)?;
    let peak = minmax_normalize(&x).samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    println!("{n} samples at {snr_db} dB, normalized peak modulus {peak:.3}");

    let target = render_target(&scene, n_sr, default_sigma_f(n_sr))?;
    let nonzero = target.values.iter().filter(|v| **v > 1e-6).count();
    println!("target: {n_sr} bins, {nonzero} above 1e-6");

    println!("{}", io::scenes_to_json(std::slice::from_ref(&scene))?);
    Ok(())
}
