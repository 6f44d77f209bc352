//! Train the toy network for a few epochs and compare it with the periodogram.
//!
//! cargo run --release --example train_toy -- [epochs]

use swinfreq::classical::Window;
use swinfreq::eval::{psnr_vs_snr, ExperimentConfig, Model, Periodogram};
use swinfreq::model::{ModelConfig, Variant};
use swinfreq::train::{train, TrainConfig, TrainOptions};

fn main() -> swinfreq::Result<()> {
    let arg = |i: usize, default: u64| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let (epochs, seed, eval_seed) = (arg(1, 2) as usize, arg(2, 0), arg(3, 1));
    let model = ModelConfig::toy(Variant::SwinFreq);
    let cfg = TrainConfig { n_scenes: 2000, batch: 32, epochs, validation_scenes: 100, seed, ..Default::default() };
    let t = std::time::Instant::now();
    let (store, hist) = train(&model, &cfg, TrainOptions::default())?;
    println!("{} steps in {:.1}s", hist.step_loss.len(), t.elapsed().as_secs_f64());
    println!("probe MSE {:.3e} -> {:.3e}", hist.probe_mse_start, hist.probe_mse_end);
    println!("validation PSNR per epoch: {:?}", hist.val_psnr);

    let exp = ExperimentConfig { n: model.n, n_sr: model.n_sr, trials: 200, snr_grid: vec![20.0], ..Default::default() };
    let net = Model { store };
    let per = Periodogram { n_sr: model.n_sr, window: Window::Rect };
    let report = psnr_vs_snr(&[&net, &per], &exp, eval_seed)?;
    for c in &report.curves {
        println!("{:>12}: {:.2} dB at 20 dB SNR", c.method, c.y[0]);
    }
    Ok(())
}
