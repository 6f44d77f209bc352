//! Two close tones through the periodogram, MUSIC and OMP.
//!
//! cargo run --release --example classical_estimators -- [separation in 1/N] [snr_db]

use num_complex::Complex64;
use swinfreq::classical::{estimate_order_aic, music_with_order, omp, periodogram, sample_covariance, OrderRule, Window};
use swinfreq::eval::resolution_decision;
use swinfreq::signal::{synthesize, FrequencyScene, RealSpectrum};

fn peaks(s: &RealSpectrum, n_sr: usize, count: usize) -> Vec<f64> {
    let v = &s.values;
    let mut local: Vec<usize> = (0..n_sr)
        .filter(|&k| v[k] > v[(k + n_sr - 1) % n_sr] && v[k] >= v[(k + 1) % n_sr])
        .collect();
    local.sort_by(|a, b| v[*b].total_cmp(&v[*a]));
    local.iter().take(count).map(|&k| swinfreq::signal::grid_freq(k, n_sr)).collect()
}

fn main() -> swinfreq::Result<()> {
    let sep: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.7);
    let snr_db: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(30.0);
    let (n, n_sr) = (64, 4096);
    let (f1, f2) = (0.1, 0.1 + sep / n as f64);
    let scene = FrequencyScene::new(vec![f1, f2], vec![Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, 1.0)])?;
    let x = synthesize(&scene, n, snr_db, &mut swinfreq::rng::seeded(3))?;
    println!("tones at {f1:.5} and {f2:.5} ({sep} / N apart), {snr_db} dB");

    let m = n / 2;
    let ev = sample_covariance(&x, m)?.eigenvalues_descending();
    println!("AIC order estimate: {}", estimate_order_aic(&ev, n - m + 1)?);

    for w in [Window::Rect, Window::Hann] {
        let p = periodogram(&x, n_sr, w)?;
        println!("periodogram/{w}: resolved = {}, peaks {:?}", resolution_decision(&p, f1, f2), peaks(&p, n_sr, 2));
    }

    let (order, mu) = music_with_order(&x, OrderRule::Aic, m, n_sr)?;
    println!("MUSIC (order {order}): resolved = {}, peaks {:?}", resolution_decision(&mu, f1, f2), peaks(&mu, n_sr, 2));

    let r = omp(&x, n_sr, 2)?;
    let sp = r.to_spectrum(n_sr);
    println!("OMP: resolved = {}, atoms {:?}, residual {:.3e}", resolution_decision(&sp, f1, f2), r.freqs, r.residual_norm);
    Ok(())
}
