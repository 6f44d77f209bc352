//! Resolution sweep and PSNR-vs-SNR curves for the classical estimators,
//! written as JSON and CSV reports.
//!
//! cargo run --release --example compare_methods -- [out_dir] [trials]

use std::path::PathBuf;

use swinfreq::eval::{psnr_vs_snr, resolution_sweep, sidelobe_experiment, ExperimentConfig, Method};

fn main() -> swinfreq::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "compare-out".into()));
    let trials = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    std::fs::create_dir_all(&out)?;
    let cfg = ExperimentConfig {
        trials,
        separations: vec![0.3, 1.0, 16.0, 32.0, 64.0, 96.0, 128.0],
        ..Default::default()
    };
    let built: Vec<_> = [Method::Periodogram, Method::Hann, Method::Music, Method::Omp]
        .iter()
        .map(|m| m.build(cfg.n_sr))
        .collect();
    let methods: Vec<&dyn swinfreq::eval::Estimator> = built.iter().map(|b| b.as_ref()).collect();

    let res = resolution_sweep(&methods, &cfg, 0)?;
    res.write(&out.join("resolution"))?;
    println!("resolution probability vs {}:", res.x_label);
    for c in &res.curves {
        println!("  {:>12} {:?}", c.method, c.y);
    }

    let ps = psnr_vs_snr(&methods, &cfg, 0)?;
    ps.write(&out.join("psnr"))?;
    println!("mean PSNR (dB) vs {}:", ps.x_label);
    for c in &ps.curves {
        println!("  {:>12} {:?}", c.method, c.y.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>());
    }

    for cond in sidelobe_experiment(&methods, &cfg, 0)? {
        std::fs::write(out.join(format!("sidelobe_{}.csv", cond.stem())), cond.to_csv())?;
    }
    println!("reports in {}", out.display());
    Ok(())
}
