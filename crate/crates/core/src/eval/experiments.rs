use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimator::{Estimator, Trial};
use super::metrics::{psnr, resolution_decision};
use super::report::{Curve, ExperimentReport};
use crate::error::{Error, Result};
use crate::rng::{label, stream};
use crate::signal::{
    default_sigma_f, grid_freq, nearest_bin, render_target, sample_scene, synthesize, wrap_freq, FrequencyScene,
    SceneConfig,
};

/// Shared settings of the Monte Carlo drivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Samples per signal.
    pub n: usize,
    pub n_sr: usize,
    pub trials: usize,
    /// SNR of the resolution sweep.
    pub snr_db: f64,
    /// Resolution sweep grid in units of `1 / n_sr`.
    pub separations: Vec<f64>,
    pub snr_grid: Vec<f64>,
    /// `None` uses `0.12 / n_sr`.
    pub sigma_f: Option<f64>,
    pub scene: Option<SceneConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 64,
            n_sr: 4096,
            trials: 200,
            snr_db: 20.0,
            separations: (3..=10).map(|i| i as f64 / 10.0).collect(),
            snr_grid: (0..=10).map(|i| -10.0 + 5.0 * i as f64).collect(),
            sigma_f: None,
            scene: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n_sr < self.n {
            return Err(Error::invalid("experiment config: need 2 <= n <= n_sr"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("experiment config: trials must be >= 1"));
        }
        Ok(())
    }

    pub fn sigma_f(&self) -> f64 {
        self.sigma_f.unwrap_or_else(|| default_sigma_f(self.n_sr))
    }

    pub fn scene_config(&self) -> SceneConfig {
        self.scene.clone().unwrap_or_else(|| SceneConfig::for_grid(self.n_sr))
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Running sum over one grid point; trials are folded in index order.
#[derive(Default)]
struct Tally {
    sum: f64,
    ok: usize,
    failed: usize,
}

impl Tally {
    fn push(&mut self, r: &Result<f64>) {
        match r {
            Ok(v) => {
                self.sum += v;
                self.ok += 1;
            }
            Err(_) => self.failed += 1,
        }
    }

    fn mean(&self) -> f64 {
        if self.ok == 0 {
            f64::NAN
        } else {
            self.sum / self.ok as f64
        }
    }
}

/// Evaluate every method on the trials of every grid point and fold the
/// per-trial scores into curves. Trials run in parallel; results are
/// reduced in trial order so reports are reproducible bit for bit.
fn run_grid<F>(methods: &[&dyn Estimator], points: usize, trials: usize, score: F) -> Vec<Curve>
where
    F: Fn(usize, usize, &dyn Estimator) -> Result<f64> + Sync,
{
    let mut curves: Vec<Curve> = methods
        .iter()
        .map(|m| Curve { method: m.name(), y: Vec::new(), trials: Vec::new(), failures: Vec::new() })
        .collect();
    for p in 0..points {
        let per_trial: Vec<Vec<Result<f64>>> = (0..trials)
            .into_par_iter()
            .map(|t| methods.iter().map(|m| score(p, t, *m)).collect())
            .collect();
        for (i, curve) in curves.iter_mut().enumerate() {
            let mut tally = Tally::default();
            for row in &per_trial {
                if let Err(e) = &row[i] {
                    log::warn!("{} failed on point {p}: {e}", curve.method);
                }
                tally.push(&row[i]);
            }
            curve.y.push(tally.mean());
            curve.trials.push(tally.ok);
            curve.failures.push(tally.failed);
        }
    }
    curves
}

/// A unit-amplitude two-tone scene `{f, f + delta}` with uniform base
/// frequency and independent uniform phases.
pub fn two_tone_scene<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> Result<FrequencyScene> {
    let f1 = rng.random_range(-0.5..0.5);
    let f2 = wrap_freq(f1 + delta);
    let a1 = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.random::<f64>());
    let a2 = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.random::<f64>());
    if delta == 0.0 {
        return Ok(FrequencyScene::tone(f1, a1 + a2));
    }
    FrequencyScene::new(vec![f1, f2], vec![a1, a2])
}

/// Probability that each method resolves two unit tones `delta / n_sr`
/// apart, for every `delta` in `cfg.separations`, at `cfg.snr_db`.
pub fn resolution_sweep(methods: &[&dyn Estimator], cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sigma_f = cfg.sigma_f();
    let curves = run_grid(methods, cfg.separations.len(), cfg.trials, |p, t, m| {
        let delta = cfg.separations[p] / cfg.n_sr as f64;
        let mut rng = stream(seed, &[label("resolution"), p as u64, t as u64]);
        let scene = two_tone_scene(delta, &mut rng)?;
        let signal = synthesize(&scene, cfg.n, cfg.snr_db, &mut rng)?;
        let target = render_target(&scene, cfg.n_sr, sigma_f)?;
        let trial = Trial { signal: &signal, components: Some(scene.len()), target: Some(&target) };
        let spec = m.estimate(&trial)?;
        if spec.len() != cfg.n_sr {
            return Err(Error::shape("resolution_sweep", format!("{} returned {} bins", m.name(), spec.len())));
        }
        let f1 = scene.freqs[0];
        let f2 = wrap_freq(f1 + delta);
        Ok(if delta != 0.0 && resolution_decision(&spec, f1, f2) { 1.0 } else { 0.0 })
    });
    let mut report = ExperimentReport::new("resolution", "separation_bins", cfg.separations.clone(), cfg.snapshot(), seed);
    report.curves = curves;
    Ok(report)
}

/// Mean PSNR of each method at every SNR of `cfg.snr_grid`. Every method and
/// every SNR point sees the same scenes; noise is shared across methods.
pub fn psnr_vs_snr(methods: &[&dyn Estimator], cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let scene_cfg = cfg.scene_config();
    let sigma_f = cfg.sigma_f();
    let scenes: Vec<(FrequencyScene, crate::signal::RealSpectrum)> = (0..cfg.trials)
        .map(|t| {
            let scene = sample_scene(&mut stream(seed, &[label("psnr-scene"), t as u64]), &scene_cfg)?;
            let target = render_target(&scene, cfg.n_sr, sigma_f)?;
            Ok((scene, target))
        })
        .collect::<Result<_>>()?;
    let curves = run_grid(methods, cfg.snr_grid.len(), cfg.trials, |p, t, m| {
        let (scene, target) = &scenes[t];
        let mut rng = stream(seed, &[label("psnr-noise"), p as u64, t as u64]);
        let signal = synthesize(scene, cfg.n, cfg.snr_grid[p], &mut rng)?;
        let trial = Trial { signal: &signal, components: Some(scene.len()), target: Some(target) };
        psnr(&m.estimate(&trial)?, target)
    });
    let mut report = ExperimentReport::new("psnr", "snr_db", cfg.snr_grid.clone(), cfg.snapshot(), seed);
    report.curves = curves;
    Ok(report)
}

/// Raw spectra of every method on one two-tone condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidelobeCondition {
    /// Separation in units of `1 / n_sr`.
    pub separation: f64,
    pub snr_db: f64,
    /// Exact ground-truth frequencies.
    pub freqs: Vec<f64>,
    pub methods: Vec<String>,
    /// `spectra[i]` belongs to `methods[i]`.
    pub spectra: Vec<Vec<f64>>,
}

impl SidelobeCondition {
    /// `freq,<methods...>,truth`: one row per grid bin. The `truth` column
    /// holds the exact ground-truth frequency on the row of its nearest bin
    /// and is empty elsewhere.
    pub fn to_csv(&self) -> String {
        let n_sr = self.spectra.first().map_or(0, Vec::len);
        let mut markers = vec![String::new(); n_sr];
        for &f in &self.freqs {
            let k = nearest_bin(f, n_sr);
            if !markers[k].is_empty() {
                markers[k].push(';');
            }
            write!(markers[k], "{f}").unwrap();
        }
        let mut out = String::from("freq");
        for m in &self.methods {
            write!(out, ",{m}").unwrap();
        }
        out.push_str(",truth\n");
        for (k, marker) in markers.iter().enumerate() {
            write!(out, "{}", grid_freq(k, n_sr)).unwrap();
            for s in &self.spectra {
                write!(out, ",{}", s[k]).unwrap();
            }
            writeln!(out, ",{marker}").unwrap();
        }
        out
    }

    /// File stem like `sep0.6_snr20`.
    pub fn stem(&self) -> String {
        format!("sep{}_snr{}", self.separation, self.snr_db)
    }
}

/// The 2x2 grid of separations `{0.6, 1.5} / n_sr` and SNRs `{20, 0}` dB.
pub const SIDELOBE_SEPARATIONS: [f64; 2] = [0.6, 1.5];
pub const SIDELOBE_SNRS: [f64; 2] = [20.0, 0.0];

/// Spectra of every method on unit two-tone scenes for each (separation,
/// SNR) pair. Each condition draws its own scene and noise from `seed`.
pub fn sidelobe_experiment(methods: &[&dyn Estimator], cfg: &ExperimentConfig, seed: u64) -> Result<Vec<SidelobeCondition>> {
    cfg.validate()?;
    let sigma_f = cfg.sigma_f();
    let mut out = Vec::new();
    for (i, &sep) in SIDELOBE_SEPARATIONS.iter().enumerate() {
        for (j, &snr) in SIDELOBE_SNRS.iter().enumerate() {
            let mut rng = stream(seed, &[label("sidelobe"), i as u64, j as u64]);
            let delta = sep / cfg.n_sr as f64;
            let scene = two_tone_scene(delta, &mut rng)?;
            let signal = synthesize(&scene, cfg.n, snr, &mut rng)?;
            let target = render_target(&scene, cfg.n_sr, sigma_f)?;
            let trial = Trial { signal: &signal, components: Some(scene.len()), target: Some(&target) };
            let spectra = methods
                .iter()
                .map(|m| m.estimate(&trial).map(|s| s.values))
                .collect::<Result<Vec<_>>>()?;
            out.push(SidelobeCondition {
                separation: sep,
                snr_db: snr,
                freqs: scene.freqs.clone(),
                methods: methods.iter().map(|m| m.name()).collect(),
                spectra,
            });
        }
    }
    Ok(out)
}
