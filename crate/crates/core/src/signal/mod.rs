//! Multisinusoidal scenes, their noisy sample sequences, and the Gaussian
//! line-spectrum targets the models learn to reproduce.
//!
//! Digital frequency lives on the unit circle: grids cover `[-0.5, 0.5)` with
//! `f_k = -0.5 + k / n_sr`, and every distance in this module wraps.

pub mod io;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground truth: component frequencies and complex amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyScene {
    pub freqs: Vec<f64>,
    pub amps: Vec<Complex64>,
}

impl FrequencyScene {
    pub fn new(freqs: Vec<f64>, amps: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != amps.len() {
            return Err(Error::invalid(format!(
                "{} frequencies but {} amplitudes",
                freqs.len(),
                amps.len()
            )));
        }
        if let Some(f) = freqs.iter().find(|f| !(-0.5..0.5).contains(*f)) {
            return Err(Error::invalid(format!("frequency {f} outside [-0.5, 0.5)")));
        }
        Ok(Self { freqs, amps })
    }

    /// Single component helper, mostly for tests and examples.
    pub fn tone(freq: f64, amp: Complex64) -> Self {
        Self { freqs: vec![wrap_freq(freq)], amps: vec![amp] }
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Smallest wrapped distance between any two components (`inf` for L < 2).
    pub fn min_spacing(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, &a) in self.freqs.iter().enumerate() {
            for &b in &self.freqs[i + 1..] {
                best = best.min(wrapped_distance(a, b));
            }
        }
        best
    }
}

/// Length-N complex sample sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("signal must have at least one sample"));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::invalid("signal contains non-finite samples"));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Multiply every sample by `e^{j phi}`.
    pub fn rotated(&self, phi: f64) -> Self {
        let r = Complex64::from_polar(1.0, phi);
        Self { samples: self.samples.iter().map(|s| s * r).collect() }
    }
}

/// Nonnegative spectrum on the uniform grid `f_k = -0.5 + k / len`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSpectrum {
    pub values: Vec<f64>,
}

impl RealSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("spectrum values must be finite and nonnegative"));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn freq(&self, k: usize) -> f64 {
        grid_freq(k, self.values.len())
    }

    /// Value at the grid bin nearest to `f`.
    pub fn at(&self, f: f64) -> f64 {
        self.values[nearest_bin(f, self.values.len())]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub fn grid_freq(k: usize, n_grid: usize) -> f64 {
    -0.5 + k as f64 / n_grid as f64
}

pub fn nearest_bin(f: f64, n_grid: usize) -> usize {
    let k = ((wrap_freq(f) + 0.5) * n_grid as f64).round() as i64;
    k.rem_euclid(n_grid as i64) as usize
}

/// Map any frequency onto `[-0.5, 0.5)`.
pub fn wrap_freq(f: f64) -> f64 {
    let w = (f + 0.5).rem_euclid(1.0) - 0.5;
    if w >= 0.5 {
        -0.5
    } else {
        w
    }
}

/// Distance between two digital frequencies on the unit circle, in `[0, 0.5]`.
pub fn wrapped_distance(a: f64, b: f64) -> f64 {
    wrap_freq(a - b).abs()
}

/// Midpoint of the shorter arc from `a` to `b`.
pub fn wrapped_midpoint(a: f64, b: f64) -> f64 {
    wrap_freq(a + 0.5 * wrap_freq(b - a))
}

/// How component amplitudes are drawn. Phases are always uniform on `[0, 2pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmplitudeDist {
    /// `|alpha|` log-uniform on `[lo, hi]`.
    LogUniform { lo: f64, hi: f64 },
    /// `|alpha| = 1`.
    Unit,
}

impl Default for AmplitudeDist {
    fn default() -> Self {
        AmplitudeDist::LogUniform { lo: 0.1, hi: 1.0 }
    }
}

impl AmplitudeDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let modulus = match *self {
            AmplitudeDist::LogUniform { lo, hi } => {
                let (a, b) = (lo.ln(), hi.ln());
                (a + (b - a) * rng.random::<f64>()).exp()
            }
            AmplitudeDist::Unit => 1.0,
        };
        Complex64::from_polar(modulus, 2.0 * PI * rng.random::<f64>())
    }
}

/// Scene sampler settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub l_min: usize,
    pub l_max: usize,
    pub min_separation: f64,
    #[serde(default)]
    pub amplitude: AmplitudeDist,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_attempts() -> usize {
    10_000
}

impl SceneConfig {
    /// 1..=10 components at least `1 / (2 n_sr)` apart.
    pub fn for_grid(n_sr: usize) -> Self {
        Self {
            l_min: 1,
            l_max: 10,
            min_separation: 1.0 / (2.0 * n_sr as f64),
            amplitude: AmplitudeDist::default(),
            max_attempts: default_attempts(),
        }
    }

    pub fn with_components(mut self, l_min: usize, l_max: usize) -> Self {
        self.l_min = l_min;
        self.l_max = l_max;
        self
    }
}

/// Draw a scene: `L` uniform on `[l_min, l_max]`, each frequency uniform on
/// `[-0.5, 0.5)` and redrawn until it keeps the wrapped minimum spacing.
pub fn sample_scene<R: Rng + ?Sized>(rng: &mut R, cfg: &SceneConfig) -> Result<FrequencyScene> {
    if cfg.l_min > cfg.l_max {
        return Err(Error::invalid("l_min > l_max"));
    }
    let l = rng.random_range(cfg.l_min..=cfg.l_max);
    let mut freqs: Vec<f64> = Vec::with_capacity(l);
    for _ in 0..l {
        let mut attempts = 0;
        loop {
            if attempts == cfg.max_attempts {
                return Err(Error::SamplerExhausted {
                    attempts,
                    min_separation: cfg.min_separation,
                });
            }
            attempts += 1;
            let f = rng.random::<f64>() - 0.5;
            if freqs.iter().all(|&g| wrapped_distance(f, g) >= cfg.min_separation) {
                freqs.push(f);
                break;
            }
        }
    }
    let amps = (0..l).map(|_| cfg.amplitude.sample(rng)).collect();
    Ok(FrequencyScene { freqs, amps })
}

/// Noiseless samples `sum_l alpha_l e^{j 2 pi f_l n}`.
pub fn clean_samples(scene: &FrequencyScene, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|t| {
            scene
                .freqs
                .iter()
                .zip(&scene.amps)
                .map(|(&f, &a)| a * cis(f, t))
                .sum()
        })
        .collect()
}

/// `e^{j 2 pi f t}` with the phase reduced modulo one cycle first.
pub(crate) fn cis(f: f64, t: usize) -> Complex64 {
    let cycles = (f * t as f64).rem_euclid(1.0);
    Complex64::from_polar(1.0, 2.0 * PI * cycles)
}

/// Sample the scene and add circular white Gaussian noise at `snr_db`,
/// measured against the empirical power of the noiseless samples.
/// `snr_db = +inf` disables noise.
pub fn synthesize<R: Rng + ?Sized>(
    scene: &FrequencyScene,
    n: usize,
    snr_db: f64,
    rng: &mut R,
) -> Result<ComplexSignal> {
    if n == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("snr_db is NaN"));
    }
    let mut samples = clean_samples(scene, n);
    if snr_db != f64::INFINITY {
        if scene.is_empty() {
            return Err(Error::EmptyScene);
        }
        let power = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
        let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        for s in samples.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *s += Complex64::new(re, im) * sigma;
        }
    }
    ComplexSignal::new(samples)
}

/// Ground-truth spectrum: a Gaussian of height `|alpha_l|` and std `sigma_f`
/// centred on every component.
pub fn render_target(scene: &FrequencyScene, n_sr: usize, sigma_f: f64) -> Result<RealSpectrum> {
    if !(sigma_f > 0.0) {
        return Err(Error::invalid("sigma_f must be positive"));
    }
    if n_sr == 0 {
        return Err(Error::invalid("n_sr must be positive"));
    }
    let inv = 1.0 / (2.0 * sigma_f * sigma_f);
    let mut values = vec![0.0; n_sr];
    for (&f, a) in scene.freqs.iter().zip(&scene.amps) {
        let height = a.norm();
        // Beyond ~40 sigma every term underflows to zero; only visit the bins that matter.
        let reach = ((40.0 * sigma_f * n_sr as f64).ceil() as usize).min(n_sr / 2 + 1);
        let centre = nearest_bin(f, n_sr) as i64;
        let mut visited = std::collections::HashSet::new();
        for off in -(reach as i64)..=(reach as i64) {
            let k = (centre + off).rem_euclid(n_sr as i64) as usize;
            if !visited.insert(k) {
                continue;
            }
            let d = wrapped_distance(grid_freq(k, n_sr), f);
            values[k] += height * (-d * d * inv).exp();
        }
    }
    RealSpectrum::new(values)
}

/// Default kernel width: `0.12 / n_sr`.
pub fn default_sigma_f(n_sr: usize) -> f64 {
    0.12 / n_sr as f64
}

/// Centre by the complex mean, then scale so the largest modulus is 1.
/// A constant signal maps to zeros.
pub fn minmax_normalize(signal: &ComplexSignal) -> ComplexSignal {
    let n = signal.len() as f64;
    let mean: Complex64 = signal.samples.iter().sum::<Complex64>() / n;
    let centred: Vec<Complex64> = signal.samples.iter().map(|s| s - mean).collect();
    let peak = centred.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let samples = if peak > 0.0 {
        centred.into_iter().map(|c| c / peak).collect()
    } else {
        vec![Complex64::new(0.0, 0.0); signal.len()]
    };
    ComplexSignal { samples }
}
