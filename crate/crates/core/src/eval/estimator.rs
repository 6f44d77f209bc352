use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classical::{music_with_order, omp, periodogram, sample_covariance, estimate_order_aic, OrderRule, Window};
use crate::error::{Error, Result};
use crate::model::{model_forward, ParameterStore};
use crate::signal::{ComplexSignal, RealSpectrum};

/// One input handed to an estimator, with the side information a Monte Carlo
/// driver knows about it.
#[derive(Clone, Copy, Debug)]
pub struct Trial<'a> {
    pub signal: &'a ComplexSignal,
    /// True component count, when known.
    pub components: Option<usize>,
    /// Ground-truth spectrum, when known.
    pub target: Option<&'a RealSpectrum>,
}

impl<'a> Trial<'a> {
    pub fn blind(signal: &'a ComplexSignal) -> Self {
        Self { signal, components: None, target: None }
    }
}

/// Maps a signal to a spectrum on an `n_sr` grid.
pub trait Estimator: Send + Sync {
    fn name(&self) -> String;
    fn estimate(&self, trial: &Trial<'_>) -> Result<RealSpectrum>;
}

/// Amplitude periodogram `sqrt(P)`, so an on-grid tone of amplitude `a`
/// peaks at `|a|`.
#[derive(Clone, Debug)]
pub struct Periodogram {
    pub n_sr: usize,
    pub window: Window,
}

impl Estimator for Periodogram {
    fn name(&self) -> String {
        match self.window {
            Window::Rect => "periodogram".into(),
            w => w.to_string(),
        }
    }

    fn estimate(&self, trial: &Trial<'_>) -> Result<RealSpectrum> {
        amplitude_periodogram(trial.signal, self.n_sr, self.window)
    }
}

fn amplitude_periodogram(signal: &ComplexSignal, n_sr: usize, window: Window) -> Result<RealSpectrum> {
    let p = periodogram(signal, n_sr, window)?;
    RealSpectrum::new(p.values.into_iter().map(f64::sqrt).collect())
}

/// MUSIC with subarray length `N / 2`. The model order is the true
/// component count when known and the AIC estimate otherwise. The
/// pseudospectrum is rescaled to the peak of the rectangular amplitude
/// periodogram so it lives on the same scale as the targets.
#[derive(Clone, Debug)]
pub struct Music {
    pub n_sr: usize,
}

impl Estimator for Music {
    fn name(&self) -> String {
        "music".into()
    }

    fn estimate(&self, trial: &Trial<'_>) -> Result<RealSpectrum> {
        let m = (trial.signal.len() / 2).max(2);
        let rule = trial.components.map_or(OrderRule::Aic, OrderRule::Known);
        let (_, spec) = music_with_order(trial.signal, rule, m, self.n_sr)?;
        let scale = amplitude_periodogram(trial.signal, self.n_sr, Window::Rect)?.max();
        RealSpectrum::new(spec.values.into_iter().map(|v| v * scale).collect())
    }
}

/// OMP on the `n_sr` grid; emits `|alpha|` spikes. Sparsity is the true
/// component count when known and the AIC estimate otherwise.
#[derive(Clone, Debug)]
pub struct Omp {
    pub n_sr: usize,
}

impl Estimator for Omp {
    fn name(&self) -> String {
        "omp".into()
    }

    fn estimate(&self, trial: &Trial<'_>) -> Result<RealSpectrum> {
        let k = match trial.components {
            Some(k) => k,
            None => {
                let m = (trial.signal.len() / 2).max(2);
                let ev: Vec<f64> = sample_covariance(trial.signal, m)?
                    .eigenvalues_descending()
                    .into_iter()
                    .map(|l| l.max(f64::MIN_POSITIVE))
                    .collect();
                estimate_order_aic(&ev, trial.signal.len() - m + 1)?.max(1)
            }
        };
        Ok(omp(trial.signal, self.n_sr, k.min(trial.signal.len()))?.to_spectrum(self.n_sr))
    }
}

/// A trained network; the input is min-max normalized before the forward pass.
#[derive(Clone, Debug)]
pub struct Model {
    pub store: ParameterStore,
}

impl Estimator for Model {
    fn name(&self) -> String {
        self.store.config().variant.to_string()
    }

    fn estimate(&self, trial: &Trial<'_>) -> Result<RealSpectrum> {
        model_forward(trial.signal, &self.store)
    }
}

/// Returns the ground truth; an upper bound for every metric.
#[derive(Clone, Debug)]
pub struct Oracle;

impl Estimator for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn estimate(&self, trial: &Trial<'_>) -> Result<RealSpectrum> {
        trial.target.cloned().ok_or_else(|| Error::invalid("oracle needs the ground-truth spectrum"))
    }
}

/// Built-in (checkpoint-free) methods selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Periodogram,
    Hann,
    Music,
    Omp,
    Oracle,
}

impl Method {
    pub fn build(self, n_sr: usize) -> Box<dyn Estimator> {
        match self {
            Method::Periodogram => Box::new(Periodogram { n_sr, window: Window::Rect }),
            Method::Hann => Box::new(Periodogram { n_sr, window: Window::Hann }),
            Method::Music => Box::new(Music { n_sr }),
            Method::Omp => Box::new(Omp { n_sr }),
            Method::Oracle => Box::new(Oracle),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodogram" | "rect" => Ok(Method::Periodogram),
            "hann" | "periodogram-hann" => Ok(Method::Hann),
            "music" => Ok(Method::Music),
            "omp" => Ok(Method::Omp),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::invalid(format!(
                "unknown method '{other}' (expected periodogram, hann, music, omp, oracle)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Periodogram => "periodogram",
            Method::Hann => "hann",
            Method::Music => "music",
            Method::Omp => "omp",
            Method::Oracle => "oracle",
        })
    }
}
