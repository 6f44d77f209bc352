use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ComplexSignal, RealSpectrum};

/// Taper applied before the DFT.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    Hann,
    Hamming,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![1.0];
        }
        let denom = (n - 1) as f64;
        (0..n)
            .map(|i| {
                let c = (2.0 * PI * i as f64 / denom).cos();
                match self {
                    Window::Rect => 1.0,
                    Window::Hann => 0.5 - 0.5 * c,
                    Window::Hamming => 0.54 - 0.46 * c,
                }
            })
            .collect()
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" => Ok(Window::Rect),
            "hann" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            _ => Err(Error::UnknownWindow(s.to_string())),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rect => "rect",
            Window::Hann => "hann",
            Window::Hamming => "hamming",
        })
    }
}

/// `|DFT(w * s)|^2` on an `n_fft` grid starting at `f = -0.5`, scaled by
/// `1 / (sum w)^2` so a unit on-grid tone peaks at exactly 1.
pub fn periodogram(signal: &ComplexSignal, n_fft: usize, window: Window) -> Result<RealSpectrum> {
    let n = signal.len();
    if n_fft < n {
        return Err(Error::invalid(format!("n_fft = {n_fft} is shorter than the signal ({n})")));
    }
    let w = window.coefficients(n);
    let gain: f64 = w.iter().sum();
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for (t, (s, wt)) in signal.samples.iter().zip(&w).enumerate() {
        // e^{j pi t} = (-1)^t moves the grid origin from f = 0 to f = -0.5
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        buf[t] = s * (wt * sign);
    }
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let scale = 1.0 / (gain * gain);
    RealSpectrum::new(buf.iter().map(|x| x.norm_sqr() * scale).collect())
}
