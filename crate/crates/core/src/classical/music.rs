use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::covariance::sample_covariance;
use super::order::{estimate_order_aic, estimate_order_sorte};
use crate::error::{Error, Result};
use crate::signal::{grid_freq, ComplexSignal, RealSpectrum};

/// Added to the projection norm so noiseless peaks stay finite.
const DENOM_FLOOR: f64 = 1e-12;

/// How MUSIC learns the signal-subspace dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "lowercase")]
pub enum OrderRule {
    Known(usize),
    Aic,
    Sorte,
}

/// MUSIC pseudospectrum `1 / (a^H E_n E_n^H a)` on an `n_grid` grid, scaled to
/// a maximum of 1. `E_n` spans the `m - order` smallest eigenvectors of the
/// forward-backward smoothed covariance.
pub fn music(signal: &ComplexSignal, order: usize, m: usize, n_grid: usize) -> Result<RealSpectrum> {
    if order >= m {
        return Err(Error::invalid(format!("order {order} must be below subarray length {m}")));
    }
    if n_grid == 0 {
        return Err(Error::invalid("n_grid must be positive"));
    }
    let cov = sample_covariance(signal, m)?;
    let (_, vectors) = cov.eigen_descending();
    let mut denom = vec![0.0; n_grid];
    if n_grid >= m {
        let fft = FftPlanner::new().plan_fft_inverse(n_grid);
        let mut buf = vec![Complex64::new(0.0, 0.0); n_grid];
        for col in order..m {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for i in 0..m {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                buf[i] = vectors[(i, col)].conj() * sign;
            }
            // inverse transform: sum_i conj(e_i) e^{j 2 pi f_k i}
            fft.process(&mut buf);
            for (d, b) in denom.iter_mut().zip(&buf) {
                *d += b.norm_sqr();
            }
        }
    } else {
        for (k, d) in denom.iter_mut().enumerate() {
            let f = grid_freq(k, n_grid);
            for col in order..m {
                let proj: Complex64 = (0..m)
                    .map(|i| vectors[(i, col)].conj() * crate::signal::cis(f, i))
                    .sum();
                *d += proj.norm_sqr();
            }
        }
    }
    let values: Vec<f64> = denom.iter().map(|d| 1.0 / (d + DENOM_FLOOR)).collect();
    let peak = values.iter().copied().fold(0.0, f64::max);
    RealSpectrum::new(values.into_iter().map(|v| v / peak).collect())
}

/// MUSIC with the order chosen by `rule` from the covariance eigenvalues.
pub fn music_with_order(
    signal: &ComplexSignal,
    rule: OrderRule,
    m: usize,
    n_grid: usize,
) -> Result<(usize, RealSpectrum)> {
    let order = match rule {
        OrderRule::Known(l) => l.min(m - 1),
        OrderRule::Aic | OrderRule::Sorte => {
            let ev: Vec<f64> = sample_covariance(signal, m)?
                .eigenvalues_descending()
                .into_iter()
                .map(|l| l.max(f64::MIN_POSITIVE))
                .collect();
            let snapshots = signal.len() - m + 1;
            let est = if rule == OrderRule::Aic {
                estimate_order_aic(&ev, snapshots)?
            } else if ev.len() >= 4 {
                estimate_order_sorte(&ev)?.order
            } else {
                estimate_order_aic(&ev, snapshots)?
            };
            est.min(m - 1)
        }
    };
    Ok((order, music(signal, order, m, n_grid)?))
}
