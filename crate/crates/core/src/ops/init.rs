use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Complex weights with Rayleigh modulus of scale `1/sqrt(fan_in)` and
    /// uniform phase, so `E|w|^2 = 2 / fan_in`.
    CvKaimingRayleigh,
    /// Real weights `N(0, 2 / fan_in)`.
    RealKaiming,
}

/// Random weight tensor of `shape` for a layer with `fan_in` inputs.
pub fn init_params<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, kind: InitKind, rng: &mut R) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(Error::invalid("fan_in must be positive"));
    }
    let n = shape.iter().product();
    let sigma = 1.0 / (fan_in as f64).sqrt();
    match kind {
        InitKind::CvKaimingRayleigh => {
            let values = (0..n)
                .map(|_| {
                    // inverse-CDF Rayleigh draw
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let modulus = sigma * (-2.0 * u.ln()).sqrt();
                    let phase = rng.random::<f64>() * std::f64::consts::TAU;
                    Complex64::from_polar(modulus, phase)
                })
                .collect();
            Tensor::complex(shape, values)
        }
        InitKind::RealKaiming => {
            let normal = Normal::new(0.0, sigma * 2f64.sqrt()).expect("finite std");
            Tensor::real(shape, (0..n).map(|_| normal.sample(rng)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_second_moment() {
        let mut r = crate::rng::seeded(1);
        let t = init_params(&[100_000], 1, InitKind::CvKaimingRayleigh, &mut r).unwrap();
        let m2 = t.as_complex().unwrap().iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e5;
        assert!((m2 - 2.0).abs() < 0.1, "{m2}");
    }

    #[test]
    fn phases_are_uniform() {
        let mut r = crate::rng::seeded(2);
        let t = init_params(&[100_000], 4, InitKind::CvKaimingRayleigh, &mut r).unwrap();
        let bins = 20;
        let mut counts = vec![0f64; bins];
        for z in t.as_complex().unwrap() {
            let p = z.arg().rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
            counts[((p * bins as f64) as usize).min(bins - 1)] += 1.0;
        }
        let expect = 1e5 / bins as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
        // chi-square 0.99 quantile with 19 degrees of freedom
        assert!(chi2 < 36.19, "{chi2}");
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = init_params(&[8, 3], 8, InitKind::RealKaiming, &mut crate::rng::seeded(5)).unwrap();
        let b = init_params(&[8, 3], 8, InitKind::RealKaiming, &mut crate::rng::seeded(5)).unwrap();
        assert_eq!(a, b);
    }
}
