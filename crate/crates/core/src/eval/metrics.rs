use crate::error::{Error, Result};
use crate::signal::{wrapped_midpoint, RealSpectrum};

/// Finite stand-in for an exact match, so that averages stay finite.
pub const PSNR_CAP_DB: f64 = 150.0;

/// `10 log10(max(target)^2 / MSE)` in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(estimate: &RealSpectrum, target: &RealSpectrum) -> Result<f64> {
    if estimate.len() != target.len() {
        return Err(Error::shape("psnr", format!("{} estimate bins vs {} target bins", estimate.len(), target.len())));
    }
    let peak = target.max();
    if peak == 0.0 {
        return Err(Error::invalid("psnr: target spectrum is all zero"));
    }
    let mse = estimate
        .values
        .iter()
        .zip(&target.values)
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        / target.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Two-peak resolution test: the spectrum at the wrapped midpoint must dip
/// below `min(Y(f1), Y(f2)) / sqrt(2)`. Values are read at the nearest bin.
pub fn resolution_decision(spectrum: &RealSpectrum, f1: f64, f2: f64) -> bool {
    let floor = spectrum.at(f1).min(spectrum.at(f2)) / std::f64::consts::SQRT_2;
    spectrum.at(wrapped_midpoint(f1, f2)) < floor
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{grid_freq, nearest_bin};

    fn spec(v: Vec<f64>) -> RealSpectrum {
        RealSpectrum::new(v).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let t = spec(vec![1.0, 0.0, 0.5, 0.0]);
        assert_eq!(psnr(&t, &t).unwrap(), PSNR_CAP_DB);
        // MSE 0.01 against peak 1
        let e = spec(vec![1.2, 0.0, 0.5, 0.0]);
        assert!((psnr(&e, &t).unwrap() - 20.0).abs() < 1e-12);
        let t2 = spec(vec![2.0, 0.0, 1.0, 0.0]);
        let e2 = spec(vec![2.4, 0.0, 1.0, 0.0]);
        assert!((psnr(&e2, &t2).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_errors() {
        assert!(psnr(&spec(vec![0.0; 3]), &spec(vec![0.0; 3])).is_err());
        assert!(psnr(&spec(vec![0.0; 3]), &spec(vec![1.0; 4])).is_err());
    }

    fn three_bins(p1: f64, p2: f64, mid: f64) -> (RealSpectrum, f64, f64) {
        let n = 64;
        let mut v = vec![0.0; n];
        v[10] = p1;
        v[12] = p2;
        v[11] = mid;
        (spec(v), grid_freq(10, n), grid_freq(12, n))
    }

    #[test]
    fn decision_examples() {
        let (s, f1, f2) = three_bins(1.0, 0.8, 0.5);
        assert!(resolution_decision(&s, f1, f2));
        let (s, f1, f2) = three_bins(1.0, 0.8, 0.6);
        assert!(!resolution_decision(&s, f1, f2));
        let (s, f1, f2) = three_bins(0.3, 2.0, 0.0);
        assert!(resolution_decision(&s, f1, f2));
    }

    #[test]
    fn coincident_frequencies_never_resolve() {
        let mut v = vec![0.0; 32];
        v[nearest_bin(0.1, 32)] = 1.0;
        assert!(!resolution_decision(&spec(v), 0.1, 0.1));
    }
}
