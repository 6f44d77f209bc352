use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::{cis, grid_freq, nearest_bin, ComplexSignal, RealSpectrum};

const RIDGE: f64 = 1e-10;
/// Squared norm of a new atom's component outside the selected span below
/// which the selection is treated as rank-deficient.
const RANK_TOL: f64 = 1e-10;
/// Relative band inside which correlations count as tied.
const TIE_TOL: f64 = 1e-12;

/// Output of [`omp`].
#[derive(Clone, Debug, PartialEq)]
pub struct OmpResult {
    /// Selected grid frequencies, in selection order.
    pub freqs: Vec<f64>,
    /// Grid indices of the selected atoms.
    pub indices: Vec<usize>,
    /// Complex amplitudes `alpha` such that `s ~ sum alpha e^{j 2 pi f t}`.
    pub amps: Vec<Complex64>,
    pub residual_norm: f64,
    /// Residual norm before the first and after every iteration.
    pub residual_history: Vec<f64>,
    /// Set when the loop stopped early on a rank-deficient selection.
    pub truncated: bool,
}

impl OmpResult {
    /// Line spectrum with `|alpha|` at the bin nearest each selected frequency.
    pub fn to_spectrum(&self, n_sr: usize) -> RealSpectrum {
        let mut values = vec![0.0; n_sr];
        for (f, a) in self.freqs.iter().zip(&self.amps) {
            values[nearest_bin(*f, n_sr)] += a.norm();
        }
        RealSpectrum { values }
    }
}

/// Orthogonal matching pursuit over `n_grid` unit-norm complex exponentials
/// `e^{j 2 pi f_k t} / sqrt(n)`, `f_k = -0.5 + k / n_grid`.
///
/// Each iteration picks the atom most correlated with the residual (lowest
/// index among ties), re-fits all selected coefficients by ridge-regularized
/// least squares, and updates the residual.
pub fn omp(signal: &ComplexSignal, n_grid: usize, sparsity: usize) -> Result<OmpResult> {
    let n = signal.len();
    if sparsity > n {
        return Err(Error::invalid(format!("sparsity {sparsity} exceeds signal length {n}")));
    }
    if n_grid == 0 {
        return Err(Error::invalid("n_grid must be positive"));
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let atom = |k: usize| -> DVector<Complex64> {
        let f = grid_freq(k, n_grid);
        DVector::from_fn(n, |t, _| cis(f, t) * inv_sqrt_n)
    };
    let y = DVector::from_column_slice(&signal.samples);
    let mut residual = y.clone();
    let mut history = vec![residual.norm()];
    let mut selected: Vec<usize> = Vec::new();
    let mut basis = DMatrix::<Complex64>::zeros(n, 0);
    let mut coeffs = DVector::<Complex64>::zeros(0);
    let mut truncated = false;
    let mut scratch = Correlator::new(n, n_grid);

    for _ in 0..sparsity {
        let corr = scratch.correlate(residual.as_slice());
        let best = corr.iter().copied().fold(0.0, f64::max);
        let pick = corr
            .iter()
            .position(|&c| c >= best * (1.0 - TIE_TOL))
            .expect("nonempty grid");

        let a = atom(pick);
        if selected.contains(&pick) || outside_span(&basis, &a) < RANK_TOL {
            truncated = true;
            break;
        }
        selected.push(pick);
        let k = basis.ncols();
        basis = basis.insert_column(k, Complex64::new(0.0, 0.0));
        basis.set_column(k, &a);

        let mut gram = basis.adjoint() * &basis;
        for i in 0..gram.nrows() {
            gram[(i, i)] += RIDGE;
        }
        let rhs = basis.adjoint() * &y;
        coeffs = match gram.clone().cholesky() {
            Some(ch) => {
                // iterative refinement strips the ridge bias on well-conditioned sets
                let mut c = ch.solve(&rhs);
                for i in 0..gram.nrows() {
                    gram[(i, i)] -= RIDGE;
                }
                for _ in 0..2 {
                    c += ch.solve(&(&rhs - &gram * &c));
                }
                c
            }
            None => {
                selected.pop();
                truncated = true;
                break;
            }
        };
        residual = &y - &basis * &coeffs;
        history.push(residual.norm());
    }

    Ok(OmpResult {
        freqs: selected.iter().map(|&k| grid_freq(k, n_grid)).collect(),
        indices: selected.clone(),
        amps: coeffs.iter().map(|c| c * inv_sqrt_n).collect(),
        residual_norm: *history.last().unwrap(),
        residual_history: history,
        truncated,
    })
}

/// Squared norm of the part of `a` orthogonal to the columns of `basis`.
fn outside_span(basis: &DMatrix<Complex64>, a: &DVector<Complex64>) -> f64 {
    if basis.ncols() == 0 {
        return a.norm_squared();
    }
    let gram = basis.adjoint() * basis;
    match gram.cholesky() {
        Some(ch) => {
            let c = ch.solve(&(basis.adjoint() * a));
            (a - basis * c).norm_squared()
        }
        None => 0.0,
    }
}

/// `|a_k^H r|` for every atom: FFT when the grid covers the signal, a direct
/// scan otherwise.
struct Correlator {
    n: usize,
    n_grid: usize,
    fft: Option<std::sync::Arc<dyn rustfft::Fft<f64>>>,
    buf: Vec<Complex64>,
}

impl Correlator {
    fn new(n: usize, n_grid: usize) -> Self {
        let fft = (n_grid >= n).then(|| FftPlanner::new().plan_fft_forward(n_grid));
        Self { n, n_grid, fft, buf: vec![Complex64::new(0.0, 0.0); n_grid] }
    }

    fn correlate(&mut self, r: &[Complex64]) -> Vec<f64> {
        let scale = 1.0 / (self.n as f64).sqrt();
        match &self.fft {
            Some(fft) => {
                self.buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
                for (t, x) in r.iter().enumerate() {
                    self.buf[t] = if t % 2 == 0 { *x } else { -x };
                }
                fft.process(&mut self.buf);
                self.buf.iter().map(|c| c.norm() * scale).collect()
            }
            None => (0..self.n_grid).map(|k| scan_correlation(r, k, self.n_grid)).collect(),
        }
    }
}

/// Direct `|a_k^H r|` for a single atom.
pub(crate) fn scan_correlation(r: &[Complex64], k: usize, n_grid: usize) -> f64 {
    let f = grid_freq(k, n_grid);
    let acc: Complex64 = r.iter().enumerate().map(|(t, x)| x * cis(f, t).conj()).sum();
    acc.norm() / (r.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{clean_samples, FrequencyScene};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn on_grid_pair_recovered_exactly() {
        let n = 32;
        let scene = FrequencyScene::new(vec![-0.25, 0.125], vec![c(1.0, 0.5), c(-0.3, 0.2)]).unwrap();
        let s = ComplexSignal::new(clean_samples(&scene, n)).unwrap();
        let r = omp(&s, n, 2).unwrap();
        assert!(r.residual_norm < 1e-10);
        let mut got: Vec<(f64, Complex64)> = r.freqs.iter().copied().zip(r.amps.iter().copied()).collect();
        got.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((got[0].0 + 0.25).abs() < 1e-15 && (got[0].1 - c(1.0, 0.5)).norm() < 1e-9);
        assert!((got[1].0 - 0.125).abs() < 1e-15 && (got[1].1 - c(-0.3, 0.2)).norm() < 1e-9);
    }

    #[test]
    fn zero_sparsity_returns_signal_norm() {
        let s = ComplexSignal::new(vec![c(3.0, 4.0)]).unwrap();
        let r = omp(&s, 8, 0).unwrap();
        assert!(r.freqs.is_empty() && r.amps.is_empty());
        assert_eq!(r.residual_norm, 5.0);
    }

    #[test]
    fn off_grid_tone_within_one_fine_bin() {
        let n = 16;
        let n_grid = 16 * n;
        let f = 0.1234;
        let s = ComplexSignal::new(clean_samples(&FrequencyScene::tone(f, c(1.0, 0.0)), n)).unwrap();
        let r = omp(&s, n_grid, 1).unwrap();
        // exhaustive scan oracle
        let oracle = (0..n_grid)
            .max_by(|&a, &b| scan_correlation(&s.samples, a, n_grid).total_cmp(&scan_correlation(&s.samples, b, n_grid)))
            .unwrap();
        assert_eq!(r.indices[0], oracle);
        assert!((r.freqs[0] - f).abs() <= 1.0 / n_grid as f64);
    }

    #[test]
    fn residuals_never_increase() {
        let scene = FrequencyScene::new(
            vec![0.1, 0.13, -0.4, 0.33],
            vec![c(1.0, 0.0), c(0.5, 0.5), c(0.1, -0.2), c(0.0, 0.7)],
        )
        .unwrap();
        let mut rng = crate::rng::seeded(1);
        let s = crate::signal::synthesize(&scene, 64, 10.0, &mut rng).unwrap();
        let r = omp(&s, 1024, 12).unwrap();
        for w in r.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn coarse_grid_uses_direct_scan() {
        let n = 16;
        let s = ComplexSignal::new(clean_samples(&FrequencyScene::tone(0.25, c(1.0, 0.0)), n)).unwrap();
        let r = omp(&s, 8, 1).unwrap();
        assert_eq!(r.freqs, vec![0.25]);
    }

    #[test]
    fn duplicate_selection_truncates() {
        // K = n on a grid of n atoms exhausts the basis; asking for more atoms
        // than the grid has must stop early.
        let n = 4;
        let scene = FrequencyScene::tone(0.0, c(1.0, 0.0));
        let mut rng = crate::rng::seeded(2);
        let s = crate::signal::synthesize(&scene, n, 0.0, &mut rng).unwrap();
        let r = omp(&s, 2, 3).unwrap();
        assert!(r.truncated);
        assert!(r.freqs.len() <= 2);
    }
}
