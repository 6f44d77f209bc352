use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// Square conjugate-symmetric matrix (row-major view via nalgebra).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    pub(crate) inner: DMatrix<Complex64>,
}

impl HermitianMatrix {
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.inner[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.inner
    }

    /// Eigenvalues sorted descending, with matching eigenvectors as columns.
    pub fn eigen_descending(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        let eig = self.inner.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn eigenvalues_descending(&self) -> Vec<f64> {
        self.eigen_descending().0
    }
}

/// Forward-backward spatially smoothed covariance from one snapshot: the mean
/// of `x_k x_k^H` over all length-`m` sliding windows, averaged with its
/// exchange-conjugated counterpart `J conj(R) J`.
pub fn sample_covariance(signal: &ComplexSignal, m: usize) -> Result<HermitianMatrix> {
    let n = signal.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("subarray length {m} must be in 1..={n}")));
    }
    let s = &signal.samples;
    let windows = n - m + 1;
    let mut fwd = DMatrix::<Complex64>::zeros(m, m);
    for k in 0..windows {
        for i in 0..m {
            let xi = s[k + i];
            for j in 0..m {
                fwd[(i, j)] += xi * s[k + j].conj();
            }
        }
    }
    let scale = 1.0 / (2.0 * windows as f64);
    let r = DMatrix::from_fn(m, m, |i, j| {
        let back = fwd[(m - 1 - i, m - 1 - j)].conj();
        (fwd[(i, j)] + back) * scale
    });
    // exact Hermitian symmetry regardless of accumulation rounding
    let r = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            Complex64::new(r[(i, i)].re, 0.0)
        } else if i < j {
            r[(i, j)]
        } else {
            r[(j, i)].conj()
        }
    });
    Ok(HermitianMatrix { inner: r })
}
