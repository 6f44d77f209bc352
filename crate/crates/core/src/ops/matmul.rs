use num_complex::Complex64;

use crate::tensor::Scalar;

/// Dense row-major matrix product `c[m, n] = a[m, k] b[k, n]`.
pub(crate) trait Matmul: Scalar {
    fn matmul(m: usize, k: usize, n: usize, a: &[Self], b: &[Self]) -> Vec<Self>;
}

impl Matmul for f64 {
    fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        real_matmul(m, k, n, a, b)
    }
}

impl Matmul for Complex64 {
    /// Gauss' trick: three real products instead of four.
    ///
    /// `k1 = (Re a + Im a) Re b`, `k2 = Re a (Im b - Re b)`,
    /// `k3 = Im a (Re b + Im b)`; then `Re c = k1 - k3`, `Im c = k1 + k2`.
    fn matmul(m: usize, k: usize, n: usize, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let ar: Vec<f64> = a.iter().map(|z| z.re).collect();
        let ai: Vec<f64> = a.iter().map(|z| z.im).collect();
        let a_sum: Vec<f64> = a.iter().map(|z| z.re + z.im).collect();
        let br: Vec<f64> = b.iter().map(|z| z.re).collect();
        let b_diff: Vec<f64> = b.iter().map(|z| z.im - z.re).collect();
        let b_sum: Vec<f64> = b.iter().map(|z| z.re + z.im).collect();
        let k1 = real_matmul(m, k, n, &a_sum, &br);
        let k2 = real_matmul(m, k, n, &ar, &b_diff);
        let k3 = real_matmul(m, k, n, &ai, &b_sum);
        (0..m * n)
            .map(|i| Complex64::new(k1[i] - k3[i], k1[i] + k2[i]))
            .collect()
    }
}

fn real_matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, bj) in row.iter_mut().zip(brow) {
                *cj += aip * bj;
            }
        }
    }
    c
}

/// `conj(a)^T` for a row-major `[rows, cols]` matrix.
pub(crate) fn conj_transpose<S: Scalar>(a: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut out = vec![S::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c].conj();
        }
    }
    out
}

/// Plain transpose.
pub(crate) fn transpose_copy<S: Scalar>(a: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut out = vec![S::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// Four real products per complex multiply.
    fn naive(m: usize, k: usize, n: usize, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(0.0, 0.0); m * n];
        for i in 0..m {
            for j in 0..n {
                let mut re = 0.0;
                let mut im = 0.0;
                for p in 0..k {
                    let x = a[i * k + p];
                    let y = b[p * n + j];
                    re += x.re * y.re - x.im * y.im;
                    im += x.re * y.im + x.im * y.re;
                }
                c[i * n + j] = Complex64::new(re, im);
            }
        }
        c
    }

    #[test]
    fn gauss_trick_matches_four_product_form() {
        let mut r = rng::seeded(0);
        let mut rand_c = |len: usize| -> Vec<Complex64> {
            (0..len).map(|_| Complex64::new(r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0)).collect()
        };
        for &(m, k, n) in &[(4, 3, 2), (1, 1, 1), (7, 16, 5)] {
            let a = rand_c(m * k);
            let b = rand_c(k * n);
            let g = Complex64::matmul(m, k, n, &a, &b);
            let o = naive(m, k, n, &a, &b);
            for (x, y) in g.iter().zip(&o) {
                assert!((x - y).norm() <= 1e-6 * y.norm().max(1e-12));
            }
        }
    }
}
