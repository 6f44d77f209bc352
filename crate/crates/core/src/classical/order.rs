use crate::error::{Error, Result};

/// Akaike information criterion over candidate orders `k = 0..m-1`:
///
/// `AIC(k) = -2 N (m-k) log(g_k / a_k) + 2 k (2m - k)`
///
/// with `g_k`, `a_k` the geometric and arithmetic means of the `m - k`
/// smallest eigenvalues and `N` the snapshot count. Returns the argmin.
pub fn estimate_order_aic(eigenvalues: &[f64], n_snapshots: usize) -> Result<usize> {
    check_descending(eigenvalues, 2)?;
    let m = eigenvalues.len();
    let mut best = (f64::INFINITY, 0);
    for k in 0..m {
        let tail = &eigenvalues[k..];
        let len = tail.len() as f64;
        let log_geo = tail.iter().map(|l| l.ln()).sum::<f64>() / len;
        let arith = tail.iter().sum::<f64>() / len;
        let score = -2.0 * n_snapshots as f64 * len * (log_geo - arith.ln())
            + 2.0 * k as f64 * (2 * m - k) as f64;
        if score < best.0 {
            best = (score, k);
        }
    }
    Ok(best.1)
}

/// SORTE estimate; `degenerate` means no candidate had a finite score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SorteEstimate {
    pub order: usize,
    pub degenerate: bool,
}

/// Second-order statistic of eigenvalues. With gaps `d_i = l_i - l_{i+1}`,
///
/// `SORTE(k) = var(d_{k+1..m-1}) / var(d_{k..m-1})`,  `k = 1..=m-3`
///
/// (1-based gap indices, population variances). A zero denominator scores
/// `+inf`; if every score is infinite the order is 0 and flagged degenerate.
pub fn estimate_order_sorte(eigenvalues: &[f64]) -> Result<SorteEstimate> {
    if eigenvalues.len() < 4 {
        return Err(Error::invalid(format!(
            "SORTE needs at least 4 eigenvalues, got {}",
            eigenvalues.len()
        )));
    }
    check_descending(eigenvalues, 4)?;
    let gaps: Vec<f64> = eigenvalues.windows(2).map(|w| w[0] - w[1]).collect();
    let m = eigenvalues.len();
    let mut best = (f64::INFINITY, 0);
    for k in 1..=m - 3 {
        // gaps[i - 1] is d_i
        let den = variance(&gaps[k - 1..]);
        let score = if den > 0.0 { variance(&gaps[k..]) / den } else { f64::INFINITY };
        if score < best.0 {
            best = (score, k);
        }
    }
    Ok(SorteEstimate { order: best.1, degenerate: best.0.is_infinite() })
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

fn check_descending(ev: &[f64], min_len: usize) -> Result<()> {
    if ev.len() < min_len {
        return Err(Error::invalid(format!("need at least {min_len} eigenvalues, got {}", ev.len())));
    }
    if let Some(&bad) = ev.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::NonPositiveEigenvalue(bad));
    }
    if ev.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("eigenvalues must be sorted descending"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight transcription of the AIC formula, one k at a time.
    fn aic_scores(ev: &[f64], n: usize) -> Vec<f64> {
        let m = ev.len();
        (0..m)
            .map(|k| {
                let tail = &ev[k..];
                let p = tail.len() as f64;
                let geo = tail.iter().product::<f64>().powf(1.0 / p);
                let ari = tail.iter().sum::<f64>() / p;
                -2.0 * n as f64 * p * (geo / ari).ln() + 2.0 * (k * (2 * m - k)) as f64
            })
            .collect()
    }

    fn argmin(v: &[f64]) -> usize {
        v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    }

    #[test]
    fn equal_eigenvalues_give_order_zero() {
        assert_eq!(estimate_order_aic(&[2.0; 6], 100).unwrap(), 0);
    }

    #[test]
    fn two_strong_eigenvalues() {
        let ev = [100.0, 100.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(argmin(&aic_scores(&ev, 64)), 2);
        assert_eq!(estimate_order_aic(&ev, 64).unwrap(), 2);
    }

    #[test]
    fn two_eigenvalue_case_follows_formula() {
        let ev = [10.0, 1.0];
        for n in [1, 64] {
            let expect = argmin(&aic_scores(&ev, n));
            assert_eq!(estimate_order_aic(&ev, n).unwrap(), expect);
        }
        assert_eq!(estimate_order_aic(&ev, 1).unwrap(), 0);
        assert_eq!(estimate_order_aic(&ev, 64).unwrap(), 1);
    }

    #[test]
    fn aic_rejects_nonpositive() {
        assert!(matches!(
            estimate_order_aic(&[3.0, 0.0], 10),
            Err(Error::NonPositiveEigenvalue(_))
        ));
    }

    #[test]
    fn sorte_examples() {
        assert_eq!(
            estimate_order_sorte(&[10.0, 10.0, 1.0, 1.0, 1.0, 1.0]).unwrap(),
            SorteEstimate { order: 2, degenerate: false }
        );
        assert_eq!(
            estimate_order_sorte(&[5.0, 1.0, 1.0, 1.0, 1.0]).unwrap(),
            SorteEstimate { order: 1, degenerate: false }
        );
    }

    #[test]
    fn sorte_linear_decay_is_degenerate() {
        let ev: Vec<f64> = (0..8).map(|i| 10.0 - i as f64).collect();
        assert_eq!(
            estimate_order_sorte(&ev).unwrap(),
            SorteEstimate { order: 0, degenerate: true }
        );
    }

    #[test]
    fn sorte_needs_four() {
        assert!(estimate_order_sorte(&[3.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn scale_invariance() {
        let ev = [40.0, 22.0, 9.0, 1.3, 1.1, 1.0, 0.9];
        let scaled: Vec<f64> = ev.iter().map(|l| l * 37.5).collect();
        assert_eq!(estimate_order_aic(&ev, 50).unwrap(), estimate_order_aic(&scaled, 50).unwrap());
        assert_eq!(estimate_order_sorte(&ev).unwrap(), estimate_order_sorte(&scaled).unwrap());
    }
}
