use super::with_scalar;
use crate::error::{Error, Result};
use crate::graph::Var;
use crate::tensor::{Scalar, Tensor};

fn roll<S: Scalar>(x: &[S], rows: usize, cols: usize, s: isize) -> Vec<S> {
    let mut out = vec![S::zero(); x.len()];
    let shift = s.rem_euclid(rows as isize) as usize;
    for m in 0..rows {
        let dst = (m + shift) % rows;
        out[dst * cols..(dst + 1) * cols].copy_from_slice(&x[m * cols..(m + 1) * cols]);
    }
    out
}

/// Circular rotation along the first axis of `x: [M, C]`:
/// `y[(m + s) mod M] = x[m]`.
pub fn cyclic_shift<'g>(x: Var<'g>, s: isize) -> Result<Var<'g>> {
    let xv = x.value();
    let &[rows, cols] = xv.shape() else {
        return Err(Error::shape("cyclic_shift", format!("expected [M, C], got {:?}", xv.shape())));
    };
    if rows == 0 {
        return Err(Error::shape("cyclic_shift", "empty sequence"));
    }
    let data = with_scalar!(xv.dtype(), S => S::wrap(roll(S::unwrap(xv.data()), rows, cols, s)));
    let out = Tensor::new(vec![rows, cols], data)?;
    Ok(x.graph().op(out, &[x], move || {
        Box::new(move |g, _| {
            let gd = with_scalar!(g.dtype(), S => S::wrap(roll(S::unwrap(g), rows, cols, -s)));
            vec![Some(gd)]
        })
    }))
}

/// `[M, C]` -> `[M / W, W, C]`, contiguous non-overlapping windows.
pub fn window_partition<'g>(x: Var<'g>, window: usize) -> Result<Var<'g>> {
    let shape = x.shape();
    let &[m, c] = &shape[..] else {
        return Err(Error::shape("window_partition", format!("expected [M, C], got {shape:?}")));
    };
    if window == 0 || m % window != 0 {
        return Err(Error::shape("window_partition", format!("window {window} does not divide length {m}")));
    }
    super::reshape(x, &[m / window, window, c])
}

/// Inverse of [`window_partition`].
pub fn window_reverse<'g>(x: Var<'g>) -> Result<Var<'g>> {
    let shape = x.shape();
    let &[n, w, c] = &shape[..] else {
        return Err(Error::shape("window_reverse", format!("expected [nW, W, C], got {shape:?}")));
    };
    super::reshape(x, &[n * w, c])
}

/// Segment label of every position of a sequence that has been shifted by
/// `-shift`; attention is only allowed between equal labels.
///
/// The last window holds the wrapped-around tail, so it splits into a part
/// that was originally in the sequence interior (label 1) and the part that
/// came from the head (label 2).
pub fn shift_mask_labels(m: usize, window: usize, shift: usize) -> Vec<u8> {
    let mut labels = vec![0u8; m];
    if shift == 0 || window > m {
        return labels;
    }
    for (i, l) in labels.iter_mut().enumerate() {
        *l = if i < m - window {
            0
        } else if i < m - shift {
            1
        } else {
            2
        };
    }
    labels
}
