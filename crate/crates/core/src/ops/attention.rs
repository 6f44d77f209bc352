use super::softmax::SoftmaxScalar;
use super::{cyclic_shift, linear, same_dtype, shift_mask_labels, window_partition, window_reverse, with_scalar};
use crate::error::{Error, Result};
use crate::graph::Var;
use crate::tensor::{Scalar, Tensor};

/// Projections of one multi-head attention: `q_w, k_w, v_w: [C, h d]`,
/// `out_w: [h d, C]`, `rpe: [h, 2W - 1]` indexed by `j - i + W - 1`.
#[derive(Clone, Copy)]
pub struct AttentionParams<'g> {
    pub q_w: Var<'g>,
    pub q_b: Option<Var<'g>>,
    pub k_w: Var<'g>,
    pub k_b: Option<Var<'g>>,
    pub v_w: Var<'g>,
    pub v_b: Option<Var<'g>>,
    pub rpe: Var<'g>,
    pub out_w: Var<'g>,
    pub out_b: Option<Var<'g>>,
}

#[derive(Clone, Copy)]
struct Dims {
    n_win: usize,
    win: usize,
    heads: usize,
    hd: usize,
}

impl Dims {
    fn width(&self) -> usize {
        self.heads * self.hd
    }

    /// Offset of feature `d` of head `h` at window position `i` of window `w`.
    fn at(&self, w: usize, i: usize, h: usize, d: usize) -> usize {
        (w * self.win + i) * self.width() + h * self.hd + d
    }

    fn keep_row(&self, labels: Option<&[u8]>, w: usize, i: usize) -> Option<Vec<bool>> {
        labels.map(|l| {
            let li = l[w * self.win + i];
            (0..self.win).map(|j| l[w * self.win + j] == li).collect()
        })
    }
}

/// Logits and softmax weights, each laid out `[nW, h, W, W]`.
fn attention_weights<S: SoftmaxScalar>(
    dims: Dims,
    q: &[S],
    k: &[S],
    rpe: &[S],
    labels: Option<&[u8]>,
) -> (Vec<S>, Vec<S>) {
    let Dims { n_win, win, heads, hd } = dims;
    let inv = 1.0 / (hd as f64).sqrt();
    let mut logits = Vec::with_capacity(n_win * heads * win * win);
    let mut probs = Vec::with_capacity(logits.capacity());
    for w in 0..n_win {
        for h in 0..heads {
            for i in 0..win {
                let row: Vec<S> = (0..win)
                    .map(|j| {
                        let mut acc = S::zero();
                        for d in 0..hd {
                            acc += q[dims.at(w, i, h, d)] * k[dims.at(w, j, h, d)];
                        }
                        acc * inv + rpe[h * (2 * win - 1) + j + win - 1 - i]
                    })
                    .collect();
                let keep = dims.keep_row(labels, w, i);
                probs.extend(S::softmax_row(&row, keep.as_deref()));
                logits.extend(row);
            }
        }
    }
    (logits, probs)
}

/// Softmax attention inside each window,
/// `softmax(Q K^T / sqrt(d) + B) V` per head, with `B` expanded from the
/// relative-offset table. Complex inputs use the modulus/phase softmax and a
/// plain (unconjugated) transpose.
///
/// `q, k, v: [nW, W, h d]`, `rpe: [h, 2W - 1]`. With `labels` (one per
/// position, `nW W` long) a query only sees keys carrying its own label.
pub fn window_attention<'g>(
    q: Var<'g>,
    k: Var<'g>,
    v: Var<'g>,
    rpe: Var<'g>,
    heads: usize,
    labels: Option<&[u8]>,
) -> Result<Var<'g>> {
    same_dtype("window_attention", &[q, k, v, rpe])?;
    let dims = check_dims(&q.shape(), &k.shape(), &v.shape(), &rpe.shape(), heads, labels)?;
    let (qv, kv, vv, rv) = (q.value(), k.value(), v.value(), rpe.value());
    let labels = labels.map(|l| l.to_vec());
    let Dims { n_win, win, heads, hd } = dims;
    let inv = 1.0 / (hd as f64).sqrt();

    let (data, saved) = with_scalar!(qv.dtype(), S => {
        let (logits, probs) = attention_weights(dims, S::unwrap(qv.data()), S::unwrap(kv.data()), S::unwrap(rv.data()), labels.as_deref());
        let vs = S::unwrap(vv.data());
        let mut out = vec![S::zero(); vs.len()];
        for w in 0..n_win {
            for h in 0..heads {
                for i in 0..win {
                    let prow = &probs[((w * heads + h) * win + i) * win..][..win];
                    for (j, p) in prow.iter().enumerate() {
                        for d in 0..hd {
                            out[dims.at(w, i, h, d)] += *p * vs[dims.at(w, j, h, d)];
                        }
                    }
                }
            }
        }
        (S::wrap(out), (S::wrap(logits), S::wrap(probs)))
    });
    let out = Tensor::new(qv.shape().to_vec(), data)?;
    Ok(q.graph().op(out, &[q, k, v, rpe], move || {
        Box::new(move |g, wants| {
            with_scalar!(g.dtype(), S => {
                let go = S::unwrap(g);
                let (qs, ks, vs) = (S::unwrap(qv.data()), S::unwrap(kv.data()), S::unwrap(vv.data()));
                let (logits, probs) = (S::unwrap(&saved.0), S::unwrap(&saved.1));
                let mut gq = vec![S::zero(); qs.len()];
                let mut gk = vec![S::zero(); ks.len()];
                let mut gv = vec![S::zero(); vs.len()];
                let mut grpe = vec![S::zero(); heads * (2 * win - 1)];
                for w in 0..n_win {
                    for h in 0..heads {
                        for i in 0..win {
                            let base = ((w * heads + h) * win + i) * win;
                            let prow = &probs[base..base + win];
                            let mut gp = vec![S::zero(); win];
                            for (j, gpj) in gp.iter_mut().enumerate() {
                                for d in 0..hd {
                                    let go_id = go[dims.at(w, i, h, d)];
                                    *gpj += go_id * vs[dims.at(w, j, h, d)].conj();
                                    gv[dims.at(w, j, h, d)] += prow[j].conj() * go_id;
                                }
                            }
                            let keep = dims.keep_row(labels.as_deref(), w, i);
                            let ga = S::softmax_row_backward(&logits[base..base + win], prow, &gp, keep.as_deref());
                            for (j, gaj) in ga.iter().enumerate() {
                                grpe[h * (2 * win - 1) + j + win - 1 - i] += *gaj;
                                for d in 0..hd {
                                    gq[dims.at(w, i, h, d)] += *gaj * ks[dims.at(w, j, h, d)].conj() * inv;
                                    gk[dims.at(w, j, h, d)] += *gaj * qs[dims.at(w, i, h, d)].conj() * inv;
                                }
                            }
                        }
                    }
                }
                vec![
                    wants[0].then(|| S::wrap(gq)),
                    wants[1].then(|| S::wrap(gk)),
                    wants[2].then(|| S::wrap(gv)),
                    wants[3].then(|| S::wrap(grpe)),
                ]
            })
        })
    }))
}

fn check_dims(
    q: &[usize],
    k: &[usize],
    v: &[usize],
    rpe: &[usize],
    heads: usize,
    labels: Option<&[u8]>,
) -> Result<Dims> {
    let &[n_win, win, width] = q else {
        return Err(Error::shape("window_attention", format!("q must be [nW, W, h d], got {q:?}")));
    };
    if k != q || v != q {
        return Err(Error::shape("window_attention", format!("q {q:?}, k {k:?}, v {v:?} differ")));
    }
    if heads == 0 || width % heads != 0 || width == 0 {
        return Err(Error::shape("window_attention", format!("{heads} heads do not split width {width}")));
    }
    if win == 0 || rpe != [heads, 2 * win - 1] {
        return Err(Error::shape("window_attention", format!("rpe must be [{heads}, {}], got {rpe:?}", 2 * win - 1)));
    }
    if labels.is_some_and(|l| l.len() != n_win * win) {
        return Err(Error::shape("window_attention", "one label per position required"));
    }
    Ok(Dims { n_win, win, heads, hd: width / heads })
}

/// Attention weights `[nW, h, W, W]` of [`window_attention`] for plain
/// tensors, for inspection.
pub fn window_attention_weights(
    q: &Tensor,
    k: &Tensor,
    rpe: &Tensor,
    heads: usize,
    labels: Option<&[u8]>,
) -> Result<Tensor> {
    if q.dtype() != k.dtype() || q.dtype() != rpe.dtype() {
        return Err(Error::shape("window_attention", "mixed real and complex inputs"));
    }
    let dims = check_dims(q.shape(), k.shape(), q.shape(), rpe.shape(), heads, labels)?;
    let data = with_scalar!(q.dtype(), S => {
        S::wrap(attention_weights(dims, S::unwrap(q.data()), S::unwrap(k.data()), S::unwrap(rpe.data()), labels).1)
    });
    Tensor::new(vec![dims.n_win, dims.heads, dims.win, dims.win], data)
}

/// Window multi-head self-attention on `x: [M, C]`.
///
/// With `shift > 0` the sequence is rotated by `-shift` first, keys are
/// masked to the query's segment so that wrapped-around positions do not
/// mix, and the rotation is undone at the end.
pub fn wmsa<'g>(x: Var<'g>, p: &AttentionParams<'g>, window: usize, heads: usize, shift: usize) -> Result<Var<'g>> {
    let shape = x.shape();
    let &[m, _] = &shape[..] else {
        return Err(Error::shape("wmsa", format!("expected [M, C], got {shape:?}")));
    };
    if shift != 0 && shift != window / 2 {
        return Err(Error::invalid(format!("shift must be 0 or {}, got {shift}", window / 2)));
    }
    let xs = if shift > 0 { cyclic_shift(x, -(shift as isize))? } else { x };
    let q = window_partition(linear(xs, p.q_w, p.q_b)?, window)?;
    let k = window_partition(linear(xs, p.k_w, p.k_b)?, window)?;
    let v = window_partition(linear(xs, p.v_w, p.v_b)?, window)?;
    let labels = (shift > 0).then(|| shift_mask_labels(m, window, shift));
    let o = window_reverse(window_attention(q, k, v, p.rpe, heads, labels.as_deref())?)?;
    let y = linear(o, p.out_w, p.out_b)?;
    if shift > 0 {
        cyclic_shift(y, shift as isize)
    } else {
        Ok(y)
    }
}
