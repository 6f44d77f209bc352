//! Differentiable real- and complex-valued operators.
//!
//! Every op takes [`Var`](crate::graph::Var)s, computes its value eagerly and,
//! when any input wants a gradient, records a hand-written reverse pass.
//! Complex gradients follow the `dL/dRe + j dL/dIm` convention of
//! [`crate::tensor`]; for a holomorphic map `y = f(x)` this makes the reverse
//! pass `g_x = conj(f'(x)) g_y`.

mod activation;
mod attention;
mod basic;
mod conv;
mod gradcheck;
mod init;
mod linear;
mod matmul;
mod mlp;
mod norm;
mod softmax;
mod window;

pub use activation::{cprelu, gelu, relu};
pub use attention::{window_attention, window_attention_weights, wmsa, AttentionParams};
pub use basic::{add, modulus, mse, reshape, scale, transpose, weighted_sum};
pub use conv::{conv1d, conv_transpose1d};
pub use gradcheck::{grad_check, GradCheckReport};
pub use init::{init_params, InitKind};
pub use linear::linear;
pub use mlp::{mlp, Activation};
pub use norm::{cv_layer_norm, layer_norm, LN_EPS};
pub use softmax::{cv_softmax, softmax, SoftmaxScalar, CV_SOFTMAX_EPS};
pub use window::{cyclic_shift, shift_mask_labels, window_partition, window_reverse};

/// Run `$body` with `$S` bound to the scalar type of `$dtype`.
macro_rules! with_scalar {
    ($dtype:expr, $S:ident => $body:expr) => {
        match $dtype {
            $crate::tensor::DType::Real => {
                type $S = f64;
                $body
            }
            $crate::tensor::DType::Complex => {
                type $S = num_complex::Complex64;
                $body
            }
        }
    };
}
pub(crate) use with_scalar;

use crate::error::{Error, Result};
use crate::graph::Var;

pub(crate) fn same_dtype(op: &'static str, vars: &[Var<'_>]) -> Result<()> {
    let d = vars[0].dtype();
    if vars.iter().any(|v| v.dtype() != d) {
        return Err(Error::shape(op, "mixed real and complex inputs"));
    }
    Ok(())
}
