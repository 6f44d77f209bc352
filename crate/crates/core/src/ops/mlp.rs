use super::{cprelu, gelu, linear};
use crate::error::Result;
use crate::graph::Var;

/// Nonlinearity between the two MLP layers.
#[derive(Clone, Copy)]
pub enum Activation<'g> {
    Gelu,
    /// Learned `[a_re, a_im]` slopes.
    CPrelu(Var<'g>),
}

/// `w2(act(w1 x + b1)) + b2` over the last axis.
pub fn mlp<'g>(
    x: Var<'g>,
    w1: Var<'g>,
    b1: Option<Var<'g>>,
    w2: Var<'g>,
    b2: Option<Var<'g>>,
    act: Activation<'g>,
) -> Result<Var<'g>> {
    let hidden = linear(x, w1, b1)?;
    let hidden = match act {
        Activation::Gelu => gelu(hidden)?,
        Activation::CPrelu(slopes) => cprelu(hidden, slopes)?,
    };
    linear(hidden, w2, b2)
}
