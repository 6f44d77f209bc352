use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::ParameterStore;
use crate::tensor::{Data, Tensor};

/// AdamW hyperparameters for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay }
    }
}

/// One AdamW update of every parameter in `store`.
///
/// Weight decay is decoupled (`p <- p (1 - lr wd)` before the Adam step).
/// Complex parameters are updated as two independent real coordinates.
/// Parameters without an entry in `grads` see a zero gradient.
pub fn adamw_step(store: &mut ParameterStore, grads: &BTreeMap<String, Data>, opt: &AdamW) -> Result<()> {
    let names: Vec<String> = store.names().map(String::from).collect();
    for (name, g) in grads {
        let p = store
            .get(name)
            .ok_or_else(|| Error::invalid(format!("gradient for unknown parameter '{name}'")))?;
        if g.len() != p.numel() || g.dtype() != p.dtype() {
            return Err(Error::shape("adamw_step", format!("gradient of '{name}' does not match the parameter")));
        }
    }
    store.optimizer.t += 1;
    let t = store.optimizer.t as i32;
    let bc1 = 1.0 - opt.beta1.powi(t);
    let bc2 = 1.0 - opt.beta2.powi(t);
    for name in names {
        let p = store.get(&name).expect("listed").clone();
        let mut coords = p.data().real_coords();
        let g = grads.get(&name).map(Data::real_coords).unwrap_or_else(|| vec![0.0; coords.len()]);
        let m = store.optimizer.m.entry(name.clone()).or_insert_with(|| vec![0.0; coords.len()]);
        let v = store.optimizer.v.entry(name.clone()).or_insert_with(|| vec![0.0; coords.len()]);
        for i in 0..coords.len() {
            coords[i] *= 1.0 - opt.lr * opt.weight_decay;
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            coords[i] -= opt.lr * mhat / (vhat.sqrt() + opt.eps);
        }
        store.set(&name, Tensor::new(p.shape().to_vec(), Data::from_real_coords(p.dtype(), coords))?)?;
    }
    Ok(())
}
