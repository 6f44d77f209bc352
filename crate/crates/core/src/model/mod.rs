//! SwinFreq and CVSwinFreq.
//!
//! A complex front end maps the length-`N` signal to an `[M, C]` feature
//! map, `B` blocks of `D` shifted-window transformer layers refine it, and a
//! transposed convolution upsamples the residual sum to the `N_SR` grid.

mod config;
mod store;

pub use config::{ModelConfig, Variant};
pub use store::{param_count, param_shapes, OptimizerState, ParamInit, ParamSpec, ParameterStore, Params, CHECKPOINT_VERSION};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::ops::{
    add, conv1d, conv_transpose1d, cv_layer_norm, layer_norm, mlp, modulus, relu, reshape, transpose, wmsa,
    Activation, AttentionParams,
};
use crate::signal::{minmax_normalize, ComplexSignal, RealSpectrum};
use crate::tensor::{DType, Tensor};

/// Front end: complex linear map to `F` planes of length `M`, then a complex
/// convolution over the planes (kernel `F x 3`, same padding along `M`) that
/// produces `C` channels. Returns `[M, C]`, taking the modulus for the real
/// variant.
pub fn mf_forward<'g>(x: Var<'g>, p: &Params<'g>, cfg: &ModelConfig) -> Result<Var<'g>> {
    if x.shape() != [cfg.n] || x.dtype() != DType::Complex {
        return Err(Error::shape("mf_forward", format!("expected complex [{}], got {:?}", cfg.n, x.shape())));
    }
    let row = reshape(x, &[1, cfg.n])?;
    let planes = crate::ops::linear(row, p.get("mf.linear.weight")?, Some(p.get("mf.linear.bias")?))?;
    let planes = reshape(planes, &[cfg.mf_filters, cfg.inner])?;
    let feat = conv1d(planes, p.get("mf.conv.weight")?, Some(p.get("mf.conv.bias")?), 1, 1)?;
    let feat = transpose(feat)?;
    match cfg.variant {
        Variant::SwinFreq => modulus(feat),
        Variant::CvSwinFreq => Ok(feat),
    }
}

fn norm<'g>(x: Var<'g>, p: &Params<'g>, prefix: &str, cfg: &ModelConfig) -> Result<Var<'g>> {
    let gamma = Some(p.get(&format!("{prefix}.gamma"))?);
    let beta = Some(p.get(&format!("{prefix}.beta"))?);
    match cfg.variant {
        Variant::SwinFreq => layer_norm(x, gamma, beta),
        Variant::CvSwinFreq => cv_layer_norm(x, gamma, beta),
    }
}

/// One transformer layer: pre-norm window attention and pre-norm MLP, each
/// with a residual connection.
pub fn sstl_forward<'g>(g: Var<'g>, p: &Params<'g>, prefix: &str, cfg: &ModelConfig, shift: usize) -> Result<Var<'g>> {
    let w = |name: &str| p.get(&format!("{prefix}.{name}"));
    let attn = AttentionParams {
        q_w: w("attn.q.weight")?,
        q_b: Some(w("attn.q.bias")?),
        k_w: w("attn.k.weight")?,
        k_b: Some(w("attn.k.bias")?),
        v_w: w("attn.v.weight")?,
        v_b: Some(w("attn.v.bias")?),
        rpe: w("attn.rpe")?,
        out_w: w("attn.out.weight")?,
        out_b: Some(w("attn.out.bias")?),
    };
    let a = wmsa(norm(g, p, &format!("{prefix}.norm1"), cfg)?, &attn, cfg.window, cfg.heads, shift)?;
    let g1 = add(a, g)?;
    let act = match cfg.variant {
        Variant::SwinFreq => Activation::Gelu,
        Variant::CvSwinFreq => Activation::CPrelu(w("mlp.act.slopes")?),
    };
    let m = mlp(
        norm(g1, p, &format!("{prefix}.norm2"), cfg)?,
        w("mlp.fc1.weight")?,
        Some(w("mlp.fc1.bias")?),
        w("mlp.fc2.weight")?,
        Some(w("mlp.fc2.bias")?),
        act,
    )?;
    add(m, g1)
}

/// Shift used by layer `index` (0-based) of a block: unshifted first, then
/// alternating with `W / 2`.
pub fn layer_shift(index: usize, window: usize) -> usize {
    if index % 2 == 0 {
        0
    } else {
        window / 2
    }
}

/// Same-length convolution over `M` of an `[M, C]` map.
fn conv_over_m<'g>(x: Var<'g>, weight: Var<'g>, bias: Var<'g>) -> Result<Var<'g>> {
    transpose(conv1d(transpose(x)?, weight, Some(bias), 1, 1)?)
}

/// `D` layers followed by a convolution of the block input plus the layer
/// stack output.
pub fn sstb_forward<'g>(f: Var<'g>, p: &Params<'g>, block: usize, cfg: &ModelConfig) -> Result<Var<'g>> {
    let mut g = f;
    for l in 0..cfg.depth {
        g = sstl_forward(g, p, &format!("blocks.{block}.layers.{l}"), cfg, layer_shift(l, cfg.window))?;
    }
    conv_over_m(add(f, g)?, p.get(&format!("blocks.{block}.conv.weight"))?, p.get(&format!("blocks.{block}.conv.bias"))?)
}

/// Blocks, long residual, modulus (complex variant), transposed-convolution
/// head and a final clamp at zero. Returns `[N_SR]`.
pub fn sr_forward<'g>(f0: Var<'g>, p: &Params<'g>, cfg: &ModelConfig) -> Result<Var<'g>> {
    let mut f = f0;
    for b in 0..cfg.blocks {
        f = sstb_forward(f, p, b, cfg)?;
    }
    let mut h = add(f0, f)?;
    if cfg.variant == Variant::CvSwinFreq {
        h = modulus(h)?;
    }
    let (_, pad) = cfg.head_geometry();
    let y = conv_transpose1d(transpose(h)?, p.get("head.weight")?, Some(p.get("head.bias")?), cfg.stride(), pad)?;
    relu(reshape(y, &[cfg.n_sr])?)
}

/// Forward graph for an already normalized input.
pub fn forward_normalized<'g>(graph: &'g Graph, p: &Params<'g>, cfg: &ModelConfig, x: &[Complex64]) -> Result<Var<'g>> {
    let x = graph.constant(Tensor::complex(&[x.len()], x.to_vec())?);
    sr_forward(mf_forward(x, p, cfg)?, p, cfg)
}

/// Inference: normalize, run the model, return the super-resolved spectrum.
pub fn model_forward(x: &ComplexSignal, store: &ParameterStore) -> Result<RealSpectrum> {
    let cfg = store.config();
    if x.len() != cfg.n {
        return Err(Error::shape("model_forward", format!("expected {} samples, got {}", cfg.n, x.len())));
    }
    let graph = Graph::no_grad();
    let p = store.bind(&graph);
    let y = forward_normalized(&graph, &p, cfg, &minmax_normalize(x).samples)?;
    let values = y.value().as_real().expect("head output is real").to_vec();
    RealSpectrum::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{sample_scene, synthesize, SceneConfig};
    use rand::Rng;

    fn rand_signal(n: usize, seed: u64) -> ComplexSignal {
        let mut r = crate::rng::seeded(seed);
        ComplexSignal::new((0..n).map(|_| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect())
            .unwrap()
    }

    #[test]
    fn default_shapes() {
        for variant in [Variant::SwinFreq, Variant::CvSwinFreq] {
            let cfg = ModelConfig::default_for(variant);
            let store = ParameterStore::init(&cfg, &mut crate::rng::seeded(0)).unwrap();
            let g = Graph::no_grad();
            let p = store.bind(&g);
            let x = g.constant(Tensor::complex(&[64], minmax_normalize(&rand_signal(64, 1)).samples).unwrap());
            let f0 = mf_forward(x, &p, &cfg).unwrap();
            assert_eq!(f0.shape(), vec![256, 32]);
            if variant == Variant::SwinFreq {
                assert!(f0.value().as_real().unwrap().iter().all(|v| *v >= 0.0));
            }
            let y = sr_forward(f0, &p, &cfg).unwrap();
            assert_eq!(y.shape(), vec![4096]);
        }
    }

    #[test]
    fn zero_input_and_bias_give_zero_features() {
        let cfg = ModelConfig::micro(Variant::CvSwinFreq);
        let store = ParameterStore::init(&cfg, &mut crate::rng::seeded(0)).unwrap();
        let g = Graph::no_grad();
        let p = store.bind(&g);
        let x = g.constant(Tensor::zeros(&[cfg.n], DType::Complex));
        let f0 = mf_forward(x, &p, &cfg).unwrap().value();
        assert!(f0.as_complex().unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn front_end_is_phase_equivariant() {
        let cfg = ModelConfig::micro(Variant::CvSwinFreq);
        let store = ParameterStore::init(&cfg, &mut crate::rng::seeded(2)).unwrap();
        let s = rand_signal(cfg.n, 3);
        let rot = Complex64::from_polar(1.0, 0.7);
        let g = Graph::no_grad();
        let p = store.bind(&g);
        let a = mf_forward(g.constant(Tensor::complex(&[cfg.n], s.samples.clone()).unwrap()), &p, &cfg).unwrap();
        let b = mf_forward(g.constant(Tensor::complex(&[cfg.n], s.rotated(0.7).samples).unwrap()), &p, &cfg).unwrap();
        for (u, v) in a.value().as_complex().unwrap().iter().zip(b.value().as_complex().unwrap()) {
            assert!((u * rot - v).norm() < 1e-12);
        }
    }

    #[test]
    fn residual_paths_only_layer_is_identity() {
        let cfg = ModelConfig::micro(Variant::SwinFreq);
        let mut store = ParameterStore::init(&cfg, &mut crate::rng::seeded(4)).unwrap();
        for name in ["attn.out.weight", "attn.out.bias", "mlp.fc2.weight", "mlp.fc2.bias"] {
            let full = format!("blocks.0.layers.0.{name}");
            let shape = store.get(&full).unwrap().shape().to_vec();
            store.set(&full, Tensor::zeros(&shape, DType::Real)).unwrap();
        }
        let g = Graph::no_grad();
        let p = store.bind(&g);
        let mut r = crate::rng::seeded(5);
        let x = g.constant(Tensor::real(&[16, 2], (0..32).map(|_| r.random::<f64>()).collect()).unwrap());
        let y = sstl_forward(x, &p, "blocks.0.layers.0", &cfg, 0).unwrap();
        assert_eq!(*y.value(), *x.value());
    }

    #[test]
    fn empty_stacks_reduce_to_convolution_and_head() {
        let cfg = ModelConfig { depth: 0, ..ModelConfig::micro(Variant::SwinFreq) };
        let store = ParameterStore::init(&cfg, &mut crate::rng::seeded(6)).unwrap();
        let g = Graph::no_grad();
        let p = store.bind(&g);
        let mut r = crate::rng::seeded(7);
        let f = g.constant(Tensor::real(&[16, 2], (0..32).map(|_| r.random::<f64>()).collect()).unwrap());
        let out = sstb_forward(f, &p, 0, &cfg).unwrap();
        let twice = crate::ops::scale(f, 2.0).unwrap();
        let expect = conv_over_m(twice, p.get("blocks.0.conv.weight").unwrap(), p.get("blocks.0.conv.bias").unwrap())
            .unwrap();
        assert_eq!(*out.value(), *expect.value());
    }

    #[test]
    fn inference_is_deterministic_and_finite() {
        let cfg = ModelConfig::toy(Variant::CvSwinFreq);
        let store = ParameterStore::init(&cfg, &mut crate::rng::seeded(8)).unwrap();
        let mut r = crate::rng::seeded(9);
        let scene_cfg = SceneConfig::for_grid(cfg.n_sr);
        for _ in 0..20 {
            let scene = sample_scene(&mut r, &scene_cfg).unwrap();
            let s = synthesize(&scene, cfg.n, -10.0, &mut r).unwrap();
            let a = model_forward(&s, &store).unwrap();
            let b = model_forward(&s, &store).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), cfg.n_sr);
            assert!(a.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    fn model_grad_check(variant: Variant) -> f64 {
        let cfg = ModelConfig::micro(variant);
        let store = ParameterStore::init(&cfg, &mut crate::rng::seeded(11)).unwrap();
        let names: Vec<String> = store.names().map(String::from).collect();
        let inputs: Vec<Tensor> = store.iter().map(|(_, t)| (**t).clone()).collect();
        let mut r = crate::rng::seeded(12);
        let x = minmax_normalize(&rand_signal(cfg.n, 13)).samples;
        let target: Vec<f64> = (0..cfg.n_sr).map(|_| r.random::<f64>()).collect();
        let report = crate::ops::grad_check(
            "model",
            |g, v| {
                let p = Params::from_vars(names.iter().cloned().zip(v.iter().copied()));
                crate::ops::mse(forward_normalized(g, &p, &cfg, &x)?, &target)
            },
            &inputs,
            1e-5,
            0,
        )
        .unwrap();
        println!("{variant}: {report:?}");
        report.max_rel_error
    }

    #[test]
    fn micro_model_gradients_match_differences() {
        assert!(model_grad_check(Variant::SwinFreq) < 1e-3);
        assert!(model_grad_check(Variant::CvSwinFreq) < 1e-3);
    }
}
