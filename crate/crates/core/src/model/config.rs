use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::DType;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Real-valued transformer blocks after a modulus on the front-end features.
    SwinFreq,
    /// Complex-valued blocks; the modulus is taken just before the output head.
    CvSwinFreq,
}

impl Variant {
    /// Scalar type of the feature maps between the front end and the head.
    pub fn feature_dtype(self) -> DType {
        match self {
            Variant::SwinFreq => DType::Real,
            Variant::CvSwinFreq => DType::Complex,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "swinfreq" => Ok(Variant::SwinFreq),
            "cvswinfreq" => Ok(Variant::CvSwinFreq),
            other => Err(Error::invalid(format!("unknown model variant '{other}' (swinfreq, cvswinfreq)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::SwinFreq => "swinfreq",
            Variant::CvSwinFreq => "cvswinfreq",
        })
    }
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Input length `N`.
    pub n: usize,
    /// Output grid size `N_SR`.
    pub n_sr: usize,
    /// Feature channels `C`.
    pub channels: usize,
    /// Inner feature length `M`.
    pub inner: usize,
    /// Attention window `W`.
    pub window: usize,
    pub heads: usize,
    /// Attention dimension per head `d`.
    pub head_dim: usize,
    /// Layers per block `D`.
    pub depth: usize,
    /// Number of blocks `B`.
    pub blocks: usize,
    /// Hidden width of the MLP as a multiple of `C`.
    pub mlp_ratio: usize,
    /// Planes produced by the front-end linear map before its convolution.
    pub mf_filters: usize,
}

impl ModelConfig {
    /// Full-size real-valued model.
    pub fn swinfreq() -> Self {
        Self {
            variant: Variant::SwinFreq,
            n: 64,
            n_sr: 4096,
            channels: 32,
            inner: 256,
            window: 16,
            heads: 8,
            head_dim: 4,
            depth: 3,
            blocks: 4,
            mlp_ratio: 4,
            mf_filters: 2,
        }
    }

    /// Full-size complex-valued model.
    pub fn cvswinfreq() -> Self {
        Self { variant: Variant::CvSwinFreq, head_dim: 2, mlp_ratio: 2, ..Self::swinfreq() }
    }

    pub fn default_for(variant: Variant) -> Self {
        match variant {
            Variant::SwinFreq => Self::swinfreq(),
            Variant::CvSwinFreq => Self::cvswinfreq(),
        }
    }

    /// Small model for desk-scale training runs.
    pub fn toy(variant: Variant) -> Self {
        Self {
            n: 64,
            n_sr: 1024,
            channels: 8,
            inner: 64,
            window: 8,
            heads: 2,
            head_dim: 4,
            depth: 2,
            blocks: 2,
            mlp_ratio: 2,
            ..Self::default_for(variant)
        }
    }

    /// Tiny model for gradient checks.
    pub fn micro(variant: Variant) -> Self {
        Self {
            n: 8,
            n_sr: 32,
            channels: 2,
            inner: 16,
            window: 4,
            heads: 1,
            head_dim: 2,
            depth: 2,
            blocks: 1,
            mlp_ratio: 2,
            mf_filters: 2,
            ..Self::default_for(variant)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("n_sr", self.n_sr),
            ("channels", self.channels),
            ("inner", self.inner),
            ("window", self.window),
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("mlp_ratio", self.mlp_ratio),
            ("mf_filters", self.mf_filters),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("model config: {name} must be positive")));
        }
        if self.inner % self.window != 0 {
            return Err(Error::invalid(format!(
                "model config: window {} does not divide inner length {}",
                self.window, self.inner
            )));
        }
        if self.n_sr % self.inner != 0 {
            return Err(Error::invalid(format!(
                "model config: n_sr {} is not a multiple of inner length {}",
                self.n_sr, self.inner
            )));
        }
        if self.variant == Variant::CvSwinFreq && self.channels < 2 && self.blocks * self.depth > 0 {
            return Err(Error::invalid("model config: complex layer norm needs at least 2 channels"));
        }
        Ok(())
    }

    /// Upsampling factor of the output head.
    pub fn stride(&self) -> usize {
        self.n_sr / self.inner
    }

    /// `(kernel, padding)` of the output head; the output length is exactly
    /// `inner * stride`.
    pub fn head_geometry(&self) -> (usize, usize) {
        let s = self.stride();
        if s % 2 == 0 {
            (2 * s, s / 2)
        } else {
            (2 * s - 1, (s - 1) / 2)
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
