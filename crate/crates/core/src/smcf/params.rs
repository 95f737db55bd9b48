use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::config::ModelConfig;

/// Standard deviation of the normal initializer.
pub const INIT_STD: f64 = 0.02;

/// Weights of one encoder layer. Projections map row vectors: `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub wq: Array2<T>,
    pub bq: Array1<T>,
    pub wk: Array2<T>,
    pub bk: Array1<T>,
    pub wv: Array2<T>,
    pub bv: Array1<T>,
    pub wo: Array2<T>,
    pub bo: Array1<T>,
    /// Relative-position embeddings added to keys, `(2 clip + 1) x head_dim`.
    pub rel_k: Array2<T>,
    /// Relative-position embeddings added to values.
    pub rel_v: Array2<T>,
    pub ln1_g: Array1<T>,
    pub ln1_b: Array1<T>,
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
    pub ln2_g: Array1<T>,
    pub ln2_b: Array1<T>,
}

/// All trainable tensors of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    /// `n_quant x d_model`.
    pub token_embeddings: Array2<T>,
    pub layers: Vec<LayerParams<T>>,
    /// Decision representatives, `d_model x (seq_len + 1)`; the last
    /// column is the terminal.
    pub head_t: Array2<T>,
    pub head_beta: Array1<T>,
}

macro_rules! layer_fields {
    ($m:ident) => {
        $m!(wq, bq, wk, bk, wv, bv, wo, bo, rel_k, rel_v, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b)
    };
}

impl<T: Real> LayerParams<T> {
    fn zeros(cfg: &ModelConfig) -> Self {
        let (d, f, hd, r) = (cfg.d_model, cfg.d_ff, cfg.head_dim(), cfg.rel_buckets());
        Self {
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            rel_k: Array2::zeros((r, hd)),
            rel_v: Array2::zeros((r, hd)),
            ln1_g: Array1::zeros(d),
            ln1_b: Array1::zeros(d),
            w1: Array2::zeros((d, f)),
            b1: Array1::zeros(f),
            w2: Array2::zeros((f, d)),
            b2: Array1::zeros(d),
            ln2_g: Array1::zeros(d),
            ln2_b: Array1::zeros(d),
        }
    }
}

impl<T: Real> ModelParameters<T> {
    /// All-zero tensors of the right shapes; also the gradient accumulator.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            token_embeddings: Array2::zeros((cfg.n_quant, cfg.d_model)),
            layers: (0..cfg.n_layers).map(|_| LayerParams::zeros(cfg)).collect(),
            head_t: Array2::zeros((cfg.d_model, cfg.seq_len + 1)),
            head_beta: Array1::zeros(cfg.seq_len + 1),
        }
    }

    /// Normal(0, 0.02) weights and embeddings, zero biases, unit gains.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut p = Self::zeros(cfg);
        let fill = |a: &mut Array2<T>, rng: &mut ChaCha8Rng| a.mapv_inplace(|_| T::lit(normal.sample(rng)));
        fill(&mut p.token_embeddings, &mut rng);
        for l in &mut p.layers {
            for w in [&mut l.wq, &mut l.wk, &mut l.wv, &mut l.wo, &mut l.rel_k, &mut l.rel_v, &mut l.w1, &mut l.w2] {
                fill(w, &mut rng);
            }
            l.ln1_g.fill(T::one());
            l.ln2_g.fill(T::one());
        }
        fill(&mut p.head_t, &mut rng);
        Ok(p)
    }

    /// Named views in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, T>)> {
        let mut out = vec![("token_embeddings".to_string(), self.token_embeddings.view().into_dyn())];
        for (i, l) in self.layers.iter().enumerate() {
            macro_rules! push {
                ($($f:ident),*) => {
                    $(out.push((format!("layers.{i}.{}", stringify!($f)), l.$f.view().into_dyn()));)*
                };
            }
            layer_fields!(push);
        }
        out.push(("head.t".to_string(), self.head_t.view().into_dyn()));
        out.push(("head.beta".to_string(), self.head_beta.view().into_dyn()));
        out
    }

    /// Mutable named views, same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        let mut out = vec![("token_embeddings".to_string(), self.token_embeddings.view_mut().into_dyn())];
        for (i, l) in self.layers.iter_mut().enumerate() {
            macro_rules! push {
                ($($f:ident),*) => {
                    $(out.push((format!("layers.{i}.{}", stringify!($f)), l.$f.view_mut().into_dyn()));)*
                };
            }
            layer_fields!(push);
        }
        out.push(("head.t".to_string(), self.head_t.view_mut().into_dyn()));
        out.push(("head.beta".to_string(), self.head_beta.view_mut().into_dyn()));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(alpha, &b);
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for (_, mut a) in self.tensors_mut() {
            a.mapv_inplace(|x| x * alpha);
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n)
    }

    pub fn cast<U: Real>(&self) -> ModelParameters<U> {
        let cfg_like = |a: &Array2<T>| a.mapv(|x| U::lit(x.as_f64()));
        let cast1 = |a: &Array1<T>| a.mapv(|x| U::lit(x.as_f64()));
        ModelParameters {
            token_embeddings: cfg_like(&self.token_embeddings),
            layers: self
                .layers
                .iter()
                .map(|l| {
                    macro_rules! build {
                        ($($f:ident),*) => {
                            LayerParams { $($f: l.$f.mapv(|x| U::lit(x.as_f64())),)* }
                        };
                    }
                    layer_fields!(build)
                })
                .collect(),
            head_t: cfg_like(&self.head_t),
            head_beta: cast1(&self.head_beta),
        }
    }

    /// Rebuild from named flat tensors, checking names and shapes against
    /// `cfg`.
    pub fn from_named(cfg: &ModelConfig, named: Vec<(String, Vec<usize>, Vec<T>)>) -> Result<Self> {
        let mut p = Self::zeros(cfg);
        let expected: Vec<(String, Vec<usize>)> = p
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if named.len() != expected.len() {
            return Err(Error::Format(format!(
                "expected {} tensors, found {}",
                expected.len(),
                named.len()
            )));
        }
        for ((_, mut dst), ((name, shape, data), (want_name, want_shape))) in
            p.tensors_mut().into_iter().zip(named.into_iter().zip(expected))
        {
            if name != want_name || shape != want_shape || data.len() != dst.len() {
                return Err(Error::Format(format!(
                    "tensor `{name}` {shape:?} does not match expected `{want_name}` {want_shape:?}"
                )));
            }
            let src = ndarray::ArrayD::from_shape_vec(IxDyn(&shape), data)
                .map_err(|e| Error::Format(e.to_string()))?;
            dst.assign(&src);
        }
        Ok(p)
    }
}

/// Inverted dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub(crate) fn dropout_mask<T: Real, R: Rng + ?Sized>(shape: (usize, usize), rate: f64, rng: &mut R) -> Array2<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    Array2::from_shape_simple_fn(shape, || if rng.gen::<f64>() < rate { T::zero() } else { keep })
}
