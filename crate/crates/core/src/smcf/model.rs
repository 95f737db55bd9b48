use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assignment::{AssignmentMatrix, Link};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::config::ModelConfig;
use super::loss::{loss_and_grad, LossBreakdown, LossWeights};
use super::params::{dropout_mask, LayerParams, ModelParameters};

const LN_EPS: f64 = 1e-12;

/// One training example: normalized inputs and the true links.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<Link>,
}

/// Token index of every normalized input: `round(x * (n_quant - 1))`.
pub fn quantize<T: Real>(x: &[T], n_quant: usize) -> Result<Vec<usize>> {
    let top = (n_quant - 1) as f64;
    x.iter()
        .map(|&v| {
            let v = v.as_f64();
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("normalized input {v} outside [0, 1]")));
            }
            Ok((v * top).round() as usize)
        })
        .collect()
}

/// Rows of the token embedding table selected by [`quantize`].
pub fn quantize_embed<T: Real>(x: &[T], params: &ModelParameters<T>, cfg: &ModelConfig) -> Result<Array2<T>> {
    let tokens = quantize(x, cfg.n_quant)?;
    Ok(params.token_embeddings.select(Axis(0), &tokens))
}

/// Run the encoder stack on embedded tokens.
pub fn encoder_forward<T: Real>(embeddings: &Array2<T>, params: &ModelParameters<T>, cfg: &ModelConfig) -> Result<Array2<T>> {
    check_len(embeddings.nrows(), cfg)?;
    let mut x = embeddings.clone();
    for lp in &params.layers {
        x = layer_forward(x, lp, cfg, None).out;
    }
    Ok(x)
}

/// Masked soft-max head producing a soft assignment matrix.
pub fn head_forward<T: Real>(r: &Array2<T>, params: &ModelParameters<T>, cfg: &ModelConfig) -> Result<AssignmentMatrix<T>> {
    check_len(r.nrows(), cfg)?;
    let p = head_probs(r.view(), params, cfg);
    let n = p.nrows();
    AssignmentMatrix::soft(n, p.into_raw_vec_and_offset().0)
}

fn check_len(n: usize, cfg: &ModelConfig) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if n > cfg.seq_len {
        return Err(Error::param(format!("sequence of {n} exceeds model seq_len {}", cfg.seq_len)));
    }
    Ok(())
}

/// Model configuration together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ModelParameters<T>,
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = ModelParameters::init(&config, seed)?;
        Ok(Self { config, params })
    }

    /// Same model in another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config,
            params: self.params.cast(),
        }
    }

    /// Soft assignment for normalized inputs (no dropout).
    pub fn predict(&self, x: &[T]) -> Result<AssignmentMatrix<T>> {
        let emb = quantize_embed(x, &self.params, &self.config)?;
        let r = encoder_forward(&emb, &self.params, &self.config)?;
        head_forward(&r, &self.params, &self.config)
    }

    /// Loss for one sample without dropout.
    pub fn loss(&self, sample: &Sample, weights: &LossWeights) -> Result<LossBreakdown> {
        let tokens = self.checked_tokens(sample)?;
        let cache = forward_cached(&self.params, &self.config, &tokens, None);
        Ok(loss_and_grad(cache.p.view(), &sample.y, weights, false).0)
    }

    fn checked_tokens(&self, sample: &Sample) -> Result<Vec<usize>> {
        let n = sample.x.len();
        check_len(n, &self.config)?;
        if sample.y.len() != n {
            return Err(Error::ShapeMismatch(format!("{} inputs but {} links", n, sample.y.len())));
        }
        for (i, l) in sample.y.iter().enumerate() {
            if let Link::Next(j) = *l {
                if !allowed(i, j, n, self.config.lookahead) {
                    return Err(Error::param(format!("link {i} -> {j} is outside the model's mask")));
                }
            }
        }
        quantize(&sample.x, self.config.n_quant)
    }

    /// Loss and parameter gradient for one sample. `dropout_seed` enables
    /// dropout with a mask stream derived from the seed.
    pub fn sample_gradient(
        &self,
        sample: &Sample,
        weights: &LossWeights,
        dropout_seed: Option<u64>,
    ) -> Result<(LossBreakdown, ModelParameters<T>)> {
        let tokens = self.checked_tokens(sample)?;
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let cache = forward_cached(&self.params, &self.config, &tokens, rng.as_mut());
        let (loss, dp) = loss_and_grad(cache.p.view(), &sample.y, weights, true);
        if let Some(term) = loss.non_finite_term() {
            return Err(Error::NonFinite(format!("loss term {term}")));
        }
        let grads = backward_cached(&self.params, &self.config, &cache, &dp.expect("requested"));
        Ok((loss, grads))
    }
}

/// Mean loss and mean gradient over a batch. Samples are processed in
/// parallel; per-sample gradients are summed in batch order, so the result
/// does not depend on the thread count.
pub fn backward<T: Real>(
    batch: &[Sample],
    model: &Model<T>,
    weights: &LossWeights,
    dropout_seeds: Option<&[u64]>,
) -> Result<(LossBreakdown, ModelParameters<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(s) = dropout_seeds {
        if s.len() != batch.len() {
            return Err(Error::ShapeMismatch("one dropout seed per sample required".into()));
        }
    }
    let results: Vec<Result<(LossBreakdown, ModelParameters<T>)>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| model.sample_gradient(s, weights, dropout_seeds.map(|d| d[i])))
        .collect();
    let mut losses = Vec::with_capacity(batch.len());
    let mut total = ModelParameters::zeros(&model.config);
    for r in results {
        let (l, g) = r?;
        losses.push(l);
        total.add_scaled(T::one(), &g);
    }
    total.scale(T::one() / T::lit(batch.len() as f64));
    Ok((LossBreakdown::mean(&losses), total))
}

/// Mean loss over a batch without dropout.
pub fn mean_loss<T: Real>(batch: &[Sample], model: &Model<T>, weights: &LossWeights) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let losses = batch
        .par_iter()
        .map(|s| model.loss(s, weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossBreakdown::mean(&losses))
}

// ---------------------------------------------------------------------------
// forward

struct LnCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
}

struct LayerCache<T> {
    x: Array2<T>,
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    /// Per head: attention probabilities `N x N`.
    attn: Vec<Array2<T>>,
    /// Per head: probability mass per relative bucket, `N x R`.
    bucket: Vec<Array2<T>>,
    ctx: Array2<T>,
    drop1: Option<Array2<T>>,
    ln1: LnCache<T>,
    h1: Array2<T>,
    f_pre: Array2<T>,
    f_act: Array2<T>,
    drop2: Option<Array2<T>>,
    ln2: LnCache<T>,
    out: Array2<T>,
}

struct ForwardCache<T> {
    tokens: Vec<usize>,
    layers: Vec<LayerCache<T>>,
    p: Array2<T>,
}

fn rel_bucket(i: usize, j: usize, clip: usize) -> usize {
    let d = j as isize - i as isize;
    (d.clamp(-(clip as isize), clip as isize) + clip as isize) as usize
}

fn layer_norm<T: Real>(x: &Array2<T>, g: &Array1<T>, b: &Array1<T>) -> (Array2<T>, LnCache<T>) {
    let d = T::lit(x.ncols() as f64);
    let eps = T::lit(LN_EPS);
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).fold(T::zero(), |a, v| a + v) / d;
        *inv = T::one() / (var + eps).sqrt();
        let s = *inv;
        row.mapv_inplace(|v| v * s);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward<T: Real>(dy: &Array2<T>, cache: &LnCache<T>, g: &Array1<T>) -> (Array2<T>, Array1<T>, Array1<T>) {
    let dg = (dy * &cache.xhat).sum_axis(Axis(0));
    let db = dy.sum_axis(Axis(0));
    let d = T::lit(dy.ncols() as f64);
    let dxhat = dy * g;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let dh = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let sum_dh = dh.sum();
        let sum_dh_xh = dh.iter().zip(xh.iter()).fold(T::zero(), |a, (&u, &v)| a + u * v);
        let inv = cache.inv_std[i];
        for k in 0..dy.ncols() {
            dx[[i, k]] = inv / d * (d * dh[k] - sum_dh - xh[k] * sum_dh_xh);
        }
    }
    (dx, dg, db)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

fn gelu<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    let inner = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    half * x * (T::one() + inner.tanh())
}

fn gelu_grad<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    let inner = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    let t = inner.tanh();
    let dinner = T::lit(GELU_C) * (T::one() + T::lit(3.0 * GELU_A) * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * dinner
}

fn softmax_rows<T: Real>(m: &mut Array2<T>) {
    for mut row in m.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

fn layer_forward<T: Real>(
    x: Array2<T>,
    lp: &LayerParams<T>,
    cfg: &ModelConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> LayerCache<T> {
    let n = x.nrows();
    let hd = cfg.head_dim();
    let clip = cfg.rel_clip;
    let nb = cfg.rel_buckets();
    let scale = T::one() / T::lit(hd as f64).sqrt();

    let q = x.dot(&lp.wq) + &lp.bq;
    let k = x.dot(&lp.wk) + &lp.bk;
    let v = x.dot(&lp.wv) + &lp.bv;
    let mut ctx = Array2::zeros((n, cfg.d_model));
    let mut attn = Vec::with_capacity(cfg.n_heads);
    let mut bucket = Vec::with_capacity(cfg.n_heads);
    for h in 0..cfg.n_heads {
        let cols = s![.., h * hd..(h + 1) * hd];
        let (qh, kh, vh) = (q.slice(cols), k.slice(cols), v.slice(cols));
        let rel = qh.dot(&lp.rel_k.t());
        let mut a = qh.dot(&kh.t());
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = (a[[i, j]] + rel[[i, rel_bucket(i, j, clip)]]) * scale;
            }
        }
        softmax_rows(&mut a);
        let mut b = Array2::zeros((n, nb));
        for i in 0..n {
            for j in 0..n {
                let r = rel_bucket(i, j, clip);
                b[[i, r]] = b[[i, r]] + a[[i, j]];
            }
        }
        let out = a.dot(&vh) + b.dot(&lp.rel_v);
        ctx.slice_mut(cols).assign(&out);
        attn.push(a);
        bucket.push(b);
    }

    let mut rng = rng;
    let mut attn_out = ctx.dot(&lp.wo) + &lp.bo;
    let drop1 = match (&mut rng, cfg.dropout > 0.0) {
        (Some(r), true) => {
            let m = dropout_mask(attn_out.dim(), cfg.dropout, *r);
            attn_out = attn_out * &m;
            Some(m)
        }
        _ => None,
    };
    let (h1, ln1) = layer_norm(&(&x + &attn_out), &lp.ln1_g, &lp.ln1_b);

    let f_pre = h1.dot(&lp.w1) + &lp.b1;
    let f_act = f_pre.mapv(gelu);
    let mut f_out = f_act.dot(&lp.w2) + &lp.b2;
    let drop2 = match (&mut rng, cfg.dropout > 0.0) {
        (Some(r), true) => {
            let m = dropout_mask(f_out.dim(), cfg.dropout, *r);
            f_out = f_out * &m;
            Some(m)
        }
        _ => None,
    };
    let (out, ln2) = layer_norm(&(&h1 + &f_out), &lp.ln2_g, &lp.ln2_b);

    LayerCache {
        x,
        q,
        k,
        v,
        attn,
        bucket,
        ctx,
        drop1,
        ln1,
        h1,
        f_pre,
        f_act,
        drop2,
        ln2,
        out,
    }
}

/// Whether row `i` may link to column `j` (`j == n` is the terminal).
pub(crate) fn allowed(i: usize, j: usize, n: usize, lookahead: usize) -> bool {
    j == n || (j > i && j - i <= lookahead)
}

/// Head columns used for a window of `n` samples: positions `0..n`, then
/// the terminal column of `T`.
fn head_columns(n: usize, cfg: &ModelConfig) -> Vec<usize> {
    (0..n).chain(std::iter::once(cfg.seq_len)).collect()
}

fn head_probs<T: Real>(r: ArrayView2<T>, params: &ModelParameters<T>, cfg: &ModelConfig) -> Array2<T> {
    let n = r.nrows();
    let cols = head_columns(n, cfg);
    let t_sel = params.head_t.select(Axis(1), &cols);
    let beta = params.head_beta.select(Axis(0), &cols);
    let mut q = r.dot(&t_sel) + &beta;
    for i in 0..n {
        let mut max = T::neg_infinity();
        for j in 0..=n {
            if allowed(i, j, n, cfg.lookahead) {
                max = max.max(q[[i, j]]);
            }
        }
        let mut sum = T::zero();
        for j in 0..=n {
            let e = if allowed(i, j, n, cfg.lookahead) {
                (q[[i, j]] - max).exp()
            } else {
                T::zero()
            };
            q[[i, j]] = e;
            sum = sum + e;
        }
        q.row_mut(i).mapv_inplace(|e| e / sum);
    }
    q
}

fn forward_cached<T: Real>(
    params: &ModelParameters<T>,
    cfg: &ModelConfig,
    tokens: &[usize],
    mut rng: Option<&mut ChaCha8Rng>,
) -> ForwardCache<T> {
    let mut x = params.token_embeddings.select(Axis(0), tokens);
    let mut layers = Vec::with_capacity(params.layers.len());
    for lp in &params.layers {
        let c = layer_forward(x, lp, cfg, rng.as_deref_mut());
        x = c.out.clone();
        layers.push(c);
    }
    let p = head_probs(x.view(), params, cfg);
    ForwardCache {
        tokens: tokens.to_vec(),
        layers,
        p,
    }
}

// ---------------------------------------------------------------------------
// backward

fn backward_cached<T: Real>(
    params: &ModelParameters<T>,
    cfg: &ModelConfig,
    cache: &ForwardCache<T>,
    dp: &Array2<T>,
) -> ModelParameters<T> {
    let mut g = ModelParameters::zeros(cfg);
    let p = &cache.p;
    let n = p.nrows();
    let r = &cache.layers.last().expect("at least one layer").out;

    // soft-max over allowed entries
    let mut dq = Array2::zeros((n, n + 1));
    for i in 0..n {
        let dot = (0..=n).fold(T::zero(), |a, j| a + p[[i, j]] * dp[[i, j]]);
        for j in 0..=n {
            if allowed(i, j, n, cfg.lookahead) {
                dq[[i, j]] = p[[i, j]] * (dp[[i, j]] - dot);
            }
        }
    }
    let cols = head_columns(n, cfg);
    let t_sel = params.head_t.select(Axis(1), &cols);
    let dt = r.t().dot(&dq);
    let dbeta = dq.sum_axis(Axis(0));
    for (c, &col) in cols.iter().enumerate() {
        g.head_t.column_mut(col).assign(&dt.column(c));
        g.head_beta[col] = dbeta[c];
    }
    let mut dx = dq.dot(&t_sel.t());

    for (l, lc) in cache.layers.iter().enumerate().rev() {
        dx = layer_backward(&params.layers[l], &mut g.layers[l], cfg, lc, dx);
    }
    for (i, &tok) in cache.tokens.iter().enumerate() {
        let mut row = g.token_embeddings.row_mut(tok);
        row += &dx.row(i);
    }
    g
}

/// Backpropagate through one layer; accumulates into `g`, returns `dL/dx`.
fn layer_backward<T: Real>(
    lp: &LayerParams<T>,
    g: &mut LayerParams<T>,
    cfg: &ModelConfig,
    c: &LayerCache<T>,
    dout: Array2<T>,
) -> Array2<T> {
    let n = c.x.nrows();
    let hd = cfg.head_dim();
    let clip = cfg.rel_clip;
    let nb = cfg.rel_buckets();
    let scale = T::one() / T::lit(hd as f64).sqrt();

    // out = LN2(h1 + f_out)
    let (dsum2, dg2, db2) = layer_norm_backward(&dout, &c.ln2, &lp.ln2_g);
    g.ln2_g += &dg2;
    g.ln2_b += &db2;
    let mut dh1 = dsum2.clone();
    let df_out = match &c.drop2 {
        Some(m) => &dsum2 * m,
        None => dsum2,
    };
    g.w2 += &c.f_act.t().dot(&df_out);
    g.b2 += &df_out.sum_axis(Axis(0));
    let df_act = df_out.dot(&lp.w2.t());
    let df_pre = &df_act * &c.f_pre.mapv(gelu_grad);
    g.w1 += &c.h1.t().dot(&df_pre);
    g.b1 += &df_pre.sum_axis(Axis(0));
    dh1 += &df_pre.dot(&lp.w1.t());

    // h1 = LN1(x + attn_out)
    let (dsum1, dg1, db1) = layer_norm_backward(&dh1, &c.ln1, &lp.ln1_g);
    g.ln1_g += &dg1;
    g.ln1_b += &db1;
    let mut dx = dsum1.clone();
    let dattn_out = match &c.drop1 {
        Some(m) => &dsum1 * m,
        None => dsum1,
    };
    g.wo += &c.ctx.t().dot(&dattn_out);
    g.bo += &dattn_out.sum_axis(Axis(0));
    let dctx = dattn_out.dot(&lp.wo.t());

    let mut dq = Array2::zeros((n, cfg.d_model));
    let mut dk = Array2::zeros((n, cfg.d_model));
    let mut dv = Array2::zeros((n, cfg.d_model));
    for h in 0..cfg.n_heads {
        let cols = s![.., h * hd..(h + 1) * hd];
        let (qh, kh, vh) = (c.q.slice(cols), c.k.slice(cols), c.v.slice(cols));
        let a = &c.attn[h];
        let b = &c.bucket[h];
        let dout_h = dctx.slice(cols);

        // out = A V + B Rv
        g.rel_v += &b.t().dot(&dout_h);
        dv.slice_mut(cols).assign(&a.t().dot(&dout_h));
        let db = dout_h.dot(&lp.rel_v.t());
        let mut da = dout_h.dot(&vh.t());
        for i in 0..n {
            for j in 0..n {
                da[[i, j]] = da[[i, j]] + db[[i, rel_bucket(i, j, clip)]];
            }
        }
        // soft-max, then the 1/sqrt(hd) scale
        let mut ds = Array2::zeros((n, n));
        for i in 0..n {
            let dot = (0..n).fold(T::zero(), |acc, j| acc + a[[i, j]] * da[[i, j]]);
            for j in 0..n {
                ds[[i, j]] = a[[i, j]] * (da[[i, j]] - dot) * scale;
            }
        }
        // logits = Q K^T + gather(Q Rk^T)
        let mut dc = Array2::zeros((n, nb));
        for i in 0..n {
            for j in 0..n {
                let r = rel_bucket(i, j, clip);
                dc[[i, r]] = dc[[i, r]] + ds[[i, j]];
            }
        }
        let dqh = ds.dot(&kh) + dc.dot(&lp.rel_k);
        dq.slice_mut(cols).assign(&dqh);
        dk.slice_mut(cols).assign(&ds.t().dot(&qh));
        g.rel_k += &dc.t().dot(&qh);
    }

    g.wq += &c.x.t().dot(&dq);
    g.bq += &dq.sum_axis(Axis(0));
    g.wk += &c.x.t().dot(&dk);
    g.bk += &dk.sum_axis(Axis(0));
    g.wv += &c.x.t().dot(&dv);
    g.bv += &dv.sum_axis(Axis(0));
    dx += &dq.dot(&lp.wq.t());
    dx += &dk.dot(&lp.wk.t());
    dx += &dv.dot(&lp.wv.t());
    dx
}
