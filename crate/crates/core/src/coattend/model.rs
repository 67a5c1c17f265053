//! Parameters, forward pass and reverse-mode gradients of the co-attention
//! network.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CoAttendConfig, Mode};
use crate::corpus::Label;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax whose normalizer is summed in sorted order, so permuting the
/// input permutes the output bit for bit.
pub fn softmax(x: ArrayView1<'_, f64>) -> Array1<f64> {
    let m = x.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = x.mapv(|v| (v - m).exp());
    let mut sorted = e.to_vec();
    sorted.sort_by(f64::total_cmp);
    let z: f64 = sorted.iter().sum();
    e / z
}

fn softmax_backward(a: &Array1<f64>, da: &Array1<f64>) -> Array1<f64> {
    let dot = a.dot(da);
    a * &(da - dot)
}

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize), r: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.random_range(-r..=r))
}

fn uniform1(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.random_range(-r..=r))
}

/// One LSTM direction; gate blocks ordered input, forget, output, cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// 4h x e
    pub w: Array2<f64>,
    /// 4h x h
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

/// Bidirectional encoder plus additive word attention for one side.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub fwd: Lstm,
    pub bwd: Lstm,
    /// k x 2h
    pub att_w: Array2<f64>,
    pub att_b: Array1<f64>,
    pub att_v: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// vocab x e
    pub embedding: Array2<f64>,
    pub sentence_encoder: Encoder,
    pub comment_encoder: Encoder,
    /// 2h x 2h affinity
    pub w_l: Array2<f64>,
    /// k x 2h
    pub w_s: Array2<f64>,
    /// k x 2h
    pub w_c: Array2<f64>,
    pub w_hs: Array1<f64>,
    pub w_hc: Array1<f64>,
    /// 2 x 4h, rows real then fake
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub null_sentence: Array1<f64>,
    pub null_comment: Array1<f64>,
}

impl Lstm {
    fn init(rng: &mut ChaCha8Rng, e: usize, h: usize) -> Self {
        let r = 1.0 / (h as f64).sqrt();
        let mut b = Array1::zeros(4 * h);
        // forget gate starts open
        b.slice_mut(s![h..2 * h]).fill(1.0);
        Lstm {
            w: uniform(rng, (4 * h, e), r),
            u: uniform(rng, (4 * h, h), r),
            b,
        }
    }

    fn zeros_like(&self) -> Self {
        Lstm {
            w: Array2::zeros(self.w.raw_dim()),
            u: Array2::zeros(self.u.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

impl Encoder {
    fn init(rng: &mut ChaCha8Rng, e: usize, h: usize, k: usize) -> Self {
        let fwd = Lstm::init(rng, e, h);
        let bwd = Lstm::init(rng, e, h);
        let r = 1.0 / (2.0 * h as f64).sqrt();
        Encoder {
            fwd,
            bwd,
            att_w: uniform(rng, (k, 2 * h), r),
            att_b: Array1::zeros(k),
            att_v: uniform1(rng, k, 1.0 / (k as f64).sqrt()),
        }
    }

    fn zeros_like(&self) -> Self {
        Encoder {
            fwd: self.fwd.zeros_like(),
            bwd: self.bwd.zeros_like(),
            att_w: Array2::zeros(self.att_w.raw_dim()),
            att_b: Array1::zeros(self.att_b.raw_dim()),
            att_v: Array1::zeros(self.att_v.raw_dim()),
        }
    }
}

impl Params {
    /// Seeded initialization; embeddings uniform in [-0.1, 0.1].
    pub fn init(config: &CoAttendConfig, vocab_size: usize) -> Self {
        let (e, h, k) = (config.embed_dim, config.hidden_dim, config.attn_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let embedding = uniform(&mut rng, (vocab_size, e), 0.1);
        let sentence_encoder = Encoder::init(&mut rng, e, h, k);
        let comment_encoder = Encoder::init(&mut rng, e, h, k);
        let r = 1.0 / (2.0 * h as f64).sqrt();
        Params {
            embedding,
            sentence_encoder,
            comment_encoder,
            w_l: uniform(&mut rng, (2 * h, 2 * h), r),
            w_s: uniform(&mut rng, (k, 2 * h), r),
            w_c: uniform(&mut rng, (k, 2 * h), r),
            w_hs: uniform1(&mut rng, k, 1.0 / (k as f64).sqrt()),
            w_hc: uniform1(&mut rng, k, 1.0 / (k as f64).sqrt()),
            w_out: uniform(&mut rng, (2, 4 * h), 1.0 / (4.0 * h as f64).sqrt()),
            b_out: Array1::zeros(2),
            null_sentence: uniform1(&mut rng, 2 * h, 0.1),
            null_comment: uniform1(&mut rng, 2 * h, 0.1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            embedding: Array2::zeros(self.embedding.raw_dim()),
            sentence_encoder: self.sentence_encoder.zeros_like(),
            comment_encoder: self.comment_encoder.zeros_like(),
            w_l: Array2::zeros(self.w_l.raw_dim()),
            w_s: Array2::zeros(self.w_s.raw_dim()),
            w_c: Array2::zeros(self.w_c.raw_dim()),
            w_hs: Array1::zeros(self.w_hs.raw_dim()),
            w_hc: Array1::zeros(self.w_hc.raw_dim()),
            w_out: Array2::zeros(self.w_out.raw_dim()),
            b_out: Array1::zeros(2),
            null_sentence: Array1::zeros(self.null_sentence.raw_dim()),
            null_comment: Array1::zeros(self.null_comment.raw_dim()),
        }
    }

    /// Every tensor with a stable name, in serialization order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![("embedding".into(), slice(&self.embedding))];
        for (side, enc) in [("sentence", &self.sentence_encoder), ("comment", &self.comment_encoder)] {
            for (dir, l) in [("fwd", &enc.fwd), ("bwd", &enc.bwd)] {
                out.push((format!("{side}.{dir}.w"), slice(&l.w)));
                out.push((format!("{side}.{dir}.u"), slice(&l.u)));
                out.push((format!("{side}.{dir}.b"), slice1(&l.b)));
            }
            out.push((format!("{side}.att_w"), slice(&enc.att_w)));
            out.push((format!("{side}.att_b"), slice1(&enc.att_b)));
            out.push((format!("{side}.att_v"), slice1(&enc.att_v)));
        }
        out.extend([
            ("w_l".into(), slice(&self.w_l)),
            ("w_s".into(), slice(&self.w_s)),
            ("w_c".into(), slice(&self.w_c)),
            ("w_hs".into(), slice1(&self.w_hs)),
            ("w_hc".into(), slice1(&self.w_hc)),
            ("w_out".into(), slice(&self.w_out)),
            ("b_out".into(), slice1(&self.b_out)),
            ("null_sentence".into(), slice1(&self.null_sentence)),
            ("null_comment".into(), slice1(&self.null_comment)),
        ]);
        out
    }

    /// Mutable counterpart of [`Params::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let Params {
            embedding,
            sentence_encoder,
            comment_encoder,
            w_l,
            w_s,
            w_c,
            w_hs,
            w_hc,
            w_out,
            b_out,
            null_sentence,
            null_comment,
        } = self;
        let mut out = vec![slice_mut(embedding)];
        for enc in [sentence_encoder, comment_encoder] {
            let Encoder {
                fwd,
                bwd,
                att_w,
                att_b,
                att_v,
            } = enc;
            for l in [fwd, bwd] {
                out.push(slice_mut(&mut l.w));
                out.push(slice_mut(&mut l.u));
                out.push(slice1_mut(&mut l.b));
            }
            out.push(slice_mut(att_w));
            out.push(slice1_mut(att_b));
            out.push(slice1_mut(att_v));
        }
        out.extend([
            slice_mut(w_l),
            slice_mut(w_s),
            slice_mut(w_c),
            slice1_mut(w_hs),
            slice1_mut(w_hc),
            slice_mut(w_out),
            slice1_mut(b_out),
            slice1_mut(null_sentence),
            slice1_mut(null_comment),
        ]);
        out
    }

    /// `self -= rate * grad`.
    pub fn descend(&mut self, grad: &Params, rate: f64) {
        let g = grad.tensors();
        for (p, (_, g)) in self.tensors_mut().into_iter().zip(g) {
            for (a, b) in p.iter_mut().zip(g) {
                *a -= rate * b;
            }
        }
    }

    pub fn scale(&mut self, by: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= by);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

/// An article already mapped to vocabulary indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub sentences: Vec<Vec<usize>>,
    pub comments: Vec<Vec<usize>>,
    pub label: Option<Label>,
}

struct LstmCache {
    x: Array2<f64>,
    /// activated gates, L x 4h
    gates: Array2<f64>,
    c: Array2<f64>,
    h: Array2<f64>,
}

fn lstm_forward(l: &Lstm, x: Array2<f64>) -> LstmCache {
    let hd = l.u.ncols();
    let len = x.nrows();
    let zx = x.dot(&l.w.t()) + &l.b;
    let mut gates = Array2::zeros((len, 4 * hd));
    let mut c = Array2::zeros((len, hd));
    let mut h = Array2::zeros((len, hd));
    let mut h_prev = Array1::<f64>::zeros(hd);
    let mut c_prev = Array1::<f64>::zeros(hd);
    for t in 0..len {
        let z = &zx.row(t) + &l.u.dot(&h_prev);
        let mut g = gates.row_mut(t);
        for q in 0..hd {
            let (i, f, o, cand) = (
                sigmoid(z[q]),
                sigmoid(z[hd + q]),
                sigmoid(z[2 * hd + q]),
                z[3 * hd + q].tanh(),
            );
            g[q] = i;
            g[hd + q] = f;
            g[2 * hd + q] = o;
            g[3 * hd + q] = cand;
            let ct = f * c_prev[q] + i * cand;
            c[[t, q]] = ct;
            h[[t, q]] = o * ct.tanh();
        }
        h_prev = h.row(t).to_owned();
        c_prev = c.row(t).to_owned();
    }
    LstmCache { x, gates, c, h }
}

/// Accumulates parameter gradients into `g`, returns the input gradient.
fn lstm_backward(l: &Lstm, cache: &LstmCache, dh_out: ArrayView2<'_, f64>, g: &mut Lstm) -> Array2<f64> {
    let hd = l.u.ncols();
    let len = cache.x.nrows();
    let mut dz = Array2::zeros((len, 4 * hd));
    let mut dh_next = Array1::<f64>::zeros(hd);
    let mut dc_next = Array1::<f64>::zeros(hd);
    for t in (0..len).rev() {
        let gt = cache.gates.row(t);
        let mut dzt = dz.row_mut(t);
        let mut dc_prev = Array1::zeros(hd);
        for q in 0..hd {
            let (i, f, o, cand) = (gt[q], gt[hd + q], gt[2 * hd + q], gt[3 * hd + q]);
            let ct = cache.c[[t, q]];
            let c_prev = if t > 0 { cache.c[[t - 1, q]] } else { 0.0 };
            let tc = ct.tanh();
            let dh = dh_out[[t, q]] + dh_next[q];
            let dc = dc_next[q] + dh * o * (1.0 - tc * tc);
            dzt[q] = dc * cand * i * (1.0 - i);
            dzt[hd + q] = dc * c_prev * f * (1.0 - f);
            dzt[2 * hd + q] = dh * tc * o * (1.0 - o);
            dzt[3 * hd + q] = dc * i * (1.0 - cand * cand);
            dc_prev[q] = dc * f;
        }
        dh_next = l.u.t().dot(&dzt);
        dc_next = dc_prev;
    }
    g.w += &dz.t().dot(&cache.x);
    g.b += &dz.sum_axis(Axis(0));
    if len > 1 {
        g.u += &dz.slice(s![1.., ..]).t().dot(&cache.h.slice(s![..len - 1, ..]));
    }
    dz.dot(&l.w)
}

fn reversed(a: &Array2<f64>) -> Array2<f64> {
    a.slice(s![..;-1, ..]).to_owned()
}

pub(crate) struct SeqCache {
    tokens: Vec<usize>,
    /// inverted-dropout multipliers per embedding entry, when training
    mask: Option<Array2<f64>>,
    fwd: LstmCache,
    bwd: LstmCache,
    hidden: Array2<f64>,
    att_u: Array2<f64>,
    pub(crate) alpha: Array1<f64>,
}

/// Encode one token sequence into a `2h` vector.
pub(crate) fn encode_sequence(
    enc: &Encoder,
    embedding: &Array2<f64>,
    tokens: &[usize],
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> (Array1<f64>, SeqCache) {
    let mut x = embedding.select(Axis(0), tokens);
    let mask = dropout.map(|(p, rng)| {
        let keep = 1.0 / (1.0 - p);
        let m = Array2::from_shape_simple_fn(x.raw_dim(), || if rng.random::<f64>() < p { 0.0 } else { keep });
        x *= &m;
        m
    });
    let fwd = lstm_forward(&enc.fwd, x.clone());
    let bwd = lstm_forward(&enc.bwd, reversed(&x));
    let hidden = concatenate(Axis(1), &[fwd.h.view(), reversed(&bwd.h).view()]).unwrap();
    let att_u = (hidden.dot(&enc.att_w.t()) + &enc.att_b).mapv(f64::tanh);
    let alpha = softmax(att_u.dot(&enc.att_v).view());
    let out = hidden.t().dot(&alpha);
    (
        out,
        SeqCache {
            tokens: tokens.to_vec(),
            mask,
            fwd,
            bwd,
            hidden,
            att_u,
            alpha,
        },
    )
}

fn encode_sequence_backward(
    enc: &Encoder,
    cache: &SeqCache,
    dout: ArrayView1<'_, f64>,
    g: &mut Encoder,
    g_embedding: &mut Array2<f64>,
) {
    let hd = enc.fwd.u.ncols();
    let alpha = &cache.alpha;
    let mut dhidden = outer(alpha.view(), dout);
    let dalpha = cache.hidden.dot(&dout);
    let ds = softmax_backward(alpha, &dalpha);
    g.att_v += &cache.att_u.t().dot(&ds);
    let dzu = outer(ds.view(), enc.att_v.view()) * cache.att_u.mapv(|u| 1.0 - u * u);
    g.att_w += &dzu.t().dot(&cache.hidden);
    g.att_b += &dzu.sum_axis(Axis(0));
    dhidden += &dzu.dot(&enc.att_w);
    let dx_f = lstm_backward(&enc.fwd, &cache.fwd, dhidden.slice(s![.., ..hd]), &mut g.fwd);
    let dh_b = reversed(&dhidden.slice(s![.., hd..]).to_owned());
    let dx_b = lstm_backward(&enc.bwd, &cache.bwd, dh_b.view(), &mut g.bwd);
    let mut dx = dx_f + reversed(&dx_b);
    if let Some(m) = &cache.mask {
        dx *= m;
    }
    for (r, &tok) in cache.tokens.iter().enumerate() {
        let mut row = g_embedding.row_mut(tok);
        row += &dx.row(r);
    }
}

fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    let a2 = a.insert_axis(Axis(1));
    let b2 = b.insert_axis(Axis(0));
    a2.dot(&b2)
}

/// Output of the co-attention layer for one article.
#[derive(Debug, Clone)]
pub struct CoAttention {
    pub s_hat: Array1<f64>,
    pub c_hat: Array1<f64>,
    pub a_s: Array1<f64>,
    pub a_c: Array1<f64>,
    f: Array2<f64>,
    p_s: Array2<f64>,
    p_c: Array2<f64>,
    h_s: Array2<f64>,
    h_c: Array2<f64>,
}

/// `S` is 2h x N and `C` is 2h x T, one column per sentence / comment.
pub fn coattend(p: &Params, s_mat: ArrayView2<'_, f64>, c_mat: ArrayView2<'_, f64>) -> CoAttention {
    let f = c_mat.t().dot(&p.w_l).dot(&s_mat).mapv(f64::tanh);
    let p_s = p.w_s.dot(&s_mat);
    let p_c = p.w_c.dot(&c_mat);
    let h_s = (&p_s + &p_c.dot(&f)).mapv(f64::tanh);
    let h_c = (&p_c + &p_s.dot(&f.t())).mapv(f64::tanh);
    let a_s = softmax(p.w_hs.dot(&h_s).view());
    let a_c = softmax(p.w_hc.dot(&h_c).view());
    CoAttention {
        s_hat: s_mat.dot(&a_s),
        c_hat: c_mat.dot(&a_c),
        a_s,
        a_c,
        f,
        p_s,
        p_c,
        h_s,
        h_c,
    }
}

/// Returns `(dS, dC)` and accumulates parameter gradients into `g`.
fn coattend_backward(
    p: &Params,
    s_mat: ArrayView2<'_, f64>,
    c_mat: ArrayView2<'_, f64>,
    co: &CoAttention,
    ds_hat: ArrayView1<'_, f64>,
    dc_hat: ArrayView1<'_, f64>,
    g: &mut Params,
) -> (Array2<f64>, Array2<f64>) {
    let mut ds = outer(ds_hat, co.a_s.view());
    let mut dc = outer(dc_hat, co.a_c.view());
    let des = softmax_backward(&co.a_s, &s_mat.t().dot(&ds_hat));
    let dec = softmax_backward(&co.a_c, &c_mat.t().dot(&dc_hat));
    g.w_hs += &co.h_s.dot(&des);
    g.w_hc += &co.h_c.dot(&dec);
    let dz_s = outer(p.w_hs.view(), des.view()) * co.h_s.mapv(|v| 1.0 - v * v);
    let dz_c = outer(p.w_hc.view(), dec.view()) * co.h_c.mapv(|v| 1.0 - v * v);
    let dp_s = &dz_s + &dz_c.dot(&co.f);
    let dp_c = &dz_c + &dz_s.dot(&co.f.t());
    let df = co.p_c.t().dot(&dz_s) + dz_c.t().dot(&co.p_s);
    g.w_s += &dp_s.dot(&s_mat.t());
    g.w_c += &dp_c.dot(&c_mat.t());
    ds += &p.w_s.t().dot(&dp_s);
    dc += &p.w_c.t().dot(&dp_c);
    let dm = df * co.f.mapv(|v| 1.0 - v * v);
    g.w_l += &c_mat.dot(&dm).dot(&s_mat.t());
    dc += &p.w_l.dot(&s_mat).dot(&dm.t());
    ds += &p.w_l.t().dot(&c_mat).dot(&dm);
    (ds, dc)
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct Trace {
    sentences: Vec<SeqCache>,
    comments: Vec<SeqCache>,
    s_mat: Array2<f64>,
    c_mat: Array2<f64>,
    co: Option<CoAttention>,
    features: Array1<f64>,
    pub(crate) probs: Array1<f64>,
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub p_fake: f64,
    pub p_real: f64,
    /// Over sentences; empty for models that ignore the article.
    pub a_s: Array1<f64>,
    /// Over comments; empty for models that ignore comments or when the
    /// article has none.
    pub a_c: Array1<f64>,
}

fn uniform_weights(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

fn stack_columns(vs: &[Array1<f64>], dim: usize) -> Array2<f64> {
    let mut m = Array2::zeros((dim, vs.len()));
    for (i, v) in vs.iter().enumerate() {
        m.column_mut(i).assign(v);
    }
    m
}

pub(crate) fn forward_trace(
    p: &Params,
    mode: Mode,
    item: &Encoded,
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> (Forward, Trace) {
    let dim = p.null_comment.len();
    let mut encode_all = |enc: &Encoder, seqs: &[Vec<usize>]| -> (Vec<Array1<f64>>, Vec<SeqCache>) {
        seqs.iter()
            .map(|toks| {
                let drop = dropout.as_mut().map(|(q, rng)| (*q, &mut **rng));
                encode_sequence(enc, &p.embedding, toks, drop)
            })
            .unzip()
    };
    let use_news = mode != Mode::NoNews;
    let use_comments = mode != Mode::NoComments;
    let (s_vecs, s_caches) = if use_news {
        encode_all(&p.sentence_encoder, &item.sentences)
    } else {
        (vec![p.null_sentence.clone()], Vec::new())
    };
    let (c_vecs, c_caches) = if use_comments && !item.comments.is_empty() {
        encode_all(&p.comment_encoder, &item.comments)
    } else {
        (vec![p.null_comment.clone()], Vec::new())
    };
    let s_mat = stack_columns(&s_vecs, dim);
    let c_mat = stack_columns(&c_vecs, dim);
    let (s_hat, c_hat, a_s, a_c, co) = if mode == Mode::NoCoattention {
        let a_s = uniform_weights(s_mat.ncols());
        let a_c = uniform_weights(c_mat.ncols());
        (s_mat.dot(&a_s), c_mat.dot(&a_c), a_s, a_c, None)
    } else {
        let co = coattend(p, s_mat.view(), c_mat.view());
        (co.s_hat.clone(), co.c_hat.clone(), co.a_s.clone(), co.a_c.clone(), Some(co))
    };
    let zero = Array1::zeros(dim);
    let features = concatenate(
        Axis(0),
        &[
            if use_news { s_hat.view() } else { zero.view() },
            if use_comments { c_hat.view() } else { zero.view() },
        ],
    )
    .unwrap();
    let probs = softmax((p.w_out.dot(&features) + &p.b_out).view());
    let fwd = Forward {
        p_fake: probs[1],
        p_real: probs[0],
        a_s: if use_news { a_s } else { Array1::zeros(0) },
        a_c: if use_comments && !item.comments.is_empty() {
            a_c
        } else {
            Array1::zeros(0)
        },
    };
    (
        fwd,
        Trace {
            sentences: s_caches,
            comments: c_caches,
            s_mat,
            c_mat,
            co,
            features,
            probs,
        },
    )
}

/// Cross-entropy of one labeled item; gradients accumulated into `g`.
pub(crate) fn backward(p: &Params, mode: Mode, trace: &Trace, label: Label, g: &mut Params) -> f64 {
    let y = if label.is_fake() { 1 } else { 0 };
    let loss = -trace.probs[y].ln();
    let mut dz = trace.probs.clone();
    dz[y] -= 1.0;
    g.w_out += &outer(dz.view(), trace.features.view());
    g.b_out += &dz;
    let dfeat = p.w_out.t().dot(&dz);
    let dim = p.null_comment.len();
    let use_news = mode != Mode::NoNews;
    let use_comments = mode != Mode::NoComments;
    let ds_hat = if use_news {
        dfeat.slice(s![..dim]).to_owned()
    } else {
        Array1::zeros(dim)
    };
    let dc_hat = if use_comments {
        dfeat.slice(s![dim..]).to_owned()
    } else {
        Array1::zeros(dim)
    };
    let (ds, dc) = match &trace.co {
        Some(co) => coattend_backward(
            p,
            trace.s_mat.view(),
            trace.c_mat.view(),
            co,
            ds_hat.view(),
            dc_hat.view(),
            g,
        ),
        None => {
            let n = trace.s_mat.ncols();
            let t = trace.c_mat.ncols();
            (
                outer(ds_hat.view(), uniform_weights(n).view()),
                outer(dc_hat.view(), uniform_weights(t).view()),
            )
        }
    };
    if trace.sentences.is_empty() {
        g.null_sentence += &ds.column(0);
    } else {
        for (i, cache) in trace.sentences.iter().enumerate() {
            encode_sequence_backward(&p.sentence_encoder, cache, ds.column(i), &mut g.sentence_encoder, &mut g.embedding);
        }
    }
    if trace.comments.is_empty() {
        g.null_comment += &dc.column(0);
    } else {
        for (i, cache) in trace.comments.iter().enumerate() {
            encode_sequence_backward(&p.comment_encoder, cache, dc.column(i), &mut g.comment_encoder, &mut g.embedding);
        }
    }
    loss
}

/// Mean cross-entropy over `batch` and its gradient. Dropout applies when
/// `dropout` is given.
pub fn loss_and_grads(
    p: &Params,
    mode: Mode,
    batch: &[&Encoded],
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> (f64, Params) {
    let mut g = p.zeros_like();
    let mut total = 0.0;
    let mut n = 0usize;
    for item in batch {
        let Some(label) = item.label else { continue };
        let drop = dropout.as_mut().map(|(q, rng)| (*q, &mut **rng));
        let (_, trace) = forward_trace(p, mode, item, drop);
        total += backward(p, mode, &trace, label, &mut g);
        n += 1;
    }
    if n > 0 {
        g.scale(1.0 / n as f64);
        total /= n as f64;
    }
    (total, g)
}

pub fn forward(p: &Params, mode: Mode, item: &Encoded) -> Forward {
    forward_trace(p, mode, item, None).0
}
