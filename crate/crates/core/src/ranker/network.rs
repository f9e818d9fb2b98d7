//! The route-set scorer: a bidirectional LSTM encodes each route, a dense
//! layer projects it, stacked multi-head self-attention mixes the route
//! embeddings of a solution, the result is mean-pooled, concatenated with
//! the solution summary features and passed through a two-layer head.
//!
//! The forward pass is batched over many solutions at once. Routes of all
//! solutions are sorted by length so that every LSTM step is a single
//! matrix product over the routes still running (a packed sequence).

use super::config::ScorerConfig;
use super::features::{SolutionFeatures, NODE_FEATURES, SOLUTION_FEATURES};
use super::linalg::{add_bias, add_column_sums, gemm, relu_backward, relu_in_place, sigmoid};
use crate::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(name: String, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { name, shape, data: vec![0.0; len] }
    }
}

#[derive(Clone, Copy, Debug)]
struct LstmIdx {
    w_ih: usize,
    w_hh: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct StackIdx {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    input: usize,
}

/// Tensor indices for a configuration, in storage order.
#[derive(Clone, Debug)]
struct Layout {
    lstm: [LstmIdx; 2],
    route_w: usize,
    route_b: usize,
    stacks: Vec<StackIdx>,
    head_w1: usize,
    head_b1: usize,
    head_w2: usize,
    head_b2: usize,
}

impl Layout {
    /// Builds the layout and the matching zero tensors.
    fn build(cfg: &ScorerConfig) -> (Layout, Vec<Tensor>) {
        let mut tensors = Vec::new();
        let mut push = |name: String, shape: Vec<usize>| {
            tensors.push(Tensor::zeros(name, shape));
            tensors.len() - 1
        };
        let h = cfg.lstm_hidden;
        let mut lstm_dir = |dir: &str| LstmIdx {
            w_ih: push(format!("lstm.{dir}.w_ih"), vec![NODE_FEATURES, 4 * h]),
            w_hh: push(format!("lstm.{dir}.w_hh"), vec![h, 4 * h]),
            b: push(format!("lstm.{dir}.b"), vec![4 * h]),
        };
        let lstm = [lstm_dir("fwd"), lstm_dir("bwd")];
        let route_w = push("route.w".into(), vec![2 * h, cfg.route_embedding]);
        let route_b = push("route.b".into(), vec![cfg.route_embedding]);
        let hd = cfg.attention_heads * cfg.attention_head_width;
        let mut stacks = Vec::new();
        let mut input = cfg.route_embedding;
        for l in 0..cfg.attention_stacks {
            stacks.push(StackIdx {
                wq: push(format!("attn.{l}.w_q"), vec![input, hd]),
                bq: push(format!("attn.{l}.b_q"), vec![hd]),
                wk: push(format!("attn.{l}.w_k"), vec![input, hd]),
                bk: push(format!("attn.{l}.b_k"), vec![hd]),
                wv: push(format!("attn.{l}.w_v"), vec![input, hd]),
                bv: push(format!("attn.{l}.b_v"), vec![hd]),
                wo: push(format!("attn.{l}.w_o"), vec![hd, cfg.attention_output]),
                bo: push(format!("attn.{l}.b_o"), vec![cfg.attention_output]),
                input,
            });
            input = cfg.attention_output;
        }
        let head_in = cfg.attention_output + SOLUTION_FEATURES;
        let head_w1 = push("head.w1".into(), vec![head_in, cfg.head_hidden]);
        let head_b1 = push("head.b1".into(), vec![cfg.head_hidden]);
        let head_w2 = push("head.w2".into(), vec![cfg.head_hidden, 1]);
        let head_b2 = push("head.b2".into(), vec![1]);
        let layout = Layout { lstm, route_w, route_b, stacks, head_w1, head_b1, head_w2, head_b2 };
        (layout, tensors)
    }
}

/// Learnable weights of the scorer together with the configuration they
/// were built from. Both twins of the Siamese pair share this one store.
#[derive(Clone, Debug)]
pub struct RankerModel {
    config: ScorerConfig,
    layout: Layout,
    tensors: Vec<Tensor>,
}

impl PartialEq for RankerModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.tensors == other.tensors
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    Shape { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("expected tensor {expected}, found {found}")]
    Name { expected: String, found: String },
    #[error("expected {expected} tensors, found {found}")]
    Count { expected: usize, found: usize },
}

/// Gradients with the same layout as the model tensors.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &RankerModel) -> Self {
        Self { tensors: model.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect() }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

impl RankerModel {
    /// Weights drawn uniformly from `±1/sqrt(fan_in)`, biases zero.
    pub fn new(config: ScorerConfig) -> Self {
        let (layout, mut tensors) = Layout::build(&config);
        let mut rng = seed::rng(seed::derive(config.seed, 0x1417));
        for t in &mut tensors {
            if t.shape.len() == 2 {
                let fan_in = if t.name.ends_with("w_hh") || t.name.ends_with("w_ih") {
                    config.lstm_hidden
                } else {
                    t.shape[0]
                };
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in &mut t.data {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        Self { config, layout, tensors }
    }

    /// Rebuilds a model from stored tensors, checking names and shapes.
    pub fn from_tensors(config: ScorerConfig, stored: Vec<Tensor>) -> Result<Self, ModelError> {
        let (layout, expected) = Layout::build(&config);
        if expected.len() != stored.len() {
            return Err(ModelError::Count { expected: expected.len(), found: stored.len() });
        }
        for (e, s) in expected.iter().zip(&stored) {
            if e.name != s.name {
                return Err(ModelError::Name { expected: e.name.clone(), found: s.name.clone() });
            }
            if e.shape != s.shape || s.data.len() != e.data.len() {
                return Err(ModelError::Shape {
                    name: s.name.clone(),
                    expected: e.shape.clone(),
                    found: s.shape.clone(),
                });
            }
        }
        Ok(Self { config, layout, tensors: stored })
    }

    pub fn config(&self) -> &ScorerConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    /// Zeroes the output layer so every input scores exactly zero.
    pub fn zero_output_layer(&mut self) {
        let (w, b) = (self.layout.head_w2, self.layout.head_b2);
        self.tensors[w].data.fill(0.0);
        self.tensors[b].data.fill(0.0);
    }

    /// Sets the output bias; used to start a regressor at the target mean.
    pub fn set_output_bias(&mut self, value: f64) {
        let b = self.layout.head_b2;
        self.tensors[b].data[0] = value;
    }

    fn w(&self, idx: usize) -> &[f64] {
        &self.tensors[idx].data
    }

    pub fn score(&self, features: &SolutionFeatures) -> f64 {
        self.score_batch(&[features])[0]
    }

    pub fn score_batch(&self, batch: &[&SolutionFeatures]) -> Vec<f64> {
        if batch.is_empty() {
            return Vec::new();
        }
        self.forward(batch).scores
    }

    /// Scores a batch and backpropagates `d loss / d score` supplied by
    /// `loss_grad`, which receives the scores and returns the loss and the
    /// per-score gradients.
    pub fn forward_backward(
        &self,
        batch: &[&SolutionFeatures],
        loss_grad: impl FnOnce(&[f64]) -> (f64, Vec<f64>),
    ) -> (f64, Gradients) {
        let cache = self.forward(batch);
        let (loss, dscores) = loss_grad(&cache.scores);
        let grads = self.backward(batch, &cache, &dscores);
        (loss, grads)
    }

    fn forward(&self, batch: &[&SolutionFeatures]) -> Cache {
        let cfg = &self.config;
        let h = cfg.lstm_hidden;
        let routes = RouteIndex::new(batch);
        let g = routes.total();

        let mut dirs = Vec::with_capacity(2);
        let mut hcat = vec![0.0; g * 2 * h];
        for (dir, idx) in self.layout.lstm.iter().enumerate() {
            let steps = self.lstm_forward(batch, &routes, dir, idx);
            for (q, &route) in routes.sorted.iter().enumerate() {
                let last = &steps[routes.sorted_len[q] - 1];
                hcat[route * 2 * h + dir * h..route * 2 * h + (dir + 1) * h]
                    .copy_from_slice(&last.h[q * h..(q + 1) * h]);
            }
            dirs.push(steps);
        }

        let p1 = cfg.route_embedding;
        let mut emb = vec![0.0; g * p1];
        gemm(g, 2 * h, p1, 1.0, &hcat, false, self.w(self.layout.route_w), false, 0.0, &mut emb);
        add_bias(&mut emb, self.w(self.layout.route_b));
        relu_in_place(&mut emb);

        let mut stacks = Vec::with_capacity(self.layout.stacks.len());
        let mut x = emb;
        for idx in &self.layout.stacks {
            let st = self.attention_forward(&routes, idx, x);
            x = st.z.clone();
            stacks.push(st);
        }

        let dout = cfg.attention_output;
        let b = batch.len();
        let hin = dout + SOLUTION_FEATURES;
        let mut head_in = vec![0.0; b * hin];
        for (s, sol) in batch.iter().enumerate() {
            let (start, end) = routes.span(s);
            let row = &mut head_in[s * hin..(s + 1) * hin];
            let inv = 1.0 / (end - start) as f64;
            for r in start..end {
                for (acc, v) in row[..dout].iter_mut().zip(&x[r * dout..(r + 1) * dout]) {
                    *acc += v * inv;
                }
            }
            row[dout..].copy_from_slice(&sol.summary);
        }
        let hh = cfg.head_hidden;
        let mut hidden = vec![0.0; b * hh];
        gemm(b, hin, hh, 1.0, &head_in, false, self.w(self.layout.head_w1), false, 0.0, &mut hidden);
        add_bias(&mut hidden, self.w(self.layout.head_b1));
        relu_in_place(&mut hidden);
        let mut scores = vec![0.0; b];
        gemm(b, hh, 1, 1.0, &hidden, false, self.w(self.layout.head_w2), false, 0.0, &mut scores);
        add_bias(&mut scores, self.w(self.layout.head_b2));

        Cache { routes, dirs, hcat, stacks, head_in, hidden, scores }
    }

    fn lstm_forward(
        &self,
        batch: &[&SolutionFeatures],
        routes: &RouteIndex,
        dir: usize,
        idx: &LstmIdx,
    ) -> Vec<LstmStep> {
        let h = self.config.lstm_hidden;
        let (w_ih, w_hh, bias) = (self.w(idx.w_ih), self.w(idx.w_hh), self.w(idx.b));
        let mut steps: Vec<LstmStep> = Vec::with_capacity(routes.active.len());
        for (t, &k) in routes.active.iter().enumerate() {
            let mut x = vec![0.0; k * NODE_FEATURES];
            for q in 0..k {
                let len = routes.sorted_len[q];
                let pos = if dir == 0 { t } else { len - 1 - t };
                let node = routes.node(batch, routes.sorted[q], pos);
                x[q * NODE_FEATURES..(q + 1) * NODE_FEATURES].copy_from_slice(node);
            }
            let mut gates = vec![0.0; k * 4 * h];
            gemm(k, NODE_FEATURES, 4 * h, 1.0, &x, false, w_ih, false, 0.0, &mut gates);
            if let Some(prev) = steps.last() {
                gemm(k, h, 4 * h, 1.0, &prev.h, false, w_hh, false, 1.0, &mut gates);
            }
            add_bias(&mut gates, bias);
            let mut c = vec![0.0; k * h];
            let mut tc = vec![0.0; k * h];
            let mut hs = vec![0.0; k * h];
            for q in 0..k {
                let gr = &mut gates[q * 4 * h..(q + 1) * 4 * h];
                for u in 0..h {
                    let i = sigmoid(gr[u]);
                    let f = sigmoid(gr[h + u]);
                    let gg = gr[2 * h + u].tanh();
                    let o = sigmoid(gr[3 * h + u]);
                    gr[u] = i;
                    gr[h + u] = f;
                    gr[2 * h + u] = gg;
                    gr[3 * h + u] = o;
                    let c_prev = steps.last().map_or(0.0, |p| p.c[q * h + u]);
                    let cv = f * c_prev + i * gg;
                    let t = cv.tanh();
                    c[q * h + u] = cv;
                    tc[q * h + u] = t;
                    hs[q * h + u] = o * t;
                }
            }
            steps.push(LstmStep { x, gates, c, tc, h: hs });
        }
        steps
    }

    fn attention_forward(&self, routes: &RouteIndex, idx: &StackIdx, x: Vec<f64>) -> StackCache {
        let cfg = &self.config;
        let g = routes.total();
        let din = idx.input;
        let (heads, dh) = (cfg.attention_heads, cfg.attention_head_width);
        let hd = heads * dh;
        let project = |w: usize, b: usize| {
            let mut out = vec![0.0; g * hd];
            gemm(g, din, hd, 1.0, &x, false, self.w(w), false, 0.0, &mut out);
            add_bias(&mut out, self.w(b));
            out
        };
        let q = project(idx.wq, idx.bq);
        let k = project(idx.wk, idx.bk);
        let v = project(idx.wv, idx.bv);
        let scale = 1.0 / (dh as f64).sqrt();

        let mut attn = Vec::with_capacity(routes.attention_len(heads));
        let mut o = vec![0.0; g * hd];
        for s in 0..routes.solutions() {
            let (start, end) = routes.span(s);
            let n = end - start;
            for head in 0..heads {
                let col = head * dh;
                let base = attn.len();
                for i in 0..n {
                    let qi = &q[(start + i) * hd + col..(start + i) * hd + col + dh];
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..n {
                        let kj = &k[(start + j) * hd + col..(start + j) * hd + col + dh];
                        let sc = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
                        max = max.max(sc);
                        attn.push(sc);
                    }
                    let row = &mut attn[base + i * n..base + (i + 1) * n];
                    let mut total = 0.0;
                    for a in row.iter_mut() {
                        *a = (*a - max).exp();
                        total += *a;
                    }
                    for a in row.iter_mut() {
                        *a /= total;
                    }
                    let oi = &mut o[(start + i) * hd + col..(start + i) * hd + col + dh];
                    for j in 0..n {
                        let a = attn[base + i * n + j];
                        let vj = &v[(start + j) * hd + col..(start + j) * hd + col + dh];
                        for (acc, vv) in oi.iter_mut().zip(vj) {
                            *acc += a * vv;
                        }
                    }
                }
            }
        }
        let dout = cfg.attention_output;
        let mut z = vec![0.0; g * dout];
        gemm(g, hd, dout, 1.0, &o, false, self.w(idx.wo), false, 0.0, &mut z);
        add_bias(&mut z, self.w(idx.bo));
        relu_in_place(&mut z);
        StackCache { x, q, k, v, attn, o, z }
    }

    fn backward(&self, batch: &[&SolutionFeatures], cache: &Cache, dscores: &[f64]) -> Gradients {
        let cfg = &self.config;
        let lay = &self.layout;
        let mut grads = Gradients::zeros_like(self);
        let b = batch.len();
        let g = cache.routes.total();
        let hh = cfg.head_hidden;
        let dout = cfg.attention_output;
        let hin = dout + SOLUTION_FEATURES;

        // Head.
        gemm(hh, b, 1, 1.0, &cache.hidden, true, dscores, false, 1.0, &mut grads.tensors[lay.head_w2]);
        grads.tensors[lay.head_b2][0] += dscores.iter().sum::<f64>();
        let mut dhidden = vec![0.0; b * hh];
        gemm(b, 1, hh, 1.0, dscores, false, self.w(lay.head_w2), true, 0.0, &mut dhidden);
        relu_backward(&mut dhidden, &cache.hidden);
        gemm(hin, b, hh, 1.0, &cache.head_in, true, &dhidden, false, 1.0, &mut grads.tensors[lay.head_w1]);
        add_column_sums(&mut grads.tensors[lay.head_b1], &dhidden);
        let mut dhead_in = vec![0.0; b * hin];
        gemm(b, hh, hin, 1.0, &dhidden, false, self.w(lay.head_w1), true, 0.0, &mut dhead_in);

        // Mean pooling.
        let mut dx = vec![0.0; g * dout];
        for s in 0..b {
            let (start, end) = cache.routes.span(s);
            let inv = 1.0 / (end - start) as f64;
            let src = &dhead_in[s * hin..s * hin + dout];
            for r in start..end {
                for (d, v) in dx[r * dout..(r + 1) * dout].iter_mut().zip(src) {
                    *d = v * inv;
                }
            }
        }

        for (idx, st) in lay.stacks.iter().zip(&cache.stacks).rev() {
            dx = self.attention_backward(&cache.routes, idx, st, dx, &mut grads);
        }

        // Route projection; `dx` now holds the gradient of the route embeddings.
        let h = cfg.lstm_hidden;
        let p1 = cfg.route_embedding;
        let emb = &cache.stacks[0].x;
        relu_backward(&mut dx, emb);
        gemm(2 * h, g, p1, 1.0, &cache.hcat, true, &dx, false, 1.0, &mut grads.tensors[lay.route_w]);
        add_column_sums(&mut grads.tensors[lay.route_b], &dx);
        let mut dhcat = vec![0.0; g * 2 * h];
        gemm(g, p1, 2 * h, 1.0, &dx, false, self.w(lay.route_w), true, 0.0, &mut dhcat);

        for (dir, idx) in lay.lstm.iter().enumerate() {
            self.lstm_backward(&cache.routes, &cache.dirs[dir], dir, idx, &dhcat, &mut grads);
        }
        grads
    }

    fn attention_backward(
        &self,
        routes: &RouteIndex,
        idx: &StackIdx,
        st: &StackCache,
        mut dz: Vec<f64>,
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let cfg = &self.config;
        let g = routes.total();
        let din = idx.input;
        let (heads, dh) = (cfg.attention_heads, cfg.attention_head_width);
        let hd = heads * dh;
        let dout = cfg.attention_output;
        let scale = 1.0 / (dh as f64).sqrt();

        relu_backward(&mut dz, &st.z);
        gemm(hd, g, dout, 1.0, &st.o, true, &dz, false, 1.0, &mut grads.tensors[idx.wo]);
        add_column_sums(&mut grads.tensors[idx.bo], &dz);
        let mut d_o = vec![0.0; g * hd];
        gemm(g, dout, hd, 1.0, &dz, false, self.w(idx.wo), true, 0.0, &mut d_o);

        let mut dq = vec![0.0; g * hd];
        let mut dk = vec![0.0; g * hd];
        let mut dv = vec![0.0; g * hd];
        let mut offset = 0;
        let mut da = Vec::new();
        for s in 0..routes.solutions() {
            let (start, end) = routes.span(s);
            let n = end - start;
            for head in 0..heads {
                let col = head * dh;
                let a = &st.attn[offset..offset + n * n];
                offset += n * n;
                let row = |r: usize| (start + r) * hd + col;
                da.clear();
                da.resize(n * n, 0.0);
                for i in 0..n {
                    let doi = &d_o[row(i)..row(i) + dh];
                    for j in 0..n {
                        let vj = &st.v[row(j)..row(j) + dh];
                        da[i * n + j] = doi.iter().zip(vj).map(|(x, y)| x * y).sum();
                        let aij = a[i * n + j];
                        let dvj = &mut dv[row(j)..row(j) + dh];
                        for (acc, x) in dvj.iter_mut().zip(doi) {
                            *acc += aij * x;
                        }
                    }
                }
                // Softmax backward, then the scaled dot product.
                for i in 0..n {
                    let dot: f64 = (0..n).map(|j| a[i * n + j] * da[i * n + j]).sum();
                    for j in 0..n {
                        let ds = scale * a[i * n + j] * (da[i * n + j] - dot);
                        if ds == 0.0 {
                            continue;
                        }
                        let (ri, rj) = (row(i), row(j));
                        for d in 0..dh {
                            dq[ri + d] += ds * st.k[rj + d];
                            dk[rj + d] += ds * st.q[ri + d];
                        }
                    }
                }
            }
        }

        let mut dx = vec![0.0; g * din];
        for (w, bias, dproj) in [(idx.wq, idx.bq, &dq), (idx.wk, idx.bk, &dk), (idx.wv, idx.bv, &dv)] {
            gemm(din, g, hd, 1.0, &st.x, true, dproj, false, 1.0, &mut grads.tensors[w]);
            add_column_sums(&mut grads.tensors[bias], dproj);
            gemm(g, hd, din, 1.0, dproj, false, self.w(w), true, 1.0, &mut dx);
        }
        dx
    }

    fn lstm_backward(
        &self,
        routes: &RouteIndex,
        steps: &[LstmStep],
        dir: usize,
        idx: &LstmIdx,
        dhcat: &[f64],
        grads: &mut Gradients,
    ) {
        let h = self.config.lstm_hidden;
        let k0 = routes.active.first().copied().unwrap_or(0);
        let mut dh_rec = vec![0.0; k0 * h];
        let mut dc_rec = vec![0.0; k0 * h];
        let mut dgates = Vec::new();
        for t in (0..steps.len()).rev() {
            let k = routes.active[t];
            let st = &steps[t];
            // Routes whose last step is `t` receive the gradient of their final state.
            for q in 0..k {
                if routes.sorted_len[q] - 1 == t {
                    let r = routes.sorted[q];
                    let src = &dhcat[r * 2 * h + dir * h..r * 2 * h + (dir + 1) * h];
                    for (d, s) in dh_rec[q * h..(q + 1) * h].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            dgates.clear();
            dgates.resize(k * 4 * h, 0.0);
            for q in 0..k {
                let gr = &st.gates[q * 4 * h..(q + 1) * 4 * h];
                let dg = &mut dgates[q * 4 * h..(q + 1) * 4 * h];
                for u in 0..h {
                    let (i, f, gg, o) = (gr[u], gr[h + u], gr[2 * h + u], gr[3 * h + u]);
                    let tc = st.tc[q * h + u];
                    let dhv = dh_rec[q * h + u];
                    let dc = dc_rec[q * h + u] + dhv * o * (1.0 - tc * tc);
                    let c_prev = if t > 0 { steps[t - 1].c[q * h + u] } else { 0.0 };
                    dg[u] = dc * gg * i * (1.0 - i);
                    dg[h + u] = dc * c_prev * f * (1.0 - f);
                    dg[2 * h + u] = dc * i * (1.0 - gg * gg);
                    dg[3 * h + u] = dhv * tc * o * (1.0 - o);
                    dc_rec[q * h + u] = dc * f;
                }
            }
            gemm(NODE_FEATURES, k, 4 * h, 1.0, &st.x, true, &dgates, false, 1.0, &mut grads.tensors[idx.w_ih]);
            add_column_sums(&mut grads.tensors[idx.b], &dgates);
            if t > 0 {
                let prev_h = &steps[t - 1].h[..k * h];
                gemm(h, k, 4 * h, 1.0, prev_h, true, &dgates, false, 1.0, &mut grads.tensors[idx.w_hh]);
                gemm(k, 4 * h, h, 1.0, &dgates, false, self.w(idx.w_hh), true, 0.0, &mut dh_rec[..k * h]);
            }
        }
    }
}

/// Pairwise preference probability: softmax over the two scores, read as
/// the probability that the first solution is the better one. Computed for
/// the larger score and mirrored, so `p(a, b) + p(b, a)` is exactly one.
pub fn pair_probability(score_a: f64, score_b: f64) -> f64 {
    if score_a >= score_b {
        sigmoid(score_a - score_b)
    } else {
        1.0 - sigmoid(score_b - score_a)
    }
}

const PROB_CLAMP: f64 = 1e-12;

/// Binary cross-entropy of one pair with `p` clamped away from 0 and 1.
pub fn pairwise_loss(p: f64, label: u8) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Routes of a batch in solution order, plus the packed ordering used by
/// the LSTM.
struct RouteIndex {
    /// `offsets[s]..offsets[s + 1]` are the global route ids of solution `s`.
    offsets: Vec<usize>,
    /// Start of each global route's rows in its solution's node list.
    node_start: Vec<usize>,
    solution_of: Vec<usize>,
    /// Global route ids sorted by length, longest first (stable).
    sorted: Vec<usize>,
    sorted_len: Vec<usize>,
    /// Number of routes still running at each step.
    active: Vec<usize>,
}

impl RouteIndex {
    fn new(batch: &[&SolutionFeatures]) -> Self {
        let mut offsets = vec![0];
        let mut node_start = Vec::new();
        let mut solution_of = Vec::new();
        let mut lens = Vec::new();
        for (s, sol) in batch.iter().enumerate() {
            let mut start = 0;
            for &len in &sol.route_lens {
                node_start.push(start);
                solution_of.push(s);
                lens.push(len);
                start += len;
            }
            offsets.push(lens.len());
        }
        let mut sorted: Vec<usize> = (0..lens.len()).collect();
        sorted.sort_by(|&a, &b| lens[b].cmp(&lens[a]));
        let sorted_len: Vec<usize> = sorted.iter().map(|&r| lens[r]).collect();
        let longest = sorted_len.first().copied().unwrap_or(0);
        let active = (0..longest).map(|t| sorted_len.partition_point(|&l| l > t)).collect();
        Self { offsets, node_start, solution_of, sorted, sorted_len, active }
    }

    fn total(&self) -> usize {
        self.node_start.len()
    }

    fn solutions(&self) -> usize {
        self.offsets.len() - 1
    }

    fn span(&self, s: usize) -> (usize, usize) {
        (self.offsets[s], self.offsets[s + 1])
    }

    fn attention_len(&self, heads: usize) -> usize {
        (0..self.solutions())
            .map(|s| {
                let (a, b) = self.span(s);
                heads * (b - a) * (b - a)
            })
            .sum()
    }

    fn node<'a>(&self, batch: &[&'a SolutionFeatures], route: usize, pos: usize) -> &'a [f64] {
        &batch[self.solution_of[route]].nodes[self.node_start[route] + pos]
    }
}

struct LstmStep {
    x: Vec<f64>,
    /// Activated gates `[i | f | g | o]` per running route.
    gates: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
}

struct StackCache {
    x: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    attn: Vec<f64>,
    o: Vec<f64>,
    z: Vec<f64>,
}

struct Cache {
    routes: RouteIndex,
    dirs: Vec<Vec<LstmStep>>,
    hcat: Vec<f64>,
    stacks: Vec<StackCache>,
    head_in: Vec<f64>,
    hidden: Vec<f64>,
    scores: Vec<f64>,
}
