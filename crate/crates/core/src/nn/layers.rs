//! Building blocks shared by the diarizer and the generator.

use rand::Rng;

use super::matrix::{Matrix, ShapeError};
use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};

/// Large negative score used to mask attention entries.
pub const MASKED: f64 = -1e9;

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let w = store.add_xavier(format!("{name}.w"), d_in, d_out, rng);
        let b = store.add_zeros(format!("{name}.b"), 1, d_out);
        Linear { w, b }
    }

    /// Both weights and bias start at zero, so outputs are zero.
    pub fn zeroed(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Self {
        let w = store.add_zeros(format!("{name}.w"), d_in, d_out);
        let b = store.add_zeros(format!("{name}.b"), 1, d_out);
        Linear { w, b }
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Result<Var, ShapeError> {
        let w = t.param(self.w);
        let b = t.param(self.b);
        let h = t.matmul(x, w)?;
        t.add_row(h, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        LayerNorm {
            gamma: store.add_filled(format!("{name}.gamma"), 1, d, 1.0),
            beta: store.add_zeros(format!("{name}.beta"), 1, d),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Result<Var, ShapeError> {
        let g = t.param(self.gamma);
        let b = t.param(self.beta);
        let n = t.norm_rows(x);
        let s = t.mul_row(n, g)?;
        t.add_row(s, b)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        FeedForward {
            inner: Linear::new(store, &format!("{name}.inner"), d, hidden, rng),
            outer: Linear::new(store, &format!("{name}.outer"), hidden, d, rng),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Result<Var, ShapeError> {
        let h = self.inner.forward(t, x)?;
        let h = t.gelu(h);
        self.outer.forward(t, h)
    }
}

/// Single-head scaled dot-product attention.
#[derive(Debug, Clone)]
pub struct Attention {
    pub q: ParamId,
    pub k: ParamId,
    pub v: ParamId,
    pub o: ParamId,
    d: usize,
}

impl Attention {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, rng: &mut impl Rng) -> Self {
        Attention {
            q: store.add_xavier(format!("{name}.q"), d, d, rng),
            k: store.add_xavier(format!("{name}.k"), d, d, rng),
            v: store.add_xavier(format!("{name}.v"), d, d, rng),
            o: store.add_xavier(format!("{name}.o"), d, d, rng),
            d,
        }
    }

    /// Queries from `x`, keys and values from `memory`. `mask`, when given,
    /// is added to the `rows(x) x rows(memory)` score matrix.
    pub fn forward(&self, t: &mut Tape, x: Var, memory: Var, mask: Option<&Matrix>) -> Result<Var, ShapeError> {
        if t.shape(x).1 != self.d || t.shape(memory).1 != self.d {
            return Err(ShapeError::invalid("attention", format!("expected width {}", self.d)));
        }
        let (wq, wk, wv, wo) = (t.param(self.q), t.param(self.k), t.param(self.v), t.param(self.o));
        let q = t.matmul(x, wq)?;
        let k = t.matmul(memory, wk)?;
        let v = t.matmul(memory, wv)?;
        let scores = t.matmul_bt(q, k)?;
        let mut scores = t.scale(scores, 1.0 / (self.d as f64).sqrt());
        if let Some(m) = mask {
            scores = t.add_const(scores, m)?;
        }
        let weights = t.softmax_rows(scores);
        let mixed = t.matmul(weights, v)?;
        t.matmul(mixed, wo)
    }
}

/// Post-norm encoder layer: self-attention and feed-forward, each with a
/// residual connection followed by layer normalisation.
#[derive(Debug, Clone)]
pub struct TransformerLayer {
    pub attn: Attention,
    pub norm1: LayerNorm,
    pub ff: FeedForward,
    pub norm2: LayerNorm,
}

impl TransformerLayer {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, rng: &mut impl Rng) -> Self {
        TransformerLayer {
            attn: Attention::new(store, &format!("{name}.attn"), d, rng),
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d),
            ff: FeedForward::new(store, &format!("{name}.ff"), d, 2 * d, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Result<Var, ShapeError> {
        if t.shape(x).0 == 0 {
            return Err(ShapeError::invalid("transformer_layer", "empty input"));
        }
        let a = self.attn.forward(t, x, x, None)?;
        let h = t.add(x, a)?;
        let h = self.norm1.forward(t, h)?;
        let f = self.ff.forward(t, h)?;
        let o = t.add(h, f)?;
        self.norm2.forward(t, o)
    }
}

/// Post-norm decoder layer: causal self-attention, cross-attention over a
/// memory matrix, feed-forward.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub self_attn: Attention,
    pub norm1: LayerNorm,
    pub cross: Attention,
    pub norm2: LayerNorm,
    pub ff: FeedForward,
    pub norm3: LayerNorm,
}

impl DecoderLayer {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, rng: &mut impl Rng) -> Self {
        DecoderLayer {
            self_attn: Attention::new(store, &format!("{name}.self"), d, rng),
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d),
            cross: Attention::new(store, &format!("{name}.cross"), d, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d),
            ff: FeedForward::new(store, &format!("{name}.ff"), d, 2 * d, rng),
            norm3: LayerNorm::new(store, &format!("{name}.norm3"), d),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: Var, memory: Var) -> Result<Var, ShapeError> {
        let mask = causal_mask(t.shape(x).0);
        let a = self.self_attn.forward(t, x, x, Some(&mask))?;
        let h = t.add(x, a)?;
        let h = self.norm1.forward(t, h)?;
        let c = self.cross.forward(t, h, memory, None)?;
        let h2 = t.add(h, c)?;
        let h2 = self.norm2.forward(t, h2)?;
        let f = self.ff.forward(t, h2)?;
        let o = t.add(h2, f)?;
        self.norm3.forward(t, o)
    }
}

pub fn causal_mask(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |r, c| if c > r { MASKED } else { 0.0 })
}

/// Sinusoidal position table: row `i` encodes position `start + i`.
pub fn sinusoid(len: usize, d: usize, start: usize) -> Matrix {
    Matrix::from_fn(len, d, |r, c| {
        let pos = (start + r) as f64;
        let rate = 1.0 / 10000f64.powf((2 * (c / 2)) as f64 / d.max(1) as f64);
        if c % 2 == 0 {
            (pos * rate).sin()
        } else {
            (pos * rate).cos()
        }
    })
}

/// Positions seen from both ends of a sequence: the first half of the
/// columns encodes the index, the second half the distance to the last row.
pub fn two_ended_positions(len: usize, d: usize) -> Matrix {
    let half = d / 2;
    let fwd = sinusoid(len, half, 0);
    let back = sinusoid(len, d - half, 0);
    Matrix::from_fn(len, d, |r, c| if c < half { fwd.get(r, c) } else { back.get(len - 1 - r, c - half) })
}
