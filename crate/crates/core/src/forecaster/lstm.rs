//! LSTM baseline: standard gate equations with a linear head on the hidden
//! state, trained on the same per-day inputs as the liquid network.

use rand::Rng;

use crate::linalg::{dot, sigmoid, Matrix};
use crate::rng::stage_rng;

use super::ForecastError;

/// Gate weights act on the concatenation `[x, h_prev]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_g: Matrix,
    pub w_o: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_g: Vec<f64>,
    pub b_o: Vec<f64>,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl LstmParams {
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = stage_rng(seed, "lstm-init");
        let cols = input_dim + hidden;
        let bound = (6.0 / (cols + hidden) as f64).sqrt();
        let mat = |rng: &mut rand_chacha::ChaCha8Rng| {
            Matrix::from_fn(hidden, cols, |_, _| rng.gen_range(-bound..bound))
        };
        LstmParams {
            input_dim,
            hidden,
            w_i: mat(&mut rng),
            w_f: mat(&mut rng),
            w_g: mat(&mut rng),
            w_o: mat(&mut rng),
            b_i: vec![0.0; hidden],
            // start with the forget gate open
            b_f: vec![1.0; hidden],
            b_g: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            head_w: vec![0.0; hidden],
            head_b: 0.0,
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let cols = input_dim + hidden;
        LstmParams {
            input_dim,
            hidden,
            w_i: Matrix::zeros(hidden, cols),
            w_f: Matrix::zeros(hidden, cols),
            w_g: Matrix::zeros(hidden, cols),
            w_o: Matrix::zeros(hidden, cols),
            b_i: vec![0.0; hidden],
            b_f: vec![0.0; hidden],
            b_g: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            head_w: vec![0.0; hidden],
            head_b: 0.0,
        }
    }

    pub fn n_params(&self) -> usize {
        4 * (self.w_i.data.len() + self.hidden) + self.hidden + 1
    }

    /// Order: W_i, W_f, W_g, W_o, b_i, b_f, b_g, b_o, head weights, head bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for m in [&self.w_i, &self.w_f, &self.w_g, &self.w_o] {
            out.extend_from_slice(&m.data);
        }
        for b in [&self.b_i, &self.b_f, &self.b_g, &self.b_o] {
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&self.head_w);
        out.push(self.head_b);
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter size mismatch");
        let wn = self.w_i.data.len();
        let h = self.hidden;
        let mut off = 0;
        for m in [&mut self.w_i, &mut self.w_f, &mut self.w_g, &mut self.w_o] {
            m.data.copy_from_slice(&flat[off..off + wn]);
            off += wn;
        }
        for b in [&mut self.b_i, &mut self.b_f, &mut self.b_g, &mut self.b_o] {
            b.copy_from_slice(&flat[off..off + h]);
            off += h;
        }
        self.head_w.copy_from_slice(&flat[off..off + h]);
        self.head_b = flat[off + h];
    }
}

/// Per-step values cached for backprop.
#[derive(Debug, Clone)]
pub struct CellCache {
    pub concat: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub c_tanh: Vec<f64>,
    pub h: Vec<f64>,
}

/// One LSTM step: input/forget/output gates, tanh candidate.
pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmParams,
) -> Result<CellCache, ForecastError> {
    if x.len() != params.input_dim || h_prev.len() != params.hidden || c_prev.len() != params.hidden
    {
        return Err(ForecastError::DimMismatch {
            message: format!(
                "lstm cell got x={}, h={}, c={}, expected x={}, h/c={}",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                params.input_dim,
                params.hidden
            ),
        });
    }
    let mut concat = Vec::with_capacity(x.len() + h_prev.len());
    concat.extend_from_slice(x);
    concat.extend_from_slice(h_prev);

    let gate = |w: &Matrix, b: &[f64]| -> Vec<f64> {
        let mut z = w.matvec(&concat);
        for (zi, bi) in z.iter_mut().zip(b) {
            *zi += bi;
        }
        z
    };
    let i: Vec<f64> = gate(&params.w_i, &params.b_i).into_iter().map(sigmoid).collect();
    let f: Vec<f64> = gate(&params.w_f, &params.b_f).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = gate(&params.w_g, &params.b_g).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = gate(&params.w_o, &params.b_o).into_iter().map(sigmoid).collect();

    let c: Vec<f64> = (0..params.hidden)
        .map(|k| f[k] * c_prev[k] + i[k] * g[k])
        .collect();
    let c_tanh: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..params.hidden).map(|k| o[k] * c_tanh[k]).collect();

    Ok(CellCache {
        concat,
        i,
        f,
        g,
        o,
        c_prev: c_prev.to_vec(),
        c,
        c_tanh,
        h,
    })
}

#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub steps: Vec<CellCache>,
    pub outputs: Vec<f64>,
}

/// Run the cell over a sequence from zero state, reading the head each day.
pub fn lstm_forward(params: &LstmParams, inputs: &[Vec<f64>]) -> Result<LstmTrace, ForecastError> {
    let mut h = vec![0.0; params.hidden];
    let mut c = vec![0.0; params.hidden];
    let mut steps = Vec::with_capacity(inputs.len());
    let mut outputs = Vec::with_capacity(inputs.len());
    for x in inputs {
        let cache = lstm_cell(x, &h, &c, params)?;
        h = cache.h.clone();
        c = cache.c.clone();
        outputs.push(dot(&params.head_w, &h) + params.head_b);
        steps.push(cache);
    }
    Ok(LstmTrace { steps, outputs })
}

/// Exact BPTT through every step and the head.
pub fn lstm_backward(
    params: &LstmParams,
    trace: &LstmTrace,
    dloss_dy: &[f64],
) -> Result<LstmParams, ForecastError> {
    if trace.steps.len() != dloss_dy.len() {
        return Err(ForecastError::DimMismatch {
            message: format!(
                "trace has {} steps, upstream {} entries",
                trace.steps.len(),
                dloss_dy.len()
            ),
        });
    }
    let h = params.hidden;
    let mut grads = LstmParams::zeros(params.input_dim, h);
    let mut gh = vec![0.0; h];
    let mut gc = vec![0.0; h];

    for (t, cache) in trace.steps.iter().enumerate().rev() {
        let gy = dloss_dy[t];
        for k in 0..h {
            grads.head_w[k] += gy * cache.h[k];
            gh[k] += gy * params.head_w[k];
        }
        grads.head_b += gy;

        let mut gi = vec![0.0; h];
        let mut gf = vec![0.0; h];
        let mut gg = vec![0.0; h];
        let mut go = vec![0.0; h];
        for k in 0..h {
            go[k] = gh[k] * cache.c_tanh[k] * cache.o[k] * (1.0 - cache.o[k]);
            gc[k] += gh[k] * cache.o[k] * (1.0 - cache.c_tanh[k] * cache.c_tanh[k]);
            gf[k] = gc[k] * cache.c_prev[k] * cache.f[k] * (1.0 - cache.f[k]);
            gi[k] = gc[k] * cache.g[k] * cache.i[k] * (1.0 - cache.i[k]);
            gg[k] = gc[k] * cache.i[k] * (1.0 - cache.g[k] * cache.g[k]);
        }

        grads.w_i.add_outer(&gi, &cache.concat, 1.0);
        grads.w_f.add_outer(&gf, &cache.concat, 1.0);
        grads.w_g.add_outer(&gg, &cache.concat, 1.0);
        grads.w_o.add_outer(&go, &cache.concat, 1.0);
        for k in 0..h {
            grads.b_i[k] += gi[k];
            grads.b_f[k] += gf[k];
            grads.b_g[k] += gg[k];
            grads.b_o[k] += go[k];
        }

        let mut g_concat = params.w_i.matvec_t(&gi);
        for (dst, src) in g_concat.iter_mut().zip(params.w_f.matvec_t(&gf)) {
            *dst += src;
        }
        for (dst, src) in g_concat.iter_mut().zip(params.w_g.matvec_t(&gg)) {
            *dst += src;
        }
        for (dst, src) in g_concat.iter_mut().zip(params.w_o.matvec_t(&go)) {
            *dst += src;
        }
        // gradient w.r.t. the input slice is dropped; h/c flow to step t-1
        for k in 0..h {
            gh[k] = g_concat[params.input_dim + k];
            gc[k] *= cache.f[k];
        }
    }
    Ok(grads)
}

// ---- checkpoint bytes (embedded in the forecaster bundle) ----

const MAGIC: &[u8; 4] = b"LSM1";

pub fn lstm_to_bytes(params: &LstmParams, seed: u64) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&(params.input_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(params.hidden as u32).to_le_bytes());
    buf.extend_from_slice(&seed.to_le_bytes());
    for &v in &params.flatten() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

pub fn lstm_from_bytes(buf: &[u8]) -> Result<(LstmParams, u64), ForecastError> {
    let bad = |message: String| ForecastError::BadCheckpoint { message };
    if buf.len() < 24 || &buf[0..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != 1 {
        return Err(bad(format!("unsupported version {version}")));
    }
    let input_dim = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let hidden = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
    let seed = u64::from_le_bytes(buf[16..24].try_into().unwrap());
    let mut params = LstmParams::zeros(input_dim, hidden);
    let n = params.n_params();
    if buf.len() != 24 + 4 * n {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            4 * n,
            buf.len() - 24
        )));
    }
    let mut flat = Vec::with_capacity(n);
    for chunk in buf[24..].chunks_exact(4) {
        flat.push(f64::from(f32::from_le_bytes(chunk.try_into().unwrap())));
    }
    params.assign_from_flat(&flat);
    Ok((params, seed))
}
