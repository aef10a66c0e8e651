//! Liquid time-constant network: a continuous-time recurrent cell whose
//! hidden state follows
//!
//! ```text
//! dx/dt = -[1/tau + f(x, I)] x + f(x, I) A
//! ```
//!
//! with a per-synapse gate `f_ij = w_ij * sigmoid(gamma_ij (pre_i - mu_ij))`,
//! so `f >= 0` and the effective time constant `tau_sys = tau / (1 + tau f)`
//! is bounded by `tau`. Integration uses a fused semi-implicit Euler step:
//! the decay term is treated implicitly, giving a per-step denominator > 1
//! and unconditional stability. Gradients are exact reverse-mode through the
//! unrolled solver.

mod checkpoint;
mod wiring;

pub use checkpoint::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use wiring::{auto_ncp_wire, Layer, SparsityConfig, Synapse, WiringDiagram};

use rand::Rng;
use thiserror::Error;

use crate::linalg::sigmoid;
use crate::rng::stage_rng;

#[derive(Debug, Error)]
pub enum LtcError {
    #[error("bad wiring: {message}")]
    BadWiring { message: String },
    #[error("{n_units} units cannot hold {n_motor} motor plus inter and command neurons")]
    TooFewUnits { n_units: usize, n_motor: usize },
    #[error("input has length {got}, expected {want} sensory features")]
    InputDim { got: usize, want: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("non-finite state at day {day}, solver step {step}")]
    NonFiniteState { day: usize, step: usize },
    #[error("trace does not match model: {message}")]
    TraceMismatch { message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad checkpoint: {message}")]
    BadCheckpoint { message: String },
}

/// Learnable parameters. Synapse arrays are indexed in the order of
/// `wiring.synapses`; `tau` is indexed by state (non-sensory) neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct LtcParams {
    /// Per-synapse gate magnitude, kept >= 0 (the sign lives in the wiring).
    pub w: Vec<f64>,
    /// Per-synapse reversal value; the drive toward which the gate pulls.
    pub a: Vec<f64>,
    /// Per-synapse sigmoid slope.
    pub gamma: Vec<f64>,
    /// Per-synapse sigmoid offset.
    pub mu: Vec<f64>,
    /// Per-neuron time constant in days, > 0.
    pub tau: Vec<f64>,
    /// Linear output head over motor states.
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

pub const TAU_FLOOR: f64 = 1e-2;

impl LtcParams {
    /// Spread gates over their responsive range; head starts at zero.
    pub fn init(wiring: &WiringDiagram, seed: u64) -> Self {
        let mut rng = stage_rng(seed, "ltc-init");
        let n = wiring.synapses.len();
        LtcParams {
            w: (0..n).map(|_| rng.gen_range(0.01..1.0)).collect(),
            a: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            gamma: (0..n).map(|_| rng.gen_range(3.0..8.0)).collect(),
            mu: (0..n).map(|_| rng.gen_range(0.3..0.8)).collect(),
            tau: (0..wiring.state_size())
                .map(|_| rng.gen_range(0.5..2.0))
                .collect(),
            head_w: vec![0.0; wiring.n_motor],
            head_b: 0.0,
        }
    }

    pub fn zeros_like(wiring: &WiringDiagram) -> Self {
        let n = wiring.synapses.len();
        LtcParams {
            w: vec![0.0; n],
            a: vec![0.0; n],
            gamma: vec![0.0; n],
            mu: vec![0.0; n],
            tau: vec![0.0; wiring.state_size()],
            head_w: vec![0.0; wiring.n_motor],
            head_b: 0.0,
        }
    }

    pub fn n_params(&self) -> usize {
        4 * self.w.len() + self.tau.len() + self.head_w.len() + 1
    }

    /// Order: w, a, gamma, mu, tau, head weights, head bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.w);
        out.extend_from_slice(&self.a);
        out.extend_from_slice(&self.gamma);
        out.extend_from_slice(&self.mu);
        out.extend_from_slice(&self.tau);
        out.extend_from_slice(&self.head_w);
        out.push(self.head_b);
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter size mismatch");
        let n = self.w.len();
        let t = self.tau.len();
        let m = self.head_w.len();
        self.w.copy_from_slice(&flat[0..n]);
        self.a.copy_from_slice(&flat[n..2 * n]);
        self.gamma.copy_from_slice(&flat[2 * n..3 * n]);
        self.mu.copy_from_slice(&flat[3 * n..4 * n]);
        self.tau.copy_from_slice(&flat[4 * n..4 * n + t]);
        self.head_w.copy_from_slice(&flat[4 * n + t..4 * n + t + m]);
        self.head_b = flat[4 * n + t + m];
    }

    /// Re-establish the parameter invariants after an unconstrained update.
    pub fn project(&mut self) {
        for w in &mut self.w {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        for tau in &mut self.tau {
            if *tau < TAU_FLOOR {
                *tau = TAU_FLOOR;
            }
        }
    }
}

/// Wiring plus parameters plus solver resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LtcModel {
    pub wiring: WiringDiagram,
    pub params: LtcParams,
    /// ODE sub-steps per day.
    pub unfold: usize,
    pub seed: u64,
}

pub const DEFAULT_UNFOLD: usize = 4;
pub const DEFAULT_UNITS: usize = 28;

impl LtcModel {
    pub fn new(wiring: WiringDiagram, seed: u64, unfold: usize) -> Self {
        let params = LtcParams::init(&wiring, seed);
        LtcModel {
            wiring,
            params,
            unfold,
            seed,
        }
    }

    /// Exact trainable parameter count: four per synapse, one time constant
    /// per neuron, plus the output head.
    pub fn param_count(&self) -> usize {
        self.params.n_params()
    }
}

/// Per-synapse gate activations for state `x` and input `I`.
/// `f_ij = w_ij * sigmoid(gamma_ij * (pre_i - mu_ij))`, in `[0, w_ij]`.
pub fn ltc_f(x: &[f64], input: &[f64], params: &LtcParams, wiring: &WiringDiagram) -> Vec<f64> {
    assert_eq!(input.len(), wiring.n_sensory, "input width mismatch");
    assert_eq!(x.len(), wiring.state_size(), "state width mismatch");
    wiring
        .synapses
        .iter()
        .enumerate()
        .map(|(s, syn)| {
            let pre = if syn.src < wiring.n_sensory {
                input[syn.src]
            } else {
                x[wiring.state_index(syn.src)]
            };
            params.w[s] * sigmoid(params.gamma[s] * (pre - params.mu[s]))
        })
        .collect()
}

/// Sum the per-synapse gates into each destination neuron.
pub fn aggregate_gates(f: &[f64], wiring: &WiringDiagram) -> Vec<f64> {
    let mut agg = vec![0.0; wiring.state_size()];
    for (fs, syn) in f.iter().zip(&wiring.synapses) {
        agg[wiring.state_index(syn.dst)] += fs;
    }
    agg
}

/// Input-dependent effective time constant, `tau / (1 + tau * f)` elementwise.
/// For `tau > 0` and `f >= 0` this stays in `(0, tau]`.
pub fn tau_sys(tau: &[f64], f_agg: &[f64]) -> Vec<f64> {
    tau.iter()
        .zip(f_agg)
        .map(|(&t, &f)| t / (1.0 + t * f))
        .collect()
}

/// One fused semi-implicit Euler step. Per neuron `j`:
///
/// ```text
/// x'_j = (x_j + dt * sum f_ij A_ij pol_ij) / (1 + dt (1/tau_j + sum f_ij))
/// ```
///
/// The denominator is always > 1, so the step never divides by anything
/// small and the pure-decay direction is unconditionally stable.
pub fn fused_step(
    x: &[f64],
    input: &[f64],
    dt: f64,
    params: &LtcParams,
    wiring: &WiringDiagram,
) -> Vec<f64> {
    debug_assert!(dt > 0.0);
    let f = ltc_f(x, input, params, wiring);
    let mut drive = vec![0.0; wiring.state_size()];
    let mut gate = vec![0.0; wiring.state_size()];
    for (s, syn) in wiring.synapses.iter().enumerate() {
        let j = wiring.state_index(syn.dst);
        drive[j] += f[s] * params.a[s] * f64::from(syn.polarity);
        gate[j] += f[s];
    }
    (0..wiring.state_size())
        .map(|j| {
            let num = x[j] + dt * drive[j];
            let den = 1.0 + dt * (1.0 / params.tau[j] + gate[j]);
            num / den
        })
        .collect()
}

/// Unrolled forward pass: everything backward needs to replay the solver.
#[derive(Debug, Clone)]
pub struct LtcTrace {
    /// States at every sub-step boundary; `states[t*L + l]` enters sub-step
    /// `l` of day `t`, `states[T*L]` is the final state.
    pub states: Vec<Vec<f64>>,
    /// Head output per day.
    pub outputs: Vec<f64>,
}

/// Run the solver over a day-indexed input sequence from `x_0 = 0`, reading
/// the head after each day's `unfold` sub-steps of `dt = 1/unfold`.
pub fn forward(model: &LtcModel, inputs: &[Vec<f64>]) -> Result<LtcTrace, LtcError> {
    if inputs.is_empty() {
        return Err(LtcError::EmptySequence);
    }
    let wiring = &model.wiring;
    let dt = 1.0 / model.unfold as f64;
    let mut states = Vec::with_capacity(inputs.len() * model.unfold + 1);
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut x = vec![0.0; wiring.state_size()];
    states.push(x.clone());
    for (day, input) in inputs.iter().enumerate() {
        if input.len() != wiring.n_sensory {
            return Err(LtcError::InputDim {
                got: input.len(),
                want: wiring.n_sensory,
            });
        }
        for step in 0..model.unfold {
            x = fused_step(&x, input, dt, &model.params, wiring);
            if !x.iter().all(|v| v.is_finite()) {
                return Err(LtcError::NonFiniteState { day, step });
            }
            states.push(x.clone());
        }
        let mut y = model.params.head_b;
        for (k, motor) in model.wiring.motor_range().enumerate() {
            y += model.params.head_w[k] * x[wiring.state_index(motor)];
        }
        outputs.push(y);
    }
    Ok(LtcTrace { states, outputs })
}

/// Exact reverse-mode gradients of a scalar loss through the whole unrolled
/// solver and the head. `dloss_dy[t]` is the upstream gradient at day `t`'s
/// output. Returns gradients with the same shapes as [`LtcParams`].
pub fn backward(
    model: &LtcModel,
    trace: &LtcTrace,
    inputs: &[Vec<f64>],
    dloss_dy: &[f64],
) -> Result<LtcParams, LtcError> {
    let wiring = &model.wiring;
    let params = &model.params;
    let n_days = inputs.len();
    if trace.outputs.len() != n_days || dloss_dy.len() != n_days {
        return Err(LtcError::TraceMismatch {
            message: format!(
                "trace has {} outputs, inputs {} days, upstream {} entries",
                trace.outputs.len(),
                n_days,
                dloss_dy.len()
            ),
        });
    }
    if trace.states.len() != n_days * model.unfold + 1 {
        return Err(LtcError::TraceMismatch {
            message: format!(
                "trace has {} states, expected {}",
                trace.states.len(),
                n_days * model.unfold + 1
            ),
        });
    }

    let dt = 1.0 / model.unfold as f64;
    let mut grads = LtcParams::zeros_like(wiring);
    let mut gx = vec![0.0; wiring.state_size()];

    for day in (0..n_days).rev() {
        // head sees the state after the day's last sub-step
        let x_day_end = &trace.states[(day + 1) * model.unfold];
        let gy = dloss_dy[day];
        for (k, motor) in wiring.motor_range().enumerate() {
            let j = wiring.state_index(motor);
            grads.head_w[k] += gy * x_day_end[j];
            gx[j] += gy * params.head_w[k];
        }
        grads.head_b += gy;

        let input = &inputs[day];
        for step in (0..model.unfold).rev() {
            let x_in = &trace.states[day * model.unfold + step];
            let x_out = &trace.states[day * model.unfold + step + 1];

            // replay the step's gates and denominators
            let mut gate = vec![0.0; wiring.state_size()];
            let mut sig = vec![0.0; wiring.synapses.len()];
            let mut pre = vec![0.0; wiring.synapses.len()];
            for (s, syn) in wiring.synapses.iter().enumerate() {
                pre[s] = if syn.src < wiring.n_sensory {
                    input[syn.src]
                } else {
                    x_in[wiring.state_index(syn.src)]
                };
                sig[s] = sigmoid(params.gamma[s] * (pre[s] - params.mu[s]));
                gate[wiring.state_index(syn.dst)] += params.w[s] * sig[s];
            }
            let den: Vec<f64> = (0..wiring.state_size())
                .map(|j| 1.0 + dt * (1.0 / params.tau[j] + gate[j]))
                .collect();

            let mut gx_prev = vec![0.0; wiring.state_size()];
            for j in 0..wiring.state_size() {
                let g = gx[j];
                if g == 0.0 {
                    continue;
                }
                // d x'_j / d x_j = 1/den ;  d x'_j / d tau_j = x'_j dt / (tau^2 den)
                gx_prev[j] += g / den[j];
                grads.tau[j] += g * x_out[j] * dt / (params.tau[j] * params.tau[j] * den[j]);
            }
            for (s, syn) in wiring.synapses.iter().enumerate() {
                let j = wiring.state_index(syn.dst);
                let g = gx[j];
                if g == 0.0 {
                    continue;
                }
                let pol = f64::from(syn.polarity);
                let f_s = params.w[s] * sig[s];
                let common = g * dt / den[j];
                // d x'_j / d f_s = dt (A pol - x'_j) / den
                let gf = common * (params.a[s] * pol - x_out[j]);
                grads.a[s] += common * f_s * pol;
                grads.w[s] += gf * sig[s];
                let gz = gf * params.w[s] * sig[s] * (1.0 - sig[s]);
                grads.gamma[s] += gz * (pre[s] - params.mu[s]);
                grads.mu[s] -= gz * params.gamma[s];
                if syn.src >= wiring.n_sensory {
                    gx_prev[wiring.state_index(syn.src)] += gz * params.gamma[s];
                }
            }
            gx = gx_prev;
        }
    }
    Ok(grads)
}
