//! Shared helpers for the integration and acceptance suites: a
//! high-resolution reference ODE integrator (test-only; the production path
//! uses the fused solver), rank correlation, and small statistics utilities.

use los_core::ltc::{ltc_f, LtcModel, WiringDiagram};

/// Continuous-time derivative of the liquid cell at state `x` under constant
/// input: `dx_j = -(1/tau_j + gate_j) x_j + drive_j`.
fn derivative(model: &LtcModel, x: &[f64], input: &[f64]) -> Vec<f64> {
    let wiring: &WiringDiagram = &model.wiring;
    let f = ltc_f(x, input, &model.params, wiring);
    let mut gate = vec![0.0; wiring.state_size()];
    let mut drive = vec![0.0; wiring.state_size()];
    for (s, syn) in wiring.synapses.iter().enumerate() {
        let j = wiring.state_index(syn.dst);
        gate[j] += f[s];
        drive[j] += f[s] * model.params.a[s] * f64::from(syn.polarity);
    }
    (0..wiring.state_size())
        .map(|j| -(1.0 / model.params.tau[j] + gate[j]) * x[j] + drive[j])
        .collect()
}

/// Classic RK4 over one day with `steps` sub-steps and constant input.
fn rk4_day(model: &LtcModel, x: &[f64], input: &[f64], steps: usize) -> Vec<f64> {
    let h = 1.0 / steps as f64;
    let n = x.len();
    let mut x = x.to_vec();
    for _ in 0..steps {
        let k1 = derivative(model, &x, input);
        let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
        let k2 = derivative(model, &x2, input);
        let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2[i]).collect();
        let k3 = derivative(model, &x3, input);
        let x4: Vec<f64> = (0..n).map(|i| x[i] + h * k3[i]).collect();
        let k4 = derivative(model, &x4, input);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

/// Reference trajectory: day-boundary states from a high-resolution RK4
/// integration of the continuous dynamics.
pub fn reference_trajectory(
    model: &LtcModel,
    inputs: &[Vec<f64>],
    steps_per_day: usize,
) -> Vec<Vec<f64>> {
    let mut x = vec![0.0; model.wiring.state_size()];
    let mut out = Vec::with_capacity(inputs.len());
    for input in inputs {
        x = rk4_day(model, &x, input, steps_per_day);
        out.push(x.clone());
    }
    out
}

/// Day-boundary states from the production fused solver at a given unfold.
pub fn fused_trajectory(model: &LtcModel, inputs: &[Vec<f64>], unfold: usize) -> Vec<Vec<f64>> {
    let mut m = model.clone();
    m.unfold = unfold;
    let trace = los_core::ltc::forward(&m, inputs).expect("forward succeeds");
    (1..=inputs.len())
        .map(|day| trace.states[day * unfold].clone())
        .collect()
}

pub fn trajectory_rmse(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (xa, xb) in a.iter().zip(b) {
        for (va, vb) in xa.iter().zip(xb) {
            sum += (va - vb) * (va - vb);
            n += 1;
        }
    }
    (sum / n as f64).sqrt()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}
