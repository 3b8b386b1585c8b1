//! Single-layer LSTM with a linear scalar head, evaluated many-to-one over a
//! fixed window, plus exact reverse-mode gradients through the unrolled
//! recurrence.
//!
//! Parameters live in one flat buffer so the optimizer and gradient checks
//! can treat them as a plain vector. Gate blocks are stacked in the order
//! input, forget, cell candidate, output:
//!
//! ```text
//! w      4H x I   (row-major)
//! u      4H x H
//! b      4H
//! w_out  H
//! b_out  1
//! ```

use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    input_dim: usize,
    hidden_dim: usize,
    data: Vec<f64>,
}

impl LstmParams {
    pub fn n_params(input_dim: usize, hidden_dim: usize) -> usize {
        4 * hidden_dim * (input_dim + hidden_dim + 1) + hidden_dim + 1
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        assert!(
            input_dim >= 1 && hidden_dim >= 1,
            "LSTM dimensions must be >= 1"
        );
        LstmParams {
            input_dim,
            hidden_dim,
            data: vec![0.0; Self::n_params(input_dim, hidden_dim)],
        }
    }

    /// Uniform `+-1/sqrt(H)` initialisation with the forget-gate bias at 1.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        for v in p.data.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let h = hidden_dim;
        p.b_mut()[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
        *p.b_out_mut() = 0.0;
        p
    }

    pub fn from_vec(input_dim: usize, hidden_dim: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == Self::n_params(input_dim, hidden_dim) && input_dim >= 1 && hidden_dim >= 1)
            .then_some(LstmParams {
                input_dim,
                hidden_dim,
                data,
            })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn offsets(&self) -> [usize; 5] {
        let (i, h) = (self.input_dim, self.hidden_dim);
        let u = 4 * h * i;
        let b = u + 4 * h * h;
        let w_out = b + 4 * h;
        let b_out = w_out + h;
        [0, u, b, w_out, b_out]
    }

    pub fn w(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[0]..o[1]]
    }

    pub fn w_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[0]..o[1]]
    }

    pub fn u(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[1]..o[2]]
    }

    pub fn u_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[1]..o[2]]
    }

    pub fn b(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[2]..o[3]]
    }

    pub fn b_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[2]..o[3]]
    }

    pub fn w_out(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[3]..o[4]]
    }

    pub fn w_out_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[3]..o[4]]
    }

    pub fn b_out(&self) -> f64 {
        self.data[self.offsets()[4]]
    }

    pub fn b_out_mut(&mut self) -> &mut f64 {
        let o = self.offsets()[4];
        &mut self.data[o]
    }

    /// Rows of the input matrix belonging to one gate (H x I).
    pub fn gate_w(&self, gate: Gate) -> &[f64] {
        let n = self.hidden_dim * self.input_dim;
        &self.w()[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn gate_u(&self, gate: Gate) -> &[f64] {
        let n = self.hidden_dim * self.hidden_dim;
        &self.u()[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn gate_b(&self, gate: Gate) -> &[f64] {
        let h = self.hidden_dim;
        &self.b()[gate as usize * h..(gate as usize + 1) * h]
    }

    pub fn gate_w_mut(&mut self, gate: Gate) -> &mut [f64] {
        let n = self.hidden_dim * self.input_dim;
        &mut self.w_mut()[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn gate_u_mut(&mut self, gate: Gate) -> &mut [f64] {
        let n = self.hidden_dim * self.hidden_dim;
        &mut self.u_mut()[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn gate_b_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden_dim;
        &mut self.b_mut()[gate as usize * h..(gate as usize + 1) * h]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gate pre-activations `W x + U h + b`, then the nonlinearities in place.
fn gates_into(params: &LstmParams, x: &[f64], h: &[f64], gates: &mut [f64]) {
    let hd = params.hidden_dim;
    let id = params.input_dim;
    let (w, u, b) = (params.w(), params.u(), params.b());
    for r in 0..4 * hd {
        gates[r] = b[r] + dot(&w[r * id..(r + 1) * id], x) + dot(&u[r * hd..(r + 1) * hd], h);
    }
    for k in 0..hd {
        gates[k] = sigmoid(gates[k]);
        gates[hd + k] = sigmoid(gates[hd + k]);
        gates[2 * hd + k] = gates[2 * hd + k].tanh();
        gates[3 * hd + k] = sigmoid(gates[3 * hd + k]);
    }
}

/// One LSTM recurrence step; returns `(h', c')`.
pub fn cell_step(params: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = params.hidden_dim;
    assert_eq!(x.len(), params.input_dim, "input width mismatch");
    assert_eq!(h.len(), hd, "hidden width mismatch");
    assert_eq!(c.len(), hd, "cell width mismatch");
    let mut gates = vec![0.0; 4 * hd];
    gates_into(params, x, h, &mut gates);
    let mut h_new = vec![0.0; hd];
    let mut c_new = vec![0.0; hd];
    for k in 0..hd {
        let (i, f, g, o) = (
            gates[k],
            gates[hd + k],
            gates[2 * hd + k],
            gates[3 * hd + k],
        );
        c_new[k] = f * c[k] + i * g;
        h_new[k] = o * c_new[k].tanh();
    }
    (h_new, c_new)
}

/// Activations kept from a forward pass for the backward pass. Reused across
/// windows to avoid reallocating.
#[derive(Clone, Debug)]
pub struct Workspace {
    hidden_dim: usize,
    steps: usize,
    gates: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    da: Vec<f64>,
    dh: Vec<f64>,
    dh_prev: Vec<f64>,
    dc: Vec<f64>,
}

impl Workspace {
    pub fn new(hidden_dim: usize, window_len: usize) -> Self {
        let hd = hidden_dim;
        Workspace {
            hidden_dim,
            steps: 0,
            gates: vec![0.0; window_len * 4 * hd],
            h: vec![0.0; (window_len + 1) * hd],
            c: vec![0.0; (window_len + 1) * hd],
            tanh_c: vec![0.0; window_len * hd],
            da: vec![0.0; 4 * hd],
            dh: vec![0.0; hd],
            dh_prev: vec![0.0; hd],
            dc: vec![0.0; hd],
        }
    }

    fn ensure(&mut self, hidden_dim: usize, steps: usize) {
        if self.hidden_dim != hidden_dim || self.gates.len() < steps * 4 * hidden_dim {
            *self = Workspace::new(hidden_dim, steps);
        }
    }
}

/// Runs the recurrence from `h = c = 0` over `window` (row-major, one row of
/// `input_dim` values per step) and returns the head output `w_out . h_W + b_out`.
pub fn forward_window_with(params: &LstmParams, window: &[f64], ws: &mut Workspace) -> f64 {
    let (id, hd) = (params.input_dim, params.hidden_dim);
    assert!(
        !window.is_empty() && window.len() % id == 0,
        "window length must be a positive multiple of input_dim"
    );
    let steps = window.len() / id;
    ws.ensure(hd, steps);
    ws.steps = steps;
    ws.h[..hd].iter_mut().for_each(|v| *v = 0.0);
    ws.c[..hd].iter_mut().for_each(|v| *v = 0.0);
    for t in 0..steps {
        let x = &window[t * id..(t + 1) * id];
        let (h_prev, h_rest) = ws.h.split_at_mut((t + 1) * hd);
        let h_prev = &h_prev[t * hd..];
        let gates = &mut ws.gates[t * 4 * hd..(t + 1) * 4 * hd];
        gates_into(params, x, h_prev, gates);
        let (c_prev, c_rest) = ws.c.split_at_mut((t + 1) * hd);
        let c_prev = &c_prev[t * hd..];
        let c_new = &mut c_rest[..hd];
        let h_new = &mut h_rest[..hd];
        let tanh_c = &mut ws.tanh_c[t * hd..(t + 1) * hd];
        for k in 0..hd {
            let (i, f, g, o) = (
                gates[k],
                gates[hd + k],
                gates[2 * hd + k],
                gates[3 * hd + k],
            );
            c_new[k] = f * c_prev[k] + i * g;
            tanh_c[k] = c_new[k].tanh();
            h_new[k] = o * tanh_c[k];
        }
    }
    params.b_out() + dot(params.w_out(), &ws.h[steps * hd..(steps + 1) * hd])
}

pub fn forward_window(params: &LstmParams, window: &[f64]) -> f64 {
    let mut ws = Workspace::new(params.hidden_dim, window.len() / params.input_dim.max(1));
    forward_window_with(params, window, &mut ws)
}

/// Squared error `(pred - target)^2`.
pub fn loss(pred: f64, target: f64) -> f64 {
    (pred - target).powi(2)
}

/// Mean of squared errors over `(pred, target)` pairs.
pub fn batch_loss(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|&(p, t)| loss(p, t)).sum::<f64>() / pairs.len() as f64
}

/// Forward pass followed by reverse accumulation of `scale * (y - target)^2`
/// into `grad`. Returns the unscaled loss.
pub fn backward_window_with(
    params: &LstmParams,
    window: &[f64],
    target: f64,
    scale: f64,
    grad: &mut LstmParams,
    ws: &mut Workspace,
) -> f64 {
    let (id, hd) = (params.input_dim, params.hidden_dim);
    debug_assert_eq!(grad.data.len(), params.data.len());
    let y = forward_window_with(params, window, ws);
    let steps = ws.steps;
    let dy = 2.0 * (y - target) * scale;

    let h_last = &ws.h[steps * hd..(steps + 1) * hd];
    for (g, &h) in grad.w_out_mut().iter_mut().zip(h_last) {
        *g += dy * h;
    }
    *grad.b_out_mut() += dy;

    let [_, off_u, off_b, _, _] = grad.offsets();
    for k in 0..hd {
        ws.dh[k] = dy * params.w_out()[k];
        ws.dc[k] = 0.0;
    }
    let (w_len, u_len) = (4 * hd * id, 4 * hd * hd);
    for t in (0..steps).rev() {
        let gates = &ws.gates[t * 4 * hd..(t + 1) * 4 * hd];
        let c_prev = &ws.c[t * hd..(t + 1) * hd];
        let tanh_c = &ws.tanh_c[t * hd..(t + 1) * hd];
        for k in 0..hd {
            let (i, f, g, o) = (
                gates[k],
                gates[hd + k],
                gates[2 * hd + k],
                gates[3 * hd + k],
            );
            let dh = ws.dh[k];
            let d_o = dh * tanh_c[k];
            let dc = ws.dc[k] + dh * o * (1.0 - tanh_c[k] * tanh_c[k]);
            ws.da[k] = dc * g * i * (1.0 - i);
            ws.da[hd + k] = dc * c_prev[k] * f * (1.0 - f);
            ws.da[2 * hd + k] = dc * i * (1.0 - g * g);
            ws.da[3 * hd + k] = d_o * o * (1.0 - o);
            ws.dc[k] = dc * f;
        }
        let x = &window[t * id..(t + 1) * id];
        let h_prev = &ws.h[t * hd..(t + 1) * hd];
        let (gw, rest) = grad.data.split_at_mut(w_len);
        let (gu, rest) = rest.split_at_mut(u_len);
        let gb = &mut rest[..4 * hd];
        debug_assert_eq!(off_b - off_u, u_len);
        let u = params.u();
        ws.dh_prev.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..4 * hd {
            let a = ws.da[r];
            if a == 0.0 {
                continue;
            }
            gb[r] += a;
            for (g, &xv) in gw[r * id..(r + 1) * id].iter_mut().zip(x) {
                *g += a * xv;
            }
            for (g, &hv) in gu[r * hd..(r + 1) * hd].iter_mut().zip(h_prev) {
                *g += a * hv;
            }
            for (d, &uv) in ws.dh_prev.iter_mut().zip(&u[r * hd..(r + 1) * hd]) {
                *d += a * uv;
            }
        }
        std::mem::swap(&mut ws.dh, &mut ws.dh_prev);
    }
    loss(y, target)
}

/// Exact gradient of `(y - target)^2` with respect to every parameter.
pub fn backward_window(params: &LstmParams, window: &[f64], target: f64) -> (f64, LstmParams) {
    let mut grad = LstmParams::zeros(params.input_dim, params.hidden_dim);
    let mut ws = Workspace::new(params.hidden_dim, window.len() / params.input_dim);
    let l = backward_window_with(params, window, target, 1.0, &mut grad, &mut ws);
    (l, grad)
}
