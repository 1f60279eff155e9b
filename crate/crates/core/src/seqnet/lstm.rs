//! LSTM cell with cached forward steps for backpropagation through time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gate weights stacked as `[input; forget; output; candidate]`, each block
/// `hidden x (input + hidden)` acting on `[x_t; h_{t-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    /// Row-major `4H x (D + H)`.
    pub w: Vec<f64>,
    /// Length `4H`.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            input,
            hidden,
            w: vec![0.0; 4 * hidden * (input + hidden)],
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn random<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        let r = 1.0 / ((input + hidden) as f64).sqrt();
        p.w.iter_mut().for_each(|v| *v = rng.random_range(-r..r));
        p.b.iter_mut().for_each(|v| *v = rng.random_range(-r..r));
        p
    }

    fn width(&self) -> usize {
        self.input + self.hidden
    }

    /// Bias block of one gate.
    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden;
        let g = gate as usize;
        &mut self.b[g * h..(g + 1) * h]
    }

    /// Weight rows of one gate.
    pub fn gate_weights_mut(&mut self, gate: Gate) -> &mut [f64] {
        let rows = self.hidden * self.width();
        let g = gate as usize;
        &mut self.w[g * rows..(g + 1) * rows]
    }

    pub(crate) fn forward_step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let h = self.hidden;
        let width = self.width();
        let mut z = Vec::with_capacity(width);
        z.extend_from_slice(x);
        z.extend_from_slice(h_prev);
        let mut a = self.b.clone();
        for (r, acc) in a.iter_mut().enumerate() {
            let row = &self.w[r * width..(r + 1) * width];
            *acc += row.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>();
        }
        let mut i = vec![0.0; h];
        let mut f = vec![0.0; h];
        let mut o = vec![0.0; h];
        let mut g = vec![0.0; h];
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        for k in 0..h {
            i[k] = sigmoid(a[k]);
            f[k] = sigmoid(a[h + k]);
            o[k] = sigmoid(a[2 * h + k]);
            g[k] = a[3 * h + k].tanh();
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
            tanh_c[k] = c[k].tanh();
            h_out[k] = o[k] * tanh_c[k];
        }
        StepCache {
            z,
            i,
            f,
            o,
            g,
            c_prev: c_prev.to_vec(),
            c,
            tanh_c,
            h: h_out,
        }
    }

    /// Runs the cell over `inputs` from zero state.
    pub(crate) fn forward_sequence<'a, I>(&self, inputs: I) -> Vec<StepCache>
    where
        I: IntoIterator<Item = &'a Vec<f64>>,
    {
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut caches = Vec::new();
        for x in inputs {
            let step = self.forward_step(x, &h, &c);
            h.clone_from(&step.h);
            c.clone_from(&step.c);
            caches.push(step);
        }
        caches
    }

    /// Backpropagates `dh_last` (gradient on the final hidden state) through
    /// `caches`, accumulating into `grad` and returning input gradients in
    /// processing order.
    pub(crate) fn backward_sequence(
        &self,
        caches: &[StepCache],
        dh_last: &[f64],
        grad: &mut LstmParams,
        fault: Option<GradientFault>,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden;
        let d = self.input;
        let width = self.width();
        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; h];
        let mut dx = vec![Vec::new(); caches.len()];
        let mut da = vec![0.0; 4 * h];
        for (t, s) in caches.iter().enumerate().rev() {
            for k in 0..h {
                let dck = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let d_o = dh[k] * s.tanh_c[k];
                let d_i = dck * s.g[k];
                let mut d_f = dck * s.c_prev[k];
                if fault == Some(GradientFault::ForgetGate) {
                    d_f *= 1.5;
                }
                let d_g = dck * s.i[k];
                da[k] = d_i * s.i[k] * (1.0 - s.i[k]);
                da[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
                da[2 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
                da[3 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
                dc[k] = dck * s.f[k];
            }
            let mut dz = vec![0.0; width];
            for (r, &dar) in da.iter().enumerate() {
                grad.b[r] += dar;
                if dar == 0.0 {
                    continue;
                }
                let row = r * width;
                let grow = &mut grad.w[row..row + width];
                for (gw, zv) in grow.iter_mut().zip(&s.z) {
                    *gw += dar * zv;
                }
                for (dzv, wv) in dz.iter_mut().zip(&self.w[row..row + width]) {
                    *dzv += dar * wv;
                }
            }
            dh.copy_from_slice(&dz[d..]);
            dz.truncate(d);
            dx[t] = dz;
        }
        dx
    }
}

/// Injected gradient errors used to show that gradient checking catches
/// broken backpropagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientFault {
    /// Scales the forget-gate gradient by 1.5.
    ForgetGate,
}

#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub z: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Memory cell and hidden output after a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        CellState {
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

/// One gated update: `C_t = f * C_{t-1} + i * C~_t`, `h_t = o * tanh(C_t)`.
pub fn lstm_step(params: &LstmParams, x: &[f64], prev: &CellState) -> Result<CellState> {
    if x.len() != params.input || prev.c.len() != params.hidden || prev.h.len() != params.hidden {
        return Err(Error::shape(
            format!("input {} / hidden {}", params.input, params.hidden),
            format!("input {} / hidden {}", x.len(), prev.h.len()),
        ));
    }
    if x.iter().chain(&prev.c).chain(&prev.h).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lstm_step input".into()));
    }
    let s = params.forward_step(x, &prev.h, &prev.c);
    Ok(CellState { c: s.c, h: s.h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_parameters_give_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let s = lstm_step(&p, &[1.0, -2.0, 0.5], &CellState::zeros(2)).unwrap();
        assert_eq!(s.c, vec![0.0, 0.0]);
        assert_eq!(s.h, vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_gates_keep_memory() {
        let mut p = LstmParams::random(2, 3, &mut rand::rng());
        p.gate_weights_mut(Gate::Forget).fill(0.0);
        p.gate_weights_mut(Gate::Input).fill(0.0);
        p.gate_bias_mut(Gate::Forget).fill(800.0);
        p.gate_bias_mut(Gate::Input).fill(-800.0);
        let mut state = CellState {
            c: vec![0.3, -1.2, 2.0],
            h: vec![0.1, 0.2, 0.3],
        };
        let c0 = state.c.clone();
        for x in [[1.0, 2.0], [-3.0, 0.5], [0.0, 9.0]] {
            state = lstm_step(&p, &x, &state).unwrap();
        }
        assert_eq!(state.c, c0);
    }

    #[test]
    fn hand_computed_scalar_cell() {
        // input 1, hidden 1; weights [w_x, w_h] per gate.
        let p = LstmParams {
            input: 1,
            hidden: 1,
            w: vec![0.5, -0.3, 0.8, 0.1, -0.4, 0.6, 1.2, 0.7],
            b: vec![0.1, 0.2, -0.1, 0.05],
        };
        let prev = CellState {
            c: vec![0.4],
            h: vec![-0.2],
        };
        let s = lstm_step(&p, &[1.5], &prev).unwrap();
        // a_i = 0.5*1.5 + (-0.3)(-0.2) + 0.1 = 0.91   -> i = 0.713000
        // a_f = 0.8*1.5 + 0.1(-0.2) + 0.2   = 1.38   -> f = 0.798991
        // a_o = -0.4*1.5 + 0.6(-0.2) - 0.1  = -0.82  -> o = 0.305764
        // a_g = 1.2*1.5 + 0.7(-0.2) + 0.05  = 1.71   -> g = 0.936648
        // C = f*0.4 + i*g = 0.319596 + 0.667830 = 0.987426
        // h = o * tanh(C) = 0.231238
        assert_abs_diff_eq!(s.c[0], 0.987426, epsilon = 1e-6);
        assert_abs_diff_eq!(s.h[0], 0.231238, epsilon = 1e-6);
    }

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        let p = LstmParams::zeros(1, 1);
        assert!(matches!(
            lstm_step(&p, &[f64::NAN], &CellState::zeros(1)),
            Err(Error::NonFinite(_))
        ));
        assert!(lstm_step(&p, &[1.0, 2.0], &CellState::zeros(1)).is_err());
    }
}
