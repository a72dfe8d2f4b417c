//! Stacked LSTM over the step-major interleaved sequence, final hidden state
//! of the top layer into a single affine output.
//!
//! Gate layout inside the `4h` pre-activation block is input, forget,
//! candidate, output.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::dropout;
use super::init::glorot;
use super::loss::sigmoid;
use super::params::{Param, ParameterSet};
use crate::error::{Error, Result};
use crate::representation::Sequence;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
struct LayerHandles {
    w_ih: usize,
    w_hh: usize,
    bias: usize,
}

#[derive(Debug, Clone)]
struct LayerTape {
    in_width: usize,
    /// `T x in_width`, after dropout.
    inputs: Vec<f64>,
    /// `T x 4h`, post-activation.
    gates: Vec<f64>,
    /// `T x h`
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hidden: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Tape {
    steps: usize,
    layers: Vec<LayerTape>,
    /// Dropout masks applied to the output of layer `l` before layer `l + 1`.
    masks: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct LstmModel {
    params: ParameterSet,
    input_width: usize,
    hidden: usize,
    dropout: f64,
    layers: Vec<LayerHandles>,
    head_w: usize,
    head_b: usize,
    tape: Option<Tape>,
}

impl LstmModel {
    /// Glorot-uniform weights, zero biases except the forget gate at 1.
    pub fn new(input_width: usize, hidden: usize, layers: usize, dropout: f64, rng: &mut Rng) -> Self {
        let mut params = ParameterSet::new();
        let mut handles = Vec::with_capacity(layers);
        for l in 0..layers {
            let in_w = if l == 0 { input_width } else { hidden };
            let w_ih = params.add(Param::new(
                format!("lstm.{l}.w_ih"),
                4 * hidden,
                in_w,
                glorot(rng, in_w, 4 * hidden, 4 * hidden * in_w),
            ));
            let w_hh = params.add(Param::new(
                format!("lstm.{l}.w_hh"),
                4 * hidden,
                hidden,
                glorot(rng, hidden, 4 * hidden, 4 * hidden * hidden),
            ));
            let mut b = vec![0.0; 4 * hidden];
            b[hidden..2 * hidden].fill(1.0);
            let bias = params.add(Param::new(format!("lstm.{l}.bias"), 4 * hidden, 1, b));
            handles.push(LayerHandles { w_ih, w_hh, bias });
        }
        let head_w = params.add(Param::new("head.w", 1, hidden, glorot(rng, hidden, 1, hidden)));
        let head_b = params.add(Param::new("head.b", 1, 1, vec![0.0]));
        Self {
            params,
            input_width,
            hidden,
            dropout,
            layers: handles,
            head_w,
            head_b,
            tape: None,
        }
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    fn run(&self, seq: &Sequence, mut rng: Option<&mut Rng>) -> Result<(f64, Tape)> {
        if seq.width != self.input_width {
            return Err(Error::WidthMismatch {
                expected: self.input_width,
                found: seq.width,
            });
        }
        let h = self.hidden;
        let steps = seq.len();
        let mut layer_tapes: Vec<LayerTape> = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut inputs = seq.data.clone();
        let mut in_width = seq.width;

        for (l, handles) in self.layers.iter().enumerate() {
            if l > 0 {
                let mask = dropout::mask(rng.as_deref_mut(), self.dropout, steps * h);
                if let Some(m) = &mask {
                    inputs.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
                }
                masks.push(mask);
            }
            let w_ih = self.params.get(handles.w_ih);
            let w_hh = self.params.get(handles.w_hh);
            let bias = &self.params.get(handles.bias).value;

            let mut gates = vec![0.0; steps * 4 * h];
            let mut cells = vec![0.0; steps * h];
            let mut tanh_cells = vec![0.0; steps * h];
            let mut hidden = vec![0.0; steps * h];
            let mut z = vec![0.0; 4 * h];
            for t in 0..steps {
                let x = &inputs[t * in_width..(t + 1) * in_width];
                z.copy_from_slice(bias);
                for (row, zr) in z.iter_mut().enumerate() {
                    let w = &w_ih.value[row * in_width..(row + 1) * in_width];
                    *zr += dot(w, x);
                }
                if t > 0 {
                    let h_prev = &hidden[(t - 1) * h..t * h];
                    for (row, zr) in z.iter_mut().enumerate() {
                        *zr += dot(&w_hh.value[row * h..(row + 1) * h], h_prev);
                    }
                }
                let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
                for j in 0..h {
                    let i_g = sigmoid(z[j]);
                    let f_g = sigmoid(z[h + j]);
                    let c_g = libm::tanh(z[2 * h + j]);
                    let o_g = sigmoid(z[3 * h + j]);
                    g[j] = i_g;
                    g[h + j] = f_g;
                    g[2 * h + j] = c_g;
                    g[3 * h + j] = o_g;
                    let c_prev = if t > 0 { cells[(t - 1) * h + j] } else { 0.0 };
                    let c = f_g * c_prev + i_g * c_g;
                    let tc = libm::tanh(c);
                    cells[t * h + j] = c;
                    tanh_cells[t * h + j] = tc;
                    hidden[t * h + j] = o_g * tc;
                }
            }
            let next_inputs = hidden.clone();
            layer_tapes.push(LayerTape {
                in_width,
                inputs: core::mem::take(&mut inputs),
                gates,
                cells,
                tanh_cells,
                hidden,
            });
            inputs = next_inputs;
            in_width = h;
        }

        let last = layer_tapes.last().expect("at least one layer");
        let head_w = &self.params.get(self.head_w).value;
        let mut logit = self.params.get(self.head_b).value[0];
        if steps > 0 {
            logit += dot(head_w, &last.hidden[(steps - 1) * h..steps * h]);
        }
        Ok((
            logit,
            Tape {
                steps,
                layers: layer_tapes,
                masks,
            },
        ))
    }

    /// Forward pass that records a tape for [`LstmModel::backward`]. Dropout
    /// is active iff `rng` is given.
    pub fn forward(&mut self, seq: &Sequence, rng: Option<&mut Rng>) -> Result<f64> {
        let (logit, tape) = self.run(seq, rng)?;
        self.tape = Some(tape);
        Ok(logit)
    }

    /// Evaluation-mode logit: no dropout, nothing recorded.
    pub fn logit(&self, seq: &Sequence) -> Result<f64> {
        self.run(seq, None).map(|(logit, _)| logit)
    }

    /// Accumulates `d loss / d params` for the last recorded forward pass,
    /// given `d loss / d logit`.
    pub fn backward(&mut self, dlogit: f64) -> Result<()> {
        let tape = self.tape.take().ok_or(Error::NoForwardPass)?;
        let h = self.hidden;
        let steps = tape.steps;

        self.params.get_mut(self.head_b).grad[0] += dlogit;
        let mut dh_out = vec![0.0; steps * h];
        if steps > 0 {
            let top = tape.layers.last().expect("at least one layer");
            let last_h = &top.hidden[(steps - 1) * h..steps * h];
            let head_w = self.params.get(self.head_w).value.clone();
            let head = self.params.get_mut(self.head_w);
            for j in 0..h {
                head.grad[j] += dlogit * last_h[j];
                dh_out[(steps - 1) * h + j] = dlogit * head_w[j];
            }
        }

        for l in (0..self.layers.len()).rev() {
            let handles = self.layers[l];
            let lt = &tape.layers[l];
            let dx = self.backward_layer(handles, lt, &dh_out, steps);
            if l > 0 {
                dh_out = dx;
                if let Some(mask) = &tape.masks[l - 1] {
                    dh_out.iter_mut().zip(mask).for_each(|(d, k)| *d *= k);
                }
            }
        }
        Ok(())
    }

    fn backward_layer(&mut self, handles: LayerHandles, lt: &LayerTape, dh_out: &[f64], steps: usize) -> Vec<f64> {
        let h = self.hidden;
        let in_w = lt.in_width;
        let w_ih = self.params.get(handles.w_ih).value.clone();
        let w_hh = self.params.get(handles.w_hh).value.clone();

        let mut d_w_ih = vec![0.0; 4 * h * in_w];
        let mut d_w_hh = vec![0.0; 4 * h * h];
        let mut d_bias = vec![0.0; 4 * h];
        let mut dx = vec![0.0; steps * in_w];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];

        for t in (0..steps).rev() {
            let g = &lt.gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = lt.tanh_cells[t * h + j];
                let c_prev = if t > 0 { lt.cells[(t - 1) * h + j] } else { 0.0 };
                let dh = dh_out[t * h + j] + dh_next[j];
                let d_o = dh * tc;
                let dc = dc_next[j] + dh * o_g * (1.0 - tc * tc);
                dz[j] = dc * c_g * i_g * (1.0 - i_g);
                dz[h + j] = dc * c_prev * f_g * (1.0 - f_g);
                dz[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
                dc_next[j] = dc * f_g;
            }
            let x = &lt.inputs[t * in_w..(t + 1) * in_w];
            let dx_t = &mut dx[t * in_w..(t + 1) * in_w];
            dh_next.fill(0.0);
            for row in 0..4 * h {
                let d = dz[row];
                if d == 0.0 {
                    continue;
                }
                d_bias[row] += d;
                let wi = &w_ih[row * in_w..(row + 1) * in_w];
                let dwi = &mut d_w_ih[row * in_w..(row + 1) * in_w];
                for k in 0..in_w {
                    dwi[k] += d * x[k];
                    dx_t[k] += d * wi[k];
                }
                if t > 0 {
                    let h_prev = &lt.hidden[(t - 1) * h..t * h];
                    let wh = &w_hh[row * h..(row + 1) * h];
                    let dwh = &mut d_w_hh[row * h..(row + 1) * h];
                    for k in 0..h {
                        dwh[k] += d * h_prev[k];
                        dh_next[k] += d * wh[k];
                    }
                }
            }
        }

        add_into(&mut self.params.get_mut(handles.w_ih).grad, &d_w_ih);
        add_into(&mut self.params.get_mut(handles.w_hh).grad, &d_w_hh);
        add_into(&mut self.params.get_mut(handles.bias).grad, &d_bias);
        dx
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}
