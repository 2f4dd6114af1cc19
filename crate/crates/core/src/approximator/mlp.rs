use rand::Rng;
use rand_distr::StandardNormal;

use super::{GradientAccumulator, ParamShape, ParameterVector};
use crate::error::{Error, Result};

/// Fully connected network: tanh hidden layers, linear output.
///
/// Layer `l` stores `l{l}.weight` as a row-major `[out, in]` matrix followed
/// by `l{l}.bias`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
}

/// Activations retained by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpTape {
    /// `inputs[l]` is the input to layer `l`; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self { sizes }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn layout(&self) -> Vec<ParamShape> {
        let mut layout = Vec::new();
        for (l, w) in self.sizes.windows(2).enumerate() {
            layout.push(ParamShape::new(format!("l{l}.weight"), vec![w[1], w[0]]));
            layout.push(ParamShape::new(format!("l{l}.bias"), vec![w[1]]));
        }
        layout
    }

    /// Orthogonal weights scaled by `hidden_gain` (hidden layers) and
    /// `output_gain` (last layer); zero biases.
    pub fn init<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        hidden_gain: f64,
        output_gain: f64,
    ) -> ParameterVector {
        let mut params = ParameterVector::zeros(self.layout());
        let n = self.num_layers();
        for l in 0..n {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let gain = if l + 1 == n { output_gain } else { hidden_gain };
            let w = orthogonal(rng, fan_out, fan_in, gain);
            params
                .tensor_mut(&format!("l{l}.weight"))
                .expect("layout has every layer")
                .copy_from_slice(&w);
        }
        params
    }

    fn check(&self, params: &ParameterVector) -> Result<()> {
        if params.len() != self.layout().iter().map(ParamShape::numel).sum::<usize>() {
            return Err(Error::Shape(format!(
                "parameter vector has {} elements, network expects {}",
                params.len(),
                self.layout().iter().map(ParamShape::numel).sum::<usize>()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, params: &ParameterVector, input: &[f64]) -> Result<(Vec<f64>, MlpTape)> {
        self.check(params)?;
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let values = params.values();
        let n = self.num_layers();
        let mut inputs = Vec::with_capacity(n);
        let mut x = input.to_vec();
        let mut offset = 0;
        for l in 0..n {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &values[offset..offset + fan_in * fan_out];
            let b = &values[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let mut z: Vec<f64> = w
                .chunks_exact(fan_in)
                .zip(b)
                .map(|(row, bias)| bias + row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l + 1 < n {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            inputs.push(std::mem::replace(&mut x, z));
        }
        Ok((x, MlpTape { inputs }))
    }

    /// Accumulates `d_output · ∂output/∂params` into `grads` and returns the
    /// gradient with respect to the network input.
    pub fn backward(
        &self,
        params: &ParameterVector,
        tape: &MlpTape,
        d_output: &[f64],
        grads: &mut GradientAccumulator,
    ) -> Result<Vec<f64>> {
        grads.check_matches(params)?;
        if d_output.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient has length {}, network output is {}",
                d_output.len(),
                self.output_dim()
            )));
        }
        let n = self.num_layers();
        let values = params.values();
        let g = grads.values_mut();

        let mut offsets = Vec::with_capacity(n);
        let mut offset = 0;
        for l in 0..n {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }

        let mut delta = d_output.to_vec();
        for l in (0..n).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let base = offsets[l];
            let x = &tape.inputs[l];
            let w = &values[base..base + fan_in * fan_out];
            {
                let (gw, gb) = g[base..base + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for (j, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[j] += d;
                    for (gwi, xi) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(x) {
                        *gwi += d * xi;
                    }
                }
            }
            let mut d_in = vec![0.0; fan_in];
            for (row, &d) in w.chunks_exact(fan_in).zip(&delta) {
                if d == 0.0 {
                    continue;
                }
                for (di, wi) in d_in.iter_mut().zip(row) {
                    *di += d * wi;
                }
            }
            if l > 0 {
                // x is tanh output of the previous layer
                for (di, h) in d_in.iter_mut().zip(x) {
                    *di *= 1.0 - h * h;
                }
            }
            delta = d_in;
        }
        Ok(delta)
    }
}

/// A `rows × cols` matrix (row-major) with orthonormal rows or columns,
/// whichever is shorter, times `gain`.
fn orthogonal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, gain: f64) -> Vec<f64> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for u in &basis {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    let mut w = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            w[i * cols + j] = gain
                * if rows >= cols {
                    basis[j][i]
                } else {
                    basis[i][j]
                };
        }
    }
    w
}
