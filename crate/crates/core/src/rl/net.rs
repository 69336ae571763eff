//! Small dense Q-network with hand-rolled forward, backward, and optimizer.
//!
//! The network is tiny (a few hundred parameters), so the arithmetic is
//! written out directly over `Vec<f64>`: it keeps the update rule auditable
//! against finite differences and gives the fixed-point engine an exact
//! float reference to diverge from.

use rand::Rng;

use crate::error::{Error, Result};

/// Fully connected network, rectifier hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    /// `weights[l][o * sizes[l] + i]` maps layer `l` to `l + 1`, row-major
    /// by output unit.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl QNet {
    /// Fresh network with every parameter drawn uniformly from
    /// `[-half_range, half_range]`.
    pub fn new_uniform<R: Rng>(sizes: &[usize], half_range: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output layers");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            weights.push(
                (0..n_in * n_out)
                    .map(|_| rng.random_range(-half_range..=half_range))
                    .collect(),
            );
            biases.push(
                (0..n_out)
                    .map(|_| rng.random_range(-half_range..=half_range))
                    .collect(),
            );
        }
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    /// Build from explicit parameters, checking shapes.
    pub fn from_params(
        sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if sizes.len() < 2 || weights.len() != sizes.len() - 1 || biases.len() != sizes.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: sizes.len().saturating_sub(1),
                got: weights.len(),
            });
        }
        for (l, pair) in sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::DimensionMismatch {
                    expected: pair[0] * pair[1],
                    got: weights[l].len(),
                });
            }
            if biases[l].len() != pair[1] {
                return Err(Error::DimensionMismatch {
                    expected: pair[1],
                    got: biases[l].len(),
                });
            }
        }
        Ok(Self {
            sizes,
            weights,
            biases,
        })
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Forward pass; the output layer is linear.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        let mut act = input.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(self.biases.iter()).enumerate() {
            let n_in = self.sizes[l];
            let n_out = self.sizes[l + 1];
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = b[o];
                for (wi, xi) in row.iter().zip(act.iter()) {
                    acc += wi * xi;
                }
                next[o] = if l < last { acc.max(0.0) } else { acc };
            }
            act = next;
        }
        Ok(act)
    }

    /// Scalar Q-value (first output).
    pub fn q(&self, input: &[f64]) -> Result<f64> {
        Ok(self.forward(input)?[0])
    }

    /// Mean squared error over a batch and its gradient with respect to
    /// every parameter.
    pub fn batch_loss_grads(
        &self,
        inputs: &[Vec<f64>],
        targets: &[f64],
    ) -> Result<(f64, Gradients)> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let n_layers = self.weights.len();
        let last = n_layers - 1;
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let inv_batch = 1.0 / inputs.len() as f64;

        for (input, &target) in inputs.iter().zip(targets.iter()) {
            if input.len() != self.sizes[0] {
                return Err(Error::DimensionMismatch {
                    expected: self.sizes[0],
                    got: input.len(),
                });
            }
            // Forward, keeping post-activation values per layer.
            let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
            acts.push(input.clone());
            for l in 0..n_layers {
                let n_in = self.sizes[l];
                let n_out = self.sizes[l + 1];
                let mut next = vec![0.0; n_out];
                for o in 0..n_out {
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    let mut acc = self.biases[l][o];
                    for (wi, xi) in row.iter().zip(acts[l].iter()) {
                        acc += wi * xi;
                    }
                    next[o] = if l < last { acc.max(0.0) } else { acc };
                }
                acts.push(next);
            }
            let q = acts[n_layers][0];
            let err = q - target;
            loss += err * err * inv_batch;

            // Backward: delta starts as dL/d(output).
            let mut delta = vec![2.0 * err * inv_batch];
            for l in (0..n_layers).rev() {
                let n_in = self.sizes[l];
                let n_out = self.sizes[l + 1];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    grads.biases[l][o] += d;
                    let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                    for (gi, xi) in row.iter_mut().zip(acts[l].iter()) {
                        *gi += d * xi;
                    }
                }
                if l == 0 {
                    break;
                }
                // Propagate through the rectifier of layer l's input units.
                let mut prev = vec![0.0; n_in];
                for (i, p) in prev.iter_mut().enumerate() {
                    if acts[l][i] > 0.0 {
                        let mut acc = 0.0;
                        for o in 0..n_out {
                            acc += self.weights[l][o * n_in + i] * delta[o];
                        }
                        *p = acc;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss, grads))
    }
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &QNet) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// Adam optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(learning_rate: f64, net: &QNet) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut QNet, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        };
        for l in 0..net.weights.len() {
            for i in 0..net.weights[l].len() {
                update(
                    &mut net.weights[l][i],
                    grads.weights[l][i],
                    &mut self.m.weights[l][i],
                    &mut self.v.weights[l][i],
                );
            }
            for i in 0..net.biases[l].len() {
                update(
                    &mut net.biases[l][i],
                    grads.biases[l][i],
                    &mut self.m.biases[l][i],
                    &mut self.v.biases[l][i],
                );
            }
        }
    }
}

/// Q-value of taking `action_norm` (a normalized level frequency) in
/// `state`: the action is appended to the state as the last input.
pub fn q_forward(net: &QNet, state: &[f64], action_norm: f64) -> Result<f64> {
    if state.len() + 1 != net.sizes[0] {
        return Err(Error::DimensionMismatch {
            expected: net.sizes[0],
            got: state.len() + 1,
        });
    }
    let mut input = Vec::with_capacity(state.len() + 1);
    input.extend_from_slice(state);
    input.push(action_norm);
    net.q(&input)
}

/// Highest-value action index; ties break toward the lowest index (the
/// slowest operating point).
pub fn argmax_q(net: &QNet, state: &[f64], actions_norm: &[f64]) -> Result<usize> {
    let mut best = 0;
    let mut best_q = f64::NEG_INFINITY;
    for (idx, &a) in actions_norm.iter().enumerate() {
        let q = q_forward(net, state, a)?;
        if q > best_q {
            best_q = q;
            best = idx;
        }
    }
    Ok(best)
}

/// One policy decision: with probability `p_random` pick a uniformly random
/// action, otherwise the greedy one.
pub fn select_action<R: Rng>(
    net: &QNet,
    state: &[f64],
    actions_norm: &[f64],
    p_random: f64,
    rng: &mut R,
) -> Result<usize> {
    debug_assert!((0.0..=1.0).contains(&p_random));
    if p_random > 0.0 && rng.random_range(0.0..1.0) < p_random {
        Ok(rng.random_range(0..actions_norm.len()))
    } else {
        argmax_q(net, state, actions_norm)
    }
}
