//! NeuralUCB with a one-hidden-layer ReLU network and a diagonal confidence matrix.
//!
//! The network sees block contexts of length `K * d`: context `x` for arm `a`
//! occupies block `a` and every other block is zero. Only block `a` of the
//! first-layer weights ever receives gradient from an observation on arm `a`,
//! and every such gradient is an outer product with a replayed context. The
//! first layer is therefore stored as
//!
//! `W1 = W1_0 + s * D + sum_k c_k x_k^T` (block `arm_k`),
//!
//! where `W1_0` is the initialization, `D` an optional dense offset (only set
//! when restoring a checkpoint), `s` its accumulated decay and `c_k` one
//! `m`-vector per replayed observation. Gradient steps then act on the `c_k`
//! through the Gram matrix of the replayed contexts, which is exact and costs
//! `O(batch * n * m)` instead of `O(batch * m * d)`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot};

use super::{check_arm, check_context, check_reward, ContextualBandit, Decision};

pub const HIDDEN_GRID: [usize; 6] = [16, 32, 64, 128, 256, 512];

fn default_steps() -> usize {
    100
}

fn default_batch() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralUcbConfig {
    pub hidden: usize,
    pub nu: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl NeuralUcbConfig {
    pub fn new(hidden: usize, nu: f64, lambda: f64, learning_rate: f64) -> Self {
        Self {
            hidden,
            nu,
            lambda,
            learning_rate,
            n_steps: default_steps(),
            batch_size: default_batch(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(invalid("hidden size must be positive"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(invalid(format!("nu {} must be finite and >= 0", self.nu)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda {} must be finite and > 0", self.lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate {} must be finite and > 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Observation {
    arm: usize,
    x: Vec<f64>,
    reward: f64,
    /// `W1_0^(arm) x`.
    base: Vec<f64>,
    /// `D^(arm) x`, empty without a dense offset.
    offset: Vec<f64>,
    /// Inner products with the observations of the same arm, aligned with `by_arm[arm]`.
    gram: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NeuralUcb {
    cfg: NeuralUcbConfig,
    n_arms: usize,
    dim: usize,
    seed: u64,
    /// Initial first-layer weights, `m x (K d)` row-major.
    w1_init: Vec<f64>,
    dense_offset: Option<Vec<f64>>,
    offset_scale: f64,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    b1_init: Vec<f64>,
    w2_init: Vec<f64>,
    b2_init: f64,
    /// Diagonal confidence accumulator over the flattened parameters.
    z: Vec<f64>,
    replay: Vec<Observation>,
    /// Per-observation first-layer coefficients, `n x m`.
    coef: Vec<f64>,
    by_arm: Vec<Vec<usize>>,
    rng: ChaCha8Rng,
}

struct Forward {
    pre: Vec<f64>,
    out: f64,
}

impl NeuralUcb {
    pub fn new(cfg: NeuralUcbConfig, n_arms: usize, dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if n_arms == 0 || dim == 0 {
            return Err(invalid("NeuralUCB needs at least one arm and one feature"));
        }
        let m = cfg.hidden;
        let fan_in = n_arms * dim;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).map_err(|e| invalid(e.to_string()))?;
        let w1_init: Vec<f64> = (0..m * fan_in).map(|_| normal.sample(&mut init_rng)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let n_params = m * fan_in + 2 * m + 1;
        Ok(Self {
            z: vec![cfg.lambda; n_params],
            cfg,
            n_arms,
            dim,
            seed,
            w1_init,
            dense_offset: None,
            offset_scale: 1.0,
            b1: vec![0.0; m],
            w2: vec![0.0; m],
            b2: 0.0,
            b1_init: vec![0.0; m],
            w2_init: vec![0.0; m],
            b2_init: 0.0,
            replay: Vec::new(),
            coef: Vec::new(),
            by_arm: vec![Vec::new(); n_arms],
            rng,
        })
    }

    /// Rebuilds an agent from flattened parameters `[W1, b1, w2, b2]`. The
    /// replay buffer is not part of the state and starts empty.
    pub(crate) fn from_parts(
        cfg: NeuralUcbConfig,
        n_arms: usize,
        dim: usize,
        seed: u64,
        theta: &[f64],
        theta0: &[f64],
        z: Vec<f64>,
    ) -> Result<Self> {
        let mut agent = Self::new(cfg, n_arms, dim, seed)?;
        let p = agent.n_params();
        if theta.len() != p || theta0.len() != p || z.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: theta.len().min(theta0.len()).min(z.len()),
            });
        }
        let m = agent.cfg.hidden;
        let w = m * n_arms * dim;
        agent.w1_init = theta0[..w].to_vec();
        agent.b1_init = theta0[w..w + m].to_vec();
        agent.w2_init = theta0[w + m..w + 2 * m].to_vec();
        agent.b2_init = theta0[w + 2 * m];
        let offset: Vec<f64> = theta[..w].iter().zip(&theta0[..w]).map(|(a, b)| a - b).collect();
        if offset.iter().any(|v| *v != 0.0) {
            agent.dense_offset = Some(offset);
        }
        agent.b1 = theta[w..w + m].to_vec();
        agent.w2 = theta[w + m..w + 2 * m].to_vec();
        agent.b2 = theta[w + 2 * m];
        agent.z = z;
        Ok(agent)
    }

    pub fn config(&self) -> &NeuralUcbConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_params(&self) -> usize {
        let m = self.cfg.hidden;
        m * self.n_arms * self.dim + 2 * m + 1
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn z_diag(&self) -> &[f64] {
        &self.z
    }

    /// Current parameters flattened as `[W1 (row-major), b1, w2, b2]`.
    pub fn theta(&self) -> Vec<f64> {
        let mut w1 = self.w1_init.clone();
        if let Some(d) = &self.dense_offset {
            axpy(self.offset_scale, d, &mut w1);
        }
        let m = self.cfg.hidden;
        let row_len = self.n_arms * self.dim;
        for (k, obs) in self.replay.iter().enumerate() {
            let c = &self.coef[k * m..(k + 1) * m];
            for (i, ci) in c.iter().enumerate() {
                let start = i * row_len + obs.arm * self.dim;
                axpy(*ci, &obs.x, &mut w1[start..start + self.dim]);
            }
        }
        w1.extend_from_slice(&self.b1);
        w1.extend_from_slice(&self.w2);
        w1.push(self.b2);
        w1
    }

    /// Initial parameters in the same layout as [`theta`](Self::theta).
    pub fn theta0(&self) -> Vec<f64> {
        let mut t = self.w1_init.clone();
        t.extend_from_slice(&self.b1_init);
        t.extend_from_slice(&self.w2_init);
        t.push(self.b2_init);
        t
    }

    fn w1_block_dot(&self, w1: &[f64], arm: usize, x: &[f64]) -> Vec<f64> {
        let row_len = self.n_arms * self.dim;
        (0..self.cfg.hidden)
            .map(|i| {
                let start = i * row_len + arm * self.dim;
                dot(&w1[start..start + self.dim], x)
            })
            .collect()
    }

    fn forward_from(&self, mut pre: Vec<f64>) -> Forward {
        axpy(1.0, &self.b1, &mut pre);
        let out = pre
            .iter()
            .zip(&self.w2)
            .map(|(p, w)| p.max(0.0) * w)
            .sum::<f64>()
            + self.b2;
        Forward { pre, out }
    }

    /// First-layer pre-activation (without bias) for a fresh context on `arm`.
    fn pre_activation(&self, x: &[f64], arm: usize) -> Vec<f64> {
        let m = self.cfg.hidden;
        let mut pre = self.w1_block_dot(&self.w1_init, arm, x);
        if let Some(d) = &self.dense_offset {
            let off = self.w1_block_dot(d, arm, x);
            axpy(self.offset_scale, &off, &mut pre);
        }
        for &k in &self.by_arm[arm] {
            let g = dot(&self.replay[k].x, x);
            axpy(g, &self.coef[k * m..(k + 1) * m], &mut pre);
        }
        pre
    }

    /// Pre-activation (without bias) for a replayed observation, through the Gram matrix.
    fn replay_pre_activation(&self, idx: usize) -> Vec<f64> {
        let m = self.cfg.hidden;
        let obs = &self.replay[idx];
        let mut pre = obs.base.clone();
        if !obs.offset.is_empty() {
            axpy(self.offset_scale, &obs.offset, &mut pre);
        }
        for (&k, g) in self.by_arm[obs.arm].iter().zip(&obs.gram) {
            axpy(*g, &self.coef[k * m..(k + 1) * m], &mut pre);
        }
        pre
    }

    /// Network output for context `x` placed in the block of `arm`.
    pub fn predict(&self, x: &[f64], arm: usize) -> Result<f64> {
        check_context(x, self.dim)?;
        check_arm(arm, self.n_arms)?;
        Ok(self.forward_from(self.pre_activation(x, arm)).out)
    }

    /// `sum_j g_j^2 / Z_j` for the gradient at (`x`, `arm`).
    fn scaled_grad_norm(&self, fwd: &Forward, x: &[f64], arm: usize) -> f64 {
        let m = self.cfg.hidden;
        let row_len = self.n_arms * self.dim;
        let w = m * row_len;
        let mut total = 0.0;
        for i in 0..m {
            let h = fwd.pre[i].max(0.0);
            let gate = if fwd.pre[i] > 0.0 { self.w2[i] } else { 0.0 };
            if gate != 0.0 {
                let start = i * row_len + arm * self.dim;
                let z = &self.z[start..start + self.dim];
                let s: f64 = x.iter().zip(z).map(|(xj, zj)| xj * xj / zj).sum();
                total += gate * gate * s;
                total += gate * gate / self.z[w + i];
            }
            total += h * h / self.z[w + m + i];
        }
        total + 1.0 / self.z[w + 2 * m]
    }

    fn accumulate_z(&mut self, fwd: &Forward, x: &[f64], arm: usize) {
        let m = self.cfg.hidden;
        let row_len = self.n_arms * self.dim;
        let w = m * row_len;
        for i in 0..m {
            let h = fwd.pre[i].max(0.0);
            let gate = if fwd.pre[i] > 0.0 { self.w2[i] } else { 0.0 };
            if gate != 0.0 {
                let start = i * row_len + arm * self.dim;
                let g2 = gate * gate;
                for (zj, xj) in self.z[start..start + self.dim].iter_mut().zip(x) {
                    *zj += g2 * xj * xj;
                }
                self.z[w + i] += g2;
            }
            self.z[w + m + i] += h * h;
        }
        self.z[w + 2 * m] += 1.0;
    }

    /// Adds the observation to the replay buffer and the confidence
    /// accumulator without training.
    pub fn observe(&mut self, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        check_context(x, self.dim)?;
        check_arm(arm, self.n_arms)?;
        check_reward(reward)?;
        let fwd = self.forward_from(self.pre_activation(x, arm));
        self.accumulate_z(&fwd, x, arm);

        let base = self.w1_block_dot(&self.w1_init, arm, x);
        let offset = match &self.dense_offset {
            Some(d) => self.w1_block_dot(d, arm, x),
            None => Vec::new(),
        };
        let new_idx = self.replay.len();
        let mut gram = Vec::with_capacity(self.by_arm[arm].len() + 1);
        for &k in &self.by_arm[arm] {
            let g = dot(&self.replay[k].x, x);
            self.replay[k].gram.push(g);
            gram.push(g);
        }
        gram.push(dot(x, x));
        self.by_arm[arm].push(new_idx);
        self.replay.push(Observation {
            arm,
            x: x.to_vec(),
            reward,
            base,
            offset,
            gram,
        });
        self.coef.extend(std::iter::repeat_n(0.0, self.cfg.hidden));
        Ok(())
    }

    /// Runs one gradient step per batch of replay indices.
    pub fn train_on_batches(&mut self, batches: &[Vec<usize>]) -> Result<()> {
        for batch in batches {
            if let Some(&bad) = batch.iter().find(|&&i| i >= self.replay.len()) {
                return Err(invalid(format!("replay index {bad} out of range")));
            }
            self.step(batch)?;
        }
        Ok(())
    }

    fn step(&mut self, batch: &[usize]) -> Result<()> {
        let m = self.cfg.hidden;
        let lr = self.cfg.learning_rate;
        let reg = m as f64 * self.cfg.lambda;

        let mut g_b1 = vec![0.0; m];
        let mut g_w2 = vec![0.0; m];
        let mut g_b2 = 0.0;
        let mut coef_steps: Vec<(usize, Vec<f64>)> = Vec::with_capacity(batch.len());
        for &idx in batch {
            let fwd = self.forward_from(self.replay_pre_activation(idx));
            if !fwd.out.is_finite() {
                return Err(Error::NonFinite("network output"));
            }
            let delta = fwd.out - self.replay[idx].reward;
            let mut back = vec![0.0; m];
            for i in 0..m {
                if fwd.pre[i] > 0.0 {
                    back[i] = delta * self.w2[i];
                    g_w2[i] += delta * fwd.pre[i];
                }
            }
            axpy(1.0, &back, &mut g_b1);
            g_b2 += delta;
            coef_steps.push((idx, back));
        }

        let decay = 1.0 - lr * reg;
        self.coef.iter_mut().for_each(|c| *c *= decay);
        self.offset_scale *= decay;
        for (idx, back) in coef_steps {
            axpy(-lr, &back, &mut self.coef[idx * m..(idx + 1) * m]);
        }
        for i in 0..m {
            self.b1[i] -= lr * (g_b1[i] + reg * (self.b1[i] - self.b1_init[i]));
            self.w2[i] -= lr * (g_w2[i] + reg * (self.w2[i] - self.w2_init[i]));
        }
        self.b2 -= lr * (g_b2 + reg * (self.b2 - self.b2_init));
        Ok(())
    }

    /// Training loss on a batch of replay indices:
    /// `sum (f - r)^2 / 2 + (m lambda / 2) |theta - theta0|^2`.
    pub fn loss(&self, batch: &[usize]) -> Result<f64> {
        let m = self.cfg.hidden;
        let mut data = 0.0;
        for &idx in batch {
            let obs = self.replay.get(idx).ok_or_else(|| invalid("replay index out of range"))?;
            let fwd = self.forward_from(self.replay_pre_activation(idx));
            data += (fwd.out - obs.reward).powi(2) / 2.0;
        }
        // |W1 - W1_0|^2 expanded through the Gram matrix.
        let mut w1 = 0.0;
        if let Some(d) = &self.dense_offset {
            w1 += self.offset_scale * self.offset_scale * dot(d, d);
            for (k, obs) in self.replay.iter().enumerate() {
                w1 += 2.0 * self.offset_scale * dot(&self.coef[k * m..(k + 1) * m], &obs.offset);
            }
        }
        for items in &self.by_arm {
            for &k in items {
                let ck = &self.coef[k * m..(k + 1) * m];
                for (&l, g) in items.iter().zip(&self.replay[k].gram) {
                    w1 += dot(ck, &self.coef[l * m..(l + 1) * m]) * g;
                }
            }
        }
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        let small = sq(&self.b1, &self.b1_init) + sq(&self.w2, &self.w2_init) + (self.b2 - self.b2_init).powi(2);
        Ok(data + m as f64 * self.cfg.lambda / 2.0 * (w1 + small))
    }

    /// Trains for the configured number of steps on batches drawn from the replay buffer.
    pub fn train(&mut self) -> Result<()> {
        let n = self.replay.len();
        if n == 0 {
            return Ok(());
        }
        let size = self.cfg.batch_size.min(n);
        for _ in 0..self.cfg.n_steps {
            let batch = sample(&mut self.rng, n, size).into_vec();
            self.step(&batch)?;
        }
        Ok(())
    }
}

impl ContextualBandit for NeuralUcb {
    fn n_arms(&self) -> usize {
        self.n_arms
    }

    fn context_dim(&self) -> usize {
        self.dim
    }

    fn select(&self, x: &[f64]) -> Result<Decision> {
        check_context(x, self.dim)?;
        let m = self.cfg.hidden as f64;
        let mut scores = Vec::with_capacity(self.n_arms);
        let mut widths = Vec::with_capacity(self.n_arms);
        for arm in 0..self.n_arms {
            let fwd = self.forward_from(self.pre_activation(x, arm));
            if !fwd.out.is_finite() {
                return Err(Error::NonFinite("network output"));
            }
            let s = self.scaled_grad_norm(&fwd, x, arm);
            scores.push(fwd.out);
            widths.push((self.cfg.nu * self.cfg.lambda * s / m).sqrt());
        }
        Ok(Decision::from_terms(scores, widths))
    }

    fn update(&mut self, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        self.observe(x, arm, reward)?;
        self.train()
    }
}
