//! Disjoint LinUCB: one ridge-regression model per arm.
//!
//! Each arm keeps `A = I + sum x x^T`, `b = sum r x` and the inverse of `A`.
//! While an arm has seen fewer contexts than `dense_threshold`, the inverse
//! is kept in Woodbury form `A^-1 = I - X^T (I + X X^T)^-1 X`, with the small
//! `n x n` system factored incrementally; queries then cost `O(n d)` instead
//! of `O(d^2)`. Past the threshold the arm switches to an explicit `d x d`
//! inverse maintained by Sherman-Morrison rank-one updates, recomputed from
//! `A` by direct factorization every `recompute_every` updates to bound drift.

use crate::error::{invalid, Result};
use crate::linalg::{axpy, dot, spd_inverse, GrowingCholesky};

use super::{check_arm, check_context, check_reward, ContextualBandit, Decision};

pub const DEFAULT_RECOMPUTE_EVERY: usize = 1000;

#[derive(Debug, Clone)]
struct LowRank {
    /// Observed contexts, row-major `n x d`.
    contexts: Vec<f64>,
    rewards: Vec<f64>,
    /// Cholesky factor of `I + X X^T`.
    chol: GrowingCholesky,
    /// `(I + X X^T)^-1 r`, so that `theta = X^T coef`.
    coef: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Dense {
    a: Vec<f64>,
    a_inv: Vec<f64>,
    since_recompute: usize,
}

#[derive(Debug, Clone)]
enum Inverse {
    LowRank(LowRank),
    Dense(Dense),
}

#[derive(Debug, Clone)]
struct Arm {
    b: Vec<f64>,
    n_updates: usize,
    inverse: Inverse,
}

impl Arm {
    fn fresh() -> Self {
        Self {
            b: Vec::new(),
            n_updates: 0,
            inverse: Inverse::LowRank(LowRank {
                contexts: Vec::new(),
                rewards: Vec::new(),
                chol: GrowingCholesky::default(),
                coef: Vec::new(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinUcb {
    alpha: f64,
    dim: usize,
    arms: Vec<Arm>,
    dense_threshold: usize,
    recompute_every: usize,
    seed: u64,
}

impl LinUcb {
    pub fn new(n_arms: usize, dim: usize, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha {alpha} must be finite and >= 0")));
        }
        if n_arms == 0 || dim == 0 {
            return Err(invalid("LinUCB needs at least one arm and one feature"));
        }
        let mut arms = vec![Arm::fresh(); n_arms];
        arms.iter_mut().for_each(|a| a.b = vec![0.0; dim]);
        Ok(Self {
            alpha,
            dim,
            arms,
            dense_threshold: (dim / 2).max(1),
            recompute_every: DEFAULT_RECOMPUTE_EVERY,
            seed: 0,
        })
    }

    /// Number of observations after which an arm switches to an explicit inverse.
    /// Zero keeps every arm dense from the start.
    pub fn with_dense_threshold(mut self, n: usize) -> Self {
        self.dense_threshold = n;
        for arm in &mut self.arms {
            if arm.n_updates >= n {
                densify(arm, self.dim);
            }
        }
        self
    }

    pub fn with_recompute_every(mut self, n: usize) -> Self {
        self.recompute_every = n.max(1);
        self
    }

    /// LinUCB is deterministic; the seed is only carried into checkpoints.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_updates(&self, arm: usize) -> usize {
        self.arms[arm].n_updates
    }

    pub fn is_dense(&self, arm: usize) -> bool {
        matches!(self.arms[arm].inverse, Inverse::Dense(_))
    }

    pub fn b(&self, arm: usize) -> &[f64] {
        &self.arms[arm].b
    }

    /// Ridge estimate `A^-1 b` for one arm.
    pub fn theta(&self, arm: usize) -> Vec<f64> {
        let arm = &self.arms[arm];
        match &arm.inverse {
            Inverse::LowRank(lr) => {
                let mut theta = vec![0.0; self.dim];
                for (row, c) in lr.contexts.chunks_exact(self.dim).zip(&lr.coef) {
                    axpy(*c, row, &mut theta);
                }
                theta
            }
            Inverse::Dense(d) => mat_vec(&d.a_inv, &arm.b, self.dim),
        }
    }

    /// Explicit `A^-1` (row-major `d x d`), materialized on demand.
    pub fn inverse_matrix(&self, arm: usize) -> Vec<f64> {
        match &self.arms[arm].inverse {
            Inverse::Dense(d) => d.a_inv.clone(),
            Inverse::LowRank(lr) => low_rank_inverse(lr, self.dim),
        }
    }

    /// Explicit `A = I + sum x x^T`.
    pub fn design_matrix(&self, arm: usize) -> Vec<f64> {
        match &self.arms[arm].inverse {
            Inverse::Dense(d) => d.a.clone(),
            Inverse::LowRank(lr) => low_rank_design(lr, self.dim),
        }
    }

    /// `max |A^-1 A - I|` for one arm.
    pub fn inverse_drift(&self, arm: usize) -> f64 {
        let d = self.dim;
        let a = self.design_matrix(arm);
        let inv = self.inverse_matrix(arm);
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| inv[i * d + k] * a[k * d + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Restores an arm from an explicit inverse and response vector.
    pub(crate) fn from_dense_parts(
        alpha: f64,
        dim: usize,
        parts: Vec<(Vec<f64>, Vec<f64>)>,
        seed: u64,
    ) -> Result<Self> {
        let mut agent = Self::new(parts.len(), dim, alpha)?.with_seed(seed);
        for (arm, (a_inv, b)) in agent.arms.iter_mut().zip(parts) {
            if a_inv.len() != dim * dim || b.len() != dim {
                return Err(invalid("checkpoint arm has the wrong shape"));
            }
            let a = spd_inverse(&a_inv, dim)?;
            arm.b = b;
            arm.inverse = Inverse::Dense(Dense {
                a,
                a_inv,
                since_recompute: 0,
            });
        }
        agent.dense_threshold = 0;
        Ok(agent)
    }

    /// Score and width for one arm.
    fn arm_terms(&self, arm: &Arm, x: &[f64]) -> (f64, f64) {
        let (score, quad) = match &arm.inverse {
            Inverse::LowRank(lr) => {
                let n = lr.rewards.len();
                let mut v: Vec<f64> = lr.contexts.chunks_exact(self.dim).map(|row| dot(row, x)).collect();
                let score = dot(&lr.coef, &v);
                lr.chol.forward_solve(&mut v[..n]);
                (score, dot(x, x) - dot(&v, &v))
            }
            Inverse::Dense(d) => {
                let u = mat_vec(&d.a_inv, x, self.dim);
                (dot(&arm.b, &u), dot(x, &u))
            }
        };
        (score, self.alpha * quad.max(0.0).sqrt())
    }
}

impl ContextualBandit for LinUcb {
    fn n_arms(&self) -> usize {
        self.arms.len()
    }

    fn context_dim(&self) -> usize {
        self.dim
    }

    fn select(&self, x: &[f64]) -> Result<Decision> {
        check_context(x, self.dim)?;
        let (scores, widths) = self.arms.iter().map(|a| self.arm_terms(a, x)).unzip();
        Ok(Decision::from_terms(scores, widths))
    }

    fn update(&mut self, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        check_context(x, self.dim)?;
        check_arm(arm, self.arms.len())?;
        check_reward(reward)?;
        let dim = self.dim;
        let recompute_every = self.recompute_every;
        let state = &mut self.arms[arm];
        axpy(reward, x, &mut state.b);
        match &mut state.inverse {
            Inverse::LowRank(lr) => {
                let cross: Vec<f64> = lr.contexts.chunks_exact(dim).map(|row| dot(row, x)).collect();
                lr.chol.push(&cross, 1.0 + dot(x, x))?;
                lr.contexts.extend_from_slice(x);
                lr.rewards.push(reward);
                let mut coef = lr.rewards.clone();
                lr.chol.forward_solve(&mut coef);
                lr.chol.backward_solve(&mut coef);
                lr.coef = coef;
            }
            Inverse::Dense(d) => sherman_morrison(d, x, dim, recompute_every)?,
        }
        state.n_updates += 1;
        if state.n_updates >= self.dense_threshold && !matches!(state.inverse, Inverse::Dense(_)) {
            densify(state, dim);
        }
        Ok(())
    }
}

fn mat_vec(m: &[f64], x: &[f64], d: usize) -> Vec<f64> {
    m.chunks_exact(d).map(|row| dot(row, x)).collect()
}

fn sherman_morrison(d: &mut Dense, x: &[f64], dim: usize, recompute_every: usize) -> Result<()> {
    let u = mat_vec(&d.a_inv, x, dim);
    let denom = 1.0 + dot(x, &u);
    for i in 0..dim {
        let s = u[i] / denom;
        axpy(-s, &u, &mut d.a_inv[i * dim..(i + 1) * dim]);
        axpy(x[i], x, &mut d.a[i * dim..(i + 1) * dim]);
    }
    d.since_recompute += 1;
    if d.since_recompute >= recompute_every {
        d.a_inv = spd_inverse(&d.a, dim)?;
        d.since_recompute = 0;
    }
    Ok(())
}

fn low_rank_design(lr: &LowRank, dim: usize) -> Vec<f64> {
    let mut a = vec![0.0; dim * dim];
    for i in 0..dim {
        a[i * dim + i] = 1.0;
    }
    for row in lr.contexts.chunks_exact(dim) {
        for i in 0..dim {
            axpy(row[i], row, &mut a[i * dim..(i + 1) * dim]);
        }
    }
    a
}

fn low_rank_inverse(lr: &LowRank, dim: usize) -> Vec<f64> {
    let n = lr.rewards.len();
    // W = L^-1 X (n x d); then A^-1 = I - W^T W.
    let mut w = lr.contexts.clone();
    for col in 0..dim {
        let mut v: Vec<f64> = (0..n).map(|k| w[k * dim + col]).collect();
        lr.chol.forward_solve(&mut v);
        for k in 0..n {
            w[k * dim + col] = v[k];
        }
    }
    let mut inv = vec![0.0; dim * dim];
    for i in 0..dim {
        inv[i * dim + i] = 1.0;
    }
    for row in w.chunks_exact(dim) {
        for i in 0..dim {
            axpy(-row[i], row, &mut inv[i * dim..(i + 1) * dim]);
        }
    }
    inv
}

fn densify(arm: &mut Arm, dim: usize) {
    if let Inverse::LowRank(lr) = &arm.inverse {
        let a = low_rank_design(lr, dim);
        let a_inv = low_rank_inverse(lr, dim);
        arm.inverse = Inverse::Dense(Dense {
            a,
            a_inv,
            since_recompute: 0,
        });
    }
}
