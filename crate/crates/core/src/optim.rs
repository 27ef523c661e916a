//! Budgeted incremental update processes.
//!
//! Every update call consumes a number of per-point gradient computations
//! (the budget, `rho`) and returns how many it actually spent so that callers
//! can audit the accounting.


use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Batch, PointRef, SampleSet};
use crate::error::{Error, Result};
use crate::linear::{dot, point_gradient_into, risk_gradient, segment_risk, sigmoid, LossConfig, RiskKind, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivisionMode {
    /// Every model gets the full budget.
    PerModel,
    /// The budget is split evenly (floored) over the algorithm's live models.
    PerAlgorithm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPolicy {
    /// Gradient computations per time step.
    pub rho: usize,
    pub mode: DivisionMode,
}

impl BudgetPolicy {
    pub fn per_model(rho: usize) -> Self {
        Self { rho, mode: DivisionMode::PerModel }
    }

    pub fn per_algorithm(rho: usize) -> Self {
        Self { rho, mode: DivisionMode::PerAlgorithm }
    }

    /// Budget handed to each of `live_models` models this step.
    pub fn model_budget(&self, live_models: usize) -> usize {
        match self.mode {
            DivisionMode::PerModel => self.rho,
            DivisionMode::PerAlgorithm if live_models == 0 => 0,
            DivisionMode::PerAlgorithm => self.rho / live_models,
        }
    }
}

/// How a fresh model's weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelInit {
    #[default]
    Zero,
    Gaussian { std: f64 },
}

impl ModelInit {
    pub fn draw<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Weights {
        match *self {
            ModelInit::Zero => Weights::zeros(dim),
            ModelInit::Gaussian { std } => {
                let normal = Normal::new(0.0, std).expect("finite std");
                Weights((0..dim).map(|_| normal.sample(rng)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    #[default]
    Strsaga,
    Sgd,
}

/// Plain SGD over the whole arrived segment.
#[derive(Debug, Clone)]
pub struct SgdState {
    pub w: Weights,
    pub eta: f64,
    pub loss: LossConfig,
    pub sample_set: SampleSet,
    grad: Vec<f64>,
}

impl SgdState {
    pub fn new(w: Weights, eta: f64, loss: LossConfig, t_start: usize) -> Self {
        let grad = vec![0.0; w.dim()];
        Self { w, eta, loss, sample_set: SampleSet::starting_at(t_start), grad }
    }

    /// Adds the batch, then takes `budget` uniformly sampled gradient steps.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, budget: usize, rng: &mut R) -> Result<usize> {
        self.sample_set.append_batch(batch)?;
        if self.sample_set.is_empty() {
            return Ok(0);
        }
        for _ in 0..budget {
            let p = self.sample_set.uniform_sample(rng)?;
            point_gradient_into(&self.w.0, p, self.loss.mu, &mut self.grad);
            for (wi, gi) in self.w.0.iter_mut().zip(&self.grad) {
                *wi -= self.eta * gi;
            }
        }
        Ok(budget)
    }

    /// One in-order pass over the new batch: exactly one step per new point.
    pub fn single_pass(&mut self, batch: &Batch) -> Result<usize> {
        self.sample_set.append_batch(batch)?;
        for p in &batch.points {
            point_gradient_into(&self.w.0, p, self.loss.mu, &mut self.grad);
            for (wi, gi) in self.w.0.iter_mut().zip(&self.grad) {
                *wi -= self.eta * gi;
            }
        }
        Ok(batch.len())
    }
}

/// STRSAGA: variance-reduced steps over an admitted sample set that grows
/// through a FIFO waiting room.
///
/// Because admission is FIFO, the admitted points are always a prefix of the
/// arrived segment and the waiting room is the remaining suffix.
#[derive(Debug, Clone)]
pub struct StrsagaState {
    pub w: Weights,
    pub eta: f64,
    pub loss: LossConfig,
    arrived: SampleSet,
    admitted: usize,
    /// Stored gradient per admitted point, row-major `admitted x dim`.
    alpha: Vec<f64>,
    avg_alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl StrsagaState {
    pub fn new(w: Weights, eta: f64, loss: LossConfig, t_start: usize) -> Self {
        let d = w.dim();
        Self {
            w,
            eta,
            loss,
            arrived: SampleSet::starting_at(t_start),
            admitted: 0,
            alpha: Vec::new(),
            avg_alpha: vec![0.0; d],
            grad: vec![0.0; d],
        }
    }

    /// Every point that has arrived, admitted or waiting.
    pub fn arrived(&self) -> &SampleSet {
        &self.arrived
    }

    pub fn sample_set(&self) -> &[PointRef] {
        &self.arrived.points()[..self.admitted]
    }

    pub fn waiting_room(&self) -> &[PointRef] {
        &self.arrived.points()[self.admitted..]
    }

    pub fn avg_alpha(&self) -> &[f64] {
        &self.avg_alpha
    }

    pub fn alpha(&self, index: usize) -> &[f64] {
        let d = self.w.dim();
        &self.alpha[index * d..(index + 1) * d]
    }

    fn admit(&mut self) -> usize {
        let d = self.w.dim();
        self.alpha.extend(std::iter::repeat_n(0.0, d));
        self.admitted += 1;
        let scale = (self.admitted - 1) as f64 / self.admitted as f64;
        for a in &mut self.avg_alpha {
            *a *= scale;
        }
        self.admitted - 1
    }

    /// Pushes the batch into the waiting room and runs `budget` iterations.
    ///
    /// Even iterations (counted from 1 within this call) admit the oldest
    /// waiting point; other iterations sample the admitted set uniformly.
    /// A uniform draw on an empty admitted set admits instead.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, budget: usize, rng: &mut R) -> Result<usize> {
        self.arrived.append_batch(batch)?;
        let d = self.w.dim();
        let mut spent = 0;
        for j in 1..=budget {
            let waiting = self.admitted < self.arrived.len();
            let idx = if waiting && (j % 2 == 0 || self.admitted == 0) {
                self.admit()
            } else if self.admitted == 0 {
                continue;
            } else {
                rng.random_range(0..self.admitted)
            };
            let p = &self.arrived.points()[idx];
            point_gradient_into(&self.w.0, p, self.loss.mu, &mut self.grad);
            spent += 1;

            let n = self.admitted as f64;
            let stored = &mut self.alpha[idx * d..(idx + 1) * d];
            for k in 0..d {
                let g = self.grad[k];
                self.w.0[k] -= self.eta * (g - stored[k] + self.avg_alpha[k]);
                self.avg_alpha[k] += (g - stored[k]) / n;
                stored[k] = g;
            }
        }
        Ok(spent)
    }
}

/// A model under training by one of the update processes.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd(SgdState),
    Strsaga(StrsagaState),
}

impl Optimizer {
    pub fn new(kind: UpdateKind, w: Weights, eta: f64, loss: LossConfig, t_start: usize) -> Self {
        match kind {
            UpdateKind::Sgd => Optimizer::Sgd(SgdState::new(w, eta, loss, t_start)),
            UpdateKind::Strsaga => Optimizer::Strsaga(StrsagaState::new(w, eta, loss, t_start)),
        }
    }

    pub fn weights(&self) -> &Weights {
        match self {
            Optimizer::Sgd(s) => &s.w,
            Optimizer::Strsaga(s) => &s.w,
        }
    }

    /// All arrived points of this model's stream segment.
    pub fn segment(&self) -> &SampleSet {
        match self {
            Optimizer::Sgd(s) => &s.sample_set,
            Optimizer::Strsaga(s) => s.arrived(),
        }
    }

    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, budget: usize, rng: &mut R) -> Result<usize> {
        match self {
            Optimizer::Sgd(s) => s.update(batch, budget, rng),
            Optimizer::Strsaga(s) => s.update(batch, budget, rng),
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights().0, x)
    }
}

/// Dimension up to which [`erm_optimize`] takes Newton steps; above it the
/// Hessian is too costly to form and plain gradient steps are used.
pub const NEWTON_MAX_DIM: usize = 256;

/// Solves `h x = b` for symmetric positive definite `h` (row-major, `d x d`).
fn cholesky_solve(mut h: Vec<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    for j in 0..d {
        let mut diag = h[j * d + j];
        for k in 0..j {
            diag -= h[j * d + k] * h[j * d + k];
        }
        if !(diag > 0.0) {
            return None;
        }
        let diag = diag.sqrt();
        h[j * d + j] = diag;
        for i in j + 1..d {
            let mut v = h[i * d + j];
            for k in 0..j {
                v -= h[i * d + k] * h[j * d + k];
            }
            h[i * d + j] = v / diag;
        }
    }
    let mut x = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            x[i] -= h[i * d + k] * x[k];
        }
        x[i] /= h[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            x[i] -= h[k * d + i] * x[k];
        }
        x[i] /= h[i * d + i];
    }
    Some(x)
}

fn risk_hessian(w: &Weights, pts: &[PointRef], mu: f64) -> Vec<f64> {
    let d = w.dim();
    let mut h = vec![0.0; d * d];
    for p in pts {
        let s = sigmoid(dot(&w.0, &p.features));
        let c = s * (1.0 - s);
        for i in 0..d {
            let ci = c * p.features[i];
            for j in 0..=i {
                h[i * d + j] += ci * p.features[j];
            }
        }
    }
    let n = pts.len() as f64;
    for i in 0..d {
        for j in 0..=i {
            h[i * d + j] /= n;
            h[j * d + i] = h[i * d + j];
        }
        h[i * d + i] += mu;
    }
    h
}

/// Deterministic minimizer of the regularized logistic risk over `pts`,
/// starting from `w = 0` and stopping once the gradient norm is at most
/// `tol`. Each iteration moves along the Newton direction (or the negative
/// gradient above [`NEWTON_MAX_DIM`]) with Armijo backtracking.
pub fn erm_optimize(pts: &[PointRef], loss: &LossConfig, tol: f64) -> Result<Weights> {
    let dim = pts.first().map_or(0, |p| p.dim());
    minimize(pts, loss, tol, dim <= NEWTON_MAX_DIM)
}

fn minimize(pts: &[PointRef], loss: &LossConfig, tol: f64, newton: bool) -> Result<Weights> {
    const MAX_ITERS: usize = 1_000_000;
    const ARMIJO: f64 = 1e-4;

    let first = pts.first().ok_or(Error::Empty("minimize risk"))?;
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be > 0"));
    }
    let mut w = Weights::zeros(first.dim());
    let mut value = segment_risk(&w, pts, loss, RiskKind::Logistic)?;
    let mut gd_step = 1.0;
    let mut grad_norm = f64::INFINITY;
    for iter in 0..MAX_ITERS {
        let g = risk_gradient(&w, pts, loss)?;
        grad_norm = dot(&g, &g).sqrt();
        if grad_norm <= tol {
            return Ok(w);
        }
        let newton_dir = if newton { cholesky_solve(risk_hessian(&w, pts, loss.mu), &g) } else { None };
        let is_newton = newton_dir.is_some();
        let (dir, mut step) = match newton_dir {
            Some(d) => (d, 1.0),
            None => (g.clone(), gd_step * 2.0),
        };
        let slope = dot(&g, &dir);
        loop {
            let trial = Weights(w.0.iter().zip(&dir).map(|(wi, di)| wi - step * di).collect());
            let trial_value = segment_risk(&trial, pts, loss, RiskKind::Logistic)?;
            // Near the optimum the decrease drops below f64 resolution, so a
            // full Newton step is also accepted when it shrinks the gradient.
            let accept = trial_value <= value - ARMIJO * step * slope
                || (is_newton && step == 1.0 && {
                    let tg = risk_gradient(&trial, pts, loss)?;
                    dot(&tg, &tg).sqrt() < grad_norm
                });
            if accept {
                w = trial;
                value = trial_value;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Err(Error::NoConvergence { iterations: iter, grad_norm });
            }
        }
        if !is_newton {
            gd_step = step;
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITERS, grad_norm })
}
