//! Adaptive learners sharing one prequential step interface: predict on the
//! incoming batch, then train on it.
//!
//! [`DriftSurf`] is the stable/reactive learner. [`Aware`], [`MddmLearner`],
//! [`Aue`], [`Oblivious`] and [`OnePassSgd`] are the baselines it is compared
//! against.

use std::collections::BTreeSet;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Batch, Label, PointRef};
use crate::error::Result;
use crate::linear::{dot, segment_risk, sigmoid, LossConfig, RiskKind, Weights};
use crate::mddm::{Mddm, MddmConfig, Signal};
use crate::optim::{BudgetPolicy, ModelInit, Optimizer, SgdState, UpdateKind};

pub type StreamRng = ChaCha8Rng;

/// How every model of a learner is created and trained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub dim: usize,
    pub update: UpdateKind,
    pub eta: f64,
    pub loss: LossConfig,
    pub init: ModelInit,
}

/// A model with a learner-local identity.
#[derive(Debug, Clone)]
pub struct Model {
    pub id: u64,
    pub opt: Optimizer,
}

impl Model {
    pub fn weights(&self) -> &Weights {
        self.opt.weights()
    }

    /// First time step of the segment this model trains on.
    pub fn segment_start(&self) -> usize {
        self.opt.segment().t_start()
    }

    pub fn segment_len(&self) -> usize {
        self.opt.segment().len()
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        Label::from_bool(self.opt.score(x) >= 0.0)
    }

    pub fn predict_batch(&self, batch: &Batch) -> Vec<Label> {
        batch.points.iter().map(|p| self.predict(&p.features)).collect()
    }

    pub fn risk<'a>(&self, pts: impl IntoIterator<Item = &'a PointRef>, loss: &LossConfig, kind: RiskKind) -> Result<f64> {
        segment_risk(self.weights(), pts, loss, kind)
    }
}

#[derive(Debug, Clone)]
struct ModelFactory {
    cfg: TrainingConfig,
    next_id: u64,
}

impl ModelFactory {
    fn new(cfg: TrainingConfig) -> Self {
        Self { cfg, next_id: 0 }
    }

    fn fresh(&mut self, t_start: usize, rng: &mut StreamRng) -> Model {
        let w = self.cfg.init.draw(self.cfg.dim, rng);
        let id = self.next_id;
        self.next_id += 1;
        Model { id, opt: Optimizer::new(self.cfg.update, w, self.cfg.eta, self.cfg.loss, t_start) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Stable,
    Reactive,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Stable => "stable",
            Phase::Reactive => "reactive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Batch risk exceeded the best observed risk plus `delta`.
    BestRisk,
    /// Batch risk exceeded the stable model's risk plus `delta_prime`.
    StableModel,
    /// Reactive window ended and the reactive model became predictive.
    Switch,
    /// Reactive window ended and the predictive model was kept.
    Keep,
    /// Baseline discarded its model (known drift or detector signal).
    Reset,
}

/// One audited state change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub time_step: usize,
    pub from: Option<Phase>,
    pub to: Option<Phase>,
    pub trigger: Trigger,
    /// Risk of the (pre-step) predictive model on the batch, or on the
    /// reactive window at exit.
    pub predictive_risk: Option<f64>,
    pub best_risk: Option<f64>,
    pub stable_risk: Option<f64>,
    pub reactive_risk: Option<f64>,
}

impl Transition {
    pub(crate) fn reset(time_step: usize) -> Self {
        Self {
            time_step,
            from: None,
            to: None,
            trigger: Trigger::Reset,
            predictive_risk: None,
            best_risk: None,
            stable_risk: None,
            reactive_risk: None,
        }
    }

    pub fn is_reactive_entry(&self) -> bool {
        matches!(self.trigger, Trigger::BestRisk | Trigger::StableModel)
    }

    /// True when the serving model was replaced for good.
    pub fn is_replacement(&self) -> bool {
        matches!(self.trigger, Trigger::Switch | Trigger::Reset)
    }
}

/// What a learner did on one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Made before any label of the batch was used.
    pub predictions: Vec<Label>,
    pub gradients: usize,
    pub models_trained: usize,
    /// Gradient count the budget policy prescribes for this step.
    pub budgeted: usize,
    pub phase: Option<Phase>,
    pub serving_model: u64,
    /// Earliest time step any serving model has trained on.
    pub serving_segment_start: usize,
}

pub trait Learner: Send {
    fn name(&self) -> &str;

    fn step(&mut self, batch: &Batch, rng: &mut StreamRng) -> Result<StepOutcome>;

    /// Transitions logged since the last call.
    fn drain_transitions(&mut self) -> Vec<Transition> {
        Vec::new()
    }

    /// The single model whose risk defines the learner, if there is one.
    fn predictive_model(&self) -> Option<&Model>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSurfConfig {
    /// Length of the reactive state in time steps.
    pub reactive_len: usize,
    pub delta: f64,
    pub delta_prime: f64,
    pub greedy: bool,
    pub detection_risk: RiskKind,
}

impl Default for DriftSurfConfig {
    fn default() -> Self {
        Self {
            reactive_len: 4,
            delta: 0.1,
            delta_prime: 0.05,
            greedy: true,
            detection_risk: RiskKind::ZeroOne,
        }
    }
}

/// Stable/reactive adaptive learner.
///
/// In the stable state the predictive model and a stable model (started at
/// the last return to stability) are trained. A batch on which the predictive
/// model does worse than its best observed risk plus `delta`, or worse than
/// the stable model plus `delta_prime`, starts a reactive state: a fresh
/// reactive model trains alongside the predictive model for `reactive_len`
/// steps, after which it replaces the predictive model iff it has lower risk
/// on the reactive window.
#[derive(Debug, Clone)]
pub struct DriftSurf {
    name: String,
    cfg: DriftSurfConfig,
    budget: BudgetPolicy,
    factory: ModelFactory,
    phase: Phase,
    predictive: Model,
    stable: Option<Model>,
    reactive: Option<Model>,
    best_risk: f64,
    window: Vec<Batch>,
    reactive_steps: usize,
    serve_reactive: bool,
    log: Vec<Transition>,
}

impl DriftSurf {
    pub fn new(
        name: impl Into<String>,
        cfg: DriftSurfConfig,
        training: TrainingConfig,
        budget: BudgetPolicy,
        rng: &mut StreamRng,
    ) -> Self {
        let mut factory = ModelFactory::new(training);
        let predictive = factory.fresh(0, rng);
        let stable = factory.fresh(0, rng);
        Self {
            name: name.into(),
            cfg,
            budget,
            factory,
            phase: Phase::Stable,
            predictive,
            stable: Some(stable),
            reactive: None,
            best_risk: f64::INFINITY,
            window: Vec::new(),
            reactive_steps: 0,
            serve_reactive: false,
            log: Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn best_risk(&self) -> f64 {
        self.best_risk
    }

    pub fn stable_model(&self) -> Option<&Model> {
        self.stable.as_ref()
    }

    pub fn reactive_model(&self) -> Option<&Model> {
        self.reactive.as_ref()
    }

    /// Batches seen since entering the current reactive state.
    pub fn reactive_window(&self) -> &[Batch] {
        &self.window
    }

    pub fn reactive_steps(&self) -> usize {
        self.reactive_steps
    }

    fn risk(&self, model: &Model, batch: &Batch) -> Result<f64> {
        model.risk(&batch.points, &self.factory.cfg.loss, self.cfg.detection_risk)
    }

    fn window_risk(&self, model: &Model) -> Result<f64> {
        model.risk(self.window.iter().flat_map(|b| &b.points), &self.factory.cfg.loss, self.cfg.detection_risk)
    }

    fn enter_reactive(&mut self, t: usize, trigger: Trigger, pred_risk: f64, stable_risk: Option<f64>, rng: &mut StreamRng) {
        self.log.push(Transition {
            time_step: t,
            from: Some(Phase::Stable),
            to: Some(Phase::Reactive),
            trigger,
            predictive_risk: Some(pred_risk),
            best_risk: Some(self.best_risk),
            stable_risk,
            reactive_risk: None,
        });
        self.phase = Phase::Reactive;
        self.window.clear();
        self.reactive_steps = 0;
        self.reactive = Some(self.factory.fresh(t, rng));
        self.stable = None;
    }
}

impl Learner for DriftSurf {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, batch: &Batch, rng: &mut StreamRng) -> Result<StepOutcome> {
        let t = batch.time_step;
        let serving = match (&self.reactive, self.serve_reactive) {
            (Some(reactive), true) => reactive,
            _ => &self.predictive,
        };
        let predictions = serving.predict_batch(batch);
        let serving_model = serving.id;
        let serving_segment_start = serving.segment_start();
        let phase_at_prediction = self.phase;

        let per_model = self.budget.model_budget(2);
        let mut gradients = 0;
        let pred_risk = self.risk(&self.predictive, batch)?;

        if self.phase == Phase::Stable {
            let stable_risk = match &self.stable {
                Some(s) if s.segment_len() > 0 => Some(self.risk(s, batch)?),
                _ => None,
            };
            let trigger = if pred_risk > self.best_risk + self.cfg.delta {
                Some(Trigger::BestRisk)
            } else if stable_risk.is_some_and(|s| pred_risk > s + self.cfg.delta_prime) {
                Some(Trigger::StableModel)
            } else {
                None
            };
            self.best_risk = self.best_risk.min(pred_risk);
            match trigger {
                Some(trigger) => self.enter_reactive(t, trigger, pred_risk, stable_risk, rng),
                None => {
                    gradients += self.predictive.opt.update(batch, per_model, rng)?;
                    let stable = self.stable.as_mut().expect("stable model exists in stable state");
                    gradients += stable.opt.update(batch, per_model, rng)?;
                }
            }
        } else {
            self.best_risk = self.best_risk.min(pred_risk);
        }

        if self.phase == Phase::Reactive {
            self.window.push(batch.clone());
            gradients += self.predictive.opt.update(batch, per_model, rng)?;
            let reactive = self.reactive.as_mut().expect("reactive model exists in reactive state");
            gradients += reactive.opt.update(batch, per_model, rng)?;
            self.reactive_steps += 1;

            if self.reactive_steps == self.cfg.reactive_len {
                let reactive = self.reactive.take().expect("reactive model");
                let old_risk = self.window_risk(&self.predictive)?;
                let new_risk = self.window_risk(&reactive)?;
                let switch = new_risk < old_risk;
                self.log.push(Transition {
                    time_step: t,
                    from: Some(Phase::Reactive),
                    to: Some(Phase::Stable),
                    trigger: if switch { Trigger::Switch } else { Trigger::Keep },
                    predictive_risk: Some(old_risk),
                    best_risk: Some(self.best_risk),
                    stable_risk: None,
                    reactive_risk: Some(new_risk),
                });
                if switch {
                    self.predictive = reactive;
                    self.best_risk = f64::INFINITY;
                }
                self.phase = Phase::Stable;
                self.stable = Some(self.factory.fresh(t + 1, rng));
                self.serve_reactive = false;
                self.window.clear();
                self.reactive_steps = 0;
            } else if self.cfg.greedy {
                let reactive = self.reactive.as_ref().expect("reactive model");
                self.serve_reactive = self.risk(reactive, batch)? < self.risk(&self.predictive, batch)?;
            }
        }

        Ok(StepOutcome {
            predictions,
            gradients,
            models_trained: 2,
            budgeted: 2 * per_model,
            phase: Some(phase_at_prediction),
            serving_model,
            serving_segment_start,
        })
    }

    fn drain_transitions(&mut self) -> Vec<Transition> {
        std::mem::take(&mut self.log)
    }

    fn predictive_model(&self) -> Option<&Model> {
        Some(&self.predictive)
    }
}

/// Oracle baseline that restarts its model exactly at known drift times.
#[derive(Debug, Clone)]
pub struct Aware {
    name: String,
    budget: BudgetPolicy,
    factory: ModelFactory,
    model: Model,
    drift_times: BTreeSet<usize>,
    log: Vec<Transition>,
}

impl Aware {
    pub fn new(
        name: impl Into<String>,
        drift_times: impl IntoIterator<Item = usize>,
        training: TrainingConfig,
        budget: BudgetPolicy,
        rng: &mut StreamRng,
    ) -> Self {
        let mut factory = ModelFactory::new(training);
        let model = factory.fresh(0, rng);
        Self {
            name: name.into(),
            budget,
            factory,
            model,
            drift_times: drift_times.into_iter().collect(),
            log: Vec::new(),
        }
    }
}

impl Learner for Aware {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, batch: &Batch, rng: &mut StreamRng) -> Result<StepOutcome> {
        let t = batch.time_step;
        if self.drift_times.contains(&t) && t > self.model.segment_start() {
            self.model = self.factory.fresh(t, rng);
            self.log.push(Transition::reset(t));
        }
        let predictions = self.model.predict_batch(batch);
        let serving_model = self.model.id;
        let serving_segment_start = self.model.segment_start();
        let budget = self.budget.model_budget(1);
        let gradients = self.model.opt.update(batch, budget, rng)?;
        Ok(StepOutcome {
            predictions,
            gradients,
            models_trained: 1,
            budgeted: budget,
            phase: None,
            serving_model,
            serving_segment_start,
        })
    }

    fn drain_transitions(&mut self) -> Vec<Transition> {
        std::mem::take(&mut self.log)
    }

    fn predictive_model(&self) -> Option<&Model> {
        Some(&self.model)
    }
}

/// Single model that is discarded whenever MDDM signals a drift.
#[derive(Debug, Clone)]
pub struct MddmLearner {
    name: String,
    budget: BudgetPolicy,
    factory: ModelFactory,
    model: Model,
    detector: Mddm,
    log: Vec<Transition>,
}

impl MddmLearner {
    pub fn new(
        name: impl Into<String>,
        detector: MddmConfig,
        training: TrainingConfig,
        budget: BudgetPolicy,
        rng: &mut StreamRng,
    ) -> Self {
        let mut factory = ModelFactory::new(training);
        let model = factory.fresh(0, rng);
        Self {
            name: name.into(),
            budget,
            factory,
            model,
            detector: Mddm::new(detector),
            log: Vec::new(),
        }
    }

    pub fn detector(&self) -> &Mddm {
        &self.detector
    }
}

impl Learner for MddmLearner {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, batch: &Batch, rng: &mut StreamRng) -> Result<StepOutcome> {
        let t = batch.time_step;
        let predictions = self.model.predict_batch(batch);
        let serving_model = self.model.id;
        let serving_segment_start = self.model.segment_start();

        // At most one signal per batch; outcomes after it belong to the
        // discarded model and are not fed to the fresh detector.
        let drift = predictions
            .iter()
            .zip(batch.labels())
            .any(|(&pred, label)| self.detector.update(pred == label) == Signal::Drift);
        if drift {
            self.model = self.factory.fresh(t, rng);
            self.log.push(Transition::reset(t));
        }

        let budget = self.budget.model_budget(1);
        let gradients = self.model.opt.update(batch, budget, rng)?;
        Ok(StepOutcome {
            predictions,
            gradients,
            models_trained: 1,
            budgeted: budget,
            phase: None,
            serving_model,
            serving_segment_start,
        })
    }

    fn drain_transitions(&mut self) -> Vec<Transition> {
        std::mem::take(&mut self.log)
    }

    fn predictive_model(&self) -> Option<&Model> {
        Some(&self.model)
    }
}

#[derive(Debug, Clone)]
pub struct Expert {
    pub model: Model,
    pub weight: f64,
}

/// Accuracy-updated ensemble: `k` incrementally trained experts with
/// weights `1 / (MSE_r + MSE_j + eps)`; a new expert joins every step and
/// the lowest-weighted one leaves once the ensemble is over capacity.
#[derive(Debug, Clone)]
pub struct Aue {
    name: String,
    budget: BudgetPolicy,
    factory: ModelFactory,
    capacity: usize,
    experts: Vec<Expert>,
}

impl Aue {
    pub const EPSILON: f64 = 1e-9;

    pub fn new(name: impl Into<String>, capacity: usize, training: TrainingConfig, budget: BudgetPolicy) -> Self {
        assert!(capacity > 0, "AUE needs at least one expert");
        Self {
            name: name.into(),
            budget,
            factory: ModelFactory::new(training),
            capacity,
            experts: Vec::new(),
        }
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    /// Weighted vote of the experts' class probabilities; ties go to +1.
    pub fn predict(&self, x: &[f64]) -> Label {
        let vote: f64 = self
            .experts
            .iter()
            .map(|e| e.weight * (sigmoid(dot(&e.model.weights().0, x)) - 0.5))
            .sum();
        Label::from_bool(vote >= 0.0)
    }

    /// MSE of a predictor that guesses from the batch class priors.
    pub fn random_mse(batch: &Batch) -> f64 {
        let n = batch.len().max(1) as f64;
        let pos = batch.labels().filter(|&l| l == Label::Pos).count() as f64 / n;
        pos * (1.0 - pos).powi(2) + (1.0 - pos) * pos.powi(2)
    }

    /// Mean of `(1 - P(true class))^2` over the batch.
    pub fn expert_mse(model: &Model, batch: &Batch) -> f64 {
        let n = batch.len().max(1) as f64;
        batch
            .points
            .iter()
            .map(|p| {
                let prob = sigmoid(p.label.sign() * dot(&model.weights().0, &p.features));
                (1.0 - prob).powi(2)
            })
            .sum::<f64>()
            / n
    }
}

impl Learner for Aue {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, batch: &Batch, rng: &mut StreamRng) -> Result<StepOutcome> {
        let t = batch.time_step;
        let predictions: Vec<Label> = batch.points.iter().map(|p| self.predict(&p.features)).collect();
        let serving_model = self.experts.last().map_or(u64::MAX, |e| e.model.id);
        let serving_segment_start = self.experts.iter().map(|e| e.model.segment_start()).min().unwrap_or(t);

        let mse_r = Self::random_mse(batch);
        for e in &mut self.experts {
            e.weight = 1.0 / (mse_r + Self::expert_mse(&e.model, batch) + Self::EPSILON);
        }
        let model = self.factory.fresh(t, rng);
        self.experts.push(Expert { model, weight: 1.0 / (mse_r + Self::EPSILON) });
        if self.experts.len() > self.capacity {
            let weakest = self
                .experts
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.weight.total_cmp(&b.1.weight))
                .map(|(i, _)| i)
                .expect("nonempty ensemble");
            self.experts.remove(weakest);
        }

        let live = self.experts.len();
        let per_model = self.budget.model_budget(live);
        let mut gradients = 0;
        for e in &mut self.experts {
            gradients += e.model.opt.update(batch, per_model, rng)?;
        }
        Ok(StepOutcome {
            predictions,
            gradients,
            models_trained: live,
            budgeted: live * per_model,
            phase: None,
            serving_model,
            serving_segment_start,
        })
    }

    fn predictive_model(&self) -> Option<&Model> {
        None
    }
}

/// One model over the whole stream, never reset.
#[derive(Debug, Clone)]
pub struct Oblivious {
    name: String,
    budget: BudgetPolicy,
    model: Model,
}

impl Oblivious {
    pub fn new(name: impl Into<String>, training: TrainingConfig, budget: BudgetPolicy, rng: &mut StreamRng) -> Self {
        let model = ModelFactory::new(training).fresh(0, rng);
        Self { name: name.into(), budget, model }
    }
}

impl Learner for Oblivious {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, batch: &Batch, rng: &mut StreamRng) -> Result<StepOutcome> {
        let predictions = self.model.predict_batch(batch);
        let budget = self.budget.model_budget(1);
        let gradients = self.model.opt.update(batch, budget, rng)?;
        Ok(StepOutcome {
            predictions,
            gradients,
            models_trained: 1,
            budgeted: budget,
            phase: None,
            serving_model: self.model.id,
            serving_segment_start: self.model.segment_start(),
        })
    }

    fn predictive_model(&self) -> Option<&Model> {
        Some(&self.model)
    }
}

/// SGD taking one in-order pass over each new batch: exactly `m` steps per
/// time step whatever the budget.
#[derive(Debug, Clone)]
pub struct OnePassSgd {
    name: String,
    model: Model,
}

impl OnePassSgd {
    pub fn new(name: impl Into<String>, training: TrainingConfig, rng: &mut StreamRng) -> Self {
        let training = TrainingConfig { update: UpdateKind::Sgd, ..training };
        let model = ModelFactory::new(training).fresh(0, rng);
        Self { name: name.into(), model }
    }
}

impl Learner for OnePassSgd {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, batch: &Batch, _rng: &mut StreamRng) -> Result<StepOutcome> {
        let predictions = self.model.predict_batch(batch);
        let Optimizer::Sgd(state) = &mut self.model.opt else {
            unreachable!("one-pass learner always holds an SGD state")
        };
        let gradients = SgdState::single_pass(state, batch)?;
        Ok(StepOutcome {
            predictions,
            gradients,
            models_trained: 1,
            budgeted: batch.len(),
            phase: None,
            serving_model: self.model.id,
            serving_segment_start: self.model.segment_start(),
        })
    }

    fn predictive_model(&self) -> Option<&Model> {
        Some(&self.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabeledPoint, Stream};
    use crate::streams::{append_intercept, generate, inject_label_swap, DriftSchedule, GeneratorSpec};
    use rand::SeedableRng;

    const M: usize = 100;

    fn swap_stream(seed: u64) -> Stream {
        let mut spec = GeneratorSpec::sine1(100, M, seed);
        spec.schedule = DriftSchedule::none();
        append_intercept(&inject_label_swap(&generate(&spec).unwrap(), &[30, 60]))
    }

    fn training() -> TrainingConfig {
        TrainingConfig {
            dim: 3,
            update: UpdateKind::Strsaga,
            eta: 0.2,
            loss: LossConfig::new(1e-3).unwrap(),
            init: ModelInit::Zero,
        }
    }

    fn run(learner: &mut dyn Learner, stream: &Stream, seed: u64) -> (Vec<StepOutcome>, Vec<Transition>) {
        let mut rng = StreamRng::seed_from_u64(seed);
        let outcomes = stream.iter().map(|b| learner.step(b, &mut rng).unwrap()).collect();
        (outcomes, learner.drain_transitions())
    }

    fn driftsurf(greedy: bool) -> DriftSurf {
        let cfg = DriftSurfConfig { greedy, ..DriftSurfConfig::default() };
        DriftSurf::new("ds", cfg, training(), BudgetPolicy::per_model(2 * M), &mut StreamRng::seed_from_u64(1))
    }

    #[test]
    fn driftsurf_trains_two_models_within_budget() {
        let mut ds = driftsurf(true);
        let (outcomes, _) = run(&mut ds, &swap_stream(3), 4);
        for o in &outcomes {
            assert_eq!(o.models_trained, 2);
            assert_eq!(o.budgeted, 4 * M);
            assert_eq!(o.gradients, o.budgeted);
        }
    }

    #[test]
    fn reactive_state_lasts_exactly_r_steps() {
        let mut ds = driftsurf(true);
        let (outcomes, transitions) = run(&mut ds, &swap_stream(5), 6);
        let entries: Vec<usize> = transitions.iter().filter(|t| t.is_reactive_entry()).map(|t| t.time_step).collect();
        let exits: Vec<usize> =
            transitions.iter().filter(|t| t.from == Some(Phase::Reactive)).map(|t| t.time_step).collect();
        assert!(!entries.is_empty());
        for (entry, exit) in entries.iter().zip(&exits) {
            assert_eq!(exit - entry + 1, 4);
            for o in &outcomes[entry + 1..=*exit] {
                assert_eq!(o.phase, Some(Phase::Reactive));
            }
        }
    }

    #[test]
    fn switches_only_on_strictly_lower_window_risk() {
        for seed in 0..4 {
            let mut ds = driftsurf(true);
            let (_, transitions) = run(&mut ds, &swap_stream(seed), seed + 10);
            let exits: Vec<&Transition> = transitions.iter().filter(|t| t.from == Some(Phase::Reactive)).collect();
            for t in &exits {
                let lower = t.reactive_risk.unwrap() < t.predictive_risk.unwrap();
                assert_eq!(t.trigger == Trigger::Switch, lower, "{t:?}");
            }
            let switch_near_swap = exits.iter().any(|t| t.trigger == Trigger::Switch && (30..=34).contains(&t.time_step));
            assert!(switch_near_swap, "seed {seed}: {transitions:?}");
        }
    }

    #[test]
    fn new_predictive_model_covers_the_reactive_window() {
        let mut ds = driftsurf(true);
        let stream = swap_stream(7);
        let mut rng = StreamRng::seed_from_u64(8);
        let mut entry = None;
        for b in &stream {
            ds.step(b, &mut rng).unwrap();
            for t in ds.drain_transitions() {
                if t.is_reactive_entry() {
                    entry = Some(t.time_step);
                    assert_eq!(ds.reactive_model().unwrap().segment_start(), t.time_step);
                    assert!(ds.stable_model().is_none());
                }
                if t.trigger == Trigger::Switch {
                    let start = entry.unwrap();
                    assert_eq!(ds.predictive_model().unwrap().segment_start(), start);
                    assert_eq!(ds.best_risk(), f64::INFINITY);
                }
                if t.from == Some(Phase::Reactive) {
                    assert_eq!(ds.stable_model().unwrap().segment_start(), t.time_step + 1);
                    assert_eq!(ds.phase(), Phase::Stable);
                }
            }
        }
        assert!(entry.is_some());
    }

    #[test]
    fn greedy_serves_reactive_model_and_ablation_does_not() {
        let stream = swap_stream(9);
        let mut greedy = driftsurf(true);
        let (outcomes, transitions) = run(&mut greedy, &stream, 2);
        let entry = transitions.iter().find(|t| t.is_reactive_entry()).unwrap().time_step;
        assert!(outcomes[entry + 1..entry + 4].iter().any(|o| o.serving_segment_start == entry));

        let mut plain = driftsurf(false);
        let (outcomes, transitions) = run(&mut plain, &stream, 2);
        for t in transitions.iter().filter(|t| t.is_reactive_entry()) {
            for o in &outcomes[t.time_step..t.time_step + 4] {
                assert!(o.serving_segment_start < t.time_step);
            }
        }
    }

    #[test]
    fn aware_restarts_at_drift_times() {
        let mut aware =
            Aware::new("aware", [30, 60], training(), BudgetPolicy::per_model(2 * M), &mut StreamRng::seed_from_u64(0));
        let (outcomes, transitions) = run(&mut aware, &swap_stream(1), 1);
        assert_eq!(outcomes[59].serving_segment_start, 30);
        assert_eq!(59 - outcomes[59].serving_segment_start, 29);
        assert_eq!(outcomes[60].serving_segment_start, 60);
        assert_eq!(transitions.iter().map(|t| t.time_step).collect::<Vec<_>>(), vec![30, 60]);
    }

    #[test]
    fn aware_without_drifts_matches_oblivious() {
        let stream = swap_stream(2);
        let budget = BudgetPolicy::per_model(2 * M);
        let mut aware = Aware::new("aware", [], training(), budget, &mut StreamRng::seed_from_u64(0));
        let mut obl = Oblivious::new("obl", training(), budget, &mut StreamRng::seed_from_u64(0));
        let (a, _) = run(&mut aware, &stream, 5);
        let (o, _) = run(&mut obl, &stream, 5);
        assert_eq!(a, o);
    }

    #[test]
    fn silent_mddm_matches_oblivious() {
        let stream = swap_stream(2);
        let budget = BudgetPolicy::per_model(2 * M);
        let cfg = MddmConfig { delta: 1e-300, ..MddmConfig::default() };
        let mut mddm = MddmLearner::new("mddm", cfg, training(), budget, &mut StreamRng::seed_from_u64(0));
        let mut obl = Oblivious::new("obl", training(), budget, &mut StreamRng::seed_from_u64(0));
        let (a, transitions) = run(&mut mddm, &stream, 5);
        let (o, _) = run(&mut obl, &stream, 5);
        assert!(transitions.is_empty());
        assert_eq!(a, o);
    }

    #[test]
    fn mddm_resets_after_label_swap() {
        let mut mddm = MddmLearner::new(
            "mddm",
            MddmConfig::default(),
            training(),
            BudgetPolicy::per_model(2 * M),
            &mut StreamRng::seed_from_u64(0),
        );
        let (outcomes, transitions) = run(&mut mddm, &swap_stream(4), 3);
        assert!(transitions.iter().any(|t| (30..=32).contains(&t.time_step)), "{transitions:?}");
        assert!(outcomes.iter().all(|o| o.models_trained == 1 && o.gradients == 2 * M));
    }

    #[test]
    fn aue_single_expert_is_always_the_newest() {
        let mut aue = Aue::new("aue", 1, training(), BudgetPolicy::per_model(2 * M));
        let stream = swap_stream(0);
        let mut rng = StreamRng::seed_from_u64(0);
        for b in &stream[..10] {
            aue.step(b, &mut rng).unwrap();
            assert_eq!(aue.experts().len(), 1);
            assert_eq!(aue.experts()[0].model.segment_start(), b.time_step);
        }
    }

    #[test]
    fn aue_capacity_and_divided_budget() {
        let mut aue = Aue::new("aue", 10, training(), BudgetPolicy::per_algorithm(4 * M));
        let stream = swap_stream(0);
        let mut rng = StreamRng::seed_from_u64(0);
        for b in &stream[..15] {
            let o = aue.step(b, &mut rng).unwrap();
            let live = (b.time_step + 1).min(10);
            assert_eq!(aue.experts().len(), live);
            assert_eq!(o.models_trained, live);
            assert_eq!(o.budgeted, live * (4 * M / live));
            assert_eq!(o.gradients, o.budgeted);
        }
        assert_eq!(aue.step(&stream[15], &mut rng).unwrap().gradients, 10 * 40);
    }

    #[test]
    fn aue_weights_follow_batch_mse() {
        let pts = |labels: &[Label]| {
            Batch::new(
                0,
                labels.iter().enumerate().map(|(i, &l)| LabeledPoint::new(i as u64, vec![1.0], l)).collect(),
            )
        };
        assert_eq!(Aue::random_mse(&pts(&[Label::Pos, Label::Neg])), 0.25);
        assert_eq!(Aue::random_mse(&pts(&[Label::Pos, Label::Pos])), 0.0);
        let mut factory = ModelFactory::new(TrainingConfig { dim: 1, ..training() });
        let zero = factory.fresh(0, &mut StreamRng::seed_from_u64(0));
        // sigma(0) = 1/2 for every point.
        assert_eq!(Aue::expert_mse(&zero, &pts(&[Label::Pos, Label::Neg])), 0.25);
    }

    #[test]
    fn aue_vote_is_weighted_majority() {
        let mut aue = Aue::new("aue", 3, TrainingConfig { dim: 1, ..training() }, BudgetPolicy::per_model(1));
        assert_eq!(aue.predict(&[1.0]), Label::Pos);
        let mut factory = ModelFactory::new(TrainingConfig { dim: 1, ..training() });
        let mut expert = |w: f64, weight: f64| {
            let mut model = factory.fresh(0, &mut StreamRng::seed_from_u64(0));
            model.opt = Optimizer::new(UpdateKind::Sgd, Weights(vec![w]), 0.1, training().loss, 0);
            Expert { model, weight }
        };
        aue.experts = vec![expert(1.0, 1.0), expert(-1.0, 1.0), expert(-1.0, 1.0)];
        assert_eq!(aue.predict(&[1.0]), Label::Neg);
        aue.experts[0].weight = 3.0;
        assert_eq!(aue.predict(&[1.0]), Label::Pos);
    }

    #[test]
    fn one_pass_sgd_uses_m_gradients() {
        let mut sgd = OnePassSgd::new("1pass", training(), &mut StreamRng::seed_from_u64(0));
        let (outcomes, _) = run(&mut sgd, &swap_stream(0), 0);
        assert!(outcomes.iter().all(|o| o.gradients == M && o.budgeted == M && o.models_trained == 1));
    }
}
