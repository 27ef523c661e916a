//! McDiarmid drift detection (MDDM) over a sliding window of prediction
//! outcomes, with arithmetic, geometric and Euler weighting.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `w_i = 1 + (i - 1) d`
    Arithmetic { d: f64 },
    /// `w_i = r^(i - 1)`
    Geometric { r: f64 },
    /// `w_i = exp(lambda (i - 1))`
    Euler { lambda: f64 },
}

impl WeightScheme {
    pub const ARITHMETIC: WeightScheme = WeightScheme::Arithmetic { d: 0.01 };
    pub const GEOMETRIC: WeightScheme = WeightScheme::Geometric { r: 1.01 };
    pub const EULER: WeightScheme = WeightScheme::Euler { lambda: 0.01 };

    /// Normalized weights, oldest slot first.
    pub fn normalized(&self, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n)
            .map(|i| {
                let i = i as f64;
                match *self {
                    WeightScheme::Arithmetic { d } => 1.0 + i * d,
                    WeightScheme::Geometric { r } => r.powf(i),
                    WeightScheme::Euler { lambda } => (lambda * i).exp(),
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    NoDrift,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MddmConfig {
    pub window: usize,
    pub delta: f64,
    pub scheme: WeightScheme,
}

impl Default for MddmConfig {
    fn default() -> Self {
        Self { window: 100, delta: 1e-6, scheme: WeightScheme::GEOMETRIC }
    }
}

impl MddmConfig {
    pub fn with_scheme(scheme: WeightScheme) -> Self {
        Self { scheme, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Mddm {
    config: MddmConfig,
    weights: Vec<f64>,
    epsilon: f64,
    window: VecDeque<bool>,
    best_mean: f64,
}

impl Mddm {
    pub fn new(config: MddmConfig) -> Self {
        let weights = config.scheme.normalized(config.window);
        let sum_sq: f64 = weights.iter().map(|v| v * v).sum();
        let epsilon = (sum_sq / 2.0 * (1.0 / config.delta).ln()).sqrt();
        Self {
            config,
            weights,
            epsilon,
            window: VecDeque::with_capacity(config.window),
            best_mean: f64::NEG_INFINITY,
        }
    }

    /// The McDiarmid threshold `sqrt(sum v_i^2 / 2 * ln(1 / delta))`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn config(&self) -> &MddmConfig {
        &self.config
    }

    pub fn best_mean(&self) -> f64 {
        self.best_mean
    }

    /// Weighted mean of the window, most recent outcome weighted highest.
    pub fn weighted_mean(&self) -> Option<f64> {
        (self.window.len() == self.config.window).then(|| {
            self.window
                .iter()
                .zip(&self.weights)
                .filter(|(&bit, _)| bit)
                .map(|(_, w)| w)
                .sum()
        })
    }

    /// Feeds one outcome (`true` = correct prediction).
    pub fn update(&mut self, correct: bool) -> Signal {
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back(correct);
        let Some(mean) = self.weighted_mean() else {
            return Signal::NoDrift;
        };
        self.best_mean = self.best_mean.max(mean);
        if self.best_mean - mean >= self.epsilon {
            self.reset();
            Signal::Drift
        } else {
            Signal::NoDrift
        }
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.best_mean = f64::NEG_INFINITY;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_threshold() {
        // weights all equal: Arithmetic with d = 0
        let det = Mddm::new(MddmConfig { scheme: WeightScheme::Arithmetic { d: 0.0 }, ..Default::default() });
        assert!((det.epsilon() - 0.262_826_088_487_846_6).abs() < 1e-12);
    }

    #[test]
    fn weights_normalized_and_increasing() {
        for scheme in [WeightScheme::ARITHMETIC, WeightScheme::GEOMETRIC, WeightScheme::EULER] {
            let v = scheme.normalized(100);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.windows(2).all(|w| w[1] > w[0]));
        }
        let g = WeightScheme::GEOMETRIC.normalized(3);
        assert!((g[1] / g[0] - 1.01).abs() < 1e-12);
    }

    #[test]
    fn all_correct_never_signals() {
        let mut det = Mddm::new(MddmConfig::default());
        for _ in 0..10_000 {
            assert_eq!(det.update(true), Signal::NoDrift);
        }
    }

    #[test]
    fn detects_run_of_errors() {
        // Geometric r = 1.01: epsilon ~ 0.27328; the newest 19 slots carry
        // just over that much weight, so the 19th error signals.
        let mut det = Mddm::new(MddmConfig::default());
        for _ in 0..100 {
            assert_eq!(det.update(true), Signal::NoDrift);
        }
        let first = (1..=100).find(|_| det.update(false) == Signal::Drift);
        assert_eq!(first, Some(19));
    }

    #[test]
    fn no_test_before_window_full() {
        let mut det = Mddm::new(MddmConfig::default());
        for _ in 0..99 {
            assert_eq!(det.update(false), Signal::NoDrift);
        }
        assert!(det.weighted_mean().is_none());
    }

    #[test]
    fn reset_forgets_history() {
        let mut a = Mddm::new(MddmConfig::default());
        for _ in 0..100 {
            a.update(true);
        }
        a.reset();
        let mut b = Mddm::new(MddmConfig::default());
        let bits = (0..300).map(|i| i % 7 != 0 && i < 150);
        for bit in bits {
            assert_eq!(a.update(bit), b.update(bit));
        }
    }
}
