//! L2-regularized logistic regression over dense features.

use serde::{Deserialize, Serialize};

use crate::data::{Label, LabeledPoint, PointRef};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Weights(pub Vec<f64>);

impl Weights {
    pub fn zeros(dim: usize) -> Self {
        Weights(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(dot(&self.0, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// L2 regularization coefficient, strictly positive.
    pub mu: f64,
}

impl LossConfig {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::config("mu", format!("must be > 0, got {mu}")));
        }
        Ok(Self { mu })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Logistic,
    ZeroOne,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z <= 0.0 {
        z.exp().ln_1p()
    } else {
        z + (-z).exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sign of the linear score; ties go to +1.
pub fn predict(w: &Weights, x: &[f64]) -> Result<Label> {
    Ok(Label::from_bool(w.dot(x)? >= 0.0))
}

/// `log(1 + exp(-y w.x)) + mu/2 |w|^2`
pub fn point_loss(w: &Weights, p: &LabeledPoint, cfg: &LossConfig) -> Result<f64> {
    let margin = p.label.sign() * w.dot(&p.features)?;
    Ok(softplus(-margin) + 0.5 * cfg.mu * w.norm_sq())
}

/// Scalar `c` such that the data term of the gradient is `c * x`.
#[inline]
pub(crate) fn gradient_scale(w: &[f64], p: &LabeledPoint) -> f64 {
    let y = p.label.sign();
    -y * sigmoid(-y * dot(w, &p.features))
}

/// `-y x sigma(-y w.x) + mu w`
pub fn point_gradient(w: &Weights, p: &LabeledPoint, cfg: &LossConfig) -> Result<Vec<f64>> {
    check_dim(w.dim(), p.dim())?;
    let mut g = vec![0.0; w.dim()];
    point_gradient_into(&w.0, p, cfg.mu, &mut g);
    Ok(g)
}

/// Unchecked gradient kernel used by the optimizers.
#[inline]
pub(crate) fn point_gradient_into(w: &[f64], p: &LabeledPoint, mu: f64, out: &mut [f64]) {
    let c = gradient_scale(w, p);
    for ((o, &xi), &wi) in out.iter_mut().zip(&p.features).zip(w) {
        *o = c * xi + mu * wi;
    }
}

/// Mean loss (logistic) or misclassification rate (zero-one) over `pts`.
pub fn segment_risk<'a, I>(w: &Weights, pts: I, cfg: &LossConfig, kind: RiskKind) -> Result<f64>
where
    I: IntoIterator<Item = &'a PointRef>,
{
    let mut total = 0.0;
    let mut n = 0usize;
    let reg = 0.5 * cfg.mu * w.norm_sq();
    for p in pts {
        let score = w.dot(&p.features)?;
        total += match kind {
            RiskKind::Logistic => softplus(-p.label.sign() * score) + reg,
            RiskKind::ZeroOne => {
                if Label::from_bool(score >= 0.0) == p.label {
                    0.0
                } else {
                    1.0
                }
            }
        };
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("compute risk"));
    }
    Ok(total / n as f64)
}

/// Full gradient of the mean logistic risk.
pub fn risk_gradient<'a, I>(w: &Weights, pts: I, cfg: &LossConfig) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a PointRef>,
{
    let mut g = vec![0.0; w.dim()];
    let mut n = 0usize;
    for p in pts {
        check_dim(w.dim(), p.dim())?;
        let c = gradient_scale(&w.0, p);
        for (gi, &xi) in g.iter_mut().zip(&p.features) {
            *gi += c * xi;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("compute gradient"));
    }
    let inv = 1.0 / n as f64;
    for (gi, &wi) in g.iter_mut().zip(&w.0) {
        *gi = *gi * inv + cfg.mu * wi;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn pt(x: Vec<f64>, y: Label) -> LabeledPoint {
        LabeledPoint::new(0, x, y)
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&Weights::zeros(2), &[-3.0, 4.0]).unwrap(), Label::Pos);
        assert_eq!(predict(&Weights(vec![1.0, 0.0]), &[-2.0, 5.0]).unwrap(), Label::Neg);
        assert_eq!(predict(&Weights(vec![1.0, 1.0]), &[0.5, 0.5]).unwrap(), Label::Pos);
        assert!(predict(&Weights(vec![1.0]), &[0.5, 0.5]).is_err());
    }

    #[test]
    fn loss_examples() {
        let cfg = LossConfig::new(0.3).unwrap();
        let l = point_loss(&Weights::zeros(2), &pt(vec![4.0, -1.0], Label::Neg), &cfg).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);

        // log(1 + e^2) + 0.005, evaluated independently in f64.
        let cfg = LossConfig::new(0.01).unwrap();
        let l = point_loss(&Weights(vec![1.0, 0.0]), &pt(vec![2.0, 0.0], Label::Neg), &cfg).unwrap();
        assert!((l - 2.131_928_011_042_972_6).abs() < 1e-12, "{l}");

        // Large margins: no overflow, loss tends to the regularizer.
        let w = Weights(vec![1e3, 0.0]);
        let big = point_loss(&w, &pt(vec![1e3, 0.0], Label::Pos), &cfg).unwrap();
        assert!((big - 0.005 * 1e6).abs() < 1e-9);
        let bad = point_loss(&w, &pt(vec![1e3, 0.0], Label::Neg), &cfg).unwrap();
        assert!(bad.is_finite() && (bad - (1e6 + 0.005 * 1e6)).abs() < 1e-6);
    }

    #[test]
    fn gradient_examples() {
        let cfg = LossConfig::new(0.5).unwrap();
        let g = point_gradient(&Weights::zeros(2), &pt(vec![2.0, -4.0], Label::Pos), &cfg).unwrap();
        assert_eq!(g, vec![-1.0, 2.0]);
        let g = point_gradient(&Weights(vec![0.2, -0.4]), &pt(vec![0.0, 0.0], Label::Neg), &cfg).unwrap();
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_one_risk_of_constant_predictor() {
        let cfg = LossConfig::new(0.1).unwrap();
        let pts: Vec<PointRef> = [Label::Pos, Label::Neg, Label::Neg, Label::Pos, Label::Neg]
            .into_iter()
            .map(|y| Arc::new(pt(vec![1.0, 2.0], y)))
            .collect();
        let w = Weights::zeros(2);
        assert!((segment_risk(&w, &pts, &cfg, RiskKind::ZeroOne).unwrap() - 0.6).abs() < 1e-15);
        let lr = segment_risk(&w, &pts, &cfg, RiskKind::Logistic).unwrap();
        assert!((lr - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn separator_has_zero_risk() {
        let cfg = LossConfig::new(0.1).unwrap();
        let pts: Vec<PointRef> = vec![
            Arc::new(pt(vec![1.0, 0.2], Label::Pos)),
            Arc::new(pt(vec![2.0, -0.3], Label::Pos)),
            Arc::new(pt(vec![-1.0, 0.1], Label::Neg)),
        ];
        let w = Weights(vec![1.0, 0.0]);
        assert_eq!(segment_risk(&w, &pts, &cfg, RiskKind::ZeroOne).unwrap(), 0.0);
        let empty: Vec<PointRef> = vec![];
        assert!(segment_risk(&w, &empty, &cfg, RiskKind::ZeroOne).is_err());
    }

    fn finite_difference(w: &[f64], p: &LabeledPoint, cfg: &LossConfig, h: f64) -> Vec<f64> {
        (0..w.len())
            .map(|i| {
                let mut plus = w.to_vec();
                let mut minus = w.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let lp = point_loss(&Weights(plus), p, cfg).unwrap();
                let lm = point_loss(&Weights(minus), p, cfg).unwrap();
                (lp - lm) / (2.0 * h)
            })
            .collect()
    }

    fn case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, bool, f64)> {
        (1usize..6).prop_flat_map(|d| {
            (
                prop::collection::vec(-2.0f64..2.0, d),
                prop::collection::vec(-2.0f64..2.0, d),
                any::<bool>(),
                1e-4f64..1.0,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_matches_finite_differences((w, x, pos, mu) in case()) {
            let cfg = LossConfig::new(mu).unwrap();
            let p = pt(x, Label::from_bool(pos));
            let g = point_gradient(&Weights(w.clone()), &p, &cfg).unwrap();
            let fd = finite_difference(&w, &p, &cfg, 1e-6);
            let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-3);
            prop_assert!(num / den < 1e-5, "rel err {}", num / den);
        }

        #[test]
        fn loss_bounded_below_by_regularizer((w, x, pos, mu) in case()) {
            let cfg = LossConfig::new(mu).unwrap();
            let w = Weights(w);
            let l = point_loss(&w, &pt(x, Label::from_bool(pos)), &cfg).unwrap();
            prop_assert!(l >= 0.5 * mu * w.norm_sq());
            prop_assert!(l >= 0.0);
        }

        #[test]
        fn logistic_risk_is_convex(
            (w1, x, _pos, mu) in case(),
            seed in any::<u64>(),
            lambda in 0.0f64..1.0,
        ) {
            use rand::{Rng, SeedableRng};
            let d = w1.len();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w2: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let pts: Vec<PointRef> = (0..8)
                .map(|i| {
                    let f: Vec<f64> = x.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
                    Arc::new(LabeledPoint::new(i, f, Label::from_bool(rng.random())))
                })
                .collect();
            let cfg = LossConfig::new(mu).unwrap();
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let r = |w: &[f64]| segment_risk(&Weights(w.to_vec()), &pts, &cfg, RiskKind::Logistic).unwrap();
            prop_assert!(r(&mix) <= lambda * r(&w1) + (1.0 - lambda) * r(&w2) + 1e-12);
        }
    }
}
