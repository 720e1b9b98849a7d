// SPDX-License-Identifier: Apache-2.0

//! Contrast-consistent search.
//!
//! A probe `p(φ̃) = σ(θᵀφ̃ + b)` is trained without labels so that, for each
//! pair, `p(x⁺)` agrees with `1 − p(x⁻)` (consistency) and the smaller of the
//! two is close to zero (confidence). The constant probe `p ≡ 0.5` is
//! perfectly consistent but pays `0.25` in confidence, which is what rules
//! that solution out.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{normalize, ContrastDataset, NormStats};
use crate::exec::{Executor, Sequential};
use crate::math::{dot, sigmoid};
use crate::optim::AdamW;
use crate::{rng, Error, Matrix, Result, Sign};

/// Probabilities are kept inside `[P_MIN, 1 - P_MIN]` when computing the loss.
pub const P_MIN: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Probe {
    pub theta: Vec<f64>,
    pub bias: f64,
    pub sign: Sign,
    /// Statistics applied to raw activations before the probe sees them.
    pub norm_stats: NormStats,
}

impl Probe {
    /// A probe with identity normalization and positive orientation.
    pub fn new(theta: Vec<f64>, bias: f64) -> Self {
        let d = theta.len();
        Self {
            theta,
            bias,
            sign: Sign::Positive,
            norm_stats: NormStats::identity(d),
        }
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.iter().all(|x| x.is_finite()) || !self.bias.is_finite() {
            return Err(Error::NonFinite("probe parameters"));
        }
        if self.norm_stats.d() != self.d() {
            return Err(Error::Dimension {
                expected: self.d(),
                actual: self.norm_stats.d(),
            });
        }
        self.norm_stats.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OptimizerKind {
    #[default]
    AdamW,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TrainConfig {
    pub restarts: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            epochs: 1000,
            learning_rate: 0.01,
            weight_decay: 0.0,
            seed: 0,
            optimizer: OptimizerKind::AdamW,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config(String::from("restarts must be >= 1")));
        }
        if self.epochs == 0 {
            return Err(Error::Config(String::from("epochs must be >= 1")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(String::from("learning_rate must be > 0")));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(String::from("weight_decay must be >= 0")));
        }
        Ok(())
    }
}

/// Components of the unsupervised loss, each averaged over pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub consistency: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    /// `½(p(x⁺) + 1 − p(x⁻))` per example.
    pub p_tilde: Vec<f64>,
    pub hard: Vec<u8>,
    /// Unsupervised loss of the probe on the evaluated set.
    pub probe_loss: f64,
}

/// `σ(θᵀφ̃ + b)` for one normalized activation vector.
pub fn probe_forward(probe: &Probe, phi_tilde: &[f32]) -> Result<f64> {
    if phi_tilde.len() != probe.d() {
        return Err(Error::Dimension {
            expected: probe.d(),
            actual: phi_tilde.len(),
        });
    }
    Ok(sigmoid(logit(&probe.theta, probe.bias, phi_tilde)))
}

fn logit(theta: &[f64], bias: f64, x: &[f32]) -> f64 {
    theta
        .iter()
        .zip(x)
        .map(|(t, &v)| t * f64::from(v))
        .sum::<f64>()
        + bias
}

/// A normalized batch widened to f64 once, for repeated loss evaluations.
struct Pairs {
    pos: Matrix<f64>,
    neg: Matrix<f64>,
}

impl Pairs {
    fn new(batch: &ContrastDataset, d: usize) -> Result<Self> {
        if !batch.is_normalized() {
            return Err(Error::NotNormalized);
        }
        if batch.n() == 0 {
            return Err(Error::Empty);
        }
        if batch.d() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: batch.d(),
            });
        }
        Ok(Self {
            pos: batch.pos().to_f64(),
            neg: batch.neg().to_f64(),
        })
    }

    fn n(&self) -> usize {
        self.pos.rows()
    }

    fn d(&self) -> usize {
        self.pos.cols()
    }

    /// Loss at `(theta, bias)`. When `grad` is given (length `d + 1`, bias
    /// last) it is overwritten with the gradient of `total`.
    fn loss(&self, theta: &[f64], bias: f64, mut grad: Option<&mut [f64]>) -> LossParts {
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut cons = 0.0;
        let mut conf = 0.0;
        for (xp, xn) in self.pos.row_iter().zip(self.neg.row_iter()) {
            let (a, da) = clamped_sigmoid(dot(theta, xp) + bias);
            let (c, dc) = clamped_sigmoid(dot(theta, xn) + bias);
            let gap = a + c - 1.0;
            cons += gap * gap;
            // Ties go to the pos side.
            let pos_is_min = a <= c;
            let m = if pos_is_min { a } else { c };
            conf += m * m;
            if let Some(g) = grad.as_deref_mut() {
                let mut ga = 2.0 * gap;
                let mut gc = 2.0 * gap;
                if pos_is_min {
                    ga += 2.0 * a;
                } else {
                    gc += 2.0 * c;
                }
                let wp = ga * da;
                let wn = gc * dc;
                let (gt, gb) = g.split_at_mut(theta.len());
                for ((o, &p), &q) in gt.iter_mut().zip(xp).zip(xn) {
                    *o += wp * p + wn * q;
                }
                gb[0] += wp + wn;
            }
        }
        let n = self.n() as f64;
        if let Some(g) = grad {
            g.iter_mut().for_each(|x| *x /= n);
        }
        let consistency = cons / n;
        let confidence = conf / n;
        LossParts {
            total: consistency + confidence,
            consistency,
            confidence,
        }
    }
}

/// Clamped probability and its derivative with respect to the logit (zero
/// where the clamp is active).
fn clamped_sigmoid(z: f64) -> (f64, f64) {
    let p = sigmoid(z);
    if p < P_MIN {
        (P_MIN, 0.0)
    } else if p > 1.0 - P_MIN {
        (1.0 - P_MIN, 0.0)
    } else {
        (p, p * (1.0 - p))
    }
}

pub fn ccs_loss(probe: &Probe, batch: &ContrastDataset) -> Result<LossParts> {
    let pairs = Pairs::new(batch, probe.d())?;
    Ok(pairs.loss(&probe.theta, probe.bias, None))
}

/// Gradient of the total loss with respect to `(θ, b)`.
pub fn ccs_grad(probe: &Probe, batch: &ContrastDataset) -> Result<(Vec<f64>, f64)> {
    let pairs = Pairs::new(batch, probe.d())?;
    let mut g = alloc::vec![0.0; probe.d() + 1];
    pairs.loss(&probe.theta, probe.bias, Some(&mut g));
    let bias = g.pop().unwrap_or(0.0);
    Ok((g, bias))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedProbe {
    pub probe: Probe,
    /// Unsupervised loss of the selected restart on the training set.
    pub loss: f64,
    /// Index of the selected restart.
    pub restart: usize,
    /// Restarts discarded because their loss became non-finite.
    pub diverged: Vec<usize>,
}

/// Trains with [`Sequential`] restarts.
pub fn train_ccs(train: &ContrastDataset, cfg: &TrainConfig) -> Result<TrainedProbe> {
    train_ccs_with(train, cfg, &Sequential)
}

/// Runs `cfg.restarts` independent restarts and keeps the one with the
/// lowest final loss (lowest index on ties). Restart `r` draws its
/// initialization from the stream `cfg.seed + r`, so the result does not
/// depend on how `exec` schedules restarts.
pub fn train_ccs_with<E: Executor>(
    train: &ContrastDataset,
    cfg: &TrainConfig,
    exec: &E,
) -> Result<TrainedProbe> {
    cfg.validate()?;
    let pairs = Pairs::new(train, train.d())?;
    let outcomes = exec.map(cfg.restarts, |r| run_restart(&pairs, cfg, r));

    let mut diverged = Vec::new();
    let mut best: Option<(usize, Vec<f64>, f64, f64)> = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Some((theta, bias, loss)) => {
                if best.as_ref().map_or(true, |b| loss < b.3) {
                    best = Some((r, theta, bias, loss));
                }
            }
            None => diverged.push(r),
        }
    }
    let (restart, theta, bias, loss) = best.ok_or(Error::AllRestartsFailed(cfg.restarts))?;
    let mut probe = Probe::new(theta, bias);
    if let Some(stats) = train.norm_stats() {
        probe.norm_stats = stats.clone();
    }
    Ok(TrainedProbe {
        probe,
        loss,
        restart,
        diverged,
    })
}

fn run_restart(pairs: &Pairs, cfg: &TrainConfig, restart: usize) -> Option<(Vec<f64>, f64, f64)> {
    let d = pairs.d();
    // The bias is treated as one more coordinate of a unit-norm parameter
    // vector, as if the inputs had an extra constant feature.
    let mut params = rng::unit_vector(&mut rng::substream(cfg.seed, restart as u64), d + 1);
    let mut grad = alloc::vec![0.0; d + 1];
    let mut opt = match cfg.optimizer {
        OptimizerKind::AdamW => AdamW::new(cfg.learning_rate, cfg.weight_decay, d + 1),
    };
    for _ in 0..cfg.epochs {
        let (theta, bias) = params.split_at(d);
        let l = pairs.loss(theta, bias[0], Some(&mut grad));
        if !l.total.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            return None;
        }
        opt.step(&mut params, &grad);
    }
    let (theta, bias) = params.split_at(d);
    let loss = pairs.loss(theta, bias[0], None).total;
    if !loss.is_finite() || !params.iter().all(|x| x.is_finite()) {
        return None;
    }
    Some((theta.to_vec(), bias[0], loss))
}

/// Averages the two views of each pair into one probability that the
/// answer is "Yes", and thresholds it at 0.5 (`p̃ = 0.5` maps to label 1).
/// Raw datasets are first normalized with the probe's statistics.
pub fn predict(probe: &Probe, ds: &ContrastDataset) -> Result<PredictionSet> {
    if ds.d() != probe.d() {
        return Err(Error::Dimension {
            expected: probe.d(),
            actual: ds.d(),
        });
    }
    let owned;
    let ds = if ds.is_normalized() {
        ds
    } else {
        owned = normalize(ds, &probe.norm_stats)?;
        &owned
    };
    let mut p_tilde = Vec::with_capacity(ds.n());
    let mut hard = Vec::with_capacity(ds.n());
    let s = probe.sign.as_f64();
    for (xp, xn) in ds.pos().row_iter().zip(ds.neg().row_iter()) {
        let a = sigmoid(logit(&probe.theta, probe.bias, xp));
        let b = sigmoid(logit(&probe.theta, probe.bias, xn));
        let pt = 0.5 * (a + (1.0 - b));
        p_tilde.push(pt);
        hard.push(u8::from(s * (pt - 0.5) >= 0.0));
    }
    let probe_loss = ccs_loss(probe, ds)?.total;
    Ok(PredictionSet {
        p_tilde,
        hard,
        probe_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{normalize_self, NormOptions};
    use alloc::vec;

    fn normalized(pos: &[&[f32]], neg: &[&[f32]]) -> ContrastDataset {
        ContrastDataset::new(
            Matrix::from_rows(pos).unwrap(),
            Matrix::from_rows(neg).unwrap(),
        )
        .unwrap()
        .mark_normalized(None)
    }

    #[test]
    fn forward_values() {
        let zero = Probe::new(vec![0.0; 3], 0.0);
        assert_eq!(probe_forward(&zero, &[1.0, -2.0, 7.0]).unwrap(), 0.5);
        let e1 = Probe::new(vec![1.0, 0.0], 0.0);
        let p = probe_forward(&e1, &[libm::log(3.0) as f32, 0.0]).unwrap();
        assert!((p - 0.75).abs() < 1e-7);
        assert!(matches!(
            probe_forward(&e1, &[1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn single_pair_loss() {
        // θ = e₁, b = 0 and logits ln 9 / −ln 9 give p⁺ = 0.9, p⁻ = 0.1.
        let l9 = libm::log(9.0) as f32;
        let batch = normalized(&[&[l9]], &[&[-l9]]);
        let l = ccs_loss(&Probe::new(vec![1.0], 0.0), &batch).unwrap();
        assert!(l.consistency.abs() < 1e-12);
        assert!((l.confidence - 0.01).abs() < 1e-7);
        assert!((l.total - 0.01).abs() < 1e-7);
    }

    #[test]
    fn loss_requires_normalized_nonempty() {
        let raw = ContrastDataset::new(
            Matrix::from_rows(&[[1.0f32]]).unwrap(),
            Matrix::from_rows(&[[1.0f32]]).unwrap(),
        )
        .unwrap();
        let p = Probe::new(vec![0.0], 0.0);
        assert_eq!(ccs_loss(&p, &raw), Err(Error::NotNormalized));
        let empty = ContrastDataset::new(
            Matrix::new(0, 1, vec![]).unwrap(),
            Matrix::new(0, 1, vec![]).unwrap(),
        )
        .unwrap()
        .mark_normalized(None);
        assert_eq!(ccs_loss(&p, &empty), Err(Error::Empty));
    }

    #[test]
    fn tie_goes_to_pos_side() {
        let batch = normalized(&[&[1.0, 0.0]], &[&[0.0, 1.0]]);
        // θ = (1, 1): both sides have the same logit, so p⁺ = p⁻.
        let probe = Probe::new(vec![1.0, 1.0], 0.0);
        let (g, gb) = ccs_grad(&probe, &batch).unwrap();
        let p = sigmoid(1.0);
        let s = p * (1.0 - p);
        let cons = 2.0 * (2.0 * p - 1.0);
        assert!((g[0] - (cons + 2.0 * p) * s).abs() < 1e-12);
        assert!((g[1] - cons * s).abs() < 1e-12);
        assert!((gb - (2.0 * cons + 2.0 * p) * s).abs() < 1e-12);
    }

    #[test]
    fn prediction_rule() {
        // p⁺ = 0.8, p⁻ = 0.3 → p̃ = 0.75.
        let z = |p: f64| libm::log(p / (1.0 - p)) as f32;
        let ds = normalized(&[&[z(0.8)]], &[&[z(0.3)]]);
        let mut probe = Probe::new(vec![1.0], 0.0);
        let out = predict(&probe, &ds).unwrap();
        assert!((out.p_tilde[0] - 0.75).abs() < 1e-7);
        assert_eq!(out.hard, vec![1]);
        probe.sign = Sign::Negative;
        assert_eq!(predict(&probe, &ds).unwrap().hard, vec![0]);
    }

    #[test]
    fn exact_half_is_label_one() {
        let ds = normalized(&[&[1.0]], &[&[1.0]]);
        let mut probe = Probe::new(vec![0.0], 0.0);
        assert_eq!(predict(&probe, &ds).unwrap().hard, vec![1]);
        probe.sign = Sign::Negative;
        assert_eq!(predict(&probe, &ds).unwrap().hard, vec![1]);
    }

    #[test]
    fn raw_input_uses_probe_stats() {
        let raw = ContrastDataset::new(
            Matrix::from_rows(&[[1.0f32], [3.0]]).unwrap(),
            Matrix::from_rows(&[[0.0f32], [2.0]]).unwrap(),
        )
        .unwrap();
        let z = normalize_self(&raw, NormOptions::default()).unwrap();
        let mut probe = Probe::new(vec![2.0], 0.1);
        probe.norm_stats = z.norm_stats().unwrap().clone();
        assert_eq!(predict(&probe, &raw).unwrap(), predict(&probe, &z).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn separable_pairs_train_below_degenerate_loss() {
        let pos: Vec<[f32; 2]> = (0..20)
            .map(|i| if i % 2 == 0 { [1.0, 0.3] } else { [-1.0, -0.2] })
            .collect();
        let neg: Vec<[f32; 2]> = pos.iter().map(|r| [-r[0], r[1]]).collect();
        let ds = ContrastDataset::new(
            Matrix::from_rows(&pos).unwrap(),
            Matrix::from_rows(&neg).unwrap(),
        )
        .unwrap();
        let z = normalize_self(&ds, NormOptions::default()).unwrap();
        let cfg = TrainConfig {
            restarts: 3,
            epochs: 300,
            learning_rate: 0.05,
            ..Default::default()
        };
        let fit = train_ccs(&z, &cfg).unwrap();
        assert!(fit.loss < 0.05, "loss {}", fit.loss);
        assert!(fit.diverged.is_empty());
        assert_eq!(train_ccs(&z, &cfg).unwrap(), fit);
    }
}
