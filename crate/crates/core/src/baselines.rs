// SPDX-License-Identifier: Apache-2.0

//! Reference points for the unsupervised methods: zero-shot prediction from
//! the model's own label logits (optionally recalibrated so the predictions
//! are balanced) and a supervised logistic-regression ceiling.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{normalize, ContrastDataset, NormStats};
use crate::math::{dot, norm, sigmoid, softplus, sqrt};
use crate::{Error, Matrix, Result};

fn check_logits(logits_pos: &[f32], logits_neg: &[f32]) -> Result<()> {
    if logits_pos.len() != logits_neg.len() {
        return Err(Error::Dimension {
            expected: logits_pos.len(),
            actual: logits_neg.len(),
        });
    }
    Ok(())
}

/// Label 1 when the "Yes" side has the higher log-probability (ties → 1).
pub fn zero_shot_predict(logits_pos: &[f32], logits_neg: &[f32]) -> Result<Vec<u8>> {
    check_logits(logits_pos, logits_neg)?;
    Ok(logits_pos
        .iter()
        .zip(logits_neg)
        .map(|(p, n)| u8::from(p >= n))
        .collect())
}

/// Zero-shot predictions for a dataset that carries logits.
pub fn zero_shot_dataset(ds: &ContrastDataset) -> Result<Vec<u8>> {
    let (p, n) = ds.logits().ok_or(Error::MissingLogits)?;
    zero_shot_predict(p, n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationModel {
    /// Predict 1 iff `l₊ > l₋ + gamma`.
    pub gamma: f64,
    /// `#1 − #0` of the calibrated predictions on the fitting set. Nonzero
    /// only for odd sizes or when scores tie at `gamma`.
    pub train_imbalance: i64,
}

fn scores(logits_pos: &[f32], logits_neg: &[f32]) -> Vec<f64> {
    logits_pos
        .iter()
        .zip(logits_neg)
        .map(|(&p, &n)| f64::from(p) - f64::from(n))
        .collect()
}

/// Picks `gamma` as the median of `l₊ − l₋` (the midpoint of the two middle
/// order statistics for even sizes), which splits the predictions 50/50.
pub fn calibrate_threshold(logits_pos: &[f32], logits_neg: &[f32]) -> Result<CalibrationModel> {
    check_logits(logits_pos, logits_neg)?;
    let n = logits_pos.len();
    if n < 2 {
        return Err(Error::TooFewExamples { needed: 2, got: n });
    }
    let mut s = scores(logits_pos, logits_neg);
    s.sort_by(f64::total_cmp);
    let gamma = if n % 2 == 0 {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    } else {
        s[n / 2]
    };
    let mut model = CalibrationModel {
        gamma,
        train_imbalance: 0,
    };
    let ones = calibrated_predict(&model, logits_pos, logits_neg)?
        .iter()
        .filter(|&&l| l == 1)
        .count() as i64;
    model.train_imbalance = 2 * ones - n as i64;
    Ok(model)
}

/// Label 1 iff `l₊ > l₋ + γ`; a score exactly at `γ` gets label 0.
pub fn calibrated_predict(
    model: &CalibrationModel,
    logits_pos: &[f32],
    logits_neg: &[f32],
) -> Result<Vec<u8>> {
    check_logits(logits_pos, logits_neg)?;
    Ok(scores(logits_pos, logits_neg)
        .into_iter()
        .map(|s| u8::from(s > model.gamma))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct LrConfig {
    /// Ridge penalty `l2/2 · |w|²` on the weights (not the bias).
    pub l2: f64,
    /// Stop once the gradient norm of the objective falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            l2: 1.0,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

/// Logistic regression on the concatenated normalized pair `(φ̃⁺, φ̃⁻)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LrModel {
    /// Length `2d`: the pos-side weights followed by the neg-side weights.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub norm_stats: NormStats,
    pub converged: bool,
    pub iterations: usize,
}

impl LrModel {
    pub fn d(&self) -> usize {
        self.weights.len() / 2
    }
}

fn features(ds: &ContrastDataset) -> Matrix<f64> {
    let d = ds.d();
    let mut data = Vec::with_capacity(ds.n() * 2 * d);
    for (p, n) in ds.pos().row_iter().zip(ds.neg().row_iter()) {
        data.extend(p.iter().chain(n).map(|&x| f64::from(x)));
    }
    Matrix::new(ds.n(), 2 * d, data).expect("2d columns")
}

struct Objective<'a> {
    x: &'a Matrix<f64>,
    y: Vec<f64>,
    l2: f64,
}

impl Objective<'_> {
    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        self.x.mul_vec(w).into_iter().map(|z| z + b).collect()
    }

    fn value(&self, w: &[f64], b: f64) -> f64 {
        let z = self.margins(w, b);
        let nll: f64 = z
            .iter()
            .zip(&self.y)
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum();
        nll + 0.5 * self.l2 * dot(w, w)
    }

    /// Gradient (bias last) and the per-example curvature `σ(1 − σ)`.
    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, Vec<f64>) {
        let z = self.margins(w, b);
        let r: Vec<f64> = z.iter().zip(&self.y).map(|(&z, &y)| sigmoid(z) - y).collect();
        let s: Vec<f64> = z
            .iter()
            .map(|&z| {
                let p = sigmoid(z);
                p * (1.0 - p)
            })
            .collect();
        let mut g = self.x.tr_mul_vec(&r);
        for (gi, wi) in g.iter_mut().zip(w) {
            *gi += self.l2 * wi;
        }
        g.push(r.iter().sum());
        (g, s)
    }

    fn hess_vec(&self, s: &[f64], v: &[f64]) -> Vec<f64> {
        let (vw, vb) = v.split_at(v.len() - 1);
        let xv: Vec<f64> = self
            .x
            .mul_vec(vw)
            .into_iter()
            .zip(s)
            .map(|(z, &si)| si * (z + vb[0]))
            .collect();
        let mut out = self.x.tr_mul_vec(&xv);
        for (o, &vi) in out.iter_mut().zip(vw) {
            *o += self.l2 * vi;
        }
        out.push(xv.iter().sum());
        out
    }
}

/// Conjugate gradients for `H p = rhs` with `H` given as a product.
fn conjugate_gradient(hv: impl Fn(&[f64]) -> Vec<f64>, rhs: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let mut x = alloc::vec![0.0; rhs.len()];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if sqrt(rr) <= tol {
            break;
        }
        let hp = hv(&p);
        let php = dot(&p, &hp);
        if !(php > 0.0) {
            break;
        }
        let alpha = rr / php;
        for ((xi, ri), (pi, hpi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&hp)) {
            *xi += alpha * pi;
            *ri -= alpha * hpi;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    x
}

/// Fits the supervised ceiling by truncated Newton (Newton-CG with an Armijo
/// line search). `train` must be normalized and labeled. The optimizer is
/// deterministic.
pub fn train_lr(train: &ContrastDataset, cfg: &LrConfig) -> Result<LrModel> {
    if !train.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let labels = train.require_labels()?;
    if train.n() == 0 {
        return Err(Error::Empty);
    }
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) || !(cfg.tol > 0.0) {
        return Err(Error::Config(String::from(
            "l2 must be >= 0 and tol must be > 0",
        )));
    }
    let x = features(train);
    let obj = Objective {
        x: &x,
        y: labels.iter().map(|&l| f64::from(l)).collect(),
        l2: cfg.l2,
    };
    let p = x.cols() + 1;
    let mut params = alloc::vec![0.0; p];
    let mut f = obj.value(&params[..p - 1], 0.0);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let (w, b) = params.split_at(p - 1);
        let (g, s) = obj.gradient(w, b[0]);
        let gnorm = norm(&g);
        if !gnorm.is_finite() {
            return Err(Error::NonFinite("logistic regression gradient"));
        }
        if gnorm < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
        let cg_tol = gnorm * sqrt(gnorm).min(0.5);
        let step = conjugate_gradient(|v| obj.hess_vec(&s, v), &neg_g, cg_tol, 2 * p + 10);
        let slope = dot(&g, &step);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = params.iter().zip(&step).map(|(x, s)| x + alpha * s).collect();
            let ft = obj.value(&trial[..p - 1], trial[p - 1]);
            if ft <= f + 1e-4 * alpha * slope {
                params = trial;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No further decrease representable; the gradient is as small
            // as it will get.
            let (w, b) = params.split_at(p - 1);
            converged = norm(&obj.gradient(w, b[0]).0) < cfg.tol;
            break;
        }
    }
    let bias = params.pop().unwrap_or(0.0);
    Ok(LrModel {
        weights: params,
        bias,
        norm_stats: train
            .norm_stats()
            .cloned()
            .unwrap_or_else(|| NormStats::identity(train.d())),
        converged,
        iterations,
    })
}

/// Label 1 iff `w·(φ̃⁺, φ̃⁻) + b ≥ 0`. Raw datasets are normalized with the
/// model's statistics first.
pub fn lr_predict(model: &LrModel, ds: &ContrastDataset) -> Result<Vec<u8>> {
    if ds.d() != model.d() {
        return Err(Error::Dimension {
            expected: model.d(),
            actual: ds.d(),
        });
    }
    let owned;
    let ds = if ds.is_normalized() {
        ds
    } else {
        owned = normalize(ds, &model.norm_stats)?;
        &owned
    };
    Ok(features(ds)
        .mul_vec(&model.weights)
        .into_iter()
        .map(|z| u8::from(z + model.bias >= 0.0))
        .collect())
}
