// SPDX-License-Identifier: Apache-2.0

//! Contrastive representation clustering.
//!
//! Both methods work on the differences `c_i = φ̃(x_i⁺) − φ̃(x_i⁻)` of a
//! normalized dataset and split them into two clusters by the sign of their
//! projection on a unit direction. TPC takes the top principal component;
//! BSS searches for the direction whose projections look most bimodal,
//! minimizing
//!
//! ```text
//! L(θ) = [var{θᵀc | θᵀc < 0} + var{θᵀc | θᵀc ≥ 0}] / var{θᵀc}
//! ```
//!
//! over the unit sphere. All variances are population variances.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::ContrastDataset;
use crate::exec::{Executor, Sequential};
use crate::linalg::{top_eigenpair_dense, top_eigenpair_power};
use crate::math::{mean_var, norm};
use crate::optim::AdamW;
use crate::{rng, Error, Matrix, Result, Sign};

/// Above this size the covariance is not formed explicitly.
const DENSE_LIMIT: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastDifferences {
    pub c: Matrix<f64>,
    pub centered: bool,
}

impl ContrastDifferences {
    pub fn from_matrix(c: Matrix<f64>) -> Result<Self> {
        if !c.all_finite() {
            return Err(Error::NonFinite("contrast differences"));
        }
        Ok(Self { c, centered: false })
    }

    pub fn n(&self) -> usize {
        self.c.rows()
    }

    pub fn d(&self) -> usize {
        self.c.cols()
    }

    pub fn projections(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.d() {
            return Err(Error::Dimension {
                expected: self.d(),
                actual: v.len(),
            });
        }
        Ok(self.c.mul_vec(v))
    }

    /// Copy with the column means removed.
    pub fn centered(&self) -> Self {
        let n = self.n().max(1) as f64;
        let mut mean = alloc::vec![0.0; self.d()];
        for r in self.c.row_iter() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut c = self.c.clone();
        for i in 0..c.rows() {
            for (x, m) in c.row_mut(i).iter_mut().zip(&mean) {
                *x -= m;
            }
        }
        Self { c, centered: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CrcMethod {
    Tpc,
    Bss,
}

impl CrcMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CrcMethod::Tpc => "tpc",
            CrcMethod::Bss => "bss",
        }
    }
}

/// A unit direction in contrast-difference space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Direction {
    pub v: Vec<f64>,
    pub method: CrcMethod,
    /// BSS loss at `v`, or the negated explained variance for TPC.
    pub loss: f64,
    pub sign: Sign,
}

impl Direction {
    pub fn d(&self) -> usize {
        self.v.len()
    }
}

pub fn contrast_differences(ds: &ContrastDataset) -> Result<ContrastDifferences> {
    if !ds.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let mut c = ds.pos().to_f64();
    for i in 0..c.rows() {
        for (x, &y) in c.row_mut(i).iter_mut().zip(ds.neg().row(i)) {
            *x -= f64::from(y);
        }
    }
    ContrastDifferences::from_matrix(c)
}

/// Top principal component of the (centered) differences, with the sign
/// fixed so that its first non-negligible coordinate is positive.
pub fn tpc_direction(c: &ContrastDifferences) -> Result<Direction> {
    if c.n() < 2 {
        return Err(Error::TooFewExamples {
            needed: 2,
            got: c.n(),
        });
    }
    let cc = c.centered();
    let n = cc.n() as f64;
    let total_var: f64 = cc.c.as_slice().iter().map(|x| x * x).sum::<f64>() / n;
    if !(total_var > 0.0) {
        return Err(Error::NoVariance);
    }
    let (lambda, mut v) = if cc.d() <= DENSE_LIMIT {
        top_eigenpair_dense(&covariance(&cc.c))?
    } else if cc.n() <= DENSE_LIMIT {
        let (lambda, u) = top_eigenpair_dense(&gram(&cc.c))?;
        let mut v = cc.c.tr_mul_vec(&u);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        (lambda, v)
    } else {
        let start = rng::gaussian_vec(&mut rng::stream(0x7c3), cc.d());
        top_eigenpair_power(
            |x| {
                let mut y = cc.c.tr_mul_vec(&cc.c.mul_vec(x));
                y.iter_mut().for_each(|e| *e /= n);
                y
            },
            start,
            1e-12,
            20_000,
        )?
    };
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    canonicalize_sign(&mut v);
    Ok(Direction {
        v,
        method: CrcMethod::Tpc,
        loss: -lambda,
        sign: Sign::Positive,
    })
}

fn covariance(c: &Matrix<f64>) -> Matrix<f64> {
    let d = c.cols();
    let n = c.rows() as f64;
    let mut cov = alloc::vec![0.0; d * d];
    for r in c.row_iter() {
        for j in 0..d {
            let rj = r[j];
            for k in j..d {
                cov[j * d + k] += rj * r[k];
            }
        }
    }
    for j in 0..d {
        for k in j..d {
            let v = cov[j * d + k] / n;
            cov[j * d + k] = v;
            cov[k * d + j] = v;
        }
    }
    Matrix::new(d, d, cov).expect("square")
}

fn gram(c: &Matrix<f64>) -> Matrix<f64> {
    let m = c.rows();
    let n = m as f64;
    let mut g = alloc::vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let v = crate::math::dot(c.row(i), c.row(j)) / n;
            g[i * m + j] = v;
            g[j * m + i] = v;
        }
    }
    Matrix::new(m, m, g).expect("square")
}

fn canonicalize_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-8) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Cluster labels: 1 where `vᵀc_i ≥ 0`, else 0. Projections use the
/// uncentered differences. Works for any direction (TPC or BSS); the
/// direction's `sign` is not applied here.
pub fn tpc_predict(c: &ContrastDifferences, v: &Direction) -> Result<Vec<u8>> {
    Ok(c.projections(&v.v)?
        .into_iter()
        .map(|z| u8::from(z >= 0.0))
        .collect())
}

/// Bimodal salience loss of `theta` on `c`.
pub fn bss_loss(theta: &[f64], c: &ContrastDifferences) -> Result<f64> {
    let z = c.projections(theta)?;
    bss_from_projections(&z, None, &c.c).ok_or(Error::NoVariance)
}

/// Loss from precomputed projections `z = Cθ`. When `grad` is given it
/// receives the gradient with side membership held fixed.
fn bss_from_projections(z: &[f64], grad: Option<&mut [f64]>, c: &Matrix<f64>) -> Option<f64> {
    let neg = z.iter().copied().filter(|&x| x < 0.0);
    let nonneg = z.iter().copied().filter(|&x| x >= 0.0);
    let (mean_a, var_a) = mean_var(neg);
    let (mean_b, var_b) = mean_var(nonneg);
    let (mean, var) = mean_var(z.iter().copied());
    if !(var > 0.0) || !var.is_finite() {
        return None;
    }
    let loss = (var_a + var_b) / var;
    if let Some(g) = grad {
        let count_a = z.iter().filter(|&&x| x < 0.0).count() as f64;
        let count_b = z.len() as f64 - count_a;
        let n = z.len() as f64;
        let w: Vec<f64> = z
            .iter()
            .map(|&x| {
                let side = if x < 0.0 {
                    2.0 * (x - mean_a) / count_a
                } else {
                    2.0 * (x - mean_b) / count_b
                };
                (side - loss * 2.0 * (x - mean) / n) / var
            })
            .collect();
        g.copy_from_slice(&c.tr_mul_vec(&w));
    }
    Some(loss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct BssConfig {
    pub restarts: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BssConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            epochs: 20,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl BssConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.epochs == 0 {
            return Err(Error::Config(String::from(
                "restarts and epochs must be >= 1",
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(String::from("learning_rate must be > 0")));
        }
        Ok(())
    }
}

pub fn train_bss(c: &ContrastDifferences, cfg: &BssConfig) -> Result<Direction> {
    train_bss_multi(core::slice::from_ref(c), cfg)
}

/// Searches one direction for several datasets at once, minimizing the
/// unweighted mean of the per-dataset losses.
pub fn train_bss_multi(cs: &[ContrastDifferences], cfg: &BssConfig) -> Result<Direction> {
    train_bss_with(cs, cfg, &Sequential)
}

/// Projected Adam on the unit sphere from `cfg.restarts` random starts.
/// Each restart reports the lowest-loss iterate it visited; the best restart
/// wins, lowest index on ties.
pub fn train_bss_with<E: Executor>(
    cs: &[ContrastDifferences],
    cfg: &BssConfig,
    exec: &E,
) -> Result<Direction> {
    cfg.validate()?;
    let d = cs.first().ok_or(Error::Empty)?.d();
    for c in cs {
        if c.d() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: c.d(),
            });
        }
        if c.n() < 2 {
            return Err(Error::TooFewExamples {
                needed: 2,
                got: c.n(),
            });
        }
    }
    let outcomes = exec.map(cfg.restarts, |r| bss_restart(cs, cfg, r));
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (v, loss) in outcomes.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| loss < b.1) {
            best = Some((v, loss));
        }
    }
    let (v, loss) = best.ok_or(Error::NoVariance)?;
    Ok(Direction {
        v,
        method: CrcMethod::Bss,
        loss,
        sign: Sign::Positive,
    })
}

fn mean_loss(cs: &[ContrastDifferences], theta: &[f64], grad: Option<&mut [f64]>) -> Option<f64> {
    let k = cs.len() as f64;
    let mut total = 0.0;
    match grad {
        None => {
            for c in cs {
                total += bss_from_projections(&c.c.mul_vec(theta), None, &c.c)?;
            }
        }
        Some(g) => {
            g.iter_mut().for_each(|x| *x = 0.0);
            let mut gi = alloc::vec![0.0; theta.len()];
            for c in cs {
                total += bss_from_projections(&c.c.mul_vec(theta), Some(&mut gi), &c.c)?;
                for (a, b) in g.iter_mut().zip(&gi) {
                    *a += b / k;
                }
            }
        }
    }
    Some(total / k)
}

fn bss_restart(cs: &[ContrastDifferences], cfg: &BssConfig, restart: usize) -> Option<(Vec<f64>, f64)> {
    let d = cs[0].d();
    let mut theta = rng::unit_vector(&mut rng::substream(cfg.seed, restart as u64), d);
    let mut opt = AdamW::new(cfg.learning_rate, 0.0, d);
    let mut grad = alloc::vec![0.0; d];
    let mut best = (theta.clone(), mean_loss(cs, &theta, None)?);
    for _ in 0..cfg.epochs {
        mean_loss(cs, &theta, Some(&mut grad))?;
        if !grad.iter().all(|g| g.is_finite()) {
            return None;
        }
        opt.step(&mut theta, &grad);
        let nt = norm(&theta);
        if !(nt > 0.0) || !nt.is_finite() {
            return None;
        }
        theta.iter_mut().for_each(|x| *x /= nt);
        let loss = mean_loss(cs, &theta, None)?;
        if loss < best.1 {
            best = (theta.clone(), loss);
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn diffs(rows: &[&[f64]]) -> ContrastDifferences {
        ContrastDifferences::from_matrix(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn from_projections(z: &[f64]) -> ContrastDifferences {
        let rows: Vec<[f64; 1]> = z.iter().map(|&x| [x]).collect();
        ContrastDifferences::from_matrix(Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn differences_of_normalized_pairs() {
        let ds = ContrastDataset::new(
            Matrix::from_rows(&[[1.0f32, 2.0]]).unwrap(),
            Matrix::from_rows(&[[0.5f32, 3.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(contrast_differences(&ds), Err(Error::NotNormalized));
        let c = contrast_differences(&ds.mark_normalized(None)).unwrap();
        assert_eq!(c.c.row(0), &[0.5, -1.0]);
        assert!(!c.centered);
    }

    #[test]
    fn tpc_axis_aligned() {
        let c = diffs(&[&[-2.0, 0.0], &[-1.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        let dir = tpc_direction(&c).unwrap();
        assert_eq!(dir.v, vec![1.0, 0.0]);
        assert!((dir.loss + 2.5).abs() < 1e-12);
        assert_eq!(tpc_predict(&c, &dir).unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn tpc_rejects_constant_rows() {
        let c = diffs(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        assert_eq!(tpc_direction(&c), Err(Error::NoVariance));
        assert!(matches!(
            tpc_direction(&diffs(&[&[1.0, 2.0]])),
            Err(Error::TooFewExamples { .. })
        ));
    }

    #[test]
    fn predict_threshold_and_flip() {
        let c = from_projections(&[-1.0, 2.0, -3.0, 0.0]);
        let mut dir = Direction {
            v: vec![1.0],
            method: CrcMethod::Tpc,
            loss: 0.0,
            sign: Sign::Positive,
        };
        assert_eq!(tpc_predict(&c, &dir).unwrap(), vec![0, 1, 0, 1]);
        dir.v = vec![-1.0];
        assert_eq!(tpc_predict(&c, &dir).unwrap(), vec![1, 0, 1, 1]);
    }

    #[test]
    fn bss_loss_values() {
        let bimodal = from_projections(&[-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(bss_loss(&[1.0], &bimodal).unwrap(), 0.0);
        // Sides {−10, −1} and {1, 10} each have variance 20.25; total 50.5.
        let spread = from_projections(&[-10.0, -1.0, 1.0, 10.0]);
        let l = bss_loss(&[1.0], &spread).unwrap();
        assert!((l - 40.5 / 50.5).abs() < 1e-12);
        assert!((l - 0.8020).abs() < 1e-4);
        let flat = from_projections(&[2.0, 2.0]);
        assert_eq!(bss_loss(&[1.0], &flat), Err(Error::NoVariance));
    }

    #[test]
    fn bss_gradient_matches_finite_differences() {
        let c = diffs(&[
            &[0.3, -1.2, 0.5],
            &[1.1, 0.4, -0.7],
            &[-0.8, 0.9, 0.2],
            &[0.05, -0.3, 1.4],
            &[-1.5, -0.2, -0.6],
            &[0.7, 1.3, 0.1],
        ]);
        let theta = [0.4, -0.5, 0.76];
        let mut g = vec![0.0; 3];
        let l0 = mean_loss(core::slice::from_ref(&c), &theta, Some(&mut g)).unwrap();
        assert!((l0 - bss_loss(&theta, &c).unwrap()).abs() < 1e-15);
        let h = 1e-6;
        for j in 0..3 {
            let mut tp = theta;
            let mut tm = theta;
            tp[j] += h;
            tm[j] -= h;
            let fd = (bss_loss(&tp, &c).unwrap() - bss_loss(&tm, &c).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6, "coord {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn bss_finds_bimodal_axis() {
        let mut r = rng::stream(3);
        // n ≫ d, otherwise sample noise admits directions more bimodal than e₁.
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let mut row = rng::gaussian_vec(&mut r, 4);
                row.iter_mut().for_each(|x| *x *= 0.05);
                row[0] += if i % 2 == 0 { 1.0 } else { -1.0 };
                row
            })
            .collect();
        let c = ContrastDifferences::from_matrix(Matrix::from_rows(&rows).unwrap()).unwrap();
        let dir = train_bss(&c, &BssConfig::default()).unwrap();
        assert!(dir.v[0].abs() > 0.99, "{:?}", dir.v);
        assert!((norm(&dir.v) - 1.0).abs() < 1e-9);
        assert_eq!(train_bss(&c, &BssConfig::default()).unwrap(), dir);
    }
}
