// SPDX-License-Identifier: Apache-2.0

//! Contrast-pair datasets and the operations that prepare them for probing:
//! per-side normalization, label balancing and train/test splitting.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{rng, Error, Matrix, Result};

/// Descriptive tags carried with a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetMeta {
    pub dataset_id: String,
    pub prompt_id: String,
    /// e.g. `"regular"` or `"prefix"`.
    pub variant: String,
    pub model: String,
    pub layer: i64,
    /// Unrecognized metadata keys, each value kept as raw JSON text.
    pub extra: BTreeMap<String, String>,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self {
            dataset_id: String::from("unnamed"),
            prompt_id: String::from("0"),
            variant: String::from("regular"),
            model: String::from("unknown"),
            layer: -1,
            extra: BTreeMap::new(),
        }
    }
}

/// Paired activations `φ(x⁺)` / `φ(x⁻)` for `n` questions.
///
/// Row `i` of `pos` is the representation of question `i` answered "Yes",
/// row `i` of `neg` the same question answered "No".
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastDataset {
    pos: Matrix<f32>,
    neg: Matrix<f32>,
    labels: Option<Vec<u8>>,
    logits_pos: Option<Vec<f32>>,
    logits_neg: Option<Vec<f32>>,
    normalized: bool,
    norm_stats: Option<NormStats>,
    pub meta: DatasetMeta,
}

impl ContrastDataset {
    pub fn new(pos: Matrix<f32>, neg: Matrix<f32>) -> Result<Self> {
        if pos.shape() != neg.shape() {
            return Err(Error::Shape(format!(
                "pos is {:?} but neg is {:?}",
                pos.shape(),
                neg.shape()
            )));
        }
        if !pos.all_finite() {
            return Err(Error::NonFinite("pos"));
        }
        if !neg.all_finite() {
            return Err(Error::NonFinite("neg"));
        }
        Ok(Self {
            pos,
            neg,
            labels: None,
            logits_pos: None,
            logits_neg: None,
            normalized: false,
            norm_stats: None,
            meta: DatasetMeta::default(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                actual: labels.len(),
            });
        }
        if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidLabel { index, value });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_logits(mut self, logits_pos: Vec<f32>, logits_neg: Vec<f32>) -> Result<Self> {
        for (v, name) in [(&logits_pos, "logits_pos"), (&logits_neg, "logits_neg")] {
            if v.len() != self.n() {
                return Err(Error::Dimension {
                    expected: self.n(),
                    actual: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        self.logits_pos = Some(logits_pos);
        self.logits_neg = Some(logits_neg);
        Ok(self)
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Marks the activations as already normalized, e.g. when read back from
    /// disk. `stats` are the statistics that produced them, if known.
    pub fn mark_normalized(mut self, stats: Option<NormStats>) -> Self {
        self.normalized = true;
        self.norm_stats = stats;
        self
    }

    pub fn n(&self) -> usize {
        self.pos.rows()
    }

    pub fn d(&self) -> usize {
        self.pos.cols()
    }

    pub fn pos(&self) -> &Matrix<f32> {
        &self.pos
    }

    pub fn neg(&self) -> &Matrix<f32> {
        &self.neg
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels().ok_or(Error::MissingLabels)
    }

    pub fn logits(&self) -> Option<(&[f32], &[f32])> {
        match (&self.logits_pos, &self.logits_neg) {
            (Some(p), Some(n)) => Some((p, n)),
            _ => None,
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Statistics that were used to normalize this dataset, when known.
    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }

    /// The examples at `idx`, in that order, with all per-example fields.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let pick = |v: &Vec<f32>| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            pos: self.pos.select_rows(idx),
            neg: self.neg.select_rows(idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            logits_pos: self.logits_pos.as_ref().map(pick),
            logits_neg: self.logits_neg.as_ref().map(pick),
            normalized: self.normalized,
            norm_stats: self.norm_stats.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Same pairs with the two sides exchanged.
    pub fn swap_sides(&self) -> Self {
        let mut out = self.clone();
        core::mem::swap(&mut out.pos, &mut out.neg);
        core::mem::swap(&mut out.logits_pos, &mut out.logits_neg);
        if let Some(s) = out.norm_stats.as_mut() {
            core::mem::swap(&mut s.mu_pos, &mut s.mu_neg);
            core::mem::swap(&mut s.sigma_pos, &mut s.sigma_neg);
        }
        out
    }

    /// Stacks several datasets row-wise. All must agree on `d`, on whether
    /// they are normalized, and on which optional fields are present. The
    /// metadata of the first dataset is kept.
    pub fn concat(parts: &[ContrastDataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty)?;
        let d = first.d();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut labels = first.labels.as_ref().map(|_| Vec::new());
        let mut lp = first.logits_pos.as_ref().map(|_| Vec::new());
        let mut ln = first.logits_neg.as_ref().map(|_| Vec::new());
        let mut n = 0;
        for p in parts {
            if p.d() != d {
                return Err(Error::Dimension {
                    expected: d,
                    actual: p.d(),
                });
            }
            if p.normalized != first.normalized {
                return Err(Error::Config(String::from(
                    "cannot mix normalized and raw datasets",
                )));
            }
            pos.extend_from_slice(p.pos.as_slice());
            neg.extend_from_slice(p.neg.as_slice());
            n += p.n();
            extend_opt(&mut labels, p.labels.as_deref(), "labels")?;
            extend_opt(&mut lp, p.logits_pos.as_deref(), "logits")?;
            extend_opt(&mut ln, p.logits_neg.as_deref(), "logits")?;
        }
        Ok(Self {
            pos: Matrix::new(n, d, pos)?,
            neg: Matrix::new(n, d, neg)?,
            labels,
            logits_pos: lp,
            logits_neg: ln,
            normalized: first.normalized,
            norm_stats: None,
            meta: first.meta.clone(),
        })
    }
}

fn extend_opt<T: Copy>(acc: &mut Option<Vec<T>>, part: Option<&[T]>, what: &str) -> Result<()> {
    match (acc, part) {
        (Some(a), Some(p)) => a.extend_from_slice(p),
        (None, None) => {}
        _ => {
            return Err(Error::Config(format!(
                "cannot concatenate datasets where only some carry {what}"
            )))
        }
    }
    Ok(())
}

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Per-dimension statistics of each side, used to z-score the two sides
/// independently.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormStats {
    pub mu_pos: Vec<f64>,
    pub sigma_pos: Vec<f64>,
    pub mu_neg: Vec<f64>,
    pub sigma_neg: Vec<f64>,
    pub epsilon: f64,
}

impl NormStats {
    /// Statistics that leave data unchanged.
    pub fn identity(d: usize) -> Self {
        Self {
            mu_pos: alloc::vec![0.0; d],
            sigma_pos: alloc::vec![1.0; d],
            mu_neg: alloc::vec![0.0; d],
            sigma_neg: alloc::vec![1.0; d],
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn d(&self) -> usize {
        self.mu_pos.len()
    }

    /// Drops the variance part, keeping only mean-centering.
    #[must_use]
    pub fn center_only(mut self) -> Self {
        self.sigma_pos.iter_mut().for_each(|s| *s = 1.0);
        self.sigma_neg.iter_mut().for_each(|s| *s = 1.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        for v in [&self.sigma_pos, &self.mu_neg, &self.sigma_neg] {
            if v.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    actual: v.len(),
                });
            }
        }
        let all = [&self.mu_pos, &self.sigma_pos, &self.mu_neg, &self.sigma_neg];
        if !all.iter().all(|v| v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("norm stats"));
        }
        if self
            .sigma_pos
            .iter()
            .chain(&self.sigma_neg)
            .any(|&s| s < self.epsilon)
        {
            return Err(Error::Config(String::from("sigma below epsilon")));
        }
        Ok(())
    }
}

/// Options for [`compute_norm_stats_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct NormOptions {
    pub epsilon: f64,
    /// Divide by the per-dimension standard deviation; when false only the
    /// means are removed.
    pub scale_variance: bool,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            scale_variance: true,
        }
    }
}

/// Per-dimension population mean and standard deviation of each side.
/// Dimensions whose standard deviation is below `epsilon` get `sigma = 1`.
pub fn compute_norm_stats(ds: &ContrastDataset, epsilon: f64) -> Result<NormStats> {
    compute_norm_stats_with(
        ds,
        NormOptions {
            epsilon,
            scale_variance: true,
        },
    )
}

pub fn compute_norm_stats_with(ds: &ContrastDataset, opts: NormOptions) -> Result<NormStats> {
    if ds.is_normalized() {
        return Err(Error::AlreadyNormalized);
    }
    if ds.n() < 2 {
        return Err(Error::TooFewExamples {
            needed: 2,
            got: ds.n(),
        });
    }
    if !(opts.epsilon > 0.0) {
        return Err(Error::Config(String::from("epsilon must be positive")));
    }
    let (mu_pos, sigma_pos) = column_stats(ds.pos(), opts.epsilon);
    let (mu_neg, sigma_neg) = column_stats(ds.neg(), opts.epsilon);
    let stats = NormStats {
        mu_pos,
        sigma_pos,
        mu_neg,
        sigma_neg,
        epsilon: opts.epsilon,
    };
    Ok(if opts.scale_variance {
        stats
    } else {
        stats.center_only()
    })
}

fn column_stats(m: &Matrix<f32>, epsilon: f64) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows() as f64;
    let mut mean = alloc::vec![0.0f64; m.cols()];
    for r in m.row_iter() {
        for (acc, &x) in mean.iter_mut().zip(r) {
            *acc += f64::from(x);
        }
    }
    mean.iter_mut().for_each(|x| *x /= n);
    let mut var = alloc::vec![0.0f64; m.cols()];
    for r in m.row_iter() {
        for ((acc, &x), mu) in var.iter_mut().zip(r).zip(&mean) {
            let dx = f64::from(x) - mu;
            *acc += dx * dx;
        }
    }
    let sigma = var
        .into_iter()
        .map(|v| {
            let s = sqrt(v / n);
            if s < epsilon {
                1.0
            } else {
                s
            }
        })
        .collect();
    (mean, sigma)
}

/// Z-scores each side with its own statistics.
pub fn normalize(ds: &ContrastDataset, stats: &NormStats) -> Result<ContrastDataset> {
    if ds.is_normalized() {
        return Err(Error::AlreadyNormalized);
    }
    if stats.d() != ds.d() {
        return Err(Error::Dimension {
            expected: ds.d(),
            actual: stats.d(),
        });
    }
    stats.validate()?;
    let apply = |m: &Matrix<f32>, mu: &[f64], sigma: &[f64]| {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for ((x, m), s) in out.row_mut(i).iter_mut().zip(mu).zip(sigma) {
                *x = ((f64::from(*x) - m) / s) as f32;
            }
        }
        out
    };
    let mut out = ds.clone();
    out.pos = apply(&ds.pos, &stats.mu_pos, &stats.sigma_pos);
    out.neg = apply(&ds.neg, &stats.mu_neg, &stats.sigma_neg);
    if !out.pos.all_finite() || !out.neg.all_finite() {
        return Err(Error::NonFinite("normalized activations"));
    }
    out.normalized = true;
    out.norm_stats = Some(stats.clone());
    Ok(out)
}

/// Computes statistics on `ds` and normalizes it with them.
pub fn normalize_self(ds: &ContrastDataset, opts: NormOptions) -> Result<ContrastDataset> {
    let stats = compute_norm_stats_with(ds, opts)?;
    normalize(ds, &stats)
}

/// Drops examples of the majority class uniformly at random until both
/// classes have the same count, then keeps at most `max_n` examples (equal
/// per class). Surviving examples keep their original relative order.
pub fn balance_and_subsample(
    ds: &ContrastDataset,
    max_n: usize,
    seed: u64,
) -> Result<ContrastDataset> {
    let labels = ds.require_labels()?;
    if max_n < 2 {
        return Err(Error::Config(format!(
            "max_n must be at least 2 to keep both classes, got {max_n}"
        )));
    }
    let mut ones: Vec<usize> = Vec::new();
    let mut zeros: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 1 {
            ones.push(i);
        } else {
            zeros.push(i);
        }
    }
    if zeros.is_empty() {
        return Err(Error::EmptyClass(0));
    }
    if ones.is_empty() {
        return Err(Error::EmptyClass(1));
    }
    let per_class = zeros.len().min(ones.len()).min(max_n / 2);
    let mut rng = rng::stream(seed);
    let mut keep = Vec::with_capacity(2 * per_class);
    for class in [&zeros, &ones] {
        let picked = rng::sample_sorted(&mut rng, class.len(), per_class);
        keep.extend(picked.into_iter().map(|j| class[j]));
    }
    keep.sort_unstable();
    Ok(ds.subset(&keep))
}

/// Random train/test partition parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            seed: 0,
        }
    }
}

impl SplitSpec {
    /// Number of training examples for a dataset of size `n`.
    pub fn train_size(&self, n: usize) -> Result<usize> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let k = libm::round(self.train_fraction * n as f64) as usize;
        if k == 0 || k >= n {
            return Err(Error::Config(format!(
                "train_fraction {} leaves an empty side for n = {n}",
                self.train_fraction
            )));
        }
        Ok(k)
    }

    /// Sorted (train, test) index sets.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if n < 2 {
            return Err(Error::TooFewExamples { needed: 2, got: n });
        }
        let k = self.train_size(n)?;
        let perm = rng::permutation(&mut rng::stream(self.seed), n);
        let mut train = perm[..k].to_vec();
        let mut test = perm[k..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }
}

pub fn split(ds: &ContrastDataset, spec: &SplitSpec) -> Result<(ContrastDataset, ContrastDataset)> {
    let (train, test) = spec.indices(ds.n())?;
    Ok((ds.subset(&train), ds.subset(&test)))
}
