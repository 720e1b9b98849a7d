// SPDX-License-Identifier: Apache-2.0

//! Evaluation protocols: sign-resolved accuracy, prompt sensitivity,
//! transfer matrices, sample-complexity sweeps and the coarse Wald bound.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::baselines::{lr_predict, train_lr, LrConfig, LrModel};
use crate::ccs::{predict, train_ccs_with, Probe, TrainConfig};
use crate::crc::{
    contrast_differences, tpc_direction, tpc_predict, train_bss_with, BssConfig, Direction,
};
use crate::dataset::{
    compute_norm_stats_with, normalize, normalize_self, ContrastDataset, NormOptions, NormStats,
    SplitSpec,
};
use crate::exec::{Executor, Sequential};
use crate::math::sqrt;
use crate::{rng, Error, Result, Sign};

/// Accuracy under the better of the two ways to name the clusters.
///
/// Returns `max(a, 1 − a)` where `a` is the plain agreement rate, and the
/// orientation achieving it (`Positive` on ties).
pub fn accuracy_with_sign(pred: &[u8], labels: &[u8]) -> Result<(f64, Sign)> {
    let a = raw_accuracy(pred, labels)?;
    Ok(if a >= 1.0 - a {
        (a, Sign::Positive)
    } else {
        (1.0 - a, Sign::Negative)
    })
}

pub fn raw_accuracy(pred: &[u8], labels: &[u8]) -> Result<f64> {
    if pred.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Sample standard deviation (n − 1) of accuracies across prompts.
pub fn prompt_sensitivity(accs: &[f64]) -> Result<f64> {
    if accs.len() < 2 {
        return Err(Error::TooFewExamples {
            needed: 2,
            got: accs.len(),
        });
    }
    let n = accs.len() as f64;
    let mean = accs.iter().sum::<f64>() / n;
    let ss: f64 = accs.iter().map(|a| (a - mean) * (a - mean)).sum();
    Ok(sqrt(ss / (n - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StatReport {
    pub mu0: f64,
    pub mu_hat: f64,
    pub n: usize,
    /// `1 / (2√n)`: the largest possible standard error of an accuracy
    /// measured on `n` examples.
    pub se_bound: f64,
    /// `(mu0 − mu_hat) / se_bound²`.
    pub w: f64,
}

pub fn wald_bound(mu0: f64, mu_hat: f64, n: usize) -> Result<StatReport> {
    if n == 0 {
        return Err(Error::TooFewExamples { needed: 1, got: 0 });
    }
    if !(0.0..=1.0).contains(&mu0) || !(0.0..=1.0).contains(&mu_hat) {
        return Err(Error::Config(String::from("accuracies must lie in [0, 1]")));
    }
    let se_bound = 1.0 / (2.0 * sqrt(n as f64));
    Ok(StatReport {
        mu0,
        mu_hat,
        n,
        se_bound,
        w: (mu0 - mu_hat) / (se_bound * se_bound),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Ccs,
    Tpc,
    Bss,
    Lr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ccs, Method::Tpc, Method::Bss, Method::Lr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ccs => "ccs",
            Method::Tpc => "tpc",
            Method::Bss => "bss",
            Method::Lr => "lr",
        }
    }

    pub fn is_supervised(self) -> bool {
        self == Method::Lr
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Which statistics normalize an evaluation set that arrives raw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum NormMode {
    /// The statistics of the training set, carried by the model.
    #[default]
    ProbeCarried,
    /// Statistics recomputed on the evaluation set itself.
    PerDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MethodConfig {
    pub ccs: TrainConfig,
    pub bss: BssConfig,
    pub lr: LrConfig,
    pub norm: NormOptions,
    pub norm_mode: NormMode,
}

/// A trained model of any method, with the statistics it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Ccs { probe: Probe, loss: f64 },
    Crc { direction: Direction, norm_stats: NormStats },
    Lr(LrModel),
}

impl FittedModel {
    pub fn method(&self) -> Method {
        match self {
            FittedModel::Ccs { .. } => Method::Ccs,
            FittedModel::Crc { direction, .. } => match direction.method {
                crate::crc::CrcMethod::Tpc => Method::Tpc,
                crate::crc::CrcMethod::Bss => Method::Bss,
            },
            FittedModel::Lr(_) => Method::Lr,
        }
    }

    pub fn norm_stats(&self) -> &NormStats {
        match self {
            FittedModel::Ccs { probe, .. } => &probe.norm_stats,
            FittedModel::Crc { norm_stats, .. } => norm_stats,
            FittedModel::Lr(m) => &m.norm_stats,
        }
    }

    /// Training loss of the unsupervised objective, where there is one.
    pub fn loss(&self) -> Option<f64> {
        match self {
            FittedModel::Ccs { loss, .. } => Some(*loss),
            FittedModel::Crc { direction, .. } => Some(direction.loss),
            FittedModel::Lr(_) => None,
        }
    }

    pub fn sign(&self) -> Sign {
        match self {
            FittedModel::Ccs { probe, .. } => probe.sign,
            FittedModel::Crc { direction, .. } => direction.sign,
            FittedModel::Lr(_) => Sign::Positive,
        }
    }

    pub fn set_sign(&mut self, sign: Sign) {
        match self {
            FittedModel::Ccs { probe, .. } => probe.sign = sign,
            FittedModel::Crc { direction, .. } => direction.sign = sign,
            FittedModel::Lr(_) => {}
        }
    }

    /// Normalizes `ds` per `mode` unless it already is.
    pub fn prepare(
        &self,
        ds: &ContrastDataset,
        mode: NormMode,
        opts: NormOptions,
    ) -> Result<ContrastDataset> {
        if ds.is_normalized() {
            return Ok(ds.clone());
        }
        match mode {
            NormMode::ProbeCarried => normalize(ds, self.norm_stats()),
            NormMode::PerDataset => normalize_self(ds, opts),
        }
    }

    /// Hard labels with the model's orientation applied.
    pub fn predict_labels(
        &self,
        ds: &ContrastDataset,
        mode: NormMode,
        opts: NormOptions,
    ) -> Result<Vec<u8>> {
        let ds = self.prepare(ds, mode, opts)?;
        match self {
            FittedModel::Ccs { probe, .. } => Ok(predict(probe, &ds)?.hard),
            FittedModel::Crc { direction, .. } => {
                let c = contrast_differences(&ds)?;
                let labels = tpc_predict(&c, direction)?;
                Ok(match direction.sign {
                    Sign::Positive => labels,
                    Sign::Negative => labels.into_iter().map(|l| 1 - l).collect(),
                })
            }
            FittedModel::Lr(m) => lr_predict(m, &ds),
        }
    }
}

/// Trains `method` on `train`, normalizing it first if it is raw.
pub fn fit<E: Executor>(
    method: Method,
    train: &ContrastDataset,
    cfg: &MethodConfig,
    exec: &E,
) -> Result<FittedModel> {
    let owned;
    let train = if train.is_normalized() {
        train
    } else {
        owned = normalize_self(train, cfg.norm)?;
        &owned
    };
    let stats = || {
        train
            .norm_stats()
            .cloned()
            .unwrap_or_else(|| NormStats::identity(train.d()))
    };
    Ok(match method {
        Method::Ccs => {
            let fit = train_ccs_with(train, &cfg.ccs, exec)?;
            FittedModel::Ccs {
                probe: fit.probe,
                loss: fit.loss,
            }
        }
        Method::Tpc => FittedModel::Crc {
            direction: tpc_direction(&contrast_differences(train)?)?,
            norm_stats: stats(),
        },
        Method::Bss => {
            let c = contrast_differences(train)?;
            FittedModel::Crc {
                direction: train_bss_with(core::slice::from_ref(&c), &cfg.bss, exec)?,
                norm_stats: stats(),
            }
        }
        Method::Lr => FittedModel::Lr(train_lr(train, &cfg.lr)?),
    })
}

/// Accuracy of `model` on the labeled set `test`. Unsupervised models are
/// sign-resolved against the labels; the supervised ceiling is scored as is.
pub fn evaluate(
    model: &FittedModel,
    test: &ContrastDataset,
    mode: NormMode,
    opts: NormOptions,
) -> Result<(f64, Sign)> {
    let labels = test.require_labels()?;
    let mut unsigned = model.clone();
    unsigned.set_sign(Sign::Positive);
    let pred = unsigned.predict_labels(test, mode, opts)?;
    if model.method().is_supervised() {
        Ok((raw_accuracy(&pred, labels)?, Sign::Positive))
    } else {
        accuracy_with_sign(&pred, labels)
    }
}

pub const NO_TRANSFER: &str = "no-transfer";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransferMatrix {
    pub method: Method,
    /// Training dataset ids followed by [`NO_TRANSFER`].
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `values[i][j]`: trained on row `i`, tested on column `j`. `None`
    /// where training or evaluation failed.
    pub values: Vec<Vec<Option<f64>>>,
}

impl TransferMatrix {
    pub fn no_transfer_row(&self) -> &[Option<f64>] {
        self.values.last().map_or(&[], |r| r.as_slice())
    }
}

/// Trains on each `train_sets[i]` and tests on every `test_sets[j]`. The two
/// lists are paired: `test_sets[j]` is the held-out part of the dataset
/// whose training part is `train_sets[j]`, which is what the final
/// "no-transfer" row reports.
pub fn transfer_eval<E: Executor>(
    train_sets: &[ContrastDataset],
    test_sets: &[ContrastDataset],
    method: Method,
    cfg: &MethodConfig,
    exec: &E,
) -> Result<TransferMatrix> {
    if train_sets.len() != test_sets.len() {
        return Err(Error::Dimension {
            expected: train_sets.len(),
            actual: test_sets.len(),
        });
    }
    if train_sets.is_empty() {
        return Err(Error::Empty);
    }
    let k = train_sets.len();
    let models = exec.map(k, |i| fit(method, &train_sets[i], cfg, &Sequential));
    let cells = exec.map(k * k, |idx| {
        let (i, j) = (idx / k, idx % k);
        let model = models[i].as_ref().ok()?;
        evaluate(model, &test_sets[j], cfg.norm_mode, cfg.norm)
            .ok()
            .map(|(a, _)| a)
    });
    let mut values: Vec<Vec<Option<f64>>> = cells.chunks(k).map(<[_]>::to_vec).collect();
    let diagonal = (0..k).map(|j| values[j][j]).collect();
    values.push(diagonal);
    let mut rows: Vec<String> = train_sets.iter().map(|d| d.meta.dataset_id.clone()).collect();
    rows.push(NO_TRANSFER.to_string());
    Ok(TransferMatrix {
        method,
        rows,
        cols: test_sets.iter().map(|d| d.meta.dataset_id.clone()).collect(),
        values,
    })
}

/// Splits every dataset with `split`, then runs [`transfer_eval`].
pub fn transfer_eval_split<E: Executor>(
    datasets: &[ContrastDataset],
    split: &SplitSpec,
    method: Method,
    cfg: &MethodConfig,
    exec: &E,
) -> Result<TransferMatrix> {
    let mut train = Vec::with_capacity(datasets.len());
    let mut test = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let (a, b) = crate::dataset::split(ds, split)?;
        train.push(a);
        test.push(b);
    }
    transfer_eval(&train, &test, method, cfg, exec)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepCurve {
    pub method: Method,
    pub k_values: Vec<usize>,
    pub mean_acc: Vec<f64>,
    /// Sample standard deviation over successful trials (0 for one trial).
    pub std_acc: Vec<f64>,
    pub trials: usize,
    /// Trials per `k` whose training failed (e.g. too few points for PCA).
    pub failures: Vec<usize>,
}

pub const DEFAULT_TRIALS: usize = 32;

/// Accuracy as a function of the number of training pairs.
///
/// `ds` is split with `split`; normalization statistics come from the whole
/// training split, then for every `k` and trial, `k` training pairs are drawn
/// without replacement and the method is trained on them alone and tested on
/// the full test split. Training uses `cfg` unchanged in every trial, so
/// `k = |train|` reproduces plain training exactly.
#[allow(clippy::too_many_arguments)]
pub fn sample_complexity_sweep<E: Executor>(
    ds: &ContrastDataset,
    method: Method,
    k_values: &[usize],
    trials: usize,
    split: &SplitSpec,
    seed: u64,
    cfg: &MethodConfig,
    exec: &E,
) -> Result<SweepCurve> {
    if trials == 0 {
        return Err(Error::Config(String::from("trials must be >= 1")));
    }
    ds.require_labels()?;
    let (train, test) = crate::dataset::split(ds, split)?;
    let (train, test) = if train.is_normalized() {
        (train, test)
    } else {
        let stats = compute_norm_stats_with(&train, cfg.norm)?;
        (normalize(&train, &stats)?, normalize(&test, &stats)?)
    };
    for &k in k_values {
        if k == 0 || k > train.n() {
            return Err(Error::Config(format!(
                "k = {k} must be in 1..={} (training split size)",
                train.n()
            )));
        }
    }
    let jobs = k_values.len() * trials;
    let results = exec.map(jobs, |job| {
        let k = k_values[job / trials];
        let idx = rng::sample_sorted(
            &mut rng::substream(seed, job as u64),
            train.n(),
            k,
        );
        let subset = train.subset(&idx);
        let model = fit(method, &subset, cfg, &Sequential).ok()?;
        evaluate(&model, &test, cfg.norm_mode, cfg.norm)
            .ok()
            .map(|(a, _)| a)
    });
    let mut mean_acc = Vec::with_capacity(k_values.len());
    let mut std_acc = Vec::with_capacity(k_values.len());
    let mut failures = Vec::with_capacity(k_values.len());
    for (ki, chunk) in results.chunks(trials).enumerate() {
        let ok: Vec<f64> = chunk.iter().flatten().copied().collect();
        if ok.is_empty() {
            return Err(Error::Config(format!(
                "every trial failed for k = {}",
                k_values[ki]
            )));
        }
        let n = ok.len() as f64;
        let mean = ok.iter().sum::<f64>() / n;
        mean_acc.push(mean);
        std_acc.push(if ok.len() > 1 {
            prompt_sensitivity(&ok)?
        } else {
            0.0
        });
        failures.push(chunk.len() - ok.len());
    }
    Ok(SweepCurve {
        method,
        k_values: k_values.to_vec(),
        mean_acc,
        std_acc,
        trials,
        failures,
    })
}

/// One accuracy measurement.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccuracyRecord {
    pub dataset: String,
    pub prompt: String,
    pub variant: String,
    pub method: String,
    pub accuracy: f64,
    pub sign: Sign,
}

/// A statistic over the prompts of one (dataset, variant, method) group.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupStat {
    pub dataset: String,
    pub variant: String,
    pub method: String,
    pub value: f64,
}

/// Averages for one (method, variant) across datasets.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodSummary {
    pub method: String,
    pub variant: String,
    /// Mean of the per-dataset means.
    pub mean: f64,
    /// Mean of the per-dataset prompt standard deviations, when any dataset
    /// had at least two prompts.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub per_prompt_acc: Vec<AccuracyRecord>,
    pub per_dataset_mean: Vec<GroupStat>,
    pub prompt_std: Vec<GroupStat>,
    pub grand: Vec<MethodSummary>,
}

impl EvalReport {
    /// Aggregates raw records. Groups are emitted in sorted key order.
    pub fn from_records(records: Vec<AccuracyRecord>) -> Self {
        type Key = (String, String, String);
        let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
        for r in &records {
            groups
                .entry((r.dataset.clone(), r.variant.clone(), r.method.clone()))
                .or_default()
                .push(r.accuracy);
        }
        let mut per_dataset_mean = Vec::new();
        let mut prompt_std = Vec::new();
        let mut by_method: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for ((dataset, variant, method), accs) in groups {
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let entry = by_method
                .entry((method.clone(), variant.clone()))
                .or_default();
            entry.0.push(mean);
            if let Ok(sd) = prompt_sensitivity(&accs) {
                entry.1.push(sd);
                prompt_std.push(GroupStat {
                    dataset: dataset.clone(),
                    variant: variant.clone(),
                    method: method.clone(),
                    value: sd,
                });
            }
            per_dataset_mean.push(GroupStat {
                dataset,
                variant,
                method,
                value: mean,
            });
        }
        let grand = by_method
            .into_iter()
            .map(|((method, variant), (means, sds))| MethodSummary {
                method,
                variant,
                mean: means.iter().sum::<f64>() / means.len() as f64,
                std: (!sds.is_empty()).then(|| sds.iter().sum::<f64>() / sds.len() as f64),
            })
            .collect();
        Self {
            per_prompt_acc: records,
            per_dataset_mean,
            prompt_std,
            grand,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.per_prompt_acc.is_empty()
    }
}
