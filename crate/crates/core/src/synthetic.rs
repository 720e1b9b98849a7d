// SPDX-License-Identifier: Apache-2.0

//! Synthetic contrast pairs with a planted truth direction.
//!
//! Each pair shares a random context vector. The true answer pushes the two
//! sides apart along the truth direction `t`, and every "Yes" side carries a
//! constant offset along `u ⊥ t`, which plays the role of the answer token
//! and is what per-side normalization has to remove:
//!
//! ```text
//! pos_i = base_i + sep·(2y_i − 1)·t + label_offset·u + noise·ε⁺_i
//! neg_i = base_i − sep·(2y_i − 1)·t                  + noise·ε⁻_i
//! ```

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::dataset::{ContrastDataset, DatasetMeta};
use crate::math::{dot, norm};
use crate::{rng, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    /// Signal magnitude along the truth direction.
    pub sep: f64,
    /// Standard deviation of the isotropic per-side noise.
    pub noise: f64,
    /// Magnitude of the constant offset added to every pos row.
    pub label_offset: f64,
    pub truth_dir_seed: u64,
    pub data_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 64,
            sep: 3.0,
            noise: 1.0,
            label_offset: 5.0,
            truth_dir_seed: 0,
            data_seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d < 2 {
            return Err(Error::Config(format!(
                "synthetic data needs n >= 2 and d >= 2, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if !(self.noise >= 0.0) || !self.sep.is_finite() || !self.label_offset.is_finite() {
            return Err(Error::Config(String::from(
                "noise must be >= 0 and sep/label_offset finite",
            )));
        }
        Ok(())
    }
}

/// The planted truth direction for `cfg`.
pub fn truth_direction(cfg: &SynthConfig) -> Vec<f64> {
    rng::unit_vector(&mut rng::stream(cfg.truth_dir_seed), cfg.d)
}

pub fn generate(cfg: &SynthConfig) -> Result<ContrastDataset> {
    cfg.validate()?;
    build(cfg, &truth_direction(cfg), cfg.data_seed, String::from("synthetic"))
}

/// `count` datasets with fresh offsets, contexts and noise (data seeds
/// `data_seed + k`). With `shared_truth` they all use the truth direction of
/// `cfg`; otherwise each gets its own, orthogonal to the others.
pub fn generate_pair_family(
    cfg: &SynthConfig,
    shared_truth: bool,
    count: usize,
) -> Result<Vec<ContrastDataset>> {
    cfg.validate()?;
    if !shared_truth && count > cfg.d {
        return Err(Error::Config(format!(
            "cannot draw {count} orthogonal truth directions in {} dimensions",
            cfg.d
        )));
    }
    let mut truths: Vec<Vec<f64>> = Vec::with_capacity(count);
    for k in 0..count {
        let t = if shared_truth || k == 0 {
            truth_direction(cfg)
        } else {
            orthogonal_draw(cfg, k as u64, &truths)
        };
        truths.push(t);
    }
    truths
        .iter()
        .enumerate()
        .map(|(k, t)| {
            build(
                cfg,
                t,
                cfg.data_seed.wrapping_add(k as u64),
                format!("synthetic-{k}"),
            )
        })
        .collect()
}

fn orthogonal_draw(cfg: &SynthConfig, k: u64, against: &[Vec<f64>]) -> Vec<f64> {
    let mut r = rng::substream(cfg.truth_dir_seed, k);
    loop {
        let mut t = rng::unit_vector(&mut r, cfg.d);
        for a in against {
            let proj = dot(&t, a);
            t.iter_mut().zip(a).for_each(|(x, y)| *x -= proj * y);
        }
        let nt = norm(&t);
        if nt > 1e-6 {
            t.iter_mut().for_each(|x| *x /= nt);
            return t;
        }
    }
}

fn build(cfg: &SynthConfig, t: &[f64], data_seed: u64, id: String) -> Result<ContrastDataset> {
    let (n, d) = (cfg.n, cfg.d);
    let mut r = rng::stream(data_seed);
    let u = orthogonal_draw_from(&mut r, t);

    let mut pos = Vec::with_capacity(n * d);
    let mut neg = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = u8::from(r.random_bool(0.5));
        let s = if y == 1 { cfg.sep } else { -cfg.sep };
        let base = rng::gaussian_vec(&mut r, d);
        let eps_pos = rng::gaussian_vec(&mut r, d);
        let eps_neg = rng::gaussian_vec(&mut r, d);
        for j in 0..d {
            pos.push((base[j] + s * t[j] + cfg.label_offset * u[j] + cfg.noise * eps_pos[j]) as f32);
            neg.push((base[j] - s * t[j] + cfg.noise * eps_neg[j]) as f32);
        }
        labels.push(y);
    }

    let mut extra = BTreeMap::new();
    extra.insert(String::from("synth_sep"), json_number(cfg.sep));
    extra.insert(String::from("synth_noise"), json_number(cfg.noise));
    extra.insert(String::from("synth_label_offset"), json_number(cfg.label_offset));
    extra.insert(String::from("synth_data_seed"), data_seed.to_string());
    let meta = DatasetMeta {
        dataset_id: id,
        model: String::from("synthetic"),
        layer: 0,
        extra,
        ..DatasetMeta::default()
    };
    Ok(ContrastDataset::new(Matrix::new(n, d, pos)?, Matrix::new(n, d, neg)?)?
        .with_labels(labels)?
        .with_meta(meta))
}

fn orthogonal_draw_from(r: &mut rng::StreamRng, t: &[f64]) -> Vec<f64> {
    loop {
        let mut u = rng::unit_vector(r, t.len());
        let proj = dot(&u, t);
        u.iter_mut().zip(t).for_each(|(x, y)| *x -= proj * y);
        let nu = norm(&u);
        if nu > 1e-6 {
            u.iter_mut().for_each(|x| *x /= nu);
            return u;
        }
    }
}

fn json_number(x: f64) -> String {
    let s = format!("{x:?}");
    // Debug formatting of finite floats is valid JSON ("3.0", "1e-5").
    if x.is_finite() {
        s
    } else {
        String::from("null")
    }
}
