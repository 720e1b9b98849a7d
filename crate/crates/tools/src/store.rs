// SPDX-License-Identifier: Apache-2.0

//! Dataset directories.
//!
//! ```text
//! meta.json                       required metadata (unknown keys kept)
//! pos.bin, neg.bin                n×d little-endian f32, row-major, no header
//! labels.bin                      n bytes of 0x00/0x01, iff has_labels
//! logits_pos.bin, logits_neg.bin  n little-endian f32, iff has_logits
//! norm.json                       statistics behind a normalized dataset, optional
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ccs_core::dataset::{ContrastDataset, DatasetMeta, NormStats};
use ccs_core::Matrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::formats::NormFile;
use crate::{ToolError, ToolResult};

pub const DTYPE: &str = "f32le";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    n: usize,
    d: usize,
    dtype: String,
    dataset_id: String,
    prompt_id: String,
    variant: String,
    normalized: bool,
    has_labels: bool,
    has_logits: bool,
    model: String,
    layer: i64,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn read(path: &Path) -> ToolResult<Vec<u8>> {
    fs::read(path).map_err(|e| ToolError::io(path, e))
}

fn read_f32s(path: &Path, expected: usize) -> ToolResult<Vec<f32>> {
    let bytes = read(path)?;
    if bytes.len() != expected * 4 {
        return Err(ToolError::format(
            path,
            format!(
                "shape mismatch: expected {expected} f32 values ({} bytes), found {} bytes",
                expected * 4,
                bytes.len()
            ),
        ));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(ToolError::format(
            path,
            format!("non-finite value at element {i}"),
        ));
    }
    Ok(values)
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn write(path: &Path, bytes: &[u8]) -> ToolResult<()> {
    fs::write(path, bytes).map_err(|e| ToolError::io(path, e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> ToolResult<ContrastDataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_slice(&read(&meta_path)?)
        .map_err(|e| ToolError::json(&meta_path, e))?;
    if meta.dtype != DTYPE {
        return Err(ToolError::format(
            &meta_path,
            format!("unsupported dtype {:?}, expected {DTYPE:?}", meta.dtype),
        ));
    }
    let len = meta.n.checked_mul(meta.d).ok_or_else(|| {
        ToolError::format(&meta_path, "n × d overflows")
    })?;
    let pos = read_f32s(&dir.join("pos.bin"), len)?;
    let neg = read_f32s(&dir.join("neg.bin"), len)?;
    let mut ds = ContrastDataset::new(
        Matrix::new(meta.n, meta.d, pos)?,
        Matrix::new(meta.n, meta.d, neg)?,
    )?;
    if meta.has_labels {
        let path = dir.join("labels.bin");
        let labels = read(&path)?;
        if labels.len() != meta.n {
            return Err(ToolError::format(
                &path,
                format!("shape mismatch: expected {} labels, found {}", meta.n, labels.len()),
            ));
        }
        if let Some(i) = labels.iter().position(|&b| b > 1) {
            return Err(ToolError::format(
                &path,
                format!("label byte {:#04x} at index {i} is not 0 or 1", labels[i]),
            ));
        }
        ds = ds.with_labels(labels)?;
    }
    if meta.has_logits {
        let lp = read_f32s(&dir.join("logits_pos.bin"), meta.n)?;
        let ln = read_f32s(&dir.join("logits_neg.bin"), meta.n)?;
        ds = ds.with_logits(lp, ln)?;
    }
    if meta.normalized {
        let norm_path = dir.join("norm.json");
        let stats = if norm_path.exists() {
            let nf: NormFile = serde_json::from_slice(&read(&norm_path)?)
                .map_err(|e| ToolError::json(&norm_path, e))?;
            let stats = NormStats::from(nf);
            if stats.d() != meta.d {
                return Err(ToolError::format(&norm_path, "dimension does not match meta.json"));
            }
            Some(stats)
        } else {
            None
        };
        ds = ds.mark_normalized(stats);
    }
    let extra = meta
        .extra
        .into_iter()
        .map(|(k, v)| (k, v.to_string()))
        .collect();
    Ok(ds.with_meta(DatasetMeta {
        dataset_id: meta.dataset_id,
        prompt_id: meta.prompt_id,
        variant: meta.variant,
        model: meta.model,
        layer: meta.layer,
        extra,
    }))
}

pub fn save_dataset(ds: &ContrastDataset, dir: impl AsRef<Path>) -> ToolResult<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))?;
    let mut extra = Map::new();
    for (k, raw) in &ds.meta.extra {
        let v: Value = serde_json::from_str(raw).map_err(|e| ToolError::json(dir.join("meta.json"), e))?;
        extra.insert(k.clone(), v);
    }
    let meta = Meta {
        n: ds.n(),
        d: ds.d(),
        dtype: DTYPE.to_string(),
        dataset_id: ds.meta.dataset_id.clone(),
        prompt_id: ds.meta.prompt_id.clone(),
        variant: ds.meta.variant.clone(),
        normalized: ds.is_normalized(),
        has_labels: ds.labels().is_some(),
        has_logits: ds.logits().is_some(),
        model: ds.meta.model.clone(),
        layer: ds.meta.layer,
        extra,
    };
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_vec_pretty(&meta).map_err(|e| ToolError::json(&meta_path, e))?;
    write(&meta_path, &text)?;
    write(&dir.join("pos.bin"), &f32_bytes(ds.pos().as_slice()))?;
    write(&dir.join("neg.bin"), &f32_bytes(ds.neg().as_slice()))?;

    // Remove optional files left over from a previous save into the same
    // directory, so the layout always matches meta.json.
    let optional = |name: &str, present: bool| -> Option<PathBuf> {
        let p = dir.join(name);
        (!present && p.exists()).then_some(p)
    };
    for stale in [
        optional("labels.bin", meta.has_labels),
        optional("logits_pos.bin", meta.has_logits),
        optional("logits_neg.bin", meta.has_logits),
        optional("norm.json", ds.norm_stats().is_some() && ds.is_normalized()),
    ]
    .into_iter()
    .flatten()
    {
        fs::remove_file(&stale).map_err(|e| ToolError::io(&stale, e))?;
    }

    if let Some(labels) = ds.labels() {
        write(&dir.join("labels.bin"), labels)?;
    }
    if let Some((lp, ln)) = ds.logits() {
        write(&dir.join("logits_pos.bin"), &f32_bytes(lp))?;
        write(&dir.join("logits_neg.bin"), &f32_bytes(ln))?;
    }
    if let (true, Some(stats)) = (ds.is_normalized(), ds.norm_stats()) {
        let path = dir.join("norm.json");
        let text = serde_json::to_vec_pretty(&NormFile::from(stats))
            .map_err(|e| ToolError::json(&path, e))?;
        write(&path, &text)?;
    }
    Ok(())
}
