//! Training-set export.
//!
//! ```text
//! <out>/dataset.json
//! <out>/slice_0000/mrf.bin        f32 [2t, h, w]  real planes, then imaginary planes
//! <out>/slice_0000/avg.bin        f32 [h, w]      |time average| of the series
//! <out>/slice_0000/contrasts.bin  f32 [3, h, w]   t1w, t2w, flair, each over its 95th percentile
//! <out>/slice_0000/maps.bin       f32 [4, h, w]   t1 (ms), t2 (ms), pd, label
//! ```
//!
//! The series is the gridded reconstruction normalized by the 95th
//! percentile of its time average.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{s, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::ExperimentConfig;
use super::container::{write_atomic, ArrayData, Container};
use super::VERSION;
use crate::acquisition::normalize_95th;
use crate::error::{ensure, Result};
use crate::synthesis::Contrast;

pub const DATASET_FORMAT: &str = "mrfcs-dataset";
pub const DATASET_VERSION: u32 = 1;
const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        ensure(r.iter().all(|v| v.is_finite() && *v >= 0.0), || format!("split ratios must be non-negative: {r:?}"))?;
        let sum: f64 = r.iter().sum();
        ensure((sum - 1.0).abs() < 1e-6, || format!("split ratios must sum to 1, got {sum}"))
    }

    /// Train and validation counts are floored; test takes the remainder.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let floor = |r: f64| ((r * n as f64 + 1e-9).floor() as usize).min(n);
        let train = floor(self.train);
        let val = floor(self.val).min(n - train);
        [train, val, n - train - val]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub shape: Vec<usize>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub name: String,
    pub split: String,
    pub config_index: usize,
    pub files: BTreeMap<String, FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub format_version: u32,
    pub version: String,
    pub split_seed: u64,
    pub ratios: SplitRatios,
    pub n_tr: usize,
    pub splits: BTreeMap<String, Vec<String>>,
    pub records: Vec<RecordEntry>,
    pub configs: Vec<ExperimentConfig>,
}

/// One record per configuration, assigned to splits by a seeded shuffle.
pub fn export_dataset(
    configs: &[ExperimentConfig],
    ratios: SplitRatios,
    split_seed: u64,
    out: &Path,
) -> Result<DatasetManifest> {
    ensure(!configs.is_empty(), || "dataset export needs at least one configuration".into())?;
    ratios.validate()?;
    for c in configs {
        c.validate()?;
    }
    let n_tr = configs[0].sequence.n_tr;
    ensure(configs.iter().all(|c| c.sequence.n_tr == n_tr), || "all configurations must share n_tr".into())?;

    let mut order: Vec<usize> = (0..configs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let counts = ratios.counts(configs.len());
    let mut split_of = vec![""; configs.len()];
    let mut pos = 0;
    for (name, &count) in SPLIT_NAMES.iter().zip(&counts) {
        for &i in &order[pos..pos + count] {
            split_of[i] = name;
        }
        pos += count;
    }

    let records = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| write_record(cfg, i, split_of[i], out))
        .collect::<Result<Vec<_>>>()?;

    let mut splits: BTreeMap<String, Vec<String>> = SPLIT_NAMES.iter().map(|s| (s.to_string(), Vec::new())).collect();
    for r in &records {
        splits.get_mut(&r.split).expect("known split").push(r.name.clone());
    }
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        format_version: DATASET_VERSION,
        version: VERSION.into(),
        split_seed,
        ratios,
        n_tr,
        splits,
        records,
        configs: configs.to_vec(),
    };
    write_atomic(&out.join("dataset.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

pub fn record_name(index: usize) -> String {
    format!("slice_{index:04}")
}

fn write_record(cfg: &ExperimentConfig, index: usize, split: &str, out: &Path) -> Result<RecordEntry> {
    let name = record_name(index);
    let dir = out.join(&name);
    let series = cfg.series()?;
    let phantom = cfg.phantom_slice()?;
    let truth = cfg.ground_truth()?;
    let (t, h, w) = series.frames.dim();

    let mut mrf = Array3::<f64>::zeros((2 * t, h, w));
    mrf.slice_mut(s![..t, .., ..]).assign(&series.frames.mapv(|v| v.re));
    mrf.slice_mut(s![t.., .., ..]).assign(&series.frames.mapv(|v| v.im));
    let mut contrasts = Array3::<f64>::zeros((3, h, w));
    for (k, c) in Contrast::ALL.into_iter().enumerate() {
        contrasts.slice_mut(s![k, .., ..]).assign(&normalize_95th(truth.get(c))?.0);
    }
    let mut maps = Array3::<f64>::zeros((4, h, w));
    for (k, m) in [&phantom.t1, &phantom.t2, &phantom.pd, &phantom.labels.mapv(f64::from)].into_iter().enumerate() {
        maps.slice_mut(s![k, .., ..]).assign(m);
    }

    let manifest =
        |part: &str| json!({ "stage": format!("dataset_{part}"), "version": VERSION, "record": name, "config": cfg });
    let parts = [
        ("mrf", Container::new(ArrayData::from_real(&mrf), "dataset_mrf", "a.u.", manifest("mrf"))),
        ("avg", Container::new(ArrayData::from_real(&series.time_average()), "dataset_avg", "a.u.", manifest("avg"))),
        (
            "contrasts",
            Container::new(ArrayData::from_real(&contrasts), "dataset_contrasts", "a.u.", manifest("contrasts")),
        ),
        ("maps", Container::new(ArrayData::from_real(&maps), "dataset_maps", "ms,ms,a.u.,label", manifest("maps"))),
    ];
    let mut files = BTreeMap::new();
    for (part, c) in parts {
        let rel = format!("{name}/{part}.bin");
        c.write(&dir.join(format!("{part}.bin")))?;
        files.insert(part.to_string(), FileEntry { path: rel, shape: c.header.shape.clone(), digest: c.header.digest });
    }
    Ok(RecordEntry { name, split: split.into(), config_index: index, files })
}
