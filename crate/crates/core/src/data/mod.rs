//! N-BaIoT dataset ingestion and deterministic stratified splitting.
//!
//! The on-disk layout is one directory per device, each holding a benign
//! capture plus per-attack CSVs:
//!
//! ```text
//! <root>/
//!   Danmini_Doorbell/
//!     benign_traffic.csv
//!     gafgyt_attacks/combo.csv junk.csv scan.csv ...
//!     mirai_attacks/ack.csv scan.csv syn.csv udp.csv udpplain.csv
//!   Ecobee_Thermostat/
//!     ...
//! ```
//!
//! Every CSV has one header row naming the 115 statistical features,
//! then numeric rows. A [`ClassMap`] assigns label indices by matching
//! glob patterns against paths relative to the root; rows are pooled
//! across devices per class.
//!
//! Loading and splitting are pure functions of `(inputs, seed)`: files
//! are matched in sorted order, rows keep file order, and all shuffling
//! uses [`SplitMix64`] substreams keyed by class
//! index, so two invocations agree byte-for-byte.

pub mod cache;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Feature count of the N-BaIoT per-packet statistics vector.
pub const NUM_FEATURES: usize = 115;

/// One traffic sample: 115 features plus a class index.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f32>,
    pub label: usize,
}

/// Ordered (class name, glob pattern) pairs; the position of an entry is
/// its label index and the canonical report order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    pub entries: Vec<ClassEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub name: String,
    pub pattern: String,
}

impl ClassMap {
    pub fn new(entries: Vec<ClassEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("class map must not be empty".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|p| p.name == e.name) {
                return Err(Error::Config(format!("duplicate class name '{}'", e.name)));
            }
        }
        Ok(ClassMap { entries })
    }

    /// The eight default classes (benign plus seven attacks), in report
    /// order, with patterns for the standard N-BaIoT directory layout.
    pub fn nbaiot_default() -> Self {
        let entry = |name: &str, pattern: &str| ClassEntry {
            name: name.to_string(),
            pattern: pattern.to_string(),
        };
        ClassMap {
            entries: vec![
                entry("benign", "*/benign_traffic.csv"),
                entry("mirai_udp", "*/mirai_attacks/udp.csv"),
                entry("gafgyt_combo", "*/gafgyt_attacks/combo.csv"),
                entry("gafgyt_junk", "*/gafgyt_attacks/junk.csv"),
                entry("gafgyt_scan", "*/gafgyt_attacks/scan.csv"),
                entry("mirai_ack", "*/mirai_attacks/ack.csv"),
                entry("mirai_syn", "*/mirai_attacks/syn.csv"),
                entry("mirai_udp_plain", "*/mirai_attacks/udpplain.csv"),
            ],
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let entries: Vec<ClassEntry> = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: invalid class map: {e}", path.display())))?;
        ClassMap::new(entries)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Disjoint stratified partition of a sample set.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub seed: u64,
    /// `(test_frac, val_frac)`
    pub fractions: (f64, f64),
}

/// Index form of a split, relative to the input sample order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<u32>,
    pub validation: Vec<u32>,
    pub test: Vec<u32>,
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Load and label the dataset under `root` according to `class_map`.
///
/// Files per class are matched by glob, sorted by path, and parsed in
/// parallel; the merged order is `(class, file, row)` regardless of
/// thread scheduling. When `per_class_cap` is set, each class is
/// uniformly subsampled to at most that many rows with the shuffle
/// substream keyed by `(seed, class index)`.
pub fn load_dataset(
    root: &Path,
    class_map: &ClassMap,
    per_class_cap: Option<usize>,
    seed: u64,
) -> Result<Vec<Sample>> {
    if !root.is_dir() {
        return Err(Error::Data(format!(
            "dataset root {} is not a directory",
            root.display()
        )));
    }

    let mut samples = Vec::new();
    for (label, entry) in class_map.entries.iter().enumerate() {
        let files = match_class_files(root, entry)?;
        let per_file: Vec<Vec<Vec<f32>>> = files
            .par_iter()
            .map(|f| parse_feature_csv(f))
            .collect::<Result<_>>()?;
        let mut rows: Vec<Vec<f32>> = per_file.into_iter().flatten().collect();

        if let Some(cap) = per_class_cap {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            SplitMix64::with_stream(seed, label as u64).shuffle(&mut order);
            order.truncate(cap);
            let mut taken: Vec<Option<Vec<f32>>> = rows.into_iter().map(Some).collect();
            rows = order.into_iter().map(|i| taken[i].take().unwrap()).collect();
        }

        samples.extend(rows.into_iter().map(|features| Sample { features, label }));
    }
    Ok(samples)
}

fn match_class_files(root: &Path, entry: &ClassEntry) -> Result<Vec<PathBuf>> {
    let pattern = root.join(&entry.pattern);
    let pattern_str = pattern.to_string_lossy().into_owned();
    let matches = glob::glob(&pattern_str)
        .map_err(|e| Error::Config(format!("class '{}': bad pattern: {e}", entry.name)))?;
    let mut files: Vec<PathBuf> = matches
        .filter_map(|m| m.ok())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::ClassFilesMissing {
            class: entry.name.clone(),
            pattern: entry.pattern.clone(),
            root: root.to_path_buf(),
        });
    }
    Ok(files)
}

fn parse_feature_csv(path: &Path) -> Result<Vec<Vec<f32>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header_len = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .len();
    if header_len != NUM_FEATURES {
        return Err(Error::CsvField {
            file: path.to_path_buf(),
            line: 1,
            message: format!("header has {header_len} columns, expected {NUM_FEATURES}"),
        });
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != NUM_FEATURES {
            return Err(Error::CsvField {
                file: path.to_path_buf(),
                line,
                message: format!("row has {} columns, expected {NUM_FEATURES}", record.len()),
            });
        }
        let mut features = Vec::with_capacity(NUM_FEATURES);
        for (col, field) in record.iter().enumerate() {
            let value: f32 = field.trim().parse().map_err(|_| Error::CsvField {
                file: path.to_path_buf(),
                line,
                message: format!("column {} is not numeric: '{field}'", col + 1),
            })?;
            if !value.is_finite() {
                return Err(Error::CsvField {
                    file: path.to_path_buf(),
                    line,
                    message: format!("column {} is not finite: '{field}'", col + 1),
                });
            }
            features.push(value);
        }
        rows.push(features);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Stratified split of label indices. Per class, indices are shuffled
/// with substream `(seed, class)` and dealt out as
/// `round(test_frac * n)` test, `round(val_frac * n)` validation, rest
/// train.
pub fn split_indices(
    labels: &[usize],
    num_classes: usize,
    test_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<SplitIndices> {
    if labels.is_empty() {
        return Err(Error::Config("cannot split an empty sample set".into()));
    }
    if !(0.0..1.0).contains(&test_frac)
        || !(0.0..1.0).contains(&val_frac)
        || test_frac + val_frac >= 1.0
    {
        return Err(Error::Config(format!(
            "fractions out of range: test {test_frac}, validation {val_frac} (each >= 0, sum < 1)"
        )));
    }

    let mut by_class: Vec<Vec<u32>> = vec![Vec::new(); num_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::Data(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        by_class[label].push(i as u32);
    }

    let mut split = SplitIndices {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut indices) in by_class.into_iter().enumerate() {
        let n = indices.len();
        if n == 0 {
            continue;
        }
        SplitMix64::with_stream(seed, class as u64).shuffle(&mut indices);
        let n_test = (test_frac * n as f64).round() as usize;
        let n_val = ((val_frac * n as f64).round() as usize).min(n - n_test);
        split.test.extend_from_slice(&indices[..n_test]);
        split.validation.extend_from_slice(&indices[n_test..n_test + n_val]);
        split.train.extend_from_slice(&indices[n_test + n_val..]);
    }
    Ok(split)
}

/// Stratified split of owned samples (see [`split_indices`]).
pub fn split_dataset(
    samples: Vec<Sample>,
    test_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    let num_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let idx = split_indices(&labels, num_classes, test_frac, val_frac, seed)?;
    let mut pool: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
    let mut take = |ids: &[u32]| -> Vec<Sample> {
        ids.iter().map(|&i| pool[i as usize].take().unwrap()).collect()
    };
    Ok(DatasetSplit {
        test: take(&idx.test),
        validation: take(&idx.validation),
        train: take(&idx.train),
        seed,
        fractions: (test_frac, val_frac),
    })
}

/// Per-class sample counts; `counts[i]` is the number of samples labeled
/// `i` and the counts sum to the input length.
pub fn class_counts(samples: &[Sample], num_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_classes];
    for s in samples {
        counts[s.label] += 1;
    }
    counts
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// The three splits are pairwise disjoint on indices, cover the
        /// input exactly, and stay stratified per class.
        #[test]
        fn split_partitions_and_stratifies(
            labels in proptest::collection::vec(0usize..4, 4..300),
            seed in 0u64..1000,
            test_pct in 0usize..50,
            val_pct in 0usize..40,
        ) {
            let test_frac = test_pct as f64 / 100.0;
            let val_frac = val_pct as f64 / 100.0;
            let idx = split_indices(&labels, 4, test_frac, val_frac, seed).unwrap();

            let mut all: Vec<u32> = idx
                .train
                .iter()
                .chain(&idx.validation)
                .chain(&idx.test)
                .copied()
                .collect();
            all.sort_unstable();
            let expect: Vec<u32> = (0..labels.len() as u32).collect();
            prop_assert_eq!(all, expect);

            for c in 0..4 {
                let total = labels.iter().filter(|&&l| l == c).count() as f64;
                if total == 0.0 {
                    continue;
                }
                let in_test =
                    idx.test.iter().filter(|&&i| labels[i as usize] == c).count() as f64;
                prop_assert!(
                    (in_test / total - test_frac).abs() <= 1.0 / total + 1e-9,
                    "class {} test share {} of {} for frac {}", c, in_test, total, test_frac
                );
            }
        }

        /// Same inputs and seed give identical splits.
        #[test]
        fn split_is_deterministic(
            labels in proptest::collection::vec(0usize..3, 3..100),
            seed in 0u64..1000,
        ) {
            let a = split_indices(&labels, 3, 0.25, 0.15, seed).unwrap();
            let b = split_indices(&labels, 3, 0.25, 0.15, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
