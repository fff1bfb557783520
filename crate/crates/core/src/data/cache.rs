//! Binary row cache and split manifest written by `prepare` and read
//! back by `train` / `eval`.
//!
//! Cache layout:
//!
//! ```text
//! offset 0  magic b"NBIO1"
//! offset 5  version u16 little-endian (currently 1)
//! offset 7  sample count u32, feature count u16, class count u16
//! offset 15 class-name table: u32 length + JSON array of strings
//! then      one record per sample: features as little-endian f32,
//!           then the label as a single byte
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Sample, SplitIndices};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 5] = b"NBIO1";
pub const CACHE_VERSION: u16 = 1;

pub fn write_cache(path: &Path, samples: &[Sample], class_names: &[String]) -> Result<()> {
    let num_features = samples.first().map_or(0, |s| s.features.len());
    if class_names.len() > u8::MAX as usize {
        return Err(Error::Config("cache supports at most 255 classes".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(samples.len() as u32).to_le_bytes())?;
    w.write_all(&(num_features as u16).to_le_bytes())?;
    w.write_all(&(class_names.len() as u16).to_le_bytes())?;
    let names = serde_json::to_vec(class_names)?;
    w.write_all(&(names.len() as u32).to_le_bytes())?;
    w.write_all(&names)?;
    for s in samples {
        if s.features.len() != num_features {
            return Err(Error::Shape(format!(
                "inconsistent feature count {} vs {num_features}",
                s.features.len()
            )));
        }
        for &f in &s.features {
            w.write_all(&f.to_le_bytes())?;
        }
        w.write_all(&[s.label as u8])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<(Vec<Sample>, Vec<String>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut offset = 0u64;

    let mut magic = [0u8; 5];
    read_exact_at(&mut r, &mut magic, &mut offset, "magic")?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad cache magic {magic:?}, expected {CACHE_MAGIC:?}"),
        });
    }
    let version = read_u16(&mut r, &mut offset, "version")?;
    if version != CACHE_VERSION {
        return Err(Error::Format {
            offset: 5,
            message: format!("unsupported cache version {version}"),
        });
    }
    let num_samples = read_u32(&mut r, &mut offset, "sample count")? as usize;
    let num_features = read_u16(&mut r, &mut offset, "feature count")? as usize;
    let num_classes = read_u16(&mut r, &mut offset, "class count")? as usize;
    let names_len = read_u32(&mut r, &mut offset, "class table length")? as usize;
    let mut names_bytes = vec![0u8; names_len];
    read_exact_at(&mut r, &mut names_bytes, &mut offset, "class table")?;
    let class_names: Vec<String> = serde_json::from_slice(&names_bytes).map_err(|e| Error::Format {
        offset,
        message: format!("invalid class table: {e}"),
    })?;
    if class_names.len() != num_classes {
        return Err(Error::Format {
            offset,
            message: format!(
                "class table has {} names, header says {num_classes}",
                class_names.len()
            ),
        });
    }

    let mut samples = Vec::with_capacity(num_samples);
    let mut feat_buf = vec![0u8; num_features * 4];
    let mut label_buf = [0u8; 1];
    for _ in 0..num_samples {
        read_exact_at(&mut r, &mut feat_buf, &mut offset, "feature row")?;
        let features: Vec<f32> = feat_buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        read_exact_at(&mut r, &mut label_buf, &mut offset, "label byte")?;
        let label = label_buf[0] as usize;
        if label >= num_classes {
            return Err(Error::Format {
                offset: offset - 1,
                message: format!("label {label} out of range for {num_classes} classes"),
            });
        }
        samples.push(Sample { features, label });
    }
    Ok((samples, class_names))
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Format {
        offset: *offset,
        message: format!("truncated while reading {what}: {e}"),
    })?;
    *offset += buf.len() as u64;
    Ok(())
}

fn read_u16<R: Read>(r: &mut R, offset: &mut u64, what: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact_at(r, &mut b, offset, what)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, offset: &mut u64, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_at(r, &mut b, offset, what)?;
    Ok(u32::from_le_bytes(b))
}

// ---------------------------------------------------------------------------
// Split manifest
// ---------------------------------------------------------------------------

/// JSON manifest tying a cache file to a reproducible split: the seed,
/// fractions, class names, and the cache row indices of each split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub test_frac: f64,
    pub val_frac: f64,
    pub class_names: Vec<String>,
    pub class_counts: Vec<u64>,
    pub indices: SplitIndices,
}

impl SplitManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: invalid split manifest: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<Sample> {
        (0..10)
            .map(|i| Sample {
                features: (0..6).map(|c| (i * 10 + c) as f32 * 0.5).collect(),
                label: i % 3,
            })
            .collect()
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.nbio");
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let original = samples();
        write_cache(&path, &original, &names).unwrap();
        let (loaded, loaded_names) = read_cache(&path).unwrap();
        assert_eq!(loaded, original);
        assert_eq!(loaded_names, names);
    }

    #[test]
    fn cache_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.nbio");
        write_cache(&path, &samples(), &["a".into(), "b".into(), "c".into()]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[2] = b'!';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_cache(&path), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn cache_rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.nbio");
        write_cache(&path, &samples(), &["a".into(), "b".into(), "c".into()]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_cache(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.json");
        let manifest = SplitManifest {
            seed: 7,
            test_frac: 0.2,
            val_frac: 0.1,
            class_names: vec!["a".into(), "b".into()],
            class_counts: vec![6, 4],
            indices: SplitIndices {
                train: vec![0, 1, 2],
                validation: vec![3],
                test: vec![4, 5],
            },
        };
        manifest.save(&path).unwrap();
        assert_eq!(SplitManifest::load(&path).unwrap(), manifest);
    }
}
