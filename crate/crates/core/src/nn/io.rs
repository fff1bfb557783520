//! Model file serialization.
//!
//! Layout of a `.bsnt` model file:
//!
//! ```text
//! offset 0   magic  b"BSNT"
//! offset 4   version u16 little-endian (currently 1)
//! offset 6   header length u32 little-endian
//! offset 10  header: JSON { "config": ModelConfig, "scaler": ScalerParams }
//! then       parameter tensors, little-endian f32, in the canonical
//!            tensor order of `ParamSet::tensors`
//! ```
//!
//! Round-tripping is bitwise exact: `save_model` followed by `load_model`
//! reproduces the parameter byte stream, the config, and the embedded
//! scaler exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::{Model, ModelConfig, ParamSet};
use crate::preprocess::ScalerParams;

pub const MODEL_MAGIC: &[u8; 4] = b"BSNT";
pub const MODEL_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    scaler: ScalerParams,
    class_names: Vec<String>,
}

pub fn save_model(model: &Model<f32>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        scaler: model.scaler.clone(),
        class_names: model.class_names.clone(),
    })?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for tensor in model.params.tensors() {
        for &v in tensor {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model<f32>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut offset = 0u64;

    let mut magic = [0u8; 4];
    read_exact_at(&mut r, &mut magic, &mut offset, "magic")?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected {MODEL_MAGIC:?}"),
        });
    }

    let mut buf2 = [0u8; 2];
    read_exact_at(&mut r, &mut buf2, &mut offset, "version")?;
    let version = u16::from_le_bytes(buf2);
    if version != MODEL_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}, expected {MODEL_VERSION}"),
        });
    }

    let mut buf4 = [0u8; 4];
    read_exact_at(&mut r, &mut buf4, &mut offset, "header length")?;
    let header_len = u32::from_le_bytes(buf4) as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact_at(&mut r, &mut header_bytes, &mut offset, "header")?;
    let header: Header = serde_json::from_slice(&header_bytes).map_err(|e| Error::Format {
        offset: 10,
        message: format!("invalid header JSON: {e}"),
    })?;
    header.config.validate()?;

    let mut params = ParamSet::<f32>::zeros(&header.config);
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            read_exact_at(&mut r, &mut buf4, &mut offset, "parameter data")?;
            *v = f32::from_le_bytes(buf4);
        }
    }

    // a trailing byte means the file disagrees with the config's shapes
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format {
            offset,
            message: "trailing bytes after parameter data".into(),
        });
    }

    Ok(Model {
        config: header.config,
        scaler: header.scaler,
        class_names: header.class_names,
        params,
    })
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Format {
        offset: *offset,
        message: format!("truncated while reading {what}: {e}"),
    })?;
    *offset += buf.len() as u64;
    Ok(())
}
