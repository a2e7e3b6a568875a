//! Binary checkpoint format, little-endian, no alignment padding:
//! magic "DPFK", u32 version = 1, u32 tensor count, then per tensor
//! u16 name length, UTF-8 name, u8 rank, u32 dims, u8 dtype tag
//! (0 = f32, 1 = f64), raw data.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::param::ParamSet;
use crate::scalar::{DType, Scalar};
use crate::shape::Shape;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"DPFK";
const VERSION: u32 = 1;

/// One stored tensor, values widened to f64 for dtype-agnostic handling.
#[derive(Debug)]
pub struct Entry {
    pub name: String,
    pub shape: Shape,
    pub dtype: DType,
    pub values: Vec<f64>,
}

/// Outcome of a by-name partial load (pretrained-backbone transfer).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadReport {
    pub matched: Vec<String>,
    pub unmatched_in_file: Vec<String>,
    pub unmatched_in_model: Vec<String>,
}

pub fn save<T: Scalar>(path: impl AsRef<Path>, params: &ParamSet<T>) -> Result<()> {
    let path = path.as_ref();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params.iter() {
        let name = p.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.push(4u8);
        for d in p.tensor.shape().dims() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.push(T::DTYPE as u8);
        for &v in p.tensor.data().iter() {
            v.write_le(&mut buf);
        }
    }
    fs::write(path, &buf).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

pub fn read_entries(path: impl AsRef<Path>) -> Result<Vec<Entry>> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: wanted {} bytes at offset {}, file has {}",
                n, *pos, buf.len()
            )));
        }
        let s = &buf[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let magic = take(&mut pos, 4)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {:?}, expected {:?}", magic, MAGIC)));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}, expected {VERSION}")));
    }
    let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|e| Error::Checkpoint(format!("invalid tensor name: {e}")))?;
        let rank = take(&mut pos, 1)?[0];
        if rank != 4 {
            return Err(Error::Checkpoint(format!("tensor {name}: unsupported rank {rank}")));
        }
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        }
        let tag = take(&mut pos, 1)?[0];
        let dtype = DType::from_tag(tag)
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name}: unknown dtype tag {tag}")))?;
        let shape = Shape::from(dims);
        let raw = take(&mut pos, shape.numel() * dtype.byte_width())?;
        let values: Vec<f64> = match dtype {
            DType::F32 => raw.chunks_exact(4).map(|b| f32::read_le(b) as f64).collect(),
            DType::F64 => raw.chunks_exact(8).map(f64::read_le).collect(),
        };
        entries.push(Entry { name, shape, dtype, values });
    }
    Ok(entries)
}

/// Strict load: every model parameter must be present in the file with a
/// matching shape.
pub fn load_into<T: Scalar>(path: impl AsRef<Path>, params: &ParamSet<T>) -> Result<()> {
    let entries = read_entries(path)?;
    let by_name: std::collections::HashMap<&str, &Entry> =
        entries.iter().map(|e| (e.name.as_str(), e)).collect();
    let missing: Vec<String> = params
        .iter()
        .filter(|p| !by_name.contains_key(p.name.as_str()))
        .map(|p| p.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Checkpoint(format!("missing parameters in file: {}", missing.join(", "))));
    }
    for p in params.iter() {
        let e = by_name[p.name.as_str()];
        assign(&p.name, &p.tensor, e)?;
    }
    Ok(())
}

/// Partial load by name: copies every entry whose name exists in the model,
/// reporting matched and unmatched names on both sides.
pub fn load_matching<T: Scalar>(path: impl AsRef<Path>, params: &ParamSet<T>) -> Result<LoadReport> {
    let entries = read_entries(path)?;
    let mut report = LoadReport {
        matched: Vec::new(),
        unmatched_in_file: Vec::new(),
        unmatched_in_model: Vec::new(),
    };
    let mut seen = std::collections::HashSet::new();
    for e in &entries {
        match params.get(&e.name) {
            Some(p) => {
                assign(&e.name, &p.tensor, e)?;
                report.matched.push(e.name.clone());
                seen.insert(e.name.clone());
            }
            None => report.unmatched_in_file.push(e.name.clone()),
        }
    }
    for p in params.iter() {
        if !seen.contains(&p.name) {
            report.unmatched_in_model.push(p.name.clone());
        }
    }
    Ok(report)
}

fn assign<T: Scalar>(name: &str, tensor: &Tensor<T>, entry: &Entry) -> Result<()> {
    if tensor.shape() != entry.shape {
        return Err(Error::Checkpoint(format!(
            "tensor {name}: shape mismatch, model {} vs file {}",
            tensor.shape(),
            entry.shape
        )));
    }
    let vals: Vec<T> = entry.values.iter().map(|&v| T::from_f64(v)).collect();
    tensor.set_data(&vals);
    Ok(())
}
