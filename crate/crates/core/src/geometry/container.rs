//! Binary container for named f64 arrays: a JSON header describing array
//! names and shapes, followed by the little-endian payloads in header order.
//!
//! Layout: magic `F64C`, u32 LE format version, u64 LE header length, the
//! JSON header bytes, then each array as consecutive little-endian f64.
//! Integer payloads (triangle indices) are stored as exactly representable
//! f64 values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"F64C";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a container file (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    BadVersion(u32),
    #[error("malformed header: {0}")]
    BadHeader(#[from] serde_json::Error),
    #[error("array `{0}` not present")]
    Missing(String),
    #[error("array `{name}` has unexpected shape {shape:?}")]
    BadShape { name: String, shape: Vec<usize> },
    #[error("payload truncated: expected {expected} values for `{name}`")]
    Truncated { name: String, expected: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    arrays: Vec<ArrayMeta>,
}

/// In-memory set of named arrays with shapes. Matrices are row-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArrayContainer {
    entries: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl ArrayContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.retain(|(n, _, _)| n != name);
        self.entries.push((name.to_string(), shape, data));
    }

    pub fn insert_vector(&mut self, name: &str, v: &DVector<f64>) {
        self.insert(name, vec![v.len()], v.as_slice().to_vec());
    }

    /// Store a matrix row-major under `name` with shape `[rows, cols]`.
    pub fn insert_matrix(&mut self, name: &str, m: &DMatrix<f64>) {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        self.insert(name, vec![m.nrows(), m.ncols()], data);
    }

    pub fn get(&self, name: &str) -> Result<(&[usize], &[f64]), ContainerError> {
        self.entries
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, shape, data)| (shape.as_slice(), data.as_slice()))
            .ok_or_else(|| ContainerError::Missing(name.to_string()))
    }

    pub fn get_vector(&self, name: &str) -> Result<DVector<f64>, ContainerError> {
        let (shape, data) = self.get(name)?;
        if shape.len() != 1 {
            return Err(ContainerError::BadShape {
                name: name.to_string(),
                shape: shape.to_vec(),
            });
        }
        Ok(DVector::from_column_slice(data))
    }

    pub fn get_matrix(&self, name: &str) -> Result<DMatrix<f64>, ContainerError> {
        let (shape, data) = self.get(name)?;
        if shape.len() != 2 {
            return Err(ContainerError::BadShape {
                name: name.to_string(),
                shape: shape.to_vec(),
            });
        }
        let (rows, cols) = (shape[0], shape[1]);
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = data[r * cols + c];
            }
        }
        Ok(m)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _, _)| n.as_str())
    }
}

/// Serialize the container to a writer.
pub fn write_container_to(w: &mut impl Write, c: &ArrayContainer) -> Result<(), ContainerError> {
    let header = Header {
        arrays: c
            .entries
            .iter()
            .map(|(name, shape, _)| ArrayMeta {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())?;
    w.write_all(&header_json)?;
    for (_, _, data) in &c.entries {
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_container(path: &Path, c: &ArrayContainer) -> Result<(), ContainerError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_container_to(&mut f, c)?;
    f.flush()?;
    Ok(())
}

/// Deserialize a container from a reader.
pub fn read_container_from(r: &mut impl Read) -> Result<ArrayContainer, ContainerError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(ContainerError::BadVersion(version));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let header_len = u64::from_le_bytes(buf8) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;

    let mut c = ArrayContainer::new();
    for meta in header.arrays {
        let len: usize = meta.shape.iter().product();
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes).map_err(|_| ContainerError::Truncated {
            name: meta.name.clone(),
            expected: len,
        })?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        c.insert(&meta.name, meta.shape, data);
    }
    Ok(c)
}

pub fn read_container(path: &Path) -> Result<ArrayContainer, ContainerError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_container_from(&mut f)
}
