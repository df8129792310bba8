//! Binary feature matrices and CSV / binary label files.
//!
//! Feature file: `NIERMFE1`, `n_rows: u64`, `n_cols: u64`, dtype byte (4 or 8),
//! 7 zero bytes, then row-major values. Label file: CSV `index,label` or
//! `NIERMLB1`, `n: u64`, `k: u32`, `n` labels as `u32`. All integers and floats
//! are little-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

pub const FEATURE_MAGIC: &[u8; 8] = b"NIERMFE1";
pub const LABEL_MAGIC: &[u8; 8] = b"NIERMLB1";
const FEATURE_HEADER: usize = 32;
const LABEL_HEADER: usize = 20;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("size mismatch: expected {expected} bytes, got {got}")]
    SizeMismatch { expected: u64, got: u64 },

    #[error("unknown dtype code {0} (expected 4 or 8)")]
    InvalidDtype(u8),

    #[error("nonzero header padding")]
    BadPadding,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("label {label} at index {index} is out of range for K = {k}")]
    LabelOutOfRange { index: usize, label: u64, k: u64 },

    #[error("malformed label CSV: {0}")]
    MalformedCsv(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type IoResult<T> = std::result::Result<T, IoError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn from_code(code: u8) -> IoResult<Self> {
        match code {
            4 => Ok(Dtype::F32),
            8 => Ok(Dtype::F64),
            other => Err(IoError::InvalidDtype(other)),
        }
    }
}

fn check_finite(x: &Array2<f64>) -> IoResult<()> {
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(IoError::NonFinite { row, col });
    }
    Ok(())
}

/// Serializes a finite matrix. `F32` stores each value rounded to nearest.
pub fn encode_features(x: &Array2<f64>, dtype: Dtype) -> IoResult<Vec<u8>> {
    check_finite(x)?;
    let width = dtype.code() as usize;
    let mut out = Vec::with_capacity(FEATURE_HEADER + x.len() * width);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(x.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(x.ncols() as u64).to_le_bytes());
    out.push(dtype.code());
    out.extend_from_slice(&[0; 7]);
    for ((row, col), &v) in x.indexed_iter() {
        match dtype {
            Dtype::F32 => {
                let narrow = v as f32;
                if !narrow.is_finite() {
                    return Err(IoError::NonFinite { row, col });
                }
                out.extend_from_slice(&narrow.to_le_bytes());
            }
            Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    Ok(out)
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

/// Parses a feature file; 32-bit values are widened exactly.
pub fn decode_features(bytes: &[u8]) -> IoResult<(Array2<f64>, Dtype)> {
    if bytes.len() < FEATURE_HEADER {
        return Err(IoError::SizeMismatch {
            expected: FEATURE_HEADER as u64,
            got: bytes.len() as u64,
        });
    }
    if &bytes[..8] != FEATURE_MAGIC {
        return Err(IoError::BadMagic { expected: "NIERMFE1" });
    }
    let rows = u64_at(bytes, 8);
    let cols = u64_at(bytes, 16);
    let dtype = Dtype::from_code(bytes[24])?;
    if bytes[25..32].iter().any(|&b| b != 0) {
        return Err(IoError::BadPadding);
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(dtype.code() as u64))
        .and_then(|p| p.checked_add(FEATURE_HEADER as u64))
        .ok_or(IoError::SizeMismatch {
            expected: u64::MAX,
            got: bytes.len() as u64,
        })?;
    if expected != bytes.len() as u64 {
        return Err(IoError::SizeMismatch {
            expected,
            got: bytes.len() as u64,
        });
    }
    let payload = &bytes[FEATURE_HEADER..];
    let values: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    let x = Array2::from_shape_vec((rows as usize, cols as usize), values).expect("size checked");
    check_finite(&x)?;
    Ok((x, dtype))
}

pub fn write_features(x: &Array2<f64>, dtype: Dtype, path: impl AsRef<Path>) -> IoResult<()> {
    fs::write(path, encode_features(x, dtype)?)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> IoResult<Array2<f64>> {
    Ok(decode_features(&fs::read(path)?)?.0)
}

/// Labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl LabelSet {
    pub fn new(labels: Vec<usize>, k: usize) -> IoResult<Self> {
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= k) {
            return Err(IoError::LabelOutOfRange {
                index,
                label: label as u64,
                k: k as u64,
            });
        }
        Ok(Self { labels, k })
    }

    /// `k` taken as one more than the largest label (at least 2).
    pub fn infer_k(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
        Self { labels, k }
    }
}

pub fn encode_labels_binary(set: &LabelSet) -> IoResult<Vec<u8>> {
    let k = u32::try_from(set.k).map_err(|_| IoError::LabelOutOfRange {
        index: 0,
        label: set.k as u64,
        k: u32::MAX as u64,
    })?;
    let mut out = Vec::with_capacity(LABEL_HEADER + 4 * set.labels.len());
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&(set.labels.len() as u64).to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    for (index, &y) in set.labels.iter().enumerate() {
        if y >= set.k {
            return Err(IoError::LabelOutOfRange {
                index,
                label: y as u64,
                k: set.k as u64,
            });
        }
        out.extend_from_slice(&(y as u32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_labels_binary(bytes: &[u8]) -> IoResult<LabelSet> {
    if bytes.len() < LABEL_HEADER {
        return Err(IoError::SizeMismatch {
            expected: LABEL_HEADER as u64,
            got: bytes.len() as u64,
        });
    }
    if &bytes[..8] != LABEL_MAGIC {
        return Err(IoError::BadMagic { expected: "NIERMLB1" });
    }
    let n = u64_at(bytes, 8);
    let k = u32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes"));
    let expected = n
        .checked_mul(4)
        .and_then(|p| p.checked_add(LABEL_HEADER as u64))
        .unwrap_or(u64::MAX);
    if expected != bytes.len() as u64 {
        return Err(IoError::SizeMismatch {
            expected,
            got: bytes.len() as u64,
        });
    }
    let labels = bytes[LABEL_HEADER..]
        .chunks_exact(4)
        .enumerate()
        .map(|(index, c)| {
            let y = u32::from_le_bytes(c.try_into().expect("4 bytes"));
            if y >= k {
                Err(IoError::LabelOutOfRange {
                    index,
                    label: y as u64,
                    k: k as u64,
                })
            } else {
                Ok(y as usize)
            }
        })
        .collect::<IoResult<Vec<_>>>()?;
    Ok(LabelSet { labels, k: k as usize })
}

pub fn encode_labels_csv(labels: &[usize]) -> IoResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "label"])?;
    for (i, y) in labels.iter().enumerate() {
        w.serialize((i, y))?;
    }
    w.into_inner().map_err(|e| IoError::Io(e.into_error()))
}

/// Parses `index,label` rows in any order; indices must be exactly `0..n`.
pub fn decode_labels_csv(bytes: &[u8]) -> IoResult<Vec<usize>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = r.headers()?.clone();
    if header.len() != 2 || &header[0] != "index" || &header[1] != "label" {
        return Err(IoError::MalformedCsv(format!("header must be index,label, got {header:?}")));
    }
    let mut slots: Vec<Option<usize>> = Vec::new();
    for (line, rec) in r.deserialize::<(u64, u64)>().enumerate() {
        let (index, label) = rec.map_err(|e| IoError::MalformedCsv(format!("row {}: {e}", line + 1)))?;
        let index = index as usize;
        if index >= slots.len() {
            slots.resize(index + 1, None);
        }
        if slots[index].replace(label as usize).is_some() {
            return Err(IoError::MalformedCsv(format!("duplicate index {index}")));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| IoError::MalformedCsv(format!("missing index {i}"))))
        .collect()
}

/// Reads either label format, detected by the binary magic. CSV files take
/// `k` from the caller, or infer it from the largest label.
pub fn read_labels(path: impl AsRef<Path>, k: Option<usize>) -> IoResult<LabelSet> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(LABEL_MAGIC) {
        let set = decode_labels_binary(&bytes)?;
        return match k {
            Some(k) if k != set.k => LabelSet::new(set.labels, k),
            _ => Ok(set),
        };
    }
    let labels = decode_labels_csv(&bytes)?;
    match k {
        Some(k) => LabelSet::new(labels, k),
        None => Ok(LabelSet::infer_k(labels)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFormat {
    Csv,
    Binary,
}

pub fn write_labels(set: &LabelSet, format: LabelFormat, path: impl AsRef<Path>) -> IoResult<()> {
    let bytes = match format {
        LabelFormat::Csv => {
            LabelSet::new(set.labels.clone(), set.k)?;
            encode_labels_csv(&set.labels)?
        }
        LabelFormat::Binary => encode_labels_binary(set)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}
