//! Dense embedding matrices, the SSEV on-disk format, and cosine kernels.
//!
//! SSEV layout (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SSEV"
//! 4       4     version (u32) = 1
//! 8       8     count (u64)
//! 16      4     dim (u32)
//! 20      4     flags (u32), bit 0 = rows are pre-normalized
//! 24      ...   count * dim f32, row-major
//! ```
//!
//! Values are stored as `f32`; every dot product and norm is accumulated in
//! `f64` in ascending coordinate order, so results do not depend on how work
//! is split across threads.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SSEV";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const FLAG_NORMALIZED: u32 = 1;

/// Tolerance on row norms for matrices flagged as normalized.
pub const UNIT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    /// Builds a matrix from a flat row-major buffer, rejecting non-finite
    /// values and zero rows. When `normalized` is set every row must already
    /// have unit norm.
    pub fn new(dim: usize, data: Vec<f32>, normalized: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("embedding dim must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Format(format!(
                "buffer of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        let m = Self {
            dim,
            data,
            normalized,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R], normalized: bool) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data, normalized)
    }

    /// An empty matrix with the given dimension.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim: dim.max(1),
            data: Vec::new(),
            normalized: true,
        }
    }

    fn validate(&self) -> Result<()> {
        for (row, v) in self.data.chunks_exact(self.dim).enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row });
            }
            let n2 = dot(v, v);
            if n2 == 0.0 {
                return Err(Error::ZeroRow { row });
            }
            if self.normalized {
                let norm = n2.sqrt();
                if (norm - 1.0).abs() > UNIT_TOLERANCE {
                    return Err(Error::NotNormalized { row, norm });
                }
            }
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Panics on an out-of-range index; use [`EmbeddingMatrix::get`] for a
    /// checked lookup.
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize) -> Result<&[f32]> {
        if i >= self.count() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.count(),
            });
        }
        Ok(self.row(i))
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn gather(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.get(r)?);
        }
        Ok(Self {
            dim: self.dim,
            data,
            normalized: self.normalized,
        })
    }

    /// Appends one row. The row must be finite and nonzero; it must be unit
    /// if the matrix is flagged normalized.
    pub fn push_row(&mut self, row: &[f32]) -> Result<()> {
        if self.data.is_empty() && self.dim != row.len() {
            self.dim = row.len();
        }
        if row.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        let single = Self::new(self.dim, row.to_vec(), self.normalized).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { row: self.count() },
            Error::ZeroRow { .. } => Error::ZeroRow { row: self.count() },
            Error::NotNormalized { norm, .. } => Error::NotNormalized {
                row: self.count(),
                norm,
            },
            other => other,
        })?;
        self.data.extend_from_slice(&single.data);
        Ok(())
    }

    /// Returns a copy with every row scaled to unit L2 norm.
    pub fn normalize(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            normalize_in_place(row);
        }
        Self {
            dim: self.dim,
            data,
            normalized: true,
        }
    }

    /// Serializes to SSEV bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        let flags = if self.normalized { FLAG_NORMALIZED } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[0..4])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u32_at(16) as usize;
        let flags = u32_at(20);
        if dim == 0 {
            return Err(Error::Format("dim is zero".into()));
        }
        let expected = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(dim))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("count*dim overflows".into()))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "header declares {count}x{dim} ({expected} payload bytes) but file has {} payload bytes",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dim, data, flags & FLAG_NORMALIZED != 0)
    }
}

/// Reads an SSEV file.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_bytes(&bytes)
}

/// Writes an SSEV file.
pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&m.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Dot product accumulated in `f64`, ascending coordinate order.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (&x, &y)| acc + x as f64 * y as f64)
}

#[inline]
pub fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize_in_place(v: &mut [f32]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x = (*x as f64 / n) as f32;
        }
    }
}

/// Returns a unit-norm copy of `v`.
pub fn normalized(v: &[f32]) -> Vec<f32> {
    let mut out = v.to_vec();
    normalize_in_place(&mut out);
    out
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidParam("cosine of a zero vector".into()));
    }
    Ok(cosine_unchecked(a, b, na, nb))
}

/// Cosine with precomputed norms; callers guarantee matching dims and
/// nonzero norms.
#[inline]
pub(crate) fn cosine_unchecked(a: &[f32], b: &[f32], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Squared Euclidean distance between an `f32` row and an `f64` point.
#[inline]
pub(crate) fn sq_dist_mixed(a: &[f32], c: &[f64]) -> f64 {
    a.iter().zip(c).fold(0.0f64, |acc, (&x, &y)| {
        let d = x as f64 - y;
        acc + d * d
    })
}

/// Symmetric matrix of cosine distances `1 - cos` over a subset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Pairwise `1 - cos` distances between the given rows of `m`.
///
/// Rows are computed in parallel; each entry uses the same scalar kernel as
/// [`cosine`], so the result is identical to a sequential loop.
pub fn pairwise_distances(rows: &[usize], m: &EmbeddingMatrix) -> Result<DistanceMatrix> {
    for &r in rows {
        m.get(r)?;
    }
    let n = rows.len();
    let norms: Vec<f64> = rows.iter().map(|&r| norm(m.row(r))).collect();
    let mut data = vec![0.0f64; n * n];
    data.par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(i, out)| {
            for (j, slot) in out.iter_mut().enumerate() {
                if i == j {
                    *slot = 0.0;
                    continue;
                }
                // lower index first so (i, j) and (j, i) are bit-identical
                let (p, q) = if i < j { (i, j) } else { (j, i) };
                let c = cosine_unchecked(m.row(rows[p]), m.row(rows[q]), norms[p], norms[q]);
                *slot = 1.0 - c;
            }
        });
    Ok(DistanceMatrix { n, data })
}
