use std::io::{BufRead, Write};

use crate::error::{Result, ZoError};

/// Binary-labelled sparse rows in compressed row storage.
///
/// Feature indices are kept 0-based internally and written back 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
}

impl SparseDataset {
    /// Builds a dataset from rows of `(0-based index, value)` pairs.
    pub fn from_rows(rows: Vec<(f64, Vec<(u32, f64)>)>, dim: Option<usize>) -> Result<Self> {
        let mut b = Builder::default();
        for (label, entries) in rows {
            b.push_row(label, entries.into_iter(), 0)?;
        }
        b.finish(dim)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Row `i` as parallel slices of 0-based indices and values.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, v)| v * x[j as usize]).sum()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        (0..self.n()).map(|i| self.row_norm_sq(i)).fold(0.0, f64::max)
    }

    /// Raises the feature dimension; lowering it below the max index seen is an error.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        let seen = self.max_index_seen();
        if dim < seen {
            return Err(ZoError::Parameter(format!(
                "dimension override {dim} is below the largest feature index {seen}"
            )));
        }
        self.dim = dim;
        Ok(self)
    }

    fn max_index_seen(&self) -> usize {
        self.indices.iter().map(|&j| j as usize + 1).max().unwrap_or(0)
    }

    /// Scales every feature by its maximum absolute value.
    pub fn normalize_max_abs(&mut self) {
        let mut scale = vec![0.0f64; self.dim];
        for (&j, v) in self.indices.iter().zip(&self.values) {
            scale[j as usize] = scale[j as usize].max(v.abs());
        }
        for (&j, v) in self.indices.iter().zip(self.values.iter_mut()) {
            let s = scale[j as usize];
            if s > 0.0 {
                *v /= s;
            }
        }
    }

    /// Order-sensitive FNV-1a digest over labels, indices and value bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&(self.dim as u64).to_le_bytes());
        for i in 0..self.n() {
            eat(&self.labels[i].to_bits().to_le_bytes());
            let (idx, val) = self.row(i);
            eat(&(idx.len() as u64).to_le_bytes());
            for (j, v) in idx.iter().zip(val) {
                eat(&j.to_le_bytes());
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    /// Writes LIBSVM text. `{}` formatting of `f64` is the shortest
    /// representation that parses back to the same bits.
    pub fn write_libsvm<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n() {
            let label = self.labels[i];
            if label > 0.0 {
                write!(w, "+1")?;
            } else {
                write!(w, "-1")?;
            }
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                write!(w, " {}:{}", j + 1, v)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Builder {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
    max_index: usize,
}

impl Builder {
    fn push_row(
        &mut self,
        label: f64,
        entries: impl Iterator<Item = (u32, f64)>,
        line: usize,
    ) -> Result<()> {
        if self.indptr.is_empty() {
            self.indptr.push(0);
        }
        let label = map_label(label).ok_or_else(|| {
            ZoError::Schema(format!(
                "label {label} is not in {{-1, +1}} or {{0, 1}}{}",
                if line > 0 {
                    format!(" (line {line})")
                } else {
                    String::new()
                }
            ))
        })?;
        let mut prev: Option<u32> = None;
        for (j, v) in entries {
            if let Some(p) = prev {
                if j <= p {
                    return Err(ZoError::Parse {
                        line,
                        message: format!("feature indices not strictly increasing ({} then {})", p + 1, j + 1),
                    });
                }
            }
            if !v.is_finite() {
                return Err(ZoError::Parse {
                    line,
                    message: format!("non-finite value for feature {}", j + 1),
                });
            }
            prev = Some(j);
            self.indices.push(j);
            self.values.push(v);
            self.max_index = self.max_index.max(j as usize + 1);
        }
        self.labels.push(label);
        self.indptr.push(self.indices.len());
        Ok(())
    }

    fn finish(mut self, dim: Option<usize>) -> Result<SparseDataset> {
        if self.labels.is_empty() {
            return Err(ZoError::Input("dataset has no rows".into()));
        }
        if self.indptr.is_empty() {
            self.indptr.push(0);
        }
        let ds = SparseDataset {
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
            labels: self.labels,
            dim: self.max_index,
        };
        match dim {
            Some(d) => ds.with_dim(d),
            None => Ok(ds),
        }
    }
}

fn map_label(label: f64) -> Option<f64> {
    if label == 1.0 {
        Some(1.0)
    } else if label == -1.0 || label == 0.0 {
        Some(-1.0)
    } else {
        None
    }
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...` per line, 1-based indices,
/// `#` starts a comment, blank lines are skipped, labels `{0, 1}` become `{-1, +1}`.
pub fn parse_libsvm<R: BufRead>(mut reader: R) -> Result<SparseDataset> {
    let mut b = Builder::default();
    let mut line = String::new();
    let mut lineno = 0usize;
    let mut entries: Vec<(u32, f64)> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        let content = match line.find('#') {
            Some(p) => &line[..p],
            None => &line[..],
        };
        let mut tokens = content.split_ascii_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok.parse().map_err(|_| ZoError::Parse {
            line: lineno,
            message: format!("label {label_tok:?} is not a number"),
        })?;
        entries.clear();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| ZoError::Parse {
                line: lineno,
                message: format!("malformed pair {tok:?}"),
            })?;
            let idx: u32 = idx.parse().map_err(|_| ZoError::Parse {
                line: lineno,
                message: format!("bad feature index in {tok:?}"),
            })?;
            if idx == 0 {
                return Err(ZoError::Parse {
                    line: lineno,
                    message: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| ZoError::Parse {
                line: lineno,
                message: format!("bad feature value in {tok:?}"),
            })?;
            entries.push((idx - 1, val));
        }
        b.push_row(label, entries.drain(..), lineno)?;
    }
    b.finish(None)
}

/// Serializes and reparses a dataset.
pub fn write_read_roundtrip(ds: &SparseDataset) -> Result<SparseDataset> {
    let mut buf = Vec::new();
    ds.write_libsvm(&mut buf)?;
    let back = parse_libsvm(buf.as_slice())?;
    // the writer cannot encode trailing empty features
    back.with_dim(ds.dim())
}
