//! LIBSVM-format parsing, preprocessing and train/test splitting.
//!
//! Rows are kept in CSR form. Preprocessing scales every feature row to unit
//! Euclidean norm and appends a constant bias column, so downstream code can
//! assume `x_i = [chi_i^T 1]^T` with `||chi_i|| = 1` (or a bare bias for
//! all-zero rows).

use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Immutable CSR sparse dataset with +-1 labels (raw labels before
/// [`preprocess`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    n: usize,
    d: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl SparseDataset {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// `x_i^T w`.
    pub fn dot_row(&self, i: usize, w: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        let mut acc = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            acc += v * w[c as usize];
        }
        acc
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        let (_, vals) = self.row(i);
        vals.iter().map(|v| v * v).sum()
    }

    /// Scatters `scale * x_i` into `acc`.
    pub fn add_row_into(&self, i: usize, scale: f64, acc: &mut [f64]) {
        let (cols, vals) = self.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            acc[c as usize] += scale * v;
        }
    }

    /// Dataset restricted to `rows` (in the given order).
    fn take_rows(&self, rows: &[usize]) -> SparseDataset {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut labels = Vec::with_capacity(rows.len());
        row_offsets.push(0);
        for &r in rows {
            let (cols, vals) = self.row(r);
            col_indices.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_offsets.push(col_indices.len());
            labels.push(self.labels[r]);
        }
        SparseDataset {
            n: rows.len(),
            d: self.d,
            row_offsets,
            col_indices,
            values,
            labels,
        }
    }

    /// Serializes back to LIBSVM text (1-based ascending indices).
    pub fn to_libsvm_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let _ = write!(out, "{}", self.labels[i]);
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let _ = write!(out, " {}:{}", c + 1, v);
            }
            out.push('\n');
        }
        out
    }
}

/// Deterministic train/test partition of a source dataset.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: SparseDataset,
    pub test: SparseDataset,
    pub split_seed: u64,
    pub fraction: f64,
}

/// Parses LIBSVM text: `label idx:val idx:val ...` with 1-based strictly
/// increasing indices. Returns rows in file order with raw labels; `d` is the
/// maximum feature index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<SparseDataset> {
    let mut row_offsets = vec![0usize];
    let mut col_indices: Vec<u32> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut max_index = 0u32;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_ascii_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label token '{label_tok}'"),
        })?;
        let mut prev_index = 0u32;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got '{tok}'"),
            })?;
            let idx: u32 = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index '{idx_s}'"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value '{val_s}'"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if idx <= prev_index {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature index {idx} not strictly increasing"),
                });
            }
            prev_index = idx;
            max_index = max_index.max(idx);
            col_indices.push(idx - 1);
            values.push(val);
        }
        labels.push(label);
        row_offsets.push(col_indices.len());
    }

    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(SparseDataset {
        n: labels.len(),
        d: max_index as usize,
        row_offsets,
        col_indices,
        values,
        labels,
    })
}

/// Preprocesses a raw parsed dataset: scales each feature row to unit
/// Euclidean norm (all-zero rows stay zero), appends a bias column with
/// constant 1 at index `d_raw`, and maps the two raw label values to +-1
/// (maximum -> +1, minimum -> -1).
pub fn preprocess(raw: &SparseDataset) -> Result<SparseDataset> {
    preprocess_with_dim(raw, raw.d)
}

/// [`preprocess`] with an explicit raw feature count, for official train/test
/// file pairs whose maximum indices differ.
pub fn preprocess_with_dim(raw: &SparseDataset, d_raw: usize) -> Result<SparseDataset> {
    if d_raw < raw.d {
        return Err(Error::InvalidConfig(format!(
            "d_raw {} smaller than max index {} in data",
            d_raw, raw.d
        )));
    }
    let mut distinct: Vec<f64> = Vec::new();
    for &y in &raw.labels {
        if !distinct.contains(&y) {
            distinct.push(y);
            if distinct.len() > 2 {
                return Err(Error::Labels(format!(
                    "more than two distinct labels (found {:?}...)",
                    distinct
                )));
            }
        }
    }
    if distinct.len() < 2 {
        return Err(Error::Labels("fewer than two distinct labels".into()));
    }
    let hi = distinct[0].max(distinct[1]);

    let mut row_offsets = Vec::with_capacity(raw.n + 1);
    let mut col_indices = Vec::with_capacity(raw.nnz() + raw.n);
    let mut values = Vec::with_capacity(raw.nnz() + raw.n);
    let mut labels = Vec::with_capacity(raw.n);
    row_offsets.push(0);
    for i in 0..raw.n {
        let (cols, vals) = raw.row(i);
        let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (&c, &v) in cols.iter().zip(vals) {
                col_indices.push(c);
                values.push(v / norm);
            }
        }
        col_indices.push(d_raw as u32);
        values.push(1.0);
        row_offsets.push(col_indices.len());
        labels.push(if raw.labels[i] == hi { 1.0 } else { -1.0 });
    }

    Ok(SparseDataset {
        n: raw.n,
        d: d_raw + 1,
        row_offsets,
        col_indices,
        values,
        labels,
    })
}

/// Deterministic split: Fisher-Yates shuffle of row indices driven by a
/// ChaCha20 PRNG seeded with `seed`; the first `ceil(fraction * n)` shuffled
/// rows form the training set.
pub fn split(dataset: &SparseDataset, fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    if dataset.n < 2 {
        return Err(Error::InvalidConfig("split needs at least 2 rows".into()));
    }
    let mut order: Vec<usize> = (0..dataset.n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = (fraction * dataset.n as f64).ceil() as usize;
    let train = dataset.take_rows(&order[..n_train]);
    let test = dataset.take_rows(&order[n_train..]);
    Ok(DatasetSplit {
        train,
        test,
        split_seed: seed,
        fraction,
    })
}

/// Builds a dataset directly from dense rows (test helper and synthetic
/// generator; zero entries are dropped).
pub fn from_dense_rows(rows: &[Vec<f64>], labels: &[f64]) -> SparseDataset {
    assert_eq!(rows.len(), labels.len());
    let d = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut row_offsets = vec![0usize];
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                col_indices.push(j as u32);
                values.push(v);
            }
        }
        row_offsets.push(col_indices.len());
    }
    SparseDataset {
        n: rows.len(),
        d,
        row_offsets,
        col_indices,
        values,
        labels: labels.to_vec(),
    }
}
