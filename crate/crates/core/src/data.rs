//! Tabular input, two-stage normalization and row-removed neighbor views.
//!
//! Normalization is fitted once on the base table and then frozen: every
//! feature is standardized to mean 0 and population variance 1, and every row
//! is then divided by the largest standardized row norm so that all rows lie
//! in the unit ball. Neighbor views reuse the base normalization untouched.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

/// Rows whose L2 norm exceeds one by more than this are rejected.
pub const UNIT_BALL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub features: Vec<f64>,
    pub label: String,
}

/// Parsed but untransformed input, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub label_name: String,
    /// Raw label value mapped to +1; every other value maps to -1.
    pub positive_label: String,
    pub rows: Vec<RawRecord>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Keep only the first `n` rows.
    pub fn head(mut self, n: usize) -> Result<Self> {
        self.rows.truncate(n);
        check_row_count(self.rows.len())?;
        Ok(self)
    }
}

fn check_row_count(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Data(format!("need at least 2 rows (found {n})")))
    } else {
        Ok(())
    }
}

/// Load a comma-delimited file with a header line.
pub fn load_csv(
    path: impl AsRef<Path>,
    feature_columns: &[String],
    label_column: &str,
    positive_label: &str,
) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, feature_columns, label_column, positive_label)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: Read>(
    reader: R,
    feature_columns: &[String],
    label_column: &str,
    positive_label: &str,
) -> Result<RawTable> {
    if feature_columns.is_empty() {
        return Err(Error::Config("at least one feature column is required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found in header")))
    };
    let feature_idx: Vec<usize> = feature_columns.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let label_idx = find(label_column)?;

    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = k + 1;
        let mut features = Vec::with_capacity(feature_idx.len());
        for (&col, name) in feature_idx.iter().zip(feature_columns) {
            let cell = record.get(col).unwrap_or("");
            if cell.is_empty() || cell == "?" {
                return Err(Error::Data(format!("missing value at row {row_no}, column '{name}'")));
            }
            let value: f64 = cell.parse().map_err(|_| {
                Error::Data(format!("cannot parse '{cell}' as a number at row {row_no}, column '{name}'"))
            })?;
            if !value.is_finite() {
                return Err(Error::Data(format!("non-finite value at row {row_no}, column '{name}'")));
            }
            features.push(value);
        }
        let label = record.get(label_idx).unwrap_or("");
        if label.is_empty() || label == "?" {
            return Err(Error::Data(format!("missing label at row {row_no}")));
        }
        rows.push(RawRecord { features, label: label.to_string() });
    }
    check_row_count(rows.len())?;
    Ok(RawTable {
        feature_names: feature_columns.to_vec(),
        label_name: label_column.to_string(),
        positive_label: positive_label.to_string(),
        rows,
    })
}

/// Recorded transform: `((x - mean) / std) / row_norm_divisor`, per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormMeta {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub row_norm_divisor: f64,
}

impl NormMeta {
    pub fn identity(d: usize) -> Self {
        Self { means: vec![0.0; d], stds: vec![1.0; d], row_norm_divisor: 1.0 }
    }

    fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(self.means.iter().zip(&self.stds)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    /// Apply the frozen transform to a raw feature row.
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.means.len(), raw.len())?;
        Ok(self.standardize(raw).into_iter().map(|v| v / self.row_norm_divisor).collect())
    }
}

/// Normalized training data: features in the unit ball, labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
    d: usize,
    pub feature_names: Vec<String>,
    pub norm_meta: NormMeta,
}

impl Dataset {
    /// Build from rows that are already normalized. Rows must lie in the unit
    /// ball and labels must be exactly -1 or +1.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if labels.len() != n {
            return Err(Error::Data(format!("{} labels for {n} rows", labels.len())));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::Data("rows have no features".into()));
        }
        let mut features = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Data(format!("row {i} has {} features, expected {d}", row.len())));
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > 1.0 + UNIT_BALL_TOLERANCE {
                return Err(Error::Data(format!("row {i} has norm {norm}, outside the unit ball")));
            }
            features.extend_from_slice(row);
        }
        if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Data(format!("label at row {i} is {}, expected -1 or +1", labels[i])));
        }
        Ok(Self {
            features,
            labels,
            n,
            d,
            feature_names: (0..d).map(|j| format!("x{j}")).collect(),
            norm_meta: NormMeta::identity(d),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Row-major feature matrix.
    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

/// Fit the two-stage normalization on `raw` and apply it.
pub fn normalize(raw: &RawTable) -> Result<Dataset> {
    let n = raw.rows.len();
    check_row_count(n)?;
    let d = raw.feature_names.len();
    if let Some(i) = raw.rows.iter().position(|r| r.features.len() != d) {
        return Err(Error::Data(format!("row {} has {} features, expected {d}", i + 1, raw.rows[i].features.len())));
    }

    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = raw.rows.iter().map(|r| r.features[j]).collect();
        let mean = pairwise_sum(&col) / n as f64;
        let sq: Vec<f64> = col.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / n as f64;
        let scale = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if var <= (1e-12 * scale).powi(2) {
            return Err(Error::Data(format!("feature '{}' has zero variance", raw.feature_names[j])));
        }
        means.push(mean);
        stds.push(var.sqrt());
    }

    let mut meta = NormMeta { means, stds, row_norm_divisor: 1.0 };
    let divisor = raw
        .rows
        .iter()
        .map(|r| meta.standardize(&r.features).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    if divisor == 0.0 || !divisor.is_finite() {
        return Err(Error::Data("maximum row norm is zero after standardization".into()));
    }
    meta.row_norm_divisor = divisor;

    let mut features = Vec::with_capacity(n * d);
    for r in &raw.rows {
        features.extend(meta.apply(&r.features)?);
    }
    let labels = raw.rows.iter().map(|r| if r.label == raw.positive_label { 1.0 } else { -1.0 }).collect();
    Ok(Dataset { features, labels, n, d, feature_names: raw.feature_names.clone(), norm_meta: meta })
}

/// Read access shared by a full dataset and its row-removed views.
pub trait Rows: Sync {
    /// Logical number of rows.
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn row(&self, k: usize) -> &[f64];
    fn label(&self, k: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |k| (self.row(k), self.label(k)))
    }
}

impl Rows for Dataset {
    fn len(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.features[k * self.d..(k + 1) * self.d]
    }

    fn label(&self, k: usize) -> f64 {
        self.labels[k]
    }
}

/// The base dataset with one row hidden. Nothing is copied.
#[derive(Debug, Clone, Copy)]
pub struct NeighborView<'a> {
    base: &'a Dataset,
    removed: usize,
}

impl<'a> NeighborView<'a> {
    pub fn base(&self) -> &'a Dataset {
        self.base
    }

    pub fn removed_index(&self) -> usize {
        self.removed
    }

    fn base_index(&self, k: usize) -> usize {
        if k < self.removed {
            k
        } else {
            k + 1
        }
    }
}

impl Rows for NeighborView<'_> {
    fn len(&self) -> usize {
        self.base.n - 1
    }

    fn dim(&self) -> usize {
        self.base.d
    }

    fn row(&self, k: usize) -> &[f64] {
        self.base.row(self.base_index(k))
    }

    fn label(&self, k: usize) -> f64 {
        self.base.label(self.base_index(k))
    }
}

/// View of `base` with row `i` removed.
pub fn neighbor(base: &Dataset, i: usize) -> Result<NeighborView<'_>> {
    if i >= base.n {
        return Err(Error::Index { index: i, len: base.n });
    }
    Ok(NeighborView { base, removed: i })
}
