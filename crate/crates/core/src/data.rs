//! Dataset containers, CSV and binary matrix I/O, synthetic Gaussian-mixture
//! generation, stratified splitting, and optional feature standardization.
//!
//! Everything is `f64`: the analytic oracles elsewhere check identities at
//! 1e-9, which single precision cannot honor.

use crate::error::{Error, Result};
use crate::geometry::regular_simplex_matrix;
use crate::stream::substream;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Disjoint, exhaustive train/test index partition, both sides sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl Split {
    /// Validates that the two index lists partition `0..n`.
    pub fn new(mut train_idx: Vec<usize>, mut test_idx: Vec<usize>, n: usize) -> Result<Self> {
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        let mut all: Vec<usize> = train_idx.iter().chain(&test_idx).copied().collect();
        all.sort_unstable();
        let covering = all.len() == n && all.iter().enumerate().all(|(i, &v)| i == v);
        if !covering {
            return Err(Error::InvalidParameter {
                what: format!(
                    "split must partition 0..{n}: got {} train + {} test indices",
                    train_idx.len(),
                    test_idx.len()
                ),
            });
        }
        Ok(Self { train_idx, test_idx })
    }
}

/// A feature matrix with optional ground-truth labels and an optional
/// train/test split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub name: String,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, labels: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.nrows() {
                return Err(Error::LengthMismatch { left: l.len(), right: x.nrows() });
            }
        }
        Ok(Self { x, labels, name: name.into(), split: None })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows of `x` selected by index, in the given order.
    pub fn rows(&self, idx: &[usize]) -> Array2<f64> {
        self.x.select(Axis(0), idx)
    }

    /// Labels selected by index; `None` when the dataset is unlabeled.
    pub fn labels_at(&self, idx: &[usize]) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect())
    }

    /// Partitions into train/test, stratified by label when labels exist.
    ///
    /// Per class, `round(test_fraction * class_size)` rows go to test;
    /// unlabeled data gets a uniform split of `round(test_fraction * n)`.
    /// Deterministic given the seed.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<Dataset> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                what: format!("test fraction must be in (0, 1), got {test_fraction}"),
            });
        }
        let n = self.n();
        let mut rng = substream(seed, "data/split");
        let mut test_idx = Vec::new();
        match &self.labels {
            Some(labels) => {
                let mut classes: Vec<usize> = labels.clone();
                classes.sort_unstable();
                classes.dedup();
                for class in classes {
                    let mut members: Vec<usize> =
                        (0..n).filter(|&i| labels[i] == class).collect();
                    members.shuffle(&mut rng);
                    let t = (test_fraction * members.len() as f64).round() as usize;
                    test_idx.extend(&members[..t.min(members.len())]);
                }
            }
            None => {
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(&mut rng);
                let t = (test_fraction * n as f64).round() as usize;
                test_idx.extend(&all[..t.min(n)]);
            }
        }
        let test_set: std::collections::HashSet<usize> = test_idx.iter().copied().collect();
        let train_idx: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
        let mut out = self.clone();
        out.split = Some(Split::new(train_idx, test_idx, n)?);
        Ok(out)
    }

    /// Writes rows as comma-separated values, labels (when present) as a
    /// final integer column. No header; values print in shortest
    /// round-trippable form, so reading the file back reproduces `x` exactly.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (i, row) in self.x.rows().into_iter().enumerate() {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            if let Some(l) = &self.labels {
                fields.push(l[i].to_string());
            }
            writeln!(f, "{}", fields.join(","))?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Parses a rectangular numeric CSV. An optional single header line is
/// detected by its fields failing to parse as numbers. When `has_labels`,
/// the last column is read as integer labels.
pub fn load_csv(path: &Path, has_labels: bool) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|s| s.parse::<f64>()).collect();
        let mut values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && labels.is_empty() && width.is_none() => continue, // header
            Err(_) => {
                let bad = fields.iter().find(|s| s.parse::<f64>().is_err()).unwrap();
                return Err(Error::Parse { line: line_no, msg: format!("non-numeric cell {bad:?}") });
            }
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {w} fields, got {}", values.len()),
                })
            }
            Some(_) => {}
        }
        if has_labels {
            let raw = values.pop().ok_or(Error::Parse { line: line_no, msg: "empty row".into() })?;
            if raw < 0.0 || raw.fract() != 0.0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("label must be a nonnegative integer, got {raw}"),
                });
            }
            labels.push(raw as usize);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput { what: "csv file" });
    }
    let ncols = rows[0].len();
    if has_labels && ncols == 0 {
        return Err(Error::Parse { line: 1, msg: "label column requires at least 2 columns".into() });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len() / ncols;
    let x = Array2::from_shape_vec((n, ncols), flat)
        .map_err(|e| Error::ShapeMismatch { context: e.to_string() })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(x, has_labels.then_some(labels), name)
}

const MATRIX_MAGIC: &[u8; 6] = b"SPCCM1";

/// Writes a matrix in the compact binary format: magic bytes, `u64` row and
/// column counts, then row-major little-endian `f64` values.
pub fn save_matrix_bin(x: &Array2<f64>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MATRIX_MAGIC)?;
    f.write_all(&(x.nrows() as u64).to_le_bytes())?;
    f.write_all(&(x.ncols() as u64).to_le_bytes())?;
    for v in x.iter() {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Reads a matrix written by [`save_matrix_bin`].
pub fn load_matrix_bin(path: &Path) -> Result<Array2<f64>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 6];
    f.read_exact(&mut magic).map_err(|_| Error::BadFormat { what: "matrix file truncated".into() })?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::BadFormat { what: format!("bad magic bytes {magic:?}") });
    }
    let mut dim = [0u8; 8];
    f.read_exact(&mut dim)?;
    let rows = u64::from_le_bytes(dim) as usize;
    f.read_exact(&mut dim)?;
    let cols = u64::from_le_bytes(dim) as usize;
    let mut buf = vec![0u8; rows * cols * 8];
    f.read_exact(&mut buf).map_err(|_| Error::BadFormat { what: "matrix payload truncated".into() })?;
    let vals: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Array2::from_shape_vec((rows, cols), vals)
        .map_err(|e| Error::ShapeMismatch { context: e.to_string() })
}

/// How many points each mixture component gets.
#[derive(Debug, Clone)]
pub enum ClusterSizes {
    /// Every cluster the same size.
    PerCluster(usize),
    /// Proportions (summing to 1) of a total count, rounded by largest
    /// remainder so the sizes sum exactly to `n_total`.
    Proportions { weights: Vec<f64>, n_total: usize },
}

impl ClusterSizes {
    fn resolve(&self, k: usize) -> Result<Vec<usize>> {
        match self {
            ClusterSizes::PerCluster(m) => {
                if *m == 0 {
                    return Err(Error::InvalidParameter { what: "cluster size must be >= 1".into() });
                }
                Ok(vec![*m; k])
            }
            ClusterSizes::Proportions { weights, n_total } => {
                if weights.len() != k {
                    return Err(Error::LengthMismatch { left: weights.len(), right: k });
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::InvalidFrequencies {
                        reason: format!("proportions must be positive and sum to 1, got sum {sum}"),
                    });
                }
                let exact: Vec<f64> = weights.iter().map(|w| w * *n_total as f64).collect();
                let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
                let mut leftover = n_total - sizes.iter().sum::<usize>();
                // Hand the remaining points to the largest fractional parts,
                // lowest index first on ties.
                let mut order: Vec<usize> = (0..k).collect();
                order.sort_by(|&a, &b| {
                    let fa = exact[a] - exact[a].floor();
                    let fb = exact[b] - exact[b].floor();
                    fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
                });
                for &i in &order {
                    if leftover == 0 {
                        break;
                    }
                    sizes[i] += 1;
                    leftover -= 1;
                }
                if sizes.iter().any(|&s| s == 0) {
                    return Err(Error::InvalidParameter {
                        what: "a proportion rounded to zero points".into(),
                    });
                }
                Ok(sizes)
            }
        }
    }
}

/// Synthesizes an isotropic Gaussian mixture whose means sit at regular
/// simplex vertices scaled by `separation`, giving equal distances between
/// every pair of cluster centers. Labels are component ids; rows are grouped
/// by component. Deterministic given the seed.
pub fn gen_gaussian_mixture(
    k: usize,
    sizes: &ClusterSizes,
    dim: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::TooFewClusters { k });
    }
    if dim < 2 {
        return Err(Error::InvalidParameter { what: format!("dim must be >= 2, got {dim}") });
    }
    if !(separation > 0.0) {
        return Err(Error::InvalidParameter { what: format!("separation must be > 0, got {separation}") });
    }
    if spread < 0.0 {
        return Err(Error::InvalidParameter { what: format!("spread must be >= 0, got {spread}") });
    }
    let counts = sizes.resolve(k)?;
    let means = regular_simplex_matrix(k, dim)? * separation;
    let n: usize = counts.iter().sum();
    let mut rng = substream(seed, "data/gmm");
    let mut x = Array2::<f64>::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (c, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            for j in 0..dim {
                let noise: f64 = StandardNormal.sample(&mut rng);
                x[[row, j]] = means[[c, j]] + spread * noise;
            }
            labels.push(c);
            row += 1;
        }
    }
    Dataset::new(x, Some(labels), format!("gmm-k{k}-d{dim}"))
}

/// Per-column affine transform to zero mean and unit variance, fitted once
/// and reusable on held-out data. Constant columns keep scale 1 so they map
/// to exactly zero instead of dividing by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyInput { what: "matrix to standardize" });
        }
        let n = x.nrows() as f64;
        let mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let std: Vec<f64> = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                context: format!("standardizer fitted on {} columns, got {}", self.mean.len(), x.ncols()),
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}
