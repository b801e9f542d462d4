//! Clustering quality metrics: accuracy under optimal label matching,
//! normalized mutual information, and adjusted Rand index.
//!
//! All three scores are label-permutation invariant; predicted and true
//! labelings may use arbitrary (even non-contiguous) integer ids and need not
//! have the same number of distinct clusters.

use crate::error::{Error, Result};
use ndarray::Array2;
use pathfinding::matrix::Matrix;
use pathfinding::prelude::kuhn_munkres;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Cross-tabulation of two labelings. Rows follow the sorted distinct
/// predicted labels, columns the sorted distinct true labels.
#[derive(Debug, Clone)]
pub struct Contingency {
    pub counts: Array2<u64>,
    pub pred_labels: Vec<usize>,
    pub true_labels: Vec<usize>,
    pub n: usize,
}

/// Builds the contingency table for two equal-length labelings.
pub fn contingency_table(pred: &[usize], truth: &[usize]) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput { what: "labelings" });
    }
    let mut pred_labels: Vec<usize> = pred.to_vec();
    pred_labels.sort_unstable();
    pred_labels.dedup();
    let mut true_labels: Vec<usize> = truth.to_vec();
    true_labels.sort_unstable();
    true_labels.dedup();
    let row_of = |l: usize| pred_labels.binary_search(&l).expect("label indexed above");
    let col_of = |l: usize| true_labels.binary_search(&l).expect("label indexed above");
    let mut counts = Array2::<u64>::zeros((pred_labels.len(), true_labels.len()));
    for (&p, &t) in pred.iter().zip(truth) {
        counts[[row_of(p), col_of(t)]] += 1;
    }
    Ok(Contingency { counts, pred_labels, true_labels, n: pred.len() })
}

/// Fraction of points whose predicted cluster matches the true one under the
/// best one-to-one relabeling, found by maximum-weight matching on the
/// contingency table (zero-padded to square when cluster counts differ).
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let ct = contingency_table(pred, truth)?;
    let (r, c) = ct.counts.dim();
    let side = r.max(c);
    let mut weights = Matrix::new(side, side, 0i64);
    for i in 0..r {
        for j in 0..c {
            weights[(i, j)] = ct.counts[[i, j]] as i64;
        }
    }
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / ct.n as f64)
}

fn entropy(sizes: &[u64], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with geometric-mean normalization:
/// `I(pred; truth) / sqrt(H(pred) * H(truth))`, natural logarithms.
///
/// When both labelings are single-cluster the partitions coincide and the
/// score is 1; when exactly one has zero entropy the partitions differ and
/// the score is 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let ct = contingency_table(pred, truth)?;
    Ok(nmi_from_contingency(&ct))
}

fn nmi_from_contingency(ct: &Contingency) -> f64 {
    let n = ct.n as f64;
    let (r, c) = ct.counts.dim();
    let row_sums: Vec<u64> = (0..r).map(|i| ct.counts.row(i).sum()).collect();
    let col_sums: Vec<u64> = (0..c).map(|j| ct.counts.column(j).sum()).collect();
    let h_pred = entropy(&row_sums, n);
    let h_true = entropy(&col_sums, n);
    if h_pred == 0.0 && h_true == 0.0 {
        return 1.0;
    }
    if h_pred == 0.0 || h_true == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for i in 0..r {
        for j in 0..c {
            let nij = ct.counts[[i, j]];
            if nij == 0 {
                continue;
            }
            let pij = nij as f64 / n;
            mi += pij * ((n * nij as f64) / (row_sums[i] as f64 * col_sums[j] as f64)).ln();
        }
    }
    (mi / (h_pred * h_true).sqrt()).clamp(0.0, 1.0)
}

/// Adjusted Rand index via pair counting on the contingency table:
/// `(RI - E[RI]) / (max RI - E[RI])`. Ranges over `[-1, 1]`; identical
/// partitions score 1, and the degenerate zero-denominator cases (both
/// single-cluster, or both all-singletons) are identical partitions too.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let ct = contingency_table(pred, truth)?;
    Ok(ari_from_contingency(&ct))
}

fn ari_from_contingency(ct: &Contingency) -> f64 {
    let comb2 = |x: u64| {
        let x = x as f64;
        x * (x - 1.0) / 2.0
    };
    let (r, c) = ct.counts.dim();
    let index: f64 = ct.counts.iter().map(|&v| comb2(v)).sum();
    let a: f64 = (0..r).map(|i| comb2(ct.counts.row(i).sum())).sum();
    let b: f64 = (0..c).map(|j| comb2(ct.counts.column(j).sum())).sum();
    let total = comb2(ct.n as u64);
    if total == 0.0 {
        return 1.0; // single point: partitions trivially identical
    }
    let expected = a * b / total;
    let max_index = 0.5 * (a + b);
    let denom = max_index - expected;
    if denom.abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / denom
}

/// All three metrics plus the table they were computed from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub n: usize,
    /// Row-major contingency counts; rows follow `pred_labels`, columns
    /// `true_labels`.
    pub contingency: Vec<Vec<u64>>,
    pub pred_labels: Vec<usize>,
    pub true_labels: Vec<usize>,
    /// Which entropy normalization the NMI uses.
    pub nmi_normalization: String,
}

/// Computes accuracy, NMI, and ARI in one pass over the contingency table.
pub fn metric_report(pred: &[usize], truth: &[usize]) -> Result<MetricReport> {
    let ct = contingency_table(pred, truth)?;
    let acc = accuracy(pred, truth)?;
    let (r, c) = ct.counts.dim();
    let contingency: Vec<Vec<u64>> =
        (0..r).map(|i| (0..c).map(|j| ct.counts[[i, j]]).collect()).collect();
    Ok(MetricReport {
        acc,
        nmi: nmi_from_contingency(&ct),
        ari: ari_from_contingency(&ct),
        n: ct.n,
        contingency,
        pred_labels: ct.pred_labels,
        true_labels: ct.true_labels,
        nmi_normalization: "geometric".into(),
    })
}

impl MetricReport {
    /// Serializes the report as pretty JSON.
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    /// Appends one `tag,acc,nmi,ari,n` row to a CSV, writing the header when
    /// the file does not exist yet. Useful for aggregating runs.
    pub fn append_csv(&self, path: &Path, tag: &str) -> Result<()> {
        let fresh = !path.exists();
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(f, "tag,acc,nmi,ari,n")?;
        }
        writeln!(f, "{},{},{},{},{}", tag, self.acc, self.nmi, self.ari, self.n)?;
        Ok(())
    }
}
