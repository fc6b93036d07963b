//! Width-sweep reports and the statistics used to read them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Mean per-pixel binary cross-entropy of the reconstruction.
    Bce,
    /// Fraction of correctly classified examples.
    Accuracy,
    /// Expert cost divided by policy cost on paired starts.
    Score,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Bce => "bce",
            Metric::Accuracy => "accuracy",
            Metric::Score => "score",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "bce" => Some(Metric::Bce),
            "accuracy" => Some(Metric::Accuracy),
            "score" => Some(Metric::Score),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub width: usize,
    pub metric: f64,
    /// Parameters of the network pruned to this width.
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub metric: Metric,
    pub rows: Vec<AblationRow>,
    /// `key=value` pairs written to the comment line.
    pub provenance: Vec<(String, String)>,
}

impl AblationReport {
    pub fn new(metric: Metric, rows: Vec<AblationRow>) -> Result<Self> {
        if rows.windows(2).any(|w| w[0].width >= w[1].width) {
            return Err(CliError::Config("report widths must be strictly increasing".into()));
        }
        Ok(Self {
            metric,
            rows,
            provenance: Vec::new(),
        })
    }

    pub fn with_provenance(mut self, key: &str, value: impl ToString) -> Self {
        self.provenance.push((key.to_string(), value.to_string()));
        self
    }

    pub fn widths(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.width).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.metric).collect()
    }

    pub fn at(&self, width: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.width == width).map(|r| r.metric)
    }

    /// A `#` provenance line, the header `width,metric,params`, then one row per width.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# provenance: metric=");
        s.push_str(self.metric.name());
        for (k, v) in &self.provenance {
            let _ = write!(s, " {k}={}", v.replace(['\n', '\r'], " "));
        }
        s.push_str("\nwidth,metric,params\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.width, r.metric, r.params);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| CliError::Config(format!("CSV line {line}: {msg}"));
        let mut metric = None;
        let mut provenance = Vec::new();
        let mut rows = Vec::new();
        let mut seen_header = false;
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("# provenance:") {
                for pair in rest.split_whitespace() {
                    let (k, v) = pair.split_once('=').ok_or_else(|| bad(i + 1, "bad provenance"))?;
                    if k == "metric" {
                        metric = Some(Metric::from_name(v).ok_or_else(|| bad(i + 1, "unknown metric"))?);
                    } else {
                        provenance.push((k.to_string(), v.to_string()));
                    }
                }
            } else if line == "width,metric,params" {
                seen_header = true;
            } else if !line.is_empty() {
                let mut cols = line.split(',');
                let mut field = || cols.next().ok_or_else(|| bad(i + 1, "missing column"));
                let width = field()?.parse().map_err(|_| bad(i + 1, "bad width"))?;
                let value = field()?.parse().map_err(|_| bad(i + 1, "bad metric"))?;
                let params = field()?.parse().map_err(|_| bad(i + 1, "bad params"))?;
                rows.push(AblationRow {
                    width,
                    metric: value,
                    params,
                });
            }
        }
        if !seen_header {
            return Err(bad(0, "missing header"));
        }
        let mut report = Self::new(metric.ok_or_else(|| bad(0, "missing metric"))?, rows)?;
        report.provenance = provenance;
        Ok(report)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| CliError::io(path, e))
    }
}

/// Ranks starting at 1; tied values share their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}

/// Spearman rank correlation; NaN when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs paired samples");
    pearson(&ranks(a), &ranks(b))
}

/// Mean of `|v[i+1] - v[i]|`.
pub fn mean_abs_successive_change(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (v.len() - 1) as f64
}

/// Mean of `|a[i] - b[i]|` over the common prefix.
pub fn mean_abs_gap(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64
}
