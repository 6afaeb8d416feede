//! Friedman-ranked pairwise comparisons with Conover's post-hoc test.
//!
//! Tracks are blocks and methods are treatments. Within each block the
//! methods are ranked (ties get the average rank); with rank sums `R_i`,
//! `A = sum r^2` over all blocks, `b` blocks and `k` methods,
//!
//! ```text
//! t_ij = |R_i - R_j| / sqrt(2 (b A - sum_i R_i^2) / ((b - 1)(k - 1)))
//! ```
//!
//! follows Student's t with `(b - 1)(k - 1)` degrees of freedom. P-values
//! are two-sided and uncorrected for multiple comparisons.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bss::Metric;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignificanceMatrix {
    pub metric: Metric,
    pub target: String,
    pub methods: Vec<String>,
    /// Tracks on which every method has a score.
    pub tracks: Vec<String>,
    /// `None` where no comparison is possible.
    pub p_values: Vec<Vec<Option<f64>>>,
}

impl SignificanceMatrix {
    pub fn p_value(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        self.p_values[i][j]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.methods.iter().cloned());
        w.write_record(&header)?;
        for (m, row) in self.methods.iter().zip(&self.p_values) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(|p| p.map_or_else(|| "undefined".into(), |x| x.to_string())));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write(&self, csv_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(csv_path, self.to_csv()?)?;
        std::fs::write(json_path, self.to_json()?)?;
        Ok(())
    }
}

/// Ranks `1..=n` ascending, ties sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pairwise p-values between methods from per-track scores
/// (`method -> track -> score`, typically track medians).
pub fn pairwise_significance(
    scores: &BTreeMap<String, BTreeMap<String, f64>>,
    metric: Metric,
    target: &str,
) -> Result<SignificanceMatrix> {
    let methods: Vec<String> = scores.keys().cloned().collect();
    let k = methods.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "significance testing needs at least two methods, got {k}"
        )));
    }
    let tracks: Vec<String> = scores[&methods[0]]
        .iter()
        .filter(|(track, v)| v.is_finite() && scores.values().all(|m| m.get(*track).is_some_and(|x| x.is_finite())))
        .map(|(track, _)| track.clone())
        .collect();
    let b = tracks.len();

    let mut p_values = vec![vec![None; k]; k];
    for (i, row) in p_values.iter_mut().enumerate() {
        row[i] = Some(1.0);
    }
    if b < 2 {
        log::warn!("{target}/{metric}: fewer than two tracks shared by all methods; comparisons undefined");
        return Ok(SignificanceMatrix {
            metric,
            target: target.to_string(),
            methods,
            tracks,
            p_values,
        });
    }

    let mut rank_sums = vec![0.0; k];
    let mut sum_sq = 0.0;
    for track in &tracks {
        let block: Vec<f64> = methods.iter().map(|m| scores[m][track]).collect();
        for (i, r) in average_ranks(&block).into_iter().enumerate() {
            rank_sums[i] += r;
            sum_sq += r * r;
        }
    }
    let (bf, kf) = (b as f64, k as f64);
    let sum_r2: f64 = rank_sums.iter().map(|r| r * r).sum();
    let df = (bf - 1.0) * (kf - 1.0);
    let spread = (bf * sum_sq - sum_r2).max(0.0);
    let scale = (2.0 * spread / df).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");

    for i in 0..k {
        for j in (i + 1)..k {
            let diff = (rank_sums[i] - rank_sums[j]).abs();
            // Rank sums are multiples of 1/2, so an exact comparison is safe.
            let p = if diff == 0.0 {
                1.0
            } else if scale == 0.0 {
                0.0
            } else {
                (2.0 * dist.sf(diff / scale)).min(1.0)
            };
            p_values[i][j] = Some(p);
            p_values[j][i] = Some(p);
        }
    }
    Ok(SignificanceMatrix {
        metric,
        target: target.to_string(),
        methods,
        tracks,
        p_values,
    })
}
