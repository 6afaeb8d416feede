//! Medians over frames and tracks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::report::TrackScore;
use crate::bss::Metric;
use crate::error::Result;

/// Median of the finite values; `None` when there are none.
pub fn finite_median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// How the campaign-level value is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Median over tracks of the per-track median.
    #[default]
    TrackMedians,
    /// Median over every finite frame of every track.
    AllFrames,
}

impl std::str::FromStr for Aggregation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "track-medians" | "tracks" => Ok(Aggregation::TrackMedians),
            "all-frames" | "frames" => Ok(Aggregation::AllFrames),
            other => Err(crate::error::Error::InvalidParameter(format!(
                "unknown aggregation '{other}' (expected track-medians or all-frames)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub method: String,
    pub target: String,
    pub metric: Metric,
    pub track: String,
    pub track_median: Option<f64>,
    pub campaign_median: Option<f64>,
}

type Key = (String, String, Metric);

/// Per-track medians and campaign medians, one row per
/// `(method, target, metric, track)` in sorted order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn campaign_median(&self, method: &str, target: &str, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.target == target && r.metric == metric)
            .and_then(|r| r.campaign_median)
    }

    pub fn track_median(&self, method: &str, target: &str, metric: Metric, track: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.target == target && r.metric == metric && r.track == track)
            .and_then(|r| r.track_median)
    }

    /// `method -> track -> median` for one target and metric, finite values only.
    pub fn track_medians(&self, target: &str, metric: Metric) -> BTreeMap<String, BTreeMap<String, f64>> {
        let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.target == target && r.metric == metric) {
            let entry = out.entry(r.method.clone()).or_default();
            if let Some(m) = r.track_median {
                entry.insert(r.track.clone(), m);
            }
        }
        out
    }

    pub fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = self.rows.iter().map(|r| r.method.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn targets(&self) -> Vec<String> {
        let mut t: Vec<String> = self.rows.iter().map(|r| r.target.clone()).collect();
        t.sort();
        t.dedup();
        t
    }

    /// CSV with columns `method,target,metric,track,track_median,campaign_median`;
    /// missing medians are written as `undefined`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "target", "metric", "track", "track_median", "campaign_median"])?;
        let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        for r in &self.rows {
            w.write_record([
                r.method.as_str(),
                r.target.as_str(),
                r.metric.name(),
                r.track.as_str(),
                &fmt(r.track_median),
                &fmt(r.campaign_median),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

pub fn aggregate(scores: &[TrackScore]) -> AggregateTable {
    aggregate_with(scores, Aggregation::TrackMedians)
}

pub fn aggregate_with(scores: &[TrackScore], mode: Aggregation) -> AggregateTable {
    // (method, target, metric) -> track -> finite frame values
    let mut frames: BTreeMap<Key, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for ts in scores {
        for (target, list) in &ts.targets {
            for metric in Metric::ALL {
                frames
                    .entry((ts.method.clone(), target.clone(), metric))
                    .or_default()
                    .entry(ts.track.clone())
                    .or_default()
                    .extend(list.iter().filter_map(|f| f.get(metric).finite()));
            }
        }
    }

    let mut rows = Vec::new();
    for ((method, target, metric), per_track) in frames {
        let medians: BTreeMap<&String, Option<f64>> = per_track
            .iter()
            .map(|(track, values)| (track, finite_median(values.iter().copied())))
            .collect();
        let campaign = match mode {
            Aggregation::TrackMedians => finite_median(medians.values().flatten().copied()),
            Aggregation::AllFrames => finite_median(per_track.values().flatten().copied()),
        };
        for (track, median) in medians {
            rows.push(AggregateRow {
                method: method.clone(),
                target: target.clone(),
                metric,
                track: track.clone(),
                track_median: median,
                campaign_median: campaign,
            });
        }
    }
    AggregateTable { rows }
}
