//! JSON score reports.
//!
//! A report file holds one track object or an array of them:
//!
//! ```json
//! {"schema_version": 1, "track": "...", "method": "...", "sample_rate": 44100,
//!  "targets": {"vocals": {"frames": [
//!     {"time": 0.0, "duration": 1.0,
//!      "SDR": {"score": 4.2, "status": "finite"},
//!      "ISR": {"score": null, "status": "inf"}, ...}]}}}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bss::{FrameScores, Metric, Score};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Framewise scores of one method on one track, keyed by target name.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackScore {
    pub track: String,
    pub method: String,
    pub sample_rate: u32,
    pub targets: BTreeMap<String, Vec<FrameScores>>,
}

impl TrackScore {
    pub fn new(track: impl Into<String>, method: impl Into<String>, sample_rate: u32) -> Self {
        Self {
            track: track.into(),
            method: method.into(),
            sample_rate,
            targets: BTreeMap::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreEntry {
    score: Option<f64>,
    status: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameEntry {
    time: f64,
    duration: f64,
    #[serde(rename = "SDR")]
    sdr: ScoreEntry,
    #[serde(rename = "ISR")]
    isr: ScoreEntry,
    #[serde(rename = "SIR")]
    sir: ScoreEntry,
    #[serde(rename = "SAR")]
    sar: ScoreEntry,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    frames: Vec<FrameEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportFile {
    schema_version: u32,
    track: String,
    method: String,
    sample_rate: u32,
    targets: BTreeMap<String, TargetEntry>,
}

fn score_entry(score: Score) -> ScoreEntry {
    ScoreEntry {
        score: score.finite(),
        status: score.status().to_string(),
    }
}

fn parse_score(entry: &ScoreEntry, metric: Metric, track: &str) -> Result<Score> {
    Score::from_status(&entry.status, entry.score).ok_or_else(|| {
        Error::MalformedReport(format!(
            "track '{track}': {metric} has status '{}' with score {:?}",
            entry.status, entry.score
        ))
    })
}

fn to_file(score: &TrackScore) -> ReportFile {
    let rate = score.sample_rate as f64;
    ReportFile {
        schema_version: SCHEMA_VERSION,
        track: score.track.clone(),
        method: score.method.clone(),
        sample_rate: score.sample_rate,
        targets: score
            .targets
            .iter()
            .map(|(name, frames)| {
                let frames = frames
                    .iter()
                    .map(|f| FrameEntry {
                        time: f.window_start as f64 / rate,
                        duration: f.window_len as f64 / rate,
                        sdr: score_entry(f.sdr),
                        isr: score_entry(f.isr),
                        sir: score_entry(f.sir),
                        sar: score_entry(f.sar),
                    })
                    .collect();
                (name.clone(), TargetEntry { frames })
            })
            .collect(),
    }
}

fn from_file(file: ReportFile) -> Result<TrackScore> {
    if file.sample_rate == 0 {
        return Err(Error::MalformedReport(format!("track '{}': zero sample rate", file.track)));
    }
    let rate = file.sample_rate as f64;
    let to_samples = |secs: f64, track: &str| {
        let n = (secs * rate).round();
        if secs.is_finite() && n >= 0.0 {
            Ok(n as usize)
        } else {
            Err(Error::MalformedReport(format!("track '{track}': invalid frame time {secs}")))
        }
    };
    let mut targets = BTreeMap::new();
    for (name, entry) in file.targets {
        let frames = entry
            .frames
            .iter()
            .map(|f| {
                Ok(FrameScores {
                    window_start: to_samples(f.time, &file.track)?,
                    window_len: to_samples(f.duration, &file.track)?,
                    sdr: parse_score(&f.sdr, Metric::Sdr, &file.track)?,
                    isr: parse_score(&f.isr, Metric::Isr, &file.track)?,
                    sir: parse_score(&f.sir, Metric::Sir, &file.track)?,
                    sar: parse_score(&f.sar, Metric::Sar, &file.track)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        targets.insert(name, frames);
    }
    Ok(TrackScore {
        track: file.track,
        method: file.method,
        sample_rate: file.sample_rate,
        targets,
    })
}

/// Serialises one score as a JSON object, several as an array.
pub fn report_json(scores: &[TrackScore]) -> Result<String> {
    let files: Vec<ReportFile> = scores.iter().map(to_file).collect();
    let text = match files.as_slice() {
        [single] => serde_json::to_string_pretty(single)?,
        many => serde_json::to_string_pretty(many)?,
    };
    Ok(text + "\n")
}

pub fn write_report(scores: &[TrackScore], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, report_json(scores)?)?;
    Ok(())
}

fn parse_object(value: Value) -> Result<TrackScore> {
    let version = value
        .get("schema_version")
        .ok_or_else(|| Error::MalformedReport("missing schema_version".into()))?;
    let version = version
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| Error::MalformedReport(format!("schema_version {version} is not an integer")))?;
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let file: ReportFile = serde_json::from_value(value).map_err(|e| Error::MalformedReport(e.to_string()))?;
    from_file(file)
}

pub fn parse_report(text: &str) -> Result<Vec<TrackScore>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::MalformedReport(e.to_string()))?;
    match value {
        Value::Array(items) => items.into_iter().map(parse_object).collect(),
        obj @ Value::Object(_) => Ok(vec![parse_object(obj)?]),
        _ => Err(Error::MalformedReport("expected a JSON object or array".into())),
    }
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<TrackScore>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_report(&text).map_err(|e| match e {
        Error::MalformedReport(msg) => Error::MalformedReport(format!("{}: {msg}", path.display())),
        other => other,
    })
}
