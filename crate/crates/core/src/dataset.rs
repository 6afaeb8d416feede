//! Stem corpora laid out as `root/{train,test}/<track>/<stem>.wav`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::wav::{load_wav, wav_info, WavInfo};

pub const MIXTURE: &str = "mixture";
/// Stem names in the order used for source lists.
pub const STEMS: [&str; 4] = ["drums", "bass", "other", "vocals"];
pub const VOCALS: &str = "vocals";
pub const ACCOMPANIMENT: &str = "accompaniment";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Train, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidParameter(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRef {
    pub name: String,
    pub split: Split,
    pub path: PathBuf,
    pub duration: f64,
    pub sample_rate: u32,
    pub channels: usize,
    pub num_samples: usize,
}

impl TrackRef {
    pub fn file(&self, stem: &str) -> PathBuf {
        self.path.join(format!("{stem}.wav"))
    }
}

/// A track folder that was skipped during a scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanWarning {
    pub path: PathBuf,
    pub reason: String,
}

impl fmt::Display for ScanWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "skipping {}: {}", self.path.display(), self.reason)
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub root: PathBuf,
    /// Training tracks then test tracks, each sorted by name.
    pub tracks: Vec<TrackRef>,
    pub warnings: Vec<ScanWarning>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &TrackRef> {
        self.tracks.iter().filter(move |t| t.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn find(&self, name: &str) -> Option<&TrackRef> {
        self.tracks.iter().find(|t| t.name == name)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            root: self.root.clone(),
            tracks: self
                .tracks
                .iter()
                .map(|t| ManifestEntry {
                    name: t.name.clone(),
                    split: t.split,
                    duration: t.duration,
                    sample_rate: t.sample_rate,
                    channels: t.channels,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub split: Split,
    pub duration: f64,
    pub sample_rate: u32,
    pub channels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub root: PathBuf,
    pub tracks: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

fn inspect_track(dir: &Path) -> std::result::Result<WavInfo, String> {
    let mut reference: Option<(&str, WavInfo)> = None;
    for stem in std::iter::once(MIXTURE).chain(STEMS) {
        let file = dir.join(format!("{stem}.wav"));
        if !file.is_file() {
            return Err(format!("missing {stem}.wav"));
        }
        let info = wav_info(&file).map_err(|e| format!("{stem}.wav: {e}"))?;
        match &reference {
            None => reference = Some((stem, info)),
            Some((first, r)) if *r != info => {
                return Err(format!(
                    "{stem}.wav is {} samples x {} ch at {} Hz but {first}.wav is {} x {} at {} Hz",
                    info.num_samples, info.channels, info.sample_rate, r.num_samples, r.channels, r.sample_rate
                ))
            }
            Some(_) => {}
        }
    }
    Ok(reference.expect("five stems checked").1)
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// Lists the valid tracks of both splits. Malformed folders are skipped and
/// described in [`Corpus::warnings`]; an empty result is an error.
pub fn scan_corpus(root: impl AsRef<Path>) -> Result<Corpus> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Corpus(format!("corpus root {} is not a directory", root.display())));
    }
    let mut tracks = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for split in Split::ALL {
        let dir = root.join(split.dir_name());
        if !dir.is_dir() {
            continue;
        }
        for (name, path) in sorted_subdirs(&dir)? {
            if seen.contains(&name) {
                warnings.push(ScanWarning {
                    path,
                    reason: format!("track name '{name}' already present in another split"),
                });
                continue;
            }
            match inspect_track(&path) {
                Ok(info) => {
                    seen.insert(name.clone());
                    tracks.push(TrackRef {
                        duration: info.num_samples as f64 / info.sample_rate as f64,
                        name,
                        split,
                        path,
                        sample_rate: info.sample_rate,
                        channels: info.channels,
                        num_samples: info.num_samples,
                    });
                }
                Err(reason) => warnings.push(ScanWarning { path, reason }),
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    if tracks.is_empty() {
        return Err(Error::Corpus(format!("no valid tracks under {}", root.display())));
    }
    Ok(Corpus {
        root: root.to_path_buf(),
        tracks,
        warnings,
    })
}

/// Decoded mixture and stems of one track.
#[derive(Clone, Debug)]
pub struct Track {
    pub reference: TrackRef,
    pub mixture: AudioSignal,
    /// In [`STEMS`] order.
    pub stems: Vec<(String, AudioSignal)>,
}

impl Track {
    pub fn stem(&self, name: &str) -> Option<&AudioSignal> {
        self.stems.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn sources(&self) -> Vec<AudioSignal> {
        self.stems.iter().map(|(_, s)| s.clone()).collect()
    }

    /// Sum of every stem except the vocals.
    pub fn accompaniment(&self) -> Result<AudioSignal> {
        AudioSignal::sum(self.stems.iter().filter(|(n, _)| n != VOCALS).map(|(_, s)| s))
    }
}

pub fn load_track(track: &TrackRef) -> Result<Track> {
    let mixture = load_wav(track.file(MIXTURE))?;
    let mut stems = Vec::with_capacity(STEMS.len());
    for stem in STEMS {
        let sig = load_wav(track.file(stem))?;
        if !sig.same_shape(&mixture) || sig.sample_rate() != mixture.sample_rate() {
            return Err(Error::Corpus(format!(
                "track '{}': stem '{stem}' is {} samples x {} ch at {} Hz, mixture is {} x {} at {} Hz",
                track.name,
                sig.num_samples(),
                sig.num_channels(),
                sig.sample_rate(),
                mixture.num_samples(),
                mixture.num_channels(),
                mixture.sample_rate()
            )));
        }
        stems.push((stem.to_string(), sig));
    }
    Ok(Track {
        reference: track.clone(),
        mixture,
        stems,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub track: String,
    pub max_abs_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Largest `|mixture - sum of stems|` over all samples and channels.
pub fn validate_mixture(track: &TrackRef, tolerance: f64) -> Result<MixtureReport> {
    let loaded = load_track(track)?;
    let sum = AudioSignal::sum(loaded.stems.iter().map(|(_, s)| s))?;
    let deviation = loaded.mixture.max_abs_diff(&sum)?;
    Ok(MixtureReport {
        track: track.name.clone(),
        max_abs_deviation: deviation,
        tolerance,
        passed: deviation <= tolerance,
    })
}
