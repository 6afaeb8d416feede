//! Scoring estimate folders against corpus tracks.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::report::TrackScore;
use crate::audio::AudioSignal;
use crate::bss::{evaluate_pairs, BssEvalConfig, EvalMode, DEFAULT_FILTER_LEN};
use crate::dataset::{load_track, Track, TrackRef, ACCOMPANIMENT, STEMS, VOCALS};
use crate::error::{Error, Result};
use crate::wav::load_wav;

/// Evaluation settings; window and hop are in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub filter_len: usize,
    pub window: f64,
    pub hop: f64,
    pub mode: EvalMode,
    /// Also score the accompaniment against the vocals/accompaniment pair.
    pub accompaniment: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            filter_len: DEFAULT_FILTER_LEN,
            window: 1.0,
            hop: 1.0,
            mode: EvalMode::V4Global,
            accompaniment: true,
        }
    }
}

impl EvalConfig {
    pub fn bss_config(&self, sample_rate: u32) -> Result<BssEvalConfig> {
        BssEvalConfig::from_seconds(sample_rate, self.window, self.hop, self.filter_len, self.mode)
    }
}

fn check_estimate(name: &str, est: &AudioSignal, mixture: &AudioSignal, track: &str) -> Result<()> {
    if est.num_samples() != mixture.num_samples()
        || est.num_channels() != mixture.num_channels()
        || est.sample_rate() != mixture.sample_rate()
    {
        return Err(Error::LengthMismatch(format!(
            "track '{track}': estimate '{name}' is {} samples x {} ch at {} Hz, track is {} x {} at {} Hz",
            est.num_samples(),
            est.num_channels(),
            est.sample_rate(),
            mixture.num_samples(),
            mixture.num_channels(),
            mixture.sample_rate()
        )));
    }
    Ok(())
}

/// Scores in-memory estimates keyed by target name.
///
/// Stems are scored against all four stems. When enabled, the
/// accompaniment (given directly, or the sum of the drums, bass and other
/// estimates) is scored against the vocals/accompaniment reference pair.
/// Targets without an estimate are left out.
pub fn evaluate_estimates(
    track: &Track,
    estimates: &BTreeMap<String, AudioSignal>,
    method: &str,
    config: &EvalConfig,
) -> Result<TrackScore> {
    let name = &track.reference.name;
    for (target, est) in estimates {
        check_estimate(target, est, &track.mixture, name)?;
    }
    let bss = config.bss_config(track.mixture.sample_rate())?;
    let mut score = TrackScore::new(name.clone(), method, track.mixture.sample_rate());

    let references = track.sources();
    let pairs: Vec<(usize, &AudioSignal)> = STEMS
        .iter()
        .enumerate()
        .filter_map(|(j, stem)| estimates.get(*stem).map(|e| (j, e)))
        .collect();
    if !pairs.is_empty() {
        let frames = evaluate_pairs(&references, &pairs, &bss)?;
        for ((j, _), f) in pairs.iter().zip(frames) {
            score.targets.insert(STEMS[*j].to_string(), f);
        }
    }

    if config.accompaniment {
        let summed;
        let acc_est = match estimates.get(ACCOMPANIMENT) {
            Some(a) => Some(a),
            None => {
                let parts: Option<Vec<&AudioSignal>> = STEMS
                    .iter()
                    .filter(|s| **s != VOCALS)
                    .map(|s| estimates.get(*s))
                    .collect();
                match parts {
                    Some(p) => {
                        summed = AudioSignal::sum(p)?;
                        Some(&summed)
                    }
                    None => None,
                }
            }
        };
        if let Some(acc_est) = acc_est {
            let vocals = track
                .stem(VOCALS)
                .ok_or_else(|| Error::Corpus(format!("track '{name}' has no vocals stem")))?;
            let refs = [vocals.clone(), track.accompaniment()?];
            let frames = evaluate_pairs(&refs, &[(1, acc_est)], &bss)?;
            score
                .targets
                .insert(ACCOMPANIMENT.to_string(), frames.into_iter().next().expect("one pair"));
        }
    }
    Ok(score)
}

/// Reads `<target>.wav` estimates from `estimates_dir` and scores them.
/// A missing file drops that target; a folder with no estimate at all is an
/// error.
pub fn evaluate_track(
    track: &TrackRef,
    estimates_dir: impl AsRef<Path>,
    method: &str,
    config: &EvalConfig,
) -> Result<TrackScore> {
    let dir = estimates_dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut estimates = BTreeMap::new();
    for target in STEMS.iter().chain([&ACCOMPANIMENT]) {
        let path = dir.join(format!("{target}.wav"));
        if path.is_file() {
            estimates.insert(target.to_string(), load_wav(&path)?);
        } else if *target != ACCOMPANIMENT {
            log::warn!("track '{}': no estimate for '{target}' in {}", track.name, dir.display());
        }
    }
    if estimates.is_empty() {
        return Err(Error::MissingFile(dir.join("<target>.wav")));
    }
    let loaded = load_track(track)?;
    evaluate_estimates(&loaded, &estimates, method, config)
}

/// Runs `job` over `items` on at most `workers` threads. Results come back in
/// input order, so the outcome does not depend on the worker count.
pub fn run_parallel<T, R, F>(items: &[T], workers: usize, job: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(&job).collect())
}
