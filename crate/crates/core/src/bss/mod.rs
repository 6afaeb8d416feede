//! Image-based separation metrics with least-squares distortion filters.
//!
//! `V4Global` fits one filter set per track and scores it window by window;
//! `V3Windowed` refits the filters inside every window.

mod decompose;
mod fftcorr;
mod gram;
mod metrics;
mod projection;

use std::str::FromStr;

use ndarray::{s, ArrayView2};

pub use decompose::{decompose, decompose_segments};
pub use metrics::{metrics_from_decomposition, num_windows, Decomposition, FrameScores, Metric, Score, NUMERICAL_FLOOR};
pub use projection::{apply_filters, compute_projection, FilterMode, FilterSegment, ProjectionFilters};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use metrics::{split_sample, WindowEnergies};
use projection::{check_signals, columns, flatten_refs, SegmentSystem};

pub const DEFAULT_FILTER_LEN: usize = 512;
pub const DEFAULT_WINDOW: usize = 44_100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvalMode {
    #[default]
    V4Global,
    V3Windowed,
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v4" | "v4_global" | "global" => Ok(EvalMode::V4Global),
            "v3" | "v3_windowed" | "windowed" => Ok(EvalMode::V3Windowed),
            other => Err(Error::InvalidParameter(format!("unknown evaluation mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalMode::V4Global => "v4",
            EvalMode::V3Windowed => "v3",
        })
    }
}

/// Filter length, window and hop are in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BssEvalConfig {
    pub filter_len: usize,
    pub window: usize,
    pub hop: usize,
    pub mode: EvalMode,
}

impl Default for BssEvalConfig {
    fn default() -> Self {
        Self {
            filter_len: DEFAULT_FILTER_LEN,
            window: DEFAULT_WINDOW,
            hop: DEFAULT_WINDOW,
            mode: EvalMode::V4Global,
        }
    }
}

impl BssEvalConfig {
    /// Window and hop given in seconds at `sample_rate`.
    pub fn from_seconds(sample_rate: u32, window: f64, hop: f64, filter_len: usize, mode: EvalMode) -> Result<Self> {
        let to_samples = |secs: f64, what: &str| {
            let n = (secs * sample_rate as f64).round();
            if secs.is_finite() && n >= 1.0 {
                Ok(n as usize)
            } else {
                Err(Error::InvalidParameter(format!("{what} of {secs} s is not a positive duration")))
            }
        };
        Ok(Self {
            filter_len,
            window: to_samples(window, "window")?,
            hop: to_samples(hop, "hop")?,
            mode,
        })
    }

    fn validate(&self, len: usize) -> Result<()> {
        if self.window == 0 || self.hop == 0 {
            return Err(Error::InvalidParameter("window and hop must be positive".into()));
        }
        if self.window > len {
            return Err(Error::WindowTooLong {
                window: self.window,
                len,
            });
        }
        if self.mode == EvalMode::V3Windowed && self.filter_len > self.window {
            return Err(Error::InvalidParameter(format!(
                "filter length {} exceeds the window of {} samples",
                self.filter_len, self.window
            )));
        }
        Ok(())
    }
}

fn score_windows(
    reference: ArrayView2<'_, f64>,
    p_target: ArrayView2<'_, f64>,
    p_all: ArrayView2<'_, f64>,
    estimate: ArrayView2<'_, f64>,
    offset: usize,
    window: usize,
    hop: usize,
) -> Vec<FrameScores> {
    let channels = estimate.ncols();
    (0..num_windows(estimate.nrows(), window, hop))
        .map(|w| {
            let start = w * hop;
            let mut acc = WindowEnergies::default();
            for t in start..start + window {
                for c in 0..channels {
                    let (y, sp, i, a) = split_sample(
                        reference[[t, c]],
                        p_target[[t, c]],
                        p_all[[t, c]],
                        estimate[[t, c]],
                    );
                    acc.add(y, sp, i, a);
                }
            }
            acc.scores(offset + start, window)
        })
        .collect()
}

/// Scores each `(target index, estimate)` pair against `references`.
///
/// The Gram matrices depend on the references only, so they are factored
/// once (per window in `V3Windowed` mode) and shared by all estimates.
pub fn evaluate_pairs(
    references: &[AudioSignal],
    pairs: &[(usize, &AudioSignal)],
    config: &BssEvalConfig,
) -> Result<Vec<Vec<FrameScores>>> {
    let estimates: Vec<&AudioSignal> = pairs.iter().map(|p| p.1).collect();
    let (len, channels) = check_signals(references, &estimates, config.filter_len)?;
    config.validate(len)?;
    let mut wanted = vec![false; references.len()];
    for &(j, _) in pairs {
        if j >= references.len() {
            return Err(Error::InvalidParameter(format!(
                "target index {j} out of range for {} references",
                references.len()
            )));
        }
        wanted[j] = true;
    }

    match config.mode {
        EvalMode::V4Global => {
            let system = SegmentSystem::new(flatten_refs(references, 0, len), channels, config.filter_len, &wanted);
            if system.rank_deficient() {
                log::debug!("rank-deficient reference Gram matrix; using minimum-norm filters");
            }
            Ok(pairs
                .iter()
                .map(|&(j, est)| {
                    let (p_target, p_all) = system.projections(j, &columns(est, 0, len), len);
                    score_windows(
                        references[j].samples(),
                        p_target.view(),
                        p_all.view(),
                        est.samples(),
                        0,
                        config.window,
                        config.hop,
                    )
                })
                .collect())
        }
        EvalMode::V3Windowed => {
            let mut out = vec![Vec::new(); pairs.len()];
            for w in 0..num_windows(len, config.window, config.hop) {
                let (start, win) = (w * config.hop, config.window);
                let system =
                    SegmentSystem::new(flatten_refs(references, start, win), channels, config.filter_len, &wanted);
                let sl = s![start..start + win, ..];
                for (frames, &(j, est)) in out.iter_mut().zip(pairs) {
                    let (p_target, p_all) = system.projections(j, &columns(est, start, win), win);
                    frames.extend(score_windows(
                        references[j].samples().slice(sl),
                        p_target.view(),
                        p_all.view(),
                        est.samples().slice(sl),
                        start,
                        win,
                        win,
                    ));
                }
            }
            Ok(out)
        }
    }
}

/// Scores `estimates[k]` against target `references[k]`.
pub fn bss_eval(
    references: &[AudioSignal],
    estimates: &[AudioSignal],
    config: &BssEvalConfig,
) -> Result<Vec<Vec<FrameScores>>> {
    if estimates.len() != references.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} estimates for {} references",
            estimates.len(),
            references.len()
        )));
    }
    let pairs: Vec<(usize, &AudioSignal)> = estimates.iter().enumerate().collect();
    evaluate_pairs(references, &pairs, config)
}
