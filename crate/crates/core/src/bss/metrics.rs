//! Energy ratios computed window by window from a decomposition.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Component energies at or below this fraction of the window's signal
/// energy are treated as exactly zero (about 200 dB), which is below the
/// resolution of the double-precision projection.
pub const NUMERICAL_FLOOR: f64 = 1e-20;

/// A dB score that may be infinite or undefined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Score {
    Finite(f64),
    PosInf,
    NegInf,
    Undefined,
}

impl Score {
    /// `10 log10(num / den)` with exact zeros mapped to infinities.
    pub fn ratio_db(num: f64, den: f64) -> Score {
        match (num > 0.0, den > 0.0) {
            (true, true) => Score::Finite(10.0 * (num / den).log10()),
            (true, false) => Score::PosInf,
            (false, true) => Score::NegInf,
            (false, false) => Score::Undefined,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Score::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Score::Finite(_))
    }

    pub fn status(self) -> &'static str {
        match self {
            Score::Finite(_) => "finite",
            Score::PosInf => "inf",
            Score::NegInf => "neg_inf",
            Score::Undefined => "undefined",
        }
    }

    pub fn from_status(status: &str, value: Option<f64>) -> Option<Score> {
        match (status, value) {
            ("finite", Some(v)) if v.is_finite() => Some(Score::Finite(v)),
            ("inf", None) => Some(Score::PosInf),
            ("neg_inf", None) => Some(Score::NegInf),
            ("undefined", None) => Some(Score::Undefined),
            _ => None,
        }
    }

    /// Value as an `f64`, with `NaN` for undefined.
    pub fn as_f64(self) -> f64 {
        match self {
            Score::Finite(v) => v,
            Score::PosInf => f64::INFINITY,
            Score::NegInf => f64::NEG_INFINITY,
            Score::Undefined => f64::NAN,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "SDR")]
    Sdr,
    #[serde(rename = "ISR")]
    Isr,
    #[serde(rename = "SIR")]
    Sir,
    #[serde(rename = "SAR")]
    Sar,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Sdr, Metric::Isr, Metric::Sir, Metric::Sar];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sdr => "SDR",
            Metric::Isr => "ISR",
            Metric::Sir => "SIR",
            Metric::Sar => "SAR",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SDR" => Ok(Metric::Sdr),
            "ISR" => Ok(Metric::Isr),
            "SIR" => Ok(Metric::Sir),
            "SAR" => Ok(Metric::Sar),
            other => Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Scores of one evaluation window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameScores {
    pub window_start: usize,
    pub window_len: usize,
    pub sdr: Score,
    pub isr: Score,
    pub sir: Score,
    pub sar: Score,
}

impl FrameScores {
    pub fn get(&self, metric: Metric) -> Score {
        match metric {
            Metric::Sdr => self.sdr,
            Metric::Isr => self.isr,
            Metric::Sir => self.sir,
            Metric::Sar => self.sar,
        }
    }
}

/// Split of an estimate into target, spatial, interference and artifact parts,
/// each shaped like the estimate (`[samples, channels]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub target: Array2<f64>,
    pub spatial: Array2<f64>,
    pub interference: Array2<f64>,
    pub artifacts: Array2<f64>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.target.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of the four components.
    pub fn estimate(&self) -> Array2<f64> {
        &self.target + &self.spatial + &self.interference + &self.artifacts
    }
}

/// Number of whole windows: trailing partial windows are not scored.
pub fn num_windows(len: usize, window: usize, hop: usize) -> usize {
    if window == 0 || hop == 0 || len < window {
        0
    } else {
        (len - window) / hop + 1
    }
}

/// Energies of the decomposition terms and their partial sums over a window.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct WindowEnergies {
    target: f64,
    spatial: f64,
    interf: f64,
    artif: f64,
    image: f64,
    sources: f64,
    estimate: f64,
    distortion: f64,
}

impl WindowEnergies {
    #[inline]
    pub(crate) fn add(&mut self, target: f64, spatial: f64, interf: f64, artif: f64) {
        let image = target + spatial;
        let sources = image + interf;
        let distortion = spatial + interf + artif;
        self.target += target * target;
        self.spatial += spatial * spatial;
        self.interf += interf * interf;
        self.artif += artif * artif;
        self.image += image * image;
        self.sources += sources * sources;
        self.estimate += (sources + artif) * (sources + artif);
        self.distortion += distortion * distortion;
    }

    pub(crate) fn scores(&self, window_start: usize, window_len: usize) -> FrameScores {
        if self.target == 0.0 {
            return FrameScores {
                window_start,
                window_len,
                sdr: Score::Undefined,
                isr: Score::Undefined,
                sir: Score::Undefined,
                sar: Score::Undefined,
            };
        }
        let floor = NUMERICAL_FLOOR * (self.target + self.estimate);
        let snap = |e: f64| if e <= floor { 0.0 } else { e };
        let ratio = |num: f64, den: f64| Score::ratio_db(snap(num), snap(den));
        FrameScores {
            window_start,
            window_len,
            sdr: ratio(self.target, self.distortion),
            isr: ratio(self.target, self.spatial),
            sir: ratio(self.image, self.interf),
            sar: ratio(self.sources, self.artif),
        }
    }
}

/// Components of one sample, built by successive residuals so that they sum
/// to `est` up to one rounding.
#[inline]
pub(crate) fn split_sample(y: f64, p_target: f64, p_all: f64, est: f64) -> (f64, f64, f64, f64) {
    let spatial = p_target - y;
    let interf = p_all - p_target;
    let artif = est - (y + spatial + interf);
    (y, spatial, interf, artif)
}

pub(crate) fn window_scores(d: &Decomposition, start: usize, len: usize) -> FrameScores {
    let mut acc = WindowEnergies::default();
    let sl = s![start..start + len, ..];
    ndarray::Zip::from(d.target.slice(sl))
        .and(d.spatial.slice(sl))
        .and(d.interference.slice(sl))
        .and(d.artifacts.slice(sl))
        .for_each(|&t, &sp, &i, &a| acc.add(t, sp, i, a));
    acc.scores(start, len)
}

/// SDR, ISR, SIR and SAR in each window of `window` samples every `hop`
/// samples. Energies are summed over channels; windows are rectangular.
pub fn metrics_from_decomposition(d: &Decomposition, window: usize, hop: usize) -> Vec<FrameScores> {
    (0..num_windows(d.len(), window, hop))
        .map(|w| window_scores(d, w * hop, window))
        .collect()
}
