//! End-to-end oracle separation: analyse, mask, resynthesise.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array3, ArrayView3};
use realfft::num_complex::Complex64;

use super::masks::{ibm_values, irm_values, ScalarMask, TfMask};
use super::mwf::{mwf_mask_with_loading, CovarianceAccumulator, DEFAULT_MWF_ITERATIONS, DEFAULT_MWF_LOADING};
use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::stft::{StftConfig, StftEngine};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleMethod {
    /// Binary mask on `|y|^order`, order 1 or 2.
    Ibm { order: u32 },
    /// Ratio mask on `|y|^alpha`.
    Irm { alpha: f64 },
    Mwf,
}

impl OracleMethod {
    pub const IBM1: OracleMethod = OracleMethod::Ibm { order: 1 };
    pub const IBM2: OracleMethod = OracleMethod::Ibm { order: 2 };
    pub const IRM1: OracleMethod = OracleMethod::Irm { alpha: 1.0 };
    pub const IRM2: OracleMethod = OracleMethod::Irm { alpha: 2.0 };
    pub const MWF: OracleMethod = OracleMethod::Mwf;

    pub const ALL: [OracleMethod; 5] = [Self::IBM1, Self::IBM2, Self::IRM1, Self::IRM2, Self::MWF];

    /// Parses a method name; a bare `IRM` takes its exponent from `alpha`
    /// (default 1).
    pub fn parse(name: &str, alpha: Option<f64>) -> Result<Self> {
        let method = match name.to_ascii_uppercase().as_str() {
            "IBM1" => Self::IBM1,
            "IBM2" => Self::IBM2,
            "IRM1" => Self::IRM1,
            "IRM2" => Self::IRM2,
            "MWF" => Self::MWF,
            "IRM" => OracleMethod::Irm {
                alpha: alpha.unwrap_or(1.0),
            },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown oracle method '{other}' (expected IBM1, IBM2, IRM1, IRM2, IRM or MWF)"
                )))
            }
        };
        method.validate()?;
        Ok(method)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OracleMethod::Ibm { order } if order != 1 && order != 2 => Err(Error::InvalidParameter(format!(
                "binary mask order must be 1 or 2, got {order}"
            ))),
            OracleMethod::Irm { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(Error::InvalidParameter(
                format!("ratio mask exponent must be positive, got {alpha}"),
            )),
            _ => Ok(()),
        }
    }

    /// Name used for output folders and reports, e.g. `IRM2` or `IRM1.5`.
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OracleMethod::Ibm { order } => write!(f, "IBM{order}"),
            OracleMethod::Irm { alpha } => write!(f, "IRM{alpha}"),
            OracleMethod::Mwf => f.write_str("MWF"),
        }
    }
}

impl FromStr for OracleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("IRM").or_else(|| s.strip_prefix("irm")) {
            if !rest.is_empty() && rest != "1" && rest != "2" {
                let alpha = rest
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("unknown oracle method '{s}'")))?;
                return OracleMethod::parse("IRM", Some(alpha));
            }
        }
        OracleMethod::parse(s, None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub stft: StftConfig,
    /// Alternating updates of the spatial model (MWF only).
    pub iterations: usize,
    /// Relative diagonal loading of the mixture covariance (MWF only).
    pub loading: f64,
    /// Frames processed per block; bounds memory on long tracks.
    pub chunk_frames: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            iterations: DEFAULT_MWF_ITERATIONS,
            loading: DEFAULT_MWF_LOADING,
            chunk_frames: 128,
        }
    }
}

fn check_inputs(mixture: &AudioSignal, sources: &[AudioSignal]) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::InvalidParameter("at least one source is required".into()));
    }
    if mixture.is_empty() {
        return Err(Error::EmptySignal);
    }
    for (j, s) in sources.iter().enumerate() {
        if s.num_samples() != mixture.num_samples() {
            return Err(Error::LengthMismatch(format!(
                "source #{j} has {} samples, mixture has {}",
                s.num_samples(),
                mixture.num_samples()
            )));
        }
        if s.num_channels() != mixture.num_channels() || s.sample_rate() != mixture.sample_rate() {
            return Err(Error::ShapeMismatch(format!(
                "source #{j} is {} ch at {} Hz, mixture is {} ch at {} Hz",
                s.num_channels(),
                s.sample_rate(),
                mixture.num_channels(),
                mixture.sample_rate()
            )));
        }
    }
    Ok(())
}

/// Oracle estimates of every source from the mixture, each trimmed to the
/// mixture length.
///
/// Frames are processed in blocks of `chunk_frames`; MWF needs one extra
/// pass to accumulate the spatial statistics first. Masks depend only on the
/// frame's own bins (and on track-level statistics for MWF), so the output
/// does not depend on the block size.
pub fn oracle_separate(
    mixture: &AudioSignal,
    sources: &[AudioSignal],
    method: OracleMethod,
    config: &OracleConfig,
) -> Result<Vec<AudioSignal>> {
    method.validate()?;
    check_inputs(mixture, sources)?;
    if config.chunk_frames == 0 {
        return Err(Error::InvalidParameter("chunk size must be positive".into()));
    }
    let engine = StftEngine::new(config.stft)?;
    let len = mixture.num_samples();
    let channels = mixture.num_channels();
    let frames = config.stft.num_frames(len);
    let chunks: Vec<_> = (0..frames)
        .step_by(config.chunk_frames)
        .map(|t0| t0..(t0 + config.chunk_frames).min(frames))
        .collect();

    let spatial = if method == OracleMethod::Mwf {
        let mut acc = CovarianceAccumulator::new(sources.len(), config.stft.num_bins(), channels);
        for range in &chunks {
            for (j, s) in sources.iter().enumerate() {
                acc.add(j, engine.analyze(s, range.clone()).view());
            }
        }
        Some(acc.fit(config.iterations))
    } else {
        None
    };

    let mut synth: Vec<_> = sources.iter().map(|_| engine.synthesizer(len, channels)).collect();
    for range in &chunks {
        let mix = engine.analyze(mixture, range.clone());
        let images: Vec<Array3<Complex64>> = sources.iter().map(|s| engine.analyze(s, range.clone())).collect();
        let views: Vec<ArrayView3<'_, Complex64>> = images.iter().map(|a| a.view()).collect();
        let mask: Box<dyn TfMask> = match method {
            OracleMethod::Ibm { order } => Box::new(ScalarMask::new(ibm_values(&views, order))),
            OracleMethod::Irm { alpha } => Box::new(ScalarMask::new(irm_values(&views, alpha))),
            OracleMethod::Mwf => {
                let model = spatial.as_ref().expect("fitted above").model(&views);
                Box::new(mwf_mask_with_loading(&model, config.loading))
            }
        };
        for (j, ola) in synth.iter_mut().enumerate() {
            ola.add(range.start, mask.apply_bins(mix.view(), j).view())?;
        }
    }
    synth
        .into_iter()
        .map(|ola| ola.finish(mixture.sample_rate()))
        .collect()
}
