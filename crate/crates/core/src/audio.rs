//! Multichannel time-domain signals.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Multichannel audio, stored as `[num_samples, channels]`.
///
/// Samples are dimensionless amplitudes, nominally in `[-1, 1]`. Every sample
/// is finite and there is at least one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioSignal {
    samples: Array2<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if samples.ncols() == 0 {
            return Err(Error::InvalidSignal("signal has no channels".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "non-finite sample at flat index {pos}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(num_samples: usize, channels: usize, sample_rate: u32) -> Result<Self> {
        Self::new(Array2::zeros((num_samples, channels)), sample_rate)
    }

    /// Builds a signal from per-channel sample vectors of equal length.
    pub fn from_channels(channels: &[Vec<f64>], sample_rate: u32) -> Result<Self> {
        let n = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidSignal("channels differ in length".into()));
        }
        let samples = Array2::from_shape_fn((n, channels.len()), |(t, c)| channels[c][t]);
        Self::new(samples, sample_rate)
    }

    pub fn num_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn num_channels(&self) -> usize {
        self.samples.ncols()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.num_samples() as f64 / f64::from(self.sample_rate)
    }

    pub fn samples(&self) -> ArrayView2<'_, f64> {
        self.samples.view()
    }

    pub fn channel(&self, c: usize) -> ArrayView1<'_, f64> {
        self.samples.index_axis(Axis(1), c)
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.num_samples() == 0
    }

    /// True when both signals share length, channel count and rate.
    pub fn same_shape(&self, other: &AudioSignal) -> bool {
        self.samples.dim() == other.samples.dim() && self.sample_rate == other.sample_rate
    }

    pub fn scaled(&self, factor: f64) -> AudioSignal {
        AudioSignal {
            samples: &self.samples * factor,
            sample_rate: self.sample_rate,
        }
    }

    /// Sample-wise sum of equally shaped signals.
    pub fn sum<'a, I>(signals: I) -> Result<AudioSignal>
    where
        I: IntoIterator<Item = &'a AudioSignal>,
    {
        let mut iter = signals.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidSignal("cannot sum an empty set of signals".into()))?;
        let mut acc = first.samples.clone();
        for s in iter {
            if !s.same_shape(first) {
                return Err(Error::ShapeMismatch(format!(
                    "cannot sum {:?}@{} with {:?}@{}",
                    first.samples.dim(),
                    first.sample_rate,
                    s.samples.dim(),
                    s.sample_rate
                )));
            }
            acc += &s.samples;
        }
        Ok(AudioSignal {
            samples: acc,
            sample_rate: first.sample_rate,
        })
    }

    /// Largest absolute sample-wise difference to another signal of the same shape.
    pub fn max_abs_diff(&self, other: &AudioSignal) -> Result<f64> {
        if self.samples.dim() != other.samples.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.samples.dim(),
                other.samples.dim()
            )));
        }
        Ok(self
            .samples
            .iter()
            .zip(other.samples.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }
}
