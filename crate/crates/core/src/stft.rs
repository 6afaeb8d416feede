//! Short-time Fourier transform and its overlap-add inverse.
//!
//! Frames are laid out so that every input sample is covered by the same
//! number of frames: the signal is preceded by `window_size - hop_size` zeros
//! and followed by enough zeros to complete the last frame. Synthesis uses the
//! analysis window again (weighted overlap-add) and divides by the constant
//! `sum_t w[n - t*hop]^2`, which is why the window must satisfy the
//! constant-overlap-add condition on its square at the chosen hop.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use ndarray::{s, Array2, Array3, ArrayView3, Axis};
use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WindowKind {
    /// Periodic Hann window.
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, size: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..size)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / size as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; size],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop_size: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_size: 4096,
            hop_size: 1024,
            window: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn new(window_size: usize, hop_size: usize, window: WindowKind) -> Result<Self> {
        let cfg = Self {
            window_size,
            hop_size,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks `0 < hop <= window` and returns the overlap-add gain
    /// `sum_t w[n - t*hop]^2`, which must not depend on `n`.
    pub fn validate(&self) -> Result<f64> {
        let (w, h) = (self.window_size, self.hop_size);
        if w == 0 || h == 0 {
            return Err(Error::InvalidStftConfig(
                "window and hop sizes must be positive".into(),
            ));
        }
        if h > w {
            return Err(Error::InvalidStftConfig(format!(
                "hop size {h} exceeds window size {w}"
            )));
        }
        let win = self.window.coefficients(w);
        let sums: Vec<f64> = (0..h)
            .map(|n| (n..w).step_by(h).map(|k| win[k] * win[k]).sum())
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        if !(min > 0.0) || (max - min) > 1e-10 * max {
            return Err(Error::InvalidStftConfig(format!(
                "{:?} window of {w} samples is not overlap-add constant at hop {h}",
                self.window
            )));
        }
        Ok(sums.iter().sum::<f64>() / h as f64)
    }

    pub fn num_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    /// Zeros inserted before the first sample.
    pub fn lead_in(&self) -> usize {
        self.window_size - self.hop_size
    }

    /// Number of frames used for a signal of `len` samples. Signals shorter
    /// than a window are treated as one window long.
    pub fn num_frames(&self, len: usize) -> usize {
        let effective = len.max(self.window_size);
        (self.lead_in() + effective - 1) / self.hop_size + 1
    }
}

/// Complex STFT of a multichannel signal, shaped `[bins, frames, channels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    bins: Array3<Complex64>,
    config: StftConfig,
    original_length: usize,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn from_parts(
        bins: Array3<Complex64>,
        config: StftConfig,
        original_length: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        config.validate()?;
        if bins.len_of(Axis(0)) != config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "{} bins, expected {}",
                bins.len_of(Axis(0)),
                config.num_bins()
            )));
        }
        if bins.len_of(Axis(1)) != config.num_frames(original_length) {
            return Err(Error::ShapeMismatch(format!(
                "{} frames, expected {} for {original_length} samples",
                bins.len_of(Axis(1)),
                config.num_frames(original_length)
            )));
        }
        if bins.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidSignal("non-finite spectrogram entry".into()));
        }
        Ok(Self {
            bins,
            config,
            original_length,
            sample_rate,
        })
    }

    /// Same layout as `self` with new contents. Shapes must agree.
    pub fn with_bins(&self, bins: Array3<Complex64>) -> Result<Self> {
        if bins.dim() != self.bins.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                bins.dim(),
                self.bins.dim()
            )));
        }
        Ok(Self {
            bins,
            ..self.clone()
        })
    }

    pub fn bins(&self) -> ArrayView3<'_, Complex64> {
        self.bins.view()
    }

    pub fn into_bins(self) -> Array3<Complex64> {
        self.bins
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len_of(Axis(0))
    }

    pub fn num_frames(&self) -> usize {
        self.bins.len_of(Axis(1))
    }

    pub fn num_channels(&self) -> usize {
        self.bins.len_of(Axis(2))
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.bins.dim()
    }

    /// Energy of the two-sided spectrum: interior bins count twice, DC and
    /// (for even windows) Nyquist once.
    pub fn energy(&self) -> f64 {
        let n = self.config.window_size;
        let f = self.num_bins();
        self.bins
            .axis_iter(Axis(0))
            .enumerate()
            .map(|(k, plane)| {
                let weight = if k == 0 || (n % 2 == 0 && k == f - 1) {
                    1.0
                } else {
                    2.0
                };
                weight * plane.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum()
    }
}

/// Planned forward and inverse transforms for one configuration.
#[derive(Clone)]
pub struct StftEngine {
    config: StftConfig,
    window: Vec<f64>,
    gain: f64,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for StftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftEngine")
            .field("config", &self.config)
            .finish()
    }
}

impl StftEngine {
    pub fn new(config: StftConfig) -> Result<Self> {
        let gain = config.validate()?;
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Self {
            window: config.window.coefficients(config.window_size),
            gain,
            forward: planner.plan_fft_forward(config.window_size),
            inverse: planner.plan_fft_inverse(config.window_size),
            config,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    /// Analyses the given frame range, returning `[bins, frames, channels]`.
    pub fn analyze(&self, signal: &AudioSignal, frames: Range<usize>) -> Array3<Complex64> {
        let w = self.config.window_size;
        let h = self.config.hop_size;
        let lead = self.config.lead_in() as isize;
        let n = signal.num_samples() as isize;
        let channels = signal.num_channels();
        let samples = signal.samples();

        let mut out = Array3::zeros((self.config.num_bins(), frames.len(), channels));
        let mut frame = vec![0.0; w];
        let mut spectrum = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        for (ti, t) in frames.enumerate() {
            let start = (t * h) as isize - lead;
            for c in 0..channels {
                for (k, slot) in frame.iter_mut().enumerate() {
                    let idx = start + k as isize;
                    *slot = if idx >= 0 && idx < n {
                        samples[[idx as usize, c]] * self.window[k]
                    } else {
                        0.0
                    };
                }
                self.forward
                    .process_with_scratch(&mut frame, &mut spectrum, &mut scratch)
                    .expect("buffer sizes come from the plan");
                out.slice_mut(s![.., ti, c])
                    .iter_mut()
                    .zip(&spectrum)
                    .for_each(|(o, &z)| *o = z);
            }
        }
        out
    }

    pub fn stft(&self, signal: &AudioSignal) -> Result<Spectrogram> {
        if signal.is_empty() {
            return Err(Error::EmptySignal);
        }
        let frames = self.config.num_frames(signal.num_samples());
        Ok(Spectrogram {
            bins: self.analyze(signal, 0..frames),
            config: self.config,
            original_length: signal.num_samples(),
            sample_rate: signal.sample_rate(),
        })
    }

    pub fn synthesizer(&self, original_length: usize, channels: usize) -> OverlapAdd<'_> {
        let frames = self.config.num_frames(original_length);
        let padded = (frames - 1) * self.config.hop_size + self.config.window_size;
        OverlapAdd {
            engine: self,
            buffer: Array2::zeros((padded, channels)),
            original_length,
            frames,
        }
    }
}

/// Incremental weighted overlap-add synthesis.
pub struct OverlapAdd<'a> {
    engine: &'a StftEngine,
    buffer: Array2<f64>,
    original_length: usize,
    frames: usize,
}

impl OverlapAdd<'_> {
    /// Adds frames `first_frame..first_frame + bins.dim().1`.
    pub fn add(&mut self, first_frame: usize, bins: ArrayView3<'_, Complex64>) -> Result<()> {
        let cfg = &self.engine.config;
        let (f, t, c) = bins.dim();
        if f != cfg.num_bins() || c != self.buffer.ncols() || first_frame + t > self.frames {
            return Err(Error::ShapeMismatch(format!(
                "frames {first_frame}..{} of shape {:?} do not fit a {}-frame, {}-channel synthesis",
                first_frame + t,
                (f, t, c),
                self.frames,
                self.buffer.ncols()
            )));
        }
        let w = cfg.window_size;
        let norm = 1.0 / (w as f64 * self.engine.gain);
        let mut spectrum = self.engine.inverse.make_input_vec();
        let mut frame = self.engine.inverse.make_output_vec();
        let mut scratch = self.engine.inverse.make_scratch_vec();
        for ti in 0..t {
            let start = (first_frame + ti) * cfg.hop_size;
            for ch in 0..c {
                spectrum
                    .iter_mut()
                    .zip(bins.slice(s![.., ti, ch]))
                    .for_each(|(o, &z)| *o = z);
                // A real signal has purely real DC and Nyquist coefficients.
                spectrum[0].im = 0.0;
                if w % 2 == 0 {
                    spectrum[f - 1].im = 0.0;
                }
                self.engine
                    .inverse
                    .process_with_scratch(&mut spectrum, &mut frame, &mut scratch)
                    .expect("buffer sizes come from the plan");
                let mut col = self.buffer.slice_mut(s![start..start + w, ch]);
                for (k, o) in col.iter_mut().enumerate() {
                    *o += frame[k] * self.engine.window[k] * norm;
                }
            }
        }
        Ok(())
    }

    pub fn finish(self, sample_rate: u32) -> Result<AudioSignal> {
        let lead = self.engine.config.lead_in();
        let samples = self
            .buffer
            .slice(s![lead..lead + self.original_length, ..])
            .to_owned();
        AudioSignal::new(samples, sample_rate)
    }
}

pub fn stft(signal: &AudioSignal, config: &StftConfig) -> Result<Spectrogram> {
    StftEngine::new(*config)?.stft(signal)
}

/// Inverse transform, trimmed to `original_length` samples.
pub fn istft(spec: &Spectrogram, original_length: usize) -> Result<AudioSignal> {
    let engine = StftEngine::new(spec.config)?;
    if spec.num_frames() != spec.config.num_frames(original_length) {
        return Err(Error::ShapeMismatch(format!(
            "{} frames cannot be trimmed to {original_length} samples",
            spec.num_frames()
        )));
    }
    let mut ola = engine.synthesizer(original_length, spec.num_channels());
    ola.add(0, spec.bins())?;
    ola.finish(spec.sample_rate)
}
