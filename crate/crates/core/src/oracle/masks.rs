//! Ideal binary and ratio masks, and applying masks to a mixture.

use ndarray::{s, Array3, Array4, Array5, ArrayView3, ArrayView4, ArrayView5, Axis, Zip};
use realfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stft::Spectrogram;

/// Source images `y_j` of one mixture, all with identical shape and STFT layout.
#[derive(Clone, Debug)]
pub struct SourceImages {
    images: Vec<Spectrogram>,
    labels: Vec<String>,
}

impl SourceImages {
    pub fn new(images: Vec<Spectrogram>, labels: Vec<String>) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidParameter("at least one source is required".into()))?;
        if labels.len() != images.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} sources",
                labels.len(),
                images.len()
            )));
        }
        for (img, label) in images.iter().zip(&labels) {
            if img.shape() != first.shape() || img.config() != first.config() {
                return Err(Error::ShapeMismatch(format!(
                    "source '{label}' has shape {:?}, expected {:?}",
                    img.shape(),
                    first.shape()
                )));
            }
        }
        Ok(Self { images, labels })
    }

    /// Labels `source0`, `source1`, ...
    pub fn unlabeled(images: Vec<Spectrogram>) -> Result<Self> {
        let labels = (0..images.len()).map(|j| format!("source{j}")).collect();
        Self::new(images, labels)
    }

    pub fn images(&self) -> &[Spectrogram] {
        &self.images
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `[bins, frames, channels]` of every image.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.images[0].shape()
    }

    pub(crate) fn views(&self) -> Vec<ArrayView3<'_, Complex64>> {
        self.images.iter().map(Spectrogram::bins).collect()
    }
}

/// Real gain per source, bin and channel: `[sources, bins, frames, channels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarMask {
    values: Array4<f64>,
}

impl ScalarMask {
    pub fn new(values: Array4<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> ArrayView4<'_, f64> {
        self.values.view()
    }
}

/// Complex `I x I` matrix per source and bin: `[sources, bins, frames, I, I]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixMask {
    values: Array5<Complex64>,
}

impl MatrixMask {
    pub fn new(values: Array5<Complex64>) -> Result<Self> {
        let d = values.dim();
        if d.3 != d.4 {
            return Err(Error::ShapeMismatch(format!(
                "mask matrices must be square, got {}x{}",
                d.3, d.4
            )));
        }
        Ok(Self { values })
    }

    /// The identity matrix at every bin, for one source.
    pub fn identity(bins: usize, frames: usize, channels: usize) -> Self {
        let values = Array5::from_shape_fn((1, bins, frames, channels, channels), |(_, _, _, r, c)| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self { values }
    }

    pub fn values(&self) -> ArrayView5<'_, Complex64> {
        self.values.view()
    }
}

/// A time-frequency mask that maps the mixture STFT to one source estimate.
pub trait TfMask {
    fn num_sources(&self) -> usize;

    /// `[bins, frames, channels]` of the mask's support.
    fn shape(&self) -> (usize, usize, usize);

    fn apply_bins(&self, mixture: ArrayView3<'_, Complex64>, source: usize) -> Array3<Complex64>;
}

impl TfMask for ScalarMask {
    fn num_sources(&self) -> usize {
        self.values.len_of(Axis(0))
    }

    fn shape(&self) -> (usize, usize, usize) {
        let d = self.values.dim();
        (d.1, d.2, d.3)
    }

    fn apply_bins(&self, mixture: ArrayView3<'_, Complex64>, source: usize) -> Array3<Complex64> {
        let gains = self.values.index_axis(Axis(0), source);
        let mut out = mixture.to_owned();
        Zip::from(&mut out).and(&gains).for_each(|o, &g| *o *= g);
        out
    }
}

impl TfMask for MatrixMask {
    fn num_sources(&self) -> usize {
        self.values.len_of(Axis(0))
    }

    fn shape(&self) -> (usize, usize, usize) {
        let d = self.values.dim();
        (d.1, d.2, d.3)
    }

    fn apply_bins(&self, mixture: ArrayView3<'_, Complex64>, source: usize) -> Array3<Complex64> {
        let (f_len, t_len, n) = mixture.dim();
        let m = self.values.index_axis(Axis(0), source);
        let mut out = Array3::zeros((f_len, t_len, n));
        for f in 0..f_len {
            for t in 0..t_len {
                let x = mixture.slice(s![f, t, ..]);
                let mat = m.slice(s![f, t, .., ..]);
                for r in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..n {
                        acc += mat[[r, c]] * x[c];
                    }
                    out[[f, t, r]] = acc;
                }
            }
        }
        out
    }
}

/// Estimate of source `j`: the mask applied to the mixture bin by bin.
pub fn apply_mask<M: TfMask + ?Sized>(mask: &M, mixture: &Spectrogram, j: usize) -> Result<Spectrogram> {
    if mask.shape() != mixture.shape() {
        return Err(Error::ShapeMismatch(format!(
            "mask shape {:?} vs mixture {:?}",
            mask.shape(),
            mixture.shape()
        )));
    }
    if j >= mask.num_sources() {
        return Err(Error::InvalidParameter(format!(
            "source index {j} out of range for {} sources",
            mask.num_sources()
        )));
    }
    mixture.with_bins(mask.apply_bins(mixture.bins(), j))
}

fn magnitude_power(z: Complex64, exponent: f64) -> f64 {
    if exponent == 2.0 {
        z.norm_sqr()
    } else if exponent == 1.0 {
        z.norm()
    } else {
        z.norm().powf(exponent)
    }
}

pub(crate) fn ibm_values(sources: &[ArrayView3<'_, Complex64>], order: u32) -> Array4<f64> {
    let (f_len, t_len, i_len) = sources[0].dim();
    let j_len = sources.len();
    let exponent = f64::from(order);
    let mut out = Array4::zeros((j_len, f_len, t_len, i_len));
    let mut power = vec![0.0; j_len];
    for f in 0..f_len {
        for t in 0..t_len {
            for i in 0..i_len {
                let mut total = 0.0;
                for (p, src) in power.iter_mut().zip(sources) {
                    *p = magnitude_power(src[[f, t, i]], exponent);
                    total += *p;
                }
                if total > 0.0 {
                    let half = 0.5 * total;
                    for (j, &p) in power.iter().enumerate() {
                        if p >= half {
                            out[[j, f, t, i]] = 1.0;
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn irm_values(sources: &[ArrayView3<'_, Complex64>], alpha: f64) -> Array4<f64> {
    let (f_len, t_len, i_len) = sources[0].dim();
    let j_len = sources.len();
    let uniform = 1.0 / j_len as f64;
    let mut out = Array4::zeros((j_len, f_len, t_len, i_len));
    let mut power = vec![0.0; j_len];
    for f in 0..f_len {
        for t in 0..t_len {
            for i in 0..i_len {
                let mut total = 0.0;
                for (p, src) in power.iter_mut().zip(sources) {
                    *p = magnitude_power(src[[f, t, i]], alpha);
                    total += *p;
                }
                for (j, &p) in power.iter().enumerate() {
                    out[[j, f, t, i]] = if total > 0.0 { p / total } else { uniform };
                }
            }
        }
    }
    out
}

/// Ideal binary mask: a source gets gain 1 at `(f, t, i)` when its
/// `|y|^order` is at least half the sum over sources. Ties at exactly half
/// select every tying source; silent bins select none.
pub fn ibm_mask(sources: &SourceImages, order: u32) -> Result<ScalarMask> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidParameter(format!(
            "binary mask order must be 1 or 2, got {order}"
        )));
    }
    Ok(ScalarMask::new(ibm_values(&sources.views(), order)))
}

/// Ideal ratio mask with fractional power `alpha`. Silent bins are shared
/// uniformly (`1/J`) so the masks always sum to one.
pub fn irm_mask(sources: &SourceImages, alpha: f64) -> Result<ScalarMask> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ratio mask exponent must be positive and finite, got {alpha}"
        )));
    }
    Ok(ScalarMask::new(irm_values(&sources.views(), alpha)))
}
