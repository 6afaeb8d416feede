//! Multichannel Wiener filter under the local Gaussian model.
//!
//! Each source image is modelled as `y_j(f,t) ~ N(0, v_j(f,t) R_j(f))`. The
//! oracle parameters come from alternating updates on the true images:
//!
//! ```text
//! v_j(f,t) <- ||y_j(f,t)||^2 / I                       (initialisation)
//! R_j(f)   <- sum_t y_j y_j^H / sum_t v_j(f,t)
//! v_j(f,t) <- tr(R_j(f)^+ y_j y_j^H) / I
//! ```
//!
//! after which `R_j` is trace-normalised to `tr R_j = I` and the scale folded
//! into `v_j`. The `R_j` update only needs `S_j(f) = sum_t y_j y_j^H` and
//! `sum_t v_j(f,t) = tr(R_j^+ S_j) / I`, so the iteration runs on the
//! per-frequency statistics and the per-frame PSD is evaluated on demand.

use ndarray::{s, Array3, Array4, Array5, ArrayView3, ArrayView4, Axis};
use realfft::num_complex::Complex64;

use super::hermitian::{hermitian_pinv, hpd_inverse, matmul, quadratic_form, trace};
use super::masks::{MatrixMask, SourceImages};
use crate::error::{Error, Result};

pub const DEFAULT_MWF_ITERATIONS: usize = 2;
/// Relative diagonal loading of the mixture covariance before inversion.
pub const DEFAULT_MWF_LOADING: f64 = 1e-10;

/// Local Gaussian model parameters for every source.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialModel {
    /// `v_j(f,t) >= 0`, shaped `[sources, bins, frames]`.
    psd: Array3<f64>,
    /// `R_j(f)`, Hermitian PSD with unit-normalised trace, `[sources, bins, I, I]`.
    spatial_cov: Array4<Complex64>,
    /// Sources whose images are identically zero.
    degenerate: Vec<bool>,
}

impl SpatialModel {
    pub fn new(psd: Array3<f64>, spatial_cov: Array4<Complex64>) -> Result<Self> {
        let (j, f, _) = psd.dim();
        let (jr, fr, a, b) = spatial_cov.dim();
        if (j, f) != (jr, fr) || a != b {
            return Err(Error::ShapeMismatch(format!(
                "psd {:?} incompatible with spatial covariances {:?}",
                psd.dim(),
                spatial_cov.dim()
            )));
        }
        if psd.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "power spectral densities must be finite and non-negative".into(),
            ));
        }
        for r in (0..j * f).map(|k| spatial_cov.slice(s![k / f, k % f, .., ..])) {
            for p in 0..a {
                for q in 0..a {
                    let d = r[[p, q]] - r[[q, p]].conj();
                    if d.norm() > 1e-10 * (1.0 + r[[p, q]].norm()) {
                        return Err(Error::InvalidParameter(
                            "spatial covariance is not Hermitian".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            degenerate: vec![false; j],
            psd,
            spatial_cov,
        })
    }

    pub fn psd(&self) -> ArrayView3<'_, f64> {
        self.psd.view()
    }

    pub fn spatial_cov(&self) -> ArrayView4<'_, Complex64> {
        self.spatial_cov.view()
    }

    /// `true` for sources that were all-zero; their `R_j` is the identity and
    /// their PSD is zero.
    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn num_sources(&self) -> usize {
        self.psd.len_of(Axis(0))
    }

    pub fn num_channels(&self) -> usize {
        self.spatial_cov.len_of(Axis(2))
    }

    /// `C_j(f,t) = v_j(f,t) R_j(f)`, row-major.
    pub fn source_covariance(&self, j: usize, f: usize, t: usize) -> Vec<Complex64> {
        let v = self.psd[[j, f, t]];
        self.spatial_cov
            .slice(s![j, f, .., ..])
            .iter()
            .map(|&r| r * v)
            .collect()
    }
}

/// Second-order statistics `S_j(f) = sum_t y_j(f,t) y_j(f,t)^H`, `[J, F, I, I]`.
#[derive(Clone, Debug)]
pub(crate) struct CovarianceAccumulator {
    sums: Array4<Complex64>,
}

impl CovarianceAccumulator {
    pub(crate) fn new(sources: usize, bins: usize, channels: usize) -> Self {
        Self {
            sums: Array4::zeros((sources, bins, channels, channels)),
        }
    }

    pub(crate) fn add(&mut self, j: usize, image: ArrayView3<'_, Complex64>) {
        let (f_len, t_len, n) = image.dim();
        for f in 0..f_len {
            let mut acc = self.sums.slice_mut(s![j, f, .., ..]);
            for t in 0..t_len {
                let y = image.slice(s![f, t, ..]);
                for p in 0..n {
                    for q in 0..n {
                        acc[[p, q]] += y[p] * y[q].conj();
                    }
                }
            }
        }
    }

    pub(crate) fn fit(&self, iterations: usize) -> SpatialFit {
        let (j_len, f_len, n, _) = self.sums.dim();
        let mut fits = Vec::with_capacity(j_len * f_len);
        let mut degenerate = vec![true; j_len];
        for j in 0..j_len {
            for f in 0..f_len {
                let stats: Vec<Complex64> = self.sums.slice(s![j, f, .., ..]).iter().cloned().collect();
                let fit = BinFit::estimate(&stats, n, iterations);
                if fit.is_some() {
                    degenerate[j] = false;
                }
                fits.push(fit);
            }
        }
        SpatialFit {
            fits,
            bins: f_len,
            channels: n,
            degenerate,
        }
    }
}

/// Per-`(j, f)` outcome of the alternating estimation.
#[derive(Clone, Debug)]
pub(crate) struct BinFit {
    /// Trace-normalised spatial covariance.
    spatial: Vec<Complex64>,
    /// Multiplier applied to the per-frame PSD formula.
    scale: f64,
    /// `R^+` of the last iteration, or `None` when no iteration ran and the
    /// PSD is the mean channel power.
    pinv: Option<Vec<Complex64>>,
}

impl BinFit {
    fn estimate(stats: &[Complex64], n: usize, iterations: usize) -> Option<Self> {
        let tr = trace(stats, n);
        if !(tr > 0.0) {
            return None;
        }
        let inv_n = 1.0 / n as f64;
        let mut psd_sum = tr * inv_n;
        let mut pinv = None;
        for _ in 0..iterations {
            let r: Vec<Complex64> = stats.iter().map(|&s| s / psd_sum).collect();
            let p = hermitian_pinv(&r, n);
            let mut prod = vec![Complex64::new(0.0, 0.0); n * n];
            matmul(&p, stats, n, &mut prod);
            psd_sum = trace(&prod, n) * inv_n;
            pinv = Some(p);
            if !(psd_sum > 0.0) {
                return None;
            }
        }
        // Final R update, then move its trace into the PSD.
        let scale = tr / psd_sum * inv_n;
        let spatial = stats.iter().map(|&s| s / (psd_sum * scale)).collect();
        Some(Self {
            spatial,
            scale,
            pinv,
        })
    }

    fn psd(&self, y: &[Complex64]) -> f64 {
        let n = y.len() as f64;
        let raw = match &self.pinv {
            None => y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n,
            Some(p) => quadratic_form(p, y) / n,
        };
        (raw * self.scale).max(0.0)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct SpatialFit {
    fits: Vec<Option<BinFit>>,
    bins: usize,
    channels: usize,
    degenerate: Vec<bool>,
}

impl SpatialFit {
    /// Model restricted to the frames in `images` (one view per source).
    pub(crate) fn model(&self, images: &[ArrayView3<'_, Complex64>]) -> SpatialModel {
        let j_len = images.len();
        let (f_len, t_len, n) = images[0].dim();
        debug_assert_eq!((f_len, n), (self.bins, self.channels));
        let mut psd = Array3::zeros((j_len, f_len, t_len));
        let mut spatial_cov = Array4::zeros((j_len, f_len, n, n));
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (j, img) in images.iter().enumerate() {
            for f in 0..f_len {
                let mut r = spatial_cov.slice_mut(s![j, f, .., ..]);
                match &self.fits[j * f_len + f] {
                    Some(fit) => {
                        r.iter_mut().zip(&fit.spatial).for_each(|(o, &v)| *o = v);
                        for t in 0..t_len {
                            y.iter_mut()
                                .zip(img.slice(s![f, t, ..]))
                                .for_each(|(o, &v)| *o = v);
                            psd[[j, f, t]] = fit.psd(&y);
                        }
                    }
                    None => {
                        for p in 0..n {
                            r[[p, p]] = Complex64::new(1.0, 0.0);
                        }
                    }
                }
            }
        }
        SpatialModel {
            psd,
            spatial_cov,
            degenerate: self.degenerate.clone(),
        }
    }
}

/// Oracle local Gaussian model from the true source images.
///
/// All-zero sources are not an error: they get `R_j = I`, `v_j = 0` and are
/// listed in [`SpatialModel::degenerate`].
pub fn estimate_mwf_model(sources: &SourceImages, iterations: usize) -> Result<SpatialModel> {
    let (f_len, t_len, n) = sources.shape();
    if n == 0 || t_len == 0 {
        return Err(Error::InvalidParameter(
            "spatial model needs at least one channel and one frame".into(),
        ));
    }
    let views = sources.views();
    let mut acc = CovarianceAccumulator::new(views.len(), f_len, n);
    for (j, v) in views.iter().enumerate() {
        acc.add(j, v.view());
    }
    let fit = acc.fit(iterations);
    for (label, &deg) in sources.labels().iter().zip(&fit.degenerate) {
        if deg {
            log::warn!("source '{label}' is silent; using identity spatial covariance");
        }
    }
    Ok(fit.model(&views))
}

pub fn mwf_mask(model: &SpatialModel) -> MatrixMask {
    mwf_mask_with_loading(model, DEFAULT_MWF_LOADING)
}

/// `M_j = C_j (C_x + eps I)^-1` with `eps = loading * max(1, tr(C_x) / I)`.
///
/// With `loading = 0` the exact inverse is used; bins where `C_x` is singular
/// fall back to its pseudo-inverse.
pub fn mwf_mask_with_loading(model: &SpatialModel, loading: f64) -> MatrixMask {
    let (j_len, f_len, t_len) = model.psd.dim();
    let n = model.num_channels();
    let mut values = Array5::zeros((j_len, f_len, t_len, n, n));
    let mut cx = vec![Complex64::new(0.0, 0.0); n * n];
    let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
    let mut cj = vec![Complex64::new(0.0, 0.0); n * n];
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for f in 0..f_len {
        for t in 0..t_len {
            cx.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for j in 0..j_len {
                let v = model.psd[[j, f, t]];
                let r = model.spatial_cov.slice(s![j, f, .., ..]);
                cx.iter_mut().zip(r.iter()).for_each(|(o, &rv)| *o += rv * v);
            }
            let eps = loading * (trace(&cx, n) / n as f64).max(1.0);
            for p in 0..n {
                cx[p * n + p] += eps;
            }
            if !hpd_inverse(&cx, n, &mut inv) {
                inv = hermitian_pinv(&cx, n);
            }
            for j in 0..j_len {
                let v = model.psd[[j, f, t]];
                let r = model.spatial_cov.slice(s![j, f, .., ..]);
                cj.iter_mut().zip(r.iter()).for_each(|(o, &rv)| *o = rv * v);
                matmul(&cj, &inv, n, &mut m);
                values
                    .slice_mut(s![j, f, t, .., ..])
                    .iter_mut()
                    .zip(&m)
                    .for_each(|(o, &z)| *o = z);
            }
        }
    }
    MatrixMask::new(values).expect("square by construction")
}
