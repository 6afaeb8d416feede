//! Block FFT cross-correlation and multi-input FIR filtering.
//!
//! Both routines walk the signals in fixed-size blocks so memory stays
//! proportional to the FFT size rather than the track length, and both reduce
//! in a fixed order so results do not depend on scheduling.

use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView1};
use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

fn plan(nfft: usize) -> (Arc<dyn RealToComplex<f64>>, Arc<dyn ComplexToReal<f64>>) {
    let mut planner = RealFftPlanner::<f64>::new();
    (planner.plan_fft_forward(nfft), planner.plan_fft_inverse(nfft))
}

/// Copies `x[start..start + dst.len()]` into `dst`, zero outside `x`.
fn fill_block(dst: &mut [f64], x: ArrayView1<'_, f64>, start: isize) {
    let n = x.len() as isize;
    for (k, slot) in dst.iter_mut().enumerate() {
        let idx = start + k as isize;
        *slot = if idx >= 0 && idx < n { x[idx as usize] } else { 0.0 };
    }
}

/// Linear cross-correlations `c_xy(m) = sum_p x[p] y[p + m]` for
/// `|m| <= max_lag`, for every pair of `xs` and `ys`.
///
/// Returns `[xs, ys, 2 * max_lag + 1]`, lag `m` stored at index `m + max_lag`.
/// All signals are taken as zero outside their support.
pub(crate) fn cross_correlations(
    xs: &[ArrayView1<'_, f64>],
    ys: &[ArrayView1<'_, f64>],
    max_lag: usize,
) -> Array3<f64> {
    let lags = 2 * max_lag + 1;
    let nfft = (4 * lags).max(64).next_power_of_two();
    let block = nfft - 2 * max_lag;
    let len = xs
        .iter()
        .chain(ys)
        .map(|s| s.len())
        .max()
        .unwrap_or(0);
    let (fwd, inv) = plan(nfft);
    let bins = nfft / 2 + 1;

    let mut acc = vec![Complex64::new(0.0, 0.0); xs.len() * ys.len() * bins];
    let mut xf = vec![vec![Complex64::new(0.0, 0.0); bins]; xs.len()];
    let mut yf = vec![vec![Complex64::new(0.0, 0.0); bins]; ys.len()];
    let mut buf = vec![0.0; nfft];
    let mut scratch = fwd.make_scratch_vec();

    let mut start = 0usize;
    while start < len {
        for (x, spec) in xs.iter().zip(xf.iter_mut()) {
            buf.iter_mut().for_each(|v| *v = 0.0);
            fill_block(&mut buf[..block], *x, start as isize);
            fwd.process_with_scratch(&mut buf, spec, &mut scratch)
                .expect("planned sizes");
        }
        for (y, spec) in ys.iter().zip(yf.iter_mut()) {
            fill_block(&mut buf, *y, start as isize - max_lag as isize);
            fwd.process_with_scratch(&mut buf, spec, &mut scratch)
                .expect("planned sizes");
        }
        for (a, xa) in xf.iter().enumerate() {
            for (b, yb) in yf.iter().enumerate() {
                let off = (a * ys.len() + b) * bins;
                for ((o, &p), &q) in acc[off..off + bins].iter_mut().zip(xa).zip(yb) {
                    *o += p.conj() * q;
                }
            }
        }
        start += block;
    }

    let mut out = Array3::zeros((xs.len(), ys.len(), lags));
    let mut spec = inv.make_input_vec();
    let mut time = inv.make_output_vec();
    let mut iscratch = inv.make_scratch_vec();
    let norm = 1.0 / nfft as f64;
    for a in 0..xs.len() {
        for b in 0..ys.len() {
            let off = (a * ys.len() + b) * bins;
            spec.copy_from_slice(&acc[off..off + bins]);
            spec[0].im = 0.0;
            spec[bins - 1].im = 0.0;
            inv.process_with_scratch(&mut spec, &mut time, &mut iscratch)
                .expect("planned sizes");
            for q in 0..lags {
                out[[a, b, q]] = time[q] * norm;
            }
        }
    }
    out
}

/// `out[:, e] = sum_a (inputs[a] * taps[a][e])`, full linear convolution of
/// length `out_len`. Every tap vector has the same length.
pub(crate) fn filter_and_sum(
    inputs: &[ArrayView1<'_, f64>],
    taps: &[Vec<Vec<f64>>],
    outputs: usize,
    out_len: usize,
) -> Array2<f64> {
    let mut out = Array2::zeros((out_len, outputs));
    let filter_len = taps
        .iter()
        .flat_map(|t| t.iter().map(Vec::len))
        .max()
        .unwrap_or(0);
    if inputs.is_empty() || filter_len == 0 {
        return out;
    }
    let nfft = (4 * filter_len).max(256).next_power_of_two();
    let block = nfft - filter_len + 1;
    let (fwd, inv) = plan(nfft);
    let bins = nfft / 2 + 1;
    let mut buf = vec![0.0; nfft];
    let mut scratch = fwd.make_scratch_vec();

    let mut filt = vec![vec![vec![Complex64::new(0.0, 0.0); bins]; outputs]; inputs.len()];
    for (a, per_out) in taps.iter().enumerate() {
        for (e, h) in per_out.iter().enumerate() {
            buf.iter_mut().for_each(|v| *v = 0.0);
            buf[..h.len()].copy_from_slice(h);
            fwd.process_with_scratch(&mut buf, &mut filt[a][e], &mut scratch)
                .expect("planned sizes");
        }
    }

    let in_len = inputs.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut xf = vec![Complex64::new(0.0, 0.0); bins];
    let mut yf = vec![vec![Complex64::new(0.0, 0.0); bins]; outputs];
    let mut time = inv.make_output_vec();
    let mut iscratch = inv.make_scratch_vec();
    let norm = 1.0 / nfft as f64;
    let mut start = 0usize;
    while start < in_len {
        yf.iter_mut()
            .for_each(|v| v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0)));
        for (a, x) in inputs.iter().enumerate() {
            buf.iter_mut().for_each(|v| *v = 0.0);
            fill_block(&mut buf[..block], *x, start as isize);
            fwd.process_with_scratch(&mut buf, &mut xf, &mut scratch)
                .expect("planned sizes");
            for (e, y) in yf.iter_mut().enumerate() {
                for ((o, &p), &h) in y.iter_mut().zip(&xf).zip(&filt[a][e]) {
                    *o += p * h;
                }
            }
        }
        for (e, y) in yf.iter_mut().enumerate() {
            y[0].im = 0.0;
            y[bins - 1].im = 0.0;
            inv.process_with_scratch(y, &mut time, &mut iscratch)
                .expect("planned sizes");
            let end = (start + nfft).min(out_len);
            for (k, idx) in (start..end).enumerate() {
                out[[idx, e]] += time[k] * norm;
            }
        }
        start += block;
    }
    out
}
