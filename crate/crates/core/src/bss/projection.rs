//! Least-squares distortion filters from delayed references to an estimate.
//!
//! For every estimate channel `e` the filters minimise
//! `|| est_e - sum_a h_{a,e} * ref_a ||^2` over the full convolution support,
//! i.e. the estimate is zero-padded by `L - 1` samples. The normal equations
//! have the block-Toeplitz Gram matrix `G[(a,k),(b,l)] = c_ab(k - l)` and the
//! right-hand side `D[(a,k),e] = c_{a,e}(k)`, both read off FFT correlations.

use faer::Mat;
use ndarray::{s, Array2, Array3, Array4, ArrayView1, ArrayView3, ArrayView4};

use super::fftcorr::{cross_correlations, filter_and_sum};
use super::gram::GramSolver;
use crate::audio::AudioSignal;
use crate::error::{Error, Result};

/// Whether one filter set covers the whole track or each window gets its own.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterMode {
    Global,
    Windowed,
}

/// Filters fitted on one span of the signals.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSegment {
    pub start: usize,
    pub len: usize,
    joint: Array4<f64>,
    targets: Vec<Array3<f64>>,
}

impl FilterSegment {
    /// Filters over all references jointly, `[J, I_ref, I_est, L]`.
    pub fn joint_taps(&self) -> ArrayView4<'_, f64> {
        self.joint.view()
    }

    /// Filters over the channels of reference `j` only, `[I_ref, I_est, L]`.
    pub fn target_taps(&self, j: usize) -> ArrayView3<'_, f64> {
        self.targets[j].view()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionFilters {
    filter_len: usize,
    mode: FilterMode,
    segments: Vec<FilterSegment>,
    rank_deficient: bool,
}

impl ProjectionFilters {
    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    pub fn mode(&self) -> FilterMode {
        self.mode
    }

    pub fn segments(&self) -> &[FilterSegment] {
        &self.segments
    }

    /// True when some Gram matrix was singular and a minimum-norm solution
    /// was used.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }
}

/// Checks shared by every entry point: at least one reference, equal lengths,
/// equal channel counts, and `1 <= L <= len`.
pub(crate) fn check_signals(
    references: &[AudioSignal],
    estimates: &[&AudioSignal],
    filter_len: usize,
) -> Result<(usize, usize)> {
    let first = references
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one reference is required".into()))?;
    let (len, channels) = (first.num_samples(), first.num_channels());
    for (k, sig) in references.iter().map(|r| ("reference", r)).chain(estimates.iter().map(|e| ("estimate", *e))).enumerate() {
        let (kind, sig) = sig;
        if sig.num_samples() != len {
            return Err(Error::LengthMismatch(format!(
                "{kind} #{k} has {} samples, expected {len}",
                sig.num_samples()
            )));
        }
        if sig.num_channels() != channels {
            return Err(Error::ShapeMismatch(format!(
                "{kind} #{k} has {} channels, expected {channels}",
                sig.num_channels()
            )));
        }
    }
    if filter_len == 0 || filter_len > len {
        return Err(Error::InvalidParameter(format!(
            "filter length {filter_len} must be between 1 and the signal length {len}"
        )));
    }
    Ok((len, channels))
}

pub(crate) fn columns<'a>(sig: &'a AudioSignal, start: usize, len: usize) -> Vec<ArrayView1<'a, f64>> {
    (0..sig.num_channels())
        .map(|c| sig.samples().slice_move(s![start..start + len, c]))
        .collect()
}

/// Normal equations of one span, factored once and reused for any number of
/// estimates.
pub(crate) struct SegmentSystem<'a> {
    refs: Vec<ArrayView1<'a, f64>>,
    channels: usize,
    filter_len: usize,
    joint: GramSolver,
    targets: Vec<Option<GramSolver>>,
}

impl<'a> SegmentSystem<'a> {
    /// `refs` holds the channels of every reference, source-major.
    /// Target-scope factorizations are built only where `wanted[j]` is set.
    pub(crate) fn new(
        refs: Vec<ArrayView1<'a, f64>>,
        channels: usize,
        filter_len: usize,
        wanted: &[bool],
    ) -> Self {
        let l = filter_len;
        let nr = refs.len();
        let corr = cross_correlations(&refs, &refs, l - 1);
        let n = nr * l;
        let mut gram = Mat::<f64>::zeros(n, n);
        for a in 0..nr {
            for b in 0..=a {
                for k in 0..l {
                    for m in 0..l {
                        let (r, c) = (a * l + k, b * l + m);
                        if r < c {
                            continue;
                        }
                        let v = corr[[a, b, k + l - 1 - m]];
                        gram[(r, c)] = v;
                        gram[(c, r)] = v;
                    }
                }
            }
        }
        let block = channels * l;
        let targets = wanted
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                w.then(|| {
                    let off = j * block;
                    GramSolver::new(Mat::from_fn(block, block, |r, c| gram[(off + r, off + c)]))
                })
            })
            .collect();
        Self {
            refs,
            channels,
            filter_len,
            joint: GramSolver::new(gram),
            targets,
        }
    }

    pub(crate) fn rank_deficient(&self) -> bool {
        self.joint.rank_deficient() || self.targets.iter().flatten().any(GramSolver::rank_deficient)
    }

    fn rhs(&self, est: &[ArrayView1<'_, f64>]) -> Mat<f64> {
        let l = self.filter_len;
        let corr = cross_correlations(&self.refs, est, l - 1);
        Mat::from_fn(self.refs.len() * l, est.len(), |r, e| corr[[r / l, e, r % l + l - 1]])
    }

    /// Joint and target-scope filters for one estimate, as solution matrices
    /// indexed `[(ref_channel, lag), est_channel]`.
    pub(crate) fn solve(&self, target: usize, est: &[ArrayView1<'_, f64>]) -> (Mat<f64>, Mat<f64>) {
        let d = self.rhs(est);
        let joint = self.joint.solve(&d);
        let block = self.channels * self.filter_len;
        let off = target * block;
        let solver = self.targets[target]
            .as_ref()
            .expect("target system requested at construction");
        let dj = Mat::from_fn(block, est.len(), |r, c| d[(off + r, c)]);
        (joint, solver.solve(&dj))
    }

    /// Sum of filtered references; `first_ref` selects the reference channel
    /// the first solution row block belongs to.
    pub(crate) fn project(&self, solution: &Mat<f64>, first_ref: usize, out_len: usize) -> Array2<f64> {
        let l = self.filter_len;
        let count = solution.nrows() / l;
        let outputs = solution.ncols();
        let taps: Vec<Vec<Vec<f64>>> = (0..count)
            .map(|a| {
                (0..outputs)
                    .map(|e| (0..l).map(|k| solution[(a * l + k, e)]).collect())
                    .collect()
            })
            .collect();
        filter_and_sum(&self.refs[first_ref..first_ref + count], &taps, outputs, out_len)
    }

    /// `P_j(est)` and `P_all(est)` truncated or padded to `out_len` samples.
    pub(crate) fn projections(
        &self,
        target: usize,
        est: &[ArrayView1<'_, f64>],
        out_len: usize,
    ) -> (Array2<f64>, Array2<f64>) {
        let (joint, tj) = self.solve(target, est);
        let p_target = self.project(&tj, target * self.channels, out_len);
        let p_all = self.project(&joint, 0, out_len);
        (p_target, p_all)
    }

    fn segment(&self, start: usize, len: usize, est: &[ArrayView1<'_, f64>], sources: usize) -> FilterSegment {
        let (l, n) = (self.filter_len, self.channels);
        let d = self.rhs(est);
        let joint_sol = self.joint.solve(&d);
        let joint = Array4::from_shape_fn((sources, n, est.len(), l), |(j, i, e, k)| {
            joint_sol[((j * n + i) * l + k, e)]
        });
        let block = n * l;
        let targets = (0..sources)
            .map(|j| {
                let dj = Mat::from_fn(block, est.len(), |r, c| d[(j * block + r, c)]);
                let sol = self.targets[j].as_ref().expect("all targets requested").solve(&dj);
                Array3::from_shape_fn((n, est.len(), l), |(i, e, k)| sol[(i * l + k, e)])
            })
            .collect();
        FilterSegment {
            start,
            len,
            joint,
            targets,
        }
    }
}

pub(crate) fn flatten_refs<'a>(references: &'a [AudioSignal], start: usize, len: usize) -> Vec<ArrayView1<'a, f64>> {
    references.iter().flat_map(|r| columns(r, start, len)).collect()
}

/// Least-squares filters from the references to `estimate`.
///
/// In [`FilterMode::Global`] one segment spans the signals and `window`/`hop`
/// are ignored; in [`FilterMode::Windowed`] each whole window of `window`
/// samples every `hop` samples gets its own fit.
pub fn compute_projection(
    references: &[AudioSignal],
    estimate: &AudioSignal,
    filter_len: usize,
    mode: FilterMode,
    window: usize,
    hop: usize,
) -> Result<ProjectionFilters> {
    let (len, _) = check_signals(references, &[estimate], filter_len)?;
    let spans: Vec<(usize, usize)> = match mode {
        FilterMode::Global => vec![(0, len)],
        FilterMode::Windowed => {
            if window == 0 || hop == 0 {
                return Err(Error::InvalidParameter("window and hop must be positive".into()));
            }
            if window > len {
                return Err(Error::WindowTooLong { window, len });
            }
            if filter_len > window {
                return Err(Error::InvalidParameter(format!(
                    "filter length {filter_len} exceeds the window of {window} samples"
                )));
            }
            (0..super::metrics::num_windows(len, window, hop))
                .map(|w| (w * hop, window))
                .collect()
        }
    };
    let wanted = vec![true; references.len()];
    let mut rank_deficient = false;
    let segments = spans
        .into_iter()
        .map(|(start, seg_len)| {
            let system = SegmentSystem::new(
                flatten_refs(references, start, seg_len),
                estimate.num_channels(),
                filter_len,
                &wanted,
            );
            rank_deficient |= system.rank_deficient();
            system.segment(start, seg_len, &columns(estimate, start, seg_len), references.len())
        })
        .collect();
    Ok(ProjectionFilters {
        filter_len,
        mode,
        segments,
        rank_deficient,
    })
}

/// Filters `references` with a joint tap tensor `[J, I_ref, I_est, L]` and
/// sums, over the full convolution length `len + L - 1`.
pub fn apply_filters(references: &[AudioSignal], taps: ArrayView4<'_, f64>, start: usize, len: usize) -> Array2<f64> {
    let (j_len, i_ref, i_est, l) = taps.dim();
    let inputs: Vec<_> = references[..j_len].iter().flat_map(|r| columns(r, start, len)).collect();
    let nested: Vec<Vec<Vec<f64>>> = (0..j_len * i_ref)
        .map(|a| {
            (0..i_est)
                .map(|e| taps.slice(s![a / i_ref, a % i_ref, e, ..]).to_vec())
                .collect()
        })
        .collect();
    filter_and_sum(&inputs, &nested, i_est, len + l - 1)
}
