//! Splitting an estimate into target, spatial, interference and artifact parts.

use ndarray::{s, Array2, ArrayView2, Zip};

use super::fftcorr::filter_and_sum;
use super::metrics::{split_sample, Decomposition};
use super::projection::{columns, FilterSegment, ProjectionFilters};
use crate::audio::AudioSignal;
use crate::error::{Error, Result};

pub(crate) fn decomposition_from_projections(
    reference: ArrayView2<'_, f64>,
    p_target: ArrayView2<'_, f64>,
    p_all: ArrayView2<'_, f64>,
    estimate: ArrayView2<'_, f64>,
) -> Decomposition {
    let dim = estimate.dim();
    let mut d = Decomposition {
        target: Array2::zeros(dim),
        spatial: Array2::zeros(dim),
        interference: Array2::zeros(dim),
        artifacts: Array2::zeros(dim),
    };
    Zip::from(&mut d.target)
        .and(&mut d.spatial)
        .and(reference)
        .and(p_target)
        .for_each(|t, sp, &y, &pj| {
            let (target, spatial, _, _) = split_sample(y, pj, pj, y);
            *t = target;
            *sp = spatial;
        });
    Zip::from(&mut d.interference)
        .and(&mut d.artifacts)
        .and(reference)
        .and(p_target)
        .and(p_all)
        .and(estimate)
        .for_each(|i, a, &y, &pj, &pa, &e| {
            let (_, _, interf, artif) = split_sample(y, pj, pa, e);
            *i = interf;
            *a = artif;
        });
    d
}

fn check_segment(
    segment: &FilterSegment,
    references: &[AudioSignal],
    estimate: &AudioSignal,
    target: usize,
) -> Result<()> {
    let (j_len, i_ref, i_est, _) = segment.joint_taps().dim();
    let len = estimate.num_samples();
    let consistent = j_len == references.len()
        && target < j_len
        && references
            .iter()
            .all(|r| r.num_channels() == i_ref && r.num_samples() == len)
        && estimate.num_channels() == i_est
        && i_ref == i_est
        && segment.start + segment.len <= len;
    if consistent {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "filters for {j_len} references of {i_ref} channels (segment {}..{}) do not fit the \
             signals or target {target}",
            segment.start,
            segment.start + segment.len
        )))
    }
}

fn decompose_segment(
    estimate: &AudioSignal,
    references: &[AudioSignal],
    target: usize,
    segment: &FilterSegment,
) -> Result<Decomposition> {
    check_segment(segment, references, estimate, target)?;
    let (start, len) = (segment.start, segment.len);
    let joint = segment.joint_taps();
    let (j_len, i_ref, i_est, _) = joint.dim();

    let all_inputs: Vec<_> = references.iter().flat_map(|r| columns(r, start, len)).collect();
    let joint_taps: Vec<Vec<Vec<f64>>> = (0..j_len * i_ref)
        .map(|a| {
            (0..i_est)
                .map(|e| joint.slice(s![a / i_ref, a % i_ref, e, ..]).to_vec())
                .collect()
        })
        .collect();
    let p_all = filter_and_sum(&all_inputs, &joint_taps, i_est, len);

    let tj = segment.target_taps(target);
    let target_taps: Vec<Vec<Vec<f64>>> = (0..i_ref)
        .map(|i| (0..i_est).map(|e| tj.slice(s![i, e, ..]).to_vec()).collect())
        .collect();
    let p_target = filter_and_sum(&columns(&references[target], start, len), &target_taps, i_est, len);

    let sl = s![start..start + len, ..];
    Ok(decomposition_from_projections(
        references[target].samples().slice(sl),
        p_target.view(),
        p_all.view(),
        estimate.samples().slice(sl),
    ))
}

/// Decomposition of `estimate` with respect to reference `target_index`
/// under single-segment (global) filters.
pub fn decompose(
    estimate: &AudioSignal,
    references: &[AudioSignal],
    target_index: usize,
    filters: &ProjectionFilters,
) -> Result<Decomposition> {
    match filters.segments() {
        [segment] => decompose_segment(estimate, references, target_index, segment),
        other => Err(Error::InvalidParameter(format!(
            "expected one filter segment, got {}; use decompose_segments",
            other.len()
        ))),
    }
}

/// One decomposition per filter segment, each covering that segment's span.
pub fn decompose_segments(
    estimate: &AudioSignal,
    references: &[AudioSignal],
    target_index: usize,
    filters: &ProjectionFilters,
) -> Result<Vec<Decomposition>> {
    filters
        .segments()
        .iter()
        .map(|seg| decompose_segment(estimate, references, target_index, seg))
        .collect()
}
