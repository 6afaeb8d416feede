//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! verdicts are printed even when everything passes.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ndarray::{s, Array2};
use realfft::num_complex::Complex64;
use rand::Rng;
use sepeval::bss::{
    apply_filters, bss_eval, compute_projection, decompose, BssEvalConfig, EvalMode, FilterMode, FrameScores,
    Metric, Score,
};
use sepeval::campaign::{finite_median, pairwise_significance};
use sepeval::dataset::{load_track, scan_corpus, Split, MIXTURE, STEMS};
use sepeval::oracle::{
    estimate_mwf_model, ibm_mask, irm_mask, mwf_mask_with_loading, oracle_separate, OracleConfig, OracleMethod,
    SourceImages,
};
use sepeval::stft::{stft, StftConfig, WindowKind};
use sepeval::AudioSignal;

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn same_score(a: Score, b: Score, tol: f64) -> bool {
    match (a, b) {
        (Score::Finite(x), Score::Finite(y)) => (x - y).abs() <= tol,
        _ => a == b,
    }
}

fn frame_delta(a: &FrameScores, b: &FrameScores) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for m in Metric::ALL {
        match (a.get(m), b.get(m)) {
            (Score::Finite(x), Score::Finite(y)) => worst = worst.max((x - y).abs()),
            (x, y) if x == y => {}
            _ => return None,
        }
    }
    Some(worst)
}

fn criterion_1() -> Outcome {
    let rate = 44_100;
    let n = 10 * rate as usize;
    let refs: Vec<AudioSignal> = (0..3).map(|j| modulated_noise(n, 2, rate, 100 + j)).collect();
    let estimates: Vec<AudioSignal> = (0..3)
        .map(|j| {
            let leak = delayed(&refs[(j + 1) % 3], 3).scaled(0.3);
            add(&add(&refs[j], &leak), &noise(n, 2, rate, 200 + j as u64).scaled(0.05))
        })
        .collect();
    let start = Instant::now();
    let cfg = |mode| BssEvalConfig {
        filter_len: 512,
        window: n,
        hop: n,
        mode,
    };
    let v4 = bss_eval(&refs, &estimates, &cfg(EvalMode::V4Global)).map_err(|e| e.to_string())?;
    let v3 = bss_eval(&refs, &estimates, &cfg(EvalMode::V3Windowed)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    for (a, b) in v4.iter().flatten().zip(v3.iter().flatten()) {
        worst = worst.max(frame_delta(a, b).ok_or("status mismatch between modes")?);
    }
    check(
        worst <= 1e-10 && elapsed < 10.0 && v4[0].len() == 1,
        format!("max |v3 - v4| = {worst:.3e} dB, {elapsed:.2} s"),
    )
}

fn criterion_2() -> Outcome {
    let mut r = rng(7);
    let start = Instant::now();
    let (mut worst_tap, mut worst_db) = (0.0f64, 0.0f64);
    let instances = 120;
    for inst in 0..instances {
        let n = r.gen_range(96..=256usize);
        let i = r.gen_range(1..=2usize);
        let j_len = r.gen_range(1..=3usize);
        let l = r.gen_range(1..=8usize);
        let refs: Vec<AudioSignal> = (0..j_len).map(|j| noise(n, i, 8000, 1000 * inst + j as u64)).collect();
        let mut est = noise(n, i, 8000, 1000 * inst + 999).scaled(r.gen_range(0.05..0.5));
        for (j, y) in refs.iter().enumerate() {
            est = add(&est, &delayed(y, r.gen_range(0..l)).scaled(r.gen_range(-1.0..1.0) + j as f64 * 0.1));
        }

        let filters = compute_projection(&refs, &est, l, FilterMode::Global, n, n).map_err(|e| e.to_string())?;
        let seg = &filters.segments()[0];
        let all: Vec<&AudioSignal> = refs.iter().collect();
        let joint = DenseOracle::fit(&all, &est, l);
        let taps = seg.joint_taps();
        for a in 0..j_len * i {
            for e in 0..i {
                for k in 0..l {
                    let want = joint.taps[a][e][k];
                    let d = (taps[[a / i, a % i, e, k]] - want).abs() / want.abs().max(1.0);
                    worst_tap = worst_tap.max(d);
                }
            }
        }
        for j in 0..j_len {
            let own = DenseOracle::fit(&[&refs[j]], &est, l);
            let tt = seg.target_taps(j);
            for c in 0..i {
                for e in 0..i {
                    for k in 0..l {
                        let want = own.taps[c][e][k];
                        worst_tap = worst_tap.max((tt[[c, e, k]] - want).abs() / want.abs().max(1.0));
                    }
                }
            }
        }

        let window = r.gen_range(l.max(16)..=n);
        let hop = r.gen_range(window / 2..=window).max(1);
        let cfg = BssEvalConfig {
            filter_len: l,
            window,
            hop,
            mode: EvalMode::V4Global,
        };
        let target = r.gen_range(0..j_len);
        let got = sepeval::bss::evaluate_pairs(&refs, &[(target, &est)], &cfg).map_err(|e| e.to_string())?;
        let want = dense_scores(&refs, &est, target, l, window, hop);
        if got[0].len() != want.len() {
            return Err(format!("instance {inst}: {} windows vs {}", got[0].len(), want.len()));
        }
        for (g, w) in got[0].iter().zip(&want) {
            for (m, &x) in Metric::ALL.iter().zip(w) {
                match g.get(*m) {
                    Score::Finite(v) if x.is_finite() => worst_db = worst_db.max((v - x).abs()),
                    s if s.as_f64().is_nan() && x.is_nan() => {}
                    s if s.as_f64() == x => {}
                    s => return Err(format!("instance {inst}: {m} is {s:?}, oracle {x}")),
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        worst_tap <= 1e-9 && worst_db <= 1e-8 && elapsed < 60.0,
        format!("{instances} instances, max tap error {worst_tap:.2e}, max metric error {worst_db:.2e} dB, {elapsed:.1} s"),
    )
}

fn fixtures() -> Vec<(&'static str, Vec<AudioSignal>, AudioSignal)> {
    let (n, rate) = (4000, 8000);
    let mut out = Vec::new();

    let refs: Vec<AudioSignal> = (0..3).map(|j| noise(n, 2, rate, 300 + j)).collect();
    let est = add(&refs[0], &add(&delayed(&refs[1], 5).scaled(0.4), &noise(n, 2, rate, 310).scaled(0.1)));
    out.push(("white noise, J=3", refs, est));

    let refs: Vec<AudioSignal> = (0..2).map(|j| modulated_noise(n, 2, rate, 320 + j)).collect();
    let est = add(&delayed(&refs[1], 12), &refs[0].scaled(-0.2));
    out.push(("modulated noise, J=2", refs, est));

    let a = add(&sines(n, rate, &[220.0, 330.0, 1250.0], 0.3), &noise(n, 2, rate, 330).scaled(0.05));
    let b = add(&sines(n, rate, &[97.0, 2000.0], 0.8), &noise(n, 2, rate, 331).scaled(0.05));
    let est = add(&a.scaled(0.9), &noise(n, 2, rate, 332).scaled(0.2));
    out.push(("sines plus noise, J=2", vec![a, b], est));

    let refs: Vec<AudioSignal> = (0..2).map(|j| noise(n, 1, rate, 340 + j)).collect();
    let est = add(&delayed(&refs[0], 40), &refs[1].scaled(0.5));
    out.push(("mono, delay beyond filter", refs, est));
    out
}

fn criterion_3() -> Outcome {
    let l = 32;
    let (mut worst_sum, mut worst_orth) = (0.0f64, 0.0f64);
    for (name, refs, est) in fixtures() {
        let n = est.num_samples();
        let filters = compute_projection(&refs, &est, l, FilterMode::Global, n, n).map_err(|e| e.to_string())?;
        for j in 0..refs.len() {
            let d = decompose(&est, &refs, j, &filters).map_err(|e| format!("{name}: {e}"))?;
            let diff = (&d.estimate() - &est.samples()).mapv(|v| v * v).sum().sqrt();
            worst_sum = worst_sum.max(diff / est.energy().sqrt());
        }

        let seg = &filters.segments()[0];
        let mut checks: Vec<(Array2<f64>, Vec<usize>)> =
            vec![(apply_filters(&refs, seg.joint_taps(), 0, n), (0..refs.len()).collect())];
        for j in 0..refs.len() {
            let tt = seg.target_taps(j);
            let (i_ref, i_est, _) = tt.dim();
            let taps = tt.to_owned().into_shape_with_order((1, i_ref, i_est, l)).unwrap();
            checks.push((apply_filters(&refs[j..=j], taps.view(), 0, n), vec![j]));
        }
        for (proj, sources) in checks {
            let mut resid = -proj;
            resid.slice_mut(s![..n, ..]).scaled_add(1.0, &est.samples());
            for e in 0..est.num_channels() {
                let r = resid.column(e);
                let r_norm = r.dot(&r).sqrt();
                for &j in &sources {
                    for c in 0..refs[j].num_channels() {
                        let y = refs[j].channel(c);
                        let y_norm = y.dot(&y).sqrt();
                        for k in 0..l {
                            let dot: f64 = (0..n).map(|t| y[t] * r[t + k]).sum();
                            worst_orth = worst_orth.max(dot.abs() / (r_norm * y_norm));
                        }
                    }
                }
            }
        }
    }
    check(
        worst_sum <= 1e-12 && worst_orth <= 1e-8,
        format!("identity error {worst_sum:.2e} (relative), orthogonality {worst_orth:.2e} (relative)"),
    )
}

fn criterion_4() -> Outcome {
    let n = 6000;
    let refs: Vec<AudioSignal> = (0..3).map(|j| modulated_noise(n, 2, 8000, 400 + j)).collect();
    let cfg = BssEvalConfig {
        filter_len: 64,
        window: 2000,
        hop: 2000,
        mode: EvalMode::V4Global,
    };
    let mut details = Vec::new();
    let mut ok = true;
    for j in 0..3 {
        let doubled = sepeval::bss::evaluate_pairs(&refs, &[(j, &refs[j].scaled(2.0))], &cfg)
            .map_err(|e| e.to_string())?;
        for f in &doubled[0] {
            ok &= same_score(f.sdr, Score::Finite(0.0), 1e-9)
                && same_score(f.isr, Score::Finite(0.0), 1e-9)
                && f.sir == Score::PosInf
                && f.sar == Score::PosInf;
        }
        let exact = sepeval::bss::evaluate_pairs(&refs, &[(j, &refs[j])], &cfg).map_err(|e| e.to_string())?;
        for f in &exact[0] {
            ok &= Metric::ALL.iter().all(|m| f.get(*m) == Score::PosInf);
        }
        if j == 0 {
            details.push(format!("2y: {:?}/{:?}/{:?}/{:?}", doubled[0][0].sdr, doubled[0][0].isr, doubled[0][0].sir, doubled[0][0].sar));
        }
    }
    check(ok, details.join("; "))
}

fn random_images(j_len: usize, channels: usize, seed: u64) -> Vec<sepeval::stft::Spectrogram> {
    let cfg = StftConfig::new(256, 64, WindowKind::Hann).unwrap();
    (0..j_len)
        .map(|j| stft(&modulated_noise(4000, channels, 8000, seed + j as u64), &cfg).unwrap())
        .collect()
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    let images = SourceImages::unlabeled(random_images(3, 2, 500)).unwrap();
    let scaled = SourceImages::unlabeled(
        images
            .images()
            .iter()
            .map(|s| s.with_bins(s.bins().mapv(|z| z * 7.5)).unwrap())
            .collect(),
    )
    .unwrap();

    // Ratio masks: exact partition of unity within [0, 1].
    let mut irm_sum_err = 0.0f64;
    let mut irm_range = true;
    let mut scale_err = 0.0f64;
    for alpha in [0.5, 1.0, 2.0, 3.3] {
        let m = irm_mask(&images, alpha).unwrap();
        let v = m.values();
        let total = v.sum_axis(ndarray::Axis(0));
        irm_sum_err = irm_sum_err.max(total.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max));
        irm_range &= v.iter().all(|&x| (0.0..=1.0).contains(&x));
        let ms = irm_mask(&scaled, alpha).unwrap();
        scale_err = scale_err.max((&ms.values() - &v).iter().map(|x| x.abs()).fold(0.0, f64::max));
    }
    notes.push(format!("IRM sum err {irm_sum_err:.1e}"));

    let mut binary = true;
    for order in [1, 2] {
        let m = ibm_mask(&images, order).unwrap();
        binary &= m.values().iter().all(|&x| x == 0.0 || x == 1.0);
        binary &= ibm_mask(&scaled, order).unwrap().values() == m.values();
    }

    // Multichannel Wiener: sum of matrices is the identity without loading.
    let model = estimate_mwf_model(&images, 2).unwrap();
    let mask = mwf_mask_with_loading(&model, 0.0);
    let v = mask.values();
    let (_, f_len, t_len, i_len, _) = v.dim();
    let mut mwf_err = 0.0f64;
    for f in 0..f_len {
        for t in 0..t_len {
            for r in 0..i_len {
                for c in 0..i_len {
                    let total: Complex64 = (0..v.dim().0).map(|j| v[[j, f, t, r, c]]).sum();
                    let want = if r == c { 1.0 } else { 0.0 };
                    mwf_err = mwf_err.max((total - want).norm());
                }
            }
        }
    }
    notes.push(format!("MWF sum err {mwf_err:.1e}"));
    let scaled_mask = mwf_mask_with_loading(&estimate_mwf_model(&scaled, 2).unwrap(), 0.0);
    let mwf_scale = (&scaled_mask.values() - &v).iter().map(|z| z.norm()).fold(0.0, f64::max);
    scale_err = scale_err.max(mwf_scale);

    // Single channel: MWF reduces to the power ratio mask.
    let mono = SourceImages::unlabeled(random_images(3, 1, 550)).unwrap();
    let mwf = mwf_mask_with_loading(&estimate_mwf_model(&mono, 2).unwrap(), 0.0);
    let irm2 = irm_mask(&mono, 2.0).unwrap();
    let mw = mwf.values();
    let iv = irm2.values();
    let mut mono_err = 0.0f64;
    for ((j, f, t, _), &g) in iv.indexed_iter() {
        mono_err = mono_err.max((mw[[j, f, t, 0, 0]] - g).norm());
    }
    notes.push(format!("MWF vs IRM2 at I=1 {mono_err:.1e}, scaling {scale_err:.1e}"));

    check(
        irm_sum_err <= 1e-15 && irm_range && binary && mwf_err <= 1e-8 && mono_err <= 1e-10 && scale_err <= 1e-8,
        notes.join(", "),
    )
}

fn criterion_6() -> Outcome {
    let rate = 44_100;
    let n = 5 * rate as usize;
    let sources: Vec<AudioSignal> = (0..3).map(|j| modulated_noise(n, 2, rate, 600 + j)).collect();
    let mixture = AudioSignal::sum(&sources).unwrap();
    let cfg = OracleConfig::default();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for method in [
        OracleMethod::Irm { alpha: 0.5 },
        OracleMethod::IRM1,
        OracleMethod::Irm { alpha: 1.5 },
        OracleMethod::IRM2,
        OracleMethod::MWF,
    ] {
        let est = oracle_separate(&mixture, &sources, method, &cfg).map_err(|e| e.to_string())?;
        let err = AudioSignal::sum(&est).unwrap().max_abs_diff(&mixture).unwrap();
        parts.push(format!("{method} {err:.1e}"));
        worst = worst.max(err);
    }
    check(worst <= 1e-6, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let rate = 16_000;
    let n = 4 * rate as usize;
    let methods = OracleMethod::ALL;
    let mut sar: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let cfg = BssEvalConfig {
        filter_len: 128,
        window: rate as usize,
        hop: rate as usize,
        mode: EvalMode::V4Global,
    };
    for mix in 0..10u64 {
        let sources: Vec<AudioSignal> = (0..2).map(|j| modulated_noise(n, 2, rate, 700 + 10 * mix + j)).collect();
        let mixture = AudioSignal::sum(&sources).unwrap();
        for method in methods {
            let est = oracle_separate(&mixture, &sources, method, &OracleConfig::default()).map_err(|e| e.to_string())?;
            let scores = bss_eval(&sources, &est, &cfg).map_err(|e| e.to_string())?;
            sar.entry(method.name())
                .or_default()
                .extend(scores.iter().flatten().map(|f| f.sar.as_f64()));
        }
    }
    let med: BTreeMap<String, f64> = sar.iter().map(|(k, v)| (k.clone(), finite_median(v.iter().copied()).unwrap_or(f64::NAN))).collect();
    let soft = ["IRM1", "IRM2", "MWF"].iter().map(|m| med[*m]).fold(f64::INFINITY, f64::min);
    let hard = ["IBM1", "IBM2"].iter().map(|m| med[*m]).fold(f64::NEG_INFINITY, f64::max);
    let listing: Vec<String> = med.iter().map(|(k, v)| format!("{k} {v:.2}")).collect();
    check(soft > hard, format!("median SAR dB: {}", listing.join(", ")))
}

fn criterion_8() -> Outcome {
    let rate = 44_100;
    let n = 60 * rate as usize;
    let refs: Vec<AudioSignal> = (0..2).map(|j| modulated_noise(n, 2, rate, 800 + j)).collect();
    let est: Vec<AudioSignal> = (0..2)
        .map(|j| add(&refs[j], &add(&refs[1 - j].scaled(0.2), &noise(n, 2, rate, 810 + j as u64).scaled(0.05))))
        .collect();
    let cfg = |mode| BssEvalConfig {
        filter_len: 256,
        window: rate as usize,
        hop: rate as usize,
        mode,
    };
    let t0 = Instant::now();
    bss_eval(&refs, &est, &cfg(EvalMode::V4Global)).map_err(|e| e.to_string())?;
    let v4 = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    bss_eval(&refs, &est, &cfg(EvalMode::V3Windowed)).map_err(|e| e.to_string())?;
    let v3 = t1.elapsed().as_secs_f64();
    let ratio = v3 / v4;
    check(ratio >= 2.0, format!("v4 {v4:.2} s, v3 {v3:.2} s, speed-up {ratio:.1}x (J=2, L=256)"))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_fixture_corpus(dir.path(), 4000, 8000);
    let corpus = scan_corpus(dir.path()).map_err(|e| e.to_string())?;
    let fixture_ok = corpus.tracks.len() == 2 && corpus.count(Split::Train) == 1 && corpus.count(Split::Test) == 1;
    let mut detail = format!(
        "fixture: {} train / {} test",
        corpus.count(Split::Train),
        corpus.count(Split::Test)
    );
    if !fixture_ok {
        return Err(detail);
    }
    match std::env::var_os("SEPEVAL_MUSDB_ROOT") {
        None => {
            detail.push_str("; full corpus skipped (SEPEVAL_MUSDB_ROOT unset)");
            Ok(detail)
        }
        Some(root) => {
            let corpus = scan_corpus(&root).map_err(|e| e.to_string())?;
            let (train, test) = (corpus.count(Split::Train), corpus.count(Split::Test));
            let mut bad = Vec::new();
            for t in &corpus.tracks {
                match load_track(t) {
                    Ok(track) => {
                        let all = std::iter::once(&track.mixture).chain(track.stems.iter().map(|(_, s)| s));
                        let consistent = track.stems.len() == STEMS.len()
                            && all.into_iter().all(|s| {
                                s.sample_rate() == 44_100
                                    && s.num_channels() == 2
                                    && s.num_samples() == track.mixture.num_samples()
                            });
                        if !consistent {
                            bad.push(t.name.clone());
                        }
                    }
                    Err(e) => bad.push(format!("{}: {e}", t.name)),
                }
            }
            detail.push_str(&format!("; corpus: {train} train / {test} test, {} bad ({MIXTURE} + stems)", bad.len()));
            check(corpus.tracks.len() == 150 && train == 100 && test == 50 && bad.is_empty(), detail)
        }
    }
}

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let tracks: Vec<String> = (0..20).map(|t| format!("track{t:02}")).collect();
    let base: Vec<f64> = tracks.iter().map(|_| r.gen_range(-5.0..15.0)).collect();
    let mut scores: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut put = |m: &str, vals: Vec<f64>| {
        scores.insert(m.to_string(), tracks.iter().cloned().zip(vals).collect());
    };
    put("A", base.clone());
    put("B", base.iter().map(|x| x + 10.0).collect());
    put("A copy", base.clone());
    put("C", base.iter().map(|x| x + r.gen_range(-8.0..8.0)).collect());

    let mat = pairwise_significance(&scores, Metric::Sdr, "vocals").map_err(|e| e.to_string())?;
    let p_ab = mat.p_value("A", "B").ok_or("no A/B cell")?;
    let p_same = mat.p_value("A", "A copy").ok_or("no A/copy cell")?;
    let k = mat.methods.len();
    let symmetric = (0..k).all(|i| (0..k).all(|j| mat.p_values[i][j] == mat.p_values[j][i]));
    let unit_diag = (0..k).all(|i| mat.p_values[i][i] == Some(1.0));

    let transformed: BTreeMap<String, BTreeMap<String, f64>> = scores
        .iter()
        .map(|(m, v)| (m.clone(), v.iter().map(|(t, x)| (t.clone(), (x / 4.0).exp() + x.powi(3))).collect()))
        .collect();
    let mat2 = pairwise_significance(&transformed, Metric::Sdr, "vocals").map_err(|e| e.to_string())?;
    let invariant = mat2.p_values == mat.p_values;

    check(
        p_ab < 0.01 && (p_same - 1.0).abs() < 1e-12 && symmetric && unit_diag && invariant,
        format!("p(A,B) = {p_ab:.2e}, p(A,A') = {p_same}, symmetric {symmetric}, unit diagonal {unit_diag}, monotone-invariant {invariant}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("v3/v4 consistency", criterion_1),
        ("dense least-squares oracle", criterion_2),
        ("decomposition identity and orthogonality", criterion_3),
        ("closed-form metric cases", criterion_4),
        ("mask invariants", criterion_5),
        ("oracle reconstruction", criterion_6),
        ("oracle SAR ordering", criterion_7),
        ("global vs windowed speed", criterion_8),
        ("corpus checks", criterion_9),
        ("significance engine", criterion_10),
    ];
    let only: Option<usize> = std::env::var("SEPEVAL_ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (idx, (name, run)) in criteria.iter().enumerate() {
        let number = idx + 1;
        if only.is_some_and(|o| o != number) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {number:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
