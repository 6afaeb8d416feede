mod common;

use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;
use sepeval::bss::{FrameScores, Metric, Score};
use sepeval::campaign::{
    aggregate, evaluate_track, finite_median, pairwise_significance, read_report, run_parallel, write_report,
    EvalConfig, TrackScore,
};
use sepeval::dataset::{load_track, scan_corpus, ACCOMPANIMENT, MIXTURE, STEMS};
use sepeval::wav::{save_wav, BitDepth};
use sepeval::{AudioSignal, Error};

use common::*;

const RATE: u32 = 8000;

fn config(filter_len: usize) -> EvalConfig {
    EvalConfig {
        filter_len,
        ..EvalConfig::default()
    }
}

fn copy_estimates(dir: &Path, signals: &[(&str, &AudioSignal)]) {
    std::fs::create_dir_all(dir).unwrap();
    for (name, sig) in signals {
        save_wav(dir.join(format!("{name}.wav")), sig, BitDepth::Float32).unwrap();
    }
}

#[test]
fn true_stems_score_infinite_everywhere() {
    let root = tempfile::tempdir().unwrap();
    write_track(root.path(), "test", "Song", 2 * RATE as usize, RATE, 3);
    let corpus = scan_corpus(root.path()).unwrap();
    let track = load_track(&corpus.tracks[0]).unwrap();
    let est = root.path().join("est");
    let stems: Vec<(&str, &AudioSignal)> = track.stems.iter().map(|(n, s)| (n.as_str(), s)).collect();
    copy_estimates(&est, &stems);

    let score = evaluate_track(&corpus.tracks[0], &est, "oracle", &config(64)).unwrap();
    assert_eq!(score.targets.len(), 5);
    assert!(score.targets.contains_key(ACCOMPANIMENT));
    for (target, frames) in &score.targets {
        assert_eq!(frames.len(), 2, "{target}");
        for f in frames {
            assert!(Metric::ALL.iter().all(|m| f.get(*m) == Score::PosInf), "{target}: {f:?}");
        }
    }
}

#[test]
fn mixture_anchor_matches_dense_oracle() {
    let root = tempfile::tempdir().unwrap();
    write_track(root.path(), "test", "Anchor", 2 * RATE as usize, RATE, 4);
    let corpus = scan_corpus(root.path()).unwrap();
    let track = load_track(&corpus.tracks[0]).unwrap();
    let est = root.path().join("MIX");
    copy_estimates(&est, &STEMS.map(|s| (s, &track.mixture)));

    let l = 8;
    let score = evaluate_track(&corpus.tracks[0], &est, "MIX", &config(l)).unwrap();
    let refs = track.sources();
    for (j, stem) in STEMS.iter().enumerate() {
        let want = dense_scores(&refs, &track.mixture, j, l, RATE as usize, RATE as usize);
        let got = &score.targets[*stem];
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!(g.sdr.is_finite() && g.sdr.as_f64() < 5.0, "{stem}: {:?}", g.sdr);
            for (m, x) in Metric::ALL.iter().zip(w) {
                let v = g.get(*m).as_f64();
                assert!(v == *x || (v - x).abs() < 1e-8, "{stem} {m}: {v} vs {x}");
            }
        }
    }
}

#[test]
fn missing_estimates() {
    let root = tempfile::tempdir().unwrap();
    write_track(root.path(), "test", "Gap", RATE as usize, RATE, 5);
    let corpus = scan_corpus(root.path()).unwrap();
    let t = &corpus.tracks[0];
    let track = load_track(t).unwrap();

    let est = root.path().join("partial");
    let without_bass: Vec<(&str, &AudioSignal)> =
        track.stems.iter().filter(|(n, _)| n != "bass").map(|(n, s)| (n.as_str(), s)).collect();
    copy_estimates(&est, &without_bass);
    let score = evaluate_track(t, &est, "partial", &config(16)).unwrap();
    let targets: Vec<&str> = score.targets.keys().map(String::as_str).collect();
    assert_eq!(targets, ["drums", "other", "vocals"]);
    assert!(score.targets["vocals"][0].sdr == Score::PosInf);

    assert!(matches!(evaluate_track(t, root.path().join("nowhere"), "x", &config(16)), Err(Error::MissingFile(_))));
    let empty = root.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert!(matches!(evaluate_track(t, &empty, "x", &config(16)), Err(Error::MissingFile(_))));

    let bad = root.path().join("bad");
    copy_estimates(&bad, &[("vocals", &noise(RATE as usize - 1, 2, RATE, 1))]);
    assert!(matches!(evaluate_track(t, &bad, "x", &config(16)), Err(Error::LengthMismatch(_))));
}

#[test]
fn reports_round_trip_through_files() {
    let root = tempfile::tempdir().unwrap();
    write_track(root.path(), "train", "R", 2 * RATE as usize, RATE, 6);
    let corpus = scan_corpus(root.path()).unwrap();
    let track = load_track(&corpus.tracks[0]).unwrap();
    let est = root.path().join("noisy");
    let noisy: Vec<AudioSignal> = track
        .stems
        .iter()
        .enumerate()
        .map(|(k, (_, s))| add(s, &noise(s.num_samples(), 2, RATE, 50 + k as u64).scaled(0.05)))
        .collect();
    copy_estimates(&est, &STEMS.iter().copied().zip(noisy.iter()).collect::<Vec<_>>());
    let score = evaluate_track(&corpus.tracks[0], &est, "noisy", &config(32)).unwrap();

    let path = root.path().join("reports").join("noisy").join("R.json");
    write_report(std::slice::from_ref(&score), &path).unwrap();
    assert_eq!(read_report(&path).unwrap(), vec![score]);
}

#[test]
fn aggregate_of_one_report_is_its_medians() {
    let mut s = TrackScore::new("t", "m", RATE);
    let frames: Vec<FrameScores> = [1.0, f64::INFINITY, 3.0, 7.0]
        .iter()
        .enumerate()
        .map(|(w, &v)| {
            let score = if v.is_finite() { Score::Finite(v) } else { Score::PosInf };
            FrameScores {
                window_start: w * 100,
                window_len: 100,
                sdr: score,
                isr: score,
                sir: score,
                sar: score,
            }
        })
        .collect();
    s.targets.insert("vocals".into(), frames);
    let table = aggregate(&[s]);
    for m in Metric::ALL {
        assert_eq!(table.track_median("m", "vocals", m, "t"), Some(3.0));
        assert_eq!(table.campaign_median("m", "vocals", m), Some(3.0));
    }
    let csv = table.to_csv().unwrap();
    assert!(csv.lines().next().unwrap().contains("track"));
}

#[test]
fn parallel_evaluation_is_order_preserving_and_deterministic() {
    let root = tempfile::tempdir().unwrap();
    for k in 0..4 {
        let dir = write_track(root.path(), "test", &format!("t{k}"), RATE as usize, RATE, 10 + k);
        let est = root.path().join("est").join(format!("t{k}"));
        std::fs::create_dir_all(&est).unwrap();
        for stem in STEMS {
            std::fs::copy(dir.join(format!("{MIXTURE}.wav")), est.join(format!("{stem}.wav"))).unwrap();
        }
    }
    let corpus = scan_corpus(root.path()).unwrap();
    let run = |workers| {
        run_parallel(&corpus.tracks, workers, |t| {
            evaluate_track(t, root.path().join("est").join(&t.name), "MIX", &config(16)).unwrap()
        })
    };
    let serial = run(1);
    assert_eq!(serial.iter().map(|s| s.track.as_str()).collect::<Vec<_>>(), ["t0", "t1", "t2", "t3"]);
    assert_eq!(run(4), serial);
}

fn medians(rows: &[(&str, Vec<f64>)]) -> BTreeMap<String, BTreeMap<String, f64>> {
    rows.iter()
        .map(|(m, v)| (m.to_string(), v.iter().enumerate().map(|(t, &x)| (format!("track {t:02}"), x)).collect()))
        .collect()
}

#[test]
fn dominating_method_is_significant() {
    let mut r = rng(1);
    use rand::Rng;
    let a: Vec<f64> = (0..20).map(|_| r.gen_range(-2.0..12.0)).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
    let c: Vec<f64> = a.iter().map(|x| x + r.gen_range(-3.0..3.0)).collect();
    let mat = pairwise_significance(&medians(&[("A", a.clone()), ("B", b), ("C", c)]), Metric::Sdr, "vocals").unwrap();
    assert!(mat.p_value("A", "B").unwrap() < 0.01);
    assert_eq!(mat.tracks.len(), 20);

    let same = pairwise_significance(&medians(&[("A", a.clone()), ("A2", a)]), Metric::Sdr, "vocals").unwrap();
    assert!((same.p_value("A", "A2").unwrap() - 1.0).abs() < 1e-12);
    assert!(same.to_json().unwrap().contains("\"p_values\""));
}

#[test]
fn median_helper() {
    assert_eq!(finite_median([1.0, 3.0, 5.0]), Some(3.0));
    assert_eq!(finite_median([1.0, f64::INFINITY, 3.0]), Some(2.0));
    assert_eq!(finite_median([f64::NAN]), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn significance_is_rank_based(
        scores in proptest::collection::vec(proptest::collection::vec(-20.0f64..20.0, 8), 3..6)
    ) {
        let rows: Vec<(String, Vec<f64>)> =
            scores.iter().enumerate().map(|(k, v)| (format!("m{k}"), v.clone())).collect();
        let refs: Vec<(&str, Vec<f64>)> = rows.iter().map(|(m, v)| (m.as_str(), v.clone())).collect();
        let cubed: Vec<(&str, Vec<f64>)> =
            rows.iter().map(|(m, v)| (m.as_str(), v.iter().map(|x| x.powi(3)).collect())).collect();
        let a = pairwise_significance(&medians(&refs), Metric::Sir, "bass").unwrap();
        let b = pairwise_significance(&medians(&cubed), Metric::Sir, "bass").unwrap();
        prop_assert_eq!(&a.p_values, &b.p_values);
        let k = a.methods.len();
        for i in 0..k {
            prop_assert_eq!(a.p_values[i][i], Some(1.0));
            for j in 0..k {
                prop_assert_eq!(a.p_values[i][j], a.p_values[j][i]);
                let p = a.p_values[i][j].unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
