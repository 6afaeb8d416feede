#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepeval::dataset::{MIXTURE, STEMS};
use sepeval::wav::{save_wav, BitDepth};
use sepeval::AudioSignal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(n: usize, channels: usize, rate: u32, seed: u64) -> AudioSignal {
    let mut r = rng(seed);
    AudioSignal::new(Array2::from_shape_fn((n, channels), |_| r.gen_range(-0.5..0.5)), rate).unwrap()
}

/// Broadband noise under a slow random envelope, panned differently per channel.
pub fn modulated_noise(n: usize, channels: usize, rate: u32, seed: u64) -> AudioSignal {
    let mut r = rng(seed);
    let segments = 1 + n / (rate as usize / 8).max(1);
    let env: Vec<f64> = (0..=segments).map(|_| r.gen_range(0.0..1.0f64).powi(2)).collect();
    let seg_len = (rate as usize / 8).max(1);
    let gains: Vec<f64> = (0..channels).map(|_| r.gen_range(0.3..1.0)).collect();
    let mut lowpass = vec![0.0; channels];
    let coef = r.gen_range(0.0..0.8);
    AudioSignal::new(
        Array2::from_shape_fn((n, channels), |(t, c)| {
            let k = t / seg_len;
            let frac = (t % seg_len) as f64 / seg_len as f64;
            let e = env[k] * (1.0 - frac) + env[k + 1] * frac;
            let x: f64 = r.gen_range(-1.0..1.0);
            lowpass[c] = coef * lowpass[c] + (1.0 - coef) * x;
            0.5 * e * gains[c] * lowpass[c]
        }),
        rate,
    )
    .unwrap()
}

pub fn sines(n: usize, rate: u32, freqs: &[f64], pan: f64) -> AudioSignal {
    let gains = [1.0 - pan, pan];
    AudioSignal::new(
        Array2::from_shape_fn((n, 2), |(t, c)| {
            let time = t as f64 / rate as f64;
            gains[c] * freqs.iter().map(|f| (2.0 * std::f64::consts::PI * f * time).sin()).sum::<f64>()
                / freqs.len() as f64
        }),
        rate,
    )
    .unwrap()
}

/// Delays every channel by `d` samples (zeros shifted in, tail dropped).
pub fn delayed(x: &AudioSignal, d: usize) -> AudioSignal {
    let s = x.samples();
    AudioSignal::new(
        Array2::from_shape_fn(s.dim(), |(t, c)| if t >= d { s[[t - d, c]] } else { 0.0 }),
        x.sample_rate(),
    )
    .unwrap()
}

pub fn add(a: &AudioSignal, b: &AudioSignal) -> AudioSignal {
    AudioSignal::sum([a, b]).unwrap()
}

/// Rounds to the 16-bit grid so that float32 files hold sums exactly.
pub fn quantized(x: &AudioSignal) -> AudioSignal {
    AudioSignal::new(x.samples().mapv(|v| (v * 32768.0).round() / 32768.0), x.sample_rate()).unwrap()
}

/// Writes `root/<split>/<name>/{mixture,drums,bass,other,vocals}.wav` with the
/// mixture equal to the stem sum; returns the track folder.
pub fn write_track(root: &Path, split: &str, name: &str, len: usize, rate: u32, seed: u64) -> PathBuf {
    let dir = root.join(split).join(name);
    std::fs::create_dir_all(&dir).unwrap();
    let stems: Vec<AudioSignal> = (0..STEMS.len())
        .map(|k| quantized(&modulated_noise(len, 2, rate, seed * 10 + k as u64)))
        .collect();
    for (stem, sig) in STEMS.iter().zip(&stems) {
        save_wav(dir.join(format!("{stem}.wav")), sig, BitDepth::Float32).unwrap();
    }
    let mix = AudioSignal::sum(&stems).unwrap();
    save_wav(dir.join(format!("{MIXTURE}.wav")), &mix, BitDepth::Float32).unwrap();
    dir
}

/// One training and one test track.
pub fn write_fixture_corpus(root: &Path, len: usize, rate: u32) -> [String; 2] {
    let names = ["Alpha Song".to_string(), "Zürich – Étude №2".to_string()];
    write_track(root, "train", &names[0], len, rate, 1);
    write_track(root, "test", &names[1], len, rate, 2);
    names
}

/// Brute-force least squares: builds the matrix of delayed reference channels
/// explicitly and solves the dense normal equations.
pub struct DenseOracle {
    /// `taps[ref_channel][est_channel][lag]`, reference channels source-major.
    pub taps: Vec<Vec<Vec<f64>>>,
}

impl DenseOracle {
    pub fn fit(refs: &[&AudioSignal], est: &AudioSignal, l: usize) -> Self {
        let n = est.num_samples();
        let rows = n + l - 1;
        let chans: Vec<Vec<f64>> = refs
            .iter()
            .flat_map(|r| (0..r.num_channels()).map(move |c| r.channel(c).to_vec()))
            .collect();
        let cols = chans.len() * l;
        let a = DMatrix::from_fn(rows, cols, |row, col| {
            let (ch, k) = (col / l, col % l);
            if row >= k && row - k < n {
                chans[ch][row - k]
            } else {
                0.0
            }
        });
        let ata = a.transpose() * &a;
        let mut taps = vec![vec![vec![0.0; l]; est.num_channels()]; chans.len()];
        for e in 0..est.num_channels() {
            let b = DVector::from_fn(rows, |row, _| if row < n { est.samples()[[row, e]] } else { 0.0 });
            let atb = a.transpose() * b;
            let x = ata.clone().cholesky().expect("positive definite").solve(&atb);
            for col in 0..cols {
                taps[col / l][e][col % l] = x[col];
            }
        }
        DenseOracle { taps }
    }

    /// Direct convolution of the references with the fitted taps, first `len` samples.
    pub fn project(&self, refs: &[&AudioSignal], len: usize) -> Array2<f64> {
        let chans: Vec<Vec<f64>> = refs
            .iter()
            .flat_map(|r| (0..r.num_channels()).map(move |c| r.channel(c).to_vec()))
            .collect();
        let outputs = self.taps[0].len();
        Array2::from_shape_fn((len, outputs), |(t, e)| {
            let mut acc = 0.0;
            for (ch, x) in chans.iter().enumerate() {
                for (k, &h) in self.taps[ch][e].iter().enumerate() {
                    if t >= k && t - k < x.len() {
                        acc += h * x[t - k];
                    }
                }
            }
            acc
        })
    }
}

fn db(num: f64, den: f64, floor: f64) -> f64 {
    let num = if num <= floor { 0.0 } else { num };
    let den = if den <= floor { 0.0 } else { den };
    match (num > 0.0, den > 0.0) {
        (true, true) => 10.0 * (num / den).log10(),
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => f64::NAN,
    }
}

/// `[SDR, ISR, SIR, SAR]` per window from dense projections, straight from
/// the metric definitions.
pub fn dense_scores(
    refs: &[AudioSignal],
    est: &AudioSignal,
    target: usize,
    l: usize,
    window: usize,
    hop: usize,
) -> Vec<[f64; 4]> {
    let all: Vec<&AudioSignal> = refs.iter().collect();
    let n = est.num_samples();
    let p_all = DenseOracle::fit(&all, est, l).project(&all, n);
    let p_target = DenseOracle::fit(&[&refs[target]], est, l).project(&[&refs[target]], n);
    let y = refs[target].samples();
    let e = est.samples();
    let mut out = Vec::new();
    let mut start = 0;
    while start + window <= n {
        let mut en = [0.0f64; 8];
        for t in start..start + window {
            for c in 0..est.num_channels() {
                let s = y[[t, c]];
                let spat = p_target[[t, c]] - s;
                let interf = p_all[[t, c]] - p_target[[t, c]];
                let artif = e[[t, c]] - p_all[[t, c]];
                en[0] += s * s;
                en[1] += (spat + interf + artif).powi(2);
                en[2] += spat * spat;
                en[3] += (s + spat).powi(2);
                en[4] += interf * interf;
                en[5] += (s + spat + interf).powi(2);
                en[6] += artif * artif;
                en[7] += e[[t, c]] * e[[t, c]];
            }
        }
        let floor = 1e-20 * (en[0] + en[7]);
        out.push(if en[0] == 0.0 {
            [f64::NAN; 4]
        } else {
            [db(en[0], en[1], floor), db(en[0], en[2], floor), db(en[3], en[4], floor), db(en[5], en[6], floor)]
        });
        start += hop;
    }
    out
}
