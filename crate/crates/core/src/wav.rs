//! RIFF/WAVE reading and writing.
//!
//! Integer PCM is scaled by `2^-(bits-1)` on read, so int16 `32767` becomes
//! `32767/32768` and `-32768` becomes exactly `-1`. Writing applies the
//! inverse scale, rounds to nearest and saturates at the integer range.
//! IEEE float32 is passed through unscaled.

use std::io::ErrorKind;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ndarray::Array2;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BitDepth {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

impl BitDepth {
    fn spec(self, channels: u16, sample_rate: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            BitDepth::Pcm16 => (16, SampleFormat::Int),
            BitDepth::Pcm24 => (24, SampleFormat::Int),
            BitDepth::Float32 => (32, SampleFormat::Float),
        };
        WavSpec {
            channels,
            sample_rate,
            bits_per_sample,
            sample_format,
        }
    }
}

/// Header-level description of a WAV file, read without decoding samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WavInfo {
    pub channels: usize,
    pub sample_rate: u32,
    pub num_samples: usize,
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == ErrorKind::NotFound => {
            Error::MissingFile(path.to_path_buf())
        }
        hound::Error::IoError(e) if e.kind() == ErrorKind::UnexpectedEof => {
            Error::TruncatedPayload(path.to_path_buf())
        }
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(reason) => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        },
        hound::Error::Unsupported => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: "unsupported WAVE feature".into(),
        },
        other => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

fn open(path: &Path) -> Result<WavReader<std::io::BufReader<std::fs::File>>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) | (SampleFormat::Int, 24) | (SampleFormat::Float, 32) => {}
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_path_buf(),
                reason: format!("{bits}-bit {fmt:?} samples (need PCM16, PCM24 or float32)"),
            })
        }
    }
    if spec.channels == 0 {
        return Err(Error::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }
    Ok(reader)
}

pub fn wav_info(path: impl AsRef<Path>) -> Result<WavInfo> {
    let path = path.as_ref();
    let reader = open(path)?;
    let spec = reader.spec();
    Ok(WavInfo {
        channels: usize::from(spec.channels),
        sample_rate: spec.sample_rate,
        num_samples: reader.duration() as usize,
    })
}

/// Errors while decoding samples: hound reports a short data chunk as an
/// `Other` I/O error, which after a valid header means a truncated payload.
fn map_sample_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if matches!(e.kind(), ErrorKind::UnexpectedEof | ErrorKind::Other) => {
            Error::TruncatedPayload(path.to_path_buf())
        }
        other => map_hound(path, other),
    }
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    let frames = reader.duration() as usize;

    let mut flat = Vec::with_capacity(frames * channels);
    match spec.sample_format {
        SampleFormat::Float => {
            for s in reader.samples::<f32>() {
                flat.push(f64::from(s.map_err(|e| map_sample_error(path, e))?));
            }
        }
        SampleFormat::Int => {
            let scale = 1.0 / f64::from(1u32 << (spec.bits_per_sample - 1));
            for s in reader.samples::<i32>() {
                flat.push(f64::from(s.map_err(|e| map_sample_error(path, e))?) * scale);
            }
        }
    }
    if flat.len() != frames * channels {
        return Err(Error::TruncatedPayload(path.to_path_buf()));
    }
    let samples = Array2::from_shape_vec((frames, channels), flat)
        .map_err(|e| Error::InvalidSignal(e.to_string()))?;
    AudioSignal::new(samples, spec.sample_rate)
}

pub fn save_wav(path: impl AsRef<Path>, signal: &AudioSignal, bit_depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let channels = u16::try_from(signal.num_channels())
        .map_err(|_| Error::InvalidSignal("too many channels for WAV".into()))?;
    let spec = bit_depth.spec(channels, signal.sample_rate());
    let map_write = |e: hound::Error| match e {
        hound::Error::IoError(e) => Error::Io(e),
        other => map_hound(path, other),
    };
    let mut writer = WavWriter::create(path, spec).map_err(map_write)?;
    match bit_depth {
        BitDepth::Float32 => {
            for &v in signal.samples().iter() {
                writer.write_sample(v as f32).map_err(map_write)?;
            }
        }
        BitDepth::Pcm16 | BitDepth::Pcm24 => {
            let full = f64::from(1u32 << (spec.bits_per_sample - 1));
            let (lo, hi) = (-full, full - 1.0);
            for &v in signal.samples().iter() {
                let q = (v * full).round().clamp(lo, hi) as i32;
                writer.write_sample(q).map_err(map_write)?;
            }
        }
    }
    writer.finalize().map_err(map_write)?;
    Ok(())
}
