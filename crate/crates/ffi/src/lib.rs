//! C interface to `sepeval`.
//!
//! Signals and score sets are opaque heap handles released with their
//! `*_free` function. Every fallible call returns a [`SepevalStatus`]; on
//! failure the message is available from [`sepeval_last_error`] on the same
//! thread until the next failing call. Panics are caught at the boundary and
//! reported as `SEPEVAL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sepeval::bss::{bss_eval, BssEvalConfig, EvalMode, FrameScores, Metric, Score, DEFAULT_FILTER_LEN, DEFAULT_WINDOW};
use sepeval::oracle::{oracle_separate, OracleConfig, OracleMethod};
use sepeval::wav::{load_wav, save_wav, BitDepth};
use sepeval::{AudioSignal, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SepevalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    LengthMismatch = 4,
    Io = 5,
    UnsupportedFormat = 6,
    Corpus = 7,
    Report = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SepevalMode {
    V4Global = 0,
    V3Windowed = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SepevalMetric {
    Sdr = 0,
    Isr = 1,
    Sir = 2,
    Sar = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SepevalScoreStatus {
    Finite = 0,
    PosInf = 1,
    NegInf = 2,
    Undefined = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SepevalBitDepth {
    Pcm16 = 0,
    Pcm24 = 1,
    Float32 = 2,
}

/// Metric settings; lengths are in samples.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SepevalEvalConfig {
    pub filter_len: usize,
    pub window: usize,
    pub hop: usize,
    pub mode: SepevalMode,
}

/// One metric value. `value` is the dB score when `status` is finite and
/// NaN otherwise.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SepevalScore {
    pub value: f64,
    pub status: SepevalScoreStatus,
}

/// A multichannel signal.
pub struct SepevalSignal(AudioSignal);

/// Framewise scores, one list per estimate.
pub struct SepevalScores(Vec<Vec<FrameScores>>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SepevalStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::MissingFile(_) | Error::Io(_) => SepevalStatus::Io,
            Error::UnsupportedCodec { .. } | Error::TruncatedPayload(_) => SepevalStatus::UnsupportedFormat,
            Error::ShapeMismatch(_) => SepevalStatus::ShapeMismatch,
            Error::LengthMismatch(_) => SepevalStatus::LengthMismatch,
            Error::Corpus(_) => SepevalStatus::Corpus,
            Error::MalformedReport(_) | Error::SchemaVersion { .. } | Error::Json(_) | Error::Csv(_) => {
                SepevalStatus::Report
            }
            _ => SepevalStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SepevalStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SepevalStatus::InvalidArgument, msg.into())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SepevalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SepevalStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal error: {msg}"));
            SepevalStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn signal_list<'a>(p: *const *const SepevalSignal, n: usize, what: &str) -> Result<Vec<&'a AudioSignal>, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .enumerate()
        .map(|(k, s)| s.as_ref().map(|s| &s.0).ok_or_else(|| null(&format!("{what}[{k}]"))))
        .collect()
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sepeval_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sepeval_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a signal from `frames * channels` interleaved samples.
///
/// # Safety
/// `samples` must point to `frames * channels` readable doubles and `out`
/// to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sepeval_signal_new(
    samples: *const f64,
    frames: usize,
    channels: usize,
    sample_rate: u32,
    out: *mut *mut SepevalSignal,
) -> SepevalStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if samples.is_null() {
            return Err(null("samples"));
        }
        let total = frames.checked_mul(channels).ok_or_else(|| invalid("frames * channels overflows"))?;
        let data = std::slice::from_raw_parts(samples, total);
        let chans: Vec<Vec<f64>> = (0..channels).map(|c| data.iter().skip(c).step_by(channels.max(1)).copied().collect()).collect();
        write_out(out, SepevalSignal(AudioSignal::from_channels(&chans, sample_rate)?));
        Ok(())
    })
}

/// Decodes a WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepeval_signal_load_wav(path: *const c_char, out: *mut *mut SepevalSignal) -> SepevalStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        write_out(out, SepevalSignal(load_wav(path)?));
        Ok(())
    })
}

/// Encodes `signal` as a WAV file.
///
/// # Safety
/// `signal` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sepeval_signal_save_wav(
    signal: *const SepevalSignal,
    path: *const c_char,
    bit_depth: SepevalBitDepth,
) -> SepevalStatus {
    guard(|| {
        let sig = signal.as_ref().ok_or_else(|| null("signal"))?;
        let path = str_arg(path, "path")?;
        let depth = match bit_depth {
            SepevalBitDepth::Pcm16 => BitDepth::Pcm16,
            SepevalBitDepth::Pcm24 => BitDepth::Pcm24,
            SepevalBitDepth::Float32 => BitDepth::Float32,
        };
        save_wav(path, &sig.0, depth)?;
        Ok(())
    })
}

/// Samples per channel; 0 for a NULL handle.
///
/// # Safety
/// `signal` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepeval_signal_num_samples(signal: *const SepevalSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.num_samples())
}

/// # Safety
/// `signal` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepeval_signal_num_channels(signal: *const SepevalSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.num_channels())
}

/// # Safety
/// `signal` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepeval_signal_sample_rate(signal: *const SepevalSignal) -> u32 {
    signal.as_ref().map_or(0, |s| s.0.sample_rate())
}

/// Copies the interleaved samples into `out`, which must hold exactly
/// `num_samples * num_channels` values.
///
/// # Safety
/// `signal` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sepeval_signal_read(signal: *const SepevalSignal, out: *mut f64, len: usize) -> SepevalStatus {
    guard(|| {
        let sig = signal.as_ref().ok_or_else(|| null("signal"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let want = sig.0.num_samples() * sig.0.num_channels();
        if len != want {
            return Err(Failure(
                SepevalStatus::LengthMismatch,
                format!("buffer holds {len} values, signal has {want}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, s) in dst.iter_mut().zip(sig.0.samples().iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Releases a signal. NULL is ignored.
///
/// # Safety
/// `signal` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sepeval_signal_free(signal: *mut SepevalSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// 512-tap filters, 44100-sample windows and hop, global filters.
#[no_mangle]
pub extern "C" fn sepeval_eval_config_default() -> SepevalEvalConfig {
    SepevalEvalConfig {
        filter_len: DEFAULT_FILTER_LEN,
        window: DEFAULT_WINDOW,
        hop: DEFAULT_WINDOW,
        mode: SepevalMode::V4Global,
    }
}

/// Scores `estimates[k]` against `references[k]` for every k; both arrays
/// hold `count` handles.
///
/// # Safety
/// Both arrays must hold `count` live handles; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sepeval_bss_eval(
    references: *const *const SepevalSignal,
    estimates: *const *const SepevalSignal,
    count: usize,
    config: *const SepevalEvalConfig,
    out: *mut *mut SepevalScores,
) -> SepevalStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if count == 0 {
            return Err(invalid("at least one reference is required"));
        }
        let refs: Vec<AudioSignal> = signal_list(references, count, "references")?.into_iter().cloned().collect();
        let ests: Vec<AudioSignal> = signal_list(estimates, count, "estimates")?.into_iter().cloned().collect();
        let bss = BssEvalConfig {
            filter_len: cfg.filter_len,
            window: cfg.window,
            hop: cfg.hop,
            mode: match cfg.mode {
                SepevalMode::V4Global => EvalMode::V4Global,
                SepevalMode::V3Windowed => EvalMode::V3Windowed,
            },
        };
        write_out(out, SepevalScores(bss_eval(&refs, &ests, &bss)?));
        Ok(())
    })
}

/// Number of estimates scored; 0 for a NULL handle.
///
/// # Safety
/// `scores` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepeval_scores_num_estimates(scores: *const SepevalScores) -> usize {
    scores.as_ref().map_or(0, |s| s.0.len())
}

/// Number of windows for `estimate`; 0 when out of range.
///
/// # Safety
/// `scores` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepeval_scores_num_frames(scores: *const SepevalScores, estimate: usize) -> usize {
    scores.as_ref().and_then(|s| s.0.get(estimate)).map_or(0, Vec::len)
}

/// One metric of one window.
///
/// # Safety
/// `scores` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepeval_scores_get(
    scores: *const SepevalScores,
    estimate: usize,
    frame: usize,
    metric: SepevalMetric,
    out: *mut SepevalScore,
) -> SepevalStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(|| null("scores"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = s
            .0
            .get(estimate)
            .and_then(|frames| frames.get(frame))
            .ok_or_else(|| invalid(format!("no frame {frame} for estimate {estimate}")))?;
        let m = match metric {
            SepevalMetric::Sdr => Metric::Sdr,
            SepevalMetric::Isr => Metric::Isr,
            SepevalMetric::Sir => Metric::Sir,
            SepevalMetric::Sar => Metric::Sar,
        };
        *out = match f.get(m) {
            Score::Finite(v) => SepevalScore {
                value: v,
                status: SepevalScoreStatus::Finite,
            },
            Score::PosInf => SepevalScore {
                value: f64::NAN,
                status: SepevalScoreStatus::PosInf,
            },
            Score::NegInf => SepevalScore {
                value: f64::NAN,
                status: SepevalScoreStatus::NegInf,
            },
            Score::Undefined => SepevalScore {
                value: f64::NAN,
                status: SepevalScoreStatus::Undefined,
            },
        };
        Ok(())
    })
}

/// Releases a score set. NULL is ignored.
///
/// # Safety
/// `scores` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sepeval_scores_free(scores: *mut SepevalScores) {
    if !scores.is_null() {
        drop(Box::from_raw(scores));
    }
}

/// Oracle estimates of `count` sources from `mixture`, written to `out[0..count]`.
///
/// `method` is one of `IBM1`, `IBM2`, `IRM1`, `IRM2`, `MWF` or `IRM`; for
/// `IRM` a positive `alpha` sets the exponent (otherwise pass 0). Default
/// STFT settings are used (4096-sample Hann window, hop 1024).
///
/// # Safety
/// `sources` must hold `count` live handles and `out` room for `count`
/// pointers. On failure nothing is written to `out`.
#[no_mangle]
pub unsafe extern "C" fn sepeval_oracle_separate(
    mixture: *const SepevalSignal,
    sources: *const *const SepevalSignal,
    count: usize,
    method: *const c_char,
    alpha: f64,
    out: *mut *mut SepevalSignal,
) -> SepevalStatus {
    guard(|| {
        let mix = mixture.as_ref().ok_or_else(|| null("mixture"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let srcs: Vec<AudioSignal> = signal_list(sources, count, "sources")?.into_iter().cloned().collect();
        let name = str_arg(method, "method")?;
        let method = OracleMethod::parse(name, (alpha > 0.0).then_some(alpha))?;
        let estimates = oracle_separate(&mix.0, &srcs, method, &OracleConfig::default())?;
        let dst = std::slice::from_raw_parts_mut(out, count);
        for (slot, est) in dst.iter_mut().zip(estimates) {
            *slot = Box::into_raw(Box::new(SepevalSignal(est)));
        }
        Ok(())
    })
}
