#ifndef SEPEVAL_H
#define SEPEVAL_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SepevalStatus {
  SEPEVAL_STATUS_OK = 0,
  SEPEVAL_STATUS_NULL_POINTER = 1,
  SEPEVAL_STATUS_INVALID_ARGUMENT = 2,
  SEPEVAL_STATUS_SHAPE_MISMATCH = 3,
  SEPEVAL_STATUS_LENGTH_MISMATCH = 4,
  SEPEVAL_STATUS_IO = 5,
  SEPEVAL_STATUS_UNSUPPORTED_FORMAT = 6,
  SEPEVAL_STATUS_CORPUS = 7,
  SEPEVAL_STATUS_REPORT = 8,
  SEPEVAL_STATUS_PANIC = 9,
} SepevalStatus;

typedef enum SepevalBitDepth {
  SEPEVAL_BIT_DEPTH_PCM16 = 0,
  SEPEVAL_BIT_DEPTH_PCM24 = 1,
  SEPEVAL_BIT_DEPTH_FLOAT32 = 2,
} SepevalBitDepth;

typedef enum SepevalMode {
  SEPEVAL_MODE_V4_GLOBAL = 0,
  SEPEVAL_MODE_V3_WINDOWED = 1,
} SepevalMode;

typedef enum SepevalMetric {
  SEPEVAL_METRIC_SDR = 0,
  SEPEVAL_METRIC_ISR = 1,
  SEPEVAL_METRIC_SIR = 2,
  SEPEVAL_METRIC_SAR = 3,
} SepevalMetric;

typedef enum SepevalScoreStatus {
  SEPEVAL_SCORE_STATUS_FINITE = 0,
  SEPEVAL_SCORE_STATUS_POS_INF = 1,
  SEPEVAL_SCORE_STATUS_NEG_INF = 2,
  SEPEVAL_SCORE_STATUS_UNDEFINED = 3,
} SepevalScoreStatus;

// Framewise scores, one list per estimate.
typedef struct SepevalScores SepevalScores;

// A multichannel signal.
typedef struct SepevalSignal SepevalSignal;

// Metric settings; lengths are in samples.
typedef struct SepevalEvalConfig {
  size_t filter_len;
  size_t window;
  size_t hop;
  enum SepevalMode mode;
} SepevalEvalConfig;

// One metric value. `value` is the dB score when `status` is finite and
// NaN otherwise.
typedef struct SepevalScore {
  double value;
  enum SepevalScoreStatus status;
} SepevalScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sepeval_version(void);

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *sepeval_last_error(void);

// Creates a signal from `frames * channels` interleaved samples.
//
// # Safety
// `samples` must point to `frames * channels` readable doubles and `out`
// to writable storage for one pointer.
enum SepevalStatus sepeval_signal_new(const double *samples,
                                      size_t frames,
                                      size_t channels,
                                      uint32_t sample_rate,
                                      struct SepevalSignal **out);

// Decodes a WAV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum SepevalStatus sepeval_signal_load_wav(const char *path, struct SepevalSignal **out);

// Encodes `signal` as a WAV file.
//
// # Safety
// `signal` must be a live handle and `path` a NUL-terminated string.
enum SepevalStatus sepeval_signal_save_wav(const struct SepevalSignal *signal,
                                           const char *path,
                                           enum SepevalBitDepth bit_depth);

// Samples per channel; 0 for a NULL handle.
//
// # Safety
// `signal` must be NULL or a live handle.
size_t sepeval_signal_num_samples(const struct SepevalSignal *signal);

// # Safety
// `signal` must be NULL or a live handle.
size_t sepeval_signal_num_channels(const struct SepevalSignal *signal);

// # Safety
// `signal` must be NULL or a live handle.
uint32_t sepeval_signal_sample_rate(const struct SepevalSignal *signal);

// Copies the interleaved samples into `out`, which must hold exactly
// `num_samples * num_channels` values.
//
// # Safety
// `signal` must be a live handle and `out` must point to `len` writable doubles.
enum SepevalStatus sepeval_signal_read(const struct SepevalSignal *signal, double *out, size_t len);

// Releases a signal. NULL is ignored.
//
// # Safety
// `signal` must be NULL or a handle not yet freed.
void sepeval_signal_free(struct SepevalSignal *signal);

// 512-tap filters, 44100-sample windows and hop, global filters.
struct SepevalEvalConfig sepeval_eval_config_default(void);

// Scores `estimates[k]` against `references[k]` for every k; both arrays
// hold `count` handles.
//
// # Safety
// Both arrays must hold `count` live handles; `config` and `out` must be valid.
enum SepevalStatus sepeval_bss_eval(const struct SepevalSignal *const *references,
                                    const struct SepevalSignal *const *estimates,
                                    size_t count,
                                    const struct SepevalEvalConfig *config,
                                    struct SepevalScores **out);

// Number of estimates scored; 0 for a NULL handle.
//
// # Safety
// `scores` must be NULL or a live handle.
size_t sepeval_scores_num_estimates(const struct SepevalScores *scores);

// Number of windows for `estimate`; 0 when out of range.
//
// # Safety
// `scores` must be NULL or a live handle.
size_t sepeval_scores_num_frames(const struct SepevalScores *scores, size_t estimate);

// One metric of one window.
//
// # Safety
// `scores` must be a live handle and `out` writable.
enum SepevalStatus sepeval_scores_get(const struct SepevalScores *scores,
                                      size_t estimate,
                                      size_t frame,
                                      enum SepevalMetric metric,
                                      struct SepevalScore *out);

// Releases a score set. NULL is ignored.
//
// # Safety
// `scores` must be NULL or a handle not yet freed.
void sepeval_scores_free(struct SepevalScores *scores);

// Oracle estimates of `count` sources from `mixture`, written to `out[0..count]`.
//
// `method` is one of `IBM1`, `IBM2`, `IRM1`, `IRM2`, `MWF` or `IRM`; for
// `IRM` a positive `alpha` sets the exponent (otherwise pass 0). Default
// STFT settings are used (4096-sample Hann window, hop 1024).
//
// # Safety
// `sources` must hold `count` live handles and `out` room for `count`
// pointers. On failure nothing is written to `out`.
enum SepevalStatus sepeval_oracle_separate(const struct SepevalSignal *mixture,
                                           const struct SepevalSignal *const *sources,
                                           size_t count,
                                           const char *method,
                                           double alpha,
                                           struct SepevalSignal **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEPEVAL_H */
