#ifndef WICSI_H
#define WICSI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * `algorithm` values for [`wcsi_bearing_estimate`].
 */
#define WCSI_ALGORITHM_BARTLETT 0

#define WCSI_ALGORITHM_MUSIC 1

#define WCSI_ALGORITHM_SPOTFI 2

typedef enum {
  WCSI_STATUS_OK = 0,
  WCSI_STATUS_NULL_POINTER = 1,
  WCSI_STATUS_INVALID_ARGUMENT = 2,
  WCSI_STATUS_DECODE = 3,
  WCSI_STATUS_ENCODE = 4,
  WCSI_STATUS_IO = 5,
  WCSI_STATUS_BUFFER_TOO_SMALL = 6,
  WCSI_STATUS_ESTIMATION = 7,
  WCSI_STATUS_PANIC = 8,
} WcsiStatus;

/**
 * Per-antenna phase corrections for one channel.
 */
typedef struct WcsiCalibration WcsiCalibration;

/**
 * A decoded CSI frame.
 */
typedef struct WcsiFrame WcsiFrame;

/**
 * Antenna positions in the robot frame.
 */
typedef struct WcsiGeometry WcsiGeometry;

typedef struct {
  uint16_t channel;
  uint32_t bandwidth_mhz;
  size_t n_rx;
  size_t n_tx;
  size_t n_sub;
  double rssi_dbm;
  uint16_t seq;
  uint64_t timestamp_ns;
  uint8_t source_mac[6];
} WcsiFrameInfo;

typedef struct {
  /**
   * Radians in the robot frame, (-pi, pi].
   */
  double theta;
  double strength;
  /**
   * 1 if accepted, 0 if rejected by the RSSI floor.
   */
  int32_t accepted;
} WcsiBearing;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (NUL-terminated, truncated to fit) into
 * `buf` and returns the full message length excluding the NUL.
 */
size_t wcsi_last_error(char *buf, size_t cap);

/**
 * Static NUL-terminated version string.
 */
const char *wcsi_version(void);

WcsiStatus wcsi_frame_decode(const uint8_t *data, size_t len, WcsiFrame **out);

/**
 * Encodes into `buf`. `*written` receives the encoded size; when `buf` is
 * null or `cap` is too small nothing is written and `BufferTooSmall` is
 * returned, so a first call with a null buffer queries the size.
 */
WcsiStatus wcsi_frame_encode(const WcsiFrame *frame, uint8_t *buf, size_t cap, size_t *written);

WcsiStatus wcsi_frame_info(const WcsiFrame *frame, WcsiFrameInfo *out);

/**
 * One CSI coefficient.
 */
WcsiStatus wcsi_frame_csi(const WcsiFrame *frame,
                          size_t rx,
                          size_t tx,
                          size_t sub,
                          float *re,
                          float *im);

void wcsi_frame_free(WcsiFrame *frame);

/**
 * `xy` holds `n` interleaved `x, y` pairs in metres.
 */
WcsiStatus wcsi_geometry_new(const double *xy, size_t n, WcsiGeometry **out);

void wcsi_geometry_free(WcsiGeometry *geom);

/**
 * Parses calibration file text (NUL-terminated UTF-8).
 */
WcsiStatus wcsi_calibration_parse(const char *text, WcsiCalibration **out);

/**
 * Reads a calibration file from `path` (NUL-terminated UTF-8).
 */
WcsiStatus wcsi_calibration_load(const char *path, WcsiCalibration **out);

/**
 * Corrects `frame` in place.
 */
WcsiStatus wcsi_calibration_apply(const WcsiCalibration *cal, WcsiFrame *frame);

void wcsi_calibration_free(WcsiCalibration *cal);

/**
 * Single-frame bearing with the default grids (360 bearings, 0-30 m in
 * 0.25 m steps). Frames below `rssi_floor_dbm` come back with
 * `accepted = 0`.
 */
WcsiStatus wcsi_bearing_estimate(const WcsiFrame *frame,
                                 const WcsiGeometry *geom,
                                 int32_t algorithm,
                                 double rssi_floor_dbm,
                                 WcsiBearing *out);

/**
 * Least-squares intersection of `n` bearing rays. `poses` holds `n`
 * triples `x, y, heading`; `bearings` holds the local bearings (radians).
 * `out_xy` receives the point and `out_rms` (optional) the RMS residual.
 */
WcsiStatus wcsi_triangulate(const double *poses,
                            const double *bearings,
                            size_t n,
                            double *out_xy,
                            double *out_rms);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WICSI_H */
