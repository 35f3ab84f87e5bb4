//! C ABI for the wicsi toolkit.
//!
//! Objects cross the boundary as opaque handles created by `wcsi_*_new` /
//! `wcsi_*_decode` / `wcsi_*_load` and released with the matching
//! `wcsi_*_free`. Every fallible call returns a [`WcsiStatus`]; the message
//! for the most recent failure on the calling thread is available from
//! [`wcsi_last_error`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wicsi::aoa::{self, Algorithm, AoaConfig, BearingOutcome};
use wicsi::calibration::file::parse_calibration;
use wicsi::codec::{decode_frame, encode_frame, encoded_len};
use wicsi::csi::{apply_calibration, ArrayGeometry, CalibrationMatrix, CsiFrame, Pose2D};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcsiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Decode = 3,
    Encode = 4,
    Io = 5,
    BufferTooSmall = 6,
    Estimation = 7,
    Panic = 8,
}

/// A decoded CSI frame.
pub struct WcsiFrame(CsiFrame);

/// Per-antenna phase corrections for one channel.
pub struct WcsiCalibration(CalibrationMatrix);

/// Antenna positions in the robot frame.
pub struct WcsiGeometry(ArrayGeometry);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WcsiFrameInfo {
    pub channel: u16,
    pub bandwidth_mhz: u32,
    pub n_rx: usize,
    pub n_tx: usize,
    pub n_sub: usize,
    pub rssi_dbm: f64,
    pub seq: u16,
    pub timestamp_ns: u64,
    pub source_mac: [u8; 6],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WcsiBearing {
    /// Radians in the robot frame, (-pi, pi].
    pub theta: f64,
    pub strength: f64,
    /// 1 if accepted, 0 if rejected by the RSSI floor.
    pub accepted: i32,
}

/// `algorithm` values for [`wcsi_bearing_estimate`].
pub const WCSI_ALGORITHM_BARTLETT: i32 = 0;
pub const WCSI_ALGORITHM_MUSIC: i32 = 1;
pub const WCSI_ALGORITHM_SPOTFI: i32 = 2;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: WcsiStatus, msg: impl std::fmt::Display) -> WcsiStatus {
    set_error(msg.to_string());
    status
}

fn guard(f: impl FnOnce() -> WcsiStatus) -> WcsiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == WcsiStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(WcsiStatus::Panic, "internal panic"),
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Option<&'a [u8]> {
    if data.is_null() {
        (len == 0).then_some(&[][..])
    } else {
        Some(std::slice::from_raw_parts(data, len))
    }
}

/// Copies the last error message (NUL-terminated, truncated to fit) into
/// `buf` and returns the full message length excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn wcsi_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn wcsi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn wcsi_frame_decode(
    data: *const u8,
    len: usize,
    out: *mut *mut WcsiFrame,
) -> WcsiStatus {
    guard(|| {
        if out.is_null() {
            return fail(WcsiStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(buf) = bytes(data, len) else {
            return fail(WcsiStatus::NullPointer, "data is null");
        };
        match decode_frame(buf) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(WcsiFrame(f)));
                WcsiStatus::Ok
            }
            Err(e) => fail(WcsiStatus::Decode, e),
        }
    })
}

/// Encodes into `buf`. `*written` receives the encoded size; when `buf` is
/// null or `cap` is too small nothing is written and `BufferTooSmall` is
/// returned, so a first call with a null buffer queries the size.
#[no_mangle]
pub unsafe extern "C" fn wcsi_frame_encode(
    frame: *const WcsiFrame,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> WcsiStatus {
    guard(|| {
        let (Some(frame), false) = (frame.as_ref(), written.is_null()) else {
            return fail(WcsiStatus::NullPointer, "frame or written is null");
        };
        let f = &frame.0;
        let need = encoded_len(f.n_rx(), f.n_tx(), f.n_sub());
        *written = need;
        if buf.is_null() || cap < need {
            return fail(
                WcsiStatus::BufferTooSmall,
                format!("need {need} bytes, have {cap}"),
            );
        }
        match encode_frame(f) {
            Ok(v) => {
                ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
                *written = v.len();
                WcsiStatus::Ok
            }
            Err(e) => fail(WcsiStatus::Encode, e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn wcsi_frame_info(
    frame: *const WcsiFrame,
    out: *mut WcsiFrameInfo,
) -> WcsiStatus {
    guard(|| {
        let (Some(frame), Some(out)) = (frame.as_ref(), out.as_mut()) else {
            return fail(WcsiStatus::NullPointer, "frame or out is null");
        };
        let f = &frame.0;
        let ch = f.chanspec();
        *out = WcsiFrameInfo {
            channel: ch.channel_number(),
            bandwidth_mhz: ch.bandwidth_mhz(),
            n_rx: f.n_rx(),
            n_tx: f.n_tx(),
            n_sub: f.n_sub(),
            rssi_dbm: f.rssi_dbm,
            seq: f.seq,
            timestamp_ns: f.timestamp_ns,
            source_mac: f.source_mac.0,
        };
        WcsiStatus::Ok
    })
}

/// One CSI coefficient.
#[no_mangle]
pub unsafe extern "C" fn wcsi_frame_csi(
    frame: *const WcsiFrame,
    rx: usize,
    tx: usize,
    sub: usize,
    re: *mut f32,
    im: *mut f32,
) -> WcsiStatus {
    guard(|| {
        let Some(frame) = frame.as_ref() else {
            return fail(WcsiStatus::NullPointer, "frame is null");
        };
        if re.is_null() || im.is_null() {
            return fail(WcsiStatus::NullPointer, "re or im is null");
        }
        let f = &frame.0;
        if rx >= f.n_rx() || tx >= f.n_tx() || sub >= f.n_sub() {
            return fail(
                WcsiStatus::InvalidArgument,
                format!("index ({rx},{tx},{sub}) out of range"),
            );
        }
        let z = f.get(rx, tx, sub);
        *re = z.re;
        *im = z.im;
        WcsiStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn wcsi_frame_free(frame: *mut WcsiFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// `xy` holds `n` interleaved `x, y` pairs in metres.
#[no_mangle]
pub unsafe extern "C" fn wcsi_geometry_new(
    xy: *const f64,
    n: usize,
    out: *mut *mut WcsiGeometry,
) -> WcsiStatus {
    guard(|| {
        if out.is_null() || xy.is_null() {
            return fail(WcsiStatus::NullPointer, "xy or out is null");
        }
        *out = ptr::null_mut();
        let Some(len) = n.checked_mul(2) else {
            return fail(WcsiStatus::InvalidArgument, "n too large");
        };
        let v = std::slice::from_raw_parts(xy, len);
        let pts = v.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        match ArrayGeometry::new(pts) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(WcsiGeometry(g)));
                WcsiStatus::Ok
            }
            Err(e) => fail(WcsiStatus::InvalidArgument, e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn wcsi_geometry_free(geom: *mut WcsiGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// Parses calibration file text (NUL-terminated UTF-8).
#[no_mangle]
pub unsafe extern "C" fn wcsi_calibration_parse(
    text: *const c_char,
    out: *mut *mut WcsiCalibration,
) -> WcsiStatus {
    guard(|| {
        if out.is_null() || text.is_null() {
            return fail(WcsiStatus::NullPointer, "text or out is null");
        }
        *out = ptr::null_mut();
        let Ok(s) = CStr::from_ptr(text).to_str() else {
            return fail(WcsiStatus::InvalidArgument, "text is not UTF-8");
        };
        match parse_calibration(s) {
            Ok((c, _)) => {
                *out = Box::into_raw(Box::new(WcsiCalibration(c)));
                WcsiStatus::Ok
            }
            Err(e) => fail(WcsiStatus::Decode, e),
        }
    })
}

/// Reads a calibration file from `path` (NUL-terminated UTF-8).
#[no_mangle]
pub unsafe extern "C" fn wcsi_calibration_load(
    path: *const c_char,
    out: *mut *mut WcsiCalibration,
) -> WcsiStatus {
    guard(|| {
        if out.is_null() || path.is_null() {
            return fail(WcsiStatus::NullPointer, "path or out is null");
        }
        *out = ptr::null_mut();
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            return fail(WcsiStatus::InvalidArgument, "path is not UTF-8");
        };
        let text = match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => return fail(WcsiStatus::Io, format!("{p}: {e}")),
        };
        match parse_calibration(&text) {
            Ok((c, _)) => {
                *out = Box::into_raw(Box::new(WcsiCalibration(c)));
                WcsiStatus::Ok
            }
            Err(e) => fail(WcsiStatus::Decode, e),
        }
    })
}

/// Corrects `frame` in place.
#[no_mangle]
pub unsafe extern "C" fn wcsi_calibration_apply(
    cal: *const WcsiCalibration,
    frame: *mut WcsiFrame,
) -> WcsiStatus {
    guard(|| {
        let (Some(cal), Some(frame)) = (cal.as_ref(), frame.as_mut()) else {
            return fail(WcsiStatus::NullPointer, "cal or frame is null");
        };
        match apply_calibration(&cal.0, &frame.0) {
            Ok(f) => {
                frame.0 = f;
                WcsiStatus::Ok
            }
            Err(e) => fail(WcsiStatus::InvalidArgument, e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn wcsi_calibration_free(cal: *mut WcsiCalibration) {
    if !cal.is_null() {
        drop(Box::from_raw(cal));
    }
}

/// Single-frame bearing with the default grids (360 bearings, 0-30 m in
/// 0.25 m steps). Frames below `rssi_floor_dbm` come back with
/// `accepted = 0`.
#[no_mangle]
pub unsafe extern "C" fn wcsi_bearing_estimate(
    frame: *const WcsiFrame,
    geom: *const WcsiGeometry,
    algorithm: i32,
    rssi_floor_dbm: f64,
    out: *mut WcsiBearing,
) -> WcsiStatus {
    guard(|| {
        let (Some(frame), Some(geom), Some(out)) = (frame.as_ref(), geom.as_ref(), out.as_mut())
        else {
            return fail(WcsiStatus::NullPointer, "frame, geom or out is null");
        };
        let algorithm = match algorithm {
            WCSI_ALGORITHM_BARTLETT => Algorithm::Bartlett,
            WCSI_ALGORITHM_MUSIC => Algorithm::Music,
            WCSI_ALGORITHM_SPOTFI => Algorithm::Spotfi,
            other => {
                return fail(
                    WcsiStatus::InvalidArgument,
                    format!("unknown algorithm {other}"),
                )
            }
        };
        if rssi_floor_dbm.is_nan() {
            return fail(WcsiStatus::InvalidArgument, "rssi floor is NaN");
        }
        let cfg = AoaConfig {
            algorithm,
            rssi_floor_dbm,
            ..AoaConfig::default()
        };
        match aoa::estimate_frame_bearing(&frame.0, &geom.0, &cfg) {
            Ok(BearingOutcome::Accepted(b)) => {
                *out = WcsiBearing {
                    theta: b.theta,
                    strength: b.strength,
                    accepted: 1,
                };
                WcsiStatus::Ok
            }
            Ok(BearingOutcome::Rejected { .. }) => {
                *out = WcsiBearing::default();
                WcsiStatus::Ok
            }
            Err(e) => fail(WcsiStatus::Estimation, e),
        }
    })
}

/// Least-squares intersection of `n` bearing rays. `poses` holds `n`
/// triples `x, y, heading`; `bearings` holds the local bearings (radians).
/// `out_xy` receives the point and `out_rms` (optional) the RMS residual.
#[no_mangle]
pub unsafe extern "C" fn wcsi_triangulate(
    poses: *const f64,
    bearings: *const f64,
    n: usize,
    out_xy: *mut f64,
    out_rms: *mut f64,
) -> WcsiStatus {
    guard(|| {
        if poses.is_null() || bearings.is_null() || out_xy.is_null() {
            return fail(WcsiStatus::NullPointer, "poses, bearings or out_xy is null");
        }
        let Some(len) = n.checked_mul(3) else {
            return fail(WcsiStatus::InvalidArgument, "n too large");
        };
        let p = std::slice::from_raw_parts(poses, len);
        let b = std::slice::from_raw_parts(bearings, n);
        let obs: Vec<(Pose2D, f64)> = p
            .chunks_exact(3)
            .zip(b)
            .map(|(c, &t)| (Pose2D::new(c[0], c[1], c[2]), t))
            .collect();
        match aoa::triangulate(&obs) {
            Ok(t) => {
                *out_xy = t.point[0];
                *out_xy.add(1) = t.point[1];
                if !out_rms.is_null() {
                    *out_rms = t.rms_residual;
                }
                WcsiStatus::Ok
            }
            Err(e) => fail(WcsiStatus::Estimation, e),
        }
    })
}
