//! C interface to volume loading, cell detection and tracking.
//!
//! Objects are opaque handles created by `spf_*` constructors and released
//! with the matching `*_free` function. Every fallible call returns an
//! [`SpfStatus`]; on failure [`spf_last_error_message`] describes the cause.
//! Positions are physical `(x, y, z)` triples, z already multiplied by the
//! volume's z scale.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spf_core::detect::{self, DetectConfig};
use spf_core::imagecore::{self, Volume4D};
use spf_core::mrftree::CellTree;
use spf_core::track::{self, Status, TrackConfig, TrackResult};
use spf_core::{Error, Point};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Data = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpfMethod {
    Spf = 0,
    Pf = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpfCellStatus {
    Tracked = 0,
    OutOfView = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpfDims {
    pub t: usize,
    pub z: usize,
    pub y: usize,
    pub x: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpfDetectParams {
    pub lambda: f64,
    /// Peak neighbourhood along x, y, z.
    pub peak_window: [usize; 3],
    /// Negative selects 10% of the dtype maximum.
    pub min_intensity: i32,
    pub min_cluster_size: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpfTrackParams {
    pub method: SpfMethod,
    pub particles: usize,
    pub alpha: f64,
    pub sigma_step: [f64; 3],
    pub sigma_root: [f64; 3],
    pub lambda_rej: f64,
    pub window: [usize; 3],
    /// Non-positive selects `0.1 * max²` for the volume's dtype.
    pub sigma_lik2: f64,
    pub max_reject: usize,
    pub seed: u64,
    pub ref_frame: usize,
}

pub struct SpfVolume(Volume4D);
pub struct SpfCentroids(Vec<Point>);
pub struct SpfTrackResult(TrackResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SpfStatus {
    match e {
        Error::Io { .. } => SpfStatus::Io,
        Error::BadMagic { .. }
        | Error::VersionMismatch { .. }
        | Error::UnknownDtype(_)
        | Error::Truncated { .. }
        | Error::Parse { .. } => SpfStatus::Format,
        Error::Config(_) | Error::EvenWindow(_) | Error::InvalidDims(_) | Error::FrameOutOfRange { .. } => {
            SpfStatus::InvalidArgument
        }
        _ => SpfStatus::Data,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), SpfStatus>) -> SpfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            SpfStatus::Panic
        }
    }
}

fn fail(e: Error) -> SpfStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn invalid(msg: &str) -> SpfStatus {
    set_error(msg);
    SpfStatus::InvalidArgument
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, SpfStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("{what} is null"));
        SpfStatus::NullPointer
    })
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, SpfStatus> {
    p.as_mut().ok_or_else(|| {
        set_error(format!("{what} is null"));
        SpfStatus::NullPointer
    })
}

unsafe fn path_arg(p: *const c_char) -> Result<String, SpfStatus> {
    if p.is_null() {
        set_error("path is null");
        return Err(SpfStatus::NullPointer);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a volume container file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spf_volume_read(path: *const c_char, out: *mut *mut SpfVolume) -> SpfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let path = path_arg(path)?;
        let v = imagecore::read_volume(&path).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpfVolume(v)));
        Ok(())
    })
}

/// # Safety
/// `volume` must come from [`spf_volume_read`] and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn spf_volume_free(volume: *mut SpfVolume) {
    if !volume.is_null() {
        drop(Box::from_raw(volume));
    }
}

/// # Safety
/// `volume` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn spf_volume_dims(volume: *const SpfVolume, out: *mut SpfDims) -> SpfStatus {
    guard(|| {
        let d = deref(volume, "volume")?.0.dims();
        *out_ptr(out, "out")? = SpfDims {
            t: d.t,
            z: d.z,
            y: d.y,
            x: d.x,
        };
        Ok(())
    })
}

/// Sets the physical spacing of z slices (default 3).
///
/// # Safety
/// `volume` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn spf_volume_set_z_scale(volume: *mut SpfVolume, z_scale: f64) -> SpfStatus {
    guard(|| {
        out_ptr(volume, "volume")?.0.set_z_scale(z_scale).map_err(fail)
    })
}

#[no_mangle]
pub extern "C" fn spf_detect_params_default() -> SpfDetectParams {
    let d = DetectConfig::default();
    SpfDetectParams {
        lambda: d.lambda,
        peak_window: d.peak_window,
        min_intensity: -1,
        min_cluster_size: d.min_cluster_size,
    }
}

/// Detects cells in frame `frame`.
///
/// # Safety
/// `volume`, `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn spf_detect(
    volume: *const SpfVolume,
    frame: usize,
    params: *const SpfDetectParams,
    out: *mut *mut SpfCentroids,
) -> SpfStatus {
    guard(|| {
        let v = &deref(volume, "volume")?.0;
        let p = deref(params, "params")?;
        let out = out_ptr(out, "out")?;
        let min_intensity = match p.min_intensity {
            m if m < 0 => None,
            m => Some(u16::try_from(m).map_err(|_| invalid("min_intensity exceeds 65535"))?),
        };
        let cfg = DetectConfig {
            lambda: p.lambda,
            peak_window: p.peak_window,
            min_intensity,
            min_cluster_size: p.min_cluster_size,
        };
        let f = v.frame(frame).map_err(fail)?;
        let set = detect::detect_cells(&f, v.z_scale(), &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpfCentroids(set.centroids)));
        Ok(())
    })
}

/// Builds a centroid set from `count` packed `(x, y, z)` triples.
///
/// # Safety
/// `xyz` must point to `3 * count` doubles (may be null when `count` is 0).
#[no_mangle]
pub unsafe extern "C" fn spf_centroids_from_array(
    xyz: *const f64,
    count: usize,
    out: *mut *mut SpfCentroids,
) -> SpfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let pts = if count == 0 {
            Vec::new()
        } else {
            let data = std::slice::from_raw_parts(deref(xyz, "xyz")?, 3 * count);
            data.chunks_exact(3).map(|c| Point::new(c[0], c[1], c[2])).collect()
        };
        *out = Box::into_raw(Box::new(SpfCentroids(pts)));
        Ok(())
    })
}

/// # Safety
/// `centroids` must be a valid handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn spf_centroids_len(centroids: *const SpfCentroids) -> usize {
    centroids.as_ref().map_or(0, |c| c.0.len())
}

/// Copies centroid `k` into `xyz[0..3]`.
///
/// # Safety
/// `centroids` must be valid and `xyz` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn spf_centroids_get(centroids: *const SpfCentroids, k: usize, xyz: *mut f64) -> SpfStatus {
    guard(|| {
        let c = &deref(centroids, "centroids")?.0;
        let p = c.get(k).ok_or_else(|| invalid("centroid index out of range"))?;
        out_ptr(xyz, "xyz")?;
        ptr::copy_nonoverlapping([p.x, p.y, p.z].as_ptr(), xyz, 3);
        Ok(())
    })
}

/// # Safety
/// `centroids` must come from this library and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn spf_centroids_free(centroids: *mut SpfCentroids) {
    if !centroids.is_null() {
        drop(Box::from_raw(centroids));
    }
}

#[no_mangle]
pub extern "C" fn spf_track_params_default() -> SpfTrackParams {
    let d = TrackConfig::default();
    SpfTrackParams {
        method: SpfMethod::Spf,
        particles: d.particles,
        alpha: d.alpha,
        sigma_step: d.sigma_step,
        sigma_root: d.sigma_root,
        lambda_rej: d.lambda_rej,
        window: d.window,
        sigma_lik2: d.sigma_lik2.unwrap_or(0.0),
        max_reject: d.max_reject,
        seed: d.seed,
        ref_frame: d.ref_frame,
    }
}

/// Tracks the given frame-0 positions through every frame. With
/// `SPF_METHOD_SPF` the tree is the minimum spanning tree of the centroids.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spf_track(
    volume: *const SpfVolume,
    centroids: *const SpfCentroids,
    params: *const SpfTrackParams,
    out: *mut *mut SpfTrackResult,
) -> SpfStatus {
    guard(|| {
        let v = &deref(volume, "volume")?.0;
        let c = &deref(centroids, "centroids")?.0;
        let p = deref(params, "params")?;
        let out = out_ptr(out, "out")?;
        let cfg = TrackConfig {
            particles: p.particles,
            alpha: p.alpha,
            sigma_step: p.sigma_step,
            sigma_root: p.sigma_root,
            lambda_rej: p.lambda_rej,
            window: p.window,
            sigma_lik2: (p.sigma_lik2 > 0.0).then_some(p.sigma_lik2),
            max_reject: p.max_reject,
            seed: p.seed,
            ref_frame: p.ref_frame,
        };
        cfg.validate().map_err(fail)?;
        let result = match p.method {
            SpfMethod::Spf => {
                let tree = CellTree::build(c.clone()).map_err(fail)?;
                track::track_all(v, &tree, &cfg)
            }
            SpfMethod::Pf => track::track_all_pf(v, c, &cfg),
        }
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(SpfTrackResult(result)));
        Ok(())
    })
}

/// # Safety
/// `result` must be a valid handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn spf_result_frames(result: *const SpfTrackResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.frames())
}

/// # Safety
/// `result` must be a valid handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn spf_result_cells(result: *const SpfTrackResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.cells())
}

/// Estimate of cell `k` at frame `t` into `xyz[0..3]` and its status.
///
/// # Safety
/// `result` must be valid, `xyz` must hold 3 doubles; `status` may be null.
#[no_mangle]
pub unsafe extern "C" fn spf_result_get(
    result: *const SpfTrackResult,
    t: usize,
    k: usize,
    xyz: *mut f64,
    status: *mut SpfCellStatus,
) -> SpfStatus {
    guard(|| {
        let r = &deref(result, "result")?.0;
        let p = r
            .estimates
            .get(t)
            .and_then(|f| f.get(k))
            .ok_or_else(|| invalid("frame or cell index out of range"))?;
        out_ptr(xyz, "xyz")?;
        ptr::copy_nonoverlapping([p.x, p.y, p.z].as_ptr(), xyz, 3);
        if let Some(s) = status.as_mut() {
            *s = match r.status[t][k] {
                Status::Tracked => SpfCellStatus::Tracked,
                Status::OutOfView => SpfCellStatus::OutOfView,
            };
        }
        Ok(())
    })
}

/// Writes the result in the `t k x y z status` text format.
///
/// # Safety
/// `result` must be valid and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn spf_result_write(result: *const SpfTrackResult, path: *const c_char) -> SpfStatus {
    guard(|| {
        let r = &deref(result, "result")?.0;
        let path = path_arg(path)?;
        r.write(&path).map_err(fail)
    })
}

/// # Safety
/// `result` must come from [`spf_track`] and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn spf_result_free(result: *mut SpfTrackResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
