//! C interface to `qmcnet`.
//!
//! Every fallible function returns a [`QmcStatus`]; results come back through out
//! pointers. After a non-`Ok` status, [`qmc_last_error`] describes the failure on the
//! calling thread. Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qmcnet::bench::{evaluate_points, lookup};
use qmcnet::lds::{generate_from, star_discrepancy_exact, PointSet, SamplerKind};
use qmcnet::net::NetworkParams;
use qmcnet::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnsupportedDimension = 3,
    UnknownBenchmark = 4,
    TooLarge = 5,
    Io = 6,
    ModelFormat = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QmcSampler {
    Sobol = 0,
    Halton = 1,
    /// Base-2 van der Corput; one dimension only.
    Vdc = 2,
    Random = 3,
}

/// Opaque point set.
pub struct QmcPointSet(PointSet);

/// Opaque trained network.
pub struct QmcModel(NetworkParams);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: QmcStatus, msg: impl Into<String>) -> QmcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn from_error(err: Error) -> QmcStatus {
    let status = match &err {
        Error::UnsupportedDimension { .. } | Error::DimensionMismatch { .. } => {
            QmcStatus::UnsupportedDimension
        }
        Error::UnknownBenchmark(_) => QmcStatus::UnknownBenchmark,
        Error::TooLarge(_) => QmcStatus::TooLarge,
        Error::Io { .. } => QmcStatus::Io,
        Error::ModelFormat(_) => QmcStatus::ModelFormat,
        Error::InvalidArgument(_) | Error::EmptyPointSet => QmcStatus::InvalidArgument,
        _ => QmcStatus::Other,
    };
    fail(status, err.to_string())
}

/// Runs `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), QmcStatus>) -> QmcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => QmcStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(QmcStatus::Panic, "internal panic"),
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), QmcStatus> {
    if p.is_null() {
        Err(fail(QmcStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, QmcStatus> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QmcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated
/// to `len`). Returns the full message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qmc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Generates `n` points of `sampler` in `dim` dimensions, starting at sequence index
/// `start` (1 skips the origin). `seed` only affects the random sampler.
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn qmc_pointset_generate(
    sampler: QmcSampler,
    dim: usize,
    n: usize,
    start: u64,
    seed: u64,
    out: *mut *mut QmcPointSet,
) -> QmcStatus {
    guard(|| {
        non_null(out, "out")?;
        let kind = match sampler {
            QmcSampler::Sobol => SamplerKind::Sobol,
            QmcSampler::Halton => SamplerKind::Halton,
            QmcSampler::Vdc => SamplerKind::VanDerCorput { base: 2 },
            QmcSampler::Random => SamplerKind::UniformRandom { seed },
        };
        let ps = generate_from(kind, dim, n, start).map_err(from_error)?;
        *out = Box::into_raw(Box::new(QmcPointSet(ps)));
        Ok(())
    })
}

/// Wraps `n * dim` row-major coordinates in `[0, 1]` as a point set.
///
/// # Safety
/// `coords` must point to `n * dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qmc_pointset_from_coords(
    coords: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut QmcPointSet,
) -> QmcStatus {
    guard(|| {
        non_null(coords, "coords")?;
        non_null(out, "out")?;
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| fail(QmcStatus::TooLarge, "n * dim overflows"))?;
        let data = std::slice::from_raw_parts(coords, len).to_vec();
        let ps = PointSet::from_flat(dim, data).map_err(from_error)?;
        *out = Box::into_raw(Box::new(QmcPointSet(ps)));
        Ok(())
    })
}

/// # Safety
/// `ps` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn qmc_pointset_free(ps: *mut QmcPointSet) {
    if !ps.is_null() {
        drop(Box::from_raw(ps));
    }
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `ps` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmc_pointset_len(ps: *const QmcPointSet) -> usize {
    ps.as_ref().map_or(0, |p| p.0.len())
}

/// Dimension; 0 for a null handle.
///
/// # Safety
/// `ps` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmc_pointset_dim(ps: *const QmcPointSet) -> usize {
    ps.as_ref().map_or(0, |p| p.0.dim())
}

/// Row-major coordinates, valid until the handle is freed. Null for a null handle.
///
/// # Safety
/// `ps` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmc_pointset_coords(ps: *const QmcPointSet) -> *const f64 {
    ps.as_ref().map_or(ptr::null(), |p| p.0.as_flat().as_ptr())
}

/// Exact star discrepancy (dimension at most 3).
///
/// # Safety
/// `ps` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qmc_star_discrepancy(ps: *const QmcPointSet, out: *mut f64) -> QmcStatus {
    guard(|| {
        non_null(ps, "point set")?;
        non_null(out, "out")?;
        *out = star_discrepancy_exact(&(*ps).0).map_err(from_error)?;
        Ok(())
    })
}

/// Input dimension of a named benchmark map.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qmc_benchmark_dim(name: *const c_char, out: *mut usize) -> QmcStatus {
    guard(|| {
        let name = text(name, "name")?;
        non_null(out, "out")?;
        *out = lookup(name).map_err(from_error)?.dim();
        Ok(())
    })
}

/// Evaluates a benchmark map at every point of `ps`, writing `len(ps)` values.
///
/// # Safety
/// `name` must be a NUL-terminated string, `ps` a live handle and `out` must have room
/// for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmc_benchmark_evaluate(
    name: *const c_char,
    ps: *const QmcPointSet,
    out: *mut f64,
    out_len: usize,
) -> QmcStatus {
    guard(|| {
        let name = text(name, "name")?;
        non_null(ps, "point set")?;
        non_null(out, "out")?;
        let ps = &(*ps).0;
        if out_len < ps.len() {
            return Err(fail(
                QmcStatus::BufferTooSmall,
                format!("need {} values, buffer holds {out_len}", ps.len()),
            ));
        }
        let map = lookup(name).map_err(from_error)?;
        let values = evaluate_points(map.as_ref(), ps).map_err(from_error)?;
        std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(&values);
        Ok(())
    })
}

/// Loads a model file written by the `train` command.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qmc_model_load(path: *const c_char, out: *mut *mut QmcModel) -> QmcStatus {
    guard(|| {
        let path = text(path, "path")?;
        non_null(out, "out")?;
        let file = File::open(path).map_err(|e| from_error(Error::io(path, e)))?;
        let params = NetworkParams::read_from(BufReader::new(file)).map_err(from_error)?;
        *out = Box::into_raw(Box::new(QmcModel(params)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn qmc_model_free(model: *mut QmcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension of the network; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmc_model_input_dim(model: *const QmcModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.config().input_dim)
}

/// Inference-mode predictions at every point of `ps`.
///
/// # Safety
/// `model` and `ps` must be live handles; `out` must have room for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmc_model_predict(
    model: *const QmcModel,
    ps: *const QmcPointSet,
    out: *mut f64,
    out_len: usize,
) -> QmcStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(ps, "point set")?;
        non_null(out, "out")?;
        let ps = &(*ps).0;
        if out_len < ps.len() {
            return Err(fail(
                QmcStatus::BufferTooSmall,
                format!("need {} values, buffer holds {out_len}", ps.len()),
            ));
        }
        let values = (*model).0.predict(ps.as_flat()).map_err(from_error)?;
        std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(&values);
        Ok(())
    })
}
