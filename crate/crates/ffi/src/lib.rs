//! C ABI over driftscope models and statistics.
//!
//! Every fallible function returns a [`DsStatus`]; on failure a message is
//! available from [`ds_last_error`] on the same thread. Models are opaque
//! handles created by [`ds_model_load`] and released with [`ds_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use driftscope::diachrony::{classify_candidate, pearson, CandidateClass};
use driftscope::embed::{cosine_similarity, load_model, EmbeddingModel, MatrixKind};
use driftscope::freq::tfidf;
use driftscope::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    NotFound = 5,
    /// The result is mathematically undefined, e.g. a zero vector or constant series.
    Undefined = 6,
    LengthMismatch = 7,
    BufferTooSmall = 8,
    InvalidArgument = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsMatrix {
    Target = 0,
    Context = 1,
}

impl From<DsMatrix> for MatrixKind {
    fn from(m: DsMatrix) -> Self {
        match m {
            DsMatrix::Target => MatrixKind::Target,
            DsMatrix::Context => MatrixKind::Context,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsClass {
    Uncorrelated = 0,
    Positive = 1,
    Negative = 2,
}

/// Opaque model handle.
pub struct DsModel {
    inner: EmbeddingModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: DsStatus, msg: impl Into<String>) -> DsStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> DsStatus {
    match err {
        Error::Io { .. } => DsStatus::Io,
        Error::Format(_) => DsStatus::Format,
        Error::Undefined(_) => DsStatus::Undefined,
        Error::LengthMismatch { .. } => DsStatus::LengthMismatch,
        _ => DsStatus::InvalidArgument,
    }
}

fn from_error(err: Error) -> DsStatus {
    fail(status_of(&err), err.to_string())
}

fn guard(f: impl FnOnce() -> DsStatus) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(DsStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, DsStatus> {
    if p.is_null() {
        return Err(fail(DsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], DsStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(DsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a binary model file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_model_load(path: *const c_char, out: *mut *mut DsModel) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return fail(DsStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = tri!(str_arg(path, "path"));
        match load_model(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DsModel { inner }));
                DsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`ds_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ds_model_free(model: *mut DsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Vector dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_model_dimension(model: *const DsModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Number of vocabulary terms, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_model_vocab_size(model: *const DsModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.vocabulary.len())
}

/// Copies the row of `term` in `matrix` into `out`, which must hold at
/// least the model dimension.
///
/// # Safety
/// `model` must be a live handle, `term` NUL-terminated, and `out` valid for
/// `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn ds_model_vector(
    model: *const DsModel,
    term: *const c_char,
    matrix: DsMatrix,
    out: *mut f32,
    out_len: usize,
) -> DsStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return fail(DsStatus::NullPointer, "model is null");
        };
        let term = tri!(str_arg(term, "term"));
        let Some(row) = model.inner.row(term, matrix.into()) else {
            return fail(
                DsStatus::NotFound,
                format!("term {term:?} not in vocabulary"),
            );
        };
        if out.is_null() {
            return fail(DsStatus::NullPointer, "out is null");
        }
        if out_len < row.len() {
            return fail(
                DsStatus::BufferTooSmall,
                format!("buffer holds {out_len} values, need {}", row.len()),
            );
        }
        ptr::copy_nonoverlapping(row.as_ptr(), out, row.len());
        DsStatus::Ok
    })
}

/// Cosine similarity of two terms' rows in the same matrix.
///
/// # Safety
/// `model` must be a live handle, `a` and `b` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ds_model_similarity(
    model: *const DsModel,
    a: *const c_char,
    b: *const c_char,
    matrix: DsMatrix,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return fail(DsStatus::NullPointer, "model is null");
        };
        if out.is_null() {
            return fail(DsStatus::NullPointer, "out is null");
        }
        let a = tri!(str_arg(a, "a"));
        let b = tri!(str_arg(b, "b"));
        let kind = matrix.into();
        let (Some(va), Some(vb)) = (model.inner.row(a, kind), model.inner.row(b, kind)) else {
            return fail(
                DsStatus::NotFound,
                format!("{a:?} or {b:?} not in vocabulary"),
            );
        };
        match cosine_similarity(va, vb) {
            Ok(s) => {
                *out = s;
                DsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Cosine similarity of two `len`-long vectors.
///
/// # Safety
/// `a` and `b` must be valid for `len` floats and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ds_cosine_similarity(
    a: *const f32,
    b: *const f32,
    len: usize,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return fail(DsStatus::NullPointer, "out is null");
        }
        let a = tri!(slice_arg(a, len, "a"));
        let b = tri!(slice_arg(b, len, "b"));
        match cosine_similarity(a, b) {
            Ok(s) => {
                *out = s;
                DsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Pearson correlation of two `len`-long series.
///
/// # Safety
/// `x` and `y` must be valid for `len` doubles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ds_pearson(
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return fail(DsStatus::NullPointer, "out is null");
        }
        let x = tri!(slice_arg(x, len, "x"));
        let y = tri!(slice_arg(y, len, "y"));
        match pearson(x, y) {
            Ok(r) => {
                *out = r;
                DsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Band of a correlation coefficient: above `threshold` positive, below
/// `-threshold` negative, otherwise uncorrelated.
#[no_mangle]
pub extern "C" fn ds_classify(r: f64, threshold: f64) -> DsClass {
    match classify_candidate(r, threshold) {
        CandidateClass::Positive => DsClass::Positive,
        CandidateClass::Negative => DsClass::Negative,
        CandidateClass::Uncorrelated => DsClass::Uncorrelated,
    }
}

/// TF-IDF weight `(1 + ln raw) * ln(docs / df)`. Returns
/// `DS_STATUS_UNDEFINED` when the term is absent.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ds_tfidf(
    raw_count: u64,
    doc_freq: u64,
    doc_count: u64,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return fail(DsStatus::NullPointer, "out is null");
        }
        if doc_freq > doc_count || (raw_count > 0) != (doc_freq > 0) || raw_count < doc_freq {
            return fail(DsStatus::InvalidArgument, "inconsistent counts");
        }
        match tfidf(raw_count, doc_freq, doc_count) {
            Some(v) => {
                *out = v;
                DsStatus::Ok
            }
            None => fail(DsStatus::Undefined, "term absent from snapshot"),
        }
    })
}
