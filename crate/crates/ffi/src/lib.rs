//! C ABI over the synthfsod library.
//!
//! Every fallible call returns an [`SfStatus`]; on failure the message is
//! available from [`sf_last_error_message`] on the same thread until the
//! next failing call. Handles are opaque and owned by the caller once
//! returned; release them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use synthfsod::compositor::{min_enclosing_box, BinaryMask};
use synthfsod::filter::clip_scores;
use synthfsod::geometry::Rect;
use synthfsod::prompts::{generate_prompts, PromptScheme};
use synthfsod::selector::{select, SelectionConfig, SelectionInputs, Strategy};
use synthfsod::{EmbeddingMatrix, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MalformedHeader = 3,
    TruncatedData = 4,
    NonFiniteValue = 5,
    ZeroNormRow = 6,
    DimMismatch = 7,
    PoolTooSmall = 8,
    ClusteringFailed = 9,
    EmptyMask = 10,
    Io = 11,
    BufferTooSmall = 12,
    Internal = 13,
    Panic = 14,
}

/// Opaque embedding matrix.
pub struct SfEmbeddings {
    inner: EmbeddingMatrix,
}

/// Axis-aligned box in pixel coordinates, half-open.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfRect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// Integer box, half-open: `[x_min, x_max) × [y_min, y_max)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SfBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::MalformedHeader(_) => SfStatus::MalformedHeader,
            Error::TruncatedData { .. } => SfStatus::TruncatedData,
            Error::NonFiniteValue { .. } => SfStatus::NonFiniteValue,
            Error::ZeroNormRow(_) => SfStatus::ZeroNormRow,
            Error::DimMismatch { .. } | Error::AlignmentMismatch { .. } => SfStatus::DimMismatch,
            Error::PoolTooSmall { .. } => SfStatus::PoolTooSmall,
            Error::EmptyCluster(_) | Error::DegenerateAffinity(_) | Error::Eigensolver(_) => SfStatus::ClusteringFailed,
            Error::EmptyMask => SfStatus::EmptyMask,
            Error::Io { .. } | Error::MissingAsset(_) => SfStatus::Io,
            Error::ConfigInvalid(_) | Error::IndexOutOfRange { .. } => SfStatus::InvalidArgument,
            _ => SfStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: SfStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside synthfsod".into());
            SfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a>(p: *const SfEmbeddings, what: &str) -> Result<&'a EmbeddingMatrix, Failure> {
    p.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| fail(SfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(SfStatus::NullPointer, format!("{what} is null")))
}

fn boxed(m: EmbeddingMatrix) -> *mut SfEmbeddings {
    Box::into_raw(Box::new(SfEmbeddings { inner: m }))
}

/// Message of the last failure on this thread, or NULL. Owned by the
/// library; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load an EMB1 file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_embeddings_load(path: *const c_char, out: *mut *mut SfEmbeddings) -> SfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(EmbeddingMatrix::load(Path::new(path))?);
        Ok(())
    })
}

/// Copy `count * dim` row-major floats into a new matrix.
///
/// # Safety
/// `data` must point to `count * dim` readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_embeddings_from_data(
    data: *const f32,
    count: usize,
    dim: usize,
    out: *mut *mut SfEmbeddings,
) -> SfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = count
            .checked_mul(dim)
            .ok_or_else(|| fail(SfStatus::InvalidArgument, "count * dim overflows"))?;
        let values = if len == 0 {
            Vec::new()
        } else if data.is_null() {
            return Err(fail(SfStatus::NullPointer, "data is null"));
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        *out = boxed(EmbeddingMatrix::new(count, dim, values)?);
        Ok(())
    })
}

/// Release a matrix. NULL is a no-op.
///
/// # Safety
/// `m` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_embeddings_free(m: *mut SfEmbeddings) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Row count, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_embeddings_count(m: *const SfEmbeddings) -> usize {
    m.as_ref().map_or(0, |h| h.inner.count())
}

/// Column count, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_embeddings_dim(m: *const SfEmbeddings) -> usize {
    m.as_ref().map_or(0, |h| h.inner.dim())
}

/// Row-major values, borrowed from the handle. NULL for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle; the pointer dies with it.
#[no_mangle]
pub unsafe extern "C" fn sf_embeddings_data(m: *const SfEmbeddings) -> *const f32 {
    m.as_ref().map_or(std::ptr::null(), |h| h.inner.data().as_ptr())
}

/// New matrix with every row scaled to unit L2 norm.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_embeddings_normalize(m: *const SfEmbeddings, out: *mut *mut SfEmbeddings) -> SfStatus {
    guard(|| {
        let m = handle(m, "matrix")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(m.l2_normalize()?);
        Ok(())
    })
}

fn unit(m: &EmbeddingMatrix) -> Result<std::borrow::Cow<'_, EmbeddingMatrix>, Failure> {
    if m.is_normalized() {
        Ok(std::borrow::Cow::Borrowed(m))
    } else {
        Ok(std::borrow::Cow::Owned(m.l2_normalize()?))
    }
}

/// Pick `g` candidate rows with the named strategy (`random`, `syn-max`,
/// `clip-max`, `instance-max`, `clip-uniform`, `instance-uniform`,
/// `kmeans-cluster`, `spectral-cluster`). `real` and `clip_scores` may be
/// NULL when the strategy does not need them. `k == 0` means `k = g`.
/// Writes the chosen row indices to `out_indices` and their number to
/// `out_len`; fails with `BUFFER_TOO_SMALL` (and sets `out_len`) when
/// `capacity < g`.
///
/// # Safety
/// Handles must be live or NULL as documented; `clip_scores` must hold
/// `n_scores` doubles; `out_indices` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn sf_select(
    generated: *const SfEmbeddings,
    real: *const SfEmbeddings,
    clip_scores: *const f64,
    n_scores: usize,
    strategy: *const c_char,
    g: usize,
    k: usize,
    seed: u64,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> SfStatus {
    guard(|| {
        let generated = unit(handle(generated, "generated")?)?;
        let real = match real.as_ref() {
            Some(h) => Some(unit(&h.inner)?),
            None => None,
        };
        let scores = if clip_scores.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(clip_scores, n_scores))
        };
        let strategy: Strategy = str_arg(strategy, "strategy")?.parse()?;
        let out_len = out_ptr(out_len, "out_len")?;
        if capacity < g {
            *out_len = g;
            return Err(fail(SfStatus::BufferTooSmall, format!("need room for {g} indices, have {capacity}")));
        }
        if out_indices.is_null() && g > 0 {
            return Err(fail(SfStatus::NullPointer, "out_indices is null"));
        }
        let cfg = SelectionConfig {
            strategy,
            g,
            k: (k > 0).then_some(k),
            seed,
            ..SelectionConfig::default()
        };
        let result = select(
            SelectionInputs {
                category: "",
                generated: &generated,
                real: real.as_deref(),
                clip_scores: scores,
            },
            &cfg,
        )?;
        for (i, &idx) in result.indices.iter().enumerate() {
            *out_indices.add(i) = idx;
        }
        *out_len = result.indices.len();
        Ok(())
    })
}

/// Softmax over cosine(crop, text_j) / temperature, one probability per
/// text row, written to `out` (which must hold `sf_embeddings_count(texts)`).
///
/// # Safety
/// `crop` must hold `dim` floats; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_clip_scores(
    crop: *const f32,
    dim: usize,
    texts: *const SfEmbeddings,
    temperature: f64,
    out: *mut f64,
    capacity: usize,
) -> SfStatus {
    guard(|| {
        let texts = handle(texts, "texts")?;
        if crop.is_null() || out.is_null() {
            return Err(fail(SfStatus::NullPointer, "crop or out is null"));
        }
        if capacity < texts.count() {
            return Err(fail(
                SfStatus::BufferTooSmall,
                format!("need room for {} scores, have {capacity}", texts.count()),
            ));
        }
        let crop = std::slice::from_raw_parts(crop, dim);
        let probs = clip_scores(crop, texts, temperature)?;
        std::ptr::copy_nonoverlapping(probs.as_ptr(), out, probs.len());
        Ok(())
    })
}

/// Intersection over union of two boxes; 0 when the union is empty.
#[no_mangle]
pub extern "C" fn sf_iou(a: SfRect, b: SfRect) -> f64 {
    let r = |r: SfRect| Rect {
        x_min: r.x_min,
        y_min: r.y_min,
        x_max: r.x_max,
        y_max: r.y_max,
    };
    r(a).iou(&r(b))
}

/// Tightest box around pixels with value >= `threshold` in a row-major
/// 8-bit mask. Fails with `EMPTY_MASK` when no pixel qualifies.
///
/// # Safety
/// `mask` must hold `width * height` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_min_enclosing_box(
    mask: *const u8,
    width: u32,
    height: u32,
    threshold: u8,
    out: *mut SfBox,
) -> SfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = width as usize * height as usize;
        if mask.is_null() && len > 0 {
            return Err(fail(SfStatus::NullPointer, "mask is null"));
        }
        let px = if len == 0 { &[][..] } else { std::slice::from_raw_parts(mask, len) };
        let bin = BinaryMask::from_fn(width, height, |x, y| px[(y * width + x) as usize] >= threshold);
        let b = min_enclosing_box(&bin)?;
        *out = SfBox {
            x_min: b.x_min,
            y_min: b.y_min,
            x_max: b.x_max,
            y_max: b.y_max,
        };
        Ok(())
    })
}

/// Prompts for one category under a scheme (`none`, `a`, `one`, `a5`,
/// `one5`, `real`, `adj`), newline-separated. Free with [`sf_string_free`].
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_prompts(category: *const c_char, scheme: *const c_char, out: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let category = str_arg(category, "category")?;
        let scheme: PromptScheme = str_arg(scheme, "scheme")?.parse()?;
        let out = out_ptr(out, "out")?;
        let joined = generate_prompts(category, scheme)?.join("\n");
        *out = CString::new(joined)
            .map_err(|_| fail(SfStatus::InvalidArgument, "prompt contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// Release a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
