//! C ABI over the `mercat` library.
//!
//! Data matrices and embeddings live behind opaque handles that the caller
//! frees with the matching `*_free` function. Every entry point returns a
//! [`MercatStatus`]; on failure a description is available from
//! [`mercat_last_error`] on the same thread until the next failing call.
//! Panics are caught at the boundary and reported as
//! [`MercatStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use mercat::metrics::{evaluate, MetricsConfig};
use mercat::trainer::{fit, IterationRecord, IterationUnit, MomentMode, RankRule, TrainConfig};
use mercat::{DataMatrix, LossSpace, MercatError, SphereEmbedding, SpherePoint};

/// Result code of every call. The nonzero codes group errors the same way
/// the command-line tool's exit codes do.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MercatStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid configuration or dimensions.
    InvalidConfig = 2,
    /// Invalid or degenerate input data.
    InvalidInput = 3,
    /// A numerical failure during computation.
    Numerical = 4,
    /// A panic was caught at the boundary; the library state is unaffected
    /// but the call produced nothing.
    Panic = 5,
}

impl From<&MercatError> for MercatStatus {
    fn from(e: &MercatError) -> Self {
        match e.exit_code() {
            2 => MercatStatus::InvalidConfig,
            3 => MercatStatus::InvalidInput,
            _ => MercatStatus::Numerical,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    // interior NULs cannot cross into C
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn fail(status: MercatStatus, message: impl Into<String>) -> MercatStatus {
    set_last_error(message.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), MercatStatus>) -> MercatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MercatStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(MercatStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check<T>(r: mercat::Result<T>) -> Result<T, MercatStatus> {
    r.map_err(|e| fail(MercatStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), MercatStatus> {
    if p.is_null() {
        Err(fail(MercatStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mercat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mercat_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Opaque row-major data matrix.
pub struct MercatData {
    inner: DataMatrix,
}

/// Opaque sphere embedding together with the loss trace that produced it
/// (empty for embeddings built from coordinates).
pub struct MercatEmbedding {
    embedding: SphereEmbedding,
    trace: Vec<IterationRecord>,
    rank: usize,
}

/// Copies `n * d` row-major values into a new data handle.
///
/// # Safety
/// `values` must point to `n * d` readable doubles and `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mercat_data_new(
    values: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut MercatData,
) -> MercatStatus {
    guard(|| {
        non_null(values, "values")?;
        non_null(out, "out")?;
        let len = n
            .checked_mul(d)
            .ok_or_else(|| fail(MercatStatus::InvalidConfig, "n * d overflows"))?;
        let copy = slice::from_raw_parts(values, len).to_vec();
        let inner = check(DataMatrix::new(copy, n, d))?;
        *out = Box::into_raw(Box::new(MercatData { inner }));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a handle from [`mercat_data_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mercat_data_free(data: *mut MercatData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Training options. Obtain defaults from [`mercat_train_options_default`]
/// and change fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MercatTrainOptions {
    /// Denoising rank; 0 selects the rule given by `rank_threshold`.
    pub rank: usize,
    /// When `rank` is 0: nonzero picks the rank by hard singular-value
    /// thresholding, zero uses `min(50, n, d)`.
    pub rank_threshold: u8,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Iterations at which the step size is multiplied by `schedule_factor`;
    /// may be null when `milestone_count` is 0.
    pub milestones: *const usize,
    pub milestone_count: usize,
    pub schedule_factor: f64,
    pub batch_size: usize,
    pub subsample: usize,
    pub seed: u64,
    /// Nonzero compares angles instead of their cosines.
    pub angle_loss: u8,
    /// Nonzero updates every point's moment estimates each step.
    pub dense_moments: u8,
    /// Nonzero makes one iteration a single batch step instead of a full
    /// pass over the anchors.
    pub batch_iterations: u8,
}

const DEFAULT_MILESTONES: [usize; 1] = [350];

#[no_mangle]
pub extern "C" fn mercat_train_options_default() -> MercatTrainOptions {
    let cfg = TrainConfig::default();
    debug_assert_eq!(cfg.schedule_milestones, DEFAULT_MILESTONES);
    MercatTrainOptions {
        rank: 0,
        rank_threshold: 0,
        iterations: cfg.iterations,
        learning_rate: cfg.learning_rate,
        milestones: DEFAULT_MILESTONES.as_ptr(),
        milestone_count: DEFAULT_MILESTONES.len(),
        schedule_factor: cfg.schedule_factor,
        batch_size: cfg.batch_size,
        subsample: cfg.subsample_m,
        seed: cfg.seed,
        angle_loss: 0,
        dense_moments: 0,
        batch_iterations: 0,
    }
}

unsafe fn train_config(o: &MercatTrainOptions) -> Result<TrainConfig, MercatStatus> {
    let milestones = if o.milestone_count == 0 {
        Vec::new()
    } else {
        non_null(o.milestones, "milestones")?;
        slice::from_raw_parts(o.milestones, o.milestone_count).to_vec()
    };
    Ok(TrainConfig {
        rank: (o.rank > 0).then_some(o.rank),
        rank_rule: if o.rank_threshold != 0 {
            RankRule::Threshold
        } else {
            RankRule::Cap
        },
        iterations: o.iterations,
        learning_rate: o.learning_rate,
        schedule_milestones: milestones,
        schedule_factor: o.schedule_factor,
        batch_size: o.batch_size,
        subsample_m: o.subsample,
        seed: o.seed,
        loss_space: if o.angle_loss != 0 {
            LossSpace::Angle
        } else {
            LossSpace::Cosine
        },
        moments: if o.dense_moments != 0 {
            MomentMode::Dense
        } else {
            MomentMode::Sparse
        },
        iteration_unit: if o.batch_iterations != 0 {
            IterationUnit::Batch
        } else {
            IterationUnit::Epoch
        },
        ..TrainConfig::default()
    })
}

/// Fits an embedding of `data`. `options` may be null for the defaults.
///
/// # Safety
/// `data` must be a live data handle, `options` null or valid, and `out`
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mercat_fit(
    data: *const MercatData,
    options: *const MercatTrainOptions,
    out: *mut *mut MercatEmbedding,
) -> MercatStatus {
    guard(|| {
        non_null(data, "data")?;
        non_null(out, "out")?;
        let opts = if options.is_null() {
            mercat_train_options_default()
        } else {
            *options
        };
        let cfg = train_config(&opts)?;
        let report = check(fit(&(*data).inner, &cfg))?;
        *out = Box::into_raw(Box::new(MercatEmbedding {
            embedding: report.final_embedding,
            trace: report.loss_trace,
            rank: report.rank,
        }));
        Ok(())
    })
}

/// Builds an embedding from `n` (colatitude, azimuth) pairs in radians.
///
/// # Safety
/// `angles` must point to `2 * n` readable doubles and `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mercat_embedding_from_angles(
    angles: *const f64,
    n: usize,
    out: *mut *mut MercatEmbedding,
) -> MercatStatus {
    guard(|| {
        non_null(angles, "angles")?;
        non_null(out, "out")?;
        let len = n
            .checked_mul(2)
            .ok_or_else(|| fail(MercatStatus::InvalidConfig, "2 * n overflows"))?;
        let raw = slice::from_raw_parts(angles, len);
        let points = raw
            .chunks_exact(2)
            .map(|p| SpherePoint::new(p[0], p[1]))
            .collect();
        let embedding = check(SphereEmbedding::new(points))?;
        *out = Box::into_raw(Box::new(MercatEmbedding {
            embedding,
            trace: Vec::new(),
            rank: 0,
        }));
        Ok(())
    })
}

/// # Safety
/// `embedding` must be null or a live embedding handle.
#[no_mangle]
pub unsafe extern "C" fn mercat_embedding_free(embedding: *mut MercatEmbedding) {
    if !embedding.is_null() {
        drop(Box::from_raw(embedding));
    }
}

/// Number of embedded points; 0 for a null handle.
///
/// # Safety
/// `embedding` must be null or a live embedding handle.
#[no_mangle]
pub unsafe extern "C" fn mercat_embedding_len(embedding: *const MercatEmbedding) -> usize {
    embedding.as_ref().map_or(0, |e| e.embedding.len())
}

/// Denoising rank used by the fit; 0 for embeddings built from angles.
///
/// # Safety
/// `embedding` must be null or a live embedding handle.
#[no_mangle]
pub unsafe extern "C" fn mercat_embedding_rank(embedding: *const MercatEmbedding) -> usize {
    embedding.as_ref().map_or(0, |e| e.rank)
}

/// Writes `capacity >= 2 * len` doubles: (colatitude, azimuth) per point.
///
/// # Safety
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mercat_embedding_angles(
    embedding: *const MercatEmbedding,
    out: *mut f64,
    capacity: usize,
) -> MercatStatus {
    guard(|| {
        let e = embedding_ref(embedding)?;
        let dst = output(out, capacity, 2 * e.embedding.len())?;
        for (chunk, p) in dst.chunks_exact_mut(2).zip(&e.embedding.points) {
            chunk[0] = p.phi;
            chunk[1] = p.theta;
        }
        Ok(())
    })
}

/// Writes `capacity >= 3 * len` doubles: unit-vector coordinates per point.
///
/// # Safety
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mercat_embedding_unit_vectors(
    embedding: *const MercatEmbedding,
    out: *mut f64,
    capacity: usize,
) -> MercatStatus {
    guard(|| {
        let e = embedding_ref(embedding)?;
        let dst = output(out, capacity, 3 * e.embedding.len())?;
        for (chunk, v) in dst.chunks_exact_mut(3).zip(e.embedding.unit_vectors()) {
            chunk.copy_from_slice(v.as_slice());
        }
        Ok(())
    })
}

/// Number of recorded iterations in the loss trace.
///
/// # Safety
/// `embedding` must be null or a live embedding handle.
#[no_mangle]
pub unsafe extern "C" fn mercat_embedding_trace_len(embedding: *const MercatEmbedding) -> usize {
    embedding.as_ref().map_or(0, |e| e.trace.len())
}

/// Writes the per-iteration loss (root mean square difference) into
/// `capacity >= trace_len` doubles.
///
/// # Safety
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mercat_embedding_loss_trace(
    embedding: *const MercatEmbedding,
    out: *mut f64,
    capacity: usize,
) -> MercatStatus {
    guard(|| {
        let e = embedding_ref(embedding)?;
        let dst = output(out, capacity, e.trace.len())?;
        for (slot, r) in dst.iter_mut().zip(&e.trace) {
            *slot = r.loss.value;
        }
        Ok(())
    })
}

unsafe fn embedding_ref<'a>(
    p: *const MercatEmbedding,
) -> Result<&'a MercatEmbedding, MercatStatus> {
    non_null(p, "embedding")?;
    Ok(&*p)
}

unsafe fn output<'a>(
    out: *mut f64,
    capacity: usize,
    needed: usize,
) -> Result<&'a mut [f64], MercatStatus> {
    non_null(out, "out")?;
    if capacity < needed {
        return Err(fail(
            MercatStatus::InvalidConfig,
            format!("output buffer holds {capacity} values, {needed} needed"),
        ));
    }
    Ok(slice::from_raw_parts_mut(out, needed))
}

/// Quality-metric options; see [`mercat_metrics_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MercatMetricsOptions {
    pub k_nn: usize,
    pub density_nn: usize,
    pub angle_subsample: usize,
    pub seed: u64,
    /// Denoising rank for the neighbourhood score; 0 for `min(50, n, d)`.
    pub rank: usize,
    /// Nonzero measures data angles on the denoised scores.
    pub angle_on_denoised: u8,
}

#[no_mangle]
pub extern "C" fn mercat_metrics_options_default() -> MercatMetricsOptions {
    let cfg = MetricsConfig::default();
    MercatMetricsOptions {
        k_nn: cfg.k_nn,
        density_nn: cfg.density_nn,
        angle_subsample: cfg.angle_subsample,
        seed: cfg.seed,
        rank: 0,
        angle_on_denoised: 0,
    }
}

/// The four preservation scores, each a correlation or overlap in [-1, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MercatMetrics {
    pub angle: f64,
    pub distance: f64,
    pub neighborhood: f64,
    pub density: f64,
}

/// Scores how well `embedding` preserves the geometry of `data`.
/// `options` may be null for the defaults.
///
/// # Safety
/// `data` and `embedding` must be live handles, `options` null or valid,
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mercat_metrics(
    data: *const MercatData,
    embedding: *const MercatEmbedding,
    options: *const MercatMetricsOptions,
    out: *mut MercatMetrics,
) -> MercatStatus {
    guard(|| {
        non_null(data, "data")?;
        non_null(out, "out")?;
        let e = embedding_ref(embedding)?;
        let o = if options.is_null() {
            mercat_metrics_options_default()
        } else {
            *options
        };
        let cfg = MetricsConfig {
            k_nn: o.k_nn,
            density_nn: o.density_nn,
            angle_subsample: o.angle_subsample,
            seed: o.seed,
            rank: (o.rank > 0).then_some(o.rank),
            angle_on_denoised: o.angle_on_denoised != 0,
        };
        let r = check(evaluate(&(*data).inner, &e.embedding, &cfg))?;
        *out = MercatMetrics {
            angle: r.angle_preservation,
            distance: r.distance_preservation,
            neighborhood: r.neighborhood_preservation,
            density: r.density_preservation,
        };
        Ok(())
    })
}
