//! C ABI over `cavqa`.
//!
//! Datasets and models are opaque heap handles released with their `_free`
//! function. Every entry point returns a [`CavqaStatus`]; on failure,
//! [`cavqa_last_error`] describes the most recent error on the calling
//! thread. Model handles must stay on the thread that created them.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cavqa::checkpoint::Checkpoint;
use cavqa::data::{export_dataset, generate_dataset, import_dataset, Dataset, DatasetConfig};
use cavqa::model::{Example, VqaModel};
use cavqa::train::{evaluate_split, train, TrainConfig};
use cavqa::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CavqaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Divergence = 5,
    Panic = 6,
}

/// Opaque dataset handle.
pub struct CavqaDataset {
    inner: Dataset,
}

/// Opaque model handle. Use it only from the thread that created it.
pub struct CavqaModel {
    model: VqaModel,
    checkpoint: Checkpoint,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavqaTrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub seed: u64,
    pub cross_attention: bool,
    pub infomax: bool,
}

impl From<&TrainConfig> for CavqaTrainOptions {
    fn from(c: &TrainConfig) -> Self {
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            lambda: c.lambda,
            seed: c.seed,
            cross_attention: c.cross_attention,
            infomax: c.infomax,
        }
    }
}

impl From<&CavqaTrainOptions> for TrainConfig {
    fn from(o: &CavqaTrainOptions) -> Self {
        Self {
            epochs: o.epochs,
            batch_size: o.batch_size,
            learning_rate: o.learning_rate,
            lambda: o.lambda,
            seed: o.seed,
            cross_attention: o.cross_attention,
            infomax: o.infomax,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CavqaMetrics {
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub n_samples: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(CavqaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => CavqaStatus::Io,
            Error::Divergence { .. } => CavqaStatus::Divergence,
            Error::Config(_) => CavqaStatus::InvalidArgument,
            _ => CavqaStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CavqaStatus::InvalidArgument, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CavqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CavqaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            CavqaStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| Failure(CavqaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| Failure(CavqaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string(ptr: *const c_char, what: &str) -> Result<String, Failure> {
    if ptr.is_null() {
        return Err(Failure(CavqaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cavqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread; empty after a
/// success. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn cavqa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Generates a dataset from a named preset (`lr_like` or `hr_like`).
/// `n_samples == 0` keeps the preset's size.
///
/// # Safety
/// `preset` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cavqa_dataset_generate(
    preset: *const c_char,
    n_samples: usize,
    seed: u64,
    out: *mut *mut CavqaDataset,
) -> CavqaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mut cfg = match string(preset, "preset")?.as_str() {
            "lr_like" => DatasetConfig::lr_like(),
            "hr_like" => DatasetConfig::hr_like(),
            other => return Err(invalid(format!("unknown preset `{other}`"))),
        };
        if n_samples > 0 {
            cfg.n_samples = n_samples;
        }
        cfg.seed = seed;
        let inner = generate_dataset(&cfg)?;
        *out = Box::into_raw(Box::new(CavqaDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cavqa_dataset_load(
    path: *const c_char,
    out: *mut *mut CavqaDataset,
) -> CavqaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let inner = import_dataset(PathBuf::from(string(path, "path")?))?;
        *out = Box::into_raw(Box::new(CavqaDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cavqa_dataset_save(
    dataset: *const CavqaDataset,
    path: *const c_char,
) -> CavqaStatus {
    guard(|| {
        let ds = deref(dataset, "dataset")?;
        export_dataset(&ds.inner, PathBuf::from(string(path, "path")?))?;
        Ok(())
    })
}

/// Number of samples, optionally restricted to one split (`split` may be null).
///
/// # Safety
/// `dataset` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cavqa_dataset_len(
    dataset: *const CavqaDataset,
    split: *const c_char,
    out: *mut usize,
) -> CavqaStatus {
    guard(|| {
        let ds = deref(dataset, "dataset")?;
        let out = out_ptr(out, "out")?;
        *out = if split.is_null() {
            ds.inner.samples.len()
        } else {
            ds.inner.split(&string(split, "split")?).len()
        };
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cavqa_dataset_free(dataset: *mut CavqaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fills `out` with a named training preset (`lr_like`, `hr_like` or `desk`).
///
/// # Safety
/// `preset` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cavqa_train_options_preset(
    preset: *const c_char,
    out: *mut CavqaTrainOptions,
) -> CavqaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = CavqaTrainOptions::from(&TrainConfig::preset(&string(preset, "preset")?)?);
        Ok(())
    })
}

/// Trains on the dataset's first split.
///
/// # Safety
/// Pointers must be valid; `dataset` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cavqa_model_train(
    dataset: *const CavqaDataset,
    options: *const CavqaTrainOptions,
    out: *mut *mut CavqaModel,
) -> CavqaStatus {
    guard(|| {
        let ds = deref(dataset, "dataset")?;
        let cfg = TrainConfig::from(deref(options, "options")?);
        let out = out_ptr(out, "out")?;
        let outcome = train(&cfg, &ds.inner)?;
        let checkpoint = Checkpoint::from_outcome(&outcome);
        *out = Box::into_raw(Box::new(CavqaModel {
            model: outcome.model,
            checkpoint,
        }));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cavqa_model_load(
    path: *const c_char,
    out: *mut *mut CavqaModel,
) -> CavqaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let checkpoint = Checkpoint::load(PathBuf::from(string(path, "path")?))?;
        let model = checkpoint.to_model()?;
        *out = Box::into_raw(Box::new(CavqaModel { model, checkpoint }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cavqa_model_save(
    model: *const CavqaModel,
    path: *const c_char,
) -> CavqaStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let mut ckpt = Checkpoint::from_model(&m.model, m.checkpoint.seed, m.checkpoint.steps);
        ckpt.train = m.checkpoint.train.clone();
        ckpt.metrics = m.checkpoint.metrics.clone();
        ckpt.save(PathBuf::from(string(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid; handles must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cavqa_model_evaluate(
    model: *const CavqaModel,
    dataset: *const CavqaDataset,
    split: *const c_char,
    out: *mut CavqaMetrics,
) -> CavqaStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let ds = deref(dataset, "dataset")?;
        let out = out_ptr(out, "out")?;
        let metrics = evaluate_split(&m.model, &ds.inner, &string(split, "split")?)?;
        *out = CavqaMetrics {
            overall_accuracy: metrics.overall_accuracy,
            average_accuracy: metrics.average_accuracy,
            n_samples: metrics.n_samples,
        };
        Ok(())
    })
}

/// Predicted answer index for sample `index` of the dataset.
///
/// # Safety
/// Pointers must be valid; handles must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cavqa_model_predict(
    model: *const CavqaModel,
    dataset: *const CavqaDataset,
    index: usize,
    out: *mut usize,
) -> CavqaStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let ds = deref(dataset, "dataset")?;
        let out = out_ptr(out, "out")?;
        let sample = ds
            .inner
            .samples
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range")))?;
        let ex = Example::from_sample(sample, &m.model.config.embedding)?;
        *out = m.model.predict(&[&ex])?[0];
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cavqa_model_free(model: *mut CavqaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
