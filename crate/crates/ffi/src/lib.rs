//! C ABI over the kgalign library.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free` function. Every fallible call returns a [`KgaStatus`];
//! on failure [`kga_last_error_message`] describes the error on the calling
//! thread. Strings returned as `char *` must be released with
//! [`kga_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kgalign::datasets::{self, isomorphic_cycles, DatasetDescriptor, DatasetFamily};
use kgalign::evaluation::DirectionMetrics;
use kgalign::runner::run::execute;
use kgalign::runner::{run_single, RunConfig, RunReport};
use kgalign::{Error, GraphPair};

/// Result code of every fallible call; `KGA_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Dataset = 4,
    Io = 5,
    Numeric = 6,
    Shape = 7,
    InvalidInput = 8,
    Serialization = 9,
    Panic = 10,
}

impl From<&Error> for KgaStatus {
    fn from(e: &Error) -> Self {
        match e.category() {
            "config" => KgaStatus::Config,
            "dataset" => KgaStatus::Dataset,
            "io" => KgaStatus::Io,
            "numeric" => KgaStatus::Numeric,
            "shape" => KgaStatus::Shape,
            "serialization" => KgaStatus::Serialization,
            _ => KgaStatus::InvalidInput,
        }
    }
}

/// Alignment direction of a metrics query.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgaDirection {
    LeftToRight = 0,
    RightToLeft = 1,
    Mean = 2,
}

/// Size of one graph of a pair.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KgaSideStatistics {
    pub triples: usize,
    pub entities: usize,
    pub relations: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KgaStatistics {
    pub left: KgaSideStatistics,
    pub right: KgaSideStatistics,
    pub alignments: usize,
}

/// Ranking metrics; hits are percentages, MRR is in [0, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KgaMetrics {
    pub n_queries: usize,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
    pub hits_at_50: f64,
    pub mean_rank: f64,
    pub mrr: f64,
}

/// A loaded graph pair.
pub struct KgaPair {
    inner: GraphPair,
}

/// A parsed run configuration.
pub struct KgaConfig {
    inner: RunConfig,
}

/// The report of a finished run.
pub struct KgaReport {
    inner: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(KgaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(KgaStatus::from(&e), e.to_string())
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KgaStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KgaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            KgaStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(KgaStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(KgaStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(KgaStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(KgaStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn kga_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kga_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a benchmark pair from `root` (a `<family>/<subset>` directory).
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kga_pair_load(
    family: *const c_char,
    subset: *const c_char,
    root: *const c_char,
    out: *mut *mut KgaPair,
) -> KgaStatus {
    guard(|| {
        let family: DatasetFamily = str_arg(family, "family")?.parse()?;
        let desc = DatasetDescriptor::new(
            family,
            str_arg(subset, "subset")?,
            PathBuf::from(str_arg(root, "root")?),
        )?;
        let pair = datasets::load(&desc)?;
        write_out(out, Box::into_raw(Box::new(KgaPair { inner: pair })))
    })
}

/// Two identical `nodes`-cycles with `seeds` train alignments.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kga_pair_toy_cycles(nodes: usize, seeds: usize, out: *mut *mut KgaPair) -> KgaStatus {
    guard(|| {
        if nodes == 0 {
            return Err(Failure(KgaStatus::InvalidInput, "nodes must be positive".into()));
        }
        let pair = isomorphic_cycles(nodes, seeds);
        write_out(out, Box::into_raw(Box::new(KgaPair { inner: pair })))
    })
}

/// # Safety
/// `pair` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kga_pair_statistics(pair: *const KgaPair, out: *mut KgaStatistics) -> KgaStatus {
    guard(|| {
        let s = datasets::statistics(&ref_arg(pair, "pair")?.inner);
        let side = |x: datasets::SideStatistics| KgaSideStatistics {
            triples: x.triples,
            entities: x.entities,
            relations: x.relations,
        };
        write_out(
            out,
            KgaStatistics {
                left: side(s.left),
                right: side(s.right),
                alignments: s.alignments,
            },
        )
    })
}

/// # Safety
/// `pair` must come from this library (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kga_pair_free(pair: *mut KgaPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Parses a `key = value` run configuration.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kga_config_parse(text: *const c_char, out: *mut *mut KgaConfig) -> KgaStatus {
    guard(|| {
        let cfg = RunConfig::parse(str_arg(text, "text")?)?;
        write_out(out, Box::into_raw(Box::new(KgaConfig { inner: cfg })))
    })
}

/// Full resolved config text; free with [`kga_string_free`].
///
/// # Safety
/// `config` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn kga_config_to_text(config: *const KgaConfig) -> *mut c_char {
    match config.as_ref() {
        Some(c) => to_c_string(c.inner.to_text()),
        None => ptr::null_mut(),
    }
}

/// Content hash naming the run directory; free with [`kga_string_free`].
///
/// # Safety
/// `config` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn kga_config_run_id(config: *const KgaConfig) -> *mut c_char {
    match config.as_ref() {
        Some(c) => to_c_string(c.inner.run_id()),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `config` must come from this library (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kga_config_free(config: *mut KgaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Trains and evaluates. With `persist` non-zero the artifacts are written
/// under the config's output directory. `data_root` may be NULL.
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kga_run(
    config: *const KgaConfig,
    data_root: *const c_char,
    persist: i32,
    out: *mut *mut KgaReport,
) -> KgaStatus {
    guard(|| {
        let cfg = &ref_arg(config, "config")?.inner;
        let root = opt_str_arg(data_root, "data_root")?.map(PathBuf::from);
        let result = if persist != 0 {
            run_single(cfg, root.as_deref())?
        } else {
            execute(cfg, root.as_deref())?
        };
        write_out(out, Box::into_raw(Box::new(KgaReport { inner: result.report })))
    })
}

fn metrics(m: &DirectionMetrics) -> KgaMetrics {
    KgaMetrics {
        n_queries: m.n_queries,
        hits_at_1: m.hits(1),
        hits_at_10: m.hits(10),
        hits_at_50: m.hits(50),
        mean_rank: m.mean_rank,
        mrr: m.mrr,
    }
}

/// Test-split metrics of one direction.
///
/// # Safety
/// `report` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kga_report_test_metrics(
    report: *const KgaReport,
    direction: KgaDirection,
    out: *mut KgaMetrics,
) -> KgaStatus {
    guard(|| {
        let t = &ref_arg(report, "report")?.inner.test;
        let m = match direction {
            KgaDirection::LeftToRight => &t.left_to_right,
            KgaDirection::RightToLeft => &t.right_to_left,
            KgaDirection::Mean => &t.mean,
        };
        write_out(out, metrics(m))
    })
}

/// The whole report as JSON; free with [`kga_string_free`].
///
/// # Safety
/// `report` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn kga_report_json(report: *const KgaReport) -> *mut c_char {
    match report.as_ref().map(|r| serde_json::to_string(&r.inner)) {
        Some(Ok(s)) => to_c_string(s),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `report` must come from this library (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kga_report_free(report: *mut KgaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be a string returned by this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn kga_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
