//! C ABI over `snm-core`.
//!
//! Every fallible function returns an [`SnmStatus`] and writes its result
//! through an out-pointer. On failure, [`snm_last_error`] returns a message
//! for the calling thread. Handles are opaque and must be released with the
//! matching `_free` function. Panics never cross the boundary; they surface
//! as [`SnmStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use snm_core::analysis::{
    asymptotic_average_outage, average_outage, conditional_outage, per_hop_subcarrier_outage,
    OutageQuery,
};
use snm_core::channel::{AllocationMode, Topology};
use snm_core::modem::{
    average_rate, codebook_size, decode_bits, encode, ml_detect, BitStream, Codebook, ModemError,
    ModulationParams,
};
use snm_core::montecarlo::{simulate, SimulationError, SimulationMode, SimulationPlan};
use snm_core::num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Overflow = 3,
    CodebookTooLarge = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnmAllocation {
    EqualPerNode = 0,
    TotalUniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnmMode {
    Threshold = 0,
    Exact = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SnmComplex {
    pub re: f64,
    pub im: f64,
}

impl From<SnmComplex> for Complex64 {
    fn from(c: SnmComplex) -> Self {
        Complex64::new(c.re, c.im)
    }
}

impl From<Complex64> for SnmComplex {
    fn from(c: Complex64) -> Self {
        SnmComplex { re: c.re, im: c.im }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SnmEstimate {
    pub probability: f64,
    pub trials: u64,
    pub failures: u64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Opaque outage query (topology and modulation).
pub struct SnmQuery {
    inner: OutageQuery,
}

/// Opaque materialized codebook.
pub struct SnmCodebook {
    inner: Codebook,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(SnmStatus, String);

impl From<ModemError> for Failure {
    fn from(e: ModemError) -> Self {
        let status = match e {
            ModemError::CodebookOverflow { .. } => SnmStatus::Overflow,
            ModemError::CodebookTooLarge { .. } => SnmStatus::CodebookTooLarge,
            _ => SnmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SimulationError> for Failure {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Modem(inner) => inner.into(),
            SimulationError::WorkerPool(_) => Failure(SnmStatus::Internal, e.to_string()),
            other => Failure(SnmStatus::InvalidArgument, other.to_string()),
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SnmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(SnmStatus::InvalidArgument, message.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SnmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SnmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SnmStatus::Internal
        }
    }
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn query<'a>(ptr: *const SnmQuery) -> Result<&'a OutageQuery, Failure> {
    ptr.as_ref().map(|q| &q.inner).ok_or_else(|| null("query"))
}

unsafe fn codebook<'a>(ptr: *const SnmCodebook) -> Result<&'a Codebook, Failure> {
    ptr.as_ref().map(|c| &c.inner).ok_or_else(|| null("codebook"))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Message describing the last failure on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn snm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn snm_status_message(status: SnmStatus) -> *const c_char {
    let text: &'static [u8] = match status {
        SnmStatus::Ok => b"ok\0",
        SnmStatus::NullPointer => b"null pointer argument\0",
        SnmStatus::InvalidArgument => b"invalid argument\0",
        SnmStatus::Overflow => b"integer overflow\0",
        SnmStatus::CodebookTooLarge => b"codebook too large\0",
        SnmStatus::BufferTooSmall => b"output buffer too small\0",
        SnmStatus::Internal => b"internal error\0",
    };
    text.as_ptr().cast()
}

/// Number of legitimate blocks for `n` subcarriers and `m`-PSK.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn snm_codebook_size(n: usize, m: usize, out_size: *mut u64) -> SnmStatus {
    guard(|| {
        let params = ModulationParams::new(n, m)?;
        *out(out_size, "out_size")? = codebook_size(&params)?;
        Ok(())
    })
}

/// Average rate in bits per channel use.
///
/// # Safety
/// `out_rate` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn snm_average_rate(n: usize, m: usize, out_rate: *mut f64) -> SnmStatus {
    guard(|| {
        let params = ModulationParams::new(n, m)?;
        *out(out_rate, "out_rate")? = average_rate(&params);
        Ok(())
    })
}

/// Creates a query over `hops` hops with the given distances.
///
/// `pt_over_n0` and `xi` are linear ratios.
///
/// # Safety
/// `distances` must point to `hops` doubles; `out_query` must be valid.
#[no_mangle]
pub unsafe extern "C" fn snm_query_new(
    n: usize,
    m: usize,
    distances: *const f64,
    hops: usize,
    alpha: f64,
    pt_over_n0: f64,
    xi: f64,
    allocation: SnmAllocation,
    out_query: *mut *mut SnmQuery,
) -> SnmStatus {
    guard(|| {
        let slot = out(out_query, "out_query")?;
        let params = ModulationParams::new(n, m)?;
        let distances = slice(distances, hops, "distances")?.to_vec();
        let allocation = match allocation {
            SnmAllocation::EqualPerNode => AllocationMode::EqualPerNode,
            SnmAllocation::TotalUniform => AllocationMode::TotalUniform,
        };
        let topology = Topology::new(distances, alpha, pt_over_n0, xi, allocation)
            .map_err(|e| invalid(e.to_string()))?;
        *slot = Box::into_raw(Box::new(SnmQuery {
            inner: OutageQuery::new(topology, params),
        }));
        Ok(())
    })
}

/// Releases a query. NULL is ignored.
///
/// # Safety
/// `query` must come from [`snm_query_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn snm_query_free(query: *mut SnmQuery) {
    if !query.is_null() {
        drop(Box::from_raw(query));
    }
}

/// Per-subcarrier outage of `hop` (0-based) with `active` subcarriers.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snm_per_hop_subcarrier_outage(
    q: *const SnmQuery,
    hop: usize,
    active: usize,
    out_probability: *mut f64,
) -> SnmStatus {
    guard(|| {
        let q = query(q)?;
        if hop >= q.topology.hops() {
            return Err(invalid(format!("hop {hop} out of range for L={}", q.topology.hops())));
        }
        check_active(q, active)?;
        *out(out_probability, "out_probability")? = per_hop_subcarrier_outage(q, hop, active);
        Ok(())
    })
}

fn check_active(q: &OutageQuery, active: usize) -> Result<(), Failure> {
    let n = q.params.subcarriers();
    if active == 0 || active > n {
        return Err(invalid(format!("active count {active} outside 1..={n}")));
    }
    Ok(())
}

/// End-to-end outage given `active` subcarriers.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snm_conditional_outage(
    q: *const SnmQuery,
    active: usize,
    out_probability: *mut f64,
) -> SnmStatus {
    guard(|| {
        let q = query(q)?;
        check_active(q, active)?;
        *out(out_probability, "out_probability")? = conditional_outage(q, active);
        Ok(())
    })
}

/// Closed-form average outage.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snm_average_outage(q: *const SnmQuery, out_probability: *mut f64) -> SnmStatus {
    guard(|| {
        let q = query(q)?;
        *out(out_probability, "out_probability")? = average_outage(q);
        Ok(())
    })
}

/// High-SNR average outage; `out_in_regime` is false when the value exceeds one.
///
/// # Safety
/// Pointers must be valid; `out_in_regime` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn snm_asymptotic_average_outage(
    q: *const SnmQuery,
    out_value: *mut f64,
    out_in_regime: *mut bool,
) -> SnmStatus {
    guard(|| {
        let q = query(q)?;
        let value = asymptotic_average_outage(q);
        *out(out_value, "out_value")? = value.value;
        if let Some(flag) = out_in_regime.as_mut() {
            *flag = value.in_regime;
        }
        Ok(())
    })
}

/// Monte Carlo outage estimate.
///
/// `workers == 0` uses the default thread pool.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snm_simulate(
    q: *const SnmQuery,
    trials: u64,
    seed: u64,
    mode: SnmMode,
    confidence_level: f64,
    workers: usize,
    out_estimate: *mut SnmEstimate,
) -> SnmStatus {
    guard(|| {
        let q = query(q)?;
        let slot = out(out_estimate, "out_estimate")?;
        let mode = match mode {
            SnmMode::Threshold => SimulationMode::Threshold,
            SnmMode::Exact => SimulationMode::Exact,
        };
        let mut plan = SimulationPlan::new(q.clone(), trials, seed, mode);
        plan.confidence_level = confidence_level;
        plan.workers = (workers > 0).then_some(workers);
        let estimate = simulate(&plan)?;
        *slot = SnmEstimate {
            probability: estimate.probability,
            trials: estimate.trials,
            failures: estimate.failures,
            std_error: estimate.std_error,
            ci_low: estimate.ci_low,
            ci_high: estimate.ci_high,
        };
        Ok(())
    })
}

/// Materializes the codebook for `n` subcarriers and `m`-PSK.
///
/// # Safety
/// `out_codebook` must be valid.
#[no_mangle]
pub unsafe extern "C" fn snm_codebook_new(n: usize, m: usize, out_codebook: *mut *mut SnmCodebook) -> SnmStatus {
    guard(|| {
        let slot = out(out_codebook, "out_codebook")?;
        let inner = Codebook::new(ModulationParams::new(n, m)?)?;
        *slot = Box::into_raw(Box::new(SnmCodebook { inner }));
        Ok(())
    })
}

/// Releases a codebook. NULL is ignored.
///
/// # Safety
/// `codebook` must come from [`snm_codebook_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn snm_codebook_free(codebook: *mut SnmCodebook) {
    if !codebook.is_null() {
        drop(Box::from_raw(codebook));
    }
}

/// Number of blocks, or 0 for NULL.
///
/// # Safety
/// `codebook` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn snm_codebook_len(codebook: *const SnmCodebook) -> usize {
    codebook.as_ref().map_or(0, |c| c.inner.len())
}

/// Maps `bits` (one 0/1 byte per bit) to a block.
///
/// Writes `N` symbols to `out_symbols` and the pattern index to `out_index`.
///
/// # Safety
/// `bits` must hold `bits_len` bytes, `out_symbols` room for `N` values.
#[no_mangle]
pub unsafe extern "C" fn snm_encode(
    cb: *const SnmCodebook,
    bits: *const u8,
    bits_len: usize,
    out_symbols: *mut SnmComplex,
    out_index: *mut usize,
) -> SnmStatus {
    guard(|| {
        let cb = codebook(cb)?;
        let raw = slice(bits, bits_len, "bits")?;
        let stream = raw
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(invalid(format!("bit value {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let block = encode(&BitStream::new(stream), cb.params())?;
        if out_symbols.is_null() {
            return Err(null("out_symbols"));
        }
        let symbols = std::slice::from_raw_parts_mut(out_symbols, block.subcarriers());
        for (slot, x) in symbols.iter_mut().zip(block.symbols()) {
            *slot = (*x).into();
        }
        *out(out_index, "out_index")? = block.index();
        Ok(())
    })
}

/// Writes the bit stream of block `index` into `out_bits` (one byte per bit).
///
/// `out_len` receives the stream length even when the buffer is too small.
///
/// # Safety
/// `out_bits` must have room for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn snm_decode(
    cb: *const SnmCodebook,
    index: usize,
    out_bits: *mut u8,
    capacity: usize,
    out_len: *mut usize,
) -> SnmStatus {
    guard(|| {
        let cb = codebook(cb)?;
        let block = cb
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} outside codebook of {} blocks", cb.len())))?;
        let bits = decode_bits(block, cb.params())?;
        *out(out_len, "out_len")? = bits.len();
        if capacity < bits.len() {
            return Err(Failure(
                SnmStatus::BufferTooSmall,
                format!("need {} bytes, buffer holds {capacity}", bits.len()),
            ));
        }
        if out_bits.is_null() {
            return Err(null("out_bits"));
        }
        let dst = std::slice::from_raw_parts_mut(out_bits, bits.len());
        for (slot, &b) in dst.iter_mut().zip(bits.bits()) {
            *slot = u8::from(b);
        }
        Ok(())
    })
}

/// Exhaustive ML detection; writes the detected pattern index.
///
/// # Safety
/// `received` and `channel` must each hold `len` values, with `len == N`.
#[no_mangle]
pub unsafe extern "C" fn snm_ml_detect(
    cb: *const SnmCodebook,
    received: *const SnmComplex,
    channel: *const SnmComplex,
    len: usize,
    power: f64,
    out_index: *mut usize,
) -> SnmStatus {
    guard(|| {
        let cb = codebook(cb)?;
        let n = cb.params().subcarriers();
        if len != n {
            return Err(invalid(format!("expected {n} subcarriers, got {len}")));
        }
        let y: Vec<Complex64> = slice(received, len, "received")?.iter().map(|&c| c.into()).collect();
        let h: Vec<Complex64> = slice(channel, len, "channel")?.iter().map(|&c| c.into()).collect();
        *out(out_index, "out_index")? = ml_detect(&y, &h, cb, power).index;
        Ok(())
    })
}
