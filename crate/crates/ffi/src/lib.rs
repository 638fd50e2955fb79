//! C ABI over `cesaro-lab`.
//!
//! Objects cross the boundary as opaque heap handles released by the
//! matching `*_free`. Fallible calls return a [`CesaroStatus`]; the message
//! of the last failure on the calling thread is available from
//! [`cesaro_last_error_message`]. Panics are caught and reported as
//! `CESARO_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cesaro_lab::circle::{fourier_coefficient, lp_norm, Norm, PcFunction, C64};
use cesaro_lab::dyadic::{cz_decompose, CzDecomposition};
use cesaro_lab::kernels;
use cesaro_lab::operators;
use cesaro_lab::sequences::{make_delta_growth, make_lacunary, IndexSequence};
use cesaro_lab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CesaroStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Hypothesis = 3,
    Singular = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

/// Piecewise-constant function on a dyadic grid.
pub struct CesaroPc(PcFunction);

/// Calderon-Zygmund decomposition at a fixed height.
pub struct CesaroCz(CzDecomposition);

/// Strictly increasing index sequence.
pub struct CesaroSeq(IndexSequence);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CesaroComplex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for CesaroComplex {
    fn from(z: C64) -> Self {
        CesaroComplex { re: z.re, im: z.im }
    }
}

/// Which operator [`cesaro_pc_eval`] applies.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CesaroOperator {
    PartialSum = 0,
    FejerMean = 1,
    ValleePoussinMean = 2,
    SvDifference = 3,
    ModifiedHilbert = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CesaroNorm {
    L1 = 0,
    L2 = 1,
    Sup = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CesaroStatus {
    match e {
        Error::InvalidArgument { .. } => CesaroStatus::InvalidArgument,
        Error::Hypothesis { .. } => CesaroStatus::Hypothesis,
        Error::Singular(_) => CesaroStatus::Singular,
        _ => CesaroStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CesaroStatus>) -> CesaroStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CesaroStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            CesaroStatus::Internal
        }
    }
}

fn lift<T>(r: cesaro_lab::Result<T>) -> Result<T, CesaroStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> CesaroStatus {
    set_error(format!("null pointer: {what}"));
    CesaroStatus::NullPointer
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, CesaroStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), CesaroStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated)
/// and returns the buffer size it needs, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn cesaro_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len >= bytes.len() {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
            }
            bytes.len()
        }
    })
}

// ------------------------------------------------------------- functions

/// Builds a function with `len = 2^level` cell values. `im` may be null
/// for a real function.
///
/// # Safety
/// `re` (and `im` if non-null) must be valid for `len` reads; `out` must be
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_pc_new(
    level: u32,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut CesaroPc,
) -> CesaroStatus {
    guard(|| {
        if re.is_null() {
            return Err(null("re"));
        }
        let re = std::slice::from_raw_parts(re, len);
        let values: Vec<C64> = if im.is_null() {
            re.iter().map(|&r| C64::new(r, 0.0)).collect()
        } else {
            let im = std::slice::from_raw_parts(im, len);
            re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect()
        };
        let f = lift(PcFunction::new(level, values))?;
        put(out, boxed(CesaroPc(f)), "out")
    })
}

/// # Safety
/// `f` must be null or a handle from `cesaro_pc_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cesaro_pc_free(f: *mut CesaroPc) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_pc_level(f: *const CesaroPc, out: *mut u32) -> CesaroStatus {
    guard(|| put(out, get(f, "f")?.0.level(), "out"))
}

/// # Safety
/// `f` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_pc_norm(f: *const CesaroPc, norm: CesaroNorm, out: *mut f64) -> CesaroStatus {
    guard(|| {
        let p = match norm {
            CesaroNorm::L1 => Norm::L1,
            CesaroNorm::L2 => Norm::L2,
            CesaroNorm::Sup => Norm::Inf,
        };
        put(out, lp_norm(&get(f, "f")?.0, p), "out")
    })
}

/// Fourier coefficient at frequency `k`, normalized by `1 / (2 pi)`.
///
/// # Safety
/// `f` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_pc_coefficient(f: *const CesaroPc, k: i64, out: *mut CesaroComplex) -> CesaroStatus {
    guard(|| put(out, fourier_coefficient(&get(f, "f")?.0, k).into(), "out"))
}

/// Applies `op` of order `n` to `f` at the point `y`.
///
/// # Safety
/// `f` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_pc_eval(
    f: *const CesaroPc,
    op: CesaroOperator,
    n: u64,
    y: f64,
    out: *mut CesaroComplex,
) -> CesaroStatus {
    guard(|| {
        let f = &get(f, "f")?.0;
        let v = lift(match op {
            CesaroOperator::PartialSum => operators::partial_sum(f, n, y),
            CesaroOperator::FejerMean => operators::fejer_mean(f, n, y),
            CesaroOperator::ValleePoussinMean => operators::vp_mean(f, n, y),
            CesaroOperator::SvDifference => operators::sv_difference(f, n, y),
            CesaroOperator::ModifiedHilbert => operators::hilbert_modified(f, n, y),
        })?;
        put(out, v.into(), "out")
    })
}

// --------------------------------------------------------------- kernels

/// Fejer kernel `K_n(u)`.
#[no_mangle]
pub extern "C" fn cesaro_fejer_kernel(n: u64, u: f64) -> f64 {
    kernels::fejer_kernel(n, u)
}

/// Real part of the Dirichlet kernel `D_n(u)`.
#[no_mangle]
pub extern "C" fn cesaro_dirichlet_kernel(n: u64, u: f64) -> f64 {
    kernels::dirichlet_kernel(n, u).re
}

// ---------------------------------------------------------- decomposition

/// # Safety
/// `f` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_cz_new(f: *const CesaroPc, lambda: f64, out: *mut *mut CesaroCz) -> CesaroStatus {
    guard(|| {
        let d = lift(cz_decompose(&get(f, "f")?.0, lambda))?;
        put(out, boxed(CesaroCz(d)), "out")
    })
}

/// # Safety
/// `d` must be null or a handle from `cesaro_cz_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cesaro_cz_free(d: *mut CesaroCz) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_cz_interval_count(d: *const CesaroCz, out: *mut usize) -> CesaroStatus {
    guard(|| put(out, get(d, "d")?.0.family.len(), "out"))
}

/// The `i`-th selected interval, ordered by left endpoint, as
/// `(level, index)`.
///
/// # Safety
/// `d` must be a live handle; `level` and `index` valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn cesaro_cz_interval(
    d: *const CesaroCz,
    i: usize,
    level: *mut u32,
    index: *mut u64,
) -> CesaroStatus {
    guard(|| {
        let fam = &get(d, "d")?.0.family;
        let Some(iv) = fam.intervals().get(i) else {
            set_error(format!("interval {i} out of range 0..{}", fam.len()));
            return Err(CesaroStatus::InvalidArgument);
        };
        put(level, iv.level, "level")?;
        put(index, iv.index, "index")
    })
}

/// Total length of the selected intervals.
///
/// # Safety
/// `d` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_cz_measure(d: *const CesaroCz, out: *mut f64) -> CesaroStatus {
    guard(|| put(out, get(d, "d")?.0.family.measure(), "out"))
}

/// Good part as a new function handle.
///
/// # Safety
/// `d` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_cz_good_part(d: *const CesaroCz, out: *mut *mut CesaroPc) -> CesaroStatus {
    guard(|| put(out, boxed(CesaroPc(get(d, "d")?.0.good.clone())), "out"))
}

// ------------------------------------------------------------- sequences

/// `n_1 = n1`, `n_{j+1} = ceil(q n_j)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_seq_lacunary(q: f64, n1: u64, count: usize, out: *mut *mut CesaroSeq) -> CesaroStatus {
    guard(|| {
        let s = lift(make_lacunary(q, n1 as u128, count))?;
        put(out, boxed(CesaroSeq(s)), "out")
    })
}

/// `n_1 = n1`, `n_{j+1} = ceil((1 + j^{-delta}) n_j)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_seq_delta_growth(
    delta: f64,
    n1: u64,
    count: usize,
    out: *mut *mut CesaroSeq,
) -> CesaroStatus {
    guard(|| {
        let s = lift(make_delta_growth(delta, n1 as u128, count))?;
        put(out, boxed(CesaroSeq(s)), "out")
    })
}

/// # Safety
/// `s` must be null or a sequence handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cesaro_seq_free(s: *mut CesaroSeq) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_seq_len(s: *const CesaroSeq, out: *mut usize) -> CesaroStatus {
    guard(|| put(out, get(s, "s")?.0.len(), "out"))
}

/// Term `n_j`, 1-based. Fails if it does not fit in 64 bits.
///
/// # Safety
/// `s` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cesaro_seq_term(s: *const CesaroSeq, j: usize, out: *mut u64) -> CesaroStatus {
    guard(|| put(out, lift(get(s, "s")?.0.order(j))?, "out"))
}
