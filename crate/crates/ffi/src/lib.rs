//! C interface to the `mrfcs` library.
//!
//! Objects are opaque handles created by `*_new`/`*_create`/`*_build`/
//! `*_load` and released with the matching `*_free`. Every fallible
//! function returns an [`MrfcsStatus`]; on failure the message is available
//! from [`mrfcs_last_error`] on the same thread. Arrays are caller-owned,
//! row-major `double` buffers whose length is passed alongside.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mrfcs::dictionary::{build_dictionary, match_fingerprint, Dictionary, ParamGrid};
use mrfcs::epg::{
    simulate_fingerprint, simulate_flair, simulate_se_closed_form, simulate_tse, ContrastSpecs, FispMrf, TissueParams,
};
use mrfcs::io::{dictionary_artifact, read_dictionary, Container};
use mrfcs::phantom::{PhantomSlice, PhantomSpec};
use mrfcs::{metrics, Error};
use ndarray::Array2;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrfcsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Format = 3,
    Io = 4,
    Internal = 5,
    Panic = 6,
}

/// One voxel's relaxation times (ms) and proton density.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrfcsTissue {
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub pd: f64,
}

/// Dictionary match. `atom_index` is -1 for the null match, in which
/// case every other field is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrfcsMatch {
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub pd: f64,
    pub similarity: f64,
    pub atom_index: i64,
}

pub struct MrfcsSequence(FispMrf);

pub struct MrfcsDictionary(Dictionary);

pub struct MrfcsPhantom(PhantomSlice);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MrfcsStatus {
    match e {
        Error::InvalidArgument(_) => MrfcsStatus::InvalidArgument,
        Error::Format(_) | Error::Json(_) => MrfcsStatus::Format,
        Error::Io(_) => MrfcsStatus::Io,
        Error::Internal(_) => MrfcsStatus::Internal,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail::Lib(Error::InvalidArgument(msg.into()))
}

/// Runs `f`, converting errors and panics into a status and last-error message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MrfcsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            MrfcsStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MrfcsStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MrfcsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out_handle<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

fn tissue(t: &MrfcsTissue) -> Result<TissueParams, Fail> {
    Ok(TissueParams::new(t.t1_ms, t.t2_ms, t.pd)?)
}

fn image(p: *const f64, height: usize, width: usize, what: &'static str) -> Result<Array2<f64>, Fail> {
    let n = height.checked_mul(width).ok_or_else(|| invalid("image size overflows"))?;
    let data = unsafe { slice(p, n, what)? }.to_vec();
    Array2::from_shape_vec((height, width), data).map_err(|e| invalid(e.to_string()))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mrfcs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mrfcs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// FISP fingerprinting sequence with the default timing and a seeded
/// flip-angle schedule.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_sequence_new(
    n_tr: usize,
    schedule_seed: u64,
    out: *mut *mut MrfcsSequence,
) -> MrfcsStatus {
    guard(|| {
        let s = FispMrf::new(n_tr, schedule_seed);
        s.validate()?;
        out_handle(out, MrfcsSequence(s))
    })
}

/// # Safety
/// `seq` must be null or a handle from [`mrfcs_sequence_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_sequence_free(seq: *mut MrfcsSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// # Safety
/// `seq` must be a live sequence handle.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_sequence_n_tr(seq: *const MrfcsSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.n_tr)
}

/// Complex fingerprint of one tissue; `len` must equal the sequence's TR count.
///
/// # Safety
/// `seq` and `tissue` must be valid; `out_re` and `out_im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_simulate_fingerprint(
    seq: *const MrfcsSequence,
    tissue_in: *const MrfcsTissue,
    out_re: *mut f64,
    out_im: *mut f64,
    len: usize,
) -> MrfcsStatus {
    guard(|| {
        let seq = get(seq, "seq")?;
        let t = tissue(get(tissue_in, "tissue")?)?;
        if len != seq.0.n_tr {
            return Err(invalid(format!("buffer holds {len} samples, sequence has {} TRs", seq.0.n_tr)));
        }
        let (re, im) = (slice_mut(out_re, len, "out_re")?, slice_mut(out_im, len, "out_im")?);
        let f = simulate_fingerprint(&t, &seq.0)?;
        for (i, c) in f.samples.iter().enumerate() {
            re[i] = c.re;
            im[i] = c.im;
        }
        Ok(())
    })
}

/// T1-weighted spin echo, T2-weighted TSE and FLAIR intensities with the
/// default protocol, written to `out[0..3]`.
///
/// # Safety
/// `tissue` must be valid; `out` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_simulate_contrasts(tissue_in: *const MrfcsTissue, out: *mut f64) -> MrfcsStatus {
    guard(|| {
        let t = tissue(get(tissue_in, "tissue")?)?;
        let out = slice_mut(out, 3, "out")?;
        let specs = ContrastSpecs::default();
        out[0] = simulate_se_closed_form(&t, &specs.t1w)?;
        out[1] = simulate_tse(&t, &specs.t2w)?;
        out[2] = simulate_flair(&t, &specs.flair)?;
        Ok(())
    })
}

/// Dictionary over a named grid preset (`"desk"` or `"full"`).
///
/// # Safety
/// `preset` must be a NUL-terminated string; `seq` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_build_preset(
    preset: *const c_char,
    seq: *const MrfcsSequence,
    out: *mut *mut MrfcsDictionary,
) -> MrfcsStatus {
    guard(|| {
        if preset.is_null() {
            return Err(Fail::Null("preset"));
        }
        let name = CStr::from_ptr(preset).to_str().map_err(|_| invalid("preset is not valid UTF-8"))?;
        let grid = ParamGrid::preset(name)?;
        let d = build_dictionary(&grid, &get(seq, "seq")?.0)?;
        out_handle(out, MrfcsDictionary(d))
    })
}

/// Dictionary over explicit T1 and T2 values (ms, strictly increasing).
/// Pairs with T2 > T1 are excluded.
///
/// # Safety
/// `t1_ms`/`t2_ms` must hold `n_t1`/`n_t2` doubles; `seq` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_build(
    t1_ms: *const f64,
    n_t1: usize,
    t2_ms: *const f64,
    n_t2: usize,
    seq: *const MrfcsSequence,
    out: *mut *mut MrfcsDictionary,
) -> MrfcsStatus {
    guard(|| {
        let grid = ParamGrid {
            t1_values_ms: slice(t1_ms, n_t1, "t1_ms")?.to_vec(),
            t2_values_ms: slice(t2_ms, n_t2, "t2_ms")?.to_vec(),
            exclude_t2_gt_t1: true,
        };
        let d = build_dictionary(&grid, &get(seq, "seq")?.0)?;
        out_handle(out, MrfcsDictionary(d))
    })
}

/// Loads a dictionary container written by [`mrfcs_dictionary_save`] or the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_load(path: *const c_char, out: *mut *mut MrfcsDictionary) -> MrfcsStatus {
    guard(|| {
        let c = Container::read(path_arg(path)?)?;
        out_handle(out, MrfcsDictionary(read_dictionary(&c)?))
    })
}

/// # Safety
/// `dict` must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_save(dict: *const MrfcsDictionary, path: *const c_char) -> MrfcsStatus {
    guard(|| {
        let c = dictionary_artifact(&get(dict, "dict")?.0)?;
        c.write(path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `dict` must be null or a live dictionary handle.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_free(dict: *mut MrfcsDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// # Safety
/// `dict` must be a live dictionary handle.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_n_atoms(dict: *const MrfcsDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.0.n_atoms())
}

/// # Safety
/// `dict` must be a live dictionary handle.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_atom_len(dict: *const MrfcsDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.0.atom_len())
}

/// Content hash (hex SHA-256), NUL-terminated, copied into `buf` of
/// `buf_len` bytes. Needs 65 bytes.
///
/// # Safety
/// `dict` must be live; `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_hash(
    dict: *const MrfcsDictionary,
    buf: *mut c_char,
    buf_len: usize,
) -> MrfcsStatus {
    guard(|| {
        let h = get(dict, "dict")?.0.manifest_hash().as_bytes();
        if buf_len < h.len() + 1 {
            return Err(invalid(format!("hash needs {} bytes, buffer has {buf_len}", h.len() + 1)));
        }
        let out = slice_mut(buf.cast::<u8>(), h.len() + 1, "buf")?;
        out[..h.len()].copy_from_slice(h);
        out[h.len()] = 0;
        Ok(())
    })
}

/// Matches one complex signal of `len` samples.
///
/// # Safety
/// `dict` live; `re`/`im` hold `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_dictionary_match(
    dict: *const MrfcsDictionary,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut MrfcsMatch,
) -> MrfcsStatus {
    guard(|| {
        let d = &get(dict, "dict")?.0;
        let (re, im) = (slice(re, len, "re")?, slice(im, len, "im")?);
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let signal: Vec<Complex64> = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let r = match_fingerprint(&signal, d)?;
        *out = match (r.params, r.atom_index) {
            (Some(p), Some(j)) => MrfcsMatch {
                t1_ms: p.t1_ms(),
                t2_ms: p.t2_ms(),
                pd: r.pd,
                similarity: r.similarity,
                atom_index: j as i64,
            },
            _ => MrfcsMatch { t1_ms: 0.0, t2_ms: 0.0, pd: 0.0, similarity: 0.0, atom_index: -1 },
        };
        Ok(())
    })
}

/// Square desk phantom of `size` pixels with the default tissue table.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_phantom_create(size: usize, seed: u64, out: *mut *mut MrfcsPhantom) -> MrfcsStatus {
    guard(|| {
        let spec = PhantomSpec { height: size, width: size, ..PhantomSpec::desk(seed) };
        out_handle(out, MrfcsPhantom(spec.build()?))
    })
}

/// # Safety
/// `p` must be null or a live phantom handle.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_phantom_free(p: *mut MrfcsPhantom) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` live; `height` and `width` writable.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_phantom_dims(
    p: *const MrfcsPhantom,
    height: *mut usize,
    width: *mut usize,
) -> MrfcsStatus {
    guard(|| {
        let (h, w) = get(p, "phantom")?.0.dim();
        if height.is_null() || width.is_null() {
            return Err(Fail::Null("height/width"));
        }
        *height = h;
        *width = w;
        Ok(())
    })
}

/// Copies the T1 (ms), T2 (ms), PD, B0 (Hz) and label maps. Any output
/// pointer may be null to skip that map; the others hold `len` =
/// height*width elements.
///
/// # Safety
/// `p` live; each non-null output holds `len` elements.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_phantom_copy_maps(
    p: *const MrfcsPhantom,
    t1_ms: *mut f64,
    t2_ms: *mut f64,
    pd: *mut f64,
    b0_hz: *mut f64,
    labels: *mut u8,
    len: usize,
) -> MrfcsStatus {
    guard(|| {
        let p = &get(p, "phantom")?.0;
        if len != p.labels.len() {
            return Err(invalid(format!("buffers hold {len} pixels, phantom has {}", p.labels.len())));
        }
        for (dst, src) in [(t1_ms, &p.t1), (t2_ms, &p.t2), (pd, &p.pd), (b0_hz, &p.b0)] {
            if !dst.is_null() {
                slice_mut(dst, len, "map")?.iter_mut().zip(src.iter()).for_each(|(d, s)| *d = *s);
            }
        }
        if !labels.is_null() {
            slice_mut(labels, len, "labels")?.iter_mut().zip(p.labels.iter()).for_each(|(d, s)| *d = *s);
        }
        Ok(())
    })
}

/// 100 * |x - ref| / |ref|.
///
/// # Safety
/// `x` and `reference` hold `height*width` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrfcs_nrmse(
    x: *const f64,
    reference: *const f64,
    height: usize,
    width: usize,
    out: *mut f64,
) -> MrfcsStatus {
    metric(x, reference, height, width, out, metrics::nrmse)
}

/// PSNR in dB with the reference maximum as peak; +infinity for identical images.
///
/// # Safety
/// As [`mrfcs_nrmse`].
#[no_mangle]
pub unsafe extern "C" fn mrfcs_psnr(
    x: *const f64,
    reference: *const f64,
    height: usize,
    width: usize,
    out: *mut f64,
) -> MrfcsStatus {
    metric(x, reference, height, width, out, metrics::psnr)
}

/// Mean SSIM over 11x11 Gaussian windows.
///
/// # Safety
/// As [`mrfcs_nrmse`].
#[no_mangle]
pub unsafe extern "C" fn mrfcs_ssim(
    x: *const f64,
    reference: *const f64,
    height: usize,
    width: usize,
    out: *mut f64,
) -> MrfcsStatus {
    metric(x, reference, height, width, out, metrics::ssim)
}

unsafe fn metric(
    x: *const f64,
    reference: *const f64,
    height: usize,
    width: usize,
    out: *mut f64,
    f: fn(&Array2<f64>, &Array2<f64>) -> mrfcs::Result<f64>,
) -> MrfcsStatus {
    guard(|| {
        let a = image(x, height, width, "x")?;
        let b = image(reference, height, width, "reference")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = f(&a, &b)?;
        Ok(())
    })
}
