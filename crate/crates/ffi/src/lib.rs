//! C ABI over the `pileup` solvers.
//!
//! Objects are opaque handles created by `pileup_*` constructors and released
//! with the matching `*_free`. Every fallible call returns a [`PileupStatus`];
//! on failure `pileup_last_error_message` describes what went wrong on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pileup::asymptotics::{interaction_second_moment, zeta};
use pileup::blayer::{solve_bl, BoundaryLayerSolution};
use pileup::energetics::{renorm_energy, sigma_inf, sigma_n};
use pileup::equilibrium::{solve_finite, strain, Configuration, SolverOptions, StrainField};
use pileup::{Error, PotentialSpec};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PileupStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Divergence = 4,
    NonConvergence = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 8,
}

/// Interaction potential.
pub struct PileupPotential(PotentialSpec);

/// Equilibrium of the finite problem.
pub struct PileupConfiguration(Configuration);

/// Truncated boundary-layer solution.
pub struct PileupBoundaryLayer(BoundaryLayerSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PileupStatus {
    match e.root() {
        Error::Domain(_) => PileupStatus::Domain,
        Error::Divergence(_) => PileupStatus::Divergence,
        Error::NonConvergence { .. } => PileupStatus::NonConvergence,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => PileupStatus::Io,
        _ => PileupStatus::InvalidArgument,
    }
}

struct Fail(PileupStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PileupStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PileupStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PileupStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PileupStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn copy_into(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < values.len() {
        return Err(Fail(PileupStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

fn options(tol: f64) -> SolverOptions {
    if tol > 0.0 {
        SolverOptions::with_tol(tol)
    } else {
        SolverOptions::default()
    }
}

/// Message for the last failure on this thread, or null if there was none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pileup_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pileup_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `V(x) = x^-a` for `a > 1`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn pileup_potential_power_law(a: f64, out: *mut *mut PileupPotential) -> PileupStatus {
    guard(|| {
        let p = PotentialSpec::power_law(a)?;
        write_out(out, Box::into_raw(Box::new(PileupPotential(p))), "out")
    })
}

/// Dislocation-wall potential.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn pileup_potential_wall(out: *mut *mut PileupPotential) -> PileupStatus {
    guard(|| write_out(out, Box::into_raw(Box::new(PileupPotential(PotentialSpec::wall()))), "out"))
}

/// Parses `powerlaw:a=<value>` or `wall`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pileup_potential_parse(spec: *const c_char, out: *mut *mut PileupPotential) -> PileupStatus {
    guard(|| {
        if spec.is_null() {
            return Err(null("spec"));
        }
        let s = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Fail(PileupStatus::InvalidArgument, "spec is not UTF-8".into()))?;
        let p: PotentialSpec = s.parse()?;
        write_out(out, Box::into_raw(Box::new(PileupPotential(p))), "out")
    })
}

/// # Safety
/// `p` must be null or a handle from a `pileup_potential_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn pileup_potential_free(p: *mut PileupPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Derivative `order` (0 to 3) of the potential at `x > 0`.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pileup_potential_eval(
    p: *const PileupPotential,
    order: u32,
    x: f64,
    out: *mut f64,
) -> PileupStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        write_out(out, p.0.eval(order, x)?, "out")
    })
}

/// Minimises the finite energy for `n + 1` particles. `tol <= 0` selects the
/// default residual tolerance.
///
/// # Safety
/// `p` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pileup_solve_finite(
    p: *const PileupPotential,
    n: usize,
    tol: f64,
    out: *mut *mut PileupConfiguration,
) -> PileupStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let (c, _) = solve_finite(&p.0, n, &options(tol))?;
        write_out(out, Box::into_raw(Box::new(PileupConfiguration(c))), "out")
    })
}

/// Number of gaps `n`; the configuration has `n + 1` positions.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pileup_configuration_n(c: *const PileupConfiguration) -> usize {
    c.as_ref().map_or(0, |c| c.0.n())
}

/// Writes the `n + 1` positions into `buf`.
///
/// # Safety
/// `c` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pileup_configuration_positions(
    c: *const PileupConfiguration,
    buf: *mut f64,
    len: usize,
) -> PileupStatus {
    guard(|| copy_into(&deref(c, "configuration")?.0.positions(), buf, len))
}

/// Writes the `n` strains into `buf`.
///
/// # Safety
/// `c` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pileup_configuration_strains(
    c: *const PileupConfiguration,
    buf: *mut f64,
    len: usize,
) -> PileupStatus {
    guard(|| copy_into(strain(&deref(c, "configuration")?.0).values(), buf, len))
}

/// # Safety
/// `c` must be null or a handle from `pileup_solve_finite`.
#[no_mangle]
pub unsafe extern "C" fn pileup_configuration_free(c: *mut PileupConfiguration) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Solves the boundary-layer system with `free` unknowns, truncated at
/// `trunc`. `tol <= 0` selects the default tolerance.
///
/// # Safety
/// `p` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pileup_solve_bl(
    p: *const PileupPotential,
    free: usize,
    trunc: usize,
    tol: f64,
    out: *mut *mut PileupBoundaryLayer,
) -> PileupStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let (s, _) = solve_bl(&p.0, free, trunc, &options(tol))?;
        write_out(out, Box::into_raw(Box::new(PileupBoundaryLayer(s))), "out")
    })
}

/// Number of free strains `I`.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pileup_bl_free_len(s: *const PileupBoundaryLayer) -> usize {
    s.as_ref().map_or(0, |s| s.0.free_len())
}

/// Writes the `I` free strains into `buf`.
///
/// # Safety
/// `s` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pileup_bl_strains(s: *const PileupBoundaryLayer, buf: *mut f64, len: usize) -> PileupStatus {
    guard(|| copy_into(&deref(s, "solution")?.0.strains(), buf, len))
}

/// # Safety
/// `s` must be null or a handle from `pileup_solve_bl`.
#[no_mangle]
pub unsafe extern "C" fn pileup_bl_free(s: *mut PileupBoundaryLayer) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Boundary stress at `i = 1..=imax` into `buf`. `n == 0` means the
/// half-infinite limit; entries past `n/2` are zero.
///
/// # Safety
/// `p` must be a live handle and `buf` must hold `imax` doubles.
#[no_mangle]
pub unsafe extern "C" fn pileup_boundary_stress(
    p: *const PileupPotential,
    n: usize,
    imax: usize,
    buf: *mut f64,
) -> PileupStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let s = if n == 0 { sigma_inf(&p.0, imax, 1e-13)? } else { sigma_n(&p.0, n)? };
        let values: Vec<f64> = (1..=imax).map(|i| s.get(i)).collect();
        copy_into(&values, buf, imax)
    })
}

/// Renormalised energy of `len` strains summing to zero.
///
/// # Safety
/// `p` must be a live handle, `eps` must hold `len` doubles and `out` must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn pileup_renorm_energy(
    p: *const PileupPotential,
    eps: *const f64,
    len: usize,
    out: *mut f64,
) -> PileupStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        if eps.is_null() {
            return Err(null("eps"));
        }
        let e = StrainField::new(std::slice::from_raw_parts(eps, len).to_vec())?;
        write_out(out, renorm_energy(&p.0, &e), "out")
    })
}

/// Riemann zeta at `a > 1`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pileup_zeta(a: f64, out: *mut f64) -> PileupStatus {
    guard(|| write_out(out, zeta(a)?, "out"))
}

/// `Z = sum_k k^2 V''(k)`.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pileup_second_moment(p: *const PileupPotential, out: *mut f64) -> PileupStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        write_out(out, interaction_second_moment(&p.0, 1e-13)?, "out")
    })
}
