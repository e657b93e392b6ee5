//! C ABI for `rsskit`.
//!
//! Objects are opaque handles created by `rsskit_*_new`-style functions and
//! released with the matching `rsskit_*_free`. Every fallible call returns an
//! [`RsskitStatus`]; on failure the message is kept per thread and can be
//! read with [`rsskit_last_error_message`]. Unit and rank indices are 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rsskit::designs::{draw_rss, draw_srs_wor};
use rsskit::estimators::{
    hajek_edf, median_ci, plugin_population_ranks, syg_variance_estimate, true_variance, EdfEstimate, Inversion,
};
use rsskit::inclusion::{compute_inclusion, MethodChoice};
use rsskit::population::{attach_auxiliary, generate_grid_population};
use rsskit::rng::seeded;
use rsskit::{Design, DesignSpec, DistributionKind, InclusionTable, Population, RankedSetSample, RankingMode, RssError, SampleEntry};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsskitStatus {
    Ok = 0,
    InvalidArgument = 1,
    Infeasible = 2,
    NumericFailure = 3,
    BudgetExceeded = 4,
    Io = 5,
    Parse = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsskitDesign {
    Srs = 0,
    Level0 = 1,
    Level1 = 2,
    Level2 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsskitDistribution {
    Normal = 0,
    Uniform = 1,
    Exponential = 2,
    Beta52 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsskitMethod {
    /// Closed form or exact recursion when available, Monte Carlo otherwise.
    Auto = 0,
    Closed = 1,
    Exact = 2,
    MonteCarlo = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsskitRanking {
    Perfect = 0,
    Auxiliary = 1,
}

/// Confidence interval for the population median.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RsskitMedianCi {
    pub median: f64,
    pub v_hat: f64,
    pub c1: f64,
    pub c2: f64,
    pub lower: f64,
    pub upper: f64,
}

/// A finite population sorted by the study variable.
pub struct RsskitPopulation(Population);
/// First- and second-order inclusion probabilities of one design.
pub struct RsskitTable(InclusionTable);
/// A drawn or imported sample.
pub struct RsskitSample(RankedSetSample);
/// An estimated distribution function.
pub struct RsskitEdf(EdfEstimate);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &RssError) -> RsskitStatus {
    match err {
        RssError::InvalidArgument(_) | RssError::EmptySample | RssError::MissingAuxiliary => RsskitStatus::InvalidArgument,
        RssError::Infeasible { .. } => RsskitStatus::Infeasible,
        RssError::BudgetExceeded { .. } => RsskitStatus::BudgetExceeded,
        RssError::Io(_) => RsskitStatus::Io,
        RssError::Parse(_) | RssError::Csv(_) | RssError::Json(_) => RsskitStatus::Parse,
        _ => RsskitStatus::NumericFailure,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard<F: FnOnce() -> Result<(), RsskitStatus>>(f: F) -> RsskitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            RsskitStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            RsskitStatus::Panic
        }
    }
}

fn lift<T>(r: rsskit::Result<T>) -> Result<T, RsskitStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> RsskitStatus {
    set_error(format!("{what} is null"));
    RsskitStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, RsskitStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), RsskitStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], RsskitStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn design_of(d: RsskitDesign) -> Design {
    match d {
        RsskitDesign::Srs => Design::Srs,
        RsskitDesign::Level0 => Design::Level0,
        RsskitDesign::Level1 => Design::Level1,
        RsskitDesign::Level2 => Design::Level2,
    }
}

fn spec_of(design: RsskitDesign, k: usize, m: usize) -> Result<DesignSpec, RsskitStatus> {
    lift(DesignSpec::balanced(design_of(design), k, m))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rsskit_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// including the terminator, so a call with `len = 0` sizes the buffer.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null with `len = 0`.
#[no_mangle]
pub unsafe extern "C" fn rsskit_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Quantile-grid population of size `n` from a reference distribution.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsskit_population_grid(n: usize, dist: RsskitDistribution, out: *mut *mut RsskitPopulation) -> RsskitStatus {
    guard(|| {
        let kind = match dist {
            RsskitDistribution::Normal => DistributionKind::StandardNormal,
            RsskitDistribution::Uniform => DistributionKind::StandardUniform,
            RsskitDistribution::Exponential => DistributionKind::StandardExponential,
            RsskitDistribution::Beta52 => DistributionKind::Beta52,
        };
        let pop = lift(generate_grid_population(n, kind))?;
        write_out(out, Box::into_raw(Box::new(RsskitPopulation(pop))), "out")
    })
}

/// Population from arbitrary study values (sorted internally).
///
/// # Safety
/// `values` must hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_population_from_values(values: *const f64, len: usize, out: *mut *mut RsskitPopulation) -> RsskitStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        let pop = lift(Population::from_unsorted(v.to_vec()))?;
        write_out(out, Box::into_raw(Box::new(RsskitPopulation(pop))), "out")
    })
}

/// Copy of `pop` with an auxiliary ranking variable of correlation `rho`.
///
/// # Safety
/// `pop` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_population_with_auxiliary(
    pop: *const RsskitPopulation,
    rho: f64,
    seed: u64,
    out: *mut *mut RsskitPopulation,
) -> RsskitStatus {
    guard(|| {
        let p = deref(pop, "pop")?;
        let with = lift(attach_auxiliary(&p.0, rho, &mut seeded(seed)))?;
        write_out(out, Box::into_raw(Box::new(RsskitPopulation(with))), "out")
    })
}

/// Number of units, or 0 for a null handle.
///
/// # Safety
/// `pop` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn rsskit_population_len(pop: *const RsskitPopulation) -> usize {
    pop.as_ref().map_or(0, |p| p.0.len())
}

/// Study value of the unit with rank `id` (1-based).
///
/// # Safety
/// `pop` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_population_value(pop: *const RsskitPopulation, id: usize, out: *mut f64) -> RsskitStatus {
    guard(|| {
        let p = deref(pop, "pop")?;
        if id == 0 || id > p.0.len() {
            set_error(format!("unit {id} outside 1..={}", p.0.len()));
            return Err(RsskitStatus::InvalidArgument);
        }
        write_out(out, p.0.value(id), "out")
    })
}

/// # Safety
/// `pop` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsskit_population_free(pop: *mut RsskitPopulation) {
    if !pop.is_null() {
        drop(Box::from_raw(pop));
    }
}

/// Inclusion table for a balanced design (`m` cycles of ranks 1..k; for SRS
/// the sample size is `k·m`).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_inclusion_table(
    n_pop: usize,
    design: RsskitDesign,
    k: usize,
    m: usize,
    method: RsskitMethod,
    reps: u64,
    seed: u64,
    out: *mut *mut RsskitTable,
) -> RsskitStatus {
    guard(|| {
        let spec = if design == RsskitDesign::Srs {
            lift(DesignSpec::srs(k * m))?
        } else {
            spec_of(design, k, m)?
        };
        let choice = match method {
            RsskitMethod::Auto => MethodChoice::Auto { reps, seed },
            RsskitMethod::Closed => MethodChoice::Closed,
            RsskitMethod::Exact => MethodChoice::Exact {
                budget: rsskit::inclusion::DEFAULT_STATE_BUDGET,
            },
            RsskitMethod::MonteCarlo => MethodChoice::MonteCarlo { reps, seed },
        };
        let table = lift(compute_inclusion(&spec, n_pop, choice))?;
        write_out(out, Box::into_raw(Box::new(RsskitTable(table))), "out")
    })
}

/// Population size covered by the table, or 0 for a null handle.
///
/// # Safety
/// `table` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn rsskit_table_population_size(table: *const RsskitTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.n_pop)
}

unsafe fn table_index(table: *const RsskitTable, i: usize) -> Result<&'static InclusionTable, RsskitStatus> {
    let t = &deref(table, "table")?.0;
    if i == 0 || i > t.n_pop {
        set_error(format!("rank {i} outside 1..={}", t.n_pop));
        return Err(RsskitStatus::InvalidArgument);
    }
    Ok(t)
}

/// π_i for population rank `i`.
///
/// # Safety
/// `table` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_table_first_order(table: *const RsskitTable, i: usize, out: *mut f64) -> RsskitStatus {
    guard(|| {
        let t = table_index(table, i)?;
        write_out(out, t.pi(i), "out")
    })
}

/// π_ij for population ranks `i`, `j` (π_ii = π_i).
///
/// # Safety
/// `table` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_table_second_order(table: *const RsskitTable, i: usize, j: usize, out: *mut f64) -> RsskitStatus {
    guard(|| {
        let t = table_index(table, i)?;
        table_index(table, j)?;
        write_out(out, t.pi2(i, j), "out")
    })
}

/// # Safety
/// `table` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsskit_table_free(table: *mut RsskitTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Draws a balanced sample from `pop`.
///
/// # Safety
/// `pop` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_sample_draw(
    pop: *const RsskitPopulation,
    design: RsskitDesign,
    k: usize,
    m: usize,
    ranking: RsskitRanking,
    seed: u64,
    out: *mut *mut RsskitSample,
) -> RsskitStatus {
    guard(|| {
        let p = &deref(pop, "pop")?.0;
        let mut rng = seeded(seed);
        let s = if design == RsskitDesign::Srs {
            lift(draw_srs_wor(p, k * m, &mut rng))?
        } else {
            let mode = match ranking {
                RsskitRanking::Perfect => RankingMode::Perfect,
                RsskitRanking::Auxiliary => RankingMode::ByAuxiliary,
            };
            lift(draw_rss(p, &spec_of(design, k, m)?, mode, &mut rng))?
        };
        write_out(out, Box::into_raw(Box::new(RsskitSample(s))), "out")
    })
}

/// Sample from field measurements in set order. `ranks` gives each
/// measured unit's population rank; pass null to use plug-in ranks from
/// the values and `n_pop`.
///
/// # Safety
/// `values` (and `ranks` when non-null) must hold `len` elements; `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_sample_from_values(
    design: RsskitDesign,
    k: usize,
    m: usize,
    n_pop: usize,
    values: *const f64,
    ranks: *const usize,
    len: usize,
    out: *mut *mut RsskitSample,
) -> RsskitStatus {
    guard(|| {
        let spec = if design == RsskitDesign::Srs {
            lift(DesignSpec::srs(k * m))?
        } else {
            spec_of(design, k, m)?
        };
        let v = slice(values, len, "values")?;
        let r: Vec<usize> = if ranks.is_null() {
            lift(plugin_population_ranks(v, n_pop))?
        } else {
            slice(ranks, len, "ranks")?.to_vec()
        };
        let entries = v
            .iter()
            .zip(&r)
            .enumerate()
            .map(|(h, (&value, &rank))| SampleEntry {
                set_index: h + 1,
                in_set_rank: if design == RsskitDesign::Srs { 1 } else { spec.rank_pattern.get(h).copied().unwrap_or(1) },
                population_id: rank,
                population_rank: rank,
                value,
            })
            .collect();
        let s = lift(RankedSetSample::from_entries(spec, RankingMode::Perfect, entries))?;
        write_out(out, Box::into_raw(Box::new(RsskitSample(s))), "out")
    })
}

/// Number of measurements, or 0 for a null handle.
///
/// # Safety
/// `sample` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn rsskit_sample_len(sample: *const RsskitSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the measured values (set order) into `buf`, which must hold
/// `rsskit_sample_len` doubles.
///
/// # Safety
/// `sample` must be valid and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rsskit_sample_values(sample: *const RsskitSample, buf: *mut f64, len: usize) -> RsskitStatus {
    guard(|| {
        let s = &deref(sample, "sample")?.0;
        if len < s.len() {
            set_error(format!("buffer holds {len} values, sample has {}", s.len()));
            return Err(RsskitStatus::InvalidArgument);
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        for (i, v) in s.values().into_iter().enumerate() {
            buf.add(i).write(v);
        }
        Ok(())
    })
}

/// # Safety
/// `sample` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsskit_sample_free(sample: *mut RsskitSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Hájek estimate of the distribution function.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_edf_hajek(sample: *const RsskitSample, table: *const RsskitTable, out: *mut *mut RsskitEdf) -> RsskitStatus {
    guard(|| {
        let s = &deref(sample, "sample")?.0;
        let t = &deref(table, "table")?.0;
        let edf = lift(hajek_edf(s, t))?;
        write_out(out, Box::into_raw(Box::new(RsskitEdf(edf))), "out")
    })
}

/// F̂(x).
///
/// # Safety
/// `edf` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_edf_eval(edf: *const RsskitEdf, x: f64, out: *mut f64) -> RsskitStatus {
    guard(|| {
        let e = &deref(edf, "edf")?.0;
        write_out(out, e.eval(x), "out")
    })
}

/// F̂⁻¹(p), by step inversion or linear interpolation.
///
/// # Safety
/// `edf` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_edf_quantile(edf: *const RsskitEdf, p: f64, interpolate: bool, out: *mut f64) -> RsskitStatus {
    guard(|| {
        let e = &deref(edf, "edf")?.0;
        if !(0.0..=1.0).contains(&p) {
            set_error(format!("probability {p} outside [0, 1]"));
            return Err(RsskitStatus::InvalidArgument);
        }
        let how = if interpolate { Inversion::Interpolated } else { Inversion::Step };
        write_out(out, e.quantile(p, how), "out")
    })
}

/// # Safety
/// `edf` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsskit_edf_free(edf: *mut RsskitEdf) {
    if !edf.is_null() {
        drop(Box::from_raw(edf));
    }
}

/// Sen-Yates-Grundy variance estimate of F̂(x); may be negative.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_variance_estimate(
    sample: *const RsskitSample,
    table: *const RsskitTable,
    x: f64,
    out: *mut f64,
) -> RsskitStatus {
    guard(|| {
        let v = lift(syg_variance_estimate(&deref(sample, "sample")?.0, &deref(table, "table")?.0, x))?;
        write_out(out, v, "out")
    })
}

/// Design variance of F̂(x) for a known population.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_true_variance(pop: *const RsskitPopulation, table: *const RsskitTable, x: f64, out: *mut f64) -> RsskitStatus {
    guard(|| {
        let v = lift(true_variance(&deref(pop, "pop")?.0, &deref(table, "table")?.0, x))?;
        write_out(out, v, "out")
    })
}

/// Confidence interval for the median at level 1 − alpha.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_median_ci(
    sample: *const RsskitSample,
    table: *const RsskitTable,
    alpha: f64,
    interpolate: bool,
    out: *mut RsskitMedianCi,
) -> RsskitStatus {
    guard(|| {
        let how = if interpolate { Inversion::Interpolated } else { Inversion::Step };
        let ci = lift(median_ci(&deref(sample, "sample")?.0, &deref(table, "table")?.0, alpha, how))?;
        write_out(
            out,
            RsskitMedianCi {
                median: ci.median,
                v_hat: ci.v_hat,
                c1: ci.c1,
                c2: ci.c2,
                lower: ci.lower,
                upper: ci.upper,
            },
            "out",
        )
    })
}

/// Reads a NUL-terminated UTF-8 string; used by the path-taking calls.
unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, RsskitStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        RsskitStatus::InvalidArgument
    })
}

/// Loads an inclusion table written by `rsskit inclusion`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsskit_table_read_json(path: *const c_char, out: *mut *mut RsskitTable) -> RsskitStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let file = lift(std::fs::File::open(path).map_err(RssError::from))?;
        let t = lift(rsskit::io::read_inclusion_json(std::io::BufReader::new(file)))?;
        write_out(out, Box::into_raw(Box::new(RsskitTable(t))), "out")
    })
}
