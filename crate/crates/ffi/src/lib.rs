//! C ABI over `paradox-core`.
//!
//! Every entry point returns a [`ParadoxStatus`]; results come back through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`paradox_last_error`]. Handles are opaque and must be released with
//! their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use paradox_core::balance::{
    equally_wrong_partner, log_posterior_odds_variance, posterior_sign_model, GaussianSummary, SignModelConfig,
    VariancePairConfig,
};
use paradox_core::coin::{coin_posterior, prob_nonextreme_exact, CoinComparison, CoinDataset};
use paradox_core::experiments::{run_experiment, ExperimentConfig};
use paradox_core::phylo::{
    mcmc_tree_posteriors_4taxon, pattern_probs_4taxon, tree_posteriors_3taxon, McmcConfig, PhyloPrior, RateModel,
    SitePatternCounts, Topology4, QUARTET_CLASSES, TRIPLET_CLASSES,
};
use paradox_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParadoxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    Degenerate = 4,
    NonFinite = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque two-coin comparison.
pub struct ParadoxCoin {
    inner: CoinComparison,
}

/// Opaque experiment configuration.
pub struct ParadoxConfig {
    inner: ExperimentConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ParadoxStatus {
    match err {
        Error::Domain(_) => ParadoxStatus::InvalidArgument,
        Error::QuadratureNotConverged { .. } | Error::OptimizerNotConverged { .. } => ParadoxStatus::NotConverged,
        Error::Degenerate(_) => ParadoxStatus::Degenerate,
        Error::NonFinite(_) => ParadoxStatus::NonFinite,
        Error::Config(_) => ParadoxStatus::Config,
        Error::Io(_) | Error::Json(_) => ParadoxStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `body`, mapping errors and panics to a status and recording the message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ParadoxStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ParadoxStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            ParadoxStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            let status = status_of(&e);
            set_last_error(e.to_string());
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            ParadoxStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice_in<'a, T>(ptr: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_out<'a, T>(ptr: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn str_in<'a>(ptr: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::Core(Error::Config(format!("{what} is not valid UTF-8"))))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn paradox_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn paradox_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out_coin` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn paradox_coin_new(p_true: f64, p1: f64, p2: f64, out_coin: *mut *mut ParadoxCoin) -> ParadoxStatus {
    guard(|| {
        let slot = out(out_coin, "out_coin")?;
        let inner = CoinComparison::new(p_true, p1, p2)?;
        *slot = Box::into_raw(Box::new(ParadoxCoin { inner }));
        Ok(())
    })
}

/// # Safety
/// `coin` must be NULL or a handle from `paradox_coin_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn paradox_coin_free(coin: *mut ParadoxCoin) {
    if !coin.is_null() {
        drop(Box::from_raw(coin));
    }
}

/// Posterior probability of the first coin after `x` heads in `n` tosses.
///
/// # Safety
/// `coin` must be a live handle and `out_p1` writable.
#[no_mangle]
pub unsafe extern "C" fn paradox_coin_posterior(coin: *const ParadoxCoin, n: u64, x: u64, out_p1: *mut f64) -> ParadoxStatus {
    guard(|| {
        let coin = coin.as_ref().ok_or(Failure::Null("coin"))?;
        let slot = out(out_p1, "out_p1")?;
        *slot = coin_posterior(&CoinDataset::new(n, x)?, &coin.inner);
        Ok(())
    })
}

/// Exact P{alpha < P1 < 1 - alpha} over binomial data.
///
/// # Safety
/// `coin` must be a live handle and `out_prob` writable.
#[no_mangle]
pub unsafe extern "C" fn paradox_coin_prob_nonextreme(
    coin: *const ParadoxCoin,
    n: u64,
    alpha: f64,
    out_prob: *mut f64,
) -> ParadoxStatus {
    guard(|| {
        let coin = coin.as_ref().ok_or(Failure::Null("coin"))?;
        let slot = out(out_prob, "out_prob")?;
        *slot = prob_nonextreme_exact(n, alpha, &coin.inner)?;
        Ok(())
    })
}

/// P1 for the sign comparison (mean <= 0 vs mean > 0) given the sample mean.
///
/// # Safety
/// `out_p1` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paradox_balance_sign_posterior(
    tau: f64,
    xi: f64,
    n: u64,
    xbar: f64,
    out_p1: *mut f64,
) -> ParadoxStatus {
    guard(|| {
        let slot = out(out_p1, "out_p1")?;
        let cfg = SignModelConfig::new(tau, xi, n)?;
        *slot = posterior_sign_model(&GaussianSummary::new(n, xbar, 0.0)?, &cfg);
        Ok(())
    })
}

/// log(P1/P2) for two fixed-precision normal models; `s2` uses divisor n.
///
/// # Safety
/// `out_log_odds` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paradox_balance_variance_log_odds(
    tau1: f64,
    tau2: f64,
    xi: f64,
    n: u64,
    xbar: f64,
    s2: f64,
    out_log_odds: *mut f64,
) -> ParadoxStatus {
    guard(|| {
        let slot = out(out_log_odds, "out_log_odds")?;
        let cfg = VariancePairConfig::new(tau1, tau2, xi, n)?;
        *slot = log_posterior_odds_variance(&GaussianSummary::new(n, xbar, s2)?, &cfg);
        Ok(())
    })
}

/// The precision above 1 that is as far from N(0, 1) as precision `tau1`.
///
/// # Safety
/// `out_tau2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paradox_equally_wrong_partner(tau1: f64, out_tau2: *mut f64) -> ParadoxStatus {
    guard(|| {
        let slot = out(out_tau2, "out_tau2")?;
        *slot = equally_wrong_partner(tau1)?;
        Ok(())
    })
}

fn topology4(code: u32) -> Result<Topology4, Failure> {
    Ok(match code {
        0 => Topology4::Star,
        1 => Topology4::T1,
        2 => Topology4::T2,
        3 => Topology4::T3,
        _ => return Err(Error::Domain(format!("quartet topology code must be 0..=3, got {code}")).into()),
    })
}

fn rates(gamma_shape: f64) -> Result<RateModel, Failure> {
    Ok(if gamma_shape.is_infinite() && gamma_shape > 0.0 { RateModel::jc() } else { RateModel::gamma(gamma_shape)? })
}

/// The 15 quartet site-pattern class probabilities.
///
/// `topology`: 0 star, 1 ((0,1),(2,3)), 2 ((0,2),(1,3)), 3 ((0,3),(1,2)).
/// `branches`: 5 lengths, internal first then taxa 0..3. `gamma_shape`
/// INFINITY selects plain JC.
///
/// # Safety
/// `branches` must point to 5 doubles and `out_probs` to 15.
#[no_mangle]
pub unsafe extern "C" fn paradox_quartet_pattern_probs(
    topology: u32,
    branches: *const f64,
    gamma_shape: f64,
    out_probs: *mut f64,
) -> ParadoxStatus {
    guard(|| {
        let bl: [f64; 5] = slice_in(branches, 5, "branches")?.try_into().expect("length 5");
        let dst = slice_out(out_probs, QUARTET_CLASSES, "out_probs")?;
        dst.copy_from_slice(&pattern_probs_4taxon(topology4(topology)?, &bl, &rates(gamma_shape)?)?);
        Ok(())
    })
}

/// Posterior of the three rooted triplet trees by quadrature under JC.
///
/// # Safety
/// `counts` must point to 5 class counts and `out_posterior` to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn paradox_triplet_tree_posteriors(
    counts: *const u64,
    prior_mean_t0: f64,
    prior_mean_t1: f64,
    points_per_dim: usize,
    out_posterior: *mut f64,
) -> ParadoxStatus {
    guard(|| {
        let c = SitePatternCounts::new(3, slice_in(counts, TRIPLET_CLASSES, "counts")?.to_vec())?;
        let dst = slice_out(out_posterior, 3, "out_posterior")?;
        let prior = PhyloPrior::new(prior_mean_t0, prior_mean_t1, PhyloPrior::default().mean_all)?;
        dst.copy_from_slice(&tree_posteriors_3taxon(&c, &prior, points_per_dim)?.p);
        Ok(())
    })
}

/// Posterior of the three quartet trees by MCMC under JC. `out_gap` receives
/// the largest disagreement between chains.
///
/// # Safety
/// `counts` must point to 15 class counts, `out_posterior` to 3 doubles and
/// `out_gap` to one double (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn paradox_quartet_tree_posteriors_mcmc(
    counts: *const u64,
    prior_mean: f64,
    iterations: u64,
    chains: usize,
    seed: u64,
    out_posterior: *mut f64,
    out_gap: *mut f64,
) -> ParadoxStatus {
    guard(|| {
        let c = SitePatternCounts::new(4, slice_in(counts, QUARTET_CLASSES, "counts")?.to_vec())?;
        let dst = slice_out(out_posterior, 3, "out_posterior")?;
        let defaults = PhyloPrior::default();
        let prior = PhyloPrior::new(defaults.mean_t0, defaults.mean_t1, prior_mean)?;
        let mut config = McmcConfig::new(iterations, seed);
        config.chains = chains;
        let post = mcmc_tree_posteriors_4taxon(&c, &prior, &config)?;
        dst.copy_from_slice(&post.p);
        if let Some(gap) = out_gap.as_mut() {
            *gap = post.diagnostics.get("chain_gap").copied().unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Parses a TOML experiment configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out_config` writable.
#[no_mangle]
pub unsafe extern "C" fn paradox_config_from_toml(toml: *const c_char, out_config: *mut *mut ParadoxConfig) -> ParadoxStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        let inner = ExperimentConfig::from_toml_str(str_in(toml, "toml")?)?;
        inner.validate()?;
        *slot = Box::into_raw(Box::new(ParadoxConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn paradox_config_set_output_dir(config: *mut ParadoxConfig, dir: *const c_char) -> ParadoxStatus {
    guard(|| {
        let config = config.as_mut().ok_or(Failure::Null("config"))?;
        config.inner.output_dir = Some(PathBuf::from(str_in(dir, "dir")?));
        Ok(())
    })
}

/// Runs the configured experiment and writes its report files.
/// `out_rows` (may be NULL) receives the number of replicate rows.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn paradox_run_experiment(config: *const ParadoxConfig, out_rows: *mut u64) -> ParadoxStatus {
    guard(|| {
        let config = config.as_ref().ok_or(Failure::Null("config"))?;
        let report = run_experiment(&config.inner)?;
        if let Some(rows) = out_rows.as_mut() {
            *rows = report.rows as u64;
        }
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle from `paradox_config_from_toml` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn paradox_config_free(config: *mut ParadoxConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}
