//! C interface. Objects are opaque heap handles released with the matching
//! `*_free`. Every fallible call returns an [`LdsStatus`]; on failure the
//! message is available from [`lds_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use lds_bandit::policy::{instantaneous_regret, Policy, SbEtc};
use lds_bandit::{DiscreteLinearSystem, Error, ExperimentConfig, RngSeed, SimState};
use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    NonConvergence = 4,
    InvalidState = 5,
    Construction = 6,
    Io = 7,
    Serialization = 8,
    Plot = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LdsStatus, msg: impl Into<String>) -> LdsStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &Error) -> LdsStatus {
    match err {
        Error::InvalidInput(_) => LdsStatus::InvalidInput,
        Error::Numerical(_) => LdsStatus::Numerical,
        Error::NonConvergence { .. } => LdsStatus::NonConvergence,
        Error::InvalidState(_) => LdsStatus::InvalidState,
        Error::Construction(_) => LdsStatus::Construction,
        Error::Io(_) => LdsStatus::Io,
        Error::Json(_) => LdsStatus::Serialization,
        Error::Plot(_) => LdsStatus::Plot,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), LdsStatus>) -> LdsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LdsStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(LdsStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, LdsStatus>;
}

impl<T> OrStatus<T> for lds_bandit::Result<T> {
    fn or_status(self) -> Result<T, LdsStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, LdsStatus> {
    if s.is_null() {
        return Err(fail(LdsStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(LdsStatus::InvalidInput, "string is not valid UTF-8"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, LdsStatus> {
    p.as_ref().ok_or_else(|| fail(LdsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, LdsStatus> {
    p.as_mut().ok_or_else(|| fail(LdsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), LdsStatus> {
    if out.is_null() {
        return Err(fail(LdsStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), LdsStatus> {
    if out.is_null() {
        return Err(fail(LdsStatus::NullPointer, "output pointer is null"));
    }
    *out = CString::new(s).map_err(|_| fail(LdsStatus::Serialization, "output contains NUL"))?.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lds_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

pub struct LdsSystem(Arc<DiscreteLinearSystem>);

/// Parse a system from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lds_system_from_json(json: *const c_char, out: *mut *mut LdsSystem) -> LdsStatus {
    guard(|| {
        let sys = DiscreteLinearSystem::from_json(read_str(json)?).or_status()?;
        write_out(out, LdsSystem(Arc::new(sys)))
    })
}

/// Build the trading system. `spec_json` may be null for the defaults.
///
/// # Safety
/// `spec_json` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lds_system_trading(spec_json: *const c_char, out: *mut *mut LdsSystem) -> LdsStatus {
    guard(|| {
        let spec = if spec_json.is_null() {
            Default::default()
        } else {
            serde_json::from_str(read_str(spec_json)?).map_err(|e| fail(LdsStatus::Serialization, e.to_string()))?
        };
        let sys = lds_bandit::build_trading_system(&spec).or_status()?;
        write_out(out, LdsSystem(Arc::new(sys)))
    })
}

/// State, context and arm counts.
///
/// # Safety
/// `system` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lds_system_dims(
    system: *const LdsSystem,
    state_dim: *mut usize,
    context_dim: *mut usize,
    num_actions: *mut usize,
) -> LdsStatus {
    guard(|| {
        let sys = &deref(system, "system")?.0;
        *deref_mut(state_dim, "state_dim")? = sys.state_dim();
        *deref_mut(context_dim, "context_dim")? = sys.context_dim();
        *deref_mut(num_actions, "num_actions")? = sys.num_actions();
        Ok(())
    })
}

/// Serialize to JSON; release the result with [`lds_string_free`].
///
/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lds_system_to_json(system: *const LdsSystem, out: *mut *mut c_char) -> LdsStatus {
    guard(|| {
        let json = deref(system, "system")?.0.to_json().or_status()?;
        write_string(out, json)
    })
}

/// # Safety
/// `system` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lds_system_free(system: *mut LdsSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

pub struct LdsSimulator {
    system: Arc<DiscreteLinearSystem>,
    state: SimState,
    rng: ChaCha8Rng,
}

/// Start a trajectory on stream `(seed, run)`. The simulator keeps its own
/// reference to the system.
///
/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lds_simulator_new(system: *const LdsSystem, seed: u64, run: u64, out: *mut *mut LdsSimulator) -> LdsStatus {
    guard(|| {
        let system = Arc::clone(&deref(system, "system")?.0);
        let mut rng = RngSeed(seed).stream(run);
        let state = system.init_state(&mut rng);
        write_out(out, LdsSimulator { system, state, rng })
    })
}

/// Play `arm` for one round. Writes the context (`context_len` must equal the
/// context dimension), the reward, and the round's instantaneous regret.
///
/// # Safety
/// `sim` must be a live handle; `context` must have room for `context_len`
/// doubles; `reward` and `regret` must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn lds_simulator_step(
    sim: *mut LdsSimulator,
    arm: usize,
    context: *mut f64,
    context_len: usize,
    reward: *mut f64,
    regret: *mut f64,
) -> LdsStatus {
    guard(|| {
        let sim = deref_mut(sim, "simulator")?;
        let m = sim.system.context_dim();
        if context.is_null() {
            return Err(fail(LdsStatus::NullPointer, "context buffer is null"));
        }
        if context_len < m {
            return Err(fail(LdsStatus::BufferTooSmall, format!("context buffer holds {context_len}, need {m}")));
        }
        let sample = sim.system.step(&mut sim.state, arm, &mut sim.rng).or_status()?;
        let r = instantaneous_regret(&sim.system, &sample.latent, arm).or_status()?;
        std::slice::from_raw_parts_mut(context, m).copy_from_slice(sample.context.as_slice());
        if let Some(out) = reward.as_mut() {
            *out = sample.reward;
        }
        if let Some(out) = regret.as_mut() {
            *out = r;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lds_simulator_free(sim: *mut LdsSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

pub struct LdsSbEtc(SbEtc);

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lds_sbetc_new(k: usize, m: usize, s: usize, lambda: f64, out: *mut *mut LdsSbEtc) -> LdsStatus {
    guard(|| write_out(out, LdsSbEtc(SbEtc::new(k, m, s, lambda).or_status()?)))
}

/// # Safety
/// `policy` must be a live handle; `arm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lds_sbetc_choose(policy: *const LdsSbEtc, arm: *mut usize) -> LdsStatus {
    guard(|| {
        let choice = deref(policy, "policy")?.0.choose().or_status()?;
        *deref_mut(arm, "arm")? = choice;
        Ok(())
    })
}

/// # Safety
/// `policy` must be a live handle; `context` must point to `context_len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn lds_sbetc_update(
    policy: *mut LdsSbEtc,
    context: *const f64,
    context_len: usize,
    arm: usize,
    reward: f64,
) -> LdsStatus {
    guard(|| {
        let policy = deref_mut(policy, "policy")?;
        if context.is_null() {
            return Err(fail(LdsStatus::NullPointer, "context is null"));
        }
        let ctx = DVector::from_column_slice(std::slice::from_raw_parts(context, context_len));
        policy.0.update(&ctx, arm, reward).or_status()
    })
}

/// Copy arm `arm`'s current estimate `Ĝ_a` (length `m·s + 1`) into `out`.
///
/// # Safety
/// `policy` must be a live handle; `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lds_sbetc_estimate(policy: *const LdsSbEtc, arm: usize, out: *mut f64, len: usize) -> LdsStatus {
    guard(|| {
        let policy = deref(policy, "policy")?;
        let est = policy
            .0
            .estimates()
            .get(arm)
            .ok_or_else(|| fail(LdsStatus::InvalidInput, format!("arm {arm} out of range")))?;
        let g = est.g_hat();
        if out.is_null() {
            return Err(fail(LdsStatus::NullPointer, "output buffer is null"));
        }
        if len < g.len() {
            return Err(fail(LdsStatus::BufferTooSmall, format!("buffer holds {len}, need {}", g.len())));
        }
        std::slice::from_raw_parts_mut(out, g.len()).copy_from_slice(g.as_slice());
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lds_sbetc_free(policy: *mut LdsSbEtc) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Run an experiment from a JSON config and return the aggregated curves as
/// JSON: `{"curves": [{"policy", "runs", "inst_mean", "inst_se",
/// "cum_mean"}], "checksums": [...]}`. Nothing is written to disk.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lds_run_experiment_json(config_json: *const c_char, out: *mut *mut c_char) -> LdsStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(read_str(config_json)?).or_status()?;
        let res = lds_bandit::run_experiment(&cfg).or_status()?;
        let curves: Vec<_> = res
            .curves
            .iter()
            .map(|c| {
                serde_json::json!({
                    "policy": c.policy,
                    "runs": c.runs,
                    "inst_mean": c.inst_mean,
                    "inst_se": c.inst_se,
                    "cum_mean": c.cum_mean,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "curves": curves,
            "checksums": res.checksums.iter().map(|c| format!("{c:016x}")).collect::<Vec<_>>(),
        });
        write_string(out, doc.to_string())
    })
}
