use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::sequence::{FispMrf, FlairTse, Recovery, SpinEcho, Tse};
use super::{EpgState, TissueParams};
use crate::error::{invalid, Result};

/// Upper bound on repetitions used to reach the TR steady state.
pub const MAX_REPETITIONS: usize = 2000;
/// Steady state is declared once longitudinal states move less than this
/// between consecutive repetitions.
pub const STEADY_STATE_TOL: f64 = 1e-13;

/// Complex signal time series of one voxel or dictionary atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub samples: Vec<Complex64>,
    /// Euclidean norm of `samples` when the fingerprint was created.
    pub norm: f64,
}

impl Fingerprint {
    pub fn new(samples: Vec<Complex64>) -> Self {
        let norm = l2_norm(&samples);
        Fingerprint { samples, norm }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Unit-norm copy; zero fingerprints are returned unchanged.
    pub fn normalized(&self) -> Fingerprint {
        let n = l2_norm(&self.samples);
        if n == 0.0 {
            return self.clone();
        }
        let samples: Vec<_> = self.samples.iter().map(|s| s / n).collect();
        Fingerprint { norm: l2_norm(&samples), samples }
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// FISP fingerprint: per TR an RF pulse, relaxation to TE, readout of
/// `F+_0`, relaxation to TR and one unit spoiler shift.
pub fn simulate_fingerprint(params: &TissueParams, spec: &FispMrf) -> Result<Fingerprint> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.n_tr);
    if params.pd() == 0.0 {
        out.resize(spec.n_tr, Complex64::default());
        return Ok(Fingerprint::new(out));
    }
    let mut state = EpgState::equilibrium(spec.n_tr, 1.0);
    if spec.inversion_prep {
        state.rf(PI, 0.0)?;
        state.relax(spec.inversion_delay_ms, params)?;
        state.spoil();
    }
    let e1_te = (-spec.te_ms / params.t1_ms()).exp();
    let e2_te = (-spec.te_ms / params.t2_ms()).exp();
    let rest = spec.tr_ms - spec.te_ms;
    let e1_rest = (-rest / params.t1_ms()).exp();
    let e2_rest = (-rest / params.t2_ms()).exp();
    for &flip in &spec.flip_schedule {
        state.rf(flip, 0.0)?;
        state.relax_factors(e1_te, e2_te);
        out.push(state.signal() * params.pd());
        state.relax_factors(e1_rest, e2_rest);
        state.grad(1)?;
    }
    Ok(Fingerprint::new(out))
}

/// Closed-form spin echo intensity
/// `PD * (1 - exp(-(TR - TE) / T1)) * exp(-TE / T2)`.
pub fn simulate_se_closed_form(params: &TissueParams, spec: &SpinEcho) -> Result<f64> {
    spec.validate()?;
    let recovery = 1.0 - (-(spec.tr_ms - spec.te_ms) / params.t1_ms()).exp();
    let decay = (-spec.te_ms / params.t2_ms()).exp();
    Ok(params.pd() * recovery * decay)
}

/// TSE echo magnitude at the echo nearest `te_eff`, under the spec's
/// [`Recovery`] model.
pub fn simulate_tse(params: &TissueParams, spec: &Tse) -> Result<f64> {
    spec.validate()?;
    if params.pd() == 0.0 {
        return Ok(0.0);
    }
    let echo = echo_train(params, spec, None)?;
    Ok(params.pd() * echo)
}

/// FLAIR echo magnitude: ideal inversion, delay TI, then the TSE readout
/// of [`simulate_tse`].
pub fn simulate_flair(params: &TissueParams, spec: &FlairTse) -> Result<f64> {
    spec.validate()?;
    if params.pd() == 0.0 {
        return Ok(0.0);
    }
    let echo = echo_train(params, &spec.readout(), Some(spec.ti_ms))?;
    Ok(params.pd() * echo)
}

/// Echo magnitudes of a single TSE repetition started from equilibrium,
/// one per echo. Used to inspect the raw echo train.
pub fn tse_echo_train(params: &TissueParams, spec: &Tse) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut state = EpgState::equilibrium(train_orders(spec.etl), 1.0);
    let echoes = run_train(&mut state, params, spec, None)?;
    Ok(echoes.iter().map(|e| params.pd() * e.norm()).collect())
}

fn train_orders(etl: usize) -> usize {
    6 * etl + 2
}

/// One repetition: optional inversion and delay, 90 degree excitation,
/// `etl` CPMG refocusing pulses with one unit crusher on each side, then
/// recovery to TR and ideal spoiling. Returns every echo (unit density).
fn run_train(state: &mut EpgState, params: &TissueParams, spec: &Tse, ti_ms: Option<f64>) -> Result<Vec<Complex64>> {
    let half = 0.5 * spec.esp_ms;
    let e1 = (-half / params.t1_ms()).exp();
    let e2 = (-half / params.t2_ms()).exp();
    if let Some(ti) = ti_ms {
        state.rf(PI, 0.0)?;
        state.relax(ti, params)?;
        state.spoil();
    }
    state.rf(FRAC_PI_2, 0.0)?;
    let mut echoes = Vec::with_capacity(spec.etl);
    for _ in 0..spec.etl {
        state.relax_factors(e1, e2);
        state.grad(1)?;
        state.rf(spec.refocus_rad, FRAC_PI_2)?;
        state.relax_factors(e1, e2);
        state.grad(1)?;
        echoes.push(state.signal());
    }
    let used = ti_ms.unwrap_or(0.0) + spec.etl as f64 * spec.esp_ms;
    state.relax(spec.tr_ms - used, params)?;
    state.spoil();
    Ok(echoes)
}

fn echo_train(params: &TissueParams, spec: &Tse, ti_ms: Option<f64>) -> Result<f64> {
    let idx = spec.echo_index();
    if idx > spec.etl {
        return Err(invalid("effective echo time beyond the echo train"));
    }
    let unit = params.with_pd(1.0)?;
    let mut state = EpgState::equilibrium(train_orders(spec.etl), 1.0);
    if spec.recovery == Recovery::Full {
        return Ok(run_train(&mut state, &unit, spec, ti_ms)?[idx - 1].norm());
    }
    let mut echo = 0.0;
    for _ in 0..MAX_REPETITIONS {
        let before: Vec<Complex64> = state.z().to_vec();
        echo = run_train(&mut state, &unit, spec, ti_ms)?[idx - 1].norm();
        let delta = before.iter().zip(state.z()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if delta < STEADY_STATE_TOL {
            break;
        }
    }
    Ok(echo)
}
