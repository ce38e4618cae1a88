//! Brute-force isochromat simulation.
//!
//! A voxel is represented by `n` spin packets whose dephasing per unit
//! gradient moment is spread uniformly over one full cycle. Every packet
//! is rotated and relaxed with the full Bloch equations and the voxel
//! signal is the mean transverse magnetization. This path shares nothing
//! with the configuration-state code and is used to validate it.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::sequence::{FispMrf, Recovery, SequenceSpec, SpinEcho, Tse};
use super::simulate::{Fingerprint, MAX_REPETITIONS, STEADY_STATE_TOL};
use super::TissueParams;
use crate::error::{ensure, Result};

pub const MIN_SPINS: usize = 100;

#[derive(Debug, Clone)]
pub struct Isochromats {
    mx: Vec<f64>,
    my: Vec<f64>,
    mz: Vec<f64>,
    // per-packet phase accrued per unit gradient moment
    dephase: Vec<(f64, f64)>,
    m0: f64,
}

impl Isochromats {
    pub fn new(n: usize, m0: f64) -> Self {
        let dephase = (0..n)
            .map(|j| {
                let theta = TAU * (j as f64 + 0.5) / n as f64;
                (theta.cos(), theta.sin())
            })
            .collect();
        Isochromats { mx: vec![0.0; n], my: vec![0.0; n], mz: vec![m0; n], dephase, m0 }
    }

    pub fn len(&self) -> usize {
        self.mx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mx.is_empty()
    }

    /// Right-handed rotation by `flip` about the axis `(cos phase, sin phase, 0)`.
    pub fn rf(&mut self, flip: f64, phase: f64) {
        let (ux, uy) = (phase.cos(), phase.sin());
        let (s, c) = flip.sin_cos();
        let t = 1.0 - c;
        // Rodrigues rotation matrix for unit axis (ux, uy, 0)
        let r = [[c + ux * ux * t, ux * uy * t, uy * s], [ux * uy * t, c + uy * uy * t, -ux * s], [-uy * s, ux * s, c]];
        for j in 0..self.len() {
            let (x, y, z) = (self.mx[j], self.my[j], self.mz[j]);
            self.mx[j] = r[0][0] * x + r[0][1] * y + r[0][2] * z;
            self.my[j] = r[1][0] * x + r[1][1] * y + r[1][2] * z;
            self.mz[j] = r[2][0] * x + r[2][1] * y + r[2][2] * z;
        }
    }

    pub fn relax(&mut self, dt_ms: f64, params: &TissueParams) {
        let e1 = (-dt_ms / params.t1_ms()).exp();
        let e2 = (-dt_ms / params.t2_ms()).exp();
        for j in 0..self.len() {
            self.mx[j] *= e2;
            self.my[j] *= e2;
            self.mz[j] = self.mz[j] * e1 + self.m0 * (1.0 - e1);
        }
    }

    /// Precession of every packet through its per-moment phase, `moments` times.
    pub fn dephase(&mut self, moments: i32) {
        for j in 0..self.len() {
            let (c, mut s) = self.dephase[j];
            if moments < 0 {
                s = -s;
            }
            for _ in 0..moments.unsigned_abs() {
                let (x, y) = (self.mx[j], self.my[j]);
                self.mx[j] = c * x - s * y;
                self.my[j] = s * x + c * y;
            }
        }
    }

    pub fn spoil(&mut self) {
        self.mx.iter_mut().for_each(|v| *v = 0.0);
        self.my.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Mean transverse magnetization `Mx + i My`.
    pub fn signal(&self) -> Complex64 {
        let n = self.len() as f64;
        let x: f64 = self.mx.iter().sum();
        let y: f64 = self.my.iter().sum();
        Complex64::new(x / n, y / n)
    }

    pub fn mz(&self) -> &[f64] {
        &self.mz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSignal {
    Series(Fingerprint),
    Intensity(f64),
}

impl OracleSignal {
    pub fn series(self) -> Option<Fingerprint> {
        match self {
            OracleSignal::Series(f) => Some(f),
            OracleSignal::Intensity(_) => None,
        }
    }

    pub fn intensity(&self) -> Option<f64> {
        match self {
            OracleSignal::Intensity(v) => Some(*v),
            OracleSignal::Series(_) => None,
        }
    }
}

/// Simulates `spec` with `n_spins` isochromats. Fingerprint sequences
/// return the complex series; spin echo variants return the steady-state
/// echo magnitude.
pub fn bloch_isochromat_oracle(params: &TissueParams, spec: &SequenceSpec, n_spins: usize) -> Result<OracleSignal> {
    ensure(n_spins >= MIN_SPINS, || format!("need at least {MIN_SPINS} isochromats, got {n_spins}"))?;
    spec.validate()?;
    Ok(match spec {
        SequenceSpec::FispMrf(s) => OracleSignal::Series(fisp(params, s, n_spins)),
        SequenceSpec::SpinEcho(s) => OracleSignal::Intensity(spin_echo(params, s, n_spins)),
        SequenceSpec::Tse(s) => OracleSignal::Intensity(train(params, s, None, n_spins)),
        SequenceSpec::FlairTse(s) => OracleSignal::Intensity(train(params, &s.readout(), Some(s.ti_ms), n_spins)),
    })
}

fn fisp(params: &TissueParams, spec: &FispMrf, n: usize) -> Fingerprint {
    let mut spins = Isochromats::new(n, 1.0);
    if spec.inversion_prep {
        spins.rf(PI, 0.0);
        spins.relax(spec.inversion_delay_ms, params);
        spins.spoil();
    }
    let samples = spec
        .flip_schedule
        .iter()
        .map(|&flip| {
            spins.rf(flip, 0.0);
            spins.relax(spec.te_ms, params);
            let s = spins.signal() * params.pd();
            spins.relax(spec.tr_ms - spec.te_ms, params);
            spins.dephase(1);
            s
        })
        .collect();
    Fingerprint::new(samples)
}

fn spin_echo(params: &TissueParams, spec: &SpinEcho, n: usize) -> f64 {
    let mut spins = Isochromats::new(n, 1.0);
    let mut echo = 0.0;
    for _ in 0..MAX_REPETITIONS {
        let before = spins.mz().to_vec();
        spins.rf(FRAC_PI_2, 0.0);
        spins.relax(0.5 * spec.te_ms, params);
        spins.dephase(1);
        spins.rf(PI, FRAC_PI_2);
        spins.relax(0.5 * spec.te_ms, params);
        spins.dephase(1);
        echo = spins.signal().norm();
        spins.relax(spec.tr_ms - spec.te_ms, params);
        spins.spoil();
        if max_diff(&before, spins.mz()) < STEADY_STATE_TOL {
            break;
        }
    }
    params.pd() * echo
}

fn train(params: &TissueParams, spec: &Tse, ti_ms: Option<f64>, n: usize) -> f64 {
    let idx = spec.echo_index();
    let mut spins = Isochromats::new(n, 1.0);
    let mut echo = 0.0;
    for _ in 0..MAX_REPETITIONS {
        let before = spins.mz().to_vec();
        if let Some(ti) = ti_ms {
            spins.rf(PI, 0.0);
            spins.relax(ti, params);
            spins.spoil();
        }
        spins.rf(FRAC_PI_2, 0.0);
        for e in 1..=spec.etl {
            spins.relax(0.5 * spec.esp_ms, params);
            spins.dephase(1);
            spins.rf(spec.refocus_rad, FRAC_PI_2);
            spins.relax(0.5 * spec.esp_ms, params);
            spins.dephase(1);
            if e == idx {
                echo = spins.signal().norm();
            }
        }
        if spec.recovery == Recovery::Full {
            break;
        }
        let used = ti_ms.unwrap_or(0.0) + spec.etl as f64 * spec.esp_ms;
        spins.relax(spec.tr_ms - used, params);
        spins.spoil();
        if max_diff(&before, spins.mz()) < STEADY_STATE_TOL {
            break;
        }
    }
    params.pd() * echo
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
