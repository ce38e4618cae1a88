//! Extended phase graph simulation.
//!
//! Magnetization inside a voxel is tracked as a ladder of configuration
//! states `(F+_k, F-_k, Z_k)`, `k = 0..=K`. Three operators act on the
//! ladder: an RF rotation mixing the three components of each order, a
//! relaxation step, and a gradient shift moving transverse states between
//! orders. Sequences built from these live in [`simulate`]; a brute-force
//! isochromat simulator used to validate them lives in [`bloch`].

pub mod bloch;
pub mod sequence;
pub mod simulate;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub use sequence::{ContrastSpecs, FispMrf, FlairTse, Recovery, SequenceSpec, SpinEcho, Tse};
pub use simulate::{simulate_fingerprint, simulate_flair, simulate_se_closed_form, simulate_tse, Fingerprint};

/// Relaxation and density of one voxel. Times in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTissue", into = "RawTissue")]
pub struct TissueParams {
    t1_ms: f64,
    t2_ms: f64,
    pd: f64,
}

#[derive(Serialize, Deserialize)]
struct RawTissue {
    t1_ms: f64,
    t2_ms: f64,
    pd: f64,
}

impl TryFrom<RawTissue> for TissueParams {
    type Error = crate::Error;
    fn try_from(r: RawTissue) -> Result<Self> {
        TissueParams::new(r.t1_ms, r.t2_ms, r.pd)
    }
}

impl From<TissueParams> for RawTissue {
    fn from(p: TissueParams) -> Self {
        RawTissue { t1_ms: p.t1_ms, t2_ms: p.t2_ms, pd: p.pd }
    }
}

impl TissueParams {
    /// Rejects non-positive relaxation times, negative density and
    /// `t2 > t1` pairs.
    pub fn new(t1_ms: f64, t2_ms: f64, pd: f64) -> Result<Self> {
        ensure(t1_ms.is_finite() && t1_ms > 0.0, || format!("t1 must be positive, got {t1_ms}"))?;
        ensure(t2_ms.is_finite() && t2_ms > 0.0, || format!("t2 must be positive, got {t2_ms}"))?;
        ensure(pd.is_finite() && pd >= 0.0, || format!("pd must be non-negative, got {pd}"))?;
        ensure(t2_ms <= t1_ms, || format!("t2 ({t2_ms} ms) exceeds t1 ({t1_ms} ms)"))?;
        Ok(TissueParams { t1_ms, t2_ms, pd })
    }

    pub fn t1_ms(&self) -> f64 {
        self.t1_ms
    }

    pub fn t2_ms(&self) -> f64 {
        self.t2_ms
    }

    pub fn pd(&self) -> f64 {
        self.pd
    }

    pub fn with_pd(&self, pd: f64) -> Result<Self> {
        TissueParams::new(self.t1_ms, self.t2_ms, pd)
    }
}

/// Configuration-state ladder.
///
/// `f_minus[0]` duplicates `conj(f_plus[0])`; both are stored so every
/// order has the same three-component layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EpgState {
    f_plus: Vec<Complex64>,
    f_minus: Vec<Complex64>,
    z: Vec<Complex64>,
    m0: f64,
    // highest order that may be non-zero
    occupied: usize,
    dropped_energy: f64,
}

impl EpgState {
    /// Equilibrium ladder with orders `0..=max_order`.
    pub fn equilibrium(max_order: usize, m0: f64) -> Self {
        let n = max_order + 1;
        let mut z = vec![Complex64::default(); n];
        z[0] = Complex64::new(m0, 0.0);
        EpgState {
            f_plus: vec![Complex64::default(); n],
            f_minus: vec![Complex64::default(); n],
            z,
            m0,
            occupied: 0,
            dropped_energy: 0.0,
        }
    }

    /// Builds a ladder from explicit components; all three must share a
    /// non-zero length.
    pub fn from_parts(f_plus: Vec<Complex64>, f_minus: Vec<Complex64>, z: Vec<Complex64>, m0: f64) -> Result<Self> {
        ensure(!f_plus.is_empty(), || "empty ladder".into())?;
        ensure(f_plus.len() == f_minus.len() && f_plus.len() == z.len(), || {
            "ladder components differ in length".into()
        })?;
        ensure(m0.is_finite(), || "m0 must be finite".into())?;
        let occupied = f_plus.len() - 1;
        Ok(EpgState { f_plus, f_minus, z, m0, occupied, dropped_energy: 0.0 })
    }

    pub fn max_order(&self) -> usize {
        self.f_plus.len() - 1
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn f_plus(&self) -> &[Complex64] {
        &self.f_plus
    }

    pub fn f_minus(&self) -> &[Complex64] {
        &self.f_minus
    }

    pub fn z(&self) -> &[Complex64] {
        &self.z
    }

    /// Transverse signal at the echo position.
    pub fn signal(&self) -> Complex64 {
        self.f_plus[0]
    }

    /// Transverse energy with each dephasing order counted once
    /// (`F+_0` and `F-_0` describe the same state).
    pub fn transverse_energy(&self) -> f64 {
        let plus: f64 = self.f_plus.iter().map(|c| c.norm_sqr()).sum();
        let minus: f64 = self.f_minus[1..].iter().map(|c| c.norm_sqr()).sum();
        plus + minus
    }

    /// Energy lost so far by shifting occupied states past the top order.
    pub fn dropped_energy(&self) -> f64 {
        self.dropped_energy
    }

    /// RF rotation by `flip` about the transverse axis at angle `phase`.
    pub fn rf(&mut self, flip: f64, phase: f64) -> Result<()> {
        ensure(flip.is_finite() && phase.is_finite(), || {
            format!("non-finite rf parameters (flip={flip}, phase={phase})")
        })?;
        if flip == 0.0 {
            return Ok(());
        }
        let half = 0.5 * flip;
        let c2 = half.cos().powi(2);
        let s2 = half.sin().powi(2);
        let s = flip.sin();
        let c = flip.cos();
        let e1 = Complex64::from_polar(1.0, phase);
        let e2 = e1 * e1;
        let i = Complex64::i();
        // standard rotation mixing matrix, row by row
        let a12 = e2 * s2;
        let a13 = -i * e1 * s;
        let a21 = e2.conj() * s2;
        let a23 = i * e1.conj() * s;
        let a31 = -0.5 * i * e1.conj() * s;
        let a32 = 0.5 * i * e1 * s;
        for k in 0..=self.occupied {
            let fp = self.f_plus[k];
            let fm = self.f_minus[k];
            let zk = self.z[k];
            self.f_plus[k] = c2 * fp + a12 * fm + a13 * zk;
            self.f_minus[k] = a21 * fp + c2 * fm + a23 * zk;
            self.z[k] = a31 * fp + a32 * fm + c * zk;
        }
        Ok(())
    }

    /// Free relaxation over `dt_ms`.
    pub fn relax(&mut self, dt_ms: f64, params: &TissueParams) -> Result<()> {
        ensure(dt_ms.is_finite() && dt_ms >= 0.0, || format!("negative or non-finite interval {dt_ms}"))?;
        let e1 = (-dt_ms / params.t1_ms()).exp();
        let e2 = (-dt_ms / params.t2_ms()).exp();
        self.relax_factors(e1, e2);
        Ok(())
    }

    pub(crate) fn relax_factors(&mut self, e1: f64, e2: f64) {
        for k in 0..=self.occupied {
            self.f_plus[k] *= e2;
            self.f_minus[k] *= e2;
            self.z[k] *= e1;
        }
        self.z[0] += (1.0 - e1) * self.m0;
    }

    /// Dephasing by `shifts` unit gradient moments. Positive shifts move
    /// `F+` states to higher orders; states pushed past the top order are
    /// dropped and their energy accounted in [`dropped_energy`](Self::dropped_energy).
    pub fn grad(&mut self, shifts: i32) -> Result<()> {
        ensure(shifts.unsigned_abs() as usize <= self.max_order(), || {
            format!("shift {shifts} exceeds ladder size {}", self.max_order())
        })?;
        for _ in 0..shifts.unsigned_abs() {
            if shifts > 0 {
                self.shift_up();
            } else {
                self.shift_down();
            }
        }
        Ok(())
    }

    fn shift_up(&mut self) {
        let top = self.max_order();
        let hi = (self.occupied + 1).min(top);
        if self.occupied == top {
            self.dropped_energy += self.f_plus[top].norm_sqr();
        }
        // F+_{k+1} <- F+_k
        self.f_plus.copy_within(0..hi, 1);
        // F-_k <- F-_{k+1}
        self.f_minus.copy_within(1..=hi, 0);
        if hi == top {
            self.f_minus[top] = Complex64::default();
        }
        self.f_plus[0] = self.f_minus[0].conj();
        self.occupied = hi;
    }

    fn shift_down(&mut self) {
        let top = self.max_order();
        let hi = (self.occupied + 1).min(top);
        if self.occupied == top {
            self.dropped_energy += self.f_minus[top].norm_sqr();
        }
        self.f_minus.copy_within(0..hi, 1);
        self.f_plus.copy_within(1..=hi, 0);
        if hi == top {
            self.f_plus[top] = Complex64::default();
        }
        self.f_minus[0] = self.f_plus[0].conj();
        self.occupied = hi;
    }

    /// Ideal spoiling: all transverse states are destroyed.
    pub fn spoil(&mut self) {
        for k in 0..=self.occupied {
            self.f_plus[k] = Complex64::default();
            self.f_minus[k] = Complex64::default();
        }
    }
}
