//! Pulse sequence descriptions. All times in milliseconds, angles in radians.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Spoiled gradient-echo fingerprinting sequence with a varying flip angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FispMrf {
    pub n_tr: usize,
    pub te_ms: f64,
    pub tr_ms: f64,
    pub flip_schedule: Vec<f64>,
    pub inversion_prep: bool,
    /// Delay between the preparation inversion and the first excitation.
    pub inversion_delay_ms: f64,
}

pub const DEFAULT_N_TR: usize = 500;
pub const DEFAULT_SCHEDULE_SEED: u64 = 0;

impl FispMrf {
    pub fn new(n_tr: usize, schedule_seed: u64) -> Self {
        FispMrf {
            n_tr,
            te_ms: 3.3,
            tr_ms: 20.0,
            flip_schedule: default_flip_schedule(n_tr, schedule_seed),
            inversion_prep: true,
            inversion_delay_ms: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_tr >= 1, || "n_tr must be at least 1".into())?;
        ensure(self.flip_schedule.len() == self.n_tr, || {
            format!("flip schedule has {} entries, expected {}", self.flip_schedule.len(), self.n_tr)
        })?;
        ensure(self.flip_schedule.iter().all(|f| f.is_finite()), || "non-finite flip angle".into())?;
        positive(self.te_ms, "te")?;
        positive(self.tr_ms, "tr")?;
        ensure(self.te_ms < self.tr_ms, || format!("te {} must be below tr {}", self.te_ms, self.tr_ms))?;
        ensure(self.inversion_delay_ms.is_finite() && self.inversion_delay_ms >= 0.0, || {
            "inversion delay must be non-negative".into()
        })
    }
}

impl Default for FispMrf {
    fn default() -> Self {
        FispMrf::new(DEFAULT_N_TR, DEFAULT_SCHEDULE_SEED)
    }
}

/// Two half-sine lobes peaking at 70 and 50 degrees with a seeded
/// uniform jitter of up to 2 degrees, clamped at zero.
pub fn default_flip_schedule(n_tr: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n_tr.div_ceil(2).max(1);
    (0..n_tr)
        .map(|i| {
            let (peak, pos) = if i < half { (70.0, i) } else { (50.0, i - half) };
            let len = if i < half { half } else { (n_tr - half).max(1) };
            let base = peak * (std::f64::consts::PI * (pos as f64 + 0.5) / len as f64).sin();
            let jitter: f64 = rng.gen_range(-2.0..=2.0);
            (base + jitter).max(0.0).to_radians()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinEcho {
    pub te_ms: f64,
    pub tr_ms: f64,
}

impl Default for SpinEcho {
    fn default() -> Self {
        SpinEcho { te_ms: 15.0, tr_ms: 450.0 }
    }
}

impl SpinEcho {
    pub fn validate(&self) -> Result<()> {
        positive(self.te_ms, "te")?;
        positive(self.tr_ms, "tr")?;
        ensure(self.te_ms < self.tr_ms, || format!("te {} must be below tr {}", self.te_ms, self.tr_ms))
    }
}

/// Longitudinal state assumed before each spin-echo repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    /// Every repetition starts from equilibrium magnetization.
    #[default]
    Full,
    /// Repetitions are iterated until the TR steady state is reached.
    SteadyState,
}

/// Turbo spin echo with a CPMG refocusing train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tse {
    pub te_eff_ms: f64,
    pub tr_ms: f64,
    pub etl: usize,
    pub esp_ms: f64,
    /// Refocusing flip angle; pi for ideal refocusing.
    pub refocus_rad: f64,
    #[serde(default)]
    pub recovery: Recovery,
}

impl Default for Tse {
    fn default() -> Self {
        let te_eff_ms = 110.0;
        let etl = 16;
        Tse {
            te_eff_ms,
            tr_ms: 2000.0,
            etl,
            esp_ms: default_esp(te_eff_ms, etl),
            refocus_rad: std::f64::consts::PI,
            recovery: Recovery::Full,
        }
    }
}

/// `2 * te_eff / etl` rounded to 0.1 ms.
pub fn default_esp(te_eff_ms: f64, etl: usize) -> f64 {
    (2.0 * te_eff_ms / etl as f64 * 10.0).round() / 10.0
}

impl Tse {
    pub fn validate(&self) -> Result<()> {
        validate_train(self.te_eff_ms, self.tr_ms, self.etl, self.esp_ms, self.refocus_rad, 0.0)
    }

    /// 1-based index of the echo closest to the effective echo time.
    pub fn echo_index(&self) -> usize {
        echo_index(self.te_eff_ms, self.esp_ms)
    }
}

/// Inversion-recovery turbo spin echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlairTse {
    pub ti_ms: f64,
    pub te_eff_ms: f64,
    pub tr_ms: f64,
    pub etl: usize,
    pub esp_ms: f64,
    pub refocus_rad: f64,
    #[serde(default)]
    pub recovery: Recovery,
}

impl Default for FlairTse {
    fn default() -> Self {
        FlairTse {
            ti_ms: 2500.0,
            te_eff_ms: 120.0,
            tr_ms: 8500.0,
            etl: 41,
            esp_ms: 5.0,
            refocus_rad: std::f64::consts::PI,
            recovery: Recovery::Full,
        }
    }
}

impl FlairTse {
    pub fn validate(&self) -> Result<()> {
        positive(self.ti_ms, "ti")?;
        ensure(self.ti_ms < self.tr_ms, || format!("ti {} must be below tr {}", self.ti_ms, self.tr_ms))?;
        validate_train(self.te_eff_ms, self.tr_ms, self.etl, self.esp_ms, self.refocus_rad, self.ti_ms)
    }

    pub fn echo_index(&self) -> usize {
        echo_index(self.te_eff_ms, self.esp_ms)
    }

    pub fn readout(&self) -> Tse {
        Tse {
            te_eff_ms: self.te_eff_ms,
            tr_ms: self.tr_ms,
            etl: self.etl,
            esp_ms: self.esp_ms,
            refocus_rad: self.refocus_rad,
            recovery: self.recovery,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    FispMrf(FispMrf),
    SpinEcho(SpinEcho),
    Tse(Tse),
    FlairTse(FlairTse),
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SequenceSpec::FispMrf(s) => s.validate(),
            SequenceSpec::SpinEcho(s) => s.validate(),
            SequenceSpec::Tse(s) => s.validate(),
            SequenceSpec::FlairTse(s) => s.validate(),
        }
    }
}

/// The three conventional contrasts synthesized from a fingerprint scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ContrastSpecs {
    pub t1w: SpinEcho,
    pub t2w: Tse,
    pub flair: FlairTse,
}

impl ContrastSpecs {
    pub fn validate(&self) -> Result<()> {
        self.t1w.validate()?;
        self.t2w.validate()?;
        self.flair.validate()
    }
}

fn echo_index(te_eff_ms: f64, esp_ms: f64) -> usize {
    ((te_eff_ms / esp_ms).round() as usize).max(1)
}

fn positive(v: f64, name: &str) -> Result<()> {
    ensure(v.is_finite() && v > 0.0, || format!("{name} must be positive, got {v}"))
}

fn validate_train(te_eff: f64, tr: f64, etl: usize, esp: f64, refocus: f64, ti: f64) -> Result<()> {
    positive(te_eff, "te_eff")?;
    positive(tr, "tr")?;
    positive(esp, "esp")?;
    ensure(refocus.is_finite(), || "non-finite refocusing angle".into())?;
    ensure(etl >= 1, || "echo train length must be at least 1".into())?;
    ensure(te_eff < tr, || format!("te_eff {te_eff} must be below tr {tr}"))?;
    ensure(ti + etl as f64 * esp < tr, || format!("echo train ({etl} x {esp} ms) does not fit in tr {tr}"))?;
    ensure(echo_index(te_eff, esp) <= etl, || format!("te_eff {te_eff} lies beyond the echo train ({etl} x {esp} ms)"))
}
