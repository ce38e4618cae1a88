//! Experiment configuration: everything needed to regenerate a slice.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    forward_acquire, grid_recon, spiral, ForwardOptions, KSpace, MrfSeries, SpiralTrajectory, Trajectory,
};
use crate::dictionary::{build_dictionary, Dictionary, ParamGrid};
use crate::epg::sequence::{DEFAULT_N_TR, DEFAULT_SCHEDULE_SEED};
use crate::epg::{ContrastSpecs, FispMrf};
use crate::error::{ensure, Error, Result};
use crate::phantom::{ground_truth_contrasts, PhantomSlice, PhantomSpec};
use crate::synthesis::ContrastSet;

/// Readout pattern, sized from the phantom matrix and sequence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectorySpec {
    Spiral {
        samples_per_tr: usize,
        turns: f64,
        #[serde(default = "default_rotation_deg")]
        rotation_per_tr_deg: f64,
        #[serde(default = "default_inout_deg")]
        inout_rotation_deg: f64,
        #[serde(default = "default_readout_half_ms")]
        readout_half_ms: f64,
    },
    Cartesian,
}

fn default_rotation_deg() -> f64 {
    spiral::DEFAULT_ROTATION_DEG
}

fn default_inout_deg() -> f64 {
    spiral::DEFAULT_INOUT_ROTATION_DEG
}

fn default_readout_half_ms() -> f64 {
    spiral::DEFAULT_READOUT_HALF_MS
}

impl TrajectorySpec {
    /// Single-shot spiral that undersamples a 64 matrix about fourfold.
    pub fn undersampled_spiral() -> Self {
        Self::spiral(1024, 4.0)
    }

    pub fn spiral(samples_per_tr: usize, turns: f64) -> Self {
        TrajectorySpec::Spiral {
            samples_per_tr,
            turns,
            rotation_per_tr_deg: default_rotation_deg(),
            inout_rotation_deg: default_inout_deg(),
            readout_half_ms: default_readout_half_ms(),
        }
    }

    pub fn build(&self, matrix: usize, n_tr: usize) -> Result<Trajectory> {
        Ok(match *self {
            TrajectorySpec::Spiral {
                samples_per_tr,
                turns,
                rotation_per_tr_deg,
                inout_rotation_deg,
                readout_half_ms,
            } => Trajectory::Spiral(SpiralTrajectory::new(
                matrix,
                n_tr,
                samples_per_tr,
                turns,
                rotation_per_tr_deg.to_radians(),
                inout_rotation_deg.to_radians(),
                readout_half_ms,
            )?),
            TrajectorySpec::Cartesian => Trajectory::Cartesian { matrix, n_tr },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub phantom: PhantomSpec,
    /// Snap the tissue table to the dictionary grid before rasterizing.
    #[serde(default)]
    pub quantize_to_grid: bool,
    pub sequence: FispMrf,
    #[serde(default)]
    pub contrasts: ContrastSpecs,
    pub grid: ParamGrid,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub forward: ForwardOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// 64x64 desk phantom, 500 TRs, desk grid, undersampled spiral, no noise.
    pub fn desk(seed: u64) -> Self {
        ExperimentConfig {
            phantom: PhantomSpec::desk(seed),
            quantize_to_grid: false,
            sequence: FispMrf::new(DEFAULT_N_TR, DEFAULT_SCHEDULE_SEED),
            contrasts: ContrastSpecs::default(),
            grid: ParamGrid::desk(),
            trajectory: TrajectorySpec::undersampled_spiral(),
            forward: ForwardOptions::default(),
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.phantom.height == self.phantom.width, || {
            format!("phantom must be square, got {}x{}", self.phantom.height, self.phantom.width)
        })?;
        self.sequence.validate()?;
        self.contrasts.validate()?;
        self.grid.validate()?;
        if self.forward.model_b0 {
            ensure(matches!(self.trajectory, TrajectorySpec::Spiral { .. }), || {
                "off-resonance modeling needs a spiral readout".into()
            })?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn phantom_slice(&self) -> Result<PhantomSlice> {
        if self.quantize_to_grid {
            let spec = PhantomSpec { table: self.phantom.table.snapped_to(&self.grid)?, ..self.phantom.clone() };
            spec.build()
        } else {
            self.phantom.build()
        }
    }

    pub fn build_trajectory(&self) -> Result<Trajectory> {
        self.trajectory.build(self.phantom.height, self.sequence.n_tr)
    }

    pub fn dictionary(&self) -> Result<Dictionary> {
        build_dictionary(&self.grid, &self.sequence)
    }

    pub fn acquire(&self) -> Result<KSpace> {
        self.validate()?;
        forward_acquire(&self.phantom_slice()?, &self.sequence, &self.build_trajectory()?, &self.forward)
    }

    /// Gridded and 95th-percentile normalized series.
    pub fn series(&self) -> Result<MrfSeries> {
        Ok(grid_recon(&self.acquire()?, &self.sequence)?.normalize_95th()?.0)
    }

    pub fn ground_truth(&self) -> Result<ContrastSet> {
        ground_truth_contrasts(&self.phantom_slice()?, &self.contrasts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_lossless() {
        let mut cfg = ExperimentConfig::desk(11);
        cfg.forward.noise_snr_db = Some(30.0);
        cfg.output_dir = Some("out/x".into());
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json().unwrap(), cfg.to_json().unwrap());
    }

    #[test]
    fn spiral_defaults_fill_in() {
        let s: TrajectorySpec = serde_json::from_str(r#"{"kind":"spiral","samples_per_tr":100,"turns":2}"#).unwrap();
        assert_eq!(s, TrajectorySpec::spiral(100, 2.0));
        let t = s.build(32, 3).unwrap();
        assert_eq!((t.matrix(), t.n_tr(), t.samples_per_tr()), (32, 3, 100));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = ExperimentConfig::desk(0);
        cfg.phantom.width = 48;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::desk(0);
        cfg.trajectory = TrajectorySpec::Cartesian;
        cfg.forward.model_b0 = true;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_json("{}").is_err());
    }

    #[test]
    fn quantized_phantom_lies_on_grid() {
        let mut cfg = ExperimentConfig::desk(2);
        cfg.quantize_to_grid = true;
        let p = cfg.phantom_slice().unwrap();
        for (&t1, &l) in p.t1.iter().zip(p.labels.iter()) {
            if l != 0 {
                assert!(cfg.grid.t1_values_ms.contains(&t1));
            }
        }
    }
}
