//! Per-pixel contrast simulation from parameter maps.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::MrfSeries;
use crate::dictionary::{match_image, Dictionary, MatchMaps};
use crate::epg::{simulate_flair, simulate_se_closed_form, simulate_tse, ContrastSpecs, TissueParams};
use crate::error::{ensure, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contrast {
    T1w,
    T2w,
    Flair,
}

impl Contrast {
    pub const ALL: [Contrast; 3] = [Contrast::T1w, Contrast::T2w, Contrast::Flair];

    pub fn name(self) -> &'static str {
        match self {
            Contrast::T1w => "t1w",
            Contrast::T2w => "t2w",
            Contrast::Flair => "flair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulation,
    GroundTruth,
    Network,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSet {
    pub t1w: Array2<f64>,
    pub t2w: Array2<f64>,
    pub flair: Array2<f64>,
    pub specs: ContrastSpecs,
    pub provenance: Provenance,
}

impl ContrastSet {
    pub fn get(&self, c: Contrast) -> &Array2<f64> {
        match c {
            Contrast::T1w => &self.t1w,
            Contrast::T2w => &self.t2w,
            Contrast::Flair => &self.flair,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.t1w.dim()
    }

    /// Writes `<prefix>_<contrast>.png` for each contrast, scaled to 0-255
    /// by the image maximum.
    pub fn export_png(&self, dir: &Path, prefix: &str) -> Result<()> {
        for c in Contrast::ALL {
            write_png(self.get(c), &dir.join(format!("{prefix}_{}.png", c.name())), None)?;
        }
        Ok(())
    }
}

/// 8-bit grayscale: values are clamped to `[0, peak]` and scaled to 0-255.
/// `peak` defaults to the image maximum.
pub fn to_u8(image: &Array2<f64>, peak: Option<f64>) -> Vec<u8> {
    let peak = peak.unwrap_or_else(|| image.iter().cloned().fold(0.0, f64::max));
    image.iter().map(|&v| if peak > 0.0 { (v / peak * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 }).collect()
}

pub fn write_png(image: &Array2<f64>, path: &Path, peak: Option<f64>) -> Result<()> {
    let (h, w) = image.dim();
    let buf = image::GrayImage::from_raw(w as u32, h as u32, to_u8(image, peak))
        .ok_or_else(|| invalid("image buffer size mismatch"))?;
    buf.save(path).map_err(|e| invalid(format!("writing {}: {e}", path.display())))
}

/// Simulates T1w (closed form), T2w and FLAIR (EPG) at every pixel.
/// Pixels with zero density or zero relaxation times are null and render
/// as 0. Each distinct (T1, T2) is simulated once at unit density.
pub fn synthesize_from_maps(
    t1: &Array2<f64>,
    t2: &Array2<f64>,
    pd: &Array2<f64>,
    specs: &ContrastSpecs,
) -> Result<ContrastSet> {
    ensure(t1.dim() == t2.dim() && t1.dim() == pd.dim(), || {
        format!("map dimensions differ: {:?}, {:?}, {:?}", t1.dim(), t2.dim(), pd.dim())
    })?;
    specs.validate()?;
    let mut keys: HashMap<(u64, u64), usize> = HashMap::new();
    let mut uniques: Vec<(f64, f64)> = Vec::new();
    let mut index = Array2::from_elem(t1.dim(), usize::MAX);
    for (((slot, &a), &b), &p) in index.iter_mut().zip(t1.iter()).zip(t2.iter()).zip(pd.iter()) {
        if p == 0.0 || a == 0.0 || b == 0.0 {
            continue;
        }
        ensure(p > 0.0 && p.is_finite(), || format!("invalid density {p}"))?;
        *slot = *keys.entry((a.to_bits(), b.to_bits())).or_insert_with(|| {
            uniques.push((a, b));
            uniques.len() - 1
        });
    }
    let unit = uniques
        .par_iter()
        .map(|&(a, b)| {
            let p = TissueParams::new(a, b, 1.0)?;
            Ok([
                simulate_se_closed_form(&p, &specs.t1w)?,
                simulate_tse(&p, &specs.t2w)?,
                simulate_flair(&p, &specs.flair)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let render = |c: usize| {
        Array2::from_shape_fn(t1.dim(), |ix| match index[ix] {
            usize::MAX => 0.0,
            u => pd[ix] * unit[u][c],
        })
    };
    Ok(ContrastSet {
        t1w: render(0),
        t2w: render(1),
        flair: render(2),
        specs: *specs,
        provenance: Provenance::Simulation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub match_s: f64,
    pub synth_s: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub maps: MatchMaps,
    pub contrasts: ContrastSet,
    pub timings: StageTimings,
}

/// Dictionary matching followed by per-pixel contrast simulation.
pub fn simulation_pipeline(series: &MrfSeries, dict: &Dictionary, specs: &ContrastSpecs) -> Result<PipelineOutput> {
    let start = Instant::now();
    let maps = match_image(series, dict)?;
    let match_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let contrasts = synthesize_from_maps(&maps.t1, &maps.t2, &maps.pd, specs)?;
    let synth_s = start.elapsed().as_secs_f64();
    Ok(PipelineOutput { maps, contrasts, timings: StageTimings { match_s, synth_s } })
}
