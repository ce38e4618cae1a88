use std::collections::HashMap;

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nufft::{CartesianFft, Nufft};
use super::spiral::SpiralTrajectory;
use super::MrfSeries;
use crate::epg::{simulate_fingerprint, FispMrf, TissueParams};
use crate::error::{ensure, invalid, Result};
use crate::phantom::PhantomSlice;

pub const DEFAULT_B0_SEGMENTS: usize = 8;
/// Radius (cycles/FOV) of the k-space centre used as the noise reference.
pub const NOISE_CENTER_RADIUS: f64 = 2.0;

/// Sampling pattern: a rotating spiral, or every Cartesian frequency
/// (the fully sampled reference that bypasses gridding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Spiral(SpiralTrajectory),
    Cartesian { matrix: usize, n_tr: usize },
}

impl Trajectory {
    pub fn matrix(&self) -> usize {
        match self {
            Trajectory::Spiral(s) => s.matrix,
            Trajectory::Cartesian { matrix, .. } => *matrix,
        }
    }

    pub fn n_tr(&self) -> usize {
        match self {
            Trajectory::Spiral(s) => s.n_tr,
            Trajectory::Cartesian { n_tr, .. } => *n_tr,
        }
    }

    pub fn samples_per_tr(&self) -> usize {
        match self {
            Trajectory::Spiral(s) => s.samples_per_tr(),
            Trajectory::Cartesian { matrix, .. } => matrix * matrix,
        }
    }

    /// Sample coordinates of TR `tr` in cycles/FOV.
    pub fn coords(&self, tr: usize) -> Vec<[f64; 2]> {
        match self {
            Trajectory::Spiral(s) => s.coords(tr),
            Trajectory::Cartesian { matrix, .. } => CartesianFft::new(*matrix).coords(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardOptions {
    /// Complex Gaussian noise level relative to the mean magnitude of
    /// samples within [`NOISE_CENTER_RADIUS`] of the k-space origin.
    pub noise_snr_db: Option<f64>,
    pub noise_seed: u64,
    pub model_b0: bool,
    pub b0_segments: usize,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions { noise_snr_db: None, noise_seed: 0, model_b0: false, b0_segments: DEFAULT_B0_SEGMENTS }
    }
}

/// Samples per TR, `n_tr x samples_per_tr`.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpace {
    pub samples: Array2<Complex64>,
    pub trajectory: Trajectory,
}

/// Noiseless image series of the phantom: each pixel holds its
/// fingerprint, simulated once per distinct (T1, T2).
pub fn true_series(phantom: &PhantomSlice, spec: &FispMrf) -> Result<MrfSeries> {
    spec.validate()?;
    let (h, w) = phantom.dim();
    let mut cache: HashMap<(u64, u64), usize> = HashMap::new();
    let mut uniques = Vec::new();
    let mut index = Array2::from_elem((h, w), usize::MAX);
    for ((y, x), slot) in index.indexed_iter_mut() {
        if let Some(p) = phantom.params_at(y, x) {
            if p.pd() == 0.0 {
                continue;
            }
            let key = (p.t1_ms().to_bits(), p.t2_ms().to_bits());
            *slot = *cache.entry(key).or_insert_with(|| {
                uniques.push(p.with_pd(1.0).expect("unit density is valid"));
                uniques.len() - 1
            });
        }
    }
    let prints = uniques
        .par_iter()
        .map(|p: &TissueParams| simulate_fingerprint(p, spec).map(|f| f.samples))
        .collect::<Result<Vec<_>>>()?;
    let mut frames = Array3::zeros((spec.n_tr, h, w));
    for ((y, x), &u) in index.indexed_iter() {
        if u != usize::MAX {
            let pd = phantom.pd[[y, x]];
            for (t, v) in prints[u].iter().enumerate() {
                frames[[t, y, x]] = v * pd;
            }
        }
    }
    Ok(MrfSeries::new(frames, spec.clone()))
}

/// Simulates the k-space samples of the phantom's fingerprint series.
/// With `model_b0`, each spiral sample accrues the off-resonance phase
/// of its readout time, approximated by time segmentation.
pub fn forward_acquire(
    phantom: &PhantomSlice,
    spec: &FispMrf,
    traj: &Trajectory,
    opts: &ForwardOptions,
) -> Result<KSpace> {
    let n = traj.matrix();
    ensure(phantom.dim() == (n, n), || format!("phantom is {:?}, trajectory expects {n}x{n}", phantom.dim()))?;
    ensure(traj.n_tr() == spec.n_tr, || format!("trajectory has {} TRs, sequence has {}", traj.n_tr(), spec.n_tr))?;
    let series = true_series(phantom, spec)?;
    let b0 = if opts.model_b0 { Some(&phantom.b0) } else { None };
    acquire_series(&series.frames, b0, traj, opts)
}

/// Forward model on an arbitrary image series.
pub fn acquire_series(
    frames: &Array3<Complex64>,
    b0_hz: Option<&Array2<f64>>,
    traj: &Trajectory,
    opts: &ForwardOptions,
) -> Result<KSpace> {
    let (t, h, w) = frames.dim();
    let n = traj.matrix();
    ensure(h == n && w == n, || format!("frames are {h}x{w}, trajectory expects {n}x{n}"))?;
    ensure(t == traj.n_tr(), || format!("{t} frames for {} TRs", traj.n_tr()))?;

    let rows: Vec<Vec<Complex64>> = match traj {
        Trajectory::Cartesian { .. } => {
            ensure(b0_hz.is_none(), || "off-resonance modeling needs a spiral readout".into())?;
            let plan = CartesianFft::new(n);
            (0..t).into_par_iter().map(|tr| plan.forward(frames.index_axis(Axis(0), tr))).collect()
        }
        Trajectory::Spiral(s) => {
            let plan = Nufft::new(n);
            let segments = match b0_hz {
                Some(b0) => {
                    ensure(opts.b0_segments >= 1, || "need at least one time segment".into())?;
                    Some(TimeSegments::new(s.dwell_times_ms(), opts.b0_segments, b0))
                }
                None => None,
            };
            (0..t)
                .into_par_iter()
                .map(|tr| {
                    let f = frames.index_axis(Axis(0), tr);
                    let coords = s.coords(tr);
                    match &segments {
                        None => plan.forward(f, &coords),
                        Some(seg) => seg.forward(&plan, &f.to_owned(), &coords),
                    }
                })
                .collect()
        }
    };

    let m = traj.samples_per_tr();
    let mut samples = Array2::zeros((t, m));
    for (tr, row) in rows.into_iter().enumerate() {
        samples.row_mut(tr).assign(&ndarray::Array1::from(row));
    }
    if let Some(snr) = opts.noise_snr_db {
        add_noise(&mut samples, traj, snr, opts.noise_seed)?;
    }
    Ok(KSpace { samples, trajectory: traj.clone() })
}

struct TimeSegments {
    nodes_ms: Vec<f64>,
    // interpolation weights per sample: (segment, weight) pairs
    weights: Vec<[(usize, f64); 2]>,
    b0: Array2<f64>,
}

impl TimeSegments {
    fn new(times: &[f64], segments: usize, b0: &Array2<f64>) -> Self {
        let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let nodes_ms: Vec<f64> = if segments == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..segments).map(|l| lo + (hi - lo) * l as f64 / (segments - 1) as f64).collect()
        };
        let weights = times
            .iter()
            .map(|&t| {
                if segments == 1 || hi == lo {
                    return [(0, 1.0), (0, 0.0)];
                }
                let pos = (t - lo) / (hi - lo) * (segments - 1) as f64;
                let l = (pos.floor() as usize).min(segments - 2);
                let f = pos - l as f64;
                [(l, 1.0 - f), (l + 1, f)]
            })
            .collect();
        TimeSegments { nodes_ms, weights, b0: b0.clone() }
    }

    fn forward(&self, plan: &Nufft, frame: &Array2<Complex64>, coords: &[[f64; 2]]) -> Vec<Complex64> {
        let per_node: Vec<Vec<Complex64>> = self
            .nodes_ms
            .iter()
            .map(|&tau| {
                let mut img = frame.clone();
                img.zip_mut_with(&self.b0, |v, &df| {
                    *v *= Complex64::from_polar(1.0, -std::f64::consts::TAU * df * tau / 1000.0);
                });
                plan.forward(img.view(), coords)
            })
            .collect();
        self.weights
            .iter()
            .enumerate()
            .map(|(s, &[(a, wa), (b, wb)])| per_node[a][s] * wa + per_node[b][s] * wb)
            .collect()
    }
}

fn add_noise(samples: &mut Array2<Complex64>, traj: &Trajectory, snr_db: f64, seed: u64) -> Result<()> {
    ensure(snr_db.is_finite(), || "noise SNR must be finite".into())?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (tr, row) in samples.outer_iter().enumerate() {
        for (k, v) in traj.coords(tr).iter().zip(row) {
            if k[0].hypot(k[1]) <= NOISE_CENTER_RADIUS {
                sum += v.norm();
                count += 1;
            }
        }
    }
    ensure(count > 0, || "trajectory does not sample the k-space centre".into())?;
    let sigma = sum / count as f64 * 10f64.powf(-snr_db / 20.0);
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in samples.iter_mut() {
        *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
    }
    Ok(())
}

/// Density-compensated gridding reconstruction of every TR.
pub fn grid_recon(kspace: &KSpace, spec: &FispMrf) -> Result<MrfSeries> {
    let traj = &kspace.trajectory;
    let (t, m) = kspace.samples.dim();
    ensure(t == traj.n_tr() && m == traj.samples_per_tr(), || {
        format!("samples are {t}x{m}, trajectory has {}x{}", traj.n_tr(), traj.samples_per_tr())
    })?;
    ensure(t == spec.n_tr, || format!("{t} TRs of samples, sequence has {}", spec.n_tr))?;
    let n = traj.matrix();
    let images: Vec<Array2<Complex64>> = match traj {
        Trajectory::Cartesian { .. } => {
            let plan = CartesianFft::new(n);
            (0..t).into_par_iter().map(|tr| plan.inverse(&kspace.samples.row(tr).to_vec())).collect()
        }
        Trajectory::Spiral(s) => {
            let plan = Nufft::new(n);
            let dcf = s.density_weights();
            let scale = 1.0 / (n * n) as f64;
            (0..t)
                .into_par_iter()
                .map(|tr| {
                    let row = kspace.samples.row(tr);
                    let weighted: Vec<Complex64> = row.iter().zip(&dcf).map(|(y, w)| y * (w * scale)).collect();
                    plan.adjoint(&weighted, &s.coords(tr))
                })
                .collect()
        }
    };
    let mut frames = Array3::zeros((t, n, n));
    for (tr, img) in images.into_iter().enumerate() {
        frames.index_axis_mut(Axis(0), tr).assign(&img);
    }
    Ok(MrfSeries::new(frames, spec.clone()))
}
