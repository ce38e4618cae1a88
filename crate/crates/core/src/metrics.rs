//! Full-reference image quality metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::acquisition::normalize_95th;
use crate::error::{ensure, Result};
use crate::synthesis::{Contrast, ContrastSet};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_dims(x: &Array2<f64>, r: &Array2<f64>) -> Result<()> {
    ensure(x.dim() == r.dim(), || format!("image dimensions differ: {:?} vs {:?}", x.dim(), r.dim()))
}

/// `100 * ||x - ref|| / ||ref||`.
pub fn nrmse(x: &Array2<f64>, reference: &Array2<f64>) -> Result<f64> {
    same_dims(x, reference)?;
    let den: f64 = reference.iter().map(|v| v * v).sum::<f64>();
    ensure(den > 0.0, || "nRMSE needs a non-zero reference".into())?;
    let num: f64 = x.iter().zip(reference.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(100.0 * (num / den).sqrt())
}

/// `20 log10(max(ref) / rmse)`; identical images give `f64::INFINITY`.
pub fn psnr(x: &Array2<f64>, reference: &Array2<f64>) -> Result<f64> {
    same_dims(x, reference)?;
    ensure(!x.is_empty(), || "empty image".into())?;
    let mse = x.iter().zip(reference.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = reference.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> =
        (0..SSIM_WINDOW).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Gaussian-weighted local means over every fully contained window.
fn filter_valid(img: &Array2<f64>, g: &[f64]) -> Array2<f64> {
    let (h, w) = img.dim();
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let rows = Array2::from_shape_fn((h, ow), |(y, x)| (0..k).map(|i| g[i] * img[[y, x + i]]).sum::<f64>());
    Array2::from_shape_fn((oh, ow), |(y, x)| (0..k).map(|i| g[i] * rows[[y + i, x]]).sum())
}

/// Dynamic range used for the stabilizing constants: `max(ref) - min(ref)`,
/// or 1 for a constant reference.
pub fn ssim_range(reference: &Array2<f64>) -> f64 {
    let hi = reference.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = reference.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

/// Mean structural similarity over all valid 11x11 Gaussian windows, with
/// the dynamic range taken from `reference`.
pub fn ssim(x: &Array2<f64>, reference: &Array2<f64>) -> Result<f64> {
    ssim_with_range(x, reference, ssim_range(reference))
}

pub fn ssim_with_range(x: &Array2<f64>, y: &Array2<f64>, range: f64) -> Result<f64> {
    same_dims(x, y)?;
    let (h, w) = x.dim();
    ensure(h >= SSIM_WINDOW && w >= SSIM_WINDOW, || {
        format!("SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")
    })?;
    ensure(range.is_finite() && range > 0.0, || format!("invalid dynamic range {range}"))?;
    let g = gaussian_window();
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let mx = filter_valid(x, &g);
    let my = filter_valid(y, &g);
    let mxx = filter_valid(&(x * x), &g);
    let myy = filter_valid(&(y * y), &g);
    let mxy = filter_valid(&(x * y), &g);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx.as_slice().unwrap()[i], my.as_slice().unwrap()[i]);
        let vx = mxx.as_slice().unwrap()[i] - ux * ux;
        let vy = myy.as_slice().unwrap()[i] - uy * uy;
        let cxy = mxy.as_slice().unwrap()[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / mx.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastMetrics {
    pub nrmse_percent: f64,
    /// `None` when the images are identical.
    pub psnr_db: Option<f64>,
    pub ssim: f64,
}

pub fn compare(x: &Array2<f64>, reference: &Array2<f64>) -> Result<ContrastMetrics> {
    let p = psnr(x, reference)?;
    Ok(ContrastMetrics {
        nrmse_percent: nrmse(x, reference)?,
        psnr_db: p.is_finite().then_some(p),
        ssim: ssim(x, reference)?,
    })
}

/// Scores each contrast of `pred` against `truth`. With `normalize`, both
/// images are first divided by their own 95th percentile.
pub fn evaluate_contrasts(
    pred: &ContrastSet,
    truth: &ContrastSet,
    normalize: bool,
) -> Result<BTreeMap<Contrast, ContrastMetrics>> {
    let mut out = BTreeMap::new();
    for c in Contrast::ALL {
        let (p, t) = (pred.get(c), truth.get(c));
        let m = if normalize { compare(&normalize_95th(p)?.0, &normalize_95th(t)?.0)? } else { compare(p, t)? };
        out.insert(c, m);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    /// Population mean and standard deviation of the finite values; all
    /// zero when there are none.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Summary {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Summary { mean: 0.0, std: 0.0, n: 0 };
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        Summary { mean, std: var.sqrt(), n: v.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub nrmse_percent: Summary,
    pub psnr_db: Summary,
    pub ssim: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub samples: Vec<BTreeMap<Contrast, ContrastMetrics>>,
    pub aggregate: BTreeMap<Contrast, AggregateMetrics>,
}

impl MetricReport {
    pub fn new(method: impl Into<String>, samples: Vec<BTreeMap<Contrast, ContrastMetrics>>) -> Self {
        let mut aggregate = BTreeMap::new();
        for c in Contrast::ALL {
            let rows: Vec<&ContrastMetrics> = samples.iter().filter_map(|s| s.get(&c)).collect();
            if rows.is_empty() {
                continue;
            }
            aggregate.insert(
                c,
                AggregateMetrics {
                    nrmse_percent: Summary::of(rows.iter().map(|m| m.nrmse_percent)),
                    psnr_db: Summary::of(rows.iter().filter_map(|m| m.psnr_db)),
                    ssim: Summary::of(rows.iter().map(|m| m.ssim)),
                },
            );
        }
        MetricReport { method: method.into(), samples, aggregate }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per contrast, mean +/- std per metric.
    pub fn to_table(&self) -> String {
        let fmt = |s: &Summary, digits: usize| {
            if s.n == 0 {
                "n/a".to_string()
            } else {
                format!("{:.*} ± {:.*}", digits, s.mean, digits, s.std)
            }
        };
        let mut out = String::new();
        let _ =
            writeln!(out, "{:<12} {:<8} {:>18} {:>18} {:>16}", "method", "contrast", "nRMSE (%)", "PSNR (dB)", "SSIM");
        for (c, a) in &self.aggregate {
            let _ = writeln!(
                out,
                "{:<12} {:<8} {:>18} {:>18} {:>16}",
                self.method,
                c.name(),
                fmt(&a.nrmse_percent, 2),
                fmt(&a.psnr_db, 2),
                fmt(&a.ssim, 4)
            );
        }
        out
    }
}
