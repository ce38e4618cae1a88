//! Synthetic head phantoms with known relaxation, density and field maps.

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::ParamGrid;
use crate::epg::{ContrastSpecs, TissueParams};
use crate::error::{ensure, Result};
use crate::synthesis::{synthesize_from_maps, ContrastSet, Provenance};

pub const MIN_SIZE: usize = 32;
pub const DESK_SIZE: usize = 64;
pub const FULL_SIZE: usize = 320;

pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_WM: u8 = 1;
pub const LABEL_GM: u8 = 2;
pub const LABEL_CSF: u8 = 3;
pub const LABEL_FAT: u8 = 4;
pub const LABEL_VESSEL: u8 = 5;

pub const LABEL_NAMES: [&str; 6] = ["background", "wm", "gm", "csf", "fat", "vessel"];

/// Relaxation and density per tissue class. Background has no entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TissueTable {
    pub wm: TissueParams,
    pub gm: TissueParams,
    pub csf: TissueParams,
    pub fat: TissueParams,
    pub vessel: TissueParams,
}

impl Default for TissueTable {
    fn default() -> Self {
        let t = |t1, t2, pd| TissueParams::new(t1, t2, pd).expect("valid default tissue");
        TissueTable {
            wm: t(600.0, 80.0, 0.7),
            gm: t(950.0, 100.0, 0.85),
            csf: t(3600.0, 1800.0, 1.0),
            fat: t(260.0, 80.0, 0.9),
            vessel: t(1400.0, 250.0, 0.9),
        }
    }
}

impl TissueTable {
    pub fn get(&self, label: u8) -> Option<TissueParams> {
        match label {
            LABEL_WM => Some(self.wm),
            LABEL_GM => Some(self.gm),
            LABEL_CSF => Some(self.csf),
            LABEL_FAT => Some(self.fat),
            LABEL_VESSEL => Some(self.vessel),
            _ => None,
        }
    }

    fn entries_mut(&mut self) -> [&mut TissueParams; 5] {
        [&mut self.wm, &mut self.gm, &mut self.csf, &mut self.fat, &mut self.vessel]
    }

    /// Copy with every T1/T2 moved to the nearest admissible grid point.
    /// Densities are kept.
    pub fn snapped_to(&self, grid: &ParamGrid) -> Result<TissueTable> {
        grid.validate()?;
        let mut out = *self;
        for p in out.entries_mut() {
            let (i, j) = grid.snap(p.t1_ms(), p.t2_ms());
            *p = TissueParams::new(grid.t1_values_ms[i], grid.t2_values_ms[j], p.pd())?;
        }
        Ok(out)
    }
}

/// Smooth off-resonance field: a quadratic polynomial over normalized
/// image coordinates in [-1, 1] plus an optional Gaussian blob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct B0Spec {
    /// Coefficients of 1, x, y, x^2, y^2, xy (Hz).
    pub poly_hz: [f64; 6],
    pub blob: Option<B0Blob>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct B0Blob {
    pub center: [f64; 2],
    pub sigma: f64,
    pub peak_hz: f64,
}

impl B0Spec {
    pub fn zero() -> Self {
        B0Spec { poly_hz: [0.0; 6], blob: None }
    }

    pub fn is_zero(&self) -> bool {
        self.poly_hz.iter().all(|&c| c == 0.0) && self.blob.is_none_or(|b| b.peak_hz == 0.0)
    }

    /// Field at normalized coordinates. The blob is cut off beyond 3 sigma.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let c = &self.poly_hz;
        let mut f = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * y * y + c[5] * x * y;
        if let Some(b) = self.blob {
            let r2 = ((x - b.center[0]).powi(2) + (y - b.center[1]).powi(2)) / (b.sigma * b.sigma);
            if r2 <= 9.0 {
                f += b.peak_hz * (-0.5 * r2).exp();
            }
        }
        f
    }
}

impl Default for B0Spec {
    /// Mild linear and quadratic field plus a 120 Hz blob at the anterior edge.
    fn default() -> Self {
        B0Spec {
            poly_hz: [0.0, 4.0, -3.0, 6.0, 5.0, 2.0],
            blob: Some(B0Blob { center: [0.0, -0.78], sigma: 0.12, peak_hz: 120.0 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    pub table: TissueTable,
    pub b0: B0Spec,
}

impl PhantomSpec {
    pub fn desk(seed: u64) -> Self {
        PhantomSpec { height: DESK_SIZE, width: DESK_SIZE, seed, table: TissueTable::default(), b0: B0Spec::default() }
    }

    pub fn build(&self) -> Result<PhantomSlice> {
        make_phantom(self.height, self.width, self.seed, &self.table, &self.b0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSlice {
    pub t1: Array2<f64>,
    pub t2: Array2<f64>,
    pub pd: Array2<f64>,
    pub b0: Array2<f64>,
    pub labels: Array2<u8>,
}

impl PhantomSlice {
    pub fn dim(&self) -> (usize, usize) {
        self.labels.dim()
    }

    pub fn foreground(&self) -> Array2<bool> {
        self.labels.mapv(|l| l != LABEL_BACKGROUND)
    }

    /// Tissue parameters at a pixel; `None` in background.
    pub fn params_at(&self, y: usize, x: usize) -> Option<TissueParams> {
        if self.labels[[y, x]] == LABEL_BACKGROUND {
            return None;
        }
        TissueParams::new(self.t1[[y, x]], self.t2[[y, x]], self.pd[[y, x]]).ok()
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<PhantomSlice> {
        let (ph, pw) = self.dim();
        ensure(y0 + h <= ph && x0 + w <= pw && h > 0 && w > 0, || {
            format!("crop {h}x{w} at ({y0},{x0}) outside {ph}x{pw}")
        })?;
        let c = |a: &Array2<f64>| a.slice(s![y0..y0 + h, x0..x0 + w]).to_owned();
        Ok(PhantomSlice {
            t1: c(&self.t1),
            t2: c(&self.t2),
            pd: c(&self.pd),
            b0: c(&self.b0),
            labels: self.labels.slice(s![y0..y0 + h, x0..x0 + w]).to_owned(),
        })
    }
}

struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    angle: f64,
    label: u8,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (c * dx + s * dy) / self.rx;
        let v = (-s * dx + c * dy) / self.ry;
        u * u + v * v <= 1.0
    }
}

/// Nested-ellipse head: fat scalp, a CSF rim, cortex, white matter, deep
/// grey nuclei, two ventricles and a vessel. Shapes are jittered by the
/// seed; pixels are point-sampled so every pixel holds one tissue.
pub fn make_phantom(h: usize, w: usize, seed: u64, table: &TissueTable, b0: &B0Spec) -> Result<PhantomSlice> {
    ensure(h >= MIN_SIZE && w >= MIN_SIZE, || format!("phantom must be at least {MIN_SIZE}x{MIN_SIZE}, got {h}x{w}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut j = |a: f64| rng.gen_range(-a..=a);

    let (ox, oy) = (j(0.03), j(0.03));
    let (sx, sy) = (0.84 + j(0.03), 0.9 + j(0.03));
    let tilt = j(0.08);
    let head = |rx: f64, ry: f64, label| Ellipse { cx: ox, cy: oy, rx: sx * rx, ry: sy * ry, angle: tilt, label };
    let at = |x: f64, y: f64| {
        let (s, c) = tilt.sin_cos();
        (ox + sx * (c * x - s * y), oy + sy * (s * x + c * y))
    };

    // drawn in order; later shapes overwrite earlier ones
    let mut shapes = vec![
        head(1.0, 1.0, LABEL_FAT),
        head(0.91, 0.92, LABEL_CSF),
        head(0.87, 0.88, LABEL_GM),
        head(0.7, 0.74, LABEL_WM),
    ];
    for side in [-1.0, 1.0] {
        let (cx, cy) = at(side * (0.3 + j(0.03)), 0.1 + j(0.04));
        shapes.push(Ellipse { cx, cy, rx: 0.1 * sx, ry: 0.14 * sy, angle: tilt + side * 0.4, label: LABEL_GM });
    }
    for side in [-1.0, 1.0] {
        let (cx, cy) = at(side * (0.11 + j(0.02)), -0.08 + j(0.03));
        let ry = 0.24 + j(0.03);
        shapes.push(Ellipse {
            cx,
            cy,
            rx: 0.07 * sx,
            ry: ry * sy,
            angle: tilt - side * (0.25 + j(0.05)),
            label: LABEL_CSF,
        });
    }
    let (vx, vy) = at(j(0.05), 0.5 + j(0.05));
    shapes.push(Ellipse { cx: vx, cy: vy, rx: 0.06, ry: 0.06, angle: 0.0, label: LABEL_VESSEL });

    let mut labels = Array2::from_elem((h, w), LABEL_BACKGROUND);
    let mut b0_map = Array2::zeros((h, w));
    for ((y, x), l) in labels.indexed_iter_mut() {
        let u = 2.0 * (x as f64 + 0.5) / w as f64 - 1.0;
        let v = 2.0 * (y as f64 + 0.5) / h as f64 - 1.0;
        for e in &shapes {
            if e.contains(u, v) {
                *l = e.label;
            }
        }
        b0_map[[y, x]] = b0.eval(u, v);
    }
    let param = |f: fn(&TissueParams) -> f64| labels.mapv(|l| table.get(l).as_ref().map_or(0.0, f));
    Ok(PhantomSlice {
        t1: param(TissueParams::t1_ms),
        t2: param(TissueParams::t2_ms),
        pd: param(TissueParams::pd),
        b0: b0_map,
        labels,
    })
}

/// Contrasts simulated from the phantom's true maps.
pub fn ground_truth_contrasts(phantom: &PhantomSlice, specs: &ContrastSpecs) -> Result<ContrastSet> {
    let mut set = synthesize_from_maps(&phantom.t1, &phantom.t2, &phantom.pd, specs)?;
    set.provenance = Provenance::GroundTruth;
    Ok(set)
}
