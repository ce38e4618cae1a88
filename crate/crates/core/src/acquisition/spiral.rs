//! Archimedean spiral in-out readouts.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub const DEFAULT_ROTATION_DEG: f64 = 9.0;
pub const DEFAULT_INOUT_ROTATION_DEG: f64 = 180.0;
/// Duration of each half of the readout (spiral-in or spiral-out).
pub const DEFAULT_READOUT_HALF_MS: f64 = 3.0;

/// One spiral in-out readout per TR, rotated between TRs. Coordinates are
/// in cycles per field of view; sample times are relative to the echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralTrajectory {
    pub matrix: usize,
    pub n_tr: usize,
    pub turns: f64,
    pub rotation_per_tr_rad: f64,
    pub inout_rotation_rad: f64,
    pub readout_half_ms: f64,
    base: Vec<[f64; 2]>,
    dwell_times_ms: Vec<f64>,
    n_in: usize,
}

/// Spiral with default rotations and readout duration. `samples_per_tr`
/// is split evenly between the in and out halves (out gets the odd one).
pub fn gen_spiral(matrix: usize, n_tr: usize, samples_per_tr: usize, turns: f64) -> Result<SpiralTrajectory> {
    SpiralTrajectory::new(
        matrix,
        n_tr,
        samples_per_tr,
        turns,
        DEFAULT_ROTATION_DEG.to_radians(),
        DEFAULT_INOUT_ROTATION_DEG.to_radians(),
        DEFAULT_READOUT_HALF_MS,
    )
}

impl SpiralTrajectory {
    pub fn new(
        matrix: usize,
        n_tr: usize,
        samples_per_tr: usize,
        turns: f64,
        rotation_per_tr_rad: f64,
        inout_rotation_rad: f64,
        readout_half_ms: f64,
    ) -> Result<Self> {
        ensure(matrix >= 2, || format!("matrix must be at least 2, got {matrix}"))?;
        ensure(n_tr >= 1, || "n_tr must be at least 1".into())?;
        ensure(samples_per_tr >= 2, || "need at least 2 samples per TR".into())?;
        ensure(turns.is_finite() && turns > 0.0, || format!("turns must be positive, got {turns}"))?;
        ensure(rotation_per_tr_rad.is_finite() && inout_rotation_rad.is_finite(), || "non-finite rotation".into())?;
        ensure(readout_half_ms.is_finite() && readout_half_ms > 0.0, || "readout duration must be positive".into())?;

        let k_max = matrix as f64 / 2.0;
        let n_in = samples_per_tr / 2;
        let n_out = samples_per_tr - n_in;
        let arm = |tau: f64| {
            let a = std::f64::consts::TAU * turns * tau;
            [k_max * tau * a.cos(), k_max * tau * a.sin()]
        };
        let (cr, sr) = (inout_rotation_rad.cos(), inout_rotation_rad.sin());
        let mut base = Vec::with_capacity(samples_per_tr);
        let mut dwell = Vec::with_capacity(samples_per_tr);
        // spiral-in: the arm traversed from the edge to the centre
        for j in 0..n_in {
            let step = n_in - j;
            base.push(arm(step as f64 / n_in as f64));
            dwell.push(-readout_half_ms * step as f64 / n_in as f64);
        }
        // spiral-out: the same arm rotated by the in-out angle
        for j in 0..n_out {
            let tau = (j + 1) as f64 / n_out as f64;
            let [x, y] = arm(tau);
            base.push([cr * x - sr * y, sr * x + cr * y]);
            dwell.push(readout_half_ms * tau);
        }
        Ok(SpiralTrajectory {
            matrix,
            n_tr,
            turns,
            rotation_per_tr_rad,
            inout_rotation_rad,
            readout_half_ms,
            base,
            dwell_times_ms: dwell,
            n_in,
        })
    }

    pub fn samples_per_tr(&self) -> usize {
        self.base.len()
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn k_max(&self) -> f64 {
        self.matrix as f64 / 2.0
    }

    /// Sample times within the readout, relative to the echo (ms).
    pub fn dwell_times_ms(&self) -> &[f64] {
        &self.dwell_times_ms
    }

    /// Coordinates of TR `i`.
    pub fn coords(&self, tr: usize) -> Vec<[f64; 2]> {
        let a = self.rotation_per_tr_rad * tr as f64;
        let (c, s) = (a.cos(), a.sin());
        self.base.iter().map(|&[x, y]| [c * x - s * y, s * x + c * y]).collect()
    }

    /// Analytic density compensation: the k-space area each sample
    /// represents, approximated as angular arc step times ring spacing.
    /// This is proportional to `|k|`; the innermost sample sits at
    /// `|k| = k_max / m`, so no weight is zero.
    pub fn density_weights(&self) -> Vec<f64> {
        let k_max = self.k_max();
        let omega = std::f64::consts::TAU * self.turns;
        // two interleaved arms halve the ring spacing
        let ring = k_max / self.turns / 2.0;
        let n_out = self.base.len() - self.n_in;
        let weight = |tau: f64, m: usize| k_max * tau * (omega / m as f64) * ring;
        let mut w = Vec::with_capacity(self.base.len());
        for j in 0..self.n_in {
            w.push(weight((self.n_in - j) as f64 / self.n_in as f64, self.n_in));
        }
        for j in 0..n_out {
            w.push(weight((j + 1) as f64 / n_out as f64, n_out));
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn angle(p: [f64; 2]) -> f64 {
        p[1].atan2(p[0])
    }

    fn wrap(a: f64) -> f64 {
        let t = std::f64::consts::TAU;
        ((a % t) + t) % t
    }

    #[test]
    fn successive_trs_rotate_nine_degrees() {
        let s = gen_spiral(64, 5, 200, 4.0).unwrap();
        let (a, b) = (s.coords(0), s.coords(1));
        for (p, q) in a.iter().zip(&b) {
            assert_abs_diff_eq!(wrap(angle(*q) - angle(*p)), 9f64.to_radians(), epsilon = 1e-12);
            assert_abs_diff_eq!(p[0].hypot(p[1]), q[0].hypot(q[1]), epsilon = 1e-12);
        }
    }

    #[test]
    fn spiral_out_starts_opposite_spiral_in_end() {
        let s = gen_spiral(64, 1, 200, 4.0).unwrap();
        let c = s.coords(0);
        let last_in = c[s.n_in() - 1];
        let first_out = c[s.n_in()];
        assert_abs_diff_eq!(wrap(angle(first_out) - angle(last_in)), std::f64::consts::PI, epsilon = 1e-12);
        assert_abs_diff_eq!(first_out[0].hypot(first_out[1]), last_in[0].hypot(last_in[1]), epsilon = 1e-12);
    }

    #[test]
    fn radius_bounded_and_times_ordered() {
        let s = gen_spiral(48, 3, 301, 7.5).unwrap();
        assert_eq!(s.samples_per_tr(), 301);
        for tr in 0..3 {
            assert!(s.coords(tr).iter().all(|p| p[0].hypot(p[1]) <= 24.0 + 1e-12));
        }
        let t = s.dwell_times_ms();
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert!(t[s.n_in() - 1] < 0.0 && t[s.n_in()] > 0.0);
        assert!(gen_spiral(0, 1, 10, 1.0).is_err());
        assert!(gen_spiral(8, 1, 10, 0.0).is_err());
    }

    #[test]
    fn weights_cover_the_sampled_disk() {
        let s = gen_spiral(64, 1, 20000, 32.0).unwrap();
        let total: f64 = s.density_weights().iter().sum();
        assert!((total / (std::f64::consts::PI * 32.0 * 32.0) - 1.0).abs() < 1e-3, "{total}");
    }
}
