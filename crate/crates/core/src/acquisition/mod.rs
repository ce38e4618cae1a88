//! Spiral acquisition, gridding reconstruction and series normalization.

mod forward;
pub mod nufft;
pub mod spiral;

pub use forward::{
    acquire_series, forward_acquire, grid_recon, true_series, ForwardOptions, KSpace, Trajectory, DEFAULT_B0_SEGMENTS,
    NOISE_CENTER_RADIUS,
};
pub use spiral::{gen_spiral, SpiralTrajectory};

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;

use crate::epg::FispMrf;
use crate::error::{ensure, invalid, Result};

/// Reconstructed image series, one complex frame per TR.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfSeries {
    /// `t x h x w`
    pub frames: Array3<Complex64>,
    pub spec: FispMrf,
    /// Product of all scalars the frames have been divided by.
    pub normalization: f64,
}

impl MrfSeries {
    pub fn new(frames: Array3<Complex64>, spec: FispMrf) -> Self {
        MrfSeries { frames, spec, normalization: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.frames.len_of(Axis(0));
        ensure(t == self.spec.n_tr, || format!("series has {t} frames, spec has {} TRs", self.spec.n_tr))
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len_of(Axis(0))
    }

    /// `(h, w)`
    pub fn image_dim(&self) -> (usize, usize) {
        let (_, h, w) = self.frames.dim();
        (h, w)
    }

    pub fn time_average(&self) -> Array2<f64> {
        time_average(self)
    }

    /// Divides by the 95th percentile of the time-average magnitude.
    pub fn normalize_95th(&self) -> Result<(MrfSeries, f64)> {
        let p = percentile95(time_average(self).as_slice().expect("standard layout"))
            .ok_or_else(|| invalid("empty series"))?;
        ensure(p > 0.0 && p.is_finite(), || "cannot normalize a series whose average is zero".into())?;
        let out = MrfSeries {
            frames: self.frames.mapv(|v| v / p),
            spec: self.spec.clone(),
            normalization: self.normalization * p,
        };
        Ok((out, p))
    }
}

/// Magnitude of the mean over the time axis.
pub fn time_average(series: &MrfSeries) -> Array2<f64> {
    let t = series.n_frames().max(1) as f64;
    series.frames.sum_axis(Axis(0)).mapv(|v| (v / t).norm())
}

/// Nearest-rank 95th percentile: the `ceil(0.95 n)`-th smallest value.
pub fn percentile95(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (95 * v.len()).div_ceil(100);
    Some(v[rank.max(1) - 1])
}

/// Divides an image by the 95th percentile of its magnitudes.
pub fn normalize_95th(image: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let mags: Vec<f64> = image.iter().map(|v| v.abs()).collect();
    let p = percentile95(&mags).ok_or_else(|| invalid("empty image"))?;
    ensure(p > 0.0 && p.is_finite(), || "cannot normalize an image whose 95th percentile is zero".into())?;
    Ok((image.mapv(|v| v / p), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ramp_percentile() {
        let ramp: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile95(&ramp), Some(95.0));
        let img = Array2::from_shape_vec((10, 10), ramp).unwrap();
        let (out, p) = normalize_95th(&img).unwrap();
        assert_eq!(p, 95.0);
        assert_eq!(out[[9, 9]], 100.0 / 95.0);
        assert_eq!(percentile95(&[3.0]), Some(3.0));
        assert_eq!(percentile95(&[]), None);
        // n = 21: ceil(19.95) = 20th smallest
        let v: Vec<f64> = (1..=21).map(f64::from).collect();
        assert_eq!(percentile95(&v), Some(20.0));
    }

    #[test]
    fn constant_and_zero_images() {
        let (out, p) = normalize_95th(&Array2::from_elem((4, 5), 2.5)).unwrap();
        assert_eq!(p, 2.5);
        assert!(out.iter().all(|&v| v == 1.0));
        assert!(normalize_95th(&Array2::zeros((3, 3))).is_err());
    }

    #[test]
    fn time_average_of_constant_and_rotated_series() {
        let v = Complex64::new(0.3, -0.4);
        let s = MrfSeries::new(Array3::from_elem((6, 3, 3), v), FispMrf::new(6, 0));
        assert!(time_average(&s).iter().all(|&a| (a - 0.5).abs() < 1e-15));
        let rot = Complex64::from_polar(1.0, 1.234);
        let r = MrfSeries::new(s.frames.mapv(|x| x * rot), s.spec.clone());
        for (a, b) in time_average(&s).iter().zip(time_average(&r).iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn series_normalization() {
        let frames = Array3::from_shape_fn((4, 8, 8), |(t, y, x)| Complex64::new((t + y * 8 + x) as f64, 1.0));
        let s = MrfSeries::new(frames, FispMrf::new(4, 0));
        let (n1, p1) = s.normalize_95th().unwrap();
        let p95 = percentile95(n1.time_average().as_slice().unwrap()).unwrap();
        assert_abs_diff_eq!(p95, 1.0, epsilon = 1e-12);
        assert_eq!(n1.normalization, p1);
        let (_, p2) = n1.normalize_95th().unwrap();
        assert_abs_diff_eq!(p2, 1.0, epsilon = 1e-12);
        let zero = MrfSeries::new(Array3::zeros((4, 2, 2)), FispMrf::new(4, 0));
        assert!(zero.normalize_95th().is_err());
    }

    proptest! {
        #[test]
        fn normalization_scale_equivariant(vals in prop::collection::vec(0.01..100.0f64, 16), c in 0.1..10.0f64) {
            let img = Array2::from_shape_vec((4, 4), vals).unwrap();
            let (a, p) = normalize_95th(&img).unwrap();
            let (b, q) = normalize_95th(&img.mapv(|v| v * c)).unwrap();
            prop_assert!((q - c * p).abs() <= 1e-12 * q);
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
            let (again, one) = normalize_95th(&a).unwrap();
            prop_assert!((one - 1.0).abs() < 1e-9);
            for (x, y) in a.iter().zip(again.iter()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
