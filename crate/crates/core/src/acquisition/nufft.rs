//! Kaiser-Bessel gridding on an oversampled Cartesian grid.
//!
//! Image pixels sit at integer offsets `r = i - n/2` from the centre and
//! k-space coordinates are in cycles per field of view, so the exact
//! transform is `y(k) = sum_r x(r) exp(-i 2 pi k.r / n)`.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

pub const KERNEL_WIDTH: f64 = 4.0;
pub const OVERSAMPLING: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub width: f64,
    pub oversampling: f64,
    pub beta: f64,
    pub grid_size: usize,
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Shape parameter minimizing aliasing for the given width and oversampling.
pub fn kb_beta(width: f64, oversampling: f64) -> f64 {
    let a = width / oversampling * (oversampling - 0.5);
    PI * (a * a - 0.8).sqrt()
}

pub struct Nufft {
    n: usize,
    g: usize,
    width: f64,
    beta: f64,
    deapod: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Nufft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nufft").field("n", &self.n).field("grid", &self.g).field("beta", &self.beta).finish()
    }
}

impl Nufft {
    pub fn new(n: usize) -> Self {
        let g = {
            let g = (OVERSAMPLING * n as f64).ceil() as usize;
            g + g % 2
        };
        let width = KERNEL_WIDTH;
        let beta = kb_beta(width, OVERSAMPLING);
        let deapod = (0..n)
            .map(|i| {
                let nu = (i as f64 - (n / 2) as f64) / g as f64;
                kernel_ft(nu, width, beta)
            })
            .collect();
        let mut planner = FftPlanner::new();
        Nufft { n, g, width, beta, deapod, fft: planner.plan_fft_forward(g), ifft: planner.plan_fft_inverse(g) }
    }

    pub fn matrix(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> KernelParams {
        KernelParams { width: self.width, oversampling: OVERSAMPLING, beta: self.beta, grid_size: self.g }
    }

    fn kernel_at(&self, d: f64) -> f64 {
        let t = 2.0 * d / self.width;
        let s = 1.0 - t * t;
        if s < 0.0 {
            0.0
        } else {
            bessel_i0(self.beta * s.sqrt())
        }
    }

    /// Taps as (wrapped grid index, weight) along one axis.
    fn taps(&self, u: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let half = self.width / 2.0;
        let lo = (u - half).ceil() as i64;
        let hi = (u + half).floor() as i64;
        for m in lo..=hi {
            out.push((m.rem_euclid(self.g as i64) as usize, self.kernel_at(u - m as f64)));
        }
    }

    fn wrap(&self, i: usize) -> usize {
        (i as i64 - (self.n / 2) as i64).rem_euclid(self.g as i64) as usize
    }

    /// Type-2 transform: image to samples at `coords`.
    pub fn forward(&self, image: ArrayView2<Complex64>, coords: &[[f64; 2]]) -> Vec<Complex64> {
        let (n, g) = (self.n, self.g);
        assert_eq!(image.dim(), (n, n), "image must be {n}x{n}");
        let mut grid = vec![Complex64::default(); g * g];
        for ((iy, ix), v) in image.indexed_iter() {
            grid[self.wrap(iy) * g + self.wrap(ix)] = v / (self.deapod[iy] * self.deapod[ix]);
        }
        fft2(&mut grid, g, &self.fft);
        let scale = g as f64 / n as f64;
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        coords
            .iter()
            .map(|&[kx, ky]| {
                self.taps(kx * scale, &mut tx);
                self.taps(ky * scale, &mut ty);
                let mut acc = Complex64::default();
                for &(my, wy) in &ty {
                    let row = &grid[my * g..(my + 1) * g];
                    let mut r = Complex64::default();
                    for &(mx, wx) in &tx {
                        r += row[mx] * wx;
                    }
                    acc += r * wy;
                }
                acc
            })
            .collect()
    }

    /// Exact adjoint of [`Nufft::forward`].
    pub fn adjoint(&self, samples: &[Complex64], coords: &[[f64; 2]]) -> Array2<Complex64> {
        assert_eq!(samples.len(), coords.len());
        let (n, g) = (self.n, self.g);
        let mut grid = vec![Complex64::default(); g * g];
        let scale = g as f64 / n as f64;
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for (s, &[kx, ky]) in samples.iter().zip(coords) {
            self.taps(kx * scale, &mut tx);
            self.taps(ky * scale, &mut ty);
            for &(my, wy) in &ty {
                let v = s * wy;
                let row = &mut grid[my * g..(my + 1) * g];
                for &(mx, wx) in &tx {
                    row[mx] += v * wx;
                }
            }
        }
        fft2(&mut grid, g, &self.ifft);
        Array2::from_shape_fn((n, n), |(iy, ix)| {
            grid[self.wrap(iy) * g + self.wrap(ix)] / (self.deapod[iy] * self.deapod[ix])
        })
    }
}

/// Fourier transform of the truncated Kaiser-Bessel kernel at `nu`
/// cycles per grid cell.
fn kernel_ft(nu: f64, width: f64, beta: f64) -> f64 {
    let a = PI * width * nu;
    let z2 = beta * beta - a * a;
    if z2 > 0.0 {
        let z = z2.sqrt();
        width * z.sinh() / z
    } else if z2 < 0.0 {
        let z = (-z2).sqrt();
        width * z.sin() / z
    } else {
        width
    }
}

/// In-place 2D FFT of a square `g x g` row-major buffer.
pub(crate) fn fft2(buf: &mut [Complex64], g: usize, fft: &Arc<dyn Fft<f64>>) {
    fft.process(buf);
    transpose(buf, g);
    fft.process(buf);
    transpose(buf, g);
}

fn transpose(buf: &mut [Complex64], g: usize) {
    for i in 0..g {
        for j in i + 1..g {
            buf.swap(i * g + j, j * g + i);
        }
    }
}

/// Exact DFT on the `n x n` Cartesian grid of integer frequencies
/// `k in [-n/2, n/2)`, with the same centring as [`Nufft`].
pub struct CartesianFft {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl CartesianFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        CartesianFft { n, fft: planner.plan_fft_forward(n), ifft: planner.plan_fft_inverse(n) }
    }

    fn wrap(&self, i: usize) -> usize {
        (i as i64 - (self.n / 2) as i64).rem_euclid(self.n as i64) as usize
    }

    /// Spectrum in row-major order, `ky` major, both from `-n/2`.
    pub fn forward(&self, image: ArrayView2<Complex64>) -> Vec<Complex64> {
        let n = self.n;
        let mut buf = vec![Complex64::default(); n * n];
        for ((iy, ix), v) in image.indexed_iter() {
            buf[self.wrap(iy) * n + self.wrap(ix)] = *v;
        }
        fft2(&mut buf, n, &self.fft);
        (0..n * n).map(|p| buf[self.wrap(p / n) * n + self.wrap(p % n)]).collect()
    }

    pub fn inverse(&self, spectrum: &[Complex64]) -> Array2<Complex64> {
        let n = self.n;
        let mut buf = vec![Complex64::default(); n * n];
        for (p, v) in spectrum.iter().enumerate() {
            buf[self.wrap(p / n) * n + self.wrap(p % n)] = *v;
        }
        fft2(&mut buf, n, &self.ifft);
        let norm = 1.0 / (n * n) as f64;
        Array2::from_shape_fn((n, n), |(iy, ix)| buf[self.wrap(iy) * n + self.wrap(ix)] * norm)
    }

    /// Frequency coordinates matching [`CartesianFft::forward`]'s order.
    pub fn coords(&self) -> Vec<[f64; 2]> {
        let n = self.n;
        let h = (n / 2) as f64;
        (0..n * n).map(|p| [(p % n) as f64 - h, (p / n) as f64 - h]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nudft(image: &Array2<Complex64>, coords: &[[f64; 2]]) -> Vec<Complex64> {
        let n = image.nrows();
        let h = (n / 2) as f64;
        coords
            .iter()
            .map(|&[kx, ky]| {
                image
                    .indexed_iter()
                    .map(|((iy, ix), v)| {
                        let ph = -2.0 * PI * (kx * (ix as f64 - h) + ky * (iy as f64 - h)) / n as f64;
                        v * Complex64::from_polar(1.0, ph)
                    })
                    .sum()
            })
            .collect()
    }

    fn random_image(n: usize, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
        Array2::from_shape_fn((n, n), |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn bessel_reference_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert_abs_diff_eq!(bessel_i0(1.0), 1.266_065_877_752_008_4, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_i0(5.0), 27.239_871_823_604_45, epsilon = 1e-12);
    }

    #[test]
    fn beta_for_default_kernel() {
        assert_abs_diff_eq!(kb_beta(4.0, 1.5), 7.892_285_473_675_301, epsilon = 1e-9);
    }

    #[test]
    fn forward_approximates_exact_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 24;
        let img = random_image(n, &mut rng);
        let coords: Vec<[f64; 2]> =
            (0..300).map(|_| [rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0)]).collect();
        let approx = Nufft::new(n).forward(img.view(), &coords);
        let exact = nudft(&img, &coords);
        let num: f64 = approx.iter().zip(&exact).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = exact.iter().map(|b| b.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-2, "{}", (num / den).sqrt());
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20;
        let plan = Nufft::new(n);
        let coords: Vec<[f64; 2]> =
            (0..150).map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)]).collect();
        let x = random_image(n, &mut rng);
        let y: Vec<Complex64> =
            (0..150).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let ax = plan.forward(x.view(), &coords);
        let aty = plan.adjoint(&y, &coords);
        let lhs: Complex64 = ax.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
        let rhs: Complex64 = x.iter().zip(aty.iter()).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-12);
    }

    #[test]
    fn cartesian_matches_dft_and_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let plan = CartesianFft::new(n);
        let img = random_image(n, &mut rng);
        let spec = plan.forward(img.view());
        let exact = nudft(&img, &plan.coords());
        for (a, b) in spec.iter().zip(&exact) {
            assert!((a - b).norm() < 1e-10);
        }
        let back = plan.inverse(&spec);
        for (a, b) in back.iter().zip(img.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
