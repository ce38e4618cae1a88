//! Fingerprint dictionary construction and matching.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{percentile95, MrfSeries};
use crate::epg::{simulate_fingerprint, FispMrf, TissueParams};
use crate::error::{ensure, invalid, Result};

/// Pixels with a signal norm at or below this fraction of the series'
/// 95th-percentile norm are not matched.
pub const NULL_FLOOR: f64 = 1e-6;

const PIXEL_BLOCK: usize = 8;
const ATOM_PANEL: usize = 256;

/// Relaxation grid over which atoms are simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub t1_values_ms: Vec<f64>,
    pub t2_values_ms: Vec<f64>,
    pub exclude_t2_gt_t1: bool,
}

impl ParamGrid {
    pub fn log_spaced(t1: (f64, f64, usize), t2: (f64, f64, usize)) -> Self {
        ParamGrid {
            t1_values_ms: geomspace(t1.0, t1.1, t1.2),
            t2_values_ms: geomspace(t2.0, t2.1, t2.2),
            exclude_t2_gt_t1: true,
        }
    }

    /// 60 x 50 log-spaced grid, T1 4-4000 ms, T2 2-2000 ms.
    pub fn desk() -> Self {
        Self::log_spaced((4.0, 4000.0, 60), (2.0, 2000.0, 50))
    }

    /// 200 x 180 log-spaced grid over the same ranges (21,414 atoms).
    pub fn full() -> Self {
        Self::log_spaced((4.0, 4000.0, 200), (2.0, 2000.0, 180))
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(invalid(format!("unknown grid preset '{other}' (expected desk or full)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t1", &self.t1_values_ms), ("t2", &self.t2_values_ms)] {
            ensure(!v.is_empty(), || format!("{name} grid is empty"))?;
            ensure(v.iter().all(|x| x.is_finite() && *x > 0.0), || format!("{name} grid has non-positive values"))?;
            ensure(v.windows(2).all(|w| w[0] < w[1]), || format!("{name} grid is not strictly increasing"))?;
        }
        Ok(())
    }

    pub fn admissible(&self, t1: f64, t2: f64) -> bool {
        !self.exclude_t2_gt_t1 || t2 <= t1
    }

    /// Admissible `(t1 index, t2 index)` pairs in atom order (T1-major).
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, &t1) in self.t1_values_ms.iter().enumerate() {
            for (j, &t2) in self.t2_values_ms.iter().enumerate() {
                if self.admissible(t1, t2) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn t1_range(&self) -> (f64, f64) {
        (self.t1_values_ms[0], *self.t1_values_ms.last().unwrap())
    }

    pub fn t2_range(&self) -> (f64, f64) {
        (self.t2_values_ms[0], *self.t2_values_ms.last().unwrap())
    }

    /// Nearest admissible grid point in log distance.
    pub fn snap(&self, t1_ms: f64, t2_ms: f64) -> (usize, usize) {
        let (lt1, lt2) = (t1_ms.ln(), t2_ms.ln());
        let mut best = (0, 0);
        let mut best_d = f64::INFINITY;
        for (i, j) in self.pairs() {
            let d = (self.t1_values_ms[i].ln() - lt1).powi(2) + (self.t2_values_ms[j].ln() - lt2).powi(2);
            if d < best_d {
                best_d = d;
                best = (i, j);
            }
        }
        best
    }
}

pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| if i == n - 1 { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }).collect()
        }
    }
}

/// Unit-norm simulated fingerprints, one per admissible grid point.
#[derive(Debug, Clone)]
pub struct Dictionary {
    n_atoms: usize,
    len: usize,
    // time-major planes, `[t * n_atoms + atom]`
    re: Vec<f64>,
    im: Vec<f64>,
    params: Vec<TissueParams>,
    grid_index: Vec<(usize, usize)>,
    // Euclidean norm of each unit-density fingerprint before normalization
    atom_norms: Vec<f64>,
    grid: ParamGrid,
    spec: FispMrf,
    manifest_hash: String,
}

impl Dictionary {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    /// Number of time points per atom.
    pub fn atom_len(&self) -> usize {
        self.len
    }

    pub fn params(&self) -> &[TissueParams] {
        &self.params
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn spec(&self) -> &FispMrf {
        &self.spec
    }

    /// Norm of atom `j` as simulated at unit density, before scaling to
    /// unit norm. Dividing a matched inner product by it gives density.
    pub fn atom_norm(&self, j: usize) -> f64 {
        self.atom_norms[j]
    }

    pub fn atom_norms(&self) -> &[f64] {
        &self.atom_norms
    }

    pub fn grid_index(&self, atom: usize) -> (usize, usize) {
        self.grid_index[atom]
    }

    /// Atom index for a grid position, if admissible.
    pub fn atom_at(&self, t1_idx: usize, t2_idx: usize) -> Option<usize> {
        self.grid_index.iter().position(|&g| g == (t1_idx, t2_idx))
    }

    /// SHA-256 over the atoms in single precision, atom-major.
    pub fn manifest_hash(&self) -> &str {
        &self.manifest_hash
    }

    pub fn atom(&self, j: usize) -> Vec<Complex64> {
        (0..self.len).map(|t| Complex64::new(self.re[t * self.n_atoms + j], self.im[t * self.n_atoms + j])).collect()
    }

    /// Atom-major copy of all atoms.
    pub fn atoms(&self) -> Vec<Complex64> {
        (0..self.n_atoms).flat_map(|j| self.atom(j)).collect()
    }

    /// Rebuilds a dictionary from stored atoms (atom-major). Rows are
    /// renormalized so the unit-norm invariant holds in double precision;
    /// the hash is taken over the atoms as given.
    pub fn from_atoms(atoms: &[Complex64], atom_norms: Vec<f64>, grid: ParamGrid, spec: FispMrf) -> Result<Self> {
        grid.validate()?;
        spec.validate()?;
        let grid_index = grid.pairs();
        let n_atoms = grid_index.len();
        ensure(n_atoms > 0, || "grid admits no atoms".into())?;
        let len = spec.n_tr;
        ensure(atoms.len() == n_atoms * len, || {
            format!("expected {} x {} atom samples, got {}", n_atoms, len, atoms.len())
        })?;
        ensure(atom_norms.len() == n_atoms, || format!("expected {} atom norms, got {}", n_atoms, atom_norms.len()))?;
        ensure(atom_norms.iter().all(|n| n.is_finite() && *n >= 0.0), || "atom norms must be finite".into())?;
        let hash = atoms_digest(atoms);
        let rows: Vec<Vec<Complex64>> = atoms.chunks(len).map(|r| unit_norm(r).0).collect();
        Ok(Self::assemble(rows, atom_norms, hash, grid_index, grid, spec))
    }

    fn assemble(
        rows: Vec<Vec<Complex64>>,
        atom_norms: Vec<f64>,
        manifest_hash: String,
        grid_index: Vec<(usize, usize)>,
        grid: ParamGrid,
        spec: FispMrf,
    ) -> Self {
        let n_atoms = rows.len();
        let len = spec.n_tr;
        let mut re = vec![0.0; n_atoms * len];
        let mut im = vec![0.0; n_atoms * len];
        for (j, row) in rows.iter().enumerate() {
            for (t, c) in row.iter().enumerate() {
                re[t * n_atoms + j] = c.re;
                im[t * n_atoms + j] = c.im;
            }
        }
        let params = grid_index
            .iter()
            .map(|&(i, j)| {
                TissueParams::new(grid.t1_values_ms[i], grid.t2_values_ms[j], 1.0).expect("admissible grid point")
            })
            .collect();
        Dictionary { n_atoms, len, re, im, params, grid_index, atom_norms, grid, spec, manifest_hash }
    }
}

/// SHA-256 of the atoms as interleaved little-endian `f32` pairs, i.e. of
/// the payload a container holding them would carry.
fn atoms_digest(atoms: &[Complex64]) -> String {
    let mut hasher = Sha256::new();
    for c in atoms {
        hasher.update((c.re as f32).to_le_bytes());
        hasher.update((c.im as f32).to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// `(row / |row|, |row|)`; a zero row is returned unchanged.
fn unit_norm(row: &[Complex64]) -> (Vec<Complex64>, f64) {
    let n = row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        (row.to_vec(), 0.0)
    } else {
        (row.iter().map(|c| c / n).collect(), n)
    }
}

/// Simulates one unit-density atom per admissible grid point and scales
/// each to unit Euclidean norm. Grids with `t2 > t1` exclusion drop the
/// physically implausible pairs; a grid admitting nothing is an error.
pub fn build_dictionary(grid: &ParamGrid, spec: &FispMrf) -> Result<Dictionary> {
    grid.validate()?;
    spec.validate()?;
    let pairs = grid.pairs();
    ensure(!pairs.is_empty(), || "grid admits no (t1, t2) pairs".into())?;
    let rows = pairs
        .par_iter()
        .map(|&(i, j)| {
            let p = TissueParams::new(grid.t1_values_ms[i], grid.t2_values_ms[j], 1.0)?;
            Ok(unit_norm(&simulate_fingerprint(&p, spec)?.samples))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, norms): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let flat: Vec<Complex64> = rows.iter().flatten().copied().collect();
    Ok(Dictionary::assemble(rows, norms, atoms_digest(&flat), pairs, grid.clone(), spec.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Matched relaxation times (unit density); `None` for the null match.
    pub params: Option<TissueParams>,
    pub pd: f64,
    pub similarity: f64,
    pub atom_index: Option<usize>,
}

impl MatchResult {
    pub const NULL: MatchResult = MatchResult { params: None, pd: 0.0, similarity: 0.0, atom_index: None };

    pub fn is_null(&self) -> bool {
        self.atom_index.is_none()
    }
}

/// Best atom by magnitude of the complex inner product. Ties go to the
/// lowest atom index. A zero signal yields [`MatchResult::NULL`].
pub fn match_fingerprint(signal: &[Complex64], dict: &Dictionary) -> Result<MatchResult> {
    check_len(signal, dict)?;
    let (re, im): (Vec<f64>, Vec<f64>) = signal.iter().map(|c| (c.re, c.im)).unzip();
    let norm = signal.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(MatchResult::NULL);
    }
    let mut best = [(0usize, -1.0f64)];
    match_block(dict, &[&re[..]], &[&im[..]], &mut best);
    Ok(result_from(dict, best[0], norm))
}

/// Reference matcher: one atom at a time, straight loop over samples.
pub fn match_fingerprint_naive(signal: &[Complex64], dict: &Dictionary) -> Result<MatchResult> {
    check_len(signal, dict)?;
    let norm = signal.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(MatchResult::NULL);
    }
    let n = dict.n_atoms;
    let mut best = (0usize, -1.0f64);
    for a in 0..n {
        let mut acc_re = 0.0;
        let mut acc_im = 0.0;
        for (t, s) in signal.iter().enumerate() {
            let ar = dict.re[t * n + a];
            let ai = dict.im[t * n + a];
            acc_re += ar * s.re + ai * s.im;
            acc_im += ar * s.im - ai * s.re;
        }
        let mag = acc_re * acc_re + acc_im * acc_im;
        if mag > best.1 {
            best = (a, mag);
        }
    }
    Ok(result_from(dict, best, norm))
}

fn check_len(signal: &[Complex64], dict: &Dictionary) -> Result<()> {
    ensure(signal.len() == dict.len, || {
        format!("signal has {} samples, dictionary atoms have {}", signal.len(), dict.len)
    })
}

fn result_from(dict: &Dictionary, (atom, mag2): (usize, f64), norm: f64) -> MatchResult {
    let pd = mag2.max(0.0).sqrt();
    MatchResult { params: Some(dict.params[atom]), pd, similarity: (pd / norm).min(1.0), atom_index: Some(atom) }
}

/// Blocked Gram kernel: for each signal in the block, the atom with the
/// largest |<atom, signal>|^2. Accumulation order per (signal, atom) pair
/// matches the naive matcher exactly, so both pick identical atoms.
fn match_block(dict: &Dictionary, sig_re: &[&[f64]], sig_im: &[&[f64]], best: &mut [(usize, f64)]) {
    let n = dict.n_atoms;
    let p = sig_re.len();
    let mut acc_re = vec![0.0f64; p * ATOM_PANEL];
    let mut acc_im = vec![0.0f64; p * ATOM_PANEL];
    for b in best.iter_mut() {
        *b = (0, -1.0);
    }
    let mut a0 = 0;
    while a0 < n {
        let width = ATOM_PANEL.min(n - a0);
        acc_re.iter_mut().for_each(|v| *v = 0.0);
        acc_im.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..dict.len {
            let ar = &dict.re[t * n + a0..t * n + a0 + width];
            let ai = &dict.im[t * n + a0..t * n + a0 + width];
            for q in 0..p {
                let (sr, si) = (sig_re[q][t], sig_im[q][t]);
                let cr = &mut acc_re[q * ATOM_PANEL..q * ATOM_PANEL + width];
                let ci = &mut acc_im[q * ATOM_PANEL..q * ATOM_PANEL + width];
                for k in 0..width {
                    cr[k] += ar[k] * sr + ai[k] * si;
                    ci[k] += ar[k] * si - ai[k] * sr;
                }
            }
        }
        for q in 0..p {
            for k in 0..width {
                let (r, i) = (acc_re[q * ATOM_PANEL + k], acc_im[q * ATOM_PANEL + k]);
                let mag = r * r + i * i;
                if mag > best[q].1 {
                    best[q] = (a0 + k, mag);
                }
            }
        }
        a0 += width;
    }
}

/// Per-pixel matching output. Null pixels carry zeros and no atom.
///
/// `pd` is proton density: the matched inner product divided by the
/// atom's unit-density norm, times the series normalization, so a
/// noiseless series of simulated fingerprints gives back the density
/// it was simulated with.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchMaps {
    pub t1: Array2<f64>,
    pub t2: Array2<f64>,
    pub pd: Array2<f64>,
    pub similarity: Array2<f64>,
    pub atom_index: Array2<Option<usize>>,
}

impl MatchMaps {
    pub fn dim(&self) -> (usize, usize) {
        self.t1.dim()
    }
}

/// Matches every pixel of `series` independently. Pixels whose signal norm
/// does not exceed [`NULL_FLOOR`] times the 95th-percentile pixel norm get
/// the null result.
pub fn match_image(series: &MrfSeries, dict: &Dictionary) -> Result<MatchMaps> {
    let (t, h, w) = series.frames.dim();
    ensure(t == dict.len, || format!("series has {t} time points, dictionary atoms have {}", dict.len))?;
    let npix = h * w;
    // pixel-major planes
    let mut re = vec![0.0; npix * t];
    let mut im = vec![0.0; npix * t];
    for (ti, frame) in series.frames.outer_iter().enumerate() {
        for (pix, v) in frame.iter().enumerate() {
            re[pix * t + ti] = v.re;
            im[pix * t + ti] = v.im;
        }
    }
    let norms: Vec<f64> = (0..npix)
        .map(|p| {
            let r = &re[p * t..(p + 1) * t];
            let i = &im[p * t..(p + 1) * t];
            r.iter().zip(i).map(|(a, b)| a * a + b * b).sum::<f64>().sqrt()
        })
        .collect();
    let floor = NULL_FLOOR * percentile95(&norms).unwrap_or(0.0);
    let active: Vec<usize> = (0..npix).filter(|&p| norms[p] > floor && norms[p] > 0.0).collect();

    let results: Vec<(usize, MatchResult)> = active
        .par_chunks(PIXEL_BLOCK)
        .flat_map_iter(|chunk| {
            let sr: Vec<&[f64]> = chunk.iter().map(|&p| &re[p * t..(p + 1) * t]).collect();
            let si: Vec<&[f64]> = chunk.iter().map(|&p| &im[p * t..(p + 1) * t]).collect();
            let mut best = vec![(0usize, -1.0f64); chunk.len()];
            match_block(dict, &sr, &si, &mut best);
            chunk.iter().zip(best).map(|(&p, b)| (p, result_from(dict, b, norms[p]))).collect::<Vec<_>>()
        })
        .collect();

    let mut maps = MatchMaps {
        t1: Array2::zeros((h, w)),
        t2: Array2::zeros((h, w)),
        pd: Array2::zeros((h, w)),
        similarity: Array2::zeros((h, w)),
        atom_index: Array2::from_elem((h, w), None),
    };
    for (p, r) in results {
        let (y, x) = (p / w, p % w);
        if let Some(params) = r.params {
            maps.t1[[y, x]] = params.t1_ms();
            maps.t2[[y, x]] = params.t2_ms();
        }
        if let Some(j) = r.atom_index {
            let scale = dict.atom_norms[j];
            maps.pd[[y, x]] = if scale > 0.0 { r.pd / scale * series.normalization } else { 0.0 };
        }
        maps.similarity[[y, x]] = r.similarity;
        maps.atom_index[[y, x]] = r.atom_index;
    }
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn small_grid() -> ParamGrid {
        ParamGrid::log_spaced((20.0, 3000.0, 12), (5.0, 1500.0, 10))
    }

    fn small_dict() -> &'static Dictionary {
        static D: OnceLock<Dictionary> = OnceLock::new();
        D.get_or_init(|| build_dictionary(&small_grid(), &FispMrf::new(120, 2)).unwrap())
    }

    #[test]
    fn counting_and_empty_grids() {
        let grid =
            ParamGrid { t1_values_ms: vec![500.0, 1000.0], t2_values_ms: vec![50.0, 100.0], exclude_t2_gt_t1: true };
        let d = build_dictionary(&grid, &FispMrf::new(30, 0)).unwrap();
        assert_eq!(d.n_atoms(), 4);

        let none = ParamGrid { t1_values_ms: vec![50.0], t2_values_ms: vec![100.0], exclude_t2_gt_t1: true };
        assert!(build_dictionary(&none, &FispMrf::new(30, 0)).is_err());

        let unsorted = ParamGrid { t1_values_ms: vec![5.0, 4.0], t2_values_ms: vec![1.0], exclude_t2_gt_t1: true };
        assert!(unsorted.validate().is_err());
    }

    #[test]
    fn desk_and_full_grid_sizes() {
        assert_eq!(ParamGrid::desk().pairs().len(), 1781);
        assert_eq!(ParamGrid::full().pairs().len(), 21414);
        assert!(ParamGrid::preset("bogus").is_err());
    }

    #[test]
    fn atoms_have_unit_norm() {
        let d = small_dict();
        for j in 0..d.n_atoms() {
            let n: f64 = d.atom(j).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn self_match_and_scaled_match() {
        let d = small_dict();
        for j in (0..d.n_atoms()).step_by(7) {
            let atom = d.atom(j);
            let r = match_fingerprint(&atom, d).unwrap();
            assert_eq!(r.atom_index, Some(j));
            assert_abs_diff_eq!(r.similarity, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.pd, 1.0, epsilon = 1e-12);

            let f = Complex64::from_polar(2.5, 1.1);
            let scaled: Vec<_> = atom.iter().map(|c| c * f).collect();
            let r = match_fingerprint(&scaled, d).unwrap();
            assert_eq!(r.atom_index, Some(j));
            assert_abs_diff_eq!(r.pd, 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_signal_is_null_and_length_checked() {
        let d = small_dict();
        let r = match_fingerprint(&vec![Complex64::default(); d.atom_len()], d).unwrap();
        assert!(r.is_null());
        assert_eq!(r.pd, 0.0);
        assert_eq!(r.similarity, 0.0);
        assert!(match_fingerprint(&[Complex64::new(1.0, 0.0)], d).is_err());
    }

    #[test]
    fn off_grid_signal_matches_exhaustive_scan() {
        let d = small_dict();
        let p = TissueParams::new(700.0, 90.0, 1.0).unwrap();
        let s = simulate_fingerprint(&p, d.spec()).unwrap().samples;
        let r = match_fingerprint(&s, d).unwrap();
        // exhaustive: maximize |<atom, s>| over all atoms
        let mut best = (0, -1.0);
        for j in 0..d.n_atoms() {
            let ip: Complex64 = d.atom(j).iter().zip(&s).map(|(a, x)| a.conj() * x).sum();
            if ip.norm() > best.1 {
                best = (j, ip.norm());
            }
        }
        assert_eq!(r.atom_index, Some(best.0));
        assert_abs_diff_eq!(r.pd, best.1, epsilon = 1e-12);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let grid = ParamGrid { t1_values_ms: vec![100.0, 200.0], t2_values_ms: vec![10.0], exclude_t2_gt_t1: true };
        let spec = FispMrf::new(4, 0);
        let same = vec![Complex64::new(0.5, 0.0); 8];
        let d = Dictionary::from_atoms(&same, vec![1.0; 2], grid, spec).unwrap();
        let r = match_fingerprint(&[Complex64::new(1.0, 0.0); 4], &d).unwrap();
        assert_eq!(r.atom_index, Some(0));
    }

    #[test]
    fn image_matching_recovers_generating_atoms() {
        let d = small_dict();
        let (h, w) = (5, 7);
        let mut frames = Array3::zeros((d.atom_len(), h, w));
        let mut expected = Array2::from_elem((h, w), None);
        for y in 0..h {
            for x in 0..w {
                if (x + y) % 4 == 0 {
                    continue;
                }
                let j = (y * w + x) * 3 % d.n_atoms();
                let pd = 0.2 + 0.1 * x as f64;
                // the unit-density fingerprint, times the density
                for (t, c) in d.atom(j).iter().enumerate() {
                    frames[[t, y, x]] = c * d.atom_norm(j) * pd;
                }
                expected[[y, x]] = Some(j);
            }
        }
        let series = MrfSeries::new(frames, d.spec().clone());
        let maps = match_image(&series, d).unwrap();
        assert_eq!(maps.atom_index, expected);
        for y in 0..h {
            for x in 0..w {
                if let Some(j) = expected[[y, x]] {
                    assert_eq!(maps.t1[[y, x]], d.params()[j].t1_ms());
                    assert_abs_diff_eq!(maps.pd[[y, x]], 0.2 + 0.1 * x as f64, epsilon = 1e-12);
                } else {
                    assert_eq!(maps.pd[[y, x]], 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_series_gives_null_maps() {
        let d = small_dict();
        let series = MrfSeries::new(Array3::zeros((d.atom_len(), 4, 4)), d.spec().clone());
        let maps = match_image(&series, d).unwrap();
        assert!(maps.atom_index.iter().all(|a| a.is_none()));
        assert!(maps.similarity.iter().all(|&s| s == 0.0));

        let bad = MrfSeries::new(Array3::zeros((3, 4, 4)), FispMrf::new(3, 0));
        assert!(match_image(&bad, d).is_err());
    }

    #[test]
    fn blocked_and_naive_agree_on_random_signals() {
        let d = small_dict();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s: Vec<Complex64> =
                (0..d.atom_len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let a = match_fingerprint(&s, d).unwrap();
            let b = match_fingerprint_naive(&s, d).unwrap();
            assert_eq!(a, b);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn argmax_invariant_to_scale_and_phase(j in 0usize..40, c in 0.01..100.0f64, theta in 0.0..std::f64::consts::TAU, noise_seed in 0u64..1000) {
            let d = small_dict();
            let j = j % d.n_atoms();
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let s: Vec<Complex64> = d.atom(j).iter()
                .map(|a| a + Complex64::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02)))
                .collect();
            let base = match_fingerprint(&s, d).unwrap();
            let f = Complex64::from_polar(c, theta);
            let scaled: Vec<_> = s.iter().map(|x| x * f).collect();
            let r = match_fingerprint(&scaled, d).unwrap();
            prop_assert_eq!(r.atom_index, base.atom_index);
            prop_assert!((r.pd - c * base.pd).abs() <= 1e-9 * c * base.pd);
        }
    }
}
