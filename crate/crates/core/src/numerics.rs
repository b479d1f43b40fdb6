//! Seeded random streams, dense symmetric eigendecomposition and summary
//! statistics shared by every other module.

use std::hash::{Hash, Hasher};

use faer::{Mat, Side};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GecError, Result};

/// A reproducible random stream labelled by `(master_seed, stream_index)`.
///
/// The stream index selects an independent ChaCha stream (nonce) under the
/// key derived from the master seed, so realizations can be generated in any
/// order and on any number of workers.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        self.rng.random_range(lo..hi)
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Dense real symmetric matrix stored row-major. Symmetry is exact because
/// every write goes to both triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Builds from the lower triangle produced by `f(i, j)` with `j <= i`.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Rejects input that is not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(GecError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        for i in 0..dim {
            for j in 0..i {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(GecError::invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Copies the strict upper triangle into the lower one, tile by tile.
    fn mirror_upper(&mut self) {
        const TILE: usize = 64;
        let d = self.dim;
        for bi in (0..d).step_by(TILE) {
            for bj in (bi..d).step_by(TILE) {
                for i in bi..(bi + TILE).min(d) {
                    for j in bj.max(i + 1)..(bj + TILE).min(d) {
                        self.data[j * d + i] = self.data[i * d + j];
                    }
                }
            }
        }
    }

    fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.dim.hash(&mut h);
        for x in &self.data {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// GOE sample in the normalization with off-diagonal variance 1 and diagonal
/// variance 2, i.e. the distribution of `(B + Bᵀ)/√2` for standard normal `B`.
pub fn sample_goe(dim: usize, rng: &mut RngStream) -> SymmetricMatrix {
    assert!(dim >= 1, "GOE dimension must be positive");
    let mut m = SymmetricMatrix::zeros(dim);
    for i in 0..dim {
        let row = &mut m.data[i * dim..(i + 1) * dim];
        row[i] = std::f64::consts::SQRT_2 * rng.normal();
        for x in &mut row[i + 1..] {
            *x = rng.normal();
        }
    }
    m.mirror_upper();
    m
}

/// Eigenvalues ascending, eigenvectors stored column-major (`dim × dim`).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    eigenvectors: Vec<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The `n`-th eigenvector (normalized).
    pub fn vector(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.eigenvectors[n * d..(n + 1) * d]
    }
}

fn to_faer(m: &SymmetricMatrix) -> Mat<f64> {
    Mat::from_fn(m.dim, m.dim, |i, j| m.get(i, j))
}

/// Full eigendecomposition of a dense symmetric matrix.
pub fn eigh(m: &SymmetricMatrix) -> Result<Spectrum> {
    let d = m.dim();
    if d == 0 {
        return Err(GecError::EmptyInput("matrix of dimension 0"));
    }
    let evd = to_faer(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| GecError::NoConvergence {
            dim: d,
            fingerprint: m.fingerprint(),
        })?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));

    let mut eigenvalues = Vec::with_capacity(d);
    let mut eigenvectors = Vec::with_capacity(d * d);
    for &k in &order {
        eigenvalues.push(vals[k]);
        eigenvectors.extend((0..d).map(|i| vecs[(i, k)]));
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    if m.dim() == 0 {
        return Err(GecError::EmptyInput("matrix of dimension 0"));
    }
    let mut vals = to_faer(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| GecError::NoConvergence {
            dim: m.dim(),
            fingerprint: m.fingerprint(),
        })?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance (zero for a single value).
    pub variance: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(GecError::EmptyInput("summarize needs at least one value"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    let variance = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    Ok(SummaryStats {
        count: n,
        mean,
        variance,
        stderr: (variance / n as f64).sqrt(),
        min,
        max,
    })
}

/// Histogram normalized as a probability density over the covered range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    /// Values falling outside `[edges[0], edges[last]]`.
    pub outside: u64,
}

impl Histogram {
    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    spaced_edges(lo, hi, bins)
}

/// Log-spaced edges; `lo` must be positive.
pub fn log_edges(lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if lo <= 0.0 || !lo.is_finite() {
        return Err(GecError::invalid("log-spaced bins need a positive lower edge"));
    }
    let mut edges: Vec<f64> = spaced_edges(lo.ln(), hi.max(lo).ln(), bins)
        .into_iter()
        .map(f64::exp)
        .collect();
    // exp(ln x) can land just inside x; pin the ends so the extremes are binned.
    if !is_degenerate(lo.ln(), hi.max(lo).ln()) && bins > 0 {
        edges[0] = lo;
        edges[bins] = hi;
    }
    Ok(edges)
}

/// Ranges narrower than rounding noise count as a single value.
fn is_degenerate(lo: f64, hi: f64) -> bool {
    hi - lo <= 1e-9 * lo.abs().max(hi.abs()).max(1.0)
}

/// Evenly spaced edges over `[lo, hi]`. A degenerate range gets a unit-width
/// window with `lo` in the middle of a bin, away from any edge.
fn spaced_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let n = bins as f64;
    if is_degenerate(lo, hi) {
        let mid = (bins / 2) as f64;
        return (0..=bins).map(|k| lo + (k as f64 - mid - 0.5) / n).collect();
    }
    (0..=bins).map(|k| lo + (hi - lo) * k as f64 / n).collect()
}

/// Bins `values` into the given ascending edges. The last bin is closed.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(GecError::invalid("histogram needs at least two edges"));
    }
    if let Some(k) = edges.windows(2).position(|w| w[1] <= w[0]) {
        return Err(GecError::Unsorted(k + 1));
    }
    let nbins = edges.len() - 1;
    let mut counts = vec![0u64; nbins];
    let mut outside = 0u64;
    let (lo, hi) = (edges[0], edges[nbins]);
    for &v in values {
        if !(lo..=hi).contains(&v) {
            outside += 1;
            continue;
        }
        // First edge strictly greater than v, minus one.
        let k = edges.partition_point(|&e| e <= v).saturating_sub(1).min(nbins - 1);
        counts[k] += 1;
    }
    let inside: u64 = counts.iter().sum();
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| {
            if inside == 0 {
                0.0
            } else {
                c as f64 / (inside as f64 * (w[1] - w[0]))
            }
        })
        .collect();
    Ok(Histogram {
        edges: edges.to_vec(),
        counts,
        density,
        outside,
    })
}

/// Default binning: 64 uniform bins spanning the data.
pub fn histogram_auto(values: &[f64]) -> Result<Histogram> {
    let s = summarize(values)?;
    histogram(values, &uniform_edges(s.min, s.max, 64))
}

/// Nonparametric bootstrap standard error of `stat` over `n` resampled units.
pub fn bootstrap_se(n: usize, resamples: usize, rng: &mut RngStream, mut stat: impl FnMut(&[usize]) -> f64) -> f64 {
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let mut idx = vec![0usize; n];
    let draws: Vec<f64> = (0..resamples)
        .map(|_| {
            idx.iter_mut().for_each(|k| *k = rng.index(n));
            stat(&idx)
        })
        .collect();
    summarize(&draws).map(|s| s.variance.sqrt()).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_reproduce_and_differ() {
        let a: Vec<u64> = (0..8).map(|_| RngStream::new(7, 3).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut s = RngStream::new(7, 3);
        let mut t = RngStream::new(7, 4);
        let xs: Vec<u64> = (0..16).map(|_| s.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| t.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn goe_dim_one_has_variance_two() {
        let draws: Vec<f64> = (0..100_000u64)
            .map(|k| sample_goe(1, &mut RngStream::new(11, k)).get(0, 0))
            .collect();
        let s = summarize(&draws).unwrap();
        // Standard error of the sample variance of a normal: σ²·sqrt(2/(n-1)).
        let se = 2.0 * (2.0 / (s.count as f64 - 1.0)).sqrt();
        assert!((s.variance - 2.0).abs() < 3.0 * se, "{s:?}");
    }

    #[test]
    fn goe_width_is_d_plus_one() {
        let d = 64;
        let widths: Vec<f64> = (0..10_000u64)
            .map(|k| {
                let m = sample_goe(d, &mut RngStream::new(5, k));
                m.data.iter().map(|x| x * x).sum::<f64>() / d as f64
            })
            .collect();
        let s = summarize(&widths).unwrap();
        assert!((s.mean - 65.0).abs() < 3.0 * s.stderr, "{s:?}");
    }

    #[test]
    fn goe_offdiagonal_second_moment() {
        let mut rng = RngStream::new(3, 0);
        let mut acc = Vec::new();
        while acc.len() < 100_000 {
            let m = sample_goe(32, &mut rng);
            for i in 0..32 {
                for j in (i + 1)..32 {
                    acc.push(m.get(i, j) * m.get(i, j));
                }
            }
        }
        let s = summarize(&acc).unwrap();
        assert!((s.mean - 1.0).abs() < 0.02, "{}", s.mean);
    }

    #[test]
    fn eigh_small_cases() {
        let m = SymmetricMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(eigh(&m).unwrap().eigenvalues, vec![1.0, 3.0]);
        let m = SymmetricMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = eigh(&m).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_reconstructs_random_matrix() {
        let mut rng = RngStream::new(99, 1);
        let m = SymmetricMatrix::from_lower_fn(6, |_, _| rng.normal());
        let s = eigh(&m).unwrap();
        let range = s.eigenvalues[5] - s.eigenvalues[0];
        for i in 0..6 {
            for j in 0..6 {
                let rec: f64 = (0..6).map(|n| s.vector(n)[i] * s.eigenvalues[n] * s.vector(n)[j]).sum();
                assert!((rec - m.get(i, j)).abs() < 1e-10 * range);
                let ortho: f64 = (0..6).map(|k| s.vector(i)[k] * s.vector(j)[k]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((ortho - id).abs() < 1e-10);
            }
        }
        let tr: f64 = s.eigenvalues.iter().sum();
        assert!((tr - m.trace()).abs() < 1e-10 * 6.0 * m.max_abs());
    }

    #[test]
    fn from_rows_rejects_asymmetric() {
        assert!(SymmetricMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 0.0));
        let s = summarize(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 2.0));
        assert!(summarize(&[]).is_err());

        let mut rng = RngStream::new(1, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.normal()).collect();
        let s = summarize(&xs).unwrap();
        assert!(s.mean.abs() < 3.0 * s.stderr);
        let var_se = (2.0 / (xs.len() as f64 - 1.0)).sqrt();
        assert!((s.variance - 1.0).abs() < 3.0 * var_se);
    }

    #[test]
    fn histogram_density_integrates_to_one() {
        let mut rng = RngStream::new(2, 0);
        let xs: Vec<f64> = (0..5000).map(|_| rng.normal().exp()).collect();
        for h in [
            histogram_auto(&xs).unwrap(),
            histogram(&xs, &log_edges(1e-3, 1e3, 40).unwrap()).unwrap(),
        ] {
            let integral: f64 = h
                .density
                .iter()
                .zip(h.edges.windows(2))
                .map(|(d, w)| d * (w[1] - w[0]))
                .sum();
            assert!((integral - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn log_bins_contain_the_data_extremes() {
        let xs = [0.0123, 0.7, 3.3, 19.870001];
        let (lo, hi) = (xs[0], xs[3]);
        let h = histogram(&xs, &log_edges(lo, hi, 80).unwrap()).unwrap();
        assert_eq!(h.outside, 0);
        assert_eq!(h.counts.iter().sum::<u64>(), 4);
    }

    #[test]
    fn rounding_noise_counts_as_constant() {
        let x = 1.9250614413635185;
        let h = histogram_auto(&[x, x + 4e-16, x - 2e-16]).unwrap();
        assert_eq!(h.occupied_bins(), 1);
        assert_eq!(h.outside, 0);
    }

    #[test]
    fn histogram_of_constant_occupies_one_bin() {
        let h = histogram_auto(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(h.occupied_bins(), 1);
        assert_eq!(h.counts.len(), 64);
    }
}
