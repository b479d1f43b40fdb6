//! Computational bases, Hamiltonians as weighted Fock-space graphs, and the
//! per-state graph-energy centrality (GEC).
//!
//! For a centered Hamiltonian `H̃ = H − μ·1` with `μ = Tr H / D`, the GEC of a
//! basis state is the drop in `Tr H̃²` when the state's node is cut out of the
//! graph, in units of the spectral width `σ² = Tr H̃² / D`:
//!
//! ```text
//! GEC(i) = (2 (H̃²)_ii − H̃_ii²) / σ²  =  (2 (A²)_ii + H̃_ii²) / σ²
//! ```
//!
//! where `A` is the off-diagonal part. Neither form needs a diagonalization.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GecError, Result};
use crate::io::fmt_float;
use crate::numerics::SymmetricMatrix;

/// Largest Hilbert-space dimension any builder will enumerate.
pub const MAX_DIM: u128 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisSpec {
    /// All `2^sites` spin configurations.
    FullSpin { sites: usize },
    /// Configurations of `particles` hard-core particles on `sites` sites.
    FixedParticles { sites: usize, particles: usize },
}

impl BasisSpec {
    pub fn dim(&self) -> u128 {
        match *self {
            BasisSpec::FullSpin { sites } => 1u128.checked_shl(sites as u32).unwrap_or(u128::MAX),
            BasisSpec::FixedParticles { sites, particles } => binomial(sites as u64, particles as u64),
        }
    }

    pub fn sites(&self) -> usize {
        match *self {
            BasisSpec::FullSpin { sites } | BasisSpec::FixedParticles { sites, .. } => sites,
        }
    }
}

pub(crate) fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Ordered list of bit configurations. Site `s` is bit `s`; a set bit is an
/// occupied site (or spin up). States are in ascending numeric order.
#[derive(Clone, Debug)]
pub struct FockBasis {
    spec: BasisSpec,
    states: Vec<u64>,
}

pub fn enumerate_basis(spec: BasisSpec) -> Result<FockBasis> {
    let sites = spec.sites();
    if sites > 63 {
        return Err(GecError::invalid("at most 63 sites fit a configuration word"));
    }
    let dim = spec.dim();
    if dim > MAX_DIM {
        return Err(GecError::Capacity {
            what: format!("{spec:?}"),
            dim,
            cap: MAX_DIM,
        });
    }
    let states = match spec {
        BasisSpec::FullSpin { sites } => (0..(1u64 << sites)).collect(),
        BasisSpec::FixedParticles { sites, particles } => {
            if particles > sites {
                return Err(GecError::invalid(format!(
                    "{particles} particles do not fit on {sites} sites"
                )));
            }
            fixed_weight_configs(sites, particles)
        }
    };
    Ok(FockBasis { spec, states })
}

/// All `sites`-bit words with `ones` set bits, ascending (Gosper's hack).
pub(crate) fn fixed_weight_configs(sites: usize, ones: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(binomial(sites as u64, ones as u64) as usize);
    if ones == 0 {
        out.push(0);
        return out;
    }
    let limit = 1u64 << sites;
    let mut c: u64 = (1u64 << ones) - 1;
    while c < limit {
        out.push(c);
        let lowest = c & c.wrapping_neg();
        let ripple = c + lowest;
        c = (((ripple ^ c) >> 2) / lowest) | ripple;
    }
    out
}

impl FockBasis {
    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn sites(&self) -> usize {
        self.spec.sites()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u64 {
        self.states[index]
    }

    pub fn index_of(&self, config: u64) -> Option<usize> {
        match self.spec {
            BasisSpec::FullSpin { sites } => ((config >> sites) == 0).then_some(config as usize),
            BasisSpec::FixedParticles { .. } => self.states.binary_search(&config).ok(),
        }
    }

    /// Site 0 first, `1` for an occupied site.
    pub fn bitstring(&self, index: usize) -> String {
        let c = self.states[index];
        (0..self.sites())
            .map(|s| if c >> s & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Clone, Debug)]
enum OffDiagonal {
    Sparse(Vec<Edge>),
    Dense(SymmetricMatrix),
}

/// A real symmetric Hamiltonian viewed as a weighted graph: diagonal entries
/// are self-loops, each nonzero off-diagonal pair `i < j` is stored once.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    dim: usize,
    diagonal: Vec<f64>,
    off: OffDiagonal,
}

impl SparseHamiltonian {
    /// Canonicalizes the entry list: orients every pair as `i < j`, sums
    /// duplicates and drops zeros. Entries with `i == j` are added to the
    /// diagonal.
    pub fn from_entries(dim: usize, diagonal: Vec<f64>, entries: Vec<Edge>) -> Result<Self> {
        if diagonal.len() != dim {
            return Err(GecError::DimensionMismatch {
                expected: dim,
                got: diagonal.len(),
            });
        }
        let mut diagonal = diagonal;
        let mut merged: HashMap<(usize, usize), f64> = HashMap::with_capacity(entries.len());
        for e in entries {
            if e.i >= dim || e.j >= dim {
                return Err(GecError::invalid(format!(
                    "edge ({}, {}) outside dimension {dim}",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                diagonal[e.i] += e.w;
                continue;
            }
            let key = (e.i.min(e.j), e.i.max(e.j));
            *merged.entry(key).or_insert(0.0) += e.w;
        }
        let mut edges: Vec<Edge> = merged
            .into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|((i, j), w)| Edge { i, j, w })
            .collect();
        edges.sort_by_key(|e| (e.i, e.j));
        Ok(Self {
            dim,
            diagonal,
            off: OffDiagonal::Sparse(edges),
        })
    }

    /// Builds from entries already known to be canonical (`i < j`, unique,
    /// nonzero). Checked in debug builds only.
    pub(crate) fn from_canonical(dim: usize, diagonal: Vec<f64>, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.i, e.j));
        debug_assert!(edges.iter().all(|e| e.i < e.j && e.j < dim && e.w != 0.0));
        debug_assert!(edges.windows(2).all(|w| (w[0].i, w[0].j) != (w[1].i, w[1].j)));
        Self {
            dim,
            diagonal,
            off: OffDiagonal::Sparse(edges),
        }
    }

    /// Dense backing, used for the complete graphs of random-matrix models.
    pub fn from_dense(m: SymmetricMatrix) -> Self {
        let dim = m.dim();
        let diagonal = (0..dim).map(|i| m.get(i, i)).collect();
        Self {
            dim,
            diagonal,
            off: OffDiagonal::Dense(m),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.off, OffDiagonal::Dense(_))
    }

    /// Visits every nonzero off-diagonal pair once, with `i < j`.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.off {
            OffDiagonal::Sparse(edges) => edges.iter().for_each(|e| f(e.i, e.j, e.w)),
            OffDiagonal::Dense(m) => {
                for i in 0..self.dim {
                    let row = m.row(i);
                    for (j, &w) in row.iter().enumerate().skip(i + 1) {
                        if w != 0.0 {
                            f(i, j, w);
                        }
                    }
                }
            }
        }
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        self.for_each_edge(|i, j, w| out.push(Edge { i, j, w }));
        out
    }

    pub fn edge_count(&self) -> usize {
        match &self.off {
            OffDiagonal::Sparse(e) => e.len(),
            OffDiagonal::Dense(_) => {
                let mut n = 0;
                self.for_each_edge(|_, _, _| n += 1);
                n
            }
        }
    }

    /// Matrix element `⟨i|H|j⟩`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        match &self.off {
            OffDiagonal::Dense(m) => m.get(i, j),
            OffDiagonal::Sparse(edges) => {
                let key = (i.min(j), i.max(j));
                edges
                    .binary_search_by_key(&key, |e| (e.i, e.j))
                    .map(|k| edges[k].w)
                    .unwrap_or(0.0)
            }
        }
    }

    /// `(A²)_ii = Σ_{j≠i} H_ij²` for every row.
    pub fn offdiag_row_sq(&self) -> Vec<f64> {
        match &self.off {
            OffDiagonal::Dense(m) => (0..self.dim)
                .map(|i| {
                    m.row(i)
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, w)| w * w)
                        .sum()
                })
                .collect(),
            OffDiagonal::Sparse(edges) => {
                let mut acc = vec![0.0; self.dim];
                for e in edges {
                    acc[e.i] += e.w * e.w;
                    acc[e.j] += e.w * e.w;
                }
                acc
            }
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal.iter().sum()
    }

    /// `H + c·1`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.diagonal.iter_mut().for_each(|d| *d += c);
        if let OffDiagonal::Dense(m) = &mut out.off {
            for i in 0..self.dim {
                m.set(i, i, m.get(i, i) + c);
            }
        }
        out
    }

    /// `s·H`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.diagonal.iter_mut().for_each(|d| *d *= s);
        match &mut out.off {
            OffDiagonal::Dense(m) => m.scale(s),
            OffDiagonal::Sparse(edges) => edges.iter_mut().for_each(|e| e.w *= s),
        }
        out
    }

    pub fn to_dense(&self) -> Result<SymmetricMatrix> {
        const DENSE_CAP: u128 = 1 << 15;
        if self.dim as u128 > DENSE_CAP {
            return Err(GecError::Capacity {
                what: "dense copy of Hamiltonian".into(),
                dim: self.dim as u128,
                cap: DENSE_CAP,
            });
        }
        if let OffDiagonal::Dense(m) = &self.off {
            return Ok(m.clone());
        }
        let mut m = SymmetricMatrix::zeros(self.dim);
        for (i, &d) in self.diagonal.iter().enumerate() {
            m.set(i, i, d);
        }
        self.for_each_edge(|i, j, w| m.set(i, j, w));
        Ok(m)
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diagonal.iter().zip(x).map(|(d, v)| d * v).collect();
        self.for_each_edge(|i, j, w| {
            y[i] += w * x[j];
            y[j] += w * x[i];
        });
        y
    }

    /// `⟨v|H|v⟩`.
    pub fn expectation(&self, v: &[f64]) -> f64 {
        let mut acc: f64 = self.diagonal.iter().zip(v).map(|(d, x)| d * x * x).sum();
        self.for_each_edge(|i, j, w| acc += 2.0 * w * v[i] * v[j]);
        acc
    }
}

/// Per-state GEC values together with the centering shift and width used.
#[derive(Clone, Debug, PartialEq)]
pub struct GecVector {
    pub values: Vec<f64>,
    /// `x_i = 2(H̃²)_ii − H̃_ii²`.
    pub numerators: Vec<f64>,
    /// `μ = Tr H / D`.
    pub shift: f64,
    /// `σ² = Tr H̃² / D`.
    pub width: f64,
}

impl GecVector {
    fn from_numerators(numerators: Vec<f64>, shift: f64, width: f64) -> Self {
        let values = numerators.iter().map(|x| x / width).collect();
        Self {
            values,
            numerators,
            shift,
            width,
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance over basis states.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }
}

fn check_width(h: &SparseHamiltonian, centered: &[f64], width: f64) -> Result<()> {
    if h.dim() < 2 {
        return Err(GecError::invalid("GEC needs at least two basis states"));
    }
    let scale = centered.iter().fold(0.0f64, |m, c| m.max(c * c));
    let mut off_scale = 0.0f64;
    h.for_each_edge(|_, _, w| off_scale = off_scale.max(w * w));
    let scale = scale.max(off_scale);
    if scale == 0.0 || width <= 1e-24 * scale {
        return Err(GecError::DegenerateSpectrum);
    }
    Ok(())
}

/// GEC from the row norms of the centered Hamiltonian:
/// `(H̃²)_ii = H̃_ii² + Σ_{j≠i} H_ij²`.
pub fn gec_exact(h: &SparseHamiltonian) -> Result<GecVector> {
    let d = h.dim();
    let mu = h.trace() / d as f64;
    let centered: Vec<f64> = h.diagonal().iter().map(|x| x - mu).collect();
    let h2_diag: Vec<f64> = h
        .offdiag_row_sq()
        .into_iter()
        .zip(&centered)
        .map(|(a2, c)| c * c + a2)
        .collect();
    let width = h2_diag.iter().sum::<f64>() / d as f64;
    check_width(h, &centered, width)?;
    let numerators = h2_diag.iter().zip(&centered).map(|(h2, c)| 2.0 * h2 - c * c).collect();
    Ok(GecVector::from_numerators(numerators, mu, width))
}

/// GEC from the off-diagonal part: `x_i = 2(A²)_ii + H̃_ii²`, with the width
/// accumulated from the self-loops and the edge list.
pub fn gec_offdiag_form(h: &SparseHamiltonian) -> Result<GecVector> {
    let d = h.dim();
    let mu = h.trace() / d as f64;
    let centered: Vec<f64> = h.diagonal().iter().map(|x| x - mu).collect();
    let mut a2 = vec![0.0; d];
    let mut edge_sq = 0.0;
    h.for_each_edge(|i, j, w| {
        a2[i] += w * w;
        a2[j] += w * w;
        edge_sq += w * w;
    });
    let loop_sq: f64 = centered.iter().map(|c| c * c).sum();
    let width = (loop_sq + 2.0 * edge_sq) / d as f64;
    check_width(h, &centered, width)?;
    let numerators = a2.iter().zip(&centered).map(|(a, c)| 2.0 * a + c * c).collect();
    Ok(GecVector::from_numerators(numerators, mu, width))
}

/// Uncentered per-state building blocks `(a_i, h_i)` with
/// `a_i = 2(H²)_ii − H_ii²` and `h_i = H_ii`. Shifting by `c` gives
/// `x_i(c) = a_i − 2c·h_i + c²`.
pub fn uncentered_numerators(h: &SparseHamiltonian) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = h
        .offdiag_row_sq()
        .into_iter()
        .zip(h.diagonal())
        .map(|(a2, d)| 2.0 * a2 + d * d)
        .collect();
    (a, h.diagonal().to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    /// `edges.csv` (`src,dst,weight`) plus `nodes.csv` (`index,bitstring,gec`).
    EdgeCsv,
    /// Graphviz-style text with a `gec` attribute per node.
    Dot,
}

impl std::str::FromStr for GraphFormat {
    type Err = GecError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge-csv" | "csv" => Ok(GraphFormat::EdgeCsv),
            "dot" | "dot-like" => Ok(GraphFormat::Dot),
            other => Err(GecError::UnknownFormat(other.to_string())),
        }
    }
}

/// Named byte streams produced by [`export_graph`].
#[derive(Clone, Debug, Default)]
pub struct GraphFiles {
    pub files: Vec<(String, Vec<u8>)>,
}

impl GraphFiles {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| std::str::from_utf8(b).expect("exports are utf-8"))
    }
}

const NORMALIZATION_NOTE: &str = "gec = (Tr H^2 - Tr (H without i)^2) / (Tr H^2 / D) on the centered Hamiltonian";

/// Writes the weighted graph with per-node GEC. Self-loops carry the centered
/// diagonal `H̃_ii` and are omitted when it is zero.
pub fn export_graph(
    h: &SparseHamiltonian,
    basis: &FockBasis,
    gec: &GecVector,
    format: GraphFormat,
) -> Result<GraphFiles> {
    let d = h.dim();
    for got in [basis.dim(), gec.values.len()] {
        if got != d {
            return Err(GecError::DimensionMismatch { expected: d, got });
        }
    }
    let loops: Vec<(usize, f64)> = h
        .diagonal()
        .iter()
        .map(|x| x - gec.shift)
        .enumerate()
        .filter(|&(_, c)| c != 0.0)
        .collect();

    let mut files = GraphFiles::default();
    match format {
        GraphFormat::EdgeCsv => {
            let mut nodes = String::from("index,bitstring,gec\n");
            for i in 0..d {
                let _ = writeln!(nodes, "{i},{},{}", basis.bitstring(i), fmt_float(gec.values[i]));
            }
            let mut edges = String::from("src,dst,weight\n");
            for &(i, c) in &loops {
                let _ = writeln!(edges, "{i},{i},{}", fmt_float(c));
            }
            h.for_each_edge(|i, j, w| {
                let _ = writeln!(edges, "{i},{j},{}", fmt_float(w));
            });
            let meta = format!(
                "normalization,{NORMALIZATION_NOTE}\ndim,{d}\nshift,{}\nwidth,{}\n",
                fmt_float(gec.shift),
                fmt_float(gec.width)
            );
            files.files.push(("nodes.csv".into(), nodes.into_bytes()));
            files.files.push(("edges.csv".into(), edges.into_bytes()));
            files.files.push(("graph_meta.csv".into(), meta.into_bytes()));
        }
        GraphFormat::Dot => {
            let mut out = String::from("graph fock {\n");
            let _ = writeln!(
                out,
                "  graph [normalization=\"{NORMALIZATION_NOTE}\", dim={d}, shift={}, width={}];",
                fmt_float(gec.shift),
                fmt_float(gec.width)
            );
            for i in 0..d {
                let _ = writeln!(
                    out,
                    "  n{i} [label=\"{}\", gec={}];",
                    basis.bitstring(i),
                    fmt_float(gec.values[i])
                );
            }
            for &(i, c) in &loops {
                let _ = writeln!(out, "  n{i} -- n{i} [weight={}];", fmt_float(c));
            }
            h.for_each_edge(|i, j, w| {
                let _ = writeln!(out, "  n{i} -- n{j} [weight={}];", fmt_float(w));
            });
            out.push_str("}\n");
            files.files.push(("graph.dot".into(), out.into_bytes()));
        }
    }
    Ok(files)
}
