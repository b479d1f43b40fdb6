//! Spectral and eigenstate diagnostics: gap ratios, bipartite entanglement,
//! diagonal matrix elements and their level-to-level fluctuations.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{GecError, Result};
use crate::fock::{FockBasis, SparseHamiltonian};
use crate::io::{fmt_float, CsvTable};
use crate::models::reflect_config;
use crate::numerics::{eigvalsh, Spectrum, SymmetricMatrix};

/// Adjacent-gap ratios of a sorted spectrum.
#[derive(Clone, Debug, Serialize)]
pub struct GapRatioResult {
    pub spacings: Vec<f64>,
    /// `r_n = min(s_n, s_{n+1}) / max(s_n, s_{n+1})`, length `D − 2`.
    pub ratios: Vec<f64>,
    /// Central fraction of the ratio list entering `mean`.
    pub window_fraction: f64,
    pub mean: f64,
    /// Ratios in the window, i.e. the weight of `mean` when pooling.
    pub window_count: usize,
    /// Pairs of zero spacings, assigned `r = 1`.
    pub degenerate: usize,
}

fn central_range(n: usize, fraction: f64) -> Result<(usize, usize)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(GecError::invalid(format!("window fraction {fraction} outside (0, 1]")));
    }
    let lo = ((1.0 - fraction) / 2.0 * n as f64).floor() as usize;
    let hi = n - lo;
    if hi <= lo {
        return Err(GecError::EmptyInput("spectral window"));
    }
    Ok((lo, hi))
}

pub fn gap_ratios(evals: &[f64], window_fraction: f64) -> Result<GapRatioResult> {
    if evals.len() < 3 {
        return Err(GecError::EmptyInput("gap ratios need at least 3 levels"));
    }
    if let Some(k) = evals.windows(2).position(|w| w[1] < w[0]) {
        return Err(GecError::Unsorted(k + 1));
    }
    let spacings: Vec<f64> = evals.windows(2).map(|w| w[1] - w[0]).collect();
    let mut degenerate = 0;
    let ratios: Vec<f64> = spacings
        .windows(2)
        .map(|s| {
            let (a, b) = (s[0].min(s[1]), s[0].max(s[1]));
            if b == 0.0 {
                degenerate += 1;
                1.0
            } else {
                a / b
            }
        })
        .collect();
    let (lo, hi) = central_range(ratios.len(), window_fraction)?;
    let mean = ratios[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    Ok(GapRatioResult {
        spacings,
        ratios,
        window_fraction,
        mean,
        window_count: hi - lo,
        degenerate,
    })
}

/// Mean over several independent spectra (symmetry sectors, realizations),
/// weighted by the number of ratios each contributes.
pub fn pooled_gap_ratio(parts: &[GapRatioResult]) -> Result<f64> {
    let n: usize = parts.iter().map(|p| p.window_count).sum();
    if n == 0 {
        return Err(GecError::EmptyInput("no gap ratios to pool"));
    }
    Ok(parts.iter().map(|p| p.mean * p.window_count as f64).sum::<f64>() / n as f64)
}

/// `(L/2) ln 2 − 1/2`.
pub fn page_value(sites: usize) -> Result<f64> {
    if !sites.is_multiple_of(2) {
        return Err(GecError::invalid(format!("Page value needs even L, got {sites}")));
    }
    Ok(sites as f64 / 2.0 * std::f64::consts::LN_2 - 0.5)
}

/// The first `L/2` sites. In the chain labelling used by the lattice gas
/// (legs alternate between even and odd sites) this is the zig-zag cut.
pub fn half_cut(sites: usize) -> Vec<usize> {
    (0..sites / 2).collect()
}

/// Von Neumann entropy of the reduced state on `cut`.
pub fn entanglement_entropy(state: &[f64], basis: &FockBasis, cut: &[usize]) -> Result<f64> {
    if state.len() != basis.dim() {
        return Err(GecError::DimensionMismatch {
            expected: basis.dim(),
            got: state.len(),
        });
    }
    let norm = state.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(GecError::NotNormalized(norm));
    }
    let mut mask_a = 0u64;
    for &s in cut {
        if s >= basis.sites() {
            return Err(GecError::invalid(format!(
                "cut site {s} outside {} sites",
                basis.sites()
            )));
        }
        mask_a |= 1 << s;
    }

    // Only (A, B) configuration pairs realized in the basis are indexed.
    let mut rows: HashMap<u64, usize> = HashMap::new();
    let mut cols: HashMap<u64, usize> = HashMap::new();
    let mut entries = Vec::with_capacity(state.len());
    for (k, &c) in basis.states().iter().enumerate() {
        let next = rows.len();
        let a = *rows.entry(c & mask_a).or_insert(next);
        let next = cols.len();
        let b = *cols.entry(c & !mask_a).or_insert(next);
        entries.push((a, b, state[k]));
    }
    let (da, db) = (rows.len(), cols.len());
    let mut m = vec![0.0; da * db];
    for &(a, b, x) in &entries {
        m[a * db + b] = x;
    }
    // Reduced density matrix on the smaller side.
    let rho = if da <= db {
        SymmetricMatrix::from_lower_fn(da, |i, j| (0..db).map(|k| m[i * db + k] * m[j * db + k]).sum())
    } else {
        SymmetricMatrix::from_lower_fn(db, |i, j| (0..da).map(|k| m[k * db + i] * m[k * db + j]).sum())
    };
    let s = eigvalsh(&rho)?
        .into_iter()
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .sum::<f64>();
    Ok(s.max(0.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct EntanglementResult {
    pub energies: Vec<f64>,
    pub entropies: Vec<f64>,
    pub cut: Vec<usize>,
    pub page: f64,
}

/// Entropy of every eigenstate of `spectrum` across the half cut.
pub fn eigenstate_entanglement(spectrum: &Spectrum, basis: &FockBasis) -> Result<EntanglementResult> {
    let cut = half_cut(basis.sites());
    let page = page_value(basis.sites())?;
    let entropies = (0..spectrum.dim())
        .map(|n| entanglement_entropy(spectrum.vector(n), basis, &cut))
        .collect::<Result<_>>()?;
    Ok(EntanglementResult {
        energies: spectrum.eigenvalues.clone(),
        entropies,
        cut,
        page,
    })
}

/// `O_nn = ⟨E_n|O|E_n⟩` in eigenvalue order.
pub fn eth_diagonals(spectrum: &Spectrum, observable: &SparseHamiltonian) -> Result<Vec<f64>> {
    if spectrum.dim() != observable.dim() {
        return Err(GecError::DimensionMismatch {
            expected: spectrum.dim(),
            got: observable.dim(),
        });
    }
    Ok((0..spectrum.dim())
        .map(|n| observable.expectation(spectrum.vector(n)))
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct EthFluctuations {
    /// `z_n = |O_{n+1} − O_n|`.
    pub z: Vec<f64>,
    pub window: (usize, usize),
    pub z_av: f64,
    pub z_max: f64,
}

/// Level-to-level fluctuations averaged over the central `window_fraction`
/// of the spectrum (`z_n` with `n` in the window and `n + 1 < D`).
pub fn eth_fluctuations(diagonals: &[f64], window_fraction: f64) -> Result<EthFluctuations> {
    if diagonals.len() < 4 {
        return Err(GecError::EmptyInput("fluctuations need at least 4 levels"));
    }
    let z: Vec<f64> = diagonals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let (lo, hi) = central_range(diagonals.len(), window_fraction)?;
    let hi = hi.min(z.len());
    if hi <= lo {
        return Err(GecError::EmptyInput("fluctuation window"));
    }
    let win = &z[lo..hi];
    Ok(EthFluctuations {
        window: (lo, hi),
        z_av: win.iter().sum::<f64>() / win.len() as f64,
        z_max: win.iter().copied().fold(0.0, f64::max),
        z,
    })
}

/// Even and odd blocks of `h` under the site reflection `i → L − 1 − i`.
/// Fails if `h` is not reflection symmetric.
pub fn reflection_blocks(h: &SparseHamiltonian, basis: &FockBasis) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
    let d = basis.dim();
    if h.dim() != d {
        return Err(GecError::DimensionMismatch {
            expected: d,
            got: h.dim(),
        });
    }
    let l = basis.sites();
    let perm: Vec<usize> = basis
        .states()
        .iter()
        .map(|&c| {
            basis
                .index_of(reflect_config(c, l))
                .expect("reflection preserves the basis")
        })
        .collect();

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    h.for_each_edge(|i, j, w| {
        adj[i].push((j, w));
        adj[j].push((i, w));
    });
    let diag = h.diagonal();
    let tol = 1e-12 * h.diagonal().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for i in 0..d {
        if (diag[perm[i]] - diag[i]).abs() > tol
            || adj[i].iter().any(|&(j, w)| (h.get(perm[i], perm[j]) - w).abs() > tol)
        {
            return Err(GecError::invalid("operator is not reflection symmetric"));
        }
    }

    // Symmetric-sector coordinates: each full index k maps to (block index, coefficient).
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut even_of = vec![(0usize, 0.0f64); d];
    let mut odd_of: Vec<Option<(usize, f64)>> = vec![None; d];
    let (mut ne, mut no) = (0, 0);
    let mut even_members = Vec::new();
    let mut odd_members = Vec::new();
    for i in 0..d {
        let p = perm[i];
        if p < i {
            continue;
        }
        if p == i {
            even_of[i] = (ne, 1.0);
            even_members.push(vec![(i, 1.0)]);
        } else {
            even_of[i] = (ne, r);
            even_of[p] = (ne, r);
            odd_of[i] = Some((no, r));
            odd_of[p] = Some((no, -r));
            even_members.push(vec![(i, r), (p, r)]);
            odd_members.push(vec![(i, r), (p, -r)]);
            no += 1;
        }
        ne += 1;
    }

    let apply = |members: &[(usize, f64)], out: &mut HashMap<usize, f64>| {
        out.clear();
        for &(k, c) in members {
            *out.entry(k).or_insert(0.0) += c * diag[k];
            for &(j, w) in &adj[k] {
                *out.entry(j).or_insert(0.0) += c * w;
            }
        }
    };
    let mut scratch = HashMap::new();
    let mut even = SymmetricMatrix::zeros(ne);
    for (b, members) in even_members.iter().enumerate() {
        apply(members, &mut scratch);
        let mut col = vec![0.0; ne];
        for (&k, &x) in &scratch {
            let (a, c) = even_of[k];
            col[a] += c * x;
        }
        for (a, &x) in col.iter().enumerate().take(b + 1) {
            even.set(a, b, x);
        }
    }
    let mut odd = SymmetricMatrix::zeros(no);
    for (b, members) in odd_members.iter().enumerate() {
        apply(members, &mut scratch);
        let mut col = vec![0.0; no];
        for (&k, &x) in &scratch {
            if let Some((a, c)) = odd_of[k] {
                col[a] += c * x;
            }
        }
        for (a, &x) in col.iter().enumerate().take(b + 1) {
            odd.set(a, b, x);
        }
    }
    Ok((even, odd))
}

/// Gap-ratio mean pooled over the reflection sectors of `h`.
pub fn sector_gap_ratio(h: &SparseHamiltonian, basis: &FockBasis, window_fraction: f64) -> Result<f64> {
    let (even, odd) = reflection_blocks(h, basis)?;
    let mut parts = Vec::new();
    for block in [even, odd] {
        if block.dim() >= 3 {
            parts.push(gap_ratios(&eigvalsh(&block)?, window_fraction)?);
        }
    }
    pooled_gap_ratio(&parts)
}

pub fn eth_csv(energies: &[f64], diagonals: &[f64]) -> String {
    let mut t = CsvTable::new(&["energy", "o_nn"]);
    for (e, o) in energies.iter().zip(diagonals) {
        t.push(&[fmt_float(*e), fmt_float(*o)]);
    }
    t.into_string()
}

pub fn entanglement_csv(r: &EntanglementResult) -> String {
    let mut t = CsvTable::new(&["energy", "s_ee", "s_ee_over_page"]);
    for (e, s) in r.energies.iter().zip(&r.entropies) {
        t.push(&[fmt_float(*e), fmt_float(*s), fmt_float(s / r.page)]);
    }
    t.into_string()
}

/// Rows of `(D, z_av, z_max)`.
pub fn fluctuation_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut t = CsvTable::new(&["dim", "z_av", "z_max"]);
    for &(d, av, mx) in rows {
        t.push(&[d.to_string(), fmt_float(av), fmt_float(mx)]);
    }
    t.into_string()
}

/// Rows of `(V, mean r)`.
pub fn gap_ratio_csv(rows: &[(f64, f64)]) -> String {
    let mut t = CsvTable::new(&["v", "mean_r"]);
    for &(v, r) in rows {
        t.push(&[fmt_float(v), fmt_float(r)]);
    }
    t.into_string()
}
