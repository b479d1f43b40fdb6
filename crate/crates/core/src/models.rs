//! Hamiltonian builders: Rosenzweig–Porter random matrices, the quantum sun
//! model and the triangular lattice gas.

use serde::{Deserialize, Serialize};

use crate::error::{GecError, Result};
use crate::fock::{enumerate_basis, BasisSpec, Edge, FockBasis, SparseHamiltonian, MAX_DIM};
use crate::numerics::{sample_goe, RngStream, SymmetricMatrix};

/// Largest dimension built with a dense backing.
pub const DENSE_CAP: usize = 1 << 13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpmParams {
    pub dim: usize,
    pub gamma: f64,
}

impl RpmParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(GecError::invalid("RPM dimension must be at least 2"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(GecError::invalid(format!("RPM gamma must be >= 0, got {}", self.gamma)));
        }
        if self.dim > DENSE_CAP {
            return Err(GecError::Capacity {
                what: "dense RPM matrix".into(),
                dim: self.dim as u128,
                cap: DENSE_CAP as u128,
            });
        }
        Ok(())
    }
}

/// Second and fourth moments of the diagonal disorder distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsMoments {
    pub m2: f64,
    pub m4: f64,
}

impl EpsMoments {
    pub const STANDARD_NORMAL: EpsMoments = EpsMoments { m2: 1.0, m4: 3.0 };

    pub fn new(m2: f64, m4: f64) -> Result<Self> {
        if !(m2 > 0.0) || !(m4 >= m2 * m2) {
            return Err(GecError::invalid(format!(
                "need m2 > 0 and m4 >= m2^2, got m2={m2}, m4={m4}"
            )));
        }
        Ok(Self { m2, m4 })
    }
}

impl Default for EpsMoments {
    fn default() -> Self {
        Self::STANDARD_NORMAL
    }
}

/// `H = H₀ + D^{−γ/2} M` with `H₀` standard-normal diagonal and `M` from the
/// GOE. The diagonal is drawn first, then `M`.
pub fn rpm_sample(p: &RpmParams, rng: &mut RngStream) -> Result<SparseHamiltonian> {
    p.validate()?;
    let d = p.dim;
    let h0: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let mut m = sample_goe(d, rng);
    m.scale((-0.5 * p.gamma * (d as f64).ln()).exp());
    for (i, e) in h0.into_iter().enumerate() {
        m.set(i, i, m.get(i, i) + e);
    }
    Ok(SparseHamiltonian::from_dense(m))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QsmParams {
    /// Spins in the ergodic grain.
    pub grain: usize,
    /// Spins outside the grain.
    pub outer: usize,
    pub alpha: f64,
    pub g0: f64,
    /// Center of the random field distribution.
    pub h: f64,
    /// Half-width of the random field distribution.
    pub w: f64,
    /// Half-width of the jitter on the coupling distances.
    pub zeta: f64,
}

impl Default for QsmParams {
    fn default() -> Self {
        Self {
            grain: 3,
            outer: 8,
            alpha: 0.75,
            g0: 1.0,
            h: 1.0,
            w: 0.5,
            zeta: 0.2,
        }
    }
}

impl QsmParams {
    pub fn validate(&self) -> Result<()> {
        if self.grain == 0 {
            return Err(GecError::invalid("QSM grain needs at least one spin"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(GecError::invalid(format!("QSM alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.zeta >= 0.0) || !(self.w >= 0.0) {
            return Err(GecError::invalid("QSM zeta and W must be non-negative"));
        }
        if self.grain > 20 {
            return Err(GecError::Capacity {
                what: "QSM grain matrix".into(),
                dim: 1u128 << self.grain,
                cap: 1 << 20,
            });
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.grain + self.outer
    }
}

/// Disorder record of one QSM draw. Outer spin `ℓ` (0-based) couples to grain
/// spin `attach[ℓ]` with strength `g0·alpha^u[ℓ]`.
#[derive(Clone, Debug)]
pub struct QsmRealization {
    pub u: Vec<f64>,
    pub fields: Vec<f64>,
    pub attach: Vec<usize>,
    /// `R = M / sqrt(2^N + 1)` on the grain.
    pub grain: SymmetricMatrix,
}

impl QsmRealization {
    pub fn coupling(&self, p: &QsmParams, l: usize) -> f64 {
        p.g0 * (self.u[l] * p.alpha.ln()).exp()
    }
}

/// Draws the disorder without building the Hamiltonian: grain matrix first,
/// then per outer spin its distance jitter, field and attachment.
pub fn qsm_realization(p: &QsmParams, rng: &mut RngStream) -> Result<QsmRealization> {
    p.validate()?;
    let gd = 1usize << p.grain;
    let mut grain = sample_goe(gd, rng);
    grain.scale(1.0 / ((gd + 1) as f64).sqrt());
    let mut u = Vec::with_capacity(p.outer);
    let mut fields = Vec::with_capacity(p.outer);
    let mut attach = Vec::with_capacity(p.outer);
    for l in 0..p.outer {
        u.push(if l == 0 {
            0.0
        } else {
            rng.uniform(l as f64 - p.zeta, l as f64 + p.zeta)
        });
        fields.push(rng.uniform(p.h - p.w, p.h + p.w));
        attach.push(rng.index(p.grain));
    }
    Ok(QsmRealization {
        u,
        fields,
        attach,
        grain,
    })
}

/// Full-spin basis over grain then outer sites: bits `0..N` hold the grain,
/// bit `N + ℓ` holds outer spin `ℓ`. A set bit is spin up (`S^z = +1/2`).
pub fn qsm_build(p: &QsmParams, r: &QsmRealization) -> Result<SparseHamiltonian> {
    p.validate()?;
    let n = p.grain;
    let basis = enumerate_basis(BasisSpec::FullSpin { sites: p.sites() })?;
    let dim = basis.dim();
    let gd = 1usize << n;
    let gmask = gd - 1;

    let mut diagonal = vec![0.0; dim];
    let mut edges = Vec::new();
    let couplings: Vec<f64> = (0..p.outer).map(|l| r.coupling(p, l) / 4.0).collect();
    for (c, d) in diagonal.iter_mut().enumerate() {
        let g = c & gmask;
        let outer = c >> n;
        *d = r.grain.get(g, g)
            + (0..p.outer)
                .map(|l| if outer >> l & 1 == 1 { 0.5 } else { -0.5 } * r.fields[l])
                .sum::<f64>();
        let row = r.grain.row(g);
        for (g2, &w) in row.iter().enumerate().skip(g + 1) {
            if w != 0.0 {
                edges.push(Edge {
                    i: c,
                    j: (c & !gmask) | g2,
                    w,
                });
            }
        }
        for (l, &w) in couplings.iter().enumerate() {
            let partner = c ^ (1 << r.attach[l]) ^ (1 << (n + l));
            if partner > c && w != 0.0 {
                edges.push(Edge { i: c, j: partner, w });
            }
        }
    }
    Ok(SparseHamiltonian::from_canonical(dim, diagonal, edges))
}

pub fn qsm_sample(p: &QsmParams, rng: &mut RngStream) -> Result<(SparseHamiltonian, QsmRealization)> {
    let dim = 1u128 << p.sites().min(127);
    if dim > MAX_DIM {
        return Err(GecError::Capacity {
            what: format!("QSM with {} spins", p.sites()),
            dim,
            cap: MAX_DIM,
        });
    }
    let r = qsm_realization(p, rng)?;
    Ok((qsm_build(p, &r)?, r))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlgParams {
    pub sites: usize,
    pub particles: usize,
    /// Interaction strength in units of `t0`.
    pub v: f64,
    #[serde(default = "unit_hopping")]
    pub t0: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

fn unit_hopping() -> f64 {
    1.0
}

impl TlgParams {
    pub fn half_filled(sites: usize, v: f64) -> Self {
        Self {
            sites,
            particles: sites / 2,
            v,
            t0: 1.0,
            boundary: Boundary::Periodic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles > self.sites {
            return Err(GecError::invalid(format!(
                "{} particles on {} sites",
                self.particles, self.sites
            )));
        }
        if self.sites > 63 {
            return Err(GecError::invalid("at most 63 sites fit a configuration word"));
        }
        check_lattice(self.sites, self.boundary)
    }
}

fn check_lattice(sites: usize, bc: Boundary) -> Result<()> {
    match bc {
        Boundary::Periodic if sites < 6 || sites % 2 == 1 => Err(GecError::invalid(format!(
            "periodic ladder needs an even number of sites >= 6, got {sites}"
        ))),
        Boundary::Open if sites < 3 => Err(GecError::invalid(format!(
            "open ladder needs at least 3 sites, got {sites}"
        ))),
        _ => Ok(()),
    }
}

/// A hopping bond and the sites whose joint occupation blocks it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub common: Vec<usize>,
}

impl Bond {
    /// Bitmask of the common neighborhood.
    pub fn common_mask(&self) -> u64 {
        self.common.iter().fold(0, |m, &c| m | 1 << c)
    }

    /// `C (n_a + n_b − 2 n_a n_b)` on a configuration word.
    pub fn active(&self, config: u64) -> bool {
        let cm = self.common_mask();
        (config >> self.a & 1) != (config >> self.b & 1) && config & cm != cm
    }
}

/// Bonds of the triangular ladder in zig-zag order: site `i` touches `i ± 1`
/// (rungs and diagonals) and `i ± 2` (legs). The pair `(i, i+1)` is blocked by
/// `{i−1, i+2}` and the pair `(i, i+2)` by `{i+1}`; open chains drop
/// neighbors that fall off the ends.
pub fn tlg_bonds(sites: usize, bc: Boundary) -> Result<Vec<Bond>> {
    check_lattice(sites, bc)?;
    let l = sites as isize;
    let wrap = |x: isize| -> Option<usize> {
        match bc {
            Boundary::Periodic => Some(x.rem_euclid(l) as usize),
            Boundary::Open => (0..l).contains(&x).then_some(x as usize),
        }
    };
    let mut bonds = Vec::with_capacity(2 * sites);
    for i in 0..l {
        for (step, blockers) in [(1isize, &[-1isize, 2][..]), (2, &[1][..])] {
            let Some(b) = wrap(i + step) else { continue };
            let mut common: Vec<usize> = blockers.iter().filter_map(|&o| wrap(i + o)).collect();
            common.sort_unstable();
            bonds.push(Bond {
                a: i as usize,
                b,
                common,
            });
        }
    }
    Ok(bonds)
}

/// Integer diagonal `(H_d)_ii`: number of active bonds of a configuration.
pub fn hd_value(bonds: &[Bond], config: u64) -> u32 {
    bonds.iter().filter(|b| b.active(config)).count() as u32
}

/// `H = −t0 A + V H_d` on the fixed-particle sector, where `A` hops a particle
/// across an active bond and `H_d` counts active bonds.
pub fn tlg_build(p: &TlgParams) -> Result<(SparseHamiltonian, FockBasis)> {
    p.validate()?;
    let basis = enumerate_basis(BasisSpec::FixedParticles {
        sites: p.sites,
        particles: p.particles,
    })?;
    let bonds = tlg_bonds(p.sites, p.boundary)?;
    let masks: Vec<(u64, u64)> = bonds
        .iter()
        .map(|b| ((1u64 << b.a) | (1u64 << b.b), b.common_mask()))
        .collect();
    let dim = basis.dim();
    let mut diagonal = vec![0.0; dim];
    let mut edges = Vec::new();
    for (i, &c) in basis.states().iter().enumerate() {
        let mut active = 0u32;
        for &(pair, cm) in &masks {
            let occ = c & pair;
            if occ == 0 || occ == pair || c & cm == cm {
                continue;
            }
            active += 1;
            let target = c ^ pair;
            if target > c && p.t0 != 0.0 {
                let j = basis.index_of(target).expect("hops conserve particle number");
                edges.push(Edge { i, j, w: -p.t0 });
            }
        }
        diagonal[i] = p.v * active as f64;
    }
    let h = SparseHamiltonian::from_canonical(dim, diagonal, edges);
    Ok((h, basis))
}

/// Site relabeling `i → L − 1 − i`, a symmetry of both boundary conditions.
pub fn reflect_config(config: u64, sites: usize) -> u64 {
    config.reverse_bits() >> (64 - sites)
}

/// Occupation of `site` in every basis state, as a diagonal operator.
pub fn occupation_operator(basis: &FockBasis, site: usize) -> SparseHamiltonian {
    let diagonal = basis.states().iter().map(|&c| (c >> site & 1) as f64).collect();
    SparseHamiltonian::from_canonical(basis.dim(), diagonal, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::gec_exact;

    #[test]
    fn rpm_large_gamma_is_diagonal_dominated() {
        let mut rng = RngStream::new(1, 0);
        let h = rpm_sample(&RpmParams { dim: 4, gamma: 50.0 }, &mut rng).unwrap();
        let mut rng = RngStream::new(1, 0);
        let _: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let m = sample_goe(4, &mut rng);
        let bound = 4f64.powi(-25) * m.max_abs();
        h.for_each_edge(|_, _, w| assert!(w.abs() <= bound * (1.0 + 1e-12)));
    }

    #[test]
    fn rpm_entry_variances_at_gamma_zero() {
        let d = 256;
        let p = RpmParams { dim: d, gamma: 0.0 };
        let (mut diag2, mut off2, mut nd, mut no) = (0.0, 0.0, 0usize, 0usize);
        for r in 0..20 {
            let h = rpm_sample(&p, &mut RngStream::new(5, r)).unwrap();
            diag2 += h.diagonal().iter().map(|x| x * x).sum::<f64>();
            nd += d;
            h.for_each_edge(|_, _, w| {
                off2 += w * w;
                no += 1;
            });
        }
        assert!((off2 / no as f64 - 1.0).abs() < 0.02);
        assert!((diag2 / nd as f64 - 3.0).abs() < 0.15);
    }

    #[test]
    fn eps_moments_checked() {
        assert!(EpsMoments::new(1.0, 0.5).is_err());
        assert!(EpsMoments::new(0.0, 1.0).is_err());
        assert_eq!(EpsMoments::default(), EpsMoments::new(1.0, 3.0).unwrap());
    }

    #[test]
    fn qsm_without_outer_spins_is_the_grain() {
        let p = QsmParams {
            outer: 0,
            ..QsmParams::default()
        };
        let (h, r) = qsm_sample(&p, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(h.to_dense().unwrap(), r.grain);
    }

    #[test]
    fn qsm_diagonal_and_couplings_match_record() {
        let p = QsmParams {
            grain: 2,
            outer: 4,
            ..QsmParams::default()
        };
        let (h, r) = qsm_sample(&p, &mut RngStream::new(9, 2)).unwrap();
        assert_eq!(r.u[0], 0.0);
        for (l, &u) in r.u.iter().enumerate().skip(1) {
            assert!((u - l as f64).abs() <= p.zeta);
        }
        for c in 0..h.dim() {
            let g = c & 3;
            let expect: f64 = (0..4)
                .map(|l| if c >> (2 + l) & 1 == 1 { 0.5 } else { -0.5 } * r.fields[l])
                .sum();
            assert!((h.diagonal()[c] - r.grain.get(g, g) - expect).abs() < 1e-12);
            for l in 0..4 {
                let partner = c ^ (1 << r.attach[l]) ^ (1 << (2 + l));
                let w = p.g0 * p.alpha.powf(r.u[l]) / 4.0;
                assert!((h.get(c, partner) - w).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn periodic_bond_counts() {
        let bonds = tlg_bonds(8, Boundary::Periodic).unwrap();
        assert_eq!(bonds.len(), 16);
        assert_eq!(bonds.iter().filter(|b| b.common.len() == 2).count(), 8);
        assert_eq!(bonds.iter().filter(|b| b.common.len() == 1).count(), 8);
        let find = |a, b| bonds.iter().find(|x| x.a == a && x.b == b).unwrap().common.clone();
        assert_eq!(find(3, 4), vec![2, 5]);
        assert_eq!(find(3, 5), vec![4]);
        assert_eq!(find(7, 0), vec![1, 6]);
        assert!(tlg_bonds(4, Boundary::Periodic).is_err());
        assert!(tlg_bonds(9, Boundary::Periodic).is_err());
    }

    #[test]
    fn open_bonds_are_truncated() {
        let bonds = tlg_bonds(5, Boundary::Open).unwrap();
        assert_eq!(bonds.len(), 4 + 3);
        assert_eq!(
            bonds[0],
            Bond {
                a: 0,
                b: 1,
                common: vec![2]
            }
        );
        assert!(bonds.iter().all(|b| !b.common.is_empty() && b.common.len() <= 2));
    }

    #[test]
    fn bond_semantics() {
        let b = Bond {
            a: 0,
            b: 1,
            common: vec![2],
        };
        assert!(!b.active(0b111));
        assert!(!b.active(0b101));
        assert!(b.active(0b001));
    }

    #[test]
    fn tlg_empty_and_full_are_zero() {
        for n in [0, 8] {
            let (h, _) = tlg_build(&TlgParams {
                particles: n,
                ..TlgParams::half_filled(8, 3.0)
            })
            .unwrap();
            assert!(h.diagonal().iter().all(|&d| d == 0.0));
            assert_eq!(h.edge_count(), 0);
        }
    }

    #[test]
    fn tlg_single_particle() {
        for l in [6, 8, 10] {
            let (h, _) = tlg_build(&TlgParams {
                particles: 1,
                ..TlgParams::half_filled(l, 2.5)
            })
            .unwrap();
            assert!(h.diagonal().iter().all(|&d| d == 10.0));
            let deg = h.offdiag_row_sq();
            assert!(deg.iter().all(|&x| x == 4.0));
        }
    }

    #[test]
    fn tlg_hopping_square_equals_interaction_count() {
        for bc in [Boundary::Periodic, Boundary::Open] {
            for (l, n) in [(8, 4), (10, 5), (12, 9)] {
                let p = TlgParams {
                    boundary: bc,
                    ..TlgParams {
                        particles: n,
                        ..TlgParams::half_filled(l, 1.0)
                    }
                };
                let (h, _) = tlg_build(&p).unwrap();
                for (a2, d) in h.offdiag_row_sq().iter().zip(h.diagonal()) {
                    assert_eq!(a2, d);
                }
            }
        }
    }

    #[test]
    fn tlg_fig1_instance() {
        let p = TlgParams {
            sites: 11,
            particles: 5,
            v: 3.0,
            t0: 1.0,
            boundary: Boundary::Open,
        };
        let (h, b) = tlg_build(&p).unwrap();
        assert_eq!(b.dim(), 462);
        let g = gec_exact(&h).unwrap();
        assert!(g.values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn reflection_is_a_symmetry() {
        for bc in [Boundary::Periodic, Boundary::Open] {
            let bonds = tlg_bonds(10, bc).unwrap();
            for c in 0..1u64 << 10 {
                assert_eq!(hd_value(&bonds, c), hd_value(&bonds, reflect_config(c, 10)));
            }
        }
        assert_eq!(reflect_config(0b0011, 4), 0b1100);
    }
}
