//! Exact moments `E[(H_d)^k]`, `k ≤ 4`, of the interaction-count operator of
//! the triangular lattice gas, and the GEC mean and variance that follow from
//! them without diagonalization.
//!
//! Three independent routes compute the same rationals: [`moment_set`] (a
//! linear-time transfer sweep, usable for hundreds of sites),
//! [`oracle::hd_moments_expand`] (explicit polynomial powers) and
//! [`oracle::hd_moments_oracle`] (enumeration of configurations).

pub mod engine;
pub mod oracle;
pub mod poly;

use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::analytic::{crossing_point, extrapolate_crossing, CrossingPoint, Curve, Extrapolation};
use crate::error::{GecError, Result};
use crate::io::fmt_float;
use crate::models::{tlg_bonds, Bond, Boundary};

pub use engine::{cover_profile, CoverProfile, MAX_ORDER};
pub use poly::{bond_polynomial, hd_polynomial, poly_mul, trace_monomial, DensityMonomial, DensityPolynomial};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Uniform over configurations with exactly `N` particles.
    #[default]
    Canonical,
    /// Independent sites at filling `N/L`.
    GrandCanonical,
}

impl Ensemble {
    pub fn label(&self) -> &'static str {
        match self {
            Ensemble::Canonical => "canonical",
            Ensemble::GrandCanonical => "grand-canonical",
        }
    }
}

/// `w_p`: probability that `p` given distinct sites are all occupied.
#[derive(Clone, Debug)]
pub(crate) struct TraceWeights(Vec<BigRational>);

impl TraceWeights {
    pub(crate) fn new(sites: usize, particles: usize, ensemble: Ensemble, max_p: usize) -> Result<Self> {
        if particles > sites {
            return Err(GecError::invalid(format!("{particles} particles on {sites} sites")));
        }
        if max_p > sites {
            return Err(GecError::invalid(format!(
                "{max_p} distinct sites on a chain of {sites}"
            )));
        }
        let mut w = Vec::with_capacity(max_p + 1);
        let mut acc = BigRational::from_integer(1.into());
        w.push(acc.clone());
        for i in 0..max_p {
            acc *= match ensemble {
                Ensemble::Canonical => {
                    BigRational::new(BigInt::from(particles as i64 - i as i64), BigInt::from(sites - i))
                }
                Ensemble::GrandCanonical => BigRational::new(particles.into(), sites.into()),
            };
            w.push(acc.clone());
        }
        Ok(Self(w))
    }

    pub(crate) fn get(&self, p: usize) -> &BigRational {
        &self.0[p]
    }
}

/// `S(k, j)·j!`: `h^k = Σ_j S(k, j) j! · C(h, j)`.
const SURJECTIONS: [[i64; MAX_ORDER + 1]; MAX_ORDER + 1] = [
    [1, 0, 0, 0, 0],
    [0, 1, 0, 0, 0],
    [0, 1, 2, 0, 0],
    [0, 1, 6, 6, 0],
    [0, 1, 14, 36, 24],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub sites: usize,
    pub particles: usize,
    pub ensemble: Ensemble,
    pub boundary: Boundary,
    /// `E[(H_d)^k]` for `k = 1..=4` (index `k − 1`).
    #[serde(with = "rational_vec")]
    pub moments: Vec<BigRational>,
}

impl MomentSet {
    pub fn get(&self, k: usize) -> &BigRational {
        &self.moments[k - 1]
    }

    pub fn to_f64(&self) -> [f64; 4] {
        std::array::from_fn(|k| self.moments[k].to_f64().unwrap_or(f64::NAN))
    }
}

mod rational_vec {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|r| r.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<BigRational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Combines cover counts with the ensemble's site-occupation weights.
pub fn moments_from_profile(
    profile: &CoverProfile,
    sites: usize,
    particles: usize,
    ensemble: Ensemble,
) -> Result<Vec<BigRational>> {
    let max_p = profile.counts[0].len() - 1;
    let w = TraceWeights::new(sites, particles, ensemble, max_p.min(sites))?;
    let subset_avg: Vec<BigRational> = (0..=MAX_ORDER)
        .map(|j| {
            profile.counts[j]
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c != 0)
                .map(|(p, &c)| w.get(p) * BigRational::from_integer(c.into()))
                .sum()
        })
        .collect();
    Ok((1..=MAX_ORDER)
        .map(|k| {
            (1..=k)
                .map(|j| &subset_avg[j] * BigRational::from_integer(SURJECTIONS[k][j].into()))
                .sum()
        })
        .collect())
}

/// Moments for an arbitrary bond list (each bond within four consecutive
/// sites). Fails with [`GecError::BudgetExceeded`] past `deadline`.
pub fn moment_set_for_bonds(
    bonds: &[Bond],
    sites: usize,
    particles: usize,
    ensemble: Ensemble,
    boundary: Boundary,
    deadline: Option<Instant>,
) -> Result<MomentSet> {
    let profile = cover_profile(bonds, sites, boundary, deadline)?;
    Ok(MomentSet {
        sites,
        particles,
        ensemble,
        boundary,
        moments: moments_from_profile(&profile, sites, particles, ensemble)?,
    })
}

/// Moments of the periodic ladder.
pub fn moment_set(sites: usize, particles: usize, ensemble: Ensemble) -> Result<MomentSet> {
    let bonds = tlg_bonds(sites, Boundary::Periodic)?;
    moment_set_for_bonds(&bonds, sites, particles, ensemble, Boundary::Periodic, None)
}

pub fn hd_moment(k: usize, sites: usize, particles: usize, ensemble: Ensemble) -> Result<BigRational> {
    if !(1..=MAX_ORDER).contains(&k) {
        return Err(GecError::invalid(format!("moment order {k} outside 1..=4")));
    }
    Ok(moment_set(sites, particles, ensemble)?.moments.swap_remove(k - 1))
}

/// Relabels every site by `i → i + shift (mod L)`.
pub fn rotate_bonds(bonds: &[Bond], sites: usize, shift: usize) -> Vec<Bond> {
    let r = |s: usize| (s + shift) % sites;
    bonds
        .iter()
        .rev()
        .map(|b| Bond {
            a: r(b.a),
            b: r(b.b),
            common: {
                let mut c: Vec<usize> = b.common.iter().map(|&s| r(s)).collect();
                c.sort_unstable();
                c
            },
        })
        .collect()
}

/// Exact GEC mean and variance over the basis states of one sector.
#[derive(Clone, Debug, PartialEq)]
pub struct TlgGecMoments {
    pub mean: BigRational,
    pub variance: BigRational,
}

impl TlgGecMoments {
    pub fn to_f64(&self) -> (f64, f64) {
        (
            self.mean.to_f64().unwrap_or(f64::NAN),
            self.variance.to_f64().unwrap_or(f64::NAN),
        )
    }
}

/// With `d_i = (H_d)_ii`, the hopping gives `(A²)_ii = t0² d_i`, so
/// `x_i = 2t0² d_i + V²(d_i − m1)²` and `σ² = t0² m1 + V²(m2 − m1²)`.
pub fn tlg_gec_exact(m: &MomentSet, v: &BigRational, t0: &BigRational) -> Result<TlgGecMoments> {
    let [m1, m2, m3, m4] = [m.get(1), m.get(2), m.get(3), m.get(4)];
    let v2 = v * v;
    let t2 = t0 * t0;
    let spread = m2 - m1 * m1;
    let width = &t2 * m1 + &v2 * &spread;
    if width.is_zero() {
        return Err(GecError::DegenerateModel(format!(
            "{} particles on {} sites give zero spectral width",
            m.particles, m.sites
        )));
    }
    let two = BigRational::from_integer(2.into());
    let mean_x = &two * &t2 * m1 + &v2 * &spread;
    let m1_2 = m1 * m1;
    let central4 = m4 - BigRational::from_integer(4.into()) * m3 * m1
        + BigRational::from_integer(6.into()) * m2 * &m1_2
        - BigRational::from_integer(3.into()) * &m1_2 * &m1_2;
    let skew = m3 + &m1_2 * m1 - &two * m1 * m2;
    let four = BigRational::from_integer(4.into());
    let second_x = &four * &t2 * &t2 * m2 + &v2 * &v2 * central4 + &four * &t2 * &v2 * skew;
    let mean = &mean_x / &width;
    let variance = &second_x / (&width * &width) - &mean * &mean;
    Ok(TlgGecMoments { mean, variance })
}

fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| GecError::invalid(format!("non-finite parameter {x}")))
}

pub fn tlg_gec(m: &MomentSet, v: f64, t0: f64) -> Result<(f64, f64)> {
    Ok(tlg_gec_exact(m, &rational(v)?, &rational(t0)?)?.to_f64())
}

pub fn tlg_gec_mean(m: &MomentSet, v: f64, t0: f64) -> Result<f64> {
    tlg_gec(m, v, t0).map(|r| r.0)
}

pub fn tlg_gec_var(m: &MomentSet, v: f64, t0: f64) -> Result<f64> {
    tlg_gec(m, v, t0).map(|r| r.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlgSweepRow {
    pub sites: usize,
    pub particles: usize,
    pub v: f64,
    pub mean: f64,
    pub var: f64,
}

/// GEC mean and variance on a grid of interaction strengths.
pub fn tlg_sweep(m: &MomentSet, v_grid: &[f64], t0: f64) -> Result<Vec<TlgSweepRow>> {
    v_grid
        .iter()
        .map(|&v| {
            let (mean, var) = tlg_gec(m, v, t0)?;
            Ok(TlgSweepRow {
                sites: m.sites,
                particles: m.particles,
                v,
                mean,
                var,
            })
        })
        .collect()
}

/// Filling `particles/sites` carried over to another size; `None` if it does
/// not give an integer particle number there.
pub fn particles_at(sites: usize, numerator: usize, denominator: usize) -> Option<usize> {
    (sites * numerator)
        .is_multiple_of(denominator)
        .then(|| sites * numerator / denominator)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingLadder {
    /// `(L, V*)` from comparing the variance curves of `L` and `L − 4`.
    pub crossings: Vec<CrossingPoint>,
    pub extrapolation: Option<Extrapolation>,
    /// Sizes whose curves did not cross exactly once, with the reason.
    pub failures: Vec<(usize, String)>,
}

/// Crossing of `var(GEC)` between sizes `L` and `L − 4` at fixed filling
/// `num/den`, for every `L` of the ladder, followed by the `1/L` fit.
pub fn crossing_ladder(
    sizes: &[usize],
    filling: (usize, usize),
    ensemble: Ensemble,
    v_grid: &[f64],
    t0: f64,
    deadline: Option<Instant>,
) -> Result<CrossingLadder> {
    let curve = |l: usize| -> Result<Curve> {
        let n = particles_at(l, filling.0, filling.1)
            .ok_or_else(|| GecError::invalid(format!("filling {}/{} on {l} sites", filling.0, filling.1)))?;
        let bonds = tlg_bonds(l, Boundary::Periodic)?;
        let m = moment_set_for_bonds(&bonds, l, n, ensemble, Boundary::Periodic, deadline)?;
        let rows = tlg_sweep(&m, v_grid, t0)?;
        Ok(Curve {
            size: l as f64,
            points: rows.iter().map(|r| (r.v, r.var)).collect(),
        })
    };
    let mut crossings = Vec::new();
    let mut failures = Vec::new();
    for &l in sizes {
        if l < 10 {
            return Err(GecError::invalid(format!("ladder size {l} leaves no smaller partner")));
        }
        match crossing_point(&curve(l)?, &curve(l - 4)?) {
            Ok(c) => crossings.push(CrossingPoint {
                pair: (l as f64, (l - 4) as f64),
                ..c
            }),
            Err(e @ (GecError::NoCrossing | GecError::MultipleCrossings(_))) => failures.push((l, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let pts: Vec<(f64, f64)> = crossings.iter().map(|c| (c.pair.0, c.param_star)).collect();
    let extrapolation = if pts.len() >= 3 {
        Some(extrapolate_crossing(&pts)?)
    } else {
        None
    };
    Ok(CrossingLadder {
        crossings,
        extrapolation,
        failures,
    })
}

/// `L,N,ensemble,k,numerator,denominator`.
pub fn moments_csv(sets: &[MomentSet]) -> String {
    let mut out = String::from("L,N,ensemble,k,numerator,denominator\n");
    for m in sets {
        for (k, r) in m.moments.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                m.sites,
                m.particles,
                m.ensemble.label(),
                k + 1,
                r.numer(),
                r.denom()
            );
        }
    }
    out
}

/// `L,N,V,mean,var`.
pub fn sweep_csv(rows: &[TlgSweepRow]) -> String {
    let mut out = String::from("L,N,V,mean,var\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.sites,
            r.particles,
            fmt_float(r.v),
            fmt_float(r.mean),
            fmt_float(r.var)
        );
    }
    out
}
