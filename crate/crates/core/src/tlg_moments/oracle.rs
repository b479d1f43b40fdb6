//! Reference routes for the interaction-count moments.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::poly::{hd_polynomial, poly_mul, DensityPolynomial};
use super::{Ensemble, MAX_ORDER};
use crate::error::{GecError, Result};
use crate::fock::{binomial, fixed_weight_configs};
use crate::models::{hd_value, Bond};

/// Largest sector enumerated by the canonical oracle.
pub const ORACLE_CAP: u128 = 10_000_000;
/// Largest chain enumerated by the grand-canonical oracle.
pub const ORACLE_MAX_SITES: usize = 26;

/// `E[(H_d)^k]`, `k = 1..=4`, averaged over every `N`-particle configuration.
pub fn hd_moments_oracle(bonds: &[Bond], sites: usize, particles: usize) -> Result<Vec<BigRational>> {
    let dim = binomial(sites as u64, particles as u64);
    if dim > ORACLE_CAP || sites > 63 {
        return Err(GecError::Capacity {
            what: format!("oracle enumeration of {particles} particles on {sites} sites"),
            dim,
            cap: ORACLE_CAP,
        });
    }
    if particles > sites {
        return Err(GecError::invalid(format!("{particles} particles on {sites} sites")));
    }
    let mut sums = [0u128; MAX_ORDER];
    for c in fixed_weight_configs(sites, particles) {
        let h = hd_value(bonds, c) as u128;
        let mut pow = 1u128;
        for s in sums.iter_mut() {
            pow *= h;
            *s += pow;
        }
    }
    Ok(sums
        .iter()
        .map(|&s| BigRational::new(BigInt::from(s), BigInt::from(dim)))
        .collect())
}

/// Grand-canonical reference: all `2^L` configurations weighted by
/// `n^{occupied}(1 − n)^{empty}` with `n = particles/sites`.
pub fn hd_moments_oracle_grand(bonds: &[Bond], sites: usize, particles: usize) -> Result<Vec<BigRational>> {
    if sites > ORACLE_MAX_SITES {
        return Err(GecError::Capacity {
            what: format!("grand-canonical oracle on {sites} sites"),
            dim: 1u128 << sites.min(127),
            cap: 1 << ORACLE_MAX_SITES,
        });
    }
    if particles > sites {
        return Err(GecError::invalid(format!("{particles} particles on {sites} sites")));
    }
    // Power sums grouped by particle number.
    let mut by_count = vec![[0u128; MAX_ORDER]; sites + 1];
    for c in 0..(1u64 << sites) {
        let h = hd_value(bonds, c) as u128;
        let row = &mut by_count[c.count_ones() as usize];
        let mut pow = 1u128;
        for s in row.iter_mut() {
            pow *= h;
            *s += pow;
        }
    }
    let n = BigRational::new(particles.into(), sites.into());
    let one_minus = BigRational::from_integer(1.into()) - &n;
    let pow = |x: &BigRational, e: usize| (0..e).fold(BigRational::from_integer(1.into()), |acc, _| acc * x);
    let weights: Vec<BigRational> = (0..=sites).map(|k| pow(&n, k) * pow(&one_minus, sites - k)).collect();
    Ok((0..MAX_ORDER)
        .map(|k| {
            by_count
                .iter()
                .zip(&weights)
                .map(|(row, w)| w * BigRational::from_integer(BigInt::from(row[k])))
                .sum()
        })
        .collect())
}

/// Moments by expanding `H_d^k` into multilinear monomials and tracing each.
/// Cost grows quickly with `L`; meant for small chains.
pub fn hd_moments_expand(
    bonds: &[Bond],
    sites: usize,
    particles: usize,
    ensemble: Ensemble,
) -> Result<Vec<BigRational>> {
    let hd = hd_polynomial(bonds);
    let mut power = DensityPolynomial::constant(1);
    let mut out = Vec::with_capacity(MAX_ORDER);
    for _ in 0..MAX_ORDER {
        power = poly_mul(&power, &hd);
        out.push(power.trace(sites, particles, ensemble)?);
    }
    Ok(out)
}
