//! Multilinear polynomials in occupation numbers `n_ℓ ∈ {0, 1}` with exact
//! integer coefficients. Since `n² = n`, a monomial is just a set of sites.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{Ensemble, TraceWeights};
use crate::error::Result;
use crate::models::Bond;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityMonomial {
    /// Sorted, duplicate-free; empty for the constant term.
    pub sites: Vec<usize>,
    pub coefficient: BigInt,
}

/// Canonical form: no zero coefficients are stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DensityPolynomial {
    terms: BTreeMap<Vec<usize>, BigInt>,
}

fn canonical_sites(sites: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = sites.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl DensityPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        Self::monomial([], c)
    }

    pub fn monomial(sites: impl IntoIterator<Item = usize>, c: impl Into<BigInt>) -> Self {
        let mut p = Self::zero();
        p.add_term(canonical_sites(sites), c.into());
        p
    }

    /// Adds `c·Π_{ℓ∈sites} n_ℓ`; `sites` must already be sorted and unique.
    fn add_term(&mut self, sites: Vec<usize>, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(sites) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, sites: &[usize]) -> BigInt {
        self.terms
            .get(&canonical_sites(sites.iter().copied()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = DensityMonomial> + '_ {
        self.terms.iter().map(|(s, c)| DensityMonomial {
            sites: s.clone(),
            coefficient: c.clone(),
        })
    }

    /// Value on a configuration given by its occupied-site predicate.
    pub fn evaluate(&self, occupied: impl Fn(usize) -> bool) -> BigInt {
        self.terms
            .iter()
            .filter(|(s, _)| s.iter().all(|&x| occupied(x)))
            .map(|(_, c)| c.clone())
            .sum()
    }

    /// Ensemble average: every monomial with `p` sites is replaced by the
    /// probability that `p` given sites are all occupied.
    pub fn trace(&self, sites: usize, particles: usize, ensemble: Ensemble) -> Result<BigRational> {
        let max_p = self.terms.keys().map(Vec::len).max().unwrap_or(0);
        let w = TraceWeights::new(sites, particles, ensemble, max_p)?;
        Ok(self
            .terms
            .iter()
            .map(|(s, c)| w.get(s.len()) * BigRational::from_integer(c.clone()))
            .sum())
    }
}

impl Add for &DensityPolynomial {
    type Output = DensityPolynomial;

    fn add(self, rhs: &DensityPolynomial) -> DensityPolynomial {
        let mut out = self.clone();
        for (s, c) in &rhs.terms {
            out.add_term(s.clone(), c.clone());
        }
        out
    }
}

impl Mul for &DensityPolynomial {
    type Output = DensityPolynomial;

    fn mul(self, rhs: &DensityPolynomial) -> DensityPolynomial {
        poly_mul(self, rhs)
    }
}

/// Product with idempotent reduction: monomials multiply by site-set union.
pub fn poly_mul(p: &DensityPolynomial, q: &DensityPolynomial) -> DensityPolynomial {
    let mut out = DensityPolynomial::zero();
    for (sa, ca) in &p.terms {
        for (sb, cb) in &q.terms {
            out.add_term(union(sa, sb), ca * cb);
        }
    }
    out
}

pub fn poly_pow(p: &DensityPolynomial, k: u32) -> DensityPolynomial {
    let mut acc = DensityPolynomial::constant(1);
    for _ in 0..k {
        acc = poly_mul(&acc, p);
    }
    acc
}

/// `(n_a + n_b − 2 n_a n_b)(1 − Π_{c∈common} n_c)`: one when exactly one end of
/// the bond is occupied and the common neighborhood is not full.
pub fn bond_polynomial(b: &Bond) -> DensityPolynomial {
    let pair = &(&DensityPolynomial::monomial([b.a], 1) + &DensityPolynomial::monomial([b.b], 1))
        + &DensityPolynomial::monomial([b.a, b.b], -2);
    let constraint = &DensityPolynomial::constant(1) + &DensityPolynomial::monomial(b.common.iter().copied(), -1);
    poly_mul(&pair, &constraint)
}

/// `H_d` as the sum of all bond polynomials.
pub fn hd_polynomial(bonds: &[Bond]) -> DensityPolynomial {
    bonds
        .iter()
        .fold(DensityPolynomial::zero(), |acc, b| &acc + &bond_polynomial(b))
}

/// Average of a product of `p` distinct occupation numbers.
pub fn trace_monomial(p: usize, sites: usize, particles: usize, ensemble: Ensemble) -> Result<BigRational> {
    Ok(TraceWeights::new(sites, particles, ensemble, p)?.get(p).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bond3() -> Bond {
        Bond {
            a: 0,
            b: 1,
            common: vec![2],
        }
    }

    #[test]
    fn bond_polynomial_terms() {
        let p = bond_polynomial(&bond3());
        let expect = [
            (vec![0], 1),
            (vec![1], 1),
            (vec![0, 1], -2),
            (vec![0, 2], -1),
            (vec![1, 2], -1),
            (vec![0, 1, 2], 2),
        ];
        assert_eq!(p.len(), 6);
        for (s, c) in expect {
            assert_eq!(p.coefficient(&s), BigInt::from(c));
        }
        let q = bond_polynomial(&Bond {
            a: 3,
            b: 4,
            common: vec![2, 5],
        });
        assert_eq!(q.len(), 6);
        assert_eq!(q.coefficient(&[2, 3, 4, 5]), BigInt::from(2));
        assert_eq!(q.coefficient(&[3, 2, 5]), BigInt::from(-1));
    }

    #[test]
    fn bond_polynomial_values() {
        let p = bond_polynomial(&bond3());
        let at = |bits: u32| p.evaluate(|s| bits >> s & 1 == 1);
        assert_eq!(at(0b111), BigInt::from(0));
        assert_eq!(at(0b101), BigInt::from(0));
        assert_eq!(at(0b001), BigInt::from(1));
        for bits in 0..8u32 {
            let expect = bond3().active(bits as u64) as i32;
            assert_eq!(at(bits), BigInt::from(expect));
        }
    }

    #[test]
    fn multiplication_is_idempotent() {
        let a = DensityPolynomial::monomial([0], 1);
        let b = DensityPolynomial::monomial([1], 1);
        assert_eq!(&a * &a, a);
        assert_eq!(&a * &b, DensityPolynomial::monomial([0, 1], 1));
        let d = &a + &DensityPolynomial::monomial([1], -1);
        let sq = &d * &d;
        assert_eq!(sq.len(), 3);
        assert_eq!(sq.coefficient(&[0]), BigInt::from(1));
        assert_eq!(sq.coefficient(&[1]), BigInt::from(1));
        assert_eq!(sq.coefficient(&[0, 1]), BigInt::from(-2));
        let p = bond_polynomial(&bond3());
        assert_eq!(poly_pow(&p, 3), p);
    }

    #[test]
    fn cancellation_removes_terms() {
        let a = DensityPolynomial::monomial([4, 2], 3);
        let b = DensityPolynomial::monomial([2, 4], -3);
        assert!((&a + &b).is_zero());
    }

    #[test]
    fn monomial_traces() {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(trace_monomial(1, 8, 4, Ensemble::Canonical).unwrap(), r(1, 2));
        assert_eq!(trace_monomial(2, 8, 4, Ensemble::Canonical).unwrap(), r(3, 14));
        assert_eq!(trace_monomial(3, 8, 4, Ensemble::GrandCanonical).unwrap(), r(1, 8));
        assert_eq!(trace_monomial(5, 8, 4, Ensemble::Canonical).unwrap(), r(0, 1));
        assert_eq!(trace_monomial(0, 8, 0, Ensemble::Canonical).unwrap(), r(1, 1));
        assert!(trace_monomial(9, 8, 4, Ensemble::Canonical).is_err());
    }
}
