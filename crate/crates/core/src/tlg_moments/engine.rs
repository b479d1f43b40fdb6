//! Linear-time bond-subset counting.
//!
//! Every bond term `P_b` takes values in `{0, 1}`, so with `h = Σ_b P_b` the
//! falling factorial `h(h−1)···(h−j+1)` equals `j!·e_j`, where `e_j` sums
//! `Π_{b∈B} P_b` over sets `B` of `j` distinct bonds. Expanding each `P_b`
//! into monomials, the average of `e_j` only needs, for every `p`, the signed
//! number of ways `c[j][p]` to pick `j` bonds and one monomial from each such
//! that the monomials jointly cover exactly `p` sites.
//!
//! Bonds touch at most four consecutive sites, so `c` follows from a transfer
//! matrix sweeping the chain: the state records which of the next three sites
//! are already covered, a generating polynomial in `t` counts bonds and one in
//! `z` counts covered sites as they leave the window. Rings are closed by
//! tracing over the initial state.

use std::time::Instant;

use crate::error::{GecError, Result};
use crate::models::{Bond, Boundary};

use super::poly::bond_polynomial;

/// Highest moment handled, and thus the largest bond subset counted.
pub const MAX_ORDER: usize = 4;
/// Sites spanned by a single bond term.
const WINDOW: usize = 4;
/// Upper bound on the sites covered by `MAX_ORDER` bonds.
const MAX_COVER: usize = MAX_ORDER * WINDOW;
const STATES: usize = 1 << (WINDOW - 1);

/// Truncated bivariate polynomial `Σ a[j][p] t^j z^p`, `j ≤ 4`, `p ≤ 16`.
#[derive(Clone, Copy, PartialEq, Eq)]
struct Tz([[i128; MAX_COVER + 1]; MAX_ORDER + 1]);

impl Tz {
    const ZERO: Tz = Tz([[0; MAX_COVER + 1]; MAX_ORDER + 1]);

    fn one() -> Tz {
        let mut t = Tz::ZERO;
        t.0[0][0] = 1;
        t
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|r| r.iter().all(|&x| x == 0))
    }

    /// `self += c·t·other`.
    fn add_bond(&mut self, other: &Tz, c: i128) {
        for j in 0..MAX_ORDER {
            for p in 0..=MAX_COVER {
                self.0[j + 1][p] += c * other.0[j][p];
            }
        }
    }

    /// `self += z^shift·other` with `shift ∈ {0, 1}`.
    fn add_shifted(&mut self, other: &Tz, shift: usize) {
        for j in 0..=MAX_ORDER {
            for p in 0..=MAX_COVER - shift {
                self.0[j][p + shift] += other.0[j][p];
            }
        }
    }
}

/// Signed cover counts `c[j][p]` for bond subsets of size `j ≤ 4`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverProfile {
    pub counts: Vec<Vec<i128>>,
}

impl CoverProfile {
    pub fn get(&self, j: usize, p: usize) -> i128 {
        self.counts[j][p]
    }
}

/// One bond expanded into `(coverage mask relative to anchor, coefficient)`.
struct AnchoredBond {
    terms: Vec<(usize, i128)>,
}

fn anchor_bonds(bonds: &[Bond], sites: usize, bc: Boundary) -> Result<Vec<Vec<AnchoredBond>>> {
    let mut groups: Vec<Vec<AnchoredBond>> = (0..sites).map(|_| Vec::new()).collect();
    for b in bonds {
        let mut support: Vec<usize> = vec![b.a, b.b];
        support.extend(&b.common);
        if let Some(&s) = support.iter().find(|&&s| s >= sites) {
            return Err(GecError::invalid(format!("bond site {s} outside a chain of {sites}")));
        }
        let offset = |anchor: usize, s: usize| match bc {
            Boundary::Periodic => (s + sites - anchor) % sites,
            Boundary::Open => s.wrapping_sub(anchor),
        };
        let anchor = support
            .iter()
            .copied()
            .min_by_key(|&a| support.iter().map(|&s| offset(a, s)).max())
            .expect("bonds have support");
        if support.iter().any(|&s| offset(anchor, s) >= WINDOW) {
            return Err(GecError::invalid(format!(
                "bond ({}, {}) spans more than {WINDOW} consecutive sites",
                b.a, b.b
            )));
        }
        let terms = bond_polynomial(b)
            .terms()
            .map(|m| {
                let mask = m.sites.iter().fold(0usize, |acc, &s| acc | 1 << offset(anchor, s));
                let c = i128::try_from(&m.coefficient).expect("bond coefficients are small");
                (mask, c)
            })
            .collect();
        groups[anchor].push(AnchoredBond { terms });
    }
    Ok(groups)
}

/// Sweeps the chain once per initial boundary state. `deadline` is checked
/// after every site.
pub fn cover_profile(bonds: &[Bond], sites: usize, bc: Boundary, deadline: Option<Instant>) -> Result<CoverProfile> {
    if bc == Boundary::Periodic && sites < WINDOW {
        return Err(GecError::invalid(format!(
            "ring of {sites} sites is too small for the sweep"
        )));
    }
    let groups = anchor_bonds(bonds, sites, bc)?;
    let starts: Vec<usize> = match bc {
        Boundary::Periodic => (0..STATES).collect(),
        Boundary::Open => vec![0],
    };
    let total_steps = sites * starts.len();
    let mut acc = Tz::ZERO;
    for (run, &sigma) in starts.iter().enumerate() {
        let mut state = vec![Tz::ZERO; STATES];
        state[sigma] = Tz::one();
        for (s, group) in groups.iter().enumerate() {
            let mut window = vec![Tz::ZERO; 2 * STATES];
            window[..STATES].copy_from_slice(&state);
            for bond in group {
                let mut next = window.clone();
                for (st, w) in window.iter().enumerate() {
                    if w.is_zero() {
                        continue;
                    }
                    for &(mask, c) in &bond.terms {
                        next[st | mask].add_bond(w, c);
                    }
                }
                window = next;
            }
            let mut closed = vec![Tz::ZERO; STATES];
            for (st, w) in window.iter().enumerate() {
                closed[st >> 1].add_shifted(w, st & 1);
            }
            state = closed;
            if let Some(d) = deadline {
                if Instant::now() > d {
                    return Err(GecError::BudgetExceeded {
                        completed: run * sites + s + 1,
                        total: total_steps,
                    });
                }
            }
        }
        acc.add_shifted(&state[sigma], 0);
        if bc == Boundary::Open {
            debug_assert!(state[1..].iter().all(Tz::is_zero));
        }
    }
    Ok(CoverProfile {
        counts: acc.0.iter().map(|r| r.to_vec()).collect(),
    })
}
