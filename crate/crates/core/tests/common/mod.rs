//! Property checks shared by the property suite and the acceptance report.
#![allow(dead_code)]

use gec_core::ensemble::{run_ensemble_with, Estimator, ModelSpec, RunOptions};
use gec_core::fock::{gec_exact, gec_offdiag_form, Edge, GecVector, SparseHamiltonian};
use gec_core::models::{Boundary, QsmParams, RpmParams, TlgParams};
use gec_core::numerics::RngStream;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub fn random_sparse() -> impl Strategy<Value = SparseHamiltonian> {
    (2usize..=100).prop_flat_map(|d| {
        (
            prop::collection::vec(-5.0f64..5.0, d),
            prop::collection::vec((0..d, 0..d, -3.0f64..3.0), 0..4 * d),
        )
            .prop_map(move |(diag, es)| {
                let edges = es.into_iter().map(|(i, j, w)| Edge { i, j, w }).collect();
                SparseHamiltonian::from_entries(d, diag, edges).unwrap()
            })
    })
}

/// Small instances of every model family.
pub fn random_model() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (2usize..=48).prop_map(|dim| ModelSpec::Goe { dim }),
        (2usize..=64, 0.0f64..3.0).prop_map(|(dim, gamma)| ModelSpec::Rpm(RpmParams { dim, gamma })),
        (1usize..=3, 0usize..=5, 0.3f64..1.5, 0.0f64..0.5).prop_map(|(grain, outer, alpha, zeta)| {
            ModelSpec::Qsm(QsmParams {
                grain,
                outer,
                alpha,
                zeta,
                ..QsmParams::default()
            })
        }),
        (3usize..=6, 0.0f64..4.0, any::<bool>()).prop_map(|(half, v, open)| {
            let boundary = if open { Boundary::Open } else { Boundary::Periodic };
            ModelSpec::Tlg(TlgParams {
                boundary,
                ..TlgParams::half_filled(2 * half, v)
            })
        }),
    ]
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * scale)
}

fn check_vector(h: &SparseHamiltonian, g: &GecVector) -> Result<(), TestCaseError> {
    prop_assert!(g.values.iter().all(|&v| v >= 0.0), "negative GEC");
    for (v, x) in g.values.iter().zip(&g.numerators) {
        prop_assert_eq!(*v, x / g.width);
    }
    let diag_sq: f64 = h.diagonal().iter().map(|d| (d - g.shift).powi(2)).sum();
    let expected = 2.0 - diag_sq / (g.width * h.dim() as f64);
    prop_assert!(
        (g.mean() - expected).abs() <= 1e-10 * expected.abs().max(1.0),
        "sum rule: {} vs {}",
        g.mean(),
        expected
    );
    Ok(())
}

pub fn offdiag_equivalence(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&random_sparse(), |h| {
            match (gec_exact(&h), gec_offdiag_form(&h)) {
                (Ok(a), Ok(b)) => prop_assert!(close(&a.values, &b.values, 1e-12)),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "forms disagree on failure: {:?} / {:?}", a.is_ok(), b.is_ok()),
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn positivity_and_sum_rule(cases: u32) -> Result<(), String> {
    let mut r = runner(cases);
    r.run(&random_sparse(), |h| {
        if let Ok(g) = gec_exact(&h) {
            check_vector(&h, &g)?;
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    r.run(&(random_model(), any::<u64>()), |(spec, seed)| {
        let h = spec.realize(&mut RngStream::new(seed, 0)).unwrap();
        // A uniform TLG diagonal at V = 0 with no hops can be degenerate.
        if let Ok(g) = gec_exact(&h) {
            check_vector(&h, &g)?;
        }
        Ok(())
    })
    .map_err(|e| e.to_string())
}

pub fn shift_and_scale_invariance(cases: u32) -> Result<(), String> {
    let strategy = (random_sparse(), -50.0f64..50.0, prop_oneof![-4.0f64..-0.1, 0.1f64..4.0]);
    runner(cases)
        .run(&strategy, |(h, c, s)| {
            let Ok(base) = gec_exact(&h) else { return Ok(()) };
            let shifted = gec_exact(&h.shifted(c)).unwrap();
            prop_assert!(close(&base.values, &shifted.values, 1e-9), "shift {c}");
            let scaled = gec_exact(&h.scaled(s)).unwrap();
            prop_assert!(close(&base.values, &scaled.values, 1e-12), "scale {s}");
            // Powers of two scale without rounding.
            let exact = gec_exact(&h.scaled(0.25)).unwrap();
            prop_assert_eq!(&base.values, &exact.values);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn worker_determinism(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(random_model(), any::<u64>(), 2usize..12), |(spec, seed, n)| {
            let run = |w| {
                run_ensemble_with(
                    &spec,
                    n,
                    seed,
                    Estimator::Both,
                    &RunOptions {
                        workers: Some(w),
                        ..Default::default()
                    },
                )
                .map(|r| r.estimates)
                .map_err(|e| e.to_string())
            };
            let one = run(1);
            prop_assert_eq!(&one, &run(4));
            prop_assert_eq!(&one, &run(16));
            Ok(())
        })
        .map_err(|e| e.to_string())
}
