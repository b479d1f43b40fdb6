//! Disorder ensembles: seeded realizations, the two GEC moment estimators
//! and the gap between them.
//!
//! Realization `r` always draws from `RngStream::new(master_seed, r)` and the
//! per-realization statistics are reduced in index order, so results do not
//! depend on the number of workers.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::linear_fit;
use crate::error::{GecError, Result};
use crate::fock::{gec_exact, SparseHamiltonian};
use crate::models::{qsm_sample, rpm_sample, tlg_build, QsmParams, RpmParams, TlgParams};
use crate::numerics::{bootstrap_se, sample_goe, RngStream};

/// Bootstrap resamples behind every standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Stream index reserved for bootstrap draws.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Goe {
        dim: usize,
    },
    Rpm(RpmParams),
    Qsm(QsmParams),
    /// A single deterministic instance; every realization is identical.
    Tlg(TlgParams),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Goe { dim } if *dim < 2 => Err(GecError::invalid(format!("GOE dimension {dim} < 2"))),
            ModelSpec::Goe { .. } => Ok(()),
            ModelSpec::Rpm(p) => p.validate(),
            ModelSpec::Qsm(p) => p.validate(),
            ModelSpec::Tlg(p) => p.validate(),
        }
    }

    pub fn realize(&self, rng: &mut RngStream) -> Result<SparseHamiltonian> {
        match self {
            ModelSpec::Goe { dim } => Ok(SparseHamiltonian::from_dense(sample_goe(*dim, rng))),
            ModelSpec::Rpm(p) => rpm_sample(p, rng),
            ModelSpec::Qsm(p) => qsm_sample(p, rng).map(|(h, _)| h),
            ModelSpec::Tlg(p) => tlg_build(p).map(|(h, _)| h),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, ModelSpec::Tlg(_))
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Goe { .. } => "goe",
            ModelSpec::Rpm(_) => "rpm",
            ModelSpec::Qsm(_) => "qsm",
            ModelSpec::Tlg(_) => "tlg",
        }
    }

    pub fn describe(&self) -> String {
        format!("{self:?}")
    }

    /// Stable hash of the full parameter set.
    pub fn fingerprint(&self) -> String {
        let mut h = DefaultHasher::new();
        self.describe().hash(&mut h);
        format!("{:016x}", h.finish())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// GEC per realization, moments averaged afterwards.
    Exact,
    /// Numerator and spectral width averaged independently.
    SeparateAverage,
    #[default]
    Both,
}

impl Estimator {
    fn includes(self, kind: Estimator) -> bool {
        self == Estimator::Both || self == kind
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GecMomentEstimate {
    pub estimator: Estimator,
    pub mean: f64,
    pub var: f64,
    /// Bootstrap standard errors; absent for a single realization.
    pub mean_se: Option<f64>,
    pub var_se: Option<f64>,
    pub n_realizations: usize,
    pub model: ModelSpec,
    pub fingerprint: String,
    pub master_seed: u64,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Realizations not yet started when this passes abort the run.
    pub deadline: Option<Instant>,
    /// Keep every per-state GEC value (realization order).
    pub keep_values: bool,
}

#[derive(Clone, Debug)]
pub struct EnsembleRun {
    pub estimates: Vec<GecMomentEstimate>,
    pub values: Option<Vec<f64>>,
}

impl EnsembleRun {
    pub fn get(&self, kind: Estimator) -> Option<&GecMomentEstimate> {
        self.estimates.iter().find(|e| e.estimator == kind)
    }
}

/// Sufficient statistics of one realization, all in terms of the
/// realization's own centering `μ_r`. Variances are two-pass population
/// variances over basis states.
#[derive(Clone, Debug)]
struct Stats {
    mu: f64,
    width: f64,
    /// Mean and variance of the GEC values.
    m1: f64,
    v1: f64,
    /// Mean and variance of the numerators x, their covariance with
    /// h̃ = H_ii − μ_r, and mean and variance of h̃.
    xbar: f64,
    vx: f64,
    cxh: f64,
    hbar: f64,
    vh: f64,
    values: Option<Vec<f64>>,
}

fn mean(v: impl Iterator<Item = f64>, n: f64) -> f64 {
    v.sum::<f64>() / n
}

fn realization_stats(h: &SparseHamiltonian, keep: bool) -> Result<Stats> {
    let g = gec_exact(h)?;
    let d = g.values.len() as f64;
    let hc: Vec<f64> = h.diagonal().iter().map(|x| x - g.shift).collect();
    let xbar = mean(g.numerators.iter().copied(), d);
    let hbar = mean(hc.iter().copied(), d);
    let vx = mean(g.numerators.iter().map(|x| (x - xbar).powi(2)), d);
    let vh = mean(hc.iter().map(|c| (c - hbar).powi(2)), d);
    let cxh = mean(g.numerators.iter().zip(&hc).map(|(x, c)| (x - xbar) * (c - hbar)), d);
    // GEC = x/σ², so its moments follow from those of x.
    Ok(Stats {
        mu: g.shift,
        width: g.width,
        m1: xbar / g.width,
        v1: vx / (g.width * g.width),
        xbar,
        vx,
        cxh,
        hbar,
        vh,
        values: keep.then_some(g.values),
    })
}

/// Mean of per-group variances plus the variance of the group means.
fn total_variance(groups: impl Iterator<Item = (f64, f64)> + Clone, n: f64) -> (f64, f64) {
    let m = groups.clone().map(|g| g.0).sum::<f64>() / n;
    let within = groups.clone().map(|g| g.1).sum::<f64>() / n;
    let between = groups.map(|g| (g.0 - m).powi(2)).sum::<f64>() / n;
    (m, within + between)
}

fn exact_moments(stats: &[Stats], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    total_variance(idx.iter().map(|&r| (stats[r].m1, stats[r].v1)), n)
}

/// `E[x]/σ̄²` and `(E[x²] − E[x]²)/σ̄⁴`, with every realization re-centered on
/// the ensemble mean `μ̄` and `σ̄²` the mean width about `μ̄`.
fn separate_moments(stats: &[Stats], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mu_bar = idx.iter().map(|&r| stats[r].mu).sum::<f64>() / n;
    // x_i(μ̄) = x_i − 2δ·h̃_i + δ² with δ = μ̄ − μ_r.
    let shifted = idx.iter().map(|&r| {
        let s = &stats[r];
        let dl = mu_bar - s.mu;
        (
            s.xbar - 2.0 * dl * s.hbar + dl * dl,
            s.vx - 4.0 * dl * s.cxh + 4.0 * dl * dl * s.vh,
        )
    });
    let (ex, vx) = total_variance(shifted, n);
    let w = idx
        .iter()
        .map(|&r| {
            let dl = mu_bar - stats[r].mu;
            stats[r].width - 2.0 * dl * stats[r].hbar + dl * dl
        })
        .sum::<f64>()
        / n;
    (ex / w, vx / (w * w))
}

fn collect_stats(spec: &ModelSpec, n: usize, seed: u64, opts: &RunOptions) -> Result<Vec<Stats>> {
    let one = |r: usize| -> Result<Stats> {
        if opts.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(GecError::BudgetExceeded { completed: r, total: n });
        }
        let mut rng = RngStream::new(seed, r as u64);
        spec.realize(&mut rng)
            .and_then(|h| realization_stats(&h, opts.keep_values))
            .map_err(|e| GecError::Realization {
                index: r as u64,
                source: Box::new(e),
            })
    };
    let count = if spec.is_deterministic() { 1 } else { n };
    let results: Vec<Result<Stats>> = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| GecError::invalid(format!("worker pool: {e}")))?
            .install(|| (0..count).into_par_iter().map(one).collect()),
        None => (0..count).into_par_iter().map(one).collect(),
    };
    // Budget errors report how many realizations finished.
    let done = results.iter().filter(|r| r.is_ok()).count();
    let mut stats = Vec::with_capacity(n);
    for r in results {
        match r {
            Err(GecError::BudgetExceeded { total, .. }) => {
                return Err(GecError::BudgetExceeded { completed: done, total })
            }
            other => stats.push(other?),
        }
    }
    // A deterministic instance stands for all n realizations.
    if count < n {
        let first = stats[0].clone();
        stats.resize(n, first);
    }
    Ok(stats)
}

fn estimate(
    kind: Estimator,
    stats: &[Stats],
    spec: &ModelSpec,
    seed: u64,
    f: fn(&[Stats], &[usize]) -> (f64, f64),
) -> GecMomentEstimate {
    let n = stats.len();
    let all: Vec<usize> = (0..n).collect();
    let (mean, var) = f(stats, &all);
    let (mean_se, var_se) = if n >= 2 {
        let se = |pick: fn((f64, f64)) -> f64| {
            let mut rng = RngStream::new(seed, BOOTSTRAP_STREAM);
            bootstrap_se(n, BOOTSTRAP_RESAMPLES, &mut rng, |idx| pick(f(stats, idx)))
        };
        (Some(se(|m| m.0)), Some(se(|m| m.1)))
    } else {
        (None, None)
    };
    GecMomentEstimate {
        estimator: kind,
        mean,
        var,
        mean_se,
        var_se,
        n_realizations: n,
        model: *spec,
        fingerprint: spec.fingerprint(),
        master_seed: seed,
    }
}

pub fn run_ensemble(spec: &ModelSpec, n: usize, master_seed: u64, estimator: Estimator) -> Result<EnsembleRun> {
    run_ensemble_with(spec, n, master_seed, estimator, &RunOptions::default())
}

pub fn run_ensemble_with(
    spec: &ModelSpec,
    n: usize,
    master_seed: u64,
    estimator: Estimator,
    opts: &RunOptions,
) -> Result<EnsembleRun> {
    spec.validate()?;
    if n == 0 {
        return Err(GecError::EmptyInput("ensemble of zero realizations"));
    }
    let mut stats = collect_stats(spec, n, master_seed, opts)?;
    let mut estimates = Vec::new();
    if estimator.includes(Estimator::Exact) {
        estimates.push(estimate(Estimator::Exact, &stats, spec, master_seed, exact_moments));
    }
    if estimator.includes(Estimator::SeparateAverage) {
        estimates.push(estimate(
            Estimator::SeparateAverage,
            &stats,
            spec,
            master_seed,
            separate_moments,
        ));
    }
    let values = opts.keep_values.then(|| {
        let per = if spec.is_deterministic() {
            &mut stats[..1]
        } else {
            &mut stats[..]
        };
        per.iter_mut()
            .flat_map(|s| s.values.take().unwrap_or_default())
            .collect()
    });
    Ok(EnsembleRun { estimates, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayScale {
    /// `ln|Δvar|` against `ln D`.
    LogLog,
    /// `ln|Δvar|` against `L`.
    LogLinear,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimatorDiscrepancy {
    pub family: &'static str,
    /// `D` for matrix models, `L` for the quantum sun.
    pub sizes: Vec<f64>,
    pub delta_mean: Vec<f64>,
    pub delta_var: Vec<f64>,
    /// Paired bootstrap standard error of `Δvar`.
    pub delta_var_se: Vec<f64>,
    pub scale: DecayScale,
    /// Fitted slope of the decay; `None` if some `Δvar` vanishes.
    pub slope: Option<f64>,
}

fn ladder_size(spec: &ModelSpec) -> f64 {
    match spec {
        ModelSpec::Goe { dim } => *dim as f64,
        ModelSpec::Rpm(p) => p.dim as f64,
        ModelSpec::Qsm(p) => p.outer as f64,
        ModelSpec::Tlg(p) => p.sites as f64,
    }
}

/// Estimator gap along a size ladder of one model family, from paired runs.
pub fn estimator_discrepancy(
    ladder: &[ModelSpec],
    n: usize,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<EstimatorDiscrepancy> {
    if ladder.len() < 3 {
        return Err(GecError::EmptyInput("discrepancy ladder needs at least 3 sizes"));
    }
    let family = ladder[0].family();
    if ladder.iter().any(|s| s.family() != family) {
        return Err(GecError::invalid("discrepancy ladder mixes model families"));
    }
    let scale = if family == "qsm" {
        DecayScale::LogLinear
    } else {
        DecayScale::LogLog
    };
    let mut out = EstimatorDiscrepancy {
        family,
        sizes: Vec::new(),
        delta_mean: Vec::new(),
        delta_var: Vec::new(),
        delta_var_se: Vec::new(),
        scale,
        slope: None,
    };
    for spec in ladder {
        spec.validate()?;
        let stats = collect_stats(
            spec,
            n,
            master_seed,
            &RunOptions {
                keep_values: false,
                ..opts.clone()
            },
        )?;
        let all: Vec<usize> = (0..n).collect();
        let (em, ev) = exact_moments(&stats, &all);
        let (sm, sv) = separate_moments(&stats, &all);
        let mut rng = RngStream::new(master_seed, BOOTSTRAP_STREAM);
        let se = bootstrap_se(n, BOOTSTRAP_RESAMPLES, &mut rng, |idx| {
            (exact_moments(&stats, idx).1 - separate_moments(&stats, idx).1).abs()
        });
        out.sizes.push(ladder_size(spec));
        out.delta_mean.push((em - sm).abs());
        out.delta_var.push((ev - sv).abs());
        out.delta_var_se.push(se);
    }
    if out.delta_var.iter().all(|&d| d > 0.0) {
        let x: Vec<f64> = match scale {
            DecayScale::LogLog => out.sizes.iter().map(|s| s.ln()).collect(),
            DecayScale::LogLinear => out.sizes.clone(),
        };
        let y: Vec<f64> = out.delta_var.iter().map(|d| d.ln()).collect();
        out.slope = Some(linear_fit(&x, &y)?.1);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tlg() -> ModelSpec {
        ModelSpec::Tlg(TlgParams::half_filled(10, 1.3))
    }

    #[test]
    fn deterministic_instance_gives_identical_estimators() {
        let run = run_ensemble(&tlg(), 1, 3, Estimator::Both).unwrap();
        let (a, b) = (
            run.get(Estimator::Exact).unwrap(),
            run.get(Estimator::SeparateAverage).unwrap(),
        );
        assert!((a.mean - b.mean).abs() < 1e-14);
        assert!((a.var - b.var).abs() < 1e-14, "{} {}", a.var, b.var);
        assert!(a.mean_se.is_none());
    }

    #[test]
    fn deterministic_ladder_has_zero_discrepancy() {
        let ladder: Vec<ModelSpec> = [8, 10, 12]
            .iter()
            .map(|&l| ModelSpec::Tlg(TlgParams::half_filled(l, 0.5)))
            .collect();
        let d = estimator_discrepancy(&ladder, 4, 1, &RunOptions::default()).unwrap();
        assert!(d.delta_var.iter().all(|&x| x < 1e-14));
        assert!(d.delta_mean.iter().all(|&x| x < 1e-14), "{:?}", d.delta_mean);
    }

    #[test]
    fn separate_average_with_one_realization_matches_exact() {
        let spec = ModelSpec::Rpm(RpmParams { dim: 64, gamma: 1.3 });
        let run = run_ensemble(&spec, 1, 9, Estimator::Both).unwrap();
        let (a, b) = (
            run.get(Estimator::Exact).unwrap(),
            run.get(Estimator::SeparateAverage).unwrap(),
        );
        assert!((a.mean - b.mean).abs() < 1e-12 && (a.var - b.var).abs() < 1e-12);
    }

    #[test]
    fn recentering_is_exact() {
        // Realizations with different offsets, checked against numerators
        // computed directly about the ensemble mean.
        let spec = ModelSpec::Goe { dim: 16 };
        let hs: Vec<SparseHamiltonian> = (0..5)
            .map(|r| spec.realize(&mut RngStream::new(4, r)).unwrap().shifted(0.3 * r as f64))
            .collect();
        let stats: Vec<Stats> = hs.iter().map(|h| realization_stats(h, false).unwrap()).collect();
        let mu_bar = stats.iter().map(|s| s.mu).sum::<f64>() / 5.0;
        let (mut ex, mut ex2, mut w) = (0.0, 0.0, 0.0);
        for h in &hs {
            let (a, hd) = crate::fock::uncentered_numerators(&h.shifted(-mu_bar));
            let d = a.len() as f64;
            ex += a.iter().sum::<f64>() / d / 5.0;
            ex2 += a.iter().map(|x| x * x).sum::<f64>() / d / 5.0;
            w += (a.iter().sum::<f64>() + hd.iter().map(|x| x * x).sum::<f64>()) / (2.0 * d) / 5.0;
        }
        let all: Vec<usize> = (0..5).collect();
        let (m, v) = separate_moments(&stats, &all);
        assert!((m - ex / w).abs() < 1e-10);
        assert!((v - (ex2 - ex * ex) / (w * w)).abs() < 1e-10);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = ModelSpec::Rpm(RpmParams { dim: 32, gamma: 0.8 });
        let base = run_ensemble_with(
            &spec,
            24,
            5,
            Estimator::Both,
            &RunOptions {
                workers: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        for w in [4, 16] {
            let run = run_ensemble_with(
                &spec,
                24,
                5,
                Estimator::Both,
                &RunOptions {
                    workers: Some(w),
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(run.estimates, base.estimates);
        }
    }

    #[test]
    fn expired_deadline_is_reported() {
        let spec = ModelSpec::Goe { dim: 8 };
        let opts = RunOptions {
            deadline: Some(Instant::now() - std::time::Duration::from_secs(1)),
            ..Default::default()
        };
        assert!(matches!(
            run_ensemble_with(&spec, 10, 1, Estimator::Exact, &opts),
            Err(GecError::BudgetExceeded {
                completed: 0,
                total: 10
            })
        ));
    }

    #[test]
    fn realization_errors_carry_the_index() {
        let spec = ModelSpec::Goe { dim: 1 };
        assert!(run_ensemble(&spec, 3, 1, Estimator::Exact).is_err());
        let spec = ModelSpec::Rpm(RpmParams {
            dim: 1 << 27,
            gamma: 1.0,
        });
        assert!(matches!(
            run_ensemble(&spec, 2, 1, Estimator::Exact).unwrap_err().root(),
            GecError::Capacity { .. }
        ));
    }

    #[test]
    fn values_are_kept_on_request() {
        let spec = ModelSpec::Goe { dim: 8 };
        let run = run_ensemble_with(
            &spec,
            3,
            2,
            Estimator::Exact,
            &RunOptions {
                keep_values: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(run.values.unwrap().len(), 24);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ModelSpec::Qsm(QsmParams::default());
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"model\":\"qsm\""));
        assert_eq!(serde_json::from_str::<ModelSpec>(&s).unwrap(), spec);
    }

    #[test]
    fn spec_parsing_fills_defaults_and_rejects_typos() {
        let q: ModelSpec = serde_json::from_str(r#"{"model":"qsm","alpha":1.25,"outer":5}"#).unwrap();
        assert_eq!(
            q,
            ModelSpec::Qsm(QsmParams {
                alpha: 1.25,
                outer: 5,
                ..QsmParams::default()
            })
        );
        let t: ModelSpec = serde_json::from_str(r#"{"model":"tlg","sites":8,"particles":4,"v":2.0}"#).unwrap();
        assert_eq!(
            t,
            ModelSpec::Tlg(TlgParams {
                v: 2.0,
                ..TlgParams::half_filled(8, 0.0)
            })
        );
        for bad in [
            r#"{"model":"rpm","dim":8,"gama":1.0}"#,
            r#"{"model":"qsm","alhpa":1.0}"#,
            r#"{"model":"goe","dim":8,"extra":1}"#,
            r#"{"model":"tlg","sites":8,"particles":4,"v":2.0,"w":1}"#,
        ] {
            assert!(serde_json::from_str::<ModelSpec>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn short_ladders_are_rejected() {
        let ladder = [ModelSpec::Goe { dim: 8 }, ModelSpec::Goe { dim: 16 }];
        assert!(estimator_discrepancy(&ladder, 4, 1, &RunOptions::default()).is_err());
    }
}
