//! One function per experiment kind. Each computes in the ambient rayon pool,
//! collects results in input order and hands every file to the collector.

use std::time::Instant;

use gec_core::analytic::{crossing_point, extrapolate_crossing, qsm_sweep, rpm_sweep, Curve, Size, SweepRow};
use gec_core::diagnostics::{
    eigenstate_entanglement, entanglement_csv, eth_csv, eth_diagonals, eth_fluctuations, gap_ratios, pooled_gap_ratio,
    sector_gap_ratio,
};
use gec_core::ensemble::{run_ensemble_with, ModelSpec, RunOptions};
use gec_core::fock::{enumerate_basis, export_graph, gec_exact, BasisSpec, FockBasis, GraphFormat, SparseHamiltonian};
use gec_core::io::{fmt_float, CsvTable};
use gec_core::models::{occupation_operator, qsm_sample, tlg_bonds, tlg_build, Boundary, EpsMoments, TlgParams};
use gec_core::numerics::{
    eigh, histogram, log_edges, sample_goe, summarize, uniform_edges, RngStream, SymmetricMatrix,
};
use gec_core::tlg_moments::{
    moment_set_for_bonds, moments_csv, particles_at, sweep_csv, tlg_gec, tlg_sweep, Ensemble, MomentSet,
};
use gec_core::GecError;
use rayon::prelude::*;

use crate::config::{
    AnalyticModel, AnalyticSection, DiagnosticsModel, DiagnosticsSection, EdSection, GraphSection, Observable,
    TlgSection,
};
use crate::error::CliError;
use crate::output::Collector;

/// Run-wide settings resolved from flags and config.
#[derive(Clone, Copy, Debug)]
pub struct Context {
    pub seed: u64,
    pub deadline: Option<Instant>,
}

impl Context {
    fn check_budget(&self, completed: usize, total: usize) -> Result<(), CliError> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(GecError::BudgetExceeded { completed, total }.into()),
            _ => Ok(()),
        }
    }
}

fn size_label(s: Size) -> String {
    match s {
        Size::Finite(x) if x.fract() == 0.0 && x < 1e18 => format!("{}", x as u64),
        Size::Finite(x) => fmt_float(x),
        Size::Limit => "inf".into(),
    }
}

fn crossing_table(curves: &[Curve], size_names: &[String]) -> (CsvTable, Vec<(f64, f64)>) {
    let mut t = CsvTable::new(&[
        "size",
        "reference_size",
        "param_star",
        "bracket_lo",
        "bracket_hi",
        "status",
    ]);
    let mut found = Vec::new();
    for k in 1..curves.len() {
        let (a, b) = (&curves[k], &curves[k - 1]);
        let names = [size_names[k].clone(), size_names[k - 1].clone()];
        match crossing_point(a, b) {
            Ok(c) => {
                found.push((a.size, c.param_star));
                t.push(&[
                    names[0].clone(),
                    names[1].clone(),
                    fmt_float(c.param_star),
                    fmt_float(c.bracket.0),
                    fmt_float(c.bracket.1),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                let status = match e {
                    GecError::NoCrossing => "no-crossing",
                    GecError::MultipleCrossings(_) => "multiple-crossings",
                    _ => "error",
                };
                t.push(&[
                    names[0].clone(),
                    names[1].clone(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    status.into(),
                ]);
            }
        }
    }
    (t, found)
}

pub fn analytic_sweep(cfg: &AnalyticSection, out: &mut Collector) -> Result<(), CliError> {
    out.stage("validate");
    let grid = cfg.grid.points()?;
    let mut sizes = cfg.sizes.iter().map(|s| s.resolve()).collect::<Result<Vec<_>, _>>()?;
    if sizes.is_empty() {
        return Err(CliError::config("analytic sweep needs at least one size"));
    }
    if !sizes.iter().any(Size::is_limit) {
        sizes.push(Size::Limit);
    }
    let eps = match cfg.eps {
        Some(e) => EpsMoments::new(e.m2, e.m4)?,
        None => EpsMoments::default(),
    };
    if cfg.model == AnalyticModel::Rpm && cfg.qsm.is_some() {
        return Err(CliError::config("[analytic.qsm] given for an rpm sweep"));
    }

    out.stage("sweep");
    let rows: Vec<SweepRow> = match cfg.model {
        AnalyticModel::Rpm => rpm_sweep(&sizes, &grid, eps)?,
        AnalyticModel::Qsm => qsm_sweep(&cfg.qsm.unwrap_or_default(), &sizes, &grid, cfg.zeta_mode)?,
    };
    let mut t = CsvTable::new(&["model", "size", "param", "mean", "var", "branch"]);
    for r in &rows {
        t.push(&[
            r.model.into(),
            size_label(r.size),
            fmt_float(r.param),
            fmt_float(r.mean),
            fmt_float(r.var),
            r.branch.into(),
        ]);
    }
    out.write("analytic_sweep.csv", t.as_str())?;

    if grid.len() >= 2 {
        out.stage("crossings");
        let finite: Vec<Size> = sizes.iter().copied().filter(|s| !s.is_limit()).collect();
        let curves: Vec<Curve> = finite
            .iter()
            .map(|&s| Curve {
                size: match s {
                    Size::Finite(x) => x,
                    Size::Limit => f64::INFINITY,
                },
                points: rows.iter().filter(|r| r.size == s).map(|r| (r.param, r.var)).collect(),
            })
            .collect();
        let names: Vec<String> = finite.iter().map(|&s| size_label(s)).collect();
        let (t, _) = crossing_table(&curves, &names);
        out.write("analytic_crossings.csv", t.as_str())?;
    }
    Ok(())
}

fn histogram_csv(values: &[f64], bins: usize, log: bool) -> Result<(String, u64), CliError> {
    let s = summarize(values)?;
    let edges = if log {
        let lo = values
            .iter()
            .copied()
            .filter(|&x| x > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !lo.is_finite() {
            return Err(CliError::config("log-spaced bins need positive GEC values"));
        }
        log_edges(lo, s.max, bins)?
    } else {
        uniform_edges(s.min, s.max, bins)
    };
    let h = histogram(values, &edges)?;
    let mut t = CsvTable::new(&["lo", "hi", "count", "density"]);
    for k in 0..h.counts.len() {
        t.push(&[
            fmt_float(h.edges[k]),
            fmt_float(h.edges[k + 1]),
            h.counts[k].to_string(),
            fmt_float(h.density[k]),
        ]);
    }
    Ok((t.into_string(), h.outside))
}

pub fn ed_distribution(cfg: &EdSection, ctx: &Context, out: &mut Collector) -> Result<(), CliError> {
    out.stage("validate");
    if cfg.runs.is_empty() {
        return Err(CliError::config("[ed] needs at least one entry in `runs`"));
    }
    if cfg.realizations == 0 || cfg.bins == 0 {
        return Err(CliError::config("`realizations` and `bins` must be positive"));
    }
    for spec in &cfg.runs {
        spec.validate()?;
    }

    let mut summary = CsvTable::new(&[
        "run",
        "model",
        "fingerprint",
        "estimator",
        "n",
        "mean",
        "var",
        "mean_se",
        "var_se",
        "values_written",
        "hist_outside",
    ]);
    let mut estimates = Vec::new();
    let opt_se = |x: Option<f64>| x.map(fmt_float).unwrap_or_else(|| "nan".into());
    for (k, spec) in cfg.runs.iter().enumerate() {
        out.stage(&format!("run {k}"));
        let opts = RunOptions {
            workers: None,
            deadline: ctx.deadline,
            keep_values: true,
        };
        let run = run_ensemble_with(spec, cfg.realizations, ctx.seed, cfg.estimator, &opts)?;
        let values = run.values.as_deref().unwrap_or(&[]);

        let stride = values.len().div_ceil(cfg.max_values.max(1)).max(1);
        let mut raw = String::from("gec\n");
        let mut written = 0usize;
        if cfg.max_values > 0 {
            for v in values.iter().step_by(stride) {
                raw.push_str(&fmt_float(*v));
                raw.push('\n');
                written += 1;
            }
        }
        out.write(&format!("ed_{k}_values.csv"), &raw)?;
        let (hist, outside) = histogram_csv(values, cfg.bins, cfg.log_bins)?;
        out.write(&format!("ed_{k}_histogram.csv"), &hist)?;

        for e in &run.estimates {
            summary.push(&[
                k.to_string(),
                spec.family().into(),
                e.fingerprint.clone(),
                serde_json::to_value(e.estimator)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                e.n_realizations.to_string(),
                fmt_float(e.mean),
                fmt_float(e.var),
                opt_se(e.mean_se),
                opt_se(e.var_se),
                written.to_string(),
                outside.to_string(),
            ]);
        }
        estimates.extend(run.estimates);
    }
    out.write("ed_summary.csv", summary.as_str())?;
    let json = serde_json::to_string_pretty(&estimates).expect("estimates serialize");
    out.write("ed_estimates.json", json + "\n")?;
    Ok(())
}

fn tlg_moments_at(l: usize, n: usize, ensemble: Ensemble, ctx: &Context) -> Result<MomentSet, GecError> {
    let bonds = tlg_bonds(l, Boundary::Periodic)?;
    moment_set_for_bonds(&bonds, l, n, ensemble, Boundary::Periodic, ctx.deadline)
}

pub fn tlg_sweep_cmd(cfg: &TlgSection, ctx: &Context, out: &mut Collector) -> Result<(), CliError> {
    out.stage("validate");
    let grid = cfg.v.points()?;
    if cfg.sizes.is_empty() {
        return Err(CliError::config("[tlg] needs at least one size"));
    }
    if cfg.sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config("[tlg] sizes must be strictly ascending"));
    }
    let [num, den] = cfg.filling;
    if den == 0 || num > den {
        return Err(CliError::config(format!("filling {num}/{den} is not in [0, 1]")));
    }
    if !(cfg.t0 > 0.0 && cfg.t0.is_finite()) {
        return Err(CliError::config(format!("t0 must be positive, got {}", cfg.t0)));
    }
    let particles: Vec<usize> = cfg
        .sizes
        .iter()
        .map(|&l| {
            particles_at(l, num, den).ok_or_else(|| CliError::config(format!("filling {num}/{den} on {l} sites")))
        })
        .collect::<Result<_, _>>()?;

    out.stage("moments");
    let results: Vec<Result<MomentSet, GecError>> = cfg
        .sizes
        .par_iter()
        .zip(&particles)
        .map(|(&l, &n)| tlg_moments_at(l, n, cfg.ensemble, ctx))
        .collect();
    let total = results.len();
    let done = results.iter().take_while(|r| r.is_ok()).count();
    let mut failure = None;
    let mut sets = Vec::with_capacity(done);
    for r in results {
        match r {
            Ok(m) if failure.is_none() => sets.push(m),
            Ok(_) => {}
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }

    out.stage("sweep");
    let mut rows = Vec::new();
    for m in &sets {
        rows.extend(tlg_sweep(m, &grid, cfg.t0)?);
    }
    out.write("tlg_sweep.csv", sweep_csv(&rows))?;
    out.write("tlg_moments.csv", moments_csv(&sets))?;
    match failure {
        Some(GecError::BudgetExceeded { .. }) => {
            return Err(GecError::BudgetExceeded { completed: done, total }.into());
        }
        Some(e) => return Err(e.into()),
        None => {}
    }

    if grid.len() >= 2 && sets.len() >= 2 {
        out.stage("crossings");
        let curves: Vec<Curve> = sets
            .iter()
            .map(|m| Curve {
                size: m.sites as f64,
                points: rows
                    .iter()
                    .filter(|r| r.sites == m.sites)
                    .map(|r| (r.v, r.var))
                    .collect(),
            })
            .collect();
        let names: Vec<String> = sets.iter().map(|m| m.sites.to_string()).collect();
        let (t, found) = crossing_table(&curves, &names);
        out.write("tlg_crossings.csv", t.as_str())?;
        if found.len() >= 3 {
            let x = extrapolate_crossing(&found)?;
            let mut t = CsvTable::new(&["v_inf", "slope", "residual", "points"]);
            t.push(&[
                fmt_float(x.v_inf),
                fmt_float(x.slope),
                fmt_float(x.residual),
                found.len().to_string(),
            ]);
            out.write("tlg_extrapolation.csv", t.as_str())?;
        }
    }

    if let Some(l) = cfg.ed_check {
        out.stage("ed-check");
        ctx.check_budget(0, 1)?;
        let n = particles_at(l, num, den)
            .ok_or_else(|| CliError::config(format!("filling {num}/{den} on {l} sites (ed-check)")))?;
        let m = tlg_moments_at(l, n, Ensemble::Canonical, ctx)?;
        let checks: Vec<[f64; 5]> = grid
            .par_iter()
            .map(|&v| -> Result<[f64; 5], GecError> {
                let p = TlgParams {
                    sites: l,
                    particles: n,
                    v,
                    t0: cfg.t0,
                    boundary: Boundary::Periodic,
                };
                let (h, _) = tlg_build(&p)?;
                let g = gec_exact(&h)?;
                let (mean, var) = tlg_gec(&m, v, cfg.t0)?;
                Ok([v, mean, g.mean(), var, g.variance()])
            })
            .collect::<Result<_, _>>()?;
        let mut t = CsvTable::new(&["v", "engine_mean", "ed_mean", "engine_var", "ed_var", "max_rel_dev"]);
        for [v, em, dm, ev, dv] in checks {
            let dev = ((em - dm) / dm).abs().max(((ev - dv) / dv).abs());
            t.push(&[
                fmt_float(v),
                fmt_float(em),
                fmt_float(dm),
                fmt_float(ev),
                fmt_float(dv),
                fmt_float(dev),
            ]);
        }
        out.write("tlg_ed_check.csv", t.as_str())?;
    }
    Ok(())
}

struct DiagPoint {
    tag: String,
    param: f64,
    dim: usize,
    mean_r: f64,
    eth: String,
    entanglement: Option<String>,
    z_av: f64,
    z_max: f64,
}

fn identity(dim: usize) -> Result<SparseHamiltonian, GecError> {
    SparseHamiltonian::from_entries(dim, vec![1.0; dim], Vec::new())
}

fn tlg_point(cfg: &DiagnosticsSection, v: f64, ctx: &Context) -> Result<DiagPoint, CliError> {
    let sites = cfg.sites.unwrap_or(0);
    let p = TlgParams {
        sites,
        particles: cfg.particles.unwrap_or(sites / 2),
        v,
        t0: cfg.t0,
        boundary: cfg.boundary,
    };
    let (h, basis) = tlg_build(&p)?;
    ctx.check_budget(0, 1)?;
    let mean_r = sector_gap_ratio(&h, &basis, cfg.gap_window)?;
    let spectrum = eigh(&h.to_dense()?)?;
    let obs = match cfg.observable.unwrap_or(Observable::Occupation) {
        Observable::Occupation => occupation_operator(&basis, cfg.observable_site.unwrap_or(sites / 2)),
        Observable::Identity => identity(basis.dim())?,
        Observable::Projector => unreachable!("rejected during validation"),
    };
    let diag = eth_diagonals(&spectrum, &obs)?;
    let fl = eth_fluctuations(&diag, cfg.eth_window)?;
    let entanglement = if cfg.entanglement {
        Some(entanglement_csv(&eigenstate_entanglement(&spectrum, &basis)?))
    } else {
        None
    };
    Ok(DiagPoint {
        tag: format!("V{v}"),
        param: v,
        dim: basis.dim(),
        mean_r,
        eth: eth_csv(&spectrum.eigenvalues, &diag),
        entanglement,
        z_av: fl.z_av,
        z_max: fl.z_max,
    })
}

fn goe_point(cfg: &DiagnosticsSection, index: usize, dim: usize, ctx: &Context) -> Result<DiagPoint, CliError> {
    let mut parts = Vec::with_capacity(cfg.realizations);
    let (mut z_av, mut z_max) = (0.0, 0.0f64);
    let mut eth = String::new();
    for r in 0..cfg.realizations {
        ctx.check_budget(r, cfg.realizations)?;
        let stream = ((index as u64) << 32) | r as u64;
        let m = sample_goe(dim, &mut RngStream::new(ctx.seed, stream));
        let spectrum = eigh(&m)?;
        parts.push(gap_ratios(&spectrum.eigenvalues, cfg.gap_window)?);
        let obs = match cfg.observable.unwrap_or(Observable::Projector) {
            Observable::Projector => {
                let proj = (0..dim).map(|i| if i < dim / 2 { 1.0 } else { 0.0 }).collect();
                SparseHamiltonian::from_entries(dim, proj, Vec::new())?
            }
            Observable::Identity => identity(dim)?,
            Observable::Occupation => unreachable!("rejected during validation"),
        };
        let diag = eth_diagonals(&spectrum, &obs)?;
        let fl = eth_fluctuations(&diag, cfg.eth_window)?;
        z_av += fl.z_av / cfg.realizations as f64;
        z_max = z_max.max(fl.z_max);
        if r == 0 {
            eth = eth_csv(&spectrum.eigenvalues, &diag);
        }
    }
    Ok(DiagPoint {
        tag: format!("D{dim}"),
        param: dim as f64,
        dim,
        mean_r: pooled_gap_ratio(&parts)?,
        eth,
        entanglement: None,
        z_av,
        z_max,
    })
}

fn validate_diagnostics(cfg: &DiagnosticsSection) -> Result<(), CliError> {
    for (name, w) in [("gap-window", cfg.gap_window), ("eth-window", cfg.eth_window)] {
        if !(w > 0.0 && w <= 1.0) {
            return Err(CliError::config(format!("{name} must be in (0, 1], got {w}")));
        }
    }
    match cfg.model {
        DiagnosticsModel::Tlg => {
            let (Some(sites), Some(vs)) = (cfg.sites, cfg.v.as_ref()) else {
                return Err(CliError::config("tlg diagnostics need `sites` and `v`"));
            };
            if vs.is_empty() {
                return Err(CliError::config("`v` is empty"));
            }
            if cfg.dims.is_some() {
                return Err(CliError::config("`dims` applies to goe diagnostics only"));
            }
            if cfg.observable == Some(Observable::Projector) {
                return Err(CliError::config(
                    "the projector observable applies to goe diagnostics only",
                ));
            }
            if let Some(s) = cfg.observable_site {
                if s >= sites {
                    return Err(CliError::config(format!("observable site {s} outside 0..{sites}")));
                }
            }
            if cfg.entanglement && sites % 2 == 1 {
                return Err(CliError::config("entanglement needs an even number of sites"));
            }
            for &v in vs {
                TlgParams {
                    sites,
                    particles: cfg.particles.unwrap_or(sites / 2),
                    v,
                    t0: cfg.t0,
                    boundary: cfg.boundary,
                }
                .validate()?;
            }
            let dim = BasisSpec::FixedParticles {
                sites,
                particles: cfg.particles.unwrap_or(sites / 2),
            }
            .dim();
            check_dense(dim)
        }
        DiagnosticsModel::Goe => {
            let Some(dims) = cfg.dims.as_ref().filter(|d| !d.is_empty()) else {
                return Err(CliError::config("goe diagnostics need a nonempty `dims`"));
            };
            if cfg.sites.is_some() || cfg.v.is_some() || cfg.particles.is_some() || cfg.observable_site.is_some() {
                return Err(CliError::config(
                    "`sites`, `particles`, `v` and `observable-site` apply to tlg only",
                ));
            }
            if cfg.observable == Some(Observable::Occupation) {
                return Err(CliError::config(
                    "the occupation observable applies to tlg diagnostics only",
                ));
            }
            if cfg.realizations == 0 {
                return Err(CliError::config("`realizations` must be positive"));
            }
            for &d in dims {
                if d < 4 {
                    return Err(CliError::config(format!("goe dimension {d} is below 4")));
                }
                check_dense(d as u128)?;
            }
            Ok(())
        }
    }
}

/// Full diagonalization cap.
const ED_CAP: u128 = 1 << 13;

fn check_dense(dim: u128) -> Result<(), CliError> {
    if dim > ED_CAP {
        return Err(GecError::Capacity {
            what: "exact diagonalization".into(),
            dim,
            cap: ED_CAP,
        }
        .into());
    }
    Ok(())
}

pub fn diagnostics(cfg: &DiagnosticsSection, ctx: &Context, out: &mut Collector) -> Result<(), CliError> {
    out.stage("validate");
    validate_diagnostics(cfg)?;

    out.stage("diagonalize");
    let points: Vec<DiagPoint> = match cfg.model {
        DiagnosticsModel::Tlg => cfg
            .v
            .as_deref()
            .unwrap_or_default()
            .par_iter()
            .map(|&v| tlg_point(cfg, v, ctx))
            .collect::<Result<_, _>>()?,
        DiagnosticsModel::Goe => cfg
            .dims
            .as_deref()
            .unwrap_or_default()
            .par_iter()
            .enumerate()
            .map(|(i, &d)| goe_point(cfg, i, d, ctx))
            .collect::<Result<_, _>>()?,
    };

    // GOE points are labelled by their dimension alone.
    let lead: &[&str] = match cfg.model {
        DiagnosticsModel::Tlg => &["v", "dim"],
        DiagnosticsModel::Goe => &["dim"],
    };
    let mut gaps = CsvTable::new(&[lead, &["mean_r"]].concat());
    let mut fluct = CsvTable::new(&[lead, &["z_av", "z_max"]].concat());
    for p in &points {
        let mut head = vec![p.dim.to_string()];
        if cfg.model == DiagnosticsModel::Tlg {
            head.insert(0, fmt_float(p.param));
        }
        gaps.push(&[head.clone(), vec![fmt_float(p.mean_r)]].concat());
        fluct.push(&[head, vec![fmt_float(p.z_av), fmt_float(p.z_max)]].concat());
        out.write(&format!("eth_{}.csv", p.tag), &p.eth)?;
        if let Some(e) = &p.entanglement {
            out.write(&format!("entanglement_{}.csv", p.tag), e)?;
        }
    }
    out.write("gap_ratio.csv", gaps.as_str())?;
    out.write("fluctuations.csv", fluct.as_str())?;
    Ok(())
}

fn power_of_two_basis(dim: usize) -> Result<FockBasis, CliError> {
    if !dim.is_power_of_two() {
        return Err(CliError::config(format!(
            "graph export labels states by bit configuration, dimension {dim} is not a power of two"
        )));
    }
    Ok(enumerate_basis(BasisSpec::FullSpin {
        sites: dim.trailing_zeros() as usize,
    })?)
}

pub fn graph_export(cfg: &GraphSection, ctx: &Context, out: &mut Collector) -> Result<(), CliError> {
    out.stage("validate");
    let format: GraphFormat = cfg.format.parse()?;
    out.stage("build");
    let (h, basis) = match (&cfg.model, &cfg.matrix) {
        (Some(spec), None) => {
            spec.validate()?;
            let mut rng = RngStream::new(ctx.seed, 0);
            match spec {
                ModelSpec::Tlg(p) => tlg_build(p)?,
                ModelSpec::Qsm(p) => {
                    let (h, _) = qsm_sample(p, &mut rng)?;
                    let basis = enumerate_basis(BasisSpec::FullSpin { sites: p.sites() })?;
                    (h, basis)
                }
                other => {
                    let h = other.realize(&mut rng)?;
                    let basis = power_of_two_basis(h.dim())?;
                    (h, basis)
                }
            }
        }
        (None, Some(rows)) => {
            let m = SymmetricMatrix::from_rows(rows)?;
            let basis = power_of_two_basis(m.dim())?;
            (SparseHamiltonian::from_dense(m), basis)
        }
        _ => return Err(CliError::config("[graph] takes exactly one of `model` or `matrix`")),
    };
    out.stage("gec");
    let gec = gec_exact(&h)?;
    out.stage("export");
    for (name, bytes) in export_graph(&h, &basis, &gec, format)?.files {
        out.write(&name, bytes)?;
    }
    Ok(())
}
