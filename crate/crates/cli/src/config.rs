//! Experiment configuration. One TOML file selects an experiment `kind` and
//! carries exactly one matching section; unknown keys are errors.

use std::path::PathBuf;

use gec_core::analytic::{Size, ZetaMode};
use gec_core::ensemble::{Estimator, ModelSpec};
use gec_core::models::{Boundary, EpsMoments, QsmParams};
use gec_core::tlg_moments::Ensemble;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    AnalyticSweep,
    EdDistribution,
    TlgSweep,
    Diagnostics,
    GraphExport,
}

impl Kind {
    pub fn label(&self) -> &'static str {
        match self {
            Kind::AnalyticSweep => "analytic-sweep",
            Kind::EdDistribution => "ed-distribution",
            Kind::TlgSweep => "tlg-sweep",
            Kind::Diagnostics => "diagnostics",
            Kind::GraphExport => "graph-export",
        }
    }

    fn section(&self) -> &'static str {
        match self {
            Kind::AnalyticSweep => "analytic",
            Kind::EdDistribution => "ed",
            Kind::TlgSweep => "tlg",
            Kind::Diagnostics => "diagnostics",
            Kind::GraphExport => "graph",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Wall-clock budget in seconds.
    pub budget: Option<f64>,
    pub analytic: Option<AnalyticSection>,
    pub ed: Option<EdSection>,
    pub tlg: Option<TlgSection>,
    pub diagnostics: Option<DiagnosticsSection>,
    pub graph: Option<GraphSection>,
}

/// Either an explicit list or an inclusive `start..=stop` range with `step`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let pts = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(h)) => {
                let valid = h > 0.0 && b >= a;
                if !valid {
                    return Err(CliError::config(format!(
                        "grid needs step > 0 and stop >= start, got {a}..{b} step {h}"
                    )));
                }
                // Index-based so the endpoint survives rounding.
                let n = ((b - a) / h + 1e-9).floor() as usize;
                (0..=n).map(|k| a + k as f64 * h).collect()
            }
            _ => {
                return Err(CliError::config(
                    "grid takes either `values` or all of `start`, `stop`, `step`",
                ))
            }
        };
        if pts.is_empty() {
            return Err(CliError::config("grid is empty"));
        }
        if let Some(x) = pts.iter().find(|x| !x.is_finite()) {
            return Err(CliError::config(format!("grid point {x} is not finite")));
        }
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("grid must be strictly ascending"));
        }
        Ok(pts)
    }
}

/// A size entry: a number, `"2^k"`, or `"inf"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SizeEntry {
    Number(f64),
    Text(String),
}

impl SizeEntry {
    pub fn resolve(&self) -> Result<Size, CliError> {
        let bad = || CliError::config(format!("size {self:?} is not a positive number, `2^k` or `inf`"));
        let x = match self {
            SizeEntry::Number(x) => *x,
            SizeEntry::Text(t) => {
                let t = t.trim();
                if matches!(t, "inf" | "infinity" | "limit") {
                    return Ok(Size::Limit);
                }
                match t.strip_prefix("2^") {
                    Some(k) => k.trim().parse::<f64>().map_err(|_| bad())?.exp2(),
                    None => t.parse::<f64>().map_err(|_| bad())?,
                }
            }
        };
        if x > 0.0 && x.is_finite() {
            Ok(Size::Finite(x))
        } else {
            Err(bad())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticModel {
    Rpm,
    Qsm,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AnalyticSection {
    pub model: AnalyticModel,
    /// `D` for the RPM, outer spin count `L` for the QSM.
    pub sizes: Vec<SizeEntry>,
    /// Parameter grid: `gamma` (RPM) or `alpha` (QSM).
    pub grid: Grid,
    #[serde(default)]
    pub zeta_mode: ZetaMode,
    pub eps: Option<EpsMoments>,
    /// QSM parameters other than `alpha` and `outer`.
    pub qsm: Option<QsmParams>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EdSection {
    pub realizations: usize,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub log_bins: bool,
    /// Cap on raw values written per run (uniform stride subsampling).
    #[serde(default = "default_max_values")]
    pub max_values: usize,
    pub runs: Vec<ModelSpec>,
}

fn default_bins() -> usize {
    64
}

fn default_max_values() -> usize {
    100_000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TlgSection {
    pub sizes: Vec<usize>,
    /// Filling `N/L` as `[numerator, denominator]`.
    #[serde(default = "half_filling")]
    pub filling: [usize; 2],
    #[serde(default)]
    pub ensemble: Ensemble,
    pub v: Grid,
    #[serde(default = "unit")]
    pub t0: f64,
    /// Size of an exact-diagonalization cross-check on the same grid.
    pub ed_check: Option<usize>,
}

fn half_filling() -> [usize; 2] {
    [1, 2]
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticsModel {
    Tlg,
    Goe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    /// Density on one site (TLG).
    Occupation,
    /// Projector onto the first half of the basis (GOE).
    Projector,
    Identity,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DiagnosticsSection {
    pub model: DiagnosticsModel,
    // TLG
    pub sites: Option<usize>,
    pub particles: Option<usize>,
    pub v: Option<Vec<f64>>,
    #[serde(default = "open")]
    pub boundary: Boundary,
    #[serde(default = "unit")]
    pub t0: f64,
    pub observable_site: Option<usize>,
    #[serde(default = "yes")]
    pub entanglement: bool,
    // GOE
    pub dims: Option<Vec<usize>>,
    #[serde(default = "one")]
    pub realizations: usize,
    pub observable: Option<Observable>,
    /// Central fraction of the spectrum used for gap ratios.
    #[serde(default = "whole")]
    pub gap_window: f64,
    /// Central fraction of the spectrum used for ETH fluctuations.
    #[serde(default = "half")]
    pub eth_window: f64,
}

fn open() -> Boundary {
    Boundary::Open
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn whole() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GraphSection {
    #[serde(default = "edge_csv")]
    pub format: String,
    pub model: Option<ModelSpec>,
    /// Explicit dense symmetric matrix; its dimension must be a power of two.
    pub matrix: Option<Vec<Vec<f64>>>,
}

fn edge_csv() -> String {
    "edge-csv".into()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.check_sections()?;
        Ok(cfg)
    }

    fn check_sections(&self) -> Result<(), CliError> {
        let present = [
            ("analytic", self.analytic.is_some()),
            ("ed", self.ed.is_some()),
            ("tlg", self.tlg.is_some()),
            ("diagnostics", self.diagnostics.is_some()),
            ("graph", self.graph.is_some()),
        ];
        let want = self.kind.section();
        for (name, there) in present {
            if name == want && !there {
                return Err(CliError::config(format!(
                    "kind `{}` needs a [{want}] section",
                    self.kind.label()
                )));
            }
            if name != want && there {
                return Err(CliError::config(format!(
                    "section [{name}] does not apply to kind `{}`",
                    self.kind.label()
                )));
            }
        }
        if let Some(b) = self.budget {
            if !(b > 0.0 && b.is_finite()) {
                return Err(CliError::config(format!(
                    "budget must be a positive number of seconds, got {b}"
                )));
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::config("workers must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid_keeps_its_endpoint() {
        let g = Grid {
            start: Some(0.0),
            stop: Some(3.0),
            step: Some(0.05),
            values: None,
        };
        let p = g.points().unwrap();
        assert_eq!(p.len(), 61);
        assert!((p[60] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_grid_forms_are_rejected() {
        let g = Grid {
            values: Some(vec![1.0]),
            start: Some(0.0),
            ..Default::default()
        };
        assert!(g.points().is_err());
        assert!(Grid::default().points().is_err());
        assert!(Grid {
            values: Some(vec![]),
            ..Default::default()
        }
        .points()
        .is_err());
        assert!(Grid {
            values: Some(vec![2.0, 1.0]),
            ..Default::default()
        }
        .points()
        .is_err());
    }

    #[test]
    fn sizes_accept_powers_and_infinity() {
        let s = |t: &str| SizeEntry::Text(t.into()).resolve();
        assert_eq!(s("2^10").unwrap(), Size::Finite(1024.0));
        assert_eq!(s("inf").unwrap(), Size::Limit);
        assert_eq!(SizeEntry::Number(64.0).resolve().unwrap(), Size::Finite(64.0));
        assert!(s("big").is_err());
        assert!(SizeEntry::Number(-1.0).resolve().is_err());
    }

    #[test]
    fn section_must_match_kind() {
        let ok = "kind = \"analytic-sweep\"\n[analytic]\nmodel = \"rpm\"\nsizes = [8]\ngrid = { values = [1.0] }\n";
        assert!(ExperimentConfig::parse(ok).is_ok());
        let wrong = ok.replace("analytic-sweep", "tlg-sweep");
        assert!(ExperimentConfig::parse(&wrong).is_err());
        let typo = ok.replace("sizes", "size");
        assert!(ExperimentConfig::parse(&typo).is_err());
        let extra = format!("{ok}colour = 1\n");
        assert!(ExperimentConfig::parse(&extra).is_err());
    }
}
