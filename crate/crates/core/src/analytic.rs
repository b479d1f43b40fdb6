//! Closed-form GEC moments for the GOE, the Rosenzweig–Porter model and the
//! quantum sun model, plus crossing-point and finite-size scaling analysis.
//!
//! Sizes may be astronomically large, so powers of the dimension are formed
//! from `ln D` and every ratio is rescaled by its dominant term before
//! evaluation.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{GecError, Result};
use crate::models::{EpsMoments, QsmParams};

/// A finite system size (dimension `D` or outer-spin count `L`) or the
/// thermodynamic limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Size {
    Finite(f64),
    Limit,
}

impl Size {
    pub fn pow2(k: f64) -> Self {
        Size::Finite(k.exp2())
    }

    pub fn is_limit(&self) -> bool {
        matches!(self, Size::Limit)
    }
}

impl std::fmt::Display for Size {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Size::Finite(x) => write!(f, "{x}"),
            Size::Limit => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMoments {
    pub mean: f64,
    pub variance: f64,
    pub size: Size,
}

/// GOE moments `(2 − 2/(D+1), 8D/(D+1)²)` as exact rationals.
pub fn goe_gec_moments_exact(dim: u64) -> (BigRational, BigRational) {
    let d = BigInt::from(dim);
    let d1: BigInt = &d + 1;
    let mean = BigRational::new(2 * &d, d1.clone());
    let var = BigRational::new(8 * &d, &d1 * &d1);
    (mean, var)
}

pub fn goe_gec_moments(size: Size) -> AnalyticMoments {
    let (mean, variance) = match size {
        Size::Limit => (2.0, 0.0),
        Size::Finite(d) => (2.0 * d / (d + 1.0), 8.0 * d / ((d + 1.0) * (d + 1.0))),
    };
    AnalyticMoments { mean, variance, size }
}

/// Which side of the `γ = 1` transition a thermodynamic-limit value sits on.
fn branch(x: f64, critical: f64) -> std::cmp::Ordering {
    x.partial_cmp(&critical).unwrap_or(std::cmp::Ordering::Equal)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(GecError::invalid(format!("gamma must be >= 0, got {gamma}")))
    }
}

/// Scaled powers of the dimension: with `x = D^{1−γ}` and `s = max(1, x)`,
/// returns `(1/s, x/s, D^{−γ}/s, ln s)`.
fn rpm_terms(ln_d: f64, gamma: f64) -> (f64, f64, f64, f64) {
    let lx = (1.0 - gamma) * ln_d;
    let ls = lx.max(0.0);
    ((-ls).exp(), (lx - ls).exp(), (-gamma * ln_d - ls).exp(), ls)
}

/// `(E[ε²] + 2D^{1−γ}) / (E[ε²] + D^{1−γ} + D^{−γ})`.
pub fn rpm_gec_mean(size: Size, gamma: f64, eps: EpsMoments) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(match size {
        Size::Limit => match branch(gamma, 1.0) {
            std::cmp::Ordering::Less => 2.0,
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => (eps.m2 + 2.0) / (eps.m2 + 1.0),
        },
        Size::Finite(d) => {
            let (inv_s, x, y, _) = rpm_terms(d.ln(), gamma);
            (eps.m2 * inv_s + 2.0 * x) / (eps.m2 * inv_s + x + y)
        }
    })
}

/// `(E[ε⁴] − E[ε²]² + 8D^{−γ}E[ε²] + 8D^{1−2γ}) / (E[ε²] + D^{1−γ} + D^{−γ})²`.
pub fn rpm_gec_var(size: Size, gamma: f64, eps: EpsMoments) -> Result<f64> {
    check_gamma(gamma)?;
    let kurt = eps.m4 - eps.m2 * eps.m2;
    Ok(match size {
        Size::Limit => match branch(gamma, 1.0) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Greater => kurt / (eps.m2 * eps.m2),
            std::cmp::Ordering::Equal => kurt / ((eps.m2 + 1.0) * (eps.m2 + 1.0)),
        },
        Size::Finite(d) => {
            let ln_d = d.ln();
            let (inv_s, x, y, ls) = rpm_terms(ln_d, gamma);
            let z = ((1.0 - 2.0 * gamma) * ln_d - 2.0 * ls).exp();
            let num = kurt * inv_s * inv_s + 8.0 * y * eps.m2 * inv_s + 8.0 * z;
            let den = eps.m2 * inv_s + x + y;
            num / (den * den)
        }
    })
}

pub fn rpm_gec_moments(size: Size, gamma: f64, eps: EpsMoments) -> Result<AnalyticMoments> {
    Ok(AnalyticMoments {
        mean: rpm_gec_mean(size, gamma, eps)?,
        variance: rpm_gec_var(size, gamma, eps)?,
        size,
    })
}

/// `sinhc(kζ ln α)`, exactly 1 at the removable singularity.
pub fn sinhc_f(k_zeta: f64, alpha: f64) -> f64 {
    let x = k_zeta * alpha.ln();
    if x == 0.0 {
        1.0
    } else if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 * (1.0 + x2 / 20.0)
    } else {
        x.sinh() / x
    }
}

/// `Σ_{k<L} α^{2k} = (1 − α^{2L})/(1 − α²)`, equal to `L` at `α = 1`.
pub fn geometric_sum(alpha: f64, l: f64) -> f64 {
    power_sum(alpha.ln() * 2.0, l)
}

/// `Σ_{k<L} e^{k·lr}`.
fn power_sum(lr: f64, l: f64) -> f64 {
    if lr == 0.0 {
        l
    } else {
        (l * lr).exp_m1() / lr.exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QsmAnalyticTerms {
    pub f2: f64,
    pub f4: f64,
    pub geometric_sum: f64,
}

pub fn qsm_terms(p: &QsmParams, l: f64) -> QsmAnalyticTerms {
    QsmAnalyticTerms {
        f2: sinhc_f(2.0 * p.zeta, p.alpha),
        f4: sinhc_f(4.0 * p.zeta, p.alpha),
        geometric_sum: geometric_sum(p.alpha, l),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZetaMode {
    /// Keep the jitter factors `F(kζ, α)`.
    ExactF,
    /// Set `F ≈ 1`, the small-jitter approximation.
    #[default]
    SmallZeta,
}

fn check_qsm(p: &QsmParams, size: Size) -> Result<()> {
    if !(p.alpha > 0.0 && p.alpha.is_finite()) {
        return Err(GecError::invalid(format!("alpha must be > 0, got {}", p.alpha)));
    }
    if p.grain == 0 {
        return Err(GecError::invalid("grain needs at least one spin"));
    }
    if let Size::Finite(l) = size {
        if !(l >= 0.0 && l.fract() == 0.0) {
            return Err(GecError::invalid(format!(
                "outer spin count must be a non-negative integer, got {l}"
            )));
        }
    }
    Ok(())
}

/// Field variance scale `q = h² + W²/3`.
fn field_q(p: &QsmParams) -> f64 {
    p.h * p.h + p.w * p.w / 3.0
}

/// Coupling sum `Σ_ℓ E[α^{2u_ℓ}]` divided by the geometric sum `G`, together
/// with `1/G` (zero when `G` overflows). `None` when there are no outer spins.
fn coupling_over_g(p: &QsmParams, l: f64, mode: ZetaMode) -> Option<(f64, f64)> {
    if l == 0.0 {
        return None;
    }
    let g = geometric_sum(p.alpha, l);
    let inv_g = if g.is_finite() { 1.0 / g } else { 0.0 };
    let f2 = match mode {
        ZetaMode::ExactF => sinhc_f(2.0 * p.zeta, p.alpha),
        ZetaMode::SmallZeta => 1.0,
    };
    Some((f2 + (1.0 - f2) * inv_g, inv_g))
}

/// Mean GEC over basis states and disorder, with numerator and spectral width
/// averaged separately.
pub fn qsm_gec_mean(p: &QsmParams, size: Size, mode: ZetaMode) -> Result<f64> {
    check_qsm(p, size)?;
    let q = field_q(p);
    let g2 = p.g0 * p.g0;
    let dn = (p.grain as f64).exp2();
    let grain = 2.0 * dn / (dn + 1.0);
    Ok(match size {
        Size::Limit => match branch(p.alpha, 1.0) {
            std::cmp::Ordering::Greater => 2.0,
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => 1.0 + g2 / (g2 + 4.0 * q),
        },
        Size::Finite(l) => match coupling_over_g(p, l, mode) {
            None => grain,
            Some((s, inv_g)) => {
                let field = l * q / 4.0;
                (grain * inv_g + g2 / 8.0 * s + field * inv_g) / (inv_g + g2 / 16.0 * s + field * inv_g)
            }
        },
    })
}

/// Numerator of the small-jitter variance; independent of `α`.
pub fn qsm_var_numerator(p: &QsmParams, l: f64) -> f64 {
    let q = field_q(p);
    let (h2, w2) = (p.h * p.h, p.w * p.w);
    let dn = (p.grain as f64).exp2();
    8.0 * dn / ((dn + 1.0) * (dn + 1.0))
        + l / 16.0 * (h2 * h2 + 2.0 * h2 * w2 + w2 * w2 / 5.0)
        + (2.0 * l * l - 3.0 * l) / 16.0 * q * q
        + 2.0 * l / (dn + 1.0) * q
}

/// Variance of the GEC in the small-jitter approximation.
pub fn qsm_gec_var(p: &QsmParams, size: Size) -> Result<f64> {
    qsm_var(p, size, ZetaMode::SmallZeta)
}

/// Variance keeping the jitter factors: adds the disorder spread of the
/// couplings, `g0⁴/64 (F4 − F2²) Σ_{ℓ≥2} α^{4(ℓ−1)}`, and uses the jittered
/// coupling sum in the width.
pub fn qsm_gec_var_exact_f(p: &QsmParams, size: Size) -> Result<f64> {
    qsm_var(p, size, ZetaMode::ExactF)
}

fn qsm_var(p: &QsmParams, size: Size, mode: ZetaMode) -> Result<f64> {
    check_qsm(p, size)?;
    let q = field_q(p);
    let g2 = p.g0 * p.g0;
    let (f2, f4) = match mode {
        ZetaMode::ExactF => (sinhc_f(2.0 * p.zeta, p.alpha), sinhc_f(4.0 * p.zeta, p.alpha)),
        ZetaMode::SmallZeta => (1.0, 1.0),
    };
    let spread = f4 - f2 * f2;
    Ok(match size {
        Size::Limit => match branch(p.alpha, 1.0) {
            std::cmp::Ordering::Greater => {
                let a2 = p.alpha * p.alpha;
                4.0 * spread / (f2 * f2) * (a2 - 1.0) / (a2 + 1.0)
            }
            std::cmp::Ordering::Less => 2.0,
            std::cmp::Ordering::Equal => 2.0 * q * q / ((g2 / 4.0 + q) * (g2 / 4.0 + q)),
        },
        Size::Finite(l) => {
            let num = qsm_var_numerator(p, l);
            let Some((s, inv_g)) = coupling_over_g(p, l, mode) else {
                return Ok(num);
            };
            // Everything is divided by G² so large α·L stays finite.
            let g4_minus_1 = power_sum(4.0 * p.alpha.ln(), l) - 1.0;
            let extra = g2 * g2 / 64.0 * spread * g4_minus_1 * inv_g * inv_g;
            let den = inv_g + g2 / 16.0 * s + l * q / 4.0 * inv_g;
            let extra = if extra.is_finite() {
                extra
            } else {
                g2 * g2 / 64.0 * spread * limit_g4_over_g2(p.alpha)
            };
            (num * inv_g * inv_g + extra) / (den * den)
        }
    })
}

/// `lim_{L→∞} Σα^{4k} / (Σα^{2k})²` for `α > 1`.
fn limit_g4_over_g2(alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    (a2 - 1.0) * (a2 - 1.0) / (a2 * a2 - 1.0)
}

pub fn qsm_gec_moments(p: &QsmParams, size: Size, mode: ZetaMode) -> Result<AnalyticMoments> {
    let variance = match mode {
        ZetaMode::SmallZeta => qsm_gec_var(p, size)?,
        ZetaMode::ExactF => qsm_gec_var_exact_f(p, size)?,
    };
    Ok(AnalyticMoments {
        mean: qsm_gec_mean(p, size, mode)?,
        variance,
        size,
    })
}

/// A sampled curve `param → value` belonging to one system size.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub size: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub param_star: f64,
    /// Sizes of the two curves compared.
    pub pair: (f64, f64),
    /// Grid interval bracketing the crossing.
    pub bracket: (f64, f64),
}

/// Locates the single sign change of `a − b` on a shared ascending grid by
/// linear interpolation.
pub fn crossing_point(a: &Curve, b: &Curve) -> Result<CrossingPoint> {
    if a.points.len() != b.points.len() {
        return Err(GecError::DimensionMismatch {
            expected: a.points.len(),
            got: b.points.len(),
        });
    }
    if a.points.len() < 2 {
        return Err(GecError::EmptyInput("crossing needs at least two grid points"));
    }
    for (k, (pa, pb)) in a.points.iter().zip(&b.points).enumerate() {
        if (pa.0 - pb.0).abs() > 1e-12 * pa.0.abs().max(1.0) {
            return Err(GecError::invalid(format!("curves use different grids at index {k}")));
        }
        if k > 0 && !(pa.0 > a.points[k - 1].0) {
            return Err(GecError::Unsorted(k));
        }
    }
    let xs: Vec<f64> = a.points.iter().map(|p| p.0).collect();
    let diff: Vec<f64> = a.points.iter().zip(&b.points).map(|(p, q)| p.1 - q.1).collect();
    let nonzero: Vec<usize> = (0..diff.len()).filter(|&k| diff[k] != 0.0).collect();

    let mut found = Vec::new();
    for w in nonzero.windows(2) {
        let (i, j) = (w[0], w[1]);
        if diff[i].signum() == diff[j].signum() {
            continue;
        }
        let star = if j == i + 1 {
            xs[i] + (xs[j] - xs[i]) * diff[i] / (diff[i] - diff[j])
        } else {
            // Exact zeros in between: take the middle of the zero run.
            (xs[i + 1] + xs[j - 1]) / 2.0
        };
        found.push((star, (xs[i], xs[j])));
    }
    match found.as_slice() {
        [] => Err(GecError::NoCrossing),
        [(star, bracket)] => Ok(CrossingPoint {
            param_star: *star,
            pair: (a.size, b.size),
            bracket: *bracket,
        }),
        many => Err(GecError::MultipleCrossings(many.iter().map(|m| m.1).collect())),
    }
}

/// Ordinary least squares `y = c0 + c1 x`; returns `(c0, c1, rms residual)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if sxx <= 1e-24 * scale || !sxx.is_finite() {
        return Err(GecError::DegenerateFit("all abscissae are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let c1 = sxy / sxx;
    let c0 = my - c1 * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - c0 - c1 * a).powi(2)).sum::<f64>() / n).sqrt();
    Ok((c0, c1, rms))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub v_inf: f64,
    /// Coefficient of `1/L`.
    pub slope: f64,
    pub residual: f64,
}

/// Fits `V*(L) = V∞ + c/L` to `(L, V*)` pairs.
pub fn extrapolate_crossing(points: &[(f64, f64)]) -> Result<Extrapolation> {
    if points.len() < 3 {
        return Err(GecError::DegenerateFit(format!(
            "need at least 3 sizes, got {}",
            points.len()
        )));
    }
    let x: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (v_inf, slope, residual) = linear_fit(&x, &y)?;
    Ok(Extrapolation { v_inf, slope, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub nu: f64,
    pub prefactor: f64,
    /// RMS residual in natural-log units.
    pub residual: f64,
}

/// Fits `deviation = A·size^{−ν}` on log–log axes.
pub fn fit_scaling_exponent(sizes: &[f64], deviations: &[f64]) -> Result<ScalingFit> {
    if sizes.len() != deviations.len() {
        return Err(GecError::DimensionMismatch {
            expected: sizes.len(),
            got: deviations.len(),
        });
    }
    if sizes.len() < 3 {
        return Err(GecError::DegenerateFit(format!(
            "need at least 3 sizes, got {}",
            sizes.len()
        )));
    }
    if let Some(k) = deviations.iter().position(|&d| !(d > 0.0)) {
        return Err(GecError::invalid(format!(
            "deviation at index {k} is not positive ({})",
            deviations[k]
        )));
    }
    if let Some(k) = sizes.iter().position(|&s| !(s > 0.0)) {
        return Err(GecError::invalid(format!("size at index {k} is not positive")));
    }
    let lx: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    let (c0, c1, residual) = linear_fit(&lx, &ly)?;
    Ok(ScalingFit {
        nu: -c1,
        prefactor: c0.exp(),
        residual,
    })
}

/// One row of an analytic parameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: &'static str,
    pub size: Size,
    pub param: f64,
    pub mean: f64,
    pub var: f64,
    /// `finite`, or the phase reached in the thermodynamic limit.
    pub branch: &'static str,
}

fn limit_branch(param: f64) -> &'static str {
    match branch(param, 1.0) {
        std::cmp::Ordering::Less => "below-critical",
        std::cmp::Ordering::Equal => "critical",
        std::cmp::Ordering::Greater => "above-critical",
    }
}

pub fn rpm_sweep(sizes: &[Size], gammas: &[f64], eps: EpsMoments) -> Result<Vec<SweepRow>> {
    if gammas.is_empty() || sizes.is_empty() {
        return Err(GecError::EmptyInput("sweep grid"));
    }
    let mut rows = Vec::with_capacity(sizes.len() * gammas.len());
    for &size in sizes {
        for &g in gammas {
            let m = rpm_gec_moments(size, g, eps)?;
            rows.push(SweepRow {
                model: "rpm",
                size,
                param: g,
                mean: m.mean,
                var: m.variance,
                branch: if size.is_limit() { limit_branch(g) } else { "finite" },
            });
        }
    }
    Ok(rows)
}

pub fn qsm_sweep(p: &QsmParams, sizes: &[Size], alphas: &[f64], mode: ZetaMode) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() || sizes.is_empty() {
        return Err(GecError::EmptyInput("sweep grid"));
    }
    let mut rows = Vec::with_capacity(sizes.len() * alphas.len());
    for &size in sizes {
        for &a in alphas {
            let pa = QsmParams { alpha: a, ..*p };
            let m = qsm_gec_moments(&pa, size, mode)?;
            rows.push(SweepRow {
                model: "qsm",
                size,
                param: a,
                mean: m.mean,
                var: m.variance,
                branch: if size.is_limit() { limit_branch(a) } else { "finite" },
            });
        }
    }
    Ok(rows)
}
