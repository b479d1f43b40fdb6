//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a flat `Float64Array` of curve values on a
//! uniform grid. The plain-Rust versions (`*_curve`) carry the logic and are
//! what the tests exercise; the `#[wasm_bindgen]` wrappers only convert errors.

use gec_core::analytic::{qsm_gec_var, rpm_gec_var, Size};
use gec_core::models::{EpsMoments, QsmParams};
use gec_core::tlg_moments::{moment_set, particles_at, tlg_gec, Ensemble};
use wasm_bindgen::prelude::*;

/// Largest ladder the demo will handle; the engine is linear in `L`.
pub const MAX_TLG_SITES: usize = 400;

/// `points` values from `start` to `stop` inclusive.
pub fn grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>, String> {
    let valid = points >= 2 && start.is_finite() && stop.is_finite() && stop > start;
    if !valid {
        return Err(format!(
            "need at least 2 points on a finite range, got {points} on [{start}, {stop}]"
        ));
    }
    let h = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|k| start + k as f64 * h).collect())
}

/// A non-finite or negative size stands for the thermodynamic limit.
fn size(x: f64) -> Size {
    if x.is_finite() && x >= 0.0 {
        Size::Finite(x)
    } else {
        Size::Limit
    }
}

/// `var(GEC)` of the Rosenzweig-Porter model at `D = 2^log2_dim` versus γ.
pub fn rpm_curve(log2_dim: f64, gammas: &[f64]) -> Result<Vec<f64>, String> {
    let s = if log2_dim.is_finite() {
        Size::pow2(log2_dim)
    } else {
        Size::Limit
    };
    gammas
        .iter()
        .map(|&g| rpm_gec_var(s, g, EpsMoments::STANDARD_NORMAL).map_err(|e| e.to_string()))
        .collect()
}

/// `var(GEC)` of the quantum sun model with `outer` spins versus α, default
/// couplings and the given grain size and jitter.
pub fn qsm_curve(outer: f64, grain: usize, zeta: f64, alphas: &[f64]) -> Result<Vec<f64>, String> {
    let base = QsmParams {
        grain,
        zeta,
        ..QsmParams::default()
    };
    alphas
        .iter()
        .map(|&a| qsm_gec_var(&QsmParams { alpha: a, ..base }, size(outer)).map_err(|e| e.to_string()))
        .collect()
}

/// `var(GEC)` of the half-filled lattice gas ladder of `sites` sites versus `V/t0`.
pub fn tlg_curve(sites: usize, vs: &[f64]) -> Result<Vec<f64>, String> {
    if sites > MAX_TLG_SITES {
        return Err(format!("the demo stops at {MAX_TLG_SITES} sites"));
    }
    let n = particles_at(sites, 1, 2).ok_or_else(|| format!("{sites} sites cannot be half filled"))?;
    let m = moment_set(sites, n, Ensemble::Canonical).map_err(|e| e.to_string())?;
    vs.iter()
        .map(|&v| tlg_gec(&m, v, 1.0).map(|r| r.1).map_err(|e| e.to_string()))
        .collect()
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rpm_var_curve(log2_dim: f64, start: f64, stop: f64, points: usize) -> Result<Vec<f64>, JsError> {
    js(grid(start, stop, points).and_then(|g| rpm_curve(log2_dim, &g)))
}

#[wasm_bindgen]
pub fn qsm_var_curve(
    outer: f64,
    grain: usize,
    zeta: f64,
    start: f64,
    stop: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    js(grid(start, stop, points).and_then(|g| qsm_curve(outer, grain, zeta, &g)))
}

#[wasm_bindgen]
pub fn tlg_var_curve(sites: usize, start: f64, stop: f64, points: usize) -> Result<Vec<f64>, JsError> {
    js(grid(start, stop, points).and_then(|g| tlg_curve(sites, &g)))
}

#[wasm_bindgen]
pub fn grid_points(start: f64, stop: f64, points: usize) -> Result<Vec<f64>, JsError> {
    js(grid(start, stop, points))
}
