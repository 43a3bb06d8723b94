//! Browser bindings: ground-state relaxation curves, escape-rate profiles
//! and a small relaxation-time scan. All functions take the dimensionless
//! products `a beta`, `b beta` and work in units of `v = 1`.

use thermsearch::dynamics::{hitting_time_with, propagate_with};
use thermsearch::experiments::fit_log_points;
use thermsearch::{
    decompose, gamma_profile as profile, log_grid, model_generator, tau_scan as scan, EllChoice,
    Hitting, ModelParams, PopulationVector,
};
use wasm_bindgen::prelude::*;

/// Eigensolves are O(N^3) on one thread; keep the page responsive.
pub const MAX_N: usize = 1500;

fn params(n: usize, a_beta: f64, b_beta: f64, marker_last: bool) -> Result<ModelParams, String> {
    if n == 0 || n > MAX_N {
        return Err(format!("N must be in 1..={MAX_N}"));
    }
    if a_beta.is_nan() || b_beta.is_nan() || b_beta <= a_beta {
        return Err("need b*beta > a*beta".into());
    }
    let ell = if marker_last { n } else { 1 };
    let p = ModelParams::from_products(n, a_beta, b_beta, ell);
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

/// `[hitting time or NaN, p1(t_0), ..., p1(t_steps)]` on a uniform grid up
/// to `t_max`, starting from `p_k = 1/N`.
pub fn relaxation(
    n: usize,
    a_beta: f64,
    b_beta: f64,
    marker_last: bool,
    t_max: f64,
    steps: usize,
    threshold: f64,
) -> Result<Vec<f64>, String> {
    let p = params(n, a_beta, b_beta, marker_last)?;
    if !(t_max > 0.0 && t_max.is_finite()) || steps == 0 || steps > 10_000 {
        return Err("need t_max > 0 and 1 <= steps <= 10000".into());
    }
    let (_, g) = model_generator(&p).map_err(|e| e.to_string())?;
    let d = decompose(&g).map_err(|e| e.to_string())?;
    let p0 = PopulationVector::uniform(n);
    let times: Vec<f64> = (0..=steps)
        .map(|i| t_max * i as f64 / steps as f64)
        .collect();
    let traj = propagate_with(&d, &p0, &times).map_err(|e| e.to_string())?;
    let hit = match hitting_time_with(&d, &p0, threshold, t_max).map_err(|e| e.to_string())? {
        Hitting::Reached { time } => time,
        Hitting::NotReached { .. } => f64::NAN,
    };
    Ok(std::iter::once(hit)
        .chain(traj.ground_populations())
        .collect())
}

/// `gamma_k / v` for `k = 1..=N` in sorted order.
pub fn escape_rates(
    n: usize,
    a_beta: f64,
    b_beta: f64,
    marker_last: bool,
) -> Result<Vec<f64>, String> {
    let p = params(n, a_beta, b_beta, marker_last)?;
    let (rates, _) = model_generator(&p).map_err(|e| e.to_string())?;
    Ok(profile(&rates).into_iter().map(|(_, g)| g).collect())
}

/// `[slope, intercept, R^2, tau v for each N...]`; the fit entries are NaN
/// with fewer than four sizes.
pub fn relaxation_scan(
    a_beta: f64,
    b_beta: f64,
    marker_last: bool,
    ns: &[usize],
) -> Result<Vec<f64>, String> {
    if ns.is_empty() {
        return Err("no system sizes".into());
    }
    for &n in ns {
        params(n, a_beta, b_beta, marker_last)?;
    }
    let ell = if marker_last {
        EllChoice::Last
    } else {
        EllChoice::First
    };
    let result = scan(&log_grid(a_beta, b_beta, ell, ns));
    let mut taus = Vec::with_capacity(ns.len());
    for row in &result.rows {
        taus.push(
            row.tau_v
                .ok_or_else(|| format!("N = {}: {}", row.n, row.status))?,
        );
    }
    let nf: Vec<f64> = result.rows.iter().map(|r| r.n as f64).collect();
    let head = match fit_log_points(&nf, &taus) {
        Ok(f) => [f.slope, f.intercept, f.r_squared],
        Err(_) => [f64::NAN; 3],
    };
    Ok(head.into_iter().chain(taus).collect())
}

#[wasm_bindgen(js_name = relaxation)]
pub fn relaxation_js(
    n: usize,
    a_beta: f64,
    b_beta: f64,
    marker_last: bool,
    t_max: f64,
    steps: usize,
    threshold: f64,
) -> Result<Vec<f64>, JsError> {
    relaxation(n, a_beta, b_beta, marker_last, t_max, steps, threshold)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = escapeRates)]
pub fn escape_rates_js(
    n: usize,
    a_beta: f64,
    b_beta: f64,
    marker_last: bool,
) -> Result<Vec<f64>, JsError> {
    escape_rates(n, a_beta, b_beta, marker_last).map_err(|e| JsError::new(&e))
}

/// Sizes come in sorted; results are in the same order.
#[wasm_bindgen(js_name = relaxationScan)]
pub fn relaxation_scan_js(
    a_beta: f64,
    b_beta: f64,
    marker_last: bool,
    ns: Vec<u32>,
) -> Result<Vec<f64>, JsError> {
    let ns: Vec<usize> = ns.into_iter().map(|n| n as usize).collect();
    relaxation_scan(a_beta, b_beta, marker_last, &ns).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = maxN)]
pub fn max_n() -> usize {
    MAX_N
}
