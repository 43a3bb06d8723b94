//! Scaling scans over N and least-squares fits of the relaxation time.

use serde::{Deserialize, Serialize};

use crate::dynamics::{hitting_time_with, propagate_with, Hitting, PopulationVector};
use crate::equilibrium::gibbs_state;
use crate::error::{Error, Result};
use crate::generator::{build_generator, glauber_rates};
use crate::spectral::{decompose, relaxation_time, relaxation_time_of};
use crate::spectrum::{build_spectrum, degenerate_spectrum, EnergySpectrum, ModelParams};

/// System sizes of the reference sweep.
pub const DEFAULT_N_GRID: [usize; 7] = [500, 1000, 1500, 2000, 2500, 3000, 3500];

/// Wider sweep for the power-law regime, starting at the `N/100` reference.
pub const POWER_N_GRID: [usize; 9] = [100, 200, 500, 1000, 1500, 2000, 2500, 3000, 3500];

/// One point of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logarithmic(ModelParams),
    Degenerate { n: usize, beta_eps: f64, v: f64 },
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Logarithmic(p) => p.n,
            ModelSpec::Degenerate { n, .. } => *n,
        }
    }

    pub fn bare_rate(&self) -> f64 {
        match self {
            ModelSpec::Logarithmic(p) => p.v,
            ModelSpec::Degenerate { v, .. } => *v,
        }
    }

    pub fn spectrum(&self) -> Result<EnergySpectrum> {
        match self {
            ModelSpec::Logarithmic(p) => build_spectrum(p),
            ModelSpec::Degenerate { n, beta_eps, .. } => degenerate_spectrum(*n, *beta_eps, 1.0),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            ModelSpec::Logarithmic(_) => "log",
            ModelSpec::Degenerate { .. } => "degenerate",
        }
    }
}

/// Which level carries the marker as N varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllChoice {
    First,
    Middle,
    Last,
    Fixed(usize),
}

impl EllChoice {
    pub fn resolve(&self, n: usize) -> usize {
        match self {
            EllChoice::First => 1,
            EllChoice::Middle => n.div_ceil(2),
            EllChoice::Last => n,
            EllChoice::Fixed(ell) => *ell,
        }
    }
}

/// Logarithmic models at fixed `a beta`, `b beta` over a list of sizes.
pub fn log_grid(a_beta: f64, b_beta: f64, ell: EllChoice, ns: &[usize]) -> Vec<ModelSpec> {
    ns.iter()
        .map(|&n| {
            ModelSpec::Logarithmic(ModelParams::from_products(
                n,
                a_beta,
                b_beta,
                ell.resolve(n),
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub model: String,
    pub n: usize,
    pub ell: usize,
    pub a_beta: f64,
    pub b_beta: f64,
    /// `beta eps_1`, the scaled ground energy.
    pub ground_energy: f64,
    /// `tau_rlx * v`.
    pub tau_v: Option<f64>,
    pub max_gamma_v: Option<f64>,
    pub p1_eq: Option<f64>,
    pub hitting_time: Option<f64>,
    pub status: String,
}

impl ScanRow {
    fn skeleton(spec: &ModelSpec) -> Self {
        let (ell, a_beta, b_beta, ground_energy) = match spec {
            ModelSpec::Logarithmic(p) => (
                p.ell,
                p.a_beta(),
                p.b_beta(),
                p.beta * (p.a * (p.ell as f64).ln() + p.marker_energy()),
            ),
            ModelSpec::Degenerate { beta_eps, .. } => (1, 0.0, 0.0, *beta_eps),
        };
        ScanRow {
            model: spec.label().to_string(),
            n: spec.n(),
            ell,
            a_beta,
            b_beta,
            ground_energy,
            tau_v: None,
            max_gamma_v: None,
            p1_eq: None,
            hitting_time: None,
            status: "ok".into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub scan: String,
    pub threshold: Option<f64>,
    pub t_max: Option<f64>,
    pub grid: Vec<ModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub meta: ScanMeta,
}

fn map_rows<T, F>(grid: &[ModelSpec], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&ModelSpec) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        grid.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        grid.iter().map(f).collect()
    }
}

fn sort_rows(rows: &mut [ScanRow]) {
    // stable, so equal N keep grid order
    rows.sort_by_key(|r| r.n);
}

fn tau_row(spec: &ModelSpec) -> Result<ScanRow> {
    let mut row = ScanRow::skeleton(spec);
    let spectrum = spec.spectrum()?;
    let rates = glauber_rates(&spectrum, spec.bare_rate())?;
    let generator = build_generator(&rates);
    let v = spec.bare_rate();
    row.max_gamma_v = Some(rates.max_gamma() / v);
    row.p1_eq = gibbs_state(&spectrum).first().copied();
    row.tau_v = Some(relaxation_time_of(&generator)? * v);
    Ok(row)
}

/// Relaxation time for every grid point (eigenvalues only).
pub fn tau_scan(grid: &[ModelSpec]) -> ScanResult {
    let mut rows = map_rows(grid, |spec| {
        tau_row(spec).unwrap_or_else(|e| {
            let mut row = ScanRow::skeleton(spec);
            row.status = format!("error: {e}");
            row
        })
    });
    sort_rows(&mut rows);
    ScanResult {
        rows,
        meta: ScanMeta {
            scan: "tau".into(),
            threshold: None,
            t_max: None,
            grid: grid.to_vec(),
        },
    }
}

fn hitting_row(
    spec: &ModelSpec,
    threshold: f64,
    t_max: f64,
    times: &[f64],
) -> Result<(ScanRow, Vec<f64>)> {
    let mut row = ScanRow::skeleton(spec);
    let spectrum = spec.spectrum()?;
    let v = spec.bare_rate();
    let rates = glauber_rates(&spectrum, v)?;
    let generator = build_generator(&rates);
    let decomposition = decompose(&generator)?;
    row.max_gamma_v = Some(rates.max_gamma() / v);
    row.p1_eq = Some(decomposition.right_vector(0)[0]);
    row.tau_v = relaxation_time(&decomposition).ok().map(|t| t * v);
    let p0 = PopulationVector::uniform(spectrum.len());
    match hitting_time_with(&decomposition, &p0, threshold, t_max / v)? {
        Hitting::Reached { time } => row.hitting_time = Some(time * v),
        Hitting::NotReached { .. } => row.status = "not reached".into(),
    }
    let curve = if times.is_empty() {
        Vec::new()
    } else {
        let scaled: Vec<f64> = times.iter().map(|t| t / v).collect();
        propagate_with(&decomposition, &p0, &scaled)?.ground_populations()
    };
    Ok((row, curve))
}

/// A hitting-time scan that also keeps `p1(t)` for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveScan {
    pub result: ScanResult,
    /// `t v` sample points shared by all curves.
    pub times: Vec<f64>,
    /// Ground-state population at `times`, aligned with `result.rows`;
    /// empty for rows that failed.
    pub curves: Vec<Vec<f64>>,
}

/// Hitting times of `p1 >= threshold` from the uniform start plus the
/// population curves at `times`. Times, `t_max` and hitting times are in
/// units of `1/v`.
pub fn hitting_curves(grid: &[ModelSpec], threshold: f64, t_max: f64, times: &[f64]) -> CurveScan {
    let mut pairs: Vec<(ScanRow, Vec<f64>)> = map_rows(grid, |spec| {
        hitting_row(spec, threshold, t_max, times).unwrap_or_else(|e| {
            let mut row = ScanRow::skeleton(spec);
            row.status = format!("error: {e}");
            (row, Vec::new())
        })
    });
    pairs.sort_by_key(|(r, _)| r.n);
    let (rows, curves) = pairs.into_iter().unzip();
    CurveScan {
        result: ScanResult {
            rows,
            meta: ScanMeta {
                scan: "hitting".into(),
                threshold: Some(threshold),
                t_max: Some(t_max),
                grid: grid.to_vec(),
            },
        },
        times: times.to_vec(),
        curves,
    }
}

/// Hitting times of `p1 >= threshold` from the uniform start, in units of `1/v`.
pub fn hitting_scan(grid: &[ModelSpec], threshold: f64, t_max: f64) -> ScanResult {
    hitting_curves(grid, threshold, t_max, &[]).result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = slope ln N + intercept`
    Log,
    /// `ln y = slope ln(N/100) + intercept`, slope is the exponent kappa
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Largest `|y - fit|` in the fitted coordinates.
    pub max_abs_residual: f64,
    /// Largest `|y - fit| / |y|` in the original quantity.
    pub max_rel_residual: f64,
    pub n_points: usize,
}

/// Ordinary least squares `y = slope x + intercept`; returns (slope, intercept, R^2).
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= f64::EPSILON * m * mx.abs().max(1.0).powi(2) {
        return Err(Error::DegenerateFit("all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

const MIN_FIT_POINTS: usize = 4;

/// `y ~ slope ln N + intercept`.
pub fn fit_log_points(ns: &[f64], ys: &[f64]) -> Result<FitReport> {
    if ns.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "need at least {MIN_FIT_POINTS} points"
        )));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let (slope, intercept, r_squared) = ols(&xs, ys)?;
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = (y - slope * x - intercept).abs();
        max_abs = max_abs.max(r);
        max_rel = max_rel.max(r / y.abs());
    }
    Ok(FitReport {
        model: FitModel::Log,
        slope,
        intercept,
        r_squared,
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
        n_points: ns.len(),
    })
}

/// `ln y ~ kappa ln(N/100) + intercept`.
pub fn fit_power_points(ns: &[f64], ys: &[f64]) -> Result<FitReport> {
    if ns.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "need at least {MIN_FIT_POINTS} points"
        )));
    }
    if ys.iter().any(|y| *y <= 0.0) {
        return Err(Error::DegenerateFit(
            "power-law fit needs positive values".into(),
        ));
    }
    let xs: Vec<f64> = ns.iter().map(|n| (n / 100.0).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept, r_squared) = ols(&xs, &ly)?;
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for ((x, l), y) in xs.iter().zip(&ly).zip(ys) {
        let pred = slope * x + intercept;
        max_abs = max_abs.max((l - pred).abs());
        max_rel = max_rel.max((y - pred.exp()).abs() / y);
    }
    Ok(FitReport {
        model: FitModel::Power,
        slope,
        intercept,
        r_squared,
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
        n_points: ns.len(),
    })
}

/// Rows usable for a fit of `column`, checked to differ only in N (and ell).
fn fit_columns(
    result: &ScanResult,
    column: fn(&ScanRow) -> Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<&ScanRow> = result.rows.iter().filter(|r| column(r).is_some()).collect();
    if let Some(first) = rows.first() {
        let mixed = rows.iter().any(|r| {
            r.model != first.model || r.a_beta != first.a_beta || r.b_beta != first.b_beta
        });
        if mixed {
            return Err(Error::DegenerateFit("rows differ in more than N".into()));
        }
    }
    let ns = rows.iter().map(|r| r.n as f64).collect();
    let ys = rows.iter().filter_map(|r| column(r)).collect();
    Ok((ns, ys))
}

/// Least squares of `tau v` against `ln N`.
pub fn fit_log(result: &ScanResult) -> Result<FitReport> {
    let (ns, ys) = fit_columns(result, |r| r.tau_v)?;
    fit_log_points(&ns, &ys)
}

/// Least squares of `ln(tau v)` against `ln(N/100)`.
pub fn fit_powerlaw(result: &ScanResult) -> Result<FitReport> {
    let (ns, ys) = fit_columns(result, |r| r.tau_v)?;
    fit_power_points(&ns, &ys)
}

/// Least squares of the hitting time against `ln N`.
pub fn fit_log_hitting(result: &ScanResult) -> Result<FitReport> {
    let (ns, ys) = fit_columns(result, |r| r.hitting_time)?;
    fit_log_points(&ns, &ys)
}
