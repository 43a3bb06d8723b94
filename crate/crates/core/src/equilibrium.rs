//! Gibbs stationary state and the success/error probabilities of the search.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generator::fermi;
use crate::spectrum::{build_spectrum, EnergySpectrum, ModelParams};

/// `ln sum_i exp(x_i)` with max-shift. Returns `-inf` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub gibbs: Vec<f64>,
    pub p1_eq: f64,
    pub p_err: f64,
    pub dominant: bool,
    /// `ln Z` with `Z = sum_k exp(-beta e_k)`.
    pub log_z: f64,
}

/// Boltzmann distribution over the (sorted) levels.
pub fn gibbs_state(spectrum: &EnergySpectrum) -> Vec<f64> {
    let neg: Vec<f64> = spectrum.scaled().into_iter().map(|e| -e).collect();
    let log_z = log_sum_exp(neg.iter().copied());
    neg.iter().map(|x| (x - log_z).exp()).collect()
}

pub fn log_partition(spectrum: &EnergySpectrum) -> f64 {
    log_sum_exp(spectrum.scaled().into_iter().map(|e| -e))
}

/// `ln( e^{beta eta_ell} sum_{k != ell} e^{-beta eta_k} )` for `eta_k = a ln k`.
fn log_background_ratio(params: &ModelParams) -> f64 {
    let ab = params.a_beta();
    let ln_ell = (params.ell as f64).ln();
    log_sum_exp(
        (1..=params.n)
            .filter(|&k| k != params.ell)
            .map(|k| ab * (ln_ell - (k as f64).ln())),
    )
}

/// Closed-form equilibrium ground-state probability
/// `[1 + e^{beta eps} (e^{beta eta_ell} sum_k e^{-beta eta_k} - 1)]^{-1}`.
pub fn ground_state_probability(params: &ModelParams) -> Result<f64> {
    build_spectrum(params)?;
    Ok(fermi(marker_exponent(params)))
}

/// `beta eps + ln(e^{beta eta_ell} sum_k e^{-beta eta_k} - 1)`; `-inf` for N = 1.
fn marker_exponent(params: &ModelParams) -> f64 {
    params.beta * params.marker_energy() + log_background_ratio(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorProbability {
    pub exact: f64,
    /// `N^{-(b-a) beta} sum_{k=1}^N k^{-a beta}`.
    pub asymptotic: f64,
}

pub fn error_probability(params: &ModelParams) -> Result<ErrorProbability> {
    build_spectrum(params)?;
    let exact = fermi(-marker_exponent(params));
    let ln_n = (params.n as f64).ln();
    let ab = params.a_beta();
    let log_sum = log_sum_exp((1..=params.n).map(|k| -ab * (k as f64).ln()));
    let asymptotic = (-(params.b_beta() - ab) * ln_n + log_sum).exp();
    Ok(ErrorProbability { exact, asymptotic })
}

/// Ground-state dominance for large N: `b beta > max(1, a beta)`.
pub fn dominance_check(params: &ModelParams) -> bool {
    params.b_beta() > params.a_beta().max(1.0)
}

pub fn equilibrium_report(spectrum: &EnergySpectrum) -> EquilibriumReport {
    let gibbs = gibbs_state(spectrum);
    let p1_eq = gibbs.first().copied().unwrap_or(1.0);
    let p_err = gibbs.iter().skip(1).sum();
    let dominant = match spectrum.source() {
        crate::spectrum::SpectrumSource::Logarithmic(p) => dominance_check(p),
        // H1 = 0: dominance needs (N - 1) e^{beta eps} << 1
        crate::spectrum::SpectrumSource::Degenerate { n, epsilon, beta } => {
            ((*n as f64 - 1.0).ln() + beta * epsilon) < 0.0
        }
    };
    EquilibriumReport {
        gibbs,
        p1_eq,
        p_err,
        dominant,
        log_z: log_partition(spectrum),
    }
}
