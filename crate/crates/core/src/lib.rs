//! Dissipative search of an unstructured database as thermal relaxation of an
//! N-level Markov system.
//!
//! The marked element is the ground state of a weakly non-degenerate
//! spectrum; Glauber rates with a `1/max(n_k, n_l)` prefactor keep every
//! level's total escape rate bounded while coupling all levels. The crate
//! builds that model, its generator and equilibrium state, propagates the
//! master equation, and measures how the relaxation time scales with N.

pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod generator;
pub mod spectral;
pub mod spectrum;

pub use dynamics::{
    gillespie_sample, hitting_time, integrate_dopri, propagate, GillespieEstimate, Hitting,
    PopulationVector, Start, Trajectory,
};
pub use equilibrium::{
    dominance_check, equilibrium_report, error_probability, gibbs_state, ground_state_probability,
    EquilibriumReport, ErrorProbability,
};
pub use error::{Error, Result};
pub use experiments::{
    fit_log, fit_log_hitting, fit_powerlaw, hitting_curves, hitting_scan, log_grid, tau_scan,
    CurveScan, EllChoice, FitModel, FitReport, ModelSpec, ScanResult, ScanRow,
};
pub use generator::{
    build_generator, gamma_profile, glauber_rates, symmetrize, Generator, RateMatrix,
};
pub use spectral::{decompose, relaxation_time, relaxation_time_of, SpectralDecomposition};
pub use spectrum::{
    build_spectrum, degenerate_spectrum, spectral_gap, Diagnostic, EnergySpectrum, ModelParams,
};

/// Glauber generator for a logarithmic model in one call.
pub fn model_generator(params: &ModelParams) -> Result<(RateMatrix, Generator)> {
    let spectrum = build_spectrum(params)?;
    let rates = glauber_rates(&spectrum, params.v)?;
    let generator = build_generator(&rates);
    Ok((rates, generator))
}
