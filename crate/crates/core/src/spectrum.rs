//! Level spectra for the search model.
//!
//! The marked element is a level pushed down by `b ln N` below a weakly
//! non-degenerate background `eta_k = a ln k`. Spectra are always stored in
//! ascending order so the ground state has rank 0 and the level count
//! `n_k` used by the rate rule is simply a function of the rank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The constants that fully determine one logarithmic-spectrum model.
///
/// `ell` is 1-based, like the element index it stands for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub ell: usize,
    pub v: f64,
}

impl ModelParams {
    pub fn new(n: usize, a: f64, b: f64, beta: f64, ell: usize) -> Self {
        Self {
            n,
            a,
            b,
            beta,
            ell,
            v: 1.0,
        }
    }

    /// Model expressed through the dimensionless products `a*beta`, `b*beta`
    /// (temperature set to one).
    pub fn from_products(n: usize, a_beta: f64, b_beta: f64, ell: usize) -> Self {
        Self::new(n, a_beta, b_beta, 1.0, ell)
    }

    pub fn with_rate(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_ell(mut self, ell: usize) -> Self {
        self.ell = ell;
        self
    }

    pub fn a_beta(&self) -> f64 {
        self.a * self.beta
    }

    pub fn b_beta(&self) -> f64 {
        self.b * self.beta
    }

    /// Energy of the marker term, `-b ln N`.
    pub fn marker_energy(&self) -> f64 {
        -self.b * (self.n as f64).ln()
    }

    /// `b > a`: the marked level stays the unique ground state for every `ell`.
    pub fn is_gapped(&self) -> bool {
        self.b > self.a
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParam("N must be at least 1".into()));
        }
        if self.ell == 0 || self.ell > self.n {
            return Err(Error::InvalidParam(format!(
                "sought index ell = {} outside 1..={}",
                self.ell, self.n
            )));
        }
        for (name, x) in [
            ("a", self.a),
            ("b", self.b),
            ("beta", self.beta),
            ("v", self.v),
        ] {
            if !x.is_finite() {
                return Err(Error::InvalidParam(format!("{name} is not finite")));
            }
        }
        if self.a < 0.0 {
            return Err(Error::InvalidParam("a must be nonnegative".into()));
        }
        if self.beta <= 0.0 {
            return Err(Error::InvalidParam("beta must be positive".into()));
        }
        if self.v <= 0.0 {
            return Err(Error::InvalidParam("v must be positive".into()));
        }
        Ok(())
    }
}

/// Structured warnings attached to a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    /// `b <= a`: for some `ell` the marked level is not the ground state.
    Ungapped { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpectrumSource {
    Logarithmic(ModelParams),
    /// `H1 = 0`: one level at `epsilon`, the rest at zero.
    Degenerate {
        n: usize,
        epsilon: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    energies: Vec<f64>,
    permutation: Vec<usize>,
    beta: f64,
    source: SpectrumSource,
    diagnostics: Vec<Diagnostic>,
}

impl EnergySpectrum {
    /// Ascending level energies.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn source(&self) -> &SpectrumSource {
        &self.source
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    /// `permutation()[rank]` is the 0-based pre-sort index of the level at
    /// `rank`, i.e. element `k` of the unsorted list is `ell - 1` for the
    /// marked level and `k - 1` for background level `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Undo the sort: the level list in original element order.
    pub fn unsorted(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.energies.len()];
        for (rank, &orig) in self.permutation.iter().enumerate() {
            out[orig] = self.energies[rank];
        }
        out
    }

    /// Dimensionless energies `beta * eps_k`.
    pub fn scaled(&self) -> Vec<f64> {
        self.energies.iter().map(|e| self.beta * e).collect()
    }

    /// `n_k`: number of levels with energy not larger than `eps_k`.
    /// Tied levels share the larger count.
    pub fn level_counts(&self) -> Vec<usize> {
        let n = self.energies.len();
        let mut counts = vec![0; n];
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && self.energies[end] == self.energies[start] {
                end += 1;
            }
            for c in &mut counts[start..end] {
                *c = end;
            }
            start = end;
        }
        counts
    }
}

/// Build the spectrum for a logarithmic model, rejecting ungapped parameters.
pub fn build_spectrum(params: &ModelParams) -> Result<EnergySpectrum> {
    let spectrum = build_spectrum_allowing_ungapped(params)?;
    if !spectrum.diagnostics.is_empty() {
        return Err(Error::InvalidParam(format!(
            "b = {} <= a = {}: ground state not guaranteed",
            params.b, params.a
        )));
    }
    Ok(spectrum)
}

/// Like [`build_spectrum`], but an ungapped model (`b <= a`) is returned with
/// a [`Diagnostic::Ungapped`] attached instead of rejected.
pub fn build_spectrum_allowing_ungapped(params: &ModelParams) -> Result<EnergySpectrum> {
    params.validate()?;
    let marker = params.marker_energy();
    let unsorted: Vec<f64> = (1..=params.n)
        .map(|k| {
            let eta = params.a * (k as f64).ln();
            if k == params.ell {
                eta + marker
            } else {
                eta
            }
        })
        .collect();

    let mut diagnostics = Vec::new();
    if !params.is_gapped() {
        diagnostics.push(Diagnostic::Ungapped {
            a: params.a,
            b: params.b,
        });
    }
    Ok(sorted_spectrum(
        unsorted,
        params.beta,
        SpectrumSource::Logarithmic(*params),
        diagnostics,
    ))
}

/// The `H1 = 0` baseline: level 0 at `epsilon < 0`, all others at zero.
pub fn degenerate_spectrum(n: usize, epsilon: f64, beta: f64) -> Result<EnergySpectrum> {
    if n == 0 {
        return Err(Error::InvalidParam("N must be at least 1".into()));
    }
    if !epsilon.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParam(
            "epsilon and beta must be finite".into(),
        ));
    }
    if epsilon >= 0.0 {
        return Err(Error::InvalidParam(format!(
            "epsilon = {epsilon} must be negative so the marked level is the ground state"
        )));
    }
    if beta <= 0.0 {
        return Err(Error::InvalidParam("beta must be positive".into()));
    }
    let mut unsorted = vec![0.0; n];
    unsorted[0] = epsilon;
    Ok(sorted_spectrum(
        unsorted,
        beta,
        SpectrumSource::Degenerate { n, epsilon, beta },
        Vec::new(),
    ))
}

/// Smallest excitation gap `eps_2 - eps_1`.
pub fn spectral_gap(spectrum: &EnergySpectrum) -> Result<f64> {
    match spectrum.energies() {
        [first, second, ..] => Ok(second - first),
        _ => Err(Error::GapUndefined),
    }
}

fn sorted_spectrum(
    unsorted: Vec<f64>,
    beta: f64,
    source: SpectrumSource,
    diagnostics: Vec<Diagnostic>,
) -> EnergySpectrum {
    let mut permutation: Vec<usize> = (0..unsorted.len()).collect();
    // stable: ties keep original order
    permutation.sort_by(|&i, &j| unsorted[i].total_cmp(&unsorted[j]));
    let energies = permutation.iter().map(|&i| unsorted[i]).collect();
    EnergySpectrum {
        energies,
        permutation,
        beta,
        source,
        diagnostics,
    }
}
