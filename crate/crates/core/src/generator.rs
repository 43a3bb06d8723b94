//! Glauber rates and the Markov generator.
//!
//! Convention: `rate(k, l)` is `v_kl`, the rate of the jump `l -> k`, so the
//! generator acts on column population vectors, `dp/dt = A p`, and every
//! column of `A` sums to zero.

use faer::Mat;

use crate::error::{Error, Result};
use crate::spectrum::EnergySpectrum;

/// Exponent beyond which the uphill rate is set to zero.
pub const SATURATION_EXPONENT: f64 = 700.0;

/// Relative pair asymmetry tolerated by [`symmetrize`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RateMatrix {
    rates: Mat<f64>,
    gammas: Vec<f64>,
    v: f64,
    saturated: usize,
    spectrum: EnergySpectrum,
}

impl RateMatrix {
    pub fn n(&self) -> usize {
        self.gammas.len()
    }

    /// `v_kl`, the rate of the jump `l -> k`.
    pub fn rate(&self, k: usize, l: usize) -> f64 {
        self.rates[(k, l)]
    }

    pub fn rates(&self) -> &Mat<f64> {
        &self.rates
    }

    /// Total escape rates `gamma_k = sum_l v_lk`.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn bare_rate(&self) -> f64 {
        self.v
    }

    /// Number of ordered pairs whose uphill rate underflowed to zero.
    pub fn saturated_pairs(&self) -> usize {
        self.saturated
    }

    pub fn spectrum(&self) -> &EnergySpectrum {
        &self.spectrum
    }

    pub fn max_gamma(&self) -> f64 {
        self.gammas.iter().copied().fold(0.0, f64::max)
    }

    /// Largest relative violation of `v_kl e^{-b e_l} = v_lk e^{-b e_k}`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let n = self.n();
        let scaled = self.spectrum.scaled();
        let ground = scaled.first().copied().unwrap_or(0.0);
        let weight: Vec<f64> = scaled.iter().map(|e| (-(e - ground)).exp()).collect();
        let mut worst = 0.0f64;
        for l in 0..n {
            for k in 0..n {
                if k == l {
                    continue;
                }
                let fwd = self.rates[(k, l)] * weight[l];
                let back = self.rates[(l, k)] * weight[k];
                let scale = fwd.abs().max(back.abs());
                if scale > 0.0 {
                    worst = worst.max((fwd - back).abs() / scale);
                }
            }
        }
        worst
    }
}

/// `1 / (1 + e^x)` without overflow.
pub(crate) fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Glauber rates `v_kl = v / max(n_k, n_l) / (1 + exp(beta (e_k - e_l)))`.
pub fn glauber_rates(spectrum: &EnergySpectrum, v: f64) -> Result<RateMatrix> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParam(format!(
            "bare rate v = {v} must be positive"
        )));
    }
    let n = spectrum.len();
    let scaled = spectrum.scaled();
    if scaled.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("spectrum"));
    }
    let counts = spectrum.level_counts();
    let mut saturated = 0;
    let rates = Mat::from_fn(n, n, |k, l| {
        if k == l {
            return 0.0;
        }
        let x = scaled[k] - scaled[l];
        let prefactor = v / counts[k].max(counts[l]) as f64;
        if x > SATURATION_EXPONENT {
            saturated += 1;
            0.0
        } else if x < -SATURATION_EXPONENT {
            prefactor
        } else {
            prefactor * fermi(x)
        }
    });
    let gammas = (0..n).map(|l| rates.col(l).iter().sum()).collect();
    Ok(RateMatrix {
        rates,
        gammas,
        v,
        saturated,
        spectrum: spectrum.clone(),
    })
}

/// The master-equation generator `A_kl = v_kl - delta_kl gamma_k`.
#[derive(Debug, Clone)]
pub struct Generator {
    matrix: Mat<f64>,
    gammas: Vec<f64>,
    v: f64,
    spectrum: EnergySpectrum,
}

impl Generator {
    pub fn n(&self) -> usize {
        self.gammas.len()
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.matrix[(k, l)]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn bare_rate(&self) -> f64 {
        self.v
    }

    pub fn spectrum(&self) -> &EnergySpectrum {
        &self.spectrum
    }

    pub fn beta(&self) -> f64 {
        self.spectrum.beta()
    }

    /// `A p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (l, &pl) in p.iter().enumerate() {
            if pl == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.matrix.col(l).iter()) {
                *o += a * pl;
            }
        }
        out
    }

    /// `max_l |sum_k A_kl| / gamma_l` (zero-escape columns compared absolutely).
    pub fn column_sum_defect(&self) -> f64 {
        (0..self.n())
            .map(|l| {
                let s: f64 = self.matrix.col(l).iter().sum();
                let g = self.gammas[l];
                if g > 0.0 {
                    s.abs() / g
                } else {
                    s.abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn build_generator(rates: &RateMatrix) -> Generator {
    let n = rates.n();
    let mut matrix = rates.rates.clone();
    for k in 0..n {
        // gamma_k is the off-diagonal column sum
        matrix[(k, k)] = -rates.gammas[k];
    }
    Generator {
        matrix,
        gammas: rates.gammas.clone(),
        v: rates.v,
        spectrum: rates.spectrum.clone(),
    }
}

/// Similarity transform `D^{1/2} A D^{-1/2}`, `D = diag(exp(beta e_k))`.
///
/// Detailed balance makes the result symmetric; the returned matrix is the
/// exact average of the two triangles once the asymmetry check has passed.
pub fn symmetrize(generator: &Generator, beta: f64) -> Result<Mat<f64>> {
    let n = generator.n();
    let energies = generator.spectrum().energies();
    let a = generator.matrix();
    let v = generator.bare_rate();
    // pairs this small only arise from saturated (underflowed) rates
    let floor = v * (-SATURATION_EXPONENT / 2.0).exp();
    let mut sym = Mat::zeros(n, n);
    for l in 0..n {
        sym[(l, l)] = a[(l, l)];
        for k in (l + 1)..n {
            let x = beta * (energies[k] - energies[l]);
            let upper = scale_entry(a[(k, l)], 0.5 * x);
            let lower = scale_entry(a[(l, k)], -0.5 * x);
            let pair = upper.abs().max(lower.abs());
            let diff = (upper - lower).abs();
            if diff > SYMMETRY_TOL * pair && pair > floor {
                return Err(Error::DetailedBalance {
                    asymmetry: diff / pair,
                    row: k,
                    col: l,
                });
            }
            let mean = 0.5 * (upper + lower);
            sym[(k, l)] = mean;
            sym[(l, k)] = mean;
        }
    }
    Ok(sym)
}

fn scale_entry(value: f64, log_factor: f64) -> f64 {
    if value == 0.0 || log_factor == 0.0 {
        value
    } else {
        value.signum() * (value.abs().ln() + log_factor).exp()
    }
}

/// `(k, gamma_k / v)` with 1-based `k`, as plotted against the level index.
pub fn gamma_profile(rates: &RateMatrix) -> Vec<(usize, f64)> {
    rates
        .gammas()
        .iter()
        .enumerate()
        .map(|(k, g)| (k + 1, g / rates.v))
        .collect()
}
