//! Eigen-analysis of the generator.
//!
//! Detailed balance makes `A` similar to a symmetric matrix
//! `S = P^{-1/2} A P^{1/2}`, `P = diag(pi)` with `pi` the Gibbs vector. The
//! stationary eigenvector of `S` is known in closed form, `u = sqrt(pi)`,
//! so it is deflated before the dense solve: `S - sigma u u^T` moves the zero
//! eigenvalue to `-sigma`, below the rest of the spectrum, and the largest
//! remaining eigenvalue is `alpha_2`.
//!
//! Right and left eigenvectors of `A` follow as `R_k = sqrt(pi) * s_k` and
//! `L_k = s_k / sqrt(pi)` (elementwise), which gives `R_1 = pi`, `L_1 = 1`
//! and `<L_k|R_l> = delta_kl`.

use faer::{Mat, Side};

use crate::equilibrium::log_partition;
use crate::error::{Error, Result};
use crate::generator::{symmetrize, Generator};

/// Threshold (in units of `v`) below which `|alpha_2|` counts as zero.
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    alphas: Vec<f64>,
    vectors: Mat<f64>,
    sqrt_pi: Vec<f64>,
    inv_sqrt_pi: Vec<f64>,
    v: f64,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    /// Eigenvalues in descending order; `alphas()[0]` is exactly zero.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bare_rate(&self) -> f64 {
        self.v
    }

    /// Orthonormal eigenvectors of the symmetrized generator, one per column.
    pub fn symmetric_vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    pub fn right_vector(&self, k: usize) -> Vec<f64> {
        self.vectors
            .col(k)
            .iter()
            .zip(&self.sqrt_pi)
            .map(|(s, w)| s * w)
            .collect()
    }

    pub fn left_vector(&self, k: usize) -> Vec<f64> {
        self.vectors
            .col(k)
            .iter()
            .zip(&self.inv_sqrt_pi)
            .map(|(s, w)| s * w)
            .collect()
    }

    /// All right eigenvectors as columns.
    pub fn right(&self) -> Mat<f64> {
        let n = self.n();
        Mat::from_fn(n, n, |i, k| self.vectors[(i, k)] * self.sqrt_pi[i])
    }

    /// All left eigenvectors as columns.
    pub fn left(&self) -> Mat<f64> {
        let n = self.n();
        Mat::from_fn(n, n, |i, k| self.vectors[(i, k)] * self.inv_sqrt_pi[i])
    }

    /// `1 / |alpha_2|`, or `None` for a single level.
    pub fn tau_rlx(&self) -> Option<f64> {
        self.alphas.get(1).map(|a| 1.0 / a.abs())
    }

    /// Expansion coefficients `c_k = <L_k|p>`.
    pub fn coefficients(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: p.len(),
            });
        }
        let scaled: Vec<f64> = p
            .iter()
            .zip(&self.inv_sqrt_pi)
            .map(|(x, w)| x * w)
            .collect();
        Ok((0..self.n())
            .map(|k| {
                self.vectors
                    .col(k)
                    .iter()
                    .zip(&scaled)
                    .map(|(s, x)| s * x)
                    .sum()
            })
            .collect())
    }

    /// `sum_k exp(alpha_k t) c_k R_k`.
    pub fn evolve(&self, coefficients: &[f64], t: f64) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (k, (&c, &alpha)) in coefficients.iter().zip(&self.alphas).enumerate() {
            let w = c * (alpha * t).exp();
            if w == 0.0 {
                continue;
            }
            for (o, s) in out.iter_mut().zip(self.vectors.col(k).iter()) {
                *o += w * s;
            }
        }
        for (o, w) in out.iter_mut().zip(&self.sqrt_pi) {
            *o *= w;
        }
        out
    }

    /// Component `level` of [`evolve`](Self::evolve), in O(N).
    pub fn evolve_component(&self, coefficients: &[f64], level: usize, t: f64) -> f64 {
        let row = self.vectors.row(level);
        let acc: f64 = coefficients
            .iter()
            .zip(&self.alphas)
            .zip(row.iter())
            .map(|((c, a), s)| c * (a * t).exp() * s)
            .sum();
        acc * self.sqrt_pi[level]
    }

    /// `sum_k alpha_k R_k L_k^T`.
    pub fn reconstruct(&self) -> Mat<f64> {
        let n = self.n();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            for i in 0..n {
                scaled[(i, k)] *= self.alphas[k];
            }
        }
        let core = &scaled * self.vectors.transpose();
        Mat::from_fn(n, n, |i, j| {
            self.sqrt_pi[i] * core[(i, j)] * self.inv_sqrt_pi[j]
        })
    }
}

/// Shifted, symmetrized generator with the stationary mode pushed to `-sigma`.
struct Deflated {
    matrix: Mat<f64>,
    sqrt_pi: Vec<f64>,
    inv_sqrt_pi: Vec<f64>,
    sigma: f64,
}

fn deflate(generator: &Generator) -> Result<Deflated> {
    let n = generator.n();
    let spectrum = generator.spectrum();
    let mut matrix = symmetrize(generator, spectrum.beta())?;
    let log_z = log_partition(spectrum);
    let log_pi: Vec<f64> = spectrum.scaled().iter().map(|e| -e - log_z).collect();
    let sqrt_pi: Vec<f64> = log_pi.iter().map(|x| (0.5 * x).exp()).collect();
    let inv_sqrt_pi: Vec<f64> = log_pi.iter().map(|x| (-0.5 * x).exp()).collect();
    if inv_sqrt_pi.iter().any(|x| !x.is_finite()) || sqrt_pi.contains(&0.0) {
        return Err(Error::NonFinite(
            "Gibbs weights (level populations underflow)",
        ));
    }
    // Gershgorin bound on the spectral radius
    let radius = (0..n)
        .map(|k| matrix.col(k).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let sigma = 2.0 * radius + generator.bare_rate();
    for j in 0..n {
        for i in 0..n {
            matrix[(i, j)] -= sigma * sqrt_pi[i] * sqrt_pi[j];
        }
    }
    Ok(Deflated {
        matrix,
        sqrt_pi,
        inv_sqrt_pi,
        sigma,
    })
}

fn eig_failure(matrix: &Mat<f64>) -> Error {
    let mut max_abs = 0.0f64;
    for j in 0..matrix.ncols() {
        for i in 0..matrix.nrows() {
            max_abs = max_abs.max(matrix[(i, j)].abs());
        }
    }
    Error::Eigensolve {
        n: matrix.nrows(),
        max_abs,
    }
}

/// Full decomposition of a detailed-balance generator.
pub fn decompose(generator: &Generator) -> Result<SpectralDecomposition> {
    let n = generator.n();
    let v = generator.bare_rate();
    let Deflated {
        matrix,
        sqrt_pi,
        inv_sqrt_pi,
        ..
    } = deflate(generator)?;
    if n == 1 {
        return Ok(SpectralDecomposition {
            alphas: vec![0.0],
            vectors: Mat::from_fn(1, 1, |_, _| 1.0),
            sqrt_pi,
            inv_sqrt_pi,
            v,
        });
    }
    let evd = matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| eig_failure(&matrix))?;
    let values = evd.S().column_vector();
    let u = evd.U();

    // ascending order from the solver: index 0 is the deflated stationary
    // mode, the rest are alpha_N..alpha_2
    let mut order: Vec<usize> = (1..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    let mut alphas = Vec::with_capacity(n);
    alphas.push(0.0);
    alphas.extend(order.iter().map(|&i| values[i]));
    let vectors = Mat::from_fn(n, n, |i, k| {
        if k == 0 {
            sqrt_pi[i]
        } else {
            u[(i, order[k - 1])]
        }
    });

    Ok(SpectralDecomposition {
        alphas,
        vectors,
        sqrt_pi,
        inv_sqrt_pi,
        v,
    })
}

/// All eigenvalues, descending, without eigenvectors.
pub fn eigenvalues(generator: &Generator) -> Result<Vec<f64>> {
    let n = generator.n();
    let deflated = deflate(generator)?;
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let mut values = deflated
        .matrix
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| eig_failure(&deflated.matrix))?;
    debug_assert!((values[0] + deflated.sigma).abs() <= 1e-6 * deflated.sigma);
    values.remove(0);
    values.sort_by(|a, b| b.total_cmp(a));
    values.insert(0, 0.0);
    Ok(values)
}

/// `tau_rlx = 1 / |alpha_2|` from a full decomposition.
pub fn relaxation_time(decomposition: &SpectralDecomposition) -> Result<f64> {
    let alpha2 = *decomposition.alphas().get(1).ok_or(Error::GapUndefined)?;
    check_gap(alpha2, decomposition.bare_rate())
}

/// `tau_rlx` from an eigenvalues-only solve; the cheap path used by scans.
pub fn relaxation_time_of(generator: &Generator) -> Result<f64> {
    let values = eigenvalues(generator)?;
    let alpha2 = *values.get(1).ok_or(Error::GapUndefined)?;
    check_gap(alpha2, generator.bare_rate())
}

fn check_gap(alpha2: f64, v: f64) -> Result<f64> {
    if alpha2 > -GAP_FLOOR * v {
        return Err(Error::GapClosed(alpha2.abs()));
    }
    Ok(1.0 / alpha2.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_generator, glauber_rates};
    use crate::spectrum::{build_spectrum, degenerate_spectrum, ModelParams};

    fn generator(p: ModelParams) -> Generator {
        let s = build_spectrum(&p).unwrap();
        build_generator(&glauber_rates(&s, p.v).unwrap())
    }

    #[test]
    fn single_level() {
        let g = generator(ModelParams::new(1, 1.0, 2.0, 1.0, 1));
        let d = decompose(&g).unwrap();
        assert_eq!(d.alphas(), &[0.0]);
        assert_eq!(relaxation_time(&d), Err(Error::GapUndefined));
        assert_eq!(eigenvalues(&g).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_level_rate_sum() {
        let g = generator(ModelParams::new(2, 0.3, 0.9, 1.4, 1).with_rate(2.5));
        let d = decompose(&g).unwrap();
        let want = 1.0 / (g.get(0, 1) + g.get(1, 0));
        assert!((relaxation_time(&d).unwrap() - want).abs() < 1e-13 * want);
        assert!((relaxation_time_of(&g).unwrap() - want).abs() < 1e-13 * want);
    }

    #[test]
    fn stationary_pair_is_gibbs_and_ones() {
        let g = generator(ModelParams::from_products(40, 1.2, 2.0, 40));
        let d = decompose(&g).unwrap();
        let gibbs = crate::equilibrium::gibbs_state(g.spectrum());
        for (r, p) in d.right_vector(0).iter().zip(&gibbs) {
            assert!((r - p).abs() < 1e-14);
        }
        for l in d.left_vector(0) {
            assert!((l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_gap_closed_form() {
        for &(n, beps) in &[(10usize, -2.0f64), (100, -5.0)] {
            let s = degenerate_spectrum(n, beps, 1.0).unwrap();
            let g = build_generator(&glauber_rates(&s, 1.0).unwrap());
            let nf = n as f64;
            let rate = (1.0 / nf) * (1.0 + (nf - 1.0) * beps.exp()) / (1.0 + beps.exp());
            let d = decompose(&g).unwrap();
            assert!((d.alphas()[1].abs() - rate).abs() < 1e-12 * rate);
        }
    }

    #[test]
    fn coefficient_length_checked() {
        let g = generator(ModelParams::new(3, 0.5, 1.0, 1.0, 2));
        let d = decompose(&g).unwrap();
        assert!(matches!(
            d.coefficients(&[1.0]),
            Err(Error::Dimension {
                expected: 3,
                got: 1
            })
        ));
    }
}
