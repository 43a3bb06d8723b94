//! Population dynamics under the master equation `dp/dt = A p`.
//!
//! [`propagate`] is exact in time (spectral). [`integrate_dopri`] is an
//! explicit adaptive Runge-Kutta integrator kept as an independent
//! cross-check, and [`gillespie_sample`] samples the same Markov chain
//! stochastically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Generator, RateMatrix};
use crate::spectral::{decompose, SpectralDecomposition};

/// Allowed drift of `sum_k p_k` from one.
pub const NORM_TOL: f64 = 1e-10;
/// Negative populations smaller than this are roundoff and are clamped.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Relative time resolution of the hitting-time bisection.
pub const HIT_REL_TOL: f64 = 1e-10;

/// A probability vector over the sorted levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationVector(Vec<f64>);

impl PopulationVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParam("empty population vector".into()));
        }
        if p.iter().any(|x| !x.is_finite() || *x < -NEGATIVE_TOL) {
            return Err(Error::InvalidParam(
                "populations must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParam(format!(
                "populations sum to {total}, not 1"
            )));
        }
        Ok(Self(p))
    }

    /// `p_k = 1/N`.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// All weight on one (0-based) level.
    pub fn point(n: usize, level: usize) -> Self {
        let mut p = vec![0.0; n];
        p[level] = 1.0;
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ground(&self) -> f64 {
        self.0[0]
    }

    pub fn total_variation(&self, other: &[f64]) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub populations: Vec<PopulationVector>,
    /// Largest `|sum_k p_k - 1|` before renormalisation.
    pub max_norm_defect: f64,
    /// Smallest raw component before clamping.
    pub min_raw: f64,
}

impl Trajectory {
    pub fn ground_populations(&self) -> Vec<f64> {
        self.populations
            .iter()
            .map(PopulationVector::ground)
            .collect()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParam(
            "times must be finite and nonnegative".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParam("times must be nondecreasing".into()));
    }
    Ok(())
}

/// Clamp roundoff negatives, renormalise, and report what was fixed.
fn finish_snapshot(mut raw: Vec<f64>) -> (PopulationVector, f64, f64) {
    let min_raw = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = raw.iter().sum();
    for x in &mut raw {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let clamped: f64 = raw.iter().sum();
    for x in &mut raw {
        *x /= clamped;
    }
    (PopulationVector(raw), (total - 1.0).abs(), min_raw)
}

/// Exact propagation `p(t) = exp(A t) p(0)`.
pub fn propagate(
    generator: &Generator,
    p0: &PopulationVector,
    times: &[f64],
) -> Result<Trajectory> {
    let decomposition = decompose(generator)?;
    propagate_with(&decomposition, p0, times)
}

/// [`propagate`] with an existing decomposition.
pub fn propagate_with(
    decomposition: &SpectralDecomposition,
    p0: &PopulationVector,
    times: &[f64],
) -> Result<Trajectory> {
    check_times(times)?;
    let c = decomposition.coefficients(p0.as_slice())?;
    let mut out = Trajectory {
        times: times.to_vec(),
        populations: Vec::with_capacity(times.len()),
        max_norm_defect: 0.0,
        min_raw: f64::INFINITY,
    };
    for &t in times {
        if t == 0.0 {
            out.populations.push(p0.clone());
            continue;
        }
        let (p, defect, min_raw) = finish_snapshot(decomposition.evolve(&c, t));
        out.max_norm_defect = out.max_norm_defect.max(defect);
        out.min_raw = out.min_raw.min(min_raw);
        out.populations.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Hitting {
    Reached { time: f64 },
    NotReached { p1_eq: f64, p1_at_t_max: f64 },
}

impl Hitting {
    pub fn time(&self) -> Option<f64> {
        match self {
            Hitting::Reached { time } => Some(*time),
            Hitting::NotReached { .. } => None,
        }
    }
}

/// First time the ground population reaches `threshold`.
pub fn hitting_time(
    generator: &Generator,
    p0: &PopulationVector,
    threshold: f64,
    t_max: f64,
) -> Result<Hitting> {
    let decomposition = decompose(generator)?;
    hitting_time_with(&decomposition, p0, threshold, t_max)
}

/// Coarse scan on a grid of `tau_rlx / 16` followed by bisection on the exact
/// spectral propagator.
pub fn hitting_time_with(
    decomposition: &SpectralDecomposition,
    p0: &PopulationVector,
    threshold: f64,
    t_max: f64,
) -> Result<Hitting> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParam(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidParam(
            "t_max must be finite and nonnegative".into(),
        ));
    }
    if p0.ground() >= threshold {
        return Ok(Hitting::Reached { time: 0.0 });
    }
    let c = decomposition.coefficients(p0.as_slice())?;
    let p1 = |t: f64| decomposition.evolve_component(&c, 0, t);
    let p1_eq = decomposition.right_vector(0)[0];
    if p1_eq < threshold {
        return Ok(Hitting::NotReached {
            p1_eq,
            p1_at_t_max: p1(t_max),
        });
    }

    let tau = decomposition.tau_rlx().unwrap_or(t_max);
    let step = (tau / 16.0).min(t_max / 16.0).max(t_max * 1e-6);
    let mut lo = 0.0;
    loop {
        let hi = (lo + step).min(t_max);
        if p1(hi) >= threshold {
            return Ok(Hitting::Reached {
                time: bisect(&p1, threshold, lo, hi),
            });
        }
        if hi >= t_max {
            return Ok(Hitting::NotReached {
                p1_eq,
                p1_at_t_max: p1(t_max),
            });
        }
        lo = hi;
    }
}

fn bisect(f: &impl Fn(f64) -> f64, threshold: f64, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > HIT_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Closed-form ground-state relaxation for the `H1 = 0` model.
pub mod degenerate {
    /// `1/tau = (v/N) (1 + (N-1) e^{beta eps}) / (1 + e^{beta eps})`.
    pub fn relaxation_rate(n: usize, beta_eps: f64, v: f64) -> f64 {
        let nf = n as f64;
        let x = beta_eps.exp();
        v / nf * (1.0 + (nf - 1.0) * x) / (1.0 + x)
    }

    /// `[1 + (N-1) e^{beta eps}]^{-1}`.
    pub fn equilibrium(n: usize, beta_eps: f64) -> f64 {
        1.0 / (1.0 + (n as f64 - 1.0) * beta_eps.exp())
    }

    /// Solution of `dp1/dt = v / (N (1 + e^{beta eps})) - p1 / tau`.
    pub fn ground_population(n: usize, beta_eps: f64, v: f64, p1_0: f64, t: f64) -> f64 {
        let eq = equilibrium(n, beta_eps);
        eq + (p1_0 - eq) * (-relaxation_rate(n, beta_eps, v) * t).exp()
    }

    /// Inverse of [`ground_population`]; `None` if the threshold lies beyond
    /// the equilibrium value.
    pub fn hitting_time(n: usize, beta_eps: f64, v: f64, p1_0: f64, threshold: f64) -> Option<f64> {
        if p1_0 >= threshold {
            return Some(0.0);
        }
        let eq = equilibrium(n, beta_eps);
        if threshold >= eq {
            return None;
        }
        Some(((eq - p1_0) / (eq - threshold)).ln() / relaxation_rate(n, beta_eps, v))
    }
}

/// Dormand-Prince 5(4) integration of `dp/dt = A p`, sampled at `times`.
pub fn integrate_dopri(
    generator: &Generator,
    p0: &[f64],
    times: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Vec<f64>>> {
    check_times(times)?;
    if p0.len() != generator.n() {
        return Err(Error::Dimension {
            expected: generator.n(),
            got: p0.len(),
        });
    }
    // the system is autonomous, so the stage nodes c_i are not needed
    const A: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
        ],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
        &[
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // fifth-order weights are the last row of A; these are the error weights
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    let n = p0.len();
    let mut y = p0.to_vec();
    let mut t = 0.0;
    let scale = generator
        .gammas()
        .iter()
        .copied()
        .fold(generator.bare_rate(), f64::max);
    let mut h = 0.01 / scale;
    let mut out = Vec::with_capacity(times.len());
    let mut k1 = generator.apply(&y);

    for &target in times {
        while t < target {
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            let mut ks = vec![k1.clone()];
            for row in A.iter() {
                let stage: Vec<f64> = (0..n)
                    .map(|i| y[i] + step * row.iter().zip(&ks).map(|(a, k)| a * k[i]).sum::<f64>())
                    .collect();
                ks.push(generator.apply(&stage));
            }
            // ks[6] is the derivative at the fifth-order solution (FSAL)
            let y_new: Vec<f64> = (0..n)
                .map(|i| y[i] + step * A[5].iter().zip(&ks).map(|(a, k)| a * k[i]).sum::<f64>())
                .collect();
            let err = (0..n)
                .map(|i| {
                    let e = step * E.iter().zip(&ks).map(|(w, k)| w * k[i]).sum::<f64>();
                    let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>();
            let err = (err / n as f64).sqrt();
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y_new;
                k1 = ks.pop().expect("seven stages");
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !last || err > 1.0 {
                h = step * factor;
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Where Gillespie trajectories start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Start {
    /// A single 0-based level.
    Level(usize),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GillespieEstimate {
    pub times: Vec<f64>,
    /// Empirical occupation probabilities, one vector per grid time.
    pub populations: Vec<Vec<f64>>,
    /// Binomial standard errors `sqrt(p (1 - p) / n_traj)`.
    pub std_errors: Vec<Vec<f64>>,
    pub n_traj: usize,
    pub seed: u64,
}

/// Per-source cumulative jump distributions `v_lk / gamma_k`.
struct JumpTable {
    n: usize,
    cumulative: Vec<f64>,
    last_target: Vec<usize>,
}

impl JumpTable {
    fn new(rates: &RateMatrix) -> Self {
        let n = rates.n();
        let mut cumulative = vec![0.0; n * n];
        let mut last_target = vec![0; n];
        for k in 0..n {
            let gamma = rates.gammas()[k];
            let mut acc = 0.0;
            for l in 0..n {
                let r = rates.rate(l, k);
                if r > 0.0 {
                    last_target[k] = l;
                }
                acc += r;
                cumulative[k * n + l] = if gamma > 0.0 { acc / gamma } else { 0.0 };
            }
        }
        Self {
            n,
            cumulative,
            last_target,
        }
    }

    fn jump(&self, from: usize, u: f64) -> usize {
        let row = &self.cumulative[from * self.n..(from + 1) * self.n];
        row.partition_point(|&c| c <= u).min(self.last_target[from])
    }
}

fn sample_categorical(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

const CHUNK: usize = 1024;

/// Stochastic simulation of the chain with the direct method.
///
/// Trajectory `i` draws from ChaCha8 stream `i` of `seed`, so the result does
/// not depend on how trajectories are scheduled across threads.
pub fn gillespie_sample(
    rates: &RateMatrix,
    start: &Start,
    t_grid: &[f64],
    n_traj: usize,
    seed: u64,
) -> Result<GillespieEstimate> {
    let n = rates.n();
    if n_traj == 0 {
        return Err(Error::InvalidParam("n_traj must be at least 1".into()));
    }
    check_times(t_grid)?;
    let initial: Vec<f64> = match start {
        Start::Level(k) if *k < n => {
            let mut c = vec![0.0; n];
            c[*k..].iter_mut().for_each(|x| *x = 1.0);
            c
        }
        Start::Level(k) => {
            return Err(Error::InvalidParam(format!(
                "start level {k} outside 0..{n}"
            )));
        }
        Start::Distribution(p) => {
            let p = PopulationVector::new(p.clone())?;
            if p.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: p.len(),
                });
            }
            let mut acc = 0.0;
            p.as_slice()
                .iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect()
        }
    };
    let table = JumpTable::new(rates);
    let gammas = rates.gammas();
    let g = t_grid.len();

    let run_chunk = |chunk: usize| -> Vec<u64> {
        let mut counts = vec![0u64; g * n];
        let begin = chunk * CHUNK;
        let end = (begin + CHUNK).min(n_traj);
        for traj in begin..end {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(traj as u64);
            let mut state = sample_categorical(&initial, rng.random::<f64>());
            let mut t = 0.0;
            let mut gi = 0;
            while gi < g {
                let gamma = gammas[state];
                let t_next = if gamma > 0.0 {
                    t - (1.0 - rng.random::<f64>()).ln() / gamma
                } else {
                    f64::INFINITY
                };
                while gi < g && t_grid[gi] < t_next {
                    counts[gi * n + state] += 1;
                    gi += 1;
                }
                if gi == g {
                    break;
                }
                t = t_next;
                state = table.jump(state, rng.random::<f64>());
            }
        }
        counts
    };

    let n_chunks = n_traj.div_ceil(CHUNK);
    #[cfg(feature = "parallel")]
    let partial: Vec<Vec<u64>> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(run_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<Vec<u64>> = (0..n_chunks).map(run_chunk).collect();

    let mut counts = vec![0u64; g * n];
    for part in partial {
        for (c, p) in counts.iter_mut().zip(part) {
            *c += p;
        }
    }
    let total = n_traj as f64;
    let populations: Vec<Vec<f64>> = counts
        .chunks(n.max(1))
        .take(g)
        .map(|row| row.iter().map(|&c| c as f64 / total).collect())
        .collect();
    let std_errors = populations
        .iter()
        .map(|row| row.iter().map(|p| (p * (1.0 - p) / total).sqrt()).collect())
        .collect();
    Ok(GillespieEstimate {
        times: t_grid.to_vec(),
        populations,
        std_errors,
        n_traj,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_generator, glauber_rates};
    use crate::spectrum::{build_spectrum, degenerate_spectrum, ModelParams};

    fn model(p: ModelParams) -> (RateMatrix, Generator) {
        let s = build_spectrum(&p).unwrap();
        let r = glauber_rates(&s, p.v).unwrap();
        let g = build_generator(&r);
        (r, g)
    }

    #[test]
    fn population_vector_validation() {
        assert!(PopulationVector::new(vec![0.5, 0.5]).is_ok());
        assert!(PopulationVector::new(vec![0.5, 0.4]).is_err());
        assert!(PopulationVector::new(vec![1.5, -0.5]).is_err());
        assert!(PopulationVector::new(vec![]).is_err());
    }

    #[test]
    fn time_zero_is_identity() {
        let (_, g) = model(ModelParams::from_products(20, 1.2, 2.0, 20));
        let p0 = PopulationVector::uniform(20);
        let tr = propagate(&g, &p0, &[0.0]).unwrap();
        assert_eq!(tr.populations[0], p0);
    }

    #[test]
    fn gibbs_start_is_stationary() {
        let (_, g) = model(ModelParams::from_products(30, 1.2, 2.0, 7));
        let gibbs = PopulationVector::new(crate::equilibrium::gibbs_state(g.spectrum())).unwrap();
        let tr = propagate(&g, &gibbs, &[0.5, 3.0, 40.0]).unwrap();
        for p in &tr.populations {
            for (a, b) in p.as_slice().iter().zip(gibbs.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_times_and_thresholds() {
        let (_, g) = model(ModelParams::from_products(5, 1.2, 2.0, 5));
        let p0 = PopulationVector::uniform(5);
        assert!(propagate(&g, &p0, &[1.0, 0.5]).is_err());
        assert!(propagate(&g, &p0, &[-1.0]).is_err());
        assert!(hitting_time(&g, &p0, 1.0, 10.0).is_err());
        assert!(hitting_time(&g, &p0, 0.0, 10.0).is_err());
    }

    #[test]
    fn threshold_below_initial_hits_immediately() {
        let (_, g) = model(ModelParams::from_products(5, 1.2, 2.0, 5));
        let h = hitting_time(&g, &PopulationVector::uniform(5), 0.1, 10.0).unwrap();
        assert_eq!(h, Hitting::Reached { time: 0.0 });
    }

    #[test]
    fn threshold_above_equilibrium_is_not_reached() {
        let (_, g) = model(ModelParams::from_products(50, 0.3, 0.9, 50));
        let h = hitting_time(&g, &PopulationVector::uniform(50), 0.95, 100.0).unwrap();
        match h {
            Hitting::NotReached { p1_eq, .. } => assert!(p1_eq < 0.95),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_hitting_matches_inversion() {
        let (n, beps) = (20usize, -6.0);
        let s = degenerate_spectrum(n, beps, 1.0).unwrap();
        let g = build_generator(&glauber_rates(&s, 1.0).unwrap());
        let p0 = PopulationVector::uniform(n);
        let got = hitting_time(&g, &p0, 0.9, 1e3).unwrap().time().unwrap();
        let want = degenerate::hitting_time(n, beps, 1.0, 1.0 / n as f64, 0.9).unwrap();
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn single_level_chain_stays_put() {
        let (r, _) = model(ModelParams::new(1, 1.0, 2.0, 1.0, 1));
        let est = gillespie_sample(&r, &Start::Level(0), &[0.0, 1.0, 100.0], 10, 7).unwrap();
        for p in &est.populations {
            assert_eq!(p, &vec![1.0]);
        }
    }

    #[test]
    fn gillespie_is_reproducible() {
        let (r, _) = model(ModelParams::from_products(12, 1.2, 2.0, 12));
        let start = Start::Distribution(vec![1.0 / 12.0; 12]);
        let a = gillespie_sample(&r, &start, &[0.5, 2.0], 3000, 11).unwrap();
        let b = gillespie_sample(&r, &start, &[0.5, 2.0], 3000, 11).unwrap();
        assert_eq!(a, b);
        let c = gillespie_sample(&r, &start, &[0.5, 2.0], 3000, 12).unwrap();
        assert_ne!(a.populations, c.populations);
    }

    #[test]
    fn gillespie_rejects_bad_start() {
        let (r, _) = model(ModelParams::from_products(4, 1.2, 2.0, 4));
        assert!(gillespie_sample(&r, &Start::Level(4), &[1.0], 10, 0).is_err());
        assert!(gillespie_sample(&r, &Start::Distribution(vec![1.0]), &[1.0], 10, 0).is_err());
        assert!(gillespie_sample(&r, &Start::Level(0), &[1.0], 0, 0).is_err());
    }
}
