//! Finite-state Markov chain analytics: stationary distributions, Dobrushin
//! contraction coefficients, minimal mixing times, fundamental matrices,
//! path sampling, and the long-run noise covariance.

use nalgebra::{DMatrix, DVector};

use crate::problem::{DerivedInstance, NoiseProcess};
use crate::rng::{split_stream, CounterRng, PATH_STREAM};
use crate::{Error, Result};

/// Summary analytics for one transition kernel.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub pi: DVector<f64>,
    /// Smallest `k` with `δ(P^k) ≤ 1/4`.
    pub t_mix_min: u64,
    /// `Z = (I − P + 1πᵀ)^{-1}`
    pub fundamental: DMatrix<f64>,
}

/// One sampled state trajectory `z_1, …, z_n` (0-indexed states).
#[derive(Debug, Clone)]
pub struct PathSample {
    pub states: Vec<usize>,
    pub seed: u64,
    /// Law of the first state.
    pub initial: DVector<f64>,
}

fn check_kernel(p: &DMatrix<f64>) -> Result<usize> {
    let s = p.nrows();
    if p.ncols() != s || s == 0 {
        return Err(Error::Dimension("transition matrix must be square and nonempty".into()));
    }
    for i in 0..s {
        let row = p.row(i);
        if row.iter().any(|&x| !x.is_finite() || x < -1e-12) {
            return Err(Error::Domain(format!("transition row {i} has invalid entries")));
        }
        if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("transition row {i} does not sum to 1")));
        }
    }
    Ok(s)
}

fn matrix_power(p: &DMatrix<f64>, mut k: u64) -> DMatrix<f64> {
    let mut result = DMatrix::identity(p.nrows(), p.nrows());
    let mut base = p.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Unique stationary distribution of `p`, or an error when none or several exist.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let s = check_kernel(p)?;
    let m = p.transpose() - DMatrix::<f64>::identity(s, s);

    // unit-eigenvalue multiplicity via the null space of Pᵀ − I
    let sv = m.clone().svd(false, false).singular_values;
    let tol = 1e-9 * sv.max().max(1.0);
    let nullity = sv.iter().filter(|&&x| x < tol).count() + (s - sv.len());
    if nullity != 1 {
        return Err(Error::Assumption(format!(
            "stationary distribution is not unique ({nullity} unit eigenvalues)"
        )));
    }

    // replace the last balance equation by the normalization constraint
    let mut system = m;
    for j in 0..s {
        system[(s - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(s);
    rhs[s - 1] = 1.0;
    let mut pi = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("stationary solve failed".into()))?;

    if pi.iter().any(|&x| x < -1e-10) {
        return Err(Error::Numerical("stationary solve produced negative mass".into()));
    }
    pi.iter_mut().for_each(|x| *x = x.max(0.0));
    pi /= pi.sum();
    let residual = (p.transpose() * &pi - &pi).amax();
    if residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "stationary residual {residual:.3e} too large"
        )));
    }
    Ok(pi)
}

/// `δ(P^k) = max_{z,z'} (1/2) Σ_y |P^k(z,y) − P^k(z',y)|`.
pub fn dobrushin_coefficient(p: &DMatrix<f64>, k: u64) -> Result<f64> {
    let s = check_kernel(p)?;
    if k < 1 {
        return Err(Error::Domain("dobrushin coefficient needs k >= 1".into()));
    }
    let q = matrix_power(p, k);
    let mut delta: f64 = 0.0;
    for i in 0..s {
        for j in (i + 1)..s {
            let tv: f64 = (0..s).map(|y| (q[(i, y)] - q[(j, y)]).abs()).sum();
            delta = delta.max(0.5 * tv);
        }
    }
    Ok(delta)
}

/// First `k ≤ horizon` with `δ(P^k) ≤ 1/4`.
pub fn minimal_mixing_time(p: &DMatrix<f64>, horizon: u64) -> Result<u64> {
    let s = check_kernel(p)?;
    let mut q = p.clone();
    for k in 1..=horizon {
        let mut delta: f64 = 0.0;
        for i in 0..s {
            for j in (i + 1)..s {
                let tv: f64 = (0..s).map(|y| (q[(i, y)] - q[(j, y)]).abs()).sum();
                delta = delta.max(0.5 * tv);
            }
        }
        if delta <= 0.25 {
            return Ok(k);
        }
        q *= p;
    }
    Err(Error::Assumption(format!(
        "no k <= {horizon} with delta(P^k) <= 1/4; chain may not be uniformly ergodic"
    )))
}

/// Fundamental matrix `Z = (I − P + 1πᵀ)^{-1}`.
pub fn fundamental_matrix(p: &DMatrix<f64>, pi: &DVector<f64>) -> Result<DMatrix<f64>> {
    let s = check_kernel(p)?;
    if pi.len() != s {
        return Err(Error::Dimension("pi length != S".into()));
    }
    let one_pi = DVector::from_element(s, 1.0) * pi.transpose();
    (DMatrix::identity(s, s) - p + one_pi)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("fundamental matrix is singular".into()))
}

pub fn analyze_chain(p: &DMatrix<f64>, horizon: u64) -> Result<ChainAnalysis> {
    let pi = stationary_distribution(p)?;
    let t_mix_min = minimal_mixing_time(p, horizon)?;
    let fundamental = fundamental_matrix(p, &pi)?;
    Ok(ChainAnalysis { pi, t_mix_min, fundamental })
}

/// Draws `z_1, …, z_n` for the given noise process. Identical arguments give
/// identical paths; the additive Gaussian part of the sub-Gaussian variant is
/// drawn elsewhere from its own substream of the same seed.
pub fn sample_path(noise: &NoiseProcess, n: usize, seed: u64) -> Result<PathSample> {
    let mut rng = CounterRng::from_key(split_stream(seed, PATH_STREAM));
    let mut states = Vec::with_capacity(n);
    let initial = match noise {
        NoiseProcess::Iid { weights } | NoiseProcess::SubGaussianIid { weights, .. } => {
            let cum = crate::rng::cumulative(weights.as_slice());
            for _ in 0..n {
                states.push(rng.next_index(&cum));
            }
            weights.clone()
        }
        NoiseProcess::Markov { p, xi, .. } => {
            let s = check_kernel(p)?;
            if xi.len() != s {
                return Err(Error::Dimension("xi length != S".into()));
            }
            let cum_xi = crate::rng::cumulative(xi.as_slice());
            let cum_rows: Vec<Vec<f64>> = (0..s)
                .map(|i| crate::rng::cumulative(p.row(i).transpose().as_slice()))
                .collect();
            let mut z = 0usize;
            for k in 0..n {
                z = if k == 0 {
                    rng.next_index(&cum_xi)
                } else {
                    rng.next_index(&cum_rows[z])
                };
                states.push(z);
            }
            xi.clone()
        }
    };
    Ok(PathSample { states, seed, initial })
}

/// Which reading of the long-run covariance series to use. The CLT-consistent
/// form counts the lag-0 term once; the literal form triple-counts it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeriesReading {
    #[default]
    CltConsistent,
    LiteralFromZero,
}

/// Long-run covariance of `ε(Z_k)` for a stationary chain with kernel `p`:
/// `Σ = E_π[ε₀ε₀ᵀ] + Σ_{ℓ≥1} (C_ℓ + C_ℓᵀ)`, with the cross sum evaluated in
/// closed form through the fundamental matrix.
pub fn markov_noise_covariance(
    p: &DMatrix<f64>,
    eps_table: &[DVector<f64>],
    reading: SeriesReading,
) -> Result<DMatrix<f64>> {
    let s = check_kernel(p)?;
    if eps_table.len() != s || s == 0 {
        return Err(Error::Dimension("eps table length != S".into()));
    }
    let d = eps_table[0].len();
    let pi = stationary_distribution(p)?;
    let z = fundamental_matrix(p, &pi)?;

    let mut e = DMatrix::<f64>::zeros(s, d);
    for (row, eps) in eps_table.iter().enumerate() {
        if eps.len() != d {
            return Err(Error::Dimension("ragged eps table".into()));
        }
        e.row_mut(row).copy_from(&eps.transpose());
    }
    let dpi = DMatrix::from_diagonal(&pi);
    let base = e.transpose() * &dpi * &e;
    let cross = e.transpose() * &dpi * (z - DMatrix::identity(s, s)) * &e;

    let total = match reading {
        SeriesReading::CltConsistent => &base + &cross + cross.transpose(),
        SeriesReading::LiteralFromZero => &base * 3.0 + &cross + cross.transpose(),
    };
    Ok((&total + total.transpose()) * 0.5)
}

/// Covariance entering the leading term of the averaged-iterate bounds:
/// `Σ_ε` for independent noise, the long-run covariance for Markov noise.
pub fn asymptotic_noise_covariance(
    derived: &DerivedInstance,
    noise: &NoiseProcess,
    reading: SeriesReading,
) -> Result<DMatrix<f64>> {
    match noise {
        NoiseProcess::Iid { .. } | NoiseProcess::SubGaussianIid { .. } => {
            Ok(derived.sigma_eps.clone())
        }
        NoiseProcess::Markov { p, .. } => markov_noise_covariance(p, &derived.eps_table, reading),
    }
}
