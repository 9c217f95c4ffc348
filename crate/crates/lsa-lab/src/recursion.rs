//! The stochastic approximation recursion, its error decomposition, and
//! exact mean dynamics.
//!
//! The iteration is `θ_k = θ_{k-1} − α(A(Z_k) θ_{k-1} − b(Z_k))` and the
//! averaged estimate is `θ̄_n = (2/n) Σ_{k=n/2}^{n-1} θ_k` (n even; the first
//! half is burn-in, the final iterate is excluded). The error splits exactly,
//! path by path, as
//!
//! `θ_n − θ* = θ̃tr_n + J⁰_n + H⁰_n` with `H⁰_n = J¹_n + H¹_n`,
//!
//! where the transient term carries the initial error through the random
//! products and the J/H terms solve linear recursions driven by the noise.

use nalgebra::{DMatrix, DVector};

use crate::chains::PathSample;
use crate::problem::{Instance, NoiseProcess};
use crate::rng::{CounterRng, NOISE_STREAM};
use crate::spectral::spectral_norm;
use crate::{Error, Result};

/// Draws the additive Gaussian part of the sub-Gaussian noise variant from
/// its own substream of the trajectory seed, so every routine replays the
/// same perturbations for the same path.
struct AdditiveDraws {
    rng: CounterRng,
    sqrt: DMatrix<f64>,
}

impl AdditiveDraws {
    fn for_path(inst: &Instance, path: &PathSample) -> Option<Self> {
        inst.derived.additive_sigma_sqrt.as_ref().map(|sqrt| AdditiveDraws {
            rng: CounterRng::from_split(path.seed, NOISE_STREAM),
            sqrt: sqrt.clone(),
        })
    }

    fn next(&mut self) -> DVector<f64> {
        let g = DVector::from_fn(self.sqrt.nrows(), |_, _| self.rng.next_normal());
        &self.sqrt * g
    }
}

fn check_run_args(inst: &Instance, alpha: f64, n: usize, theta0: &DVector<f64>, path: &PathSample) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("step size must be positive and finite, got {alpha}")));
    }
    if n < 2 || n % 2 != 0 {
        return Err(Error::Domain(format!("horizon must be even and >= 2, got {n}")));
    }
    if theta0.len() != inst.d() {
        return Err(Error::Dimension("theta0 length != d".into()));
    }
    if path.states.len() < n {
        return Err(Error::Dimension(format!(
            "path has {} states, need {n}",
            path.states.len()
        )));
    }
    if path.states[..n].iter().any(|&z| z >= inst.s()) {
        return Err(Error::Dimension("path contains a state outside the model".into()));
    }
    Ok(())
}

/// Result of one trajectory of the raw recursion.
#[derive(Debug, Clone)]
pub struct LsaRun {
    pub theta_final: DVector<f64>,
    pub theta_bar: DVector<f64>,
    /// `θ_0 … θ_n` when requested; otherwise the run is O(d) in memory.
    pub iterates: Option<Vec<DVector<f64>>>,
}

/// Runs `n` steps along `path` from `theta0`.
pub fn run_lsa(
    inst: &Instance,
    alpha: f64,
    n: usize,
    theta0: &DVector<f64>,
    path: &PathSample,
    keep_iterates: bool,
) -> Result<LsaRun> {
    check_run_args(inst, alpha, n, theta0, path)?;
    let mut additive = AdditiveDraws::for_path(inst, path);

    let mut theta = theta0.clone();
    let mut sum_tail = DVector::<f64>::zeros(inst.d());
    let mut iterates = keep_iterates.then(|| {
        let mut v = Vec::with_capacity(n + 1);
        v.push(theta.clone());
        v
    });
    let n0 = n / 2;
    for k in 1..=n {
        let z = path.states[k - 1];
        if k - 1 >= n0 {
            sum_tail += &theta; // θ_{k-1} enters the average for k-1 in [n/2, n)
        }
        let mut b = inst.model.b_table[z].clone();
        if let Some(ad) = additive.as_mut() {
            b += ad.next();
        }
        theta -= (&inst.model.a_table[z] * &theta - b) * alpha;
        if let Some(v) = iterates.as_mut() {
            v.push(theta.clone());
        }
    }
    Ok(LsaRun {
        theta_final: theta,
        theta_bar: sum_tail / (n - n0) as f64,
        iterates,
    })
}

/// Per-step history of the decomposition components.
#[derive(Debug, Clone)]
pub struct DecompositionHistory {
    pub theta_err: Vec<DVector<f64>>,
    pub transient: Vec<DVector<f64>>,
    pub j0: Vec<DVector<f64>>,
    pub h0: Vec<DVector<f64>>,
    pub j1: Vec<DVector<f64>>,
    pub h1: Vec<DVector<f64>>,
}

/// Final decomposition components and the worst identity residuals seen
/// along the trajectory (relative to `1 + ‖θ_k − θ*‖`).
#[derive(Debug, Clone)]
pub struct DecompositionTrace {
    pub theta_err: DVector<f64>,
    /// `θ̄_n − θ*`
    pub pr_err: DVector<f64>,
    pub transient: DVector<f64>,
    pub j0: DVector<f64>,
    pub h0: DVector<f64>,
    pub j1: DVector<f64>,
    pub h1: DVector<f64>,
    pub max_residual_sum: f64,
    pub max_residual_split: f64,
    pub history: Option<DecompositionHistory>,
}

/// Runs the recursion together with all decomposition components in one pass.
pub fn run_decomposition(
    inst: &Instance,
    alpha: f64,
    n: usize,
    theta0: &DVector<f64>,
    path: &PathSample,
    keep_history: bool,
) -> Result<DecompositionTrace> {
    check_run_args(inst, alpha, n, theta0, path)?;
    let d = inst.d();
    let dv = &inst.derived;
    let mut additive = AdditiveDraws::for_path(inst, path);

    let mut theta_err = theta0 - &dv.theta_star;
    let mut transient = theta_err.clone();
    let mut j0 = DVector::<f64>::zeros(d);
    let mut h0 = DVector::<f64>::zeros(d);
    let mut j1 = DVector::<f64>::zeros(d);
    let mut h1 = DVector::<f64>::zeros(d);

    let mut history = keep_history.then(|| DecompositionHistory {
        theta_err: vec![theta_err.clone()],
        transient: vec![transient.clone()],
        j0: vec![j0.clone()],
        h0: vec![h0.clone()],
        j1: vec![j1.clone()],
        h1: vec![h1.clone()],
    });

    let mut max_residual_sum: f64 = 0.0;
    let mut max_residual_split: f64 = 0.0;
    let n0 = n / 2;
    let mut sum_tail = DVector::<f64>::zeros(d);

    for k in 1..=n {
        let z = path.states[k - 1];
        if k - 1 >= n0 {
            sum_tail += &theta_err;
        }
        let a = &inst.model.a_table[z];
        let atilde = &dv.atilde_table[z];
        let mut eps = dv.eps_table[z].clone();
        if let Some(ad) = additive.as_mut() {
            eps -= ad.next(); // b picks up +w, so the noise at θ* picks up −w
        }

        // θ_k − θ* = (I − αA(Z_k))(θ_{k-1} − θ*) − α ε_k
        let prev_err = theta_err.clone();
        theta_err = &prev_err - (a * &prev_err + &eps) * alpha;
        transient = &transient - (a * &transient) * alpha;

        let j0_prev = j0.clone();
        j0 = &j0 - (&dv.abar * &j0 + &eps) * alpha;
        h0 = &h0 - (a * &h0 + atilde * &j0_prev) * alpha;
        let j1_prev = j1.clone();
        j1 = &j1 - (&dv.abar * &j1 + atilde * &j0_prev) * alpha;
        h1 = &h1 - (a * &h1 + atilde * &j1_prev) * alpha;

        let scale = 1.0 + theta_err.norm();
        max_residual_sum =
            max_residual_sum.max((&theta_err - &transient - &j0 - &h0).norm() / scale);
        max_residual_split = max_residual_split.max((&h0 - &j1 - &h1).norm() / scale);

        if let Some(h) = history.as_mut() {
            h.theta_err.push(theta_err.clone());
            h.transient.push(transient.clone());
            h.j0.push(j0.clone());
            h.h0.push(h0.clone());
            h.j1.push(j1.clone());
            h.h1.push(h1.clone());
        }
    }

    Ok(DecompositionTrace {
        theta_err,
        pr_err: sum_tail / (n - n0) as f64,
        transient,
        j0,
        h0,
        j1,
        h1,
        max_residual_sum,
        max_residual_split,
        history,
    })
}

/// Both sides of the summation-by-parts identity for the averaged error.
#[derive(Debug, Clone)]
pub struct PrIdentityCheck {
    /// `Ā (θ̄_n − θ*)`
    pub lhs: DVector<f64>,
    /// `{α(n−n₀)}^{-1}(θ_{n₀} − θ_n) − (n−n₀)^{-1} Σ_t e(θ_t, Z_{t+1})`
    pub rhs: DVector<f64>,
    pub residual: f64,
}

/// Verifies `Ā(θ̄_n − θ*) = {α(n−n₀)}^{-1}(θ_{n₀} − θ_n) − (n−n₀)^{-1} Σ_{t=n₀}^{n-1} e(θ_t, Z_{t+1})`
/// with `e(θ, z) = ε(z) + Ã(z)(θ − θ*)` evaluated on the realized noise.
pub fn check_pr_identity(
    inst: &Instance,
    alpha: f64,
    n: usize,
    theta0: &DVector<f64>,
    path: &PathSample,
) -> Result<PrIdentityCheck> {
    check_run_args(inst, alpha, n, theta0, path)?;
    let d = inst.d();
    let dv = &inst.derived;
    let mut additive = AdditiveDraws::for_path(inst, path);

    let n0 = n / 2;
    let mut theta = theta0.clone();
    let mut theta_n0 = DVector::<f64>::zeros(d);
    let mut sum_tail = DVector::<f64>::zeros(d);
    let mut sum_e = DVector::<f64>::zeros(d);

    for t in 0..n {
        if t == n0 {
            theta_n0 = theta.clone();
        }
        let z = path.states[t]; // Z_{t+1}
        let w = additive.as_mut().map(|ad| ad.next());
        if t >= n0 {
            sum_tail += &theta;
            let mut e = &dv.eps_table[z] + &dv.atilde_table[z] * (&theta - &dv.theta_star);
            if let Some(wv) = &w {
                e -= wv;
            }
            sum_e += e;
        }
        let mut b = inst.model.b_table[z].clone();
        if let Some(wv) = w {
            b += wv;
        }
        theta -= (&inst.model.a_table[z] * &theta - b) * alpha;
    }

    let m = (n - n0) as f64;
    let theta_bar = sum_tail / m;
    let lhs = &dv.abar * (&theta_bar - &dv.theta_star);
    let rhs = (theta_n0 - &theta) / (alpha * m) - sum_e / m;
    let residual = (&lhs - &rhs).norm() / (1.0 + lhs.norm());
    Ok(PrIdentityCheck { lhs, rhs, residual })
}

/// `‖Π_{i=m}^{n} (I − α A(Z_i))‖` along the path; the empty product (m > n) is `I`.
pub fn product_norm(inst: &Instance, alpha: f64, m: usize, n: usize, path: &PathSample) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("product index m must be >= 1".into()));
    }
    if m > n {
        return Ok(1.0);
    }
    if path.states.len() < n {
        return Err(Error::Dimension(format!(
            "path has {} states, need {n}",
            path.states.len()
        )));
    }
    let d = inst.d();
    let eye = DMatrix::<f64>::identity(d, d);
    let mut prod = eye.clone();
    for i in m..=n {
        let z = path.states[i - 1];
        if z >= inst.s() {
            return Err(Error::Dimension("path contains a state outside the model".into()));
        }
        prod = (&eye - &inst.model.a_table[z] * alpha) * prod;
    }
    Ok(spectral_norm(&prod))
}

/// Exact first moments of the iterates, obtained without simulation.
#[derive(Debug, Clone)]
pub struct ExactMeans {
    /// `E[θ_k]` for `k = 0..=n`.
    pub mean_theta: Vec<DVector<f64>>,
    pub mean_theta_bar: DVector<f64>,
    /// `Ā (E[θ̄_n] − θ*)`
    pub bias_abar: DVector<f64>,
}

/// Propagates `E[θ_k]` exactly. Independent noise admits the scalar-state
/// shortcut `E[θ_k] = (I−αĀ)E[θ_{k-1}] + α b̄`; Markov noise requires the
/// joint law of `(θ_k, Z_k)`, tracked through `m_k(z) = E[θ_k 1{Z_k = z}]`:
///
/// `m_k(z) = (I − αA(z)) Σ_{z'} P(z', z) m_{k-1}(z') + α b(z) μ_k(z)`.
pub fn exact_mean_dynamics(
    inst: &Instance,
    alpha: f64,
    n: usize,
    theta0: &DVector<f64>,
) -> Result<ExactMeans> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("step size must be positive and finite, got {alpha}")));
    }
    if n < 2 || n % 2 != 0 {
        return Err(Error::Domain(format!("horizon must be even and >= 2, got {n}")));
    }
    if theta0.len() != inst.d() {
        return Err(Error::Dimension("theta0 length != d".into()));
    }
    let d = inst.d();
    let s = inst.s();
    let dv = &inst.derived;

    let mut mean_theta = Vec::with_capacity(n + 1);
    mean_theta.push(theta0.clone());

    match &inst.model.noise {
        NoiseProcess::Iid { .. } | NoiseProcess::SubGaussianIid { .. } => {
            let mut mean = theta0.clone();
            for _ in 1..=n {
                mean = &mean - (&dv.abar * &mean - &dv.bbar) * alpha;
                mean_theta.push(mean.clone());
            }
        }
        NoiseProcess::Markov { p, xi, .. } => {
            // m_k(z) columns; μ_k the state marginal
            let mut m: Vec<DVector<f64>> = (0..s).map(|z| theta0 * xi[z]).collect();
            let mut mu = xi.clone();
            for k in 1..=n {
                let (m_new, mu_new) = if k == 1 {
                    let mu1 = xi.clone();
                    let m1: Vec<DVector<f64>> = (0..s)
                        .map(|z| {
                            ((theta0 - (&inst.model.a_table[z] * theta0) * alpha)
                                + &inst.model.b_table[z] * alpha)
                                * xi[z]
                        })
                        .collect();
                    (m1, mu1)
                } else {
                    let mu_next = p.transpose() * &mu;
                    let m_next: Vec<DVector<f64>> = (0..s)
                        .map(|z| {
                            let mut flow = DVector::<f64>::zeros(d);
                            for zp in 0..s {
                                flow += &m[zp] * p[(zp, z)];
                            }
                            let moved = &flow - (&inst.model.a_table[z] * &flow) * alpha;
                            moved + &inst.model.b_table[z] * (alpha * mu_next[z])
                        })
                        .collect();
                    (m_next, mu_next)
                };
                m = m_new;
                mu = mu_new;
                mean_theta.push(m.iter().fold(DVector::zeros(d), |acc, v| acc + v));
            }
        }
    }

    let n0 = n / 2;
    let mean_theta_bar = mean_theta[n0..n]
        .iter()
        .fold(DVector::<f64>::zeros(d), |acc, v| acc + v)
        / (n - n0) as f64;
    let bias_abar = &dv.abar * (&mean_theta_bar - &dv.theta_star);
    Ok(ExactMeans { mean_theta, mean_theta_bar, bias_abar })
}

/// Exact `‖E[Ã(Z_{t+1}) J⁰_t]‖` for `t = 0..n`, via the augmented recursion
/// `g_k(z) = (I − αĀ) Σ_{z'} P(z', z) g_{k-1}(z') − α ε(z) μ_k(z)` for
/// `g_k(z) = E[J⁰_k 1{Z_k = z}]`.
pub fn exact_mean_cross_term(inst: &Instance, alpha: f64, n: usize) -> Result<Vec<f64>> {
    let NoiseProcess::Markov { p, xi, .. } = &inst.model.noise else {
        return Err(Error::Domain("cross-term dynamics require Markov noise".into()));
    };
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("step size must be positive and finite, got {alpha}")));
    }
    let d = inst.d();
    let s = inst.s();
    let dv = &inst.derived;

    // expected Ã one step ahead of each state
    let lookahead: Vec<DMatrix<f64>> = (0..s)
        .map(|z| {
            let mut acc = DMatrix::<f64>::zeros(d, d);
            for zp in 0..s {
                acc += &dv.atilde_table[zp] * p[(z, zp)];
            }
            acc
        })
        .collect();

    let mut g: Vec<DVector<f64>> = vec![DVector::zeros(d); s];
    let mut mu = xi.clone();
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0); // J⁰_0 = 0

    for k in 1..=n {
        let (g_new, mu_new) = if k == 1 {
            let g1: Vec<DVector<f64>> =
                (0..s).map(|z| &dv.eps_table[z] * (-alpha * xi[z])).collect();
            (g1, xi.clone())
        } else {
            let mu_next = p.transpose() * &mu;
            let g_next: Vec<DVector<f64>> = (0..s)
                .map(|z| {
                    let mut flow = DVector::<f64>::zeros(d);
                    for zp in 0..s {
                        flow += &g[zp] * p[(zp, z)];
                    }
                    let moved = &flow - (&dv.abar * &flow) * alpha;
                    moved - &dv.eps_table[z] * (alpha * mu_next[z])
                })
                .collect();
            (g_next, mu_next)
        };
        g = g_new;
        mu = mu_new;
        let cross: DVector<f64> = (0..s).map(|z| &lookahead[z] * &g[z]).sum();
        out.push(cross.norm());
    }
    Ok(out)
}
