//! Monte Carlo estimation: p-th moments over trajectory ensembles, empirical
//! matrix-product stability, and a batch-means covariance cross-check.
//!
//! Every trajectory owns the substream `split_stream(split_stream(master, n), i)`,
//! so an ensemble is a pure function of `(instance, config, master_seed)` no
//! matter how many worker threads run it: parallel simulation collects by
//! index and all reductions are sequential in index order.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::chains::sample_path;
use crate::problem::{Instance, NoiseProcess};
use crate::recursion::{product_norm, run_decomposition, run_lsa};
use crate::rng::{split_stream, CounterRng};
use crate::spectral::{iid_stability_constants, markov_stability_constants};
use crate::{Error, Result};

/// Default ceiling on Σ R·n·d² elementary updates per ensemble call.
pub const DEFAULT_BUDGET: f64 = 5e10;
/// Bootstrap replicates for every confidence interval.
pub const BOOTSTRAP_REPLICATES: usize = 400;

const BOOT_STREAM: u64 = 0xB007;

/// Observable whose p-th moment an ensemble estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// `θ_n − θ*`
    ThetaErr,
    /// `θ̄_n − θ*`
    PrErr,
    /// `Ā(θ̄_n − θ*)`
    AbarPrErr,
    J0,
    J1,
    H0,
    H1,
    /// transient component `θ̃tr_n`
    TrTerm,
    /// `‖Π_{i=1}^n (I − αA(Z_i))‖`
    ProductNorm,
}

impl Quantity {
    pub fn id(self) -> &'static str {
        match self {
            Quantity::ThetaErr => "theta_err",
            Quantity::PrErr => "pr_err",
            Quantity::AbarPrErr => "abar_pr_err",
            Quantity::J0 => "j0",
            Quantity::J1 => "j1",
            Quantity::H0 => "h0",
            Quantity::H1 => "h1",
            Quantity::TrTerm => "tr_term",
            Quantity::ProductNorm => "phi_prod",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "theta_err" => Quantity::ThetaErr,
            "pr_err" => Quantity::PrErr,
            "abar_pr_err" => Quantity::AbarPrErr,
            "j0" => Quantity::J0,
            "j1" => Quantity::J1,
            "h0" => Quantity::H0,
            "h1" => Quantity::H1,
            "tr_term" => Quantity::TrTerm,
            "phi_prod" => Quantity::ProductNorm,
            other => return Err(Error::Config(format!("unknown quantity '{other}'"))),
        })
    }

    fn needs_decomposition(self) -> bool {
        matches!(
            self,
            Quantity::J0 | Quantity::J1 | Quantity::H0 | Quantity::H1 | Quantity::TrTerm
        )
    }
}

/// One estimated moment.
#[derive(Debug, Clone)]
pub struct MomentRow {
    pub quantity: Quantity,
    pub n: usize,
    pub p: f64,
    /// `E^{1/p} ‖·‖^p` estimate
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub r: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
}

/// Pairwise (cascade) summation: error grows like O(log n) rather than O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        // Neumaier compensation at the leaves
        let mut sum = 0.0;
        let mut comp = 0.0;
        for &x in xs {
            let t = sum + x;
            comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
        return sum + comp;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `((1/R) Σ ‖v_i‖^p)^{1/p}` over the sample.
pub fn pth_moment(samples: &[DVector<f64>], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("pth_moment of an empty sample".into()));
    }
    if !p.is_finite() || p < 1.0 {
        return Err(Error::Domain(format!("moment order must be finite and >= 1, got {p}")));
    }
    let norms: Vec<f64> = samples.iter().map(|v| v.norm()).collect();
    Ok(moment_of_norms(&norms, p))
}

fn moment_of_norms(norms: &[f64], p: f64) -> f64 {
    let pows: Vec<f64> = norms.iter().map(|x| x.powf(p)).collect();
    (pairwise_sum(&pows) / pows.len() as f64).powf(1.0 / p)
}

/// Percentile bootstrap CI for the p-th moment of `norms`, clamped to
/// contain the point estimate.
fn bootstrap_ci(norms: &[f64], p: f64, estimate: f64, key: u64) -> (f64, f64) {
    let r = norms.len();
    let pows: Vec<f64> = norms.iter().map(|x| x.powf(p)).collect();
    let mut rng = CounterRng::from_key(key);
    let mut stats = Vec::with_capacity(BOOTSTRAP_REPLICATES);
    let mut resample = vec![0.0; r];
    for _ in 0..BOOTSTRAP_REPLICATES {
        for slot in resample.iter_mut() {
            let idx = ((rng.next_f64() * r as f64) as usize).min(r - 1);
            *slot = pows[idx];
        }
        stats.push((pairwise_sum(&resample) / r as f64).powf(1.0 / p));
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let lo_idx = (0.025 * BOOTSTRAP_REPLICATES as f64) as usize;
    let hi_idx = ((0.975 * BOOTSTRAP_REPLICATES as f64) as usize).min(BOOTSTRAP_REPLICATES - 1);
    (stats[lo_idx].min(estimate), stats[hi_idx].max(estimate))
}

/// Configuration of one ensemble run.
#[derive(Debug, Clone)]
pub struct EnsembleSpec<'a> {
    pub inst: &'a Instance,
    pub alpha: f64,
    pub n_grid: &'a [usize],
    pub p_grid: &'a [f64],
    pub r: usize,
    pub master_seed: u64,
    pub quantities: &'a [Quantity],
    pub theta0: DVector<f64>,
    /// Update-count ceiling; `None` uses [`DEFAULT_BUDGET`].
    pub budget: Option<f64>,
}

fn check_budget(n_grid: &[usize], r: usize, d: usize, budget: Option<f64>) -> Result<()> {
    let limit = budget.unwrap_or(DEFAULT_BUDGET);
    let cost: f64 = n_grid
        .iter()
        .map(|&n| r as f64 * n as f64 * (d * d) as f64)
        .sum();
    if cost > limit {
        return Err(Error::Budget(format!(
            "ensemble needs {cost:.3e} updates, budget is {limit:.3e}"
        )));
    }
    Ok(())
}

/// Simulates `R` independent trajectories per grid point and estimates the
/// requested moments with bootstrap CIs. Bit-identical output for identical
/// inputs, independent of the rayon thread count.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<MomentTable> {
    let inst = spec.inst;
    if spec.r < 1 {
        return Err(Error::Domain("ensemble needs R >= 1".into()));
    }
    if spec.quantities.is_empty() {
        return Err(Error::Domain("no quantities requested".into()));
    }
    for &n in spec.n_grid {
        if n < 2 || n % 2 != 0 {
            return Err(Error::Domain(format!("grid horizon must be even and >= 2, got {n}")));
        }
    }
    check_budget(spec.n_grid, spec.r, inst.d(), spec.budget)?;

    let need_decomp = spec.quantities.iter().any(|q| q.needs_decomposition());
    if spec.quantities.contains(&Quantity::ProductNorm) {
        return Err(Error::Config(
            "use empirical_stability for product norms".into(),
        ));
    }

    let mut table = MomentTable::default();
    for &n in spec.n_grid {
        let key_n = split_stream(spec.master_seed, n as u64);
        let per_traj: Vec<Vec<f64>> = (0..spec.r)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let seed_i = split_stream(key_n, i as u64);
                let path = sample_path(&inst.model.noise, n, seed_i)?;
                let mut out = Vec::with_capacity(spec.quantities.len());
                if need_decomp {
                    let trace =
                        run_decomposition(inst, spec.alpha, n, &spec.theta0, &path, false)?;
                    for q in spec.quantities {
                        out.push(match q {
                            Quantity::ThetaErr => trace.theta_err.norm(),
                            Quantity::PrErr => trace.pr_err.norm(),
                            Quantity::AbarPrErr => (&inst.derived.abar * &trace.pr_err).norm(),
                            Quantity::J0 => trace.j0.norm(),
                            Quantity::J1 => trace.j1.norm(),
                            Quantity::H0 => trace.h0.norm(),
                            Quantity::H1 => trace.h1.norm(),
                            Quantity::TrTerm => trace.transient.norm(),
                            Quantity::ProductNorm => unreachable!(),
                        });
                    }
                } else {
                    let run = run_lsa(inst, spec.alpha, n, &spec.theta0, &path, false)?;
                    let pr_err = &run.theta_bar - &inst.derived.theta_star;
                    for q in spec.quantities {
                        out.push(match q {
                            Quantity::ThetaErr => {
                                (&run.theta_final - &inst.derived.theta_star).norm()
                            }
                            Quantity::PrErr => pr_err.norm(),
                            Quantity::AbarPrErr => (&inst.derived.abar * &pr_err).norm(),
                            _ => unreachable!(),
                        });
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;

        let boot_base = split_stream(key_n, BOOT_STREAM);
        for (qi, &q) in spec.quantities.iter().enumerate() {
            let norms: Vec<f64> = per_traj.iter().map(|t| t[qi]).collect();
            for (pi, &p) in spec.p_grid.iter().enumerate() {
                if !p.is_finite() || p < 1.0 {
                    return Err(Error::Domain(format!("moment order must be >= 1, got {p}")));
                }
                let estimate = moment_of_norms(&norms, p);
                let (ci_low, ci_high) = bootstrap_ci(
                    &norms,
                    p,
                    estimate,
                    split_stream(boot_base, (qi * 1024 + pi) as u64),
                );
                table.rows.push(MomentRow {
                    quantity: q,
                    n,
                    p,
                    estimate,
                    ci_low,
                    ci_high,
                    r: spec.r,
                    master_seed: spec.master_seed,
                });
            }
        }
    }
    Ok(table)
}

/// Estimates `E^{1/p} ‖Φ_{1:n}‖^p` over `R` paths per grid point, after
/// checking the step size against the regime's stability threshold.
pub fn empirical_stability(
    inst: &Instance,
    alpha: f64,
    p: f64,
    q: f64,
    n_grid: &[usize],
    r: usize,
    master_seed: u64,
) -> Result<MomentTable> {
    if !(2.0 <= p && p <= q) {
        return Err(Error::Domain(format!("need 2 <= p <= q, got p={p}, q={q}")));
    }
    if r < 1 {
        return Err(Error::Domain("ensemble needs R >= 1".into()));
    }
    let consts = iid_stability_constants(&inst.derived.abar, inst.derived.b_a)?;
    let threshold = match &inst.model.noise {
        NoiseProcess::Markov { t_mix, .. } => {
            let mconsts = markov_stability_constants(&consts, *t_mix)?;
            mconsts.alpha_q_inf_m(q) / *t_mix as f64
        }
        _ => consts.alpha_q_inf(q),
    };
    if alpha > threshold * (1.0 + 1e-12) {
        return Err(Error::Assumption(format!(
            "step size {alpha:.6e} exceeds the stability threshold {threshold:.6e} for q = {q}"
        )));
    }
    check_budget(n_grid, r, inst.d(), None)?;

    let mut table = MomentTable::default();
    for &n in n_grid {
        let key_n = split_stream(master_seed, n as u64);
        let norms: Vec<f64> = (0..r)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let seed_i = split_stream(key_n, i as u64);
                let path = sample_path(&inst.model.noise, n, seed_i)?;
                product_norm(inst, alpha, 1, n, &path)
            })
            .collect::<Result<Vec<_>>>()?;
        let estimate = moment_of_norms(&norms, p);
        let (ci_low, ci_high) =
            bootstrap_ci(&norms, p, estimate, split_stream(key_n, BOOT_STREAM));
        table.rows.push(MomentRow {
            quantity: Quantity::ProductNorm,
            n,
            p,
            estimate,
            ci_low,
            ci_high,
            r,
            master_seed,
        });
    }
    Ok(table)
}

/// Batch-means estimate of the long-run covariance of `ε(Z_k)` from one long
/// path: the sample covariance of per-batch means, scaled by the batch length.
pub fn batch_means_covariance(
    inst: &Instance,
    path_length: usize,
    batch_count: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let NoiseProcess::Markov { t_mix, .. } = &inst.model.noise else {
        return Err(Error::Config("batch-means cross-check requires Markov noise".into()));
    };
    if batch_count < 2 {
        return Err(Error::Config("need at least 2 batches".into()));
    }
    let len = path_length / batch_count;
    if len < (100 * *t_mix) as usize {
        return Err(Error::Config(format!(
            "batch length {len} is below 100·t_mix = {}",
            100 * t_mix
        )));
    }
    let d = inst.d();
    let total = len * batch_count;
    let path = sample_path(&inst.model.noise, total, seed)?;

    let mut batch_means = Vec::with_capacity(batch_count);
    for b in 0..batch_count {
        let mut acc = DVector::<f64>::zeros(d);
        for k in 0..len {
            acc += &inst.derived.eps_table[path.states[b * len + k]];
        }
        batch_means.push(acc / len as f64);
    }
    let grand = batch_means
        .iter()
        .fold(DVector::<f64>::zeros(d), |a, m| a + m)
        / batch_count as f64;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for m in &batch_means {
        let c = m - &grand;
        cov += &c * c.transpose();
    }
    Ok(cov * (len as f64 / (batch_count - 1) as f64))
}
