//! Closed-form finite-time bounds and step-size rules.
//!
//! Everything in this module is an explicit formula in the instance constants
//! from [`crate::spectral`]; nothing here touches sample paths.  Each bound
//! evaluates whether the supplied step size sits inside the regime the bound
//! was derived for; out-of-range step sizes are *flagged* in the returned
//! report rather than rejected, so sweeps can plot bounds slightly past their
//! validity edge.  Structurally invalid inputs (odd horizons, `p < 2`,
//! negative scales, `α·a ≥ 1` where `ln(1/(αa))` appears) are hard errors.
//!
//! Conventions shared by all bounds:
//! * horizons `n` are even and iterates are averaged over the second half of
//!   the run, so bounds control `(n/2)^{1/2} E^{1/p} ‖Ā(θ̄_n − θ*)‖^p` (or the
//!   squared version for the MSE bound);
//! * `noise_scale` is `‖ε‖_∞` for bounded-noise regimes and the sub-Gaussian
//!   proxy `σ_ε` for the sub-Gaussian regime;
//! * `init_dist` is `‖θ₀ − θ*‖` (the MSE bound uses its square);
//! * logs are natural except for the explicit `log₂(2p)` factor in the
//!   Markov fluctuation term.

use std::f64::consts::{E, LN_2, PI, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{MarkovStabilityConstants, StabilityConstants};

/// Rosenthal-type constant multiplying the leading `√(Tr Σ · p)` term.
pub const C_RM1: f64 = 60.0 * E;
/// Companion Rosenthal-type constant in the lower-order fluctuation terms.
pub const C_RM2: f64 = 60.0;

/// All instance-dependent constants feeding the bounds, in one place.
///
/// The i.i.d. block is always present; the Markov block is populated only
/// when Markov stability constants were supplied to [`constants`].
#[derive(Debug, Clone, Serialize)]
pub struct ConstantSet {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    /// Sub-Gaussian analogues of `d1..d4`.
    pub sg_d1: f64,
    pub sg_d2: f64,
    pub sg_d3: f64,
    pub sg_d4: f64,
    pub c_rm1: f64,
    pub c_rm2: f64,
    /// Coefficients of the step-size-optimized i.i.d. moment bound.
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// High-probability envelope constant `3e√2 · max((c3+c4)√(1+ln d), c5(1+ln d))`.
    pub c2: f64,
    /// Markov Rosenthal constants (independent of the chain, always finite).
    pub c_ros1_m: f64,
    pub c_ros2_m: f64,
    pub markov: Option<MarkovConstants>,
}

/// Markov-regime bound constants; all are functions of `(a, κ_Q, b_A)` only.
#[derive(Debug, Clone, Serialize)]
pub struct MarkovConstants {
    pub dm1: f64,
    pub dm2: f64,
    pub dm_j1: f64,
    pub dm_j2: f64,
    pub dm_h1: f64,
    pub dm_h2: f64,
    pub dm4: f64,
    pub dm5: f64,
    pub dm6: f64,
    pub dm7: f64,
    pub dm_s: f64,
}

impl ConstantSet {
    /// The Markov block, or a config error for i.i.d.-only constant sets.
    pub fn markov(&self) -> Result<&MarkovConstants> {
        self.markov.as_ref().ok_or_else(|| {
            Error::Config("constant set was built without Markov inputs".into())
        })
    }
}

/// Additive pieces of a bound. `total` is always their sum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundComponents {
    /// Asymptotically dominant term (noise covariance driven).
    pub leading: f64,
    /// Higher-order fluctuation terms, proportional to the noise scale.
    pub fluctuation: f64,
    /// Initialization-driven term, decaying in `n` for fixed eligible `α`.
    pub transient: f64,
    /// Averaging bias (Markov bias bound only; zero elsewhere).
    pub bias: f64,
    pub total: f64,
}

/// One step-size (or moment-order) condition attached to a bound.
#[derive(Debug, Clone, Serialize)]
pub struct EligibilityCheck {
    pub name: String,
    pub threshold: f64,
    pub actual: f64,
    pub satisfied: bool,
}

/// Echo of the evaluation point, serialized into every report.
#[derive(Debug, Clone, Serialize)]
pub struct InputEcho {
    pub n: u64,
    pub p: f64,
    /// Inverse-moment parameter `q` governing the `d^{1/q}` factors, or the
    /// effective `q` of the bound's step-size threshold.
    pub q: f64,
    pub alpha: f64,
    pub d: usize,
    pub t_mix: Option<u64>,
    pub tr_sigma: f64,
    pub noise_scale: f64,
    pub init_dist: f64,
}

/// Instance-level scalars a bound needs beyond the stability constants.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    /// `Tr Σ_ε` (i.i.d./sub-Gaussian) or `Tr Σ^{(M)}` (Markov).
    pub tr_sigma: f64,
    /// `‖ε‖_∞`, or `σ_ε` in the sub-Gaussian regime.
    pub noise_scale: f64,
    /// `‖θ₀ − θ*‖`.
    pub init_dist: f64,
}

/// A fully evaluated bound with its eligibility record.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub components: BoundComponents,
    pub inputs: InputEcho,
    pub eligibility: Vec<EligibilityCheck>,
    /// True iff every eligibility check passed.
    pub eligible: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

/// Step-size selection for the moment bounds.
#[derive(Debug, Clone, Copy)]
pub enum AlphaMode {
    Explicit(f64),
    /// Use the horizon-optimized schedule for the relevant regime.
    Optimized,
}

/// Noise model for the i.i.d. moment bound.
#[derive(Debug, Clone, Copy)]
pub enum IidNoise {
    Bounded,
    SubGaussian,
}

/// Regime selector for the per-term bounds.
#[derive(Debug, Clone, Copy)]
pub enum TermRegime<'a> {
    Iid,
    SubGaussianIid,
    Markov(&'a MarkovStabilityConstants),
}

/// Regime selector for the random matrix product bound.
#[derive(Debug, Clone, Copy)]
pub enum StabilityRegime<'a> {
    Iid,
    Markov(&'a MarkovStabilityConstants),
}

/// Regime selector for the high-probability bound.
#[derive(Debug, Clone, Copy)]
pub enum HpRegime<'a> {
    Iid,
    Markov {
        mconsts: &'a MarkovStabilityConstants,
        /// Leading absolute constant of the Markov deviation bound; it is not
        /// pinned down analytically, so it is a configuration input.
        c1_m: f64,
    },
}

// ---------------------------------------------------------------------------
// constant assembly
// ---------------------------------------------------------------------------

/// Evaluate every bound constant from the stability constants.
///
/// Pass the Markov constants whenever the instance has a declared mixing
/// time; the Markov block of the result is populated exactly in that case.
pub fn constants(
    consts: &StabilityConstants,
    markov: Option<&MarkovStabilityConstants>,
) -> ConstantSet {
    let (a, kq, ba) = (consts.a, consts.kappa_q, consts.b_a);
    let sk = kq.sqrt();

    let d1 = (2.0 * kq).sqrt() / a;
    let d2 = d1 * (1.0 + 4.0 * sk * ba / a);
    let d3 = 2.0 * kq * ba / (a * a);
    let d4 = 4.0 * sk * ba * d3 / a;

    let sg_d1 = 2.0 * sk / a;
    let sg_d2 = d2;
    let sg_d3 = 4.0 * kq * ba / (a * a);
    let sg_d4 = 4.0 * sk * ba * sg_d3 / (a * a);

    let amin = consts.alpha_inf.min(consts.c_a);
    let c3 = 4.0 * a.sqrt() * d2 / amin.sqrt() + 2.0 * C_RM2 + (amin * a).sqrt() * ba * d1;
    let c4 = ba * (d3 + d4) * a * amin;
    let c5 = sk * (4.0 / amin + ba);
    let logd = 1.0 + (consts.d as f64).ln();
    let c2 = 3.0 * E * SQRT_2 * ((c3 + c4) * logd.sqrt()).max(c5 * logd);

    let c_ros1_m = 16.0 * 19f64.sqrt() / (3.0 * 3f64.sqrt()) * C_RM1.powf(2.5);
    let c_ros2_m = 64.0 * (C_RM1 * C_RM1 * C_RM2.sqrt() + C_RM2);

    let markov = markov.map(|_| {
        let dm1 = 2f64.powf(3.5) * sk / a * ((-0.25f64).exp() + (2.0 * PI * E).sqrt() * ba / a);
        let dm2 = dm1 * (1.0 + 24.0 * SQRT_2 * E * E * sk * ba / a);
        let dm_j1 = 64.0 * kq * ba / (a * a)
            * ((SQRT_2 + sk) / (2.0 * LN_2).sqrt() + 2.0 * PI.sqrt() * sk + sk / LN_2.sqrt());
        let dm_j2 = 128.0 / 3.0 * kq.powf(1.5) * ba / (a * a);
        let dm_h1 = 96.0 / a * ba * E * E * sk * dm_j1;
        let dm_h2 = 48.0 / a * ba * E * E * sk * dm_j2;
        let dm4 = 48.0 * sk * E.powi(3);
        let dm7 = 4.0 / 3.0 * sk * ba / a;
        let dm5 = 4.0 * E * (dm_j1 + dm_h1) + dm7 / LN_2.sqrt();
        let dm6 = SQRT_2 * E * (dm_j2 + dm_h2);
        let dm_s = 16.0 * kq * ba;
        MarkovConstants {
            dm1,
            dm2,
            dm_j1,
            dm_j2,
            dm_h1,
            dm_h2,
            dm4,
            dm5,
            dm6,
            dm7,
            dm_s,
        }
    });

    ConstantSet {
        d1,
        d2,
        d3,
        d4,
        sg_d1,
        sg_d2,
        sg_d3,
        sg_d4,
        c_rm1: C_RM1,
        c_rm2: C_RM2,
        c3,
        c4,
        c5,
        c2,
        c_ros1_m,
        c_ros2_m,
        markov,
    }
}

// ---------------------------------------------------------------------------
// step-size rules
// ---------------------------------------------------------------------------

fn check_even_horizon(n: u64, min: u64) -> Result<()> {
    if n < min || n % 2 != 0 {
        return Err(Error::Domain(format!(
            "horizon must be an even integer >= {min}, got {n}"
        )));
    }
    Ok(())
}

fn check_moment_order(p: f64) -> Result<()> {
    if !p.is_finite() || p < 2.0 {
        return Err(Error::Domain(format!("moment order must satisfy p >= 2, got {p}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Domain(format!("step size must be positive and finite, got {alpha}")));
    }
    Ok(())
}

/// Guard for formulas containing `ln(1/(αa))` or `(1 − αa/4)^k`.
fn check_alpha_a(alpha: f64, a: f64) -> Result<()> {
    if alpha * a >= 1.0 {
        return Err(Error::Domain(format!(
            "alpha*a = {} must be < 1 for this bound",
            alpha * a
        )));
    }
    Ok(())
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        for (label, v) in [
            ("tr_sigma", self.tr_sigma),
            ("noise_scale", self.noise_scale),
            ("init_dist", self.init_dist),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "{label} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Horizon-optimized i.i.d. step size
/// `α(n, d, p) = (α_∞ ∧ c_A/(1+ln d)) / (p √n)` for even `n ≥ 2`, `p ≥ 2`.
///
/// The dimension is taken from `consts`.  The result always lies strictly
/// below the moment-bound threshold `α_{p(1+ln d),∞}`.
pub fn step_size_iid(n: u64, p: f64, consts: &StabilityConstants) -> Result<f64> {
    check_even_horizon(n, 2)?;
    check_moment_order(p)?;
    let logd = 1.0 + (consts.d as f64).ln();
    let amin = consts.alpha_inf.min(consts.c_a / logd);
    Ok(amin / (p * (n as f64).sqrt()))
}

/// Horizon-optimized Markov step size
/// `α^{(M)}(n, d, p, t_mix) = (α_∞^{(M)} ∧ c_A^{(M)}/(1+ln d)) / (p n^{2/3} t_mix^{1/3})`
/// for even `n ≥ max(4, t_mix)`, `p ≥ 2`.
pub fn step_size_markov(
    n: u64,
    d: usize,
    p: f64,
    mconsts: &MarkovStabilityConstants,
) -> Result<f64> {
    check_even_horizon(n, 4.max(mconsts.t_mix))?;
    check_moment_order(p)?;
    let logd = 1.0 + (d as f64).ln();
    let amin = mconsts.alpha_inf_m.min(mconsts.c_a_m / logd);
    let t = mconsts.t_mix as f64;
    Ok(amin / (p * (n as f64).powf(2.0 / 3.0) * t.powf(1.0 / 3.0)))
}

// ---------------------------------------------------------------------------
// formula kernels (the Δ/R prefactors; decay factors are applied by the ops)
// ---------------------------------------------------------------------------

fn delta_fl_mse(alpha: f64, n: f64, d2: f64, ba: f64) -> f64 {
    64.0 * E * d2 * d2 / (alpha * n) + 16.0 * E * alpha * ba * ba * d2 * d2
}

fn delta_tr_mse(alpha: f64, n: f64, a: f64, kq: f64, ba: f64) -> f64 {
    32.0 * E * kq / (alpha * alpha * n) + 128.0 * E / 7.0 * kq * ba * ba / (alpha * a * n)
}

fn delta_fl_pth(alpha: f64, n: f64, p: f64, a: f64, ba: f64, d1: f64, d2: f64, d34: f64) -> f64 {
    let e1p = (1.0 / p).exp();
    4.0 * e1p * d2 * (a * p).sqrt() / (alpha * n).sqrt()
        + e1p * ba * d34 * alpha * a * p.powf(2.5)
        + 2.0 * C_RM2 * p / n.sqrt()
        + ba * d1 * (alpha * a).sqrt() * p.powf(1.5)
}

fn delta_tr_pth(alpha: f64, n: f64, p: f64, kq: f64, ba: f64) -> f64 {
    (1.0 / p).exp() * kq.sqrt() * (4.0 / (alpha * n.sqrt()) + n.sqrt() * ba / SQRT_2)
}

fn delta_fl_sg(
    alpha: f64,
    n: f64,
    p: f64,
    a: f64,
    ba: f64,
    sg_d1: f64,
    sg_d2: f64,
    sg_d34: f64,
) -> f64 {
    let e1p = (1.0 / p).exp();
    4.0 * e1p * sg_d2 * p.sqrt() / (alpha * n).sqrt()
        + e1p * ba * sg_d34 * alpha * a * p.powi(3)
        + 3.0 * SQRT_2 * C_RM2 * (1.0 + n.ln()).sqrt() * p.powf(1.5) / n.sqrt()
        + ba * sg_d1 * alpha.sqrt() * p.powf(1.5)
}

fn delta_tr_sg(alpha: f64, n: f64, p: f64, kq: f64, ba: f64) -> f64 {
    (1.0 / p).exp() * kq.sqrt() * (2.0 * SQRT_2 / (alpha * n.sqrt()) + n.sqrt() * ba / SQRT_2)
}

#[allow(clippy::too_many_arguments)]
fn r_fl_markov(
    alpha: f64,
    n: f64,
    p: f64,
    a: f64,
    ba: f64,
    t: f64,
    dm2: f64,
    djh1: f64,
    djh2: f64,
    c_ros1: f64,
    c_ros2: f64,
) -> f64 {
    let e1p = (1.0 / p).exp();
    let stab = 1.0 / (alpha * n.sqrt()) + n.sqrt() * ba;
    let aat = alpha * a * t;
    8.0 * dm2 * e1p * (a * p * t).sqrt() / (alpha * n).sqrt()
        + SQRT_2 * c_ros1 * t.powf(0.75) * p * (2.0 * p).log2() / n.powf(0.25)
        + 2.0 * c_ros2 * t * p * (2.0 * p).log2() / n.sqrt()
        + 8.0 * e1p * djh1 * aat * (1.0 / (alpha * a)).ln().sqrt() * p * p * stab
        + 8.0 * e1p * djh2 * aat.powf(1.5) * p.sqrt() * stab
}

fn r_tr_markov(alpha: f64, n: f64, p: f64, kq: f64, ba: f64) -> f64 {
    (2.0 + 1.0 / p).exp() * kq.sqrt() * (4.0 / (alpha * n.sqrt()) + n.sqrt() * ba / SQRT_2)
}

/// `(coefficient of ‖θ₀−θ*‖, coefficient of ‖ε‖_∞)` in the Markov bias bound.
fn bias_terms_markov(
    alpha: f64,
    n: f64,
    a: f64,
    t: f64,
    dm4: f64,
    dm5: f64,
    dm6: f64,
) -> (f64, f64) {
    let aan = alpha * a * n;
    let aat = alpha * a * t;
    let init = dm4 * (-aan / 24.0).exp() / aan;
    let eps = dm5 * aat * (1.0 / (alpha * a)).ln().sqrt() + dm6 * aat.powf(1.5);
    (init, eps)
}

// ---------------------------------------------------------------------------
// report assembly
// ---------------------------------------------------------------------------

fn check_le(name: &str, actual: f64, threshold: f64) -> EligibilityCheck {
    EligibilityCheck {
        name: name.into(),
        threshold,
        actual,
        satisfied: actual <= threshold,
    }
}

fn check_lt(name: &str, actual: f64, threshold: f64) -> EligibilityCheck {
    EligibilityCheck {
        name: name.into(),
        threshold,
        actual,
        satisfied: actual < threshold,
    }
}

#[allow(clippy::too_many_arguments)]
fn report(
    bound_id: &str,
    leading: f64,
    fluctuation: f64,
    transient: f64,
    bias: f64,
    inputs: InputEcho,
    eligibility: Vec<EligibilityCheck>,
    notes: Vec<String>,
) -> Result<BoundReport> {
    for (label, v) in [
        ("leading", leading),
        ("fluctuation", fluctuation),
        ("transient", transient),
        ("bias", bias),
    ] {
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "{bound_id}: non-finite {label} component"
            )));
        }
    }
    let eligible = eligibility.iter().all(|c| c.satisfied);
    Ok(BoundReport {
        bound_id: bound_id.into(),
        components: BoundComponents {
            leading,
            fluctuation,
            transient,
            bias,
            total: leading + fluctuation + transient + bias,
        },
        inputs,
        eligibility,
        eligible,
        notes,
    })
}

fn echo(
    n: u64,
    p: f64,
    q: f64,
    alpha: f64,
    d: usize,
    t_mix: Option<u64>,
    inputs: &BoundInputs,
) -> InputEcho {
    InputEcho {
        n,
        p,
        q,
        alpha,
        d,
        t_mix,
        tr_sigma: inputs.tr_sigma,
        noise_scale: inputs.noise_scale,
        init_dist: inputs.init_dist,
    }
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

/// Mean-squared-error bound for the half-run average under i.i.d. noise:
/// `(n/2) E‖Ā(θ̄_n − θ*)‖² ≤ 4 Tr Σ_ε + Δ^fl ‖ε‖_∞ + e^{-αan/4} Δ^tr ‖θ₀−θ*‖²`.
///
/// Eligible for `α` strictly below `α_∞ ∧ c_A/(2 + 2 ln d)`.
pub fn mse_bound_iid(
    n: u64,
    alpha: f64,
    consts: &StabilityConstants,
    cset: &ConstantSet,
    inputs: &BoundInputs,
) -> Result<BoundReport> {
    check_even_horizon(n, 2)?;
    check_alpha(alpha)?;
    inputs.validate()?;
    let d = consts.d;
    let nf = n as f64;
    let q_eff = 2.0 * (1.0 + (d as f64).ln());
    let threshold = consts.alpha_inf.min(consts.c_a / q_eff);

    let leading = 4.0 * inputs.tr_sigma;
    let fluctuation = delta_fl_mse(alpha, nf, cset.d2, consts.b_a) * inputs.noise_scale;
    let transient = (-alpha * consts.a * nf / 4.0).exp()
        * delta_tr_mse(alpha, nf, consts.a, consts.kappa_q, consts.b_a)
        * inputs.init_dist
        * inputs.init_dist;

    report(
        "mse_iid",
        leading,
        fluctuation,
        transient,
        0.0,
        echo(n, 2.0, q_eff, alpha, d, None, inputs),
        vec![check_lt("alpha < alpha_inf ∧ c_A/(2+2 ln d)", alpha, threshold)],
        vec![],
    )
}

/// `p`-th moment bound for the half-run average under i.i.d. noise, scaled as
/// `(n/2)^{1/2} E^{1/p} ‖Ā(θ̄_n − θ*)‖^p`.
///
/// With `AlphaMode::Optimized` and bounded noise this evaluates the
/// horizon-optimized form with coefficients `c3, c4, c5`; otherwise the
/// explicit-`α` form with `Δ^fl`/`Δ^tr`.  Sub-Gaussian noise replaces
/// `‖ε‖_∞` with `σ_ε` and uses the sub-Gaussian constants.
pub fn pr_moment_bound_iid(
    n: u64,
    p: f64,
    alpha: AlphaMode,
    noise: IidNoise,
    consts: &StabilityConstants,
    cset: &ConstantSet,
    inputs: &BoundInputs,
) -> Result<BoundReport> {
    check_even_horizon(n, 2)?;
    check_moment_order(p)?;
    inputs.validate()?;
    let d = consts.d;
    let nf = n as f64;
    let logd = 1.0 + (d as f64).ln();
    let q_eff = p * logd;
    let threshold = consts.alpha_q_inf(q_eff);
    let leading = cset.c_rm1 * (inputs.tr_sigma * p).sqrt();

    match (noise, alpha) {
        (IidNoise::Bounded, AlphaMode::Optimized) => {
            let alpha = step_size_iid(n, p, consts)?;
            let amin = consts.alpha_inf.min(consts.c_a);
            let fluctuation = (1.0 / p).exp()
                * inputs.noise_scale
                * (cset.c3 * logd.sqrt() * p / nf.powf(0.25) + cset.c4 * p / nf.sqrt());
            let transient = (1.0 / p).exp()
                * cset.c5
                * logd
                * (p + nf.sqrt())
                * inputs.init_dist
                * (-amin * nf.sqrt() / (8.0 * p * logd)).exp();
            report(
                "pr_moment_iid_optimized",
                leading,
                fluctuation,
                transient,
                0.0,
                echo(n, p, q_eff, alpha, d, None, inputs),
                vec![check_lt("alpha < alpha_{p(1+ln d),inf}", alpha, threshold)],
                vec![],
            )
        }
        (IidNoise::Bounded, AlphaMode::Explicit(alpha)) => {
            check_alpha(alpha)?;
            let fluctuation = inputs.noise_scale
                * delta_fl_pth(
                    alpha,
                    nf,
                    p,
                    consts.a,
                    consts.b_a,
                    cset.d1,
                    cset.d2,
                    cset.d3 + cset.d4,
                );
            let transient = (-alpha * consts.a * nf / 8.0).exp()
                * delta_tr_pth(alpha, nf, p, consts.kappa_q, consts.b_a)
                * inputs.init_dist;
            report(
                "pr_moment_iid",
                leading,
                fluctuation,
                transient,
                0.0,
                echo(n, p, q_eff, alpha, d, None, inputs),
                vec![check_lt("alpha < alpha_{p(1+ln d),inf}", alpha, threshold)],
                vec![],
            )
        }
        (IidNoise::SubGaussian, mode) => {
            let alpha = match mode {
                AlphaMode::Explicit(a_) => {
                    check_alpha(a_)?;
                    a_
                }
                AlphaMode::Optimized => step_size_iid(n, p, consts)?,
            };
            check_alpha_a(alpha, consts.a)?;
            let fluctuation = inputs.noise_scale
                * delta_fl_sg(
                    alpha,
                    nf,
                    p,
                    consts.a,
                    consts.b_a,
                    cset.sg_d1,
                    cset.sg_d2,
                    cset.sg_d3 + cset.sg_d4,
                );
            let transient = (1.0 - alpha * consts.a / 4.0).powf(nf / 2.0)
                * delta_tr_sg(alpha, nf, p, consts.kappa_q, consts.b_a)
                * inputs.init_dist;
            report(
                "pr_moment_subgaussian",
                leading,
                fluctuation,
                transient,
                0.0,
                echo(n, p, q_eff, alpha, d, None, inputs),
                vec![check_lt("alpha < alpha_{p(1+ln d),inf}", alpha, threshold)],
                vec![],
            )
        }
    }
}

/// `p`-th moment bound for the half-run average along a Markov chain, scaled
/// as `(n/2)^{1/2} E^{1/p} ‖Ā(θ̄_n − θ*)‖^p`; requires even `n ≥ 4`.
///
/// Eligible for `α ≤ α^{(M)}_{p(1+ln d),∞} / t_mix`.
pub fn pr_moment_bound_markov(
    n: u64,
    p: f64,
    alpha: AlphaMode,
    consts: &StabilityConstants,
    mconsts: &MarkovStabilityConstants,
    cset: &ConstantSet,
    inputs: &BoundInputs,
) -> Result<BoundReport> {
    check_even_horizon(n, 4)?;
    check_moment_order(p)?;
    inputs.validate()?;
    let mc = cset.markov()?;
    let alpha = match alpha {
        AlphaMode::Explicit(a_) => {
            check_alpha(a_)?;
            a_
        }
        AlphaMode::Optimized => step_size_markov(n, consts.d, p, mconsts)?,
    };
    check_alpha_a(alpha, consts.a)?;

    let d = consts.d;
    let nf = n as f64;
    let t = mconsts.t_mix as f64;
    let q_eff = p * (1.0 + (d as f64).ln());
    let threshold = mconsts.alpha_q_inf_m(q_eff) / t;

    let leading = cset.c_rm1 * (inputs.tr_sigma * p).sqrt();
    let fluctuation = inputs.noise_scale
        * r_fl_markov(
            alpha,
            nf,
            p,
            consts.a,
            consts.b_a,
            t,
            mc.dm2,
            mc.dm_j1 + mc.dm_h1,
            mc.dm_j2 + mc.dm_h2,
            cset.c_ros1_m,
            cset.c_ros2_m,
        );
    let transient = r_tr_markov(alpha, nf, p, consts.kappa_q, consts.b_a)
        * inputs.init_dist
        * (-alpha * consts.a * nf / 24.0).exp();

    report(
        "pr_moment_markov",
        leading,
        fluctuation,
        transient,
        0.0,
        echo(n, p, q_eff, alpha, d, Some(mconsts.t_mix), inputs),
        vec![check_le(
            "alpha <= alpha^M_{p(1+ln d),inf} / t_mix",
            alpha,
            threshold,
        )],
        vec![],
    )
}

/// High-probability bound on `√n ‖Ā(θ̄_n − θ*)‖` at confidence `1 − δ`,
/// evaluated at the horizon-optimized step size with `p = ln(3e/δ)`.
///
/// The Markov variant's absolute constants are not pinned down analytically;
/// its leading term is reported with coefficient 1 and the remainder is
/// scaled by the configured `c1_m` (see the report's `notes`).
pub fn hp_bound(
    regime: HpRegime<'_>,
    n: u64,
    delta: f64,
    consts: &StabilityConstants,
    cset: &ConstantSet,
    inputs: &BoundInputs,
) -> Result<BoundReport> {
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::Domain(format!(
            "confidence level must satisfy 0 < delta < 1, got {delta}"
        )));
    }
    inputs.validate()?;
    let d = consts.d;
    let logd = 1.0 + (d as f64).ln();
    let p = (3.0 * E / delta).ln();
    let nf = n as f64;

    match regime {
        HpRegime::Iid => {
            let alpha = step_size_iid(n, p, consts)?;
            let amin = consts.alpha_inf.min(consts.c_a);
            let leading = 3.0 * E * SQRT_2 * (inputs.tr_sigma * p).sqrt();
            let fluctuation = cset.c2 * inputs.noise_scale * p.powf(1.5) / nf.powf(0.25);
            let transient = cset.c2
                * (p + nf.sqrt())
                * inputs.init_dist
                * (-amin * nf.sqrt() / (8.0 * logd * p)).exp();
            report(
                "hp_iid",
                leading,
                fluctuation,
                transient,
                0.0,
                echo(n, p, p * logd, alpha, d, None, inputs),
                vec![check_lt(
                    "alpha < alpha_{p(1+ln d),inf}",
                    alpha,
                    consts.alpha_q_inf(p * logd),
                )],
                vec![],
            )
        }
        HpRegime::Markov { mconsts, c1_m } => {
            if !c1_m.is_finite() || c1_m <= 0.0 {
                return Err(Error::Domain(format!("c1_m must be positive, got {c1_m}")));
            }
            cset.markov()?;
            let alpha = step_size_markov(n, d, p, mconsts)?;
            let t = mconsts.t_mix as f64;
            let amin = mconsts.alpha_inf_m.min(mconsts.c_a_m);
            let leading = (inputs.tr_sigma * p).sqrt();
            let fluctuation = c1_m
                * inputs.noise_scale
                * p
                * (nf.ln() * t.powf(2.0 / 3.0) / nf.powf(1.0 / 6.0) + t * p / nf.sqrt());
            let transient = c1_m
                * (nf.powf(1.0 / 6.0) * t.powf(1.0 / 3.0) * p + nf.sqrt())
                * inputs.init_dist
                * (-amin * nf.powf(1.0 / 3.0) / (24.0 * t.powf(1.0 / 3.0) * logd * p)).exp();
            report(
                "hp_markov",
                leading,
                fluctuation,
                transient,
                0.0,
                echo(n, p, p * logd, alpha, d, Some(mconsts.t_mix), inputs),
                vec![check_le(
                    "alpha <= alpha^M_{p(1+ln d),inf} / t_mix",
                    alpha,
                    mconsts.alpha_q_inf_m(p * logd) / t,
                )],
                vec![format!(
                    "leading coefficient and remainder constant are unspecified universal \
                     constants; remainder scaled by configured c1_m = {c1_m}"
                )],
            )
        }
    }
}

/// Moment bounds for the individual error-decomposition terms and the last
/// iterate, in order `[J⁰, J¹, H¹, θ_n − θ*]`.
///
/// `q ≥ p` controls the `d^{1/q}` factors; `None` selects `q = p(1+ln d)`
/// (i.i.d./sub-Gaussian) or `q = 2p(1+ln d)` (Markov, which needs `p ≤ q/2`).
pub fn iterate_and_term_bounds(
    regime: TermRegime<'_>,
    n: u64,
    p: f64,
    q: Option<f64>,
    alpha: f64,
    consts: &StabilityConstants,
    cset: &ConstantSet,
    inputs: &BoundInputs,
) -> Result<Vec<BoundReport>> {
    if n == 0 {
        return Err(Error::Domain("horizon must be >= 1".into()));
    }
    check_moment_order(p)?;
    check_alpha(alpha)?;
    check_alpha_a(alpha, consts.a)?;
    inputs.validate()?;

    let d = consts.d;
    let logd = 1.0 + (d as f64).ln();
    let markov = matches!(regime, TermRegime::Markov(_));
    let q = q.unwrap_or(if markov { 2.0 * p * logd } else { p * logd });
    let min_q = if markov { 2.0 * p } else { p };
    if !q.is_finite() || q < min_q {
        return Err(Error::Domain(format!(
            "need q >= {min_q} for this regime, got {q}"
        )));
    }

    let nf = n as f64;
    let (a, kq) = (consts.a, consts.kappa_q);
    let dq = (d as f64).powf(1.0 / q);
    let aap = alpha * a * p;
    let eps = inputs.noise_scale;
    let dist = inputs.init_dist;

    let mk = |id: &str, fluct: f64, trans: f64, checks: Vec<EligibilityCheck>, t: Option<u64>| {
        report(id, 0.0, fluct, trans, 0.0, echo(n, p, q, alpha, d, t, inputs), checks, vec![])
    };

    match regime {
        TermRegime::Iid => {
            let free = check_le("alpha <= alpha_inf", alpha, consts.alpha_inf);
            let tied = check_le("alpha <= alpha_{q,inf}", alpha, consts.alpha_q_inf(q));
            Ok(vec![
                mk("term_j0", cset.d1 * aap.sqrt() * eps, 0.0, vec![free.clone()], None)?,
                mk(
                    "term_j1",
                    cset.d3 * alpha * a * p.powf(1.5) * eps,
                    0.0,
                    vec![free],
                    None,
                )?,
                mk(
                    "term_h1",
                    cset.d4 * alpha * a * p.powf(1.5) * dq * eps,
                    0.0,
                    vec![tied.clone()],
                    None,
                )?,
                mk(
                    "lsa_error",
                    cset.d2 * dq * aap.sqrt() * eps,
                    dq * kq.sqrt() * (1.0 - alpha * a / 4.0).powf(nf) * dist,
                    vec![tied],
                    None,
                )?,
            ])
        }
        TermRegime::SubGaussianIid => {
            let free = check_le("alpha <= alpha_inf", alpha, consts.alpha_inf);
            let tied = check_le("alpha <= alpha_{q,inf}", alpha, consts.alpha_q_inf(q));
            Ok(vec![
                mk(
                    "term_j0_subgaussian",
                    cset.sg_d1 * aap.sqrt() * eps,
                    0.0,
                    vec![free.clone()],
                    None,
                )?,
                mk(
                    "term_j1_subgaussian",
                    cset.sg_d3 * alpha * a * p * p * eps,
                    0.0,
                    vec![free],
                    None,
                )?,
                mk(
                    "term_h1_subgaussian",
                    cset.sg_d4 * alpha * a * p * p * dq * eps,
                    0.0,
                    vec![tied.clone()],
                    None,
                )?,
                mk(
                    "lsa_error_subgaussian",
                    cset.sg_d2 * dq * aap.sqrt() * eps,
                    dq * kq.sqrt() * (1.0 - alpha * a / 4.0).powf(nf) * dist,
                    vec![tied],
                    None,
                )?,
            ])
        }
        TermRegime::Markov(mconsts) => {
            let mc = cset.markov()?;
            let t = mconsts.t_mix as f64;
            let aat = alpha * a * t;
            let lnia = (1.0 / (alpha * a)).ln().sqrt();
            let free = check_le("alpha <= alpha_inf", alpha, consts.alpha_inf);
            let tied = check_le(
                "alpha <= alpha^M_{q,inf} / t_mix",
                alpha,
                mconsts.alpha_q_inf_m(q) / t,
            );
            Ok(vec![
                mk(
                    "term_j0_markov",
                    mc.dm1 * (aap * t).sqrt() * eps,
                    0.0,
                    vec![free.clone()],
                    Some(mconsts.t_mix),
                )?,
                mk(
                    "term_j1_markov",
                    eps * aat * (mc.dm_j1 * lnia * p * p + mc.dm_j2 * aat.sqrt() * p.sqrt()),
                    0.0,
                    vec![free],
                    Some(mconsts.t_mix),
                )?,
                mk(
                    "term_h1_markov",
                    dq * eps * aat * (mc.dm_h1 * lnia * p * p + mc.dm_h2 * aat.sqrt() * p.sqrt()),
                    0.0,
                    vec![tied.clone()],
                    Some(mconsts.t_mix),
                )?,
                mk(
                    "lsa_error_markov",
                    mc.dm2 * dq * (aap * t).sqrt() * eps,
                    kq.sqrt() * E * E * dq * (-alpha * a * nf / 12.0).exp() * dist,
                    vec![tied],
                    Some(mconsts.t_mix),
                )?,
            ])
        }
    }
}

/// Moment bound on the random matrix product driving the recursion,
/// `E^{1/p} ‖∏_{k=1}^n (I − α A(Z_k))‖`.
///
/// Unlike the other bounds, a step size above the regime threshold is a hard
/// error here: past it the product has no contraction guarantee at all.
pub fn stability_bound(
    regime: StabilityRegime<'_>,
    n: u64,
    p: f64,
    q: f64,
    alpha: f64,
    consts: &StabilityConstants,
) -> Result<f64> {
    check_moment_order(p)?;
    check_alpha(alpha)?;
    if !q.is_finite() || q < p {
        return Err(Error::Domain(format!("need 2 <= p <= q, got p = {p}, q = {q}")));
    }
    let nf = n as f64;
    let dq = (consts.d as f64).powf(1.0 / q);
    match regime {
        StabilityRegime::Iid => {
            let threshold = consts.alpha_q_inf(q);
            if alpha > threshold {
                return Err(Error::Assumption(format!(
                    "step size {alpha} above stability threshold {threshold}"
                )));
            }
            Ok(consts.kappa_q.sqrt() * dq * (1.0 - consts.a * alpha / 2.0).powf(nf / 2.0))
        }
        StabilityRegime::Markov(mconsts) => {
            let threshold = mconsts.alpha_q_inf_m(q) / mconsts.t_mix as f64;
            if alpha > threshold {
                return Err(Error::Assumption(format!(
                    "step size {alpha} above stability threshold {threshold}"
                )));
            }
            Ok(consts.kappa_q.sqrt() * E * E * dq * (-consts.a * alpha * nf / 12.0).exp())
        }
    }
}

/// Bound on the averaging bias `‖E[θ̄_n] − θ*‖` along a Markov chain.
///
/// The initialization part decays like `e^{-αan/24}/(αan)` and is reported as
/// `transient`; the `‖ε‖_∞` part is the genuine `O(α t_mix)` bias.  Eligible
/// for `α ≤ α^{(M)}_{2(1+ln d),∞} / t_mix`, even `n ≥ 2`.
pub fn bias_bound_markov(
    n: u64,
    alpha: f64,
    consts: &StabilityConstants,
    mconsts: &MarkovStabilityConstants,
    cset: &ConstantSet,
    inputs: &BoundInputs,
) -> Result<BoundReport> {
    check_even_horizon(n, 2)?;
    check_alpha(alpha)?;
    check_alpha_a(alpha, consts.a)?;
    inputs.validate()?;
    let mc = cset.markov()?;

    let d = consts.d;
    let t = mconsts.t_mix as f64;
    let q_eff = 2.0 * (1.0 + (d as f64).ln());
    let threshold = mconsts.alpha_q_inf_m(q_eff) / t;
    let (init, eps) =
        bias_terms_markov(alpha, n as f64, consts.a, t, mc.dm4, mc.dm5, mc.dm6);

    report(
        "bias_markov",
        0.0,
        0.0,
        init * inputs.init_dist,
        eps * inputs.noise_scale,
        echo(n, 2.0, q_eff, alpha, d, Some(mconsts.t_mix), inputs),
        vec![check_le(
            "alpha <= alpha^M_{2(1+ln d),inf} / t_mix",
            alpha,
            threshold,
        )],
        vec![],
    )
}

// ---------------------------------------------------------------------------
// second transcription of the formulas, as data
// ---------------------------------------------------------------------------

/// Monomial-table transcriptions of every `Δ`/`R` prefactor, kept deliberately
/// independent of the closed-form kernels above so the two can be checked
/// against each other.  Each table is a sum of `coeff · ∏ atom^exponent`.
pub mod termtable {
    use std::f64::consts::{E, SQRT_2};

    /// Evaluation point: step size, horizon, moment order, instance constants.
    #[derive(Debug, Clone, Copy)]
    pub struct Ctx {
        pub alpha: f64,
        pub n: f64,
        pub p: f64,
        pub a: f64,
        pub ba: f64,
        pub kq: f64,
        pub t: f64,
        pub d1: f64,
        pub d2: f64,
        pub d34: f64,
        pub sg_d1: f64,
        pub sg_d2: f64,
        pub sg_d34: f64,
        pub dm2: f64,
        pub djh1: f64,
        pub djh2: f64,
        pub dm4: f64,
        pub dm5: f64,
        pub dm6: f64,
        pub c_ros1: f64,
        pub c_ros2: f64,
    }

    /// Atoms a monomial can reference.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Sym {
        Alpha,
        N,
        P,
        A,
        Ba,
        Kq,
        T,
        D1,
        D2,
        D34,
        SgD1,
        SgD2,
        SgD34,
        Dm2,
        Djh1,
        Djh2,
        Dm4,
        Dm5,
        Dm6,
        CRm2,
        CRos1,
        CRos2,
        /// `e^{1/p}`
        ExpInvP,
        /// `log₂(2p)`
        Log2TwoP,
        /// `√(ln(1/(αa)))`
        SqrtLnInvAa,
        /// `√(1 + ln n)`
        SqrtLnEn,
        /// `e^{-αan/24}`
        ExpBias,
    }

    fn atom(sym: Sym, c: &Ctx) -> f64 {
        match sym {
            Sym::Alpha => c.alpha,
            Sym::N => c.n,
            Sym::P => c.p,
            Sym::A => c.a,
            Sym::Ba => c.ba,
            Sym::Kq => c.kq,
            Sym::T => c.t,
            Sym::D1 => c.d1,
            Sym::D2 => c.d2,
            Sym::D34 => c.d34,
            Sym::SgD1 => c.sg_d1,
            Sym::SgD2 => c.sg_d2,
            Sym::SgD34 => c.sg_d34,
            Sym::Dm2 => c.dm2,
            Sym::Djh1 => c.djh1,
            Sym::Djh2 => c.djh2,
            Sym::Dm4 => c.dm4,
            Sym::Dm5 => c.dm5,
            Sym::Dm6 => c.dm6,
            Sym::CRm2 => super::C_RM2,
            Sym::CRos1 => c.c_ros1,
            Sym::CRos2 => c.c_ros2,
            Sym::ExpInvP => (1.0 / c.p).exp(),
            Sym::Log2TwoP => (2.0 * c.p).log2(),
            Sym::SqrtLnInvAa => (1.0 / (c.alpha * c.a)).ln().sqrt(),
            Sym::SqrtLnEn => (1.0 + c.n.ln()).sqrt(),
            Sym::ExpBias => (-c.alpha * c.a * c.n / 24.0).exp(),
        }
    }

    /// One monomial `coeff · ∏ atomᵉ`.
    #[derive(Debug, Clone, Copy)]
    pub struct Term {
        pub coeff: f64,
        pub factors: &'static [(Sym, f64)],
    }

    pub fn eval(terms: &[Term], c: &Ctx) -> f64 {
        terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.factors
                        .iter()
                        .map(|&(s, e)| atom(s, c).powf(e))
                        .product::<f64>()
            })
            .sum()
    }

    use Sym::*;

    pub fn mse_fluctuation() -> Vec<Term> {
        vec![
            Term { coeff: 64.0 * E, factors: &[(D2, 2.0), (Alpha, -1.0), (N, -1.0)] },
            Term { coeff: 16.0 * E, factors: &[(Alpha, 1.0), (Ba, 2.0), (D2, 2.0)] },
        ]
    }

    pub fn mse_transient() -> Vec<Term> {
        vec![
            Term { coeff: 32.0 * E, factors: &[(Kq, 1.0), (Alpha, -2.0), (N, -1.0)] },
            Term {
                coeff: 128.0 * E / 7.0,
                factors: &[(Kq, 1.0), (Ba, 2.0), (Alpha, -1.0), (A, -1.0), (N, -1.0)],
            },
        ]
    }

    pub fn pth_fluctuation() -> Vec<Term> {
        vec![
            Term {
                coeff: 4.0,
                factors: &[
                    (ExpInvP, 1.0),
                    (D2, 1.0),
                    (A, 0.5),
                    (P, 0.5),
                    (Alpha, -0.5),
                    (N, -0.5),
                ],
            },
            Term {
                coeff: 1.0,
                factors: &[(ExpInvP, 1.0), (Ba, 1.0), (D34, 1.0), (Alpha, 1.0), (A, 1.0), (P, 2.5)],
            },
            Term { coeff: 2.0, factors: &[(CRm2, 1.0), (P, 1.0), (N, -0.5)] },
            Term {
                coeff: 1.0,
                factors: &[(Ba, 1.0), (D1, 1.0), (Alpha, 0.5), (A, 0.5), (P, 1.5)],
            },
        ]
    }

    pub fn pth_transient() -> Vec<Term> {
        vec![
            Term {
                coeff: 4.0,
                factors: &[(ExpInvP, 1.0), (Kq, 0.5), (Alpha, -1.0), (N, -0.5)],
            },
            Term {
                coeff: 1.0 / SQRT_2,
                factors: &[(ExpInvP, 1.0), (Kq, 0.5), (N, 0.5), (Ba, 1.0)],
            },
        ]
    }

    pub fn sg_fluctuation() -> Vec<Term> {
        vec![
            Term {
                coeff: 4.0,
                factors: &[(ExpInvP, 1.0), (SgD2, 1.0), (P, 0.5), (Alpha, -0.5), (N, -0.5)],
            },
            Term {
                coeff: 1.0,
                factors: &[
                    (ExpInvP, 1.0),
                    (Ba, 1.0),
                    (SgD34, 1.0),
                    (Alpha, 1.0),
                    (A, 1.0),
                    (P, 3.0),
                ],
            },
            Term {
                coeff: 3.0 * SQRT_2,
                factors: &[(CRm2, 1.0), (SqrtLnEn, 1.0), (P, 1.5), (N, -0.5)],
            },
            Term { coeff: 1.0, factors: &[(Ba, 1.0), (SgD1, 1.0), (Alpha, 0.5), (P, 1.5)] },
        ]
    }

    pub fn sg_transient() -> Vec<Term> {
        vec![
            Term {
                coeff: 2.0 * SQRT_2,
                factors: &[(ExpInvP, 1.0), (Kq, 0.5), (Alpha, -1.0), (N, -0.5)],
            },
            Term {
                coeff: 1.0 / SQRT_2,
                factors: &[(ExpInvP, 1.0), (Kq, 0.5), (N, 0.5), (Ba, 1.0)],
            },
        ]
    }

    /// The stability factor `(α⁻¹ n^{-1/2} + n^{1/2} b_A)` is expanded, so the
    /// two trailing formula terms become four monomials here.
    pub fn markov_fluctuation() -> Vec<Term> {
        vec![
            Term {
                coeff: 8.0,
                factors: &[
                    (Dm2, 1.0),
                    (ExpInvP, 1.0),
                    (A, 0.5),
                    (P, 0.5),
                    (T, 0.5),
                    (Alpha, -0.5),
                    (N, -0.5),
                ],
            },
            Term {
                coeff: SQRT_2,
                factors: &[(CRos1, 1.0), (T, 0.75), (P, 1.0), (Log2TwoP, 1.0), (N, -0.25)],
            },
            Term {
                coeff: 2.0,
                factors: &[(CRos2, 1.0), (T, 1.0), (P, 1.0), (Log2TwoP, 1.0), (N, -0.5)],
            },
            Term {
                coeff: 8.0,
                factors: &[
                    (ExpInvP, 1.0),
                    (Djh1, 1.0),
                    (A, 1.0),
                    (T, 1.0),
                    (SqrtLnInvAa, 1.0),
                    (P, 2.0),
                    (N, -0.5),
                ],
            },
            Term {
                coeff: 8.0,
                factors: &[
                    (ExpInvP, 1.0),
                    (Djh1, 1.0),
                    (Alpha, 1.0),
                    (A, 1.0),
                    (T, 1.0),
                    (SqrtLnInvAa, 1.0),
                    (P, 2.0),
                    (N, 0.5),
                    (Ba, 1.0),
                ],
            },
            Term {
                coeff: 8.0,
                factors: &[
                    (ExpInvP, 1.0),
                    (Djh2, 1.0),
                    (Alpha, 0.5),
                    (A, 1.5),
                    (T, 1.5),
                    (P, 0.5),
                    (N, -0.5),
                ],
            },
            Term {
                coeff: 8.0,
                factors: &[
                    (ExpInvP, 1.0),
                    (Djh2, 1.0),
                    (Alpha, 1.5),
                    (A, 1.5),
                    (T, 1.5),
                    (P, 0.5),
                    (N, 0.5),
                    (Ba, 1.0),
                ],
            },
        ]
    }

    pub fn markov_transient() -> Vec<Term> {
        vec![
            Term {
                coeff: 4.0 * E * E,
                factors: &[(ExpInvP, 1.0), (Kq, 0.5), (Alpha, -1.0), (N, -0.5)],
            },
            Term {
                coeff: E * E / SQRT_2,
                factors: &[(ExpInvP, 1.0), (Kq, 0.5), (N, 0.5), (Ba, 1.0)],
            },
        ]
    }

    pub fn bias_init() -> Vec<Term> {
        vec![Term {
            coeff: 1.0,
            factors: &[(Dm4, 1.0), (ExpBias, 1.0), (Alpha, -1.0), (A, -1.0), (N, -1.0)],
        }]
    }

    pub fn bias_eps() -> Vec<Term> {
        vec![
            Term {
                coeff: 1.0,
                factors: &[(Dm5, 1.0), (Alpha, 1.0), (A, 1.0), (T, 1.0), (SqrtLnInvAa, 1.0)],
            },
            Term { coeff: 1.0, factors: &[(Dm6, 1.0), (Alpha, 1.5), (A, 1.5), (T, 1.5)] },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Instance, NoiseProcess, ObservationModel};
    use crate::rng::CounterRng;
    use crate::spectral::{iid_stability_constants, markov_stability_constants};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    /// Two-state scalar instance: `A ≡ 1`, `b ∈ {1.5, 0.5}` uniform i.i.d.
    fn t1_consts() -> StabilityConstants {
        iid_stability_constants(&DMatrix::from_element(1, 1, 1.0), 1.0).unwrap()
    }

    fn unit_inputs() -> BoundInputs {
        BoundInputs { tr_sigma: 0.25, noise_scale: 0.5, init_dist: 1.0 }
    }

    #[test]
    fn t1_constant_set_golden() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        assert_relative_eq!(cset.d1, std::f64::consts::SQRT_2, max_relative = 1e-12);
        assert_relative_eq!(cset.d2, 5.0 * std::f64::consts::SQRT_2, max_relative = 1e-12);
        assert_relative_eq!(cset.d3, 2.0, max_relative = 1e-12);
        assert_relative_eq!(cset.d4, 8.0, max_relative = 1e-12);
        assert_relative_eq!(cset.sg_d1, 2.0, max_relative = 1e-12);
        assert_relative_eq!(cset.sg_d2, 7.0710678118654755, max_relative = 1e-12);
        assert_relative_eq!(cset.sg_d3, 4.0, max_relative = 1e-12);
        assert_relative_eq!(cset.sg_d4, 16.0, max_relative = 1e-12);
        assert_relative_eq!(cset.c_rm1, 163.0969097075427, max_relative = 1e-12);
        assert_eq!(cset.c_rm2, 60.0);
        assert_relative_eq!(cset.c3, 200.5, max_relative = 1e-12);
        assert_relative_eq!(cset.c4, 1.25, max_relative = 1e-12);
        assert_relative_eq!(cset.c5, 33.0, max_relative = 1e-12);
        assert_relative_eq!(cset.c2, 2326.7208297933057, max_relative = 1e-12);
        assert_relative_eq!(cset.c_ros1_m, 4559626.108487192, max_relative = 1e-12);
        assert_relative_eq!(cset.c_ros2_m, 13190872.112033624, max_relative = 1e-12);
        assert!(cset.markov.is_none());
        assert!(matches!(cset.markov(), Err(Error::Config(_))));
    }

    #[test]
    fn t1_markov_constant_golden() {
        let consts = t1_consts();
        let mconsts = markov_stability_constants(&consts, 4).unwrap();
        assert_relative_eq!(mconsts.alpha_inf_m, 1.0 / (48.0 * std::f64::consts::E), max_relative = 1e-12);
        assert_relative_eq!(mconsts.c_gamma, 1568.0 / 36.0, max_relative = 1e-12);
        assert_relative_eq!(mconsts.c_a_m, 3.0 / 1568.0, max_relative = 1e-12);
        assert_eq!(mconsts.block_h, 32);

        let cset = constants(&consts, Some(&mconsts));
        let mc = cset.markov().unwrap();
        assert_relative_eq!(mc.dm1, 55.567642883607384, max_relative = 1e-12);
        assert_relative_eq!(mc.dm2, 13991.536856359367, max_relative = 1e-12);
        assert_relative_eq!(mc.dm_j1, 434.9743564590048, max_relative = 1e-12);
        assert_relative_eq!(mc.dm_j2, 128.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(mc.dm_h1, 308548.792461297, max_relative = 1e-11);
        assert_relative_eq!(mc.dm_h2, 15132.78689060997, max_relative = 1e-12);
        assert_relative_eq!(mc.dm4, 964.105772313008, max_relative = 1e-12);
        assert_relative_eq!(mc.dm5, 3359621.436014677, max_relative = 1e-11);
        assert_relative_eq!(mc.dm6, 58337.94943127049, max_relative = 1e-12);
        assert_relative_eq!(mc.dm7, 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(mc.dm_s, 16.0, max_relative = 1e-12);
    }

    #[test]
    fn step_size_iid_golden_and_scaling() {
        let consts = t1_consts();
        assert_relative_eq!(step_size_iid(100, 2.0, &consts).unwrap(), 0.00625, max_relative = 1e-15);
        // n -> 4n halves, p -> 2p halves
        let a1 = step_size_iid(256, 2.0, &consts).unwrap();
        assert_relative_eq!(step_size_iid(1024, 2.0, &consts).unwrap(), a1 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(step_size_iid(256, 4.0, &consts).unwrap(), a1 / 2.0, max_relative = 1e-14);
        assert!(step_size_iid(101, 2.0, &consts).is_err());
        assert!(step_size_iid(0, 2.0, &consts).is_err());
        assert!(step_size_iid(100, 1.5, &consts).is_err());
    }

    #[test]
    fn step_size_markov_golden_and_scaling() {
        let consts = t1_consts();
        let mconsts = markov_stability_constants(&consts, 4).unwrap();
        assert_relative_eq!(
            step_size_markov(1000, 1, 2.0, &mconsts).unwrap(),
            6.026408083043082e-06,
            max_relative = 1e-12
        );
        let a1 = step_size_markov(1000, 1, 2.0, &mconsts).unwrap();
        assert_relative_eq!(
            step_size_markov(8000, 1, 2.0, &mconsts).unwrap(),
            a1 / 4.0,
            max_relative = 1e-12
        );
        assert!(step_size_markov(999, 1, 2.0, &mconsts).is_err());
        let slow = markov_stability_constants(&consts, 64).unwrap();
        assert!(step_size_markov(32, 1, 2.0, &slow).is_err()); // n < t_mix
    }

    #[test]
    fn mse_bound_golden() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let rep = mse_bound_iid(10_000, 0.01, &consts, &cset, &unit_inputs()).unwrap();
        assert!(rep.eligible);
        assert_eq!(rep.bound_id, "mse_iid");
        assert_relative_eq!(rep.components.leading, 1.0, max_relative = 1e-15);
        assert_relative_eq!(rep.components.fluctuation, 54.36563656918091, max_relative = 1e-12);
        assert_relative_eq!(rep.components.transient, 1.2149461573359932e-09, max_relative = 1e-12);
        assert_eq!(rep.components.bias, 0.0);
        assert_eq!(
            rep.components.total,
            rep.components.leading + rep.components.fluctuation + rep.components.transient
        );
    }

    #[test]
    fn mse_noiseless_and_zero_init() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let inputs = BoundInputs { tr_sigma: 0.25, noise_scale: 0.0, init_dist: 0.0 };
        let rep = mse_bound_iid(100, 0.01, &consts, &cset, &inputs).unwrap();
        assert_eq!(rep.components.total, rep.components.leading);
        assert_eq!(rep.components.fluctuation, 0.0);
        assert_eq!(rep.components.transient, 0.0);
    }

    #[test]
    fn mse_ineligible_is_flagged_not_thrown() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        // threshold is min(0.5, 0.125/2) = 0.0625
        let rep = mse_bound_iid(100, 0.4, &consts, &cset, &unit_inputs()).unwrap();
        assert!(!rep.eligible);
        assert!(!rep.eligibility[0].satisfied);
        assert_relative_eq!(rep.eligibility[0].threshold, 0.0625, max_relative = 1e-15);
        assert!(rep.components.total.is_finite());
        // structural violations are hard errors
        assert!(mse_bound_iid(101, 0.01, &consts, &cset, &unit_inputs()).is_err());
        assert!(mse_bound_iid(100, -0.01, &consts, &cset, &unit_inputs()).is_err());
        let bad = BoundInputs { tr_sigma: -1.0, ..unit_inputs() };
        assert!(mse_bound_iid(100, 0.01, &consts, &cset, &bad).is_err());
    }

    #[test]
    fn mse_transient_decays_in_n() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let mut last = f64::INFINITY;
        for k in 0..6 {
            let n = 512u64 << k;
            let rep = mse_bound_iid(n, 0.01, &consts, &cset, &unit_inputs()).unwrap();
            assert!(rep.components.transient < last);
            last = rep.components.transient;
        }
    }

    #[test]
    fn pr_moment_optimized_golden() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let rep = pr_moment_bound_iid(
            100,
            2.0,
            AlphaMode::Optimized,
            IidNoise::Bounded,
            &consts,
            &cset,
            &unit_inputs(),
        )
        .unwrap();
        assert!(rep.eligible);
        assert_eq!(rep.bound_id, "pr_moment_iid_optimized");
        assert_relative_eq!(rep.inputs.alpha, 0.00625, max_relative = 1e-15);
        assert_relative_eq!(rep.components.leading, 115.3269308447735, max_relative = 1e-12);
        assert_relative_eq!(rep.components.fluctuation, 104.74106472453525, max_relative = 1e-12);
        assert_relative_eq!(rep.components.transient, 603.8278925704054, max_relative = 1e-12);
    }

    #[test]
    fn pr_moment_explicit_structure() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let base = unit_inputs();
        let doubled = BoundInputs { init_dist: 2.0, ..base };
        let r1 = pr_moment_bound_iid(
            100, 2.0, AlphaMode::Explicit(0.01), IidNoise::Bounded, &consts, &cset, &base,
        )
        .unwrap();
        let r2 = pr_moment_bound_iid(
            100, 2.0, AlphaMode::Explicit(0.01), IidNoise::Bounded, &consts, &cset, &doubled,
        )
        .unwrap();
        assert_eq!(r1.bound_id, "pr_moment_iid");
        assert!(r1.eligible);
        assert_relative_eq!(r2.components.transient, 2.0 * r1.components.transient, max_relative = 1e-15);
        assert_eq!(r1.components.fluctuation, r2.components.fluctuation);
        assert_eq!(r1.components.bias, 0.0);
        assert_relative_eq!(
            r1.components.leading,
            C_RM1 * (0.25f64 * 2.0).sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn pr_moment_subgaussian_golden() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let rep = pr_moment_bound_iid(
            100,
            2.0,
            AlphaMode::Explicit(0.01),
            IidNoise::SubGaussian,
            &consts,
            &cset,
            &unit_inputs(),
        )
        .unwrap();
        assert!(rep.eligible);
        assert_eq!(rep.bound_id, "pr_moment_subgaussian");
        assert_relative_eq!(rep.components.fluctuation, 119.80711138901985, max_relative = 1e-12);
        assert_relative_eq!(rep.components.transient, 51.433664232869084, max_relative = 1e-12);
    }

    #[test]
    fn pr_moment_markov_golden() {
        let consts = t1_consts();
        let mconsts = markov_stability_constants(&consts, 4).unwrap();
        let cset = constants(&consts, Some(&mconsts));
        let inputs = BoundInputs { tr_sigma: 34.0 / 27.0, noise_scale: 2.0 / 3.0, init_dist: 1.0 };
        let rep = pr_moment_bound_markov(
            4096, 2.0, AlphaMode::Optimized, &consts, &mconsts, &cset, &inputs,
        )
        .unwrap();
        assert!(rep.eligible);
        assert_relative_eq!(rep.inputs.alpha, 2.3540656574387036e-06, max_relative = 1e-12);
        assert_relative_eq!(rep.components.leading, 258.83220168731816, max_relative = 1e-12);
        assert_relative_eq!(rep.components.fluctuation, 16489050.777205976, max_relative = 1e-11);
        assert_relative_eq!(rep.components.transient, 323864.09581936355, max_relative = 1e-11);
        assert_eq!(rep.inputs.t_mix, Some(4));

        // without the Markov block the call must fail loudly
        let iid_only = constants(&consts, None);
        assert!(matches!(
            pr_moment_bound_markov(
                4096, 2.0, AlphaMode::Optimized, &consts, &mconsts, &iid_only, &inputs
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn term_bounds_iid_golden() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let reps = iterate_and_term_bounds(
            TermRegime::Iid, 100, 2.0, Some(4.0), 0.01, &consts, &cset, &unit_inputs(),
        )
        .unwrap();
        assert_eq!(reps.len(), 4);
        assert_eq!(reps[0].bound_id, "term_j0");
        assert_relative_eq!(reps[0].components.fluctuation, 0.1, max_relative = 1e-12);
        assert_relative_eq!(
            reps[1].components.fluctuation,
            0.028284271247461906,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            reps[2].components.fluctuation,
            0.08 * std::f64::consts::SQRT_2,
            max_relative = 1e-12
        );
        assert_eq!(reps[3].bound_id, "lsa_error");
        assert_relative_eq!(reps[3].components.fluctuation, 0.5, max_relative = 1e-12);
        assert_relative_eq!(
            reps[3].components.transient,
            0.9975f64.powf(100.0),
            max_relative = 1e-12
        );
        for r in &reps {
            assert!(r.eligible);
        }
    }

    #[test]
    fn term_bounds_threshold_flags() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        // alpha_{4,inf} = min(0.5, 0.125/4) = 0.03125 < 0.05 < alpha_inf
        let reps = iterate_and_term_bounds(
            TermRegime::Iid, 100, 2.0, Some(4.0), 0.05, &consts, &cset, &unit_inputs(),
        )
        .unwrap();
        assert!(reps[0].eligible && reps[1].eligible);
        assert!(!reps[2].eligible && !reps[3].eligible);
        // p > q is a structural error
        assert!(iterate_and_term_bounds(
            TermRegime::Iid, 100, 5.0, Some(4.0), 0.01, &consts, &cset, &unit_inputs()
        )
        .is_err());
    }

    #[test]
    fn term_bounds_markov_and_subgaussian() {
        let consts = t1_consts();
        let mconsts = markov_stability_constants(&consts, 4).unwrap();
        let cset = constants(&consts, Some(&mconsts));
        let inputs = BoundInputs { init_dist: 0.0, ..unit_inputs() };
        let reps = iterate_and_term_bounds(
            TermRegime::Markov(&mconsts), 100, 2.0, None, 1e-5, &consts, &cset, &inputs,
        )
        .unwrap();
        assert_eq!(reps[0].bound_id, "term_j0_markov");
        assert_eq!(reps[3].bound_id, "lsa_error_markov");
        assert_eq!(reps[3].components.transient, 0.0);
        for r in &reps {
            assert!(r.components.total.is_finite() && r.components.total >= 0.0);
            assert_eq!(r.inputs.t_mix, Some(4));
        }

        let sg = iterate_and_term_bounds(
            TermRegime::SubGaussianIid, 100, 2.0, Some(4.0), 0.01, &consts, &cset, &unit_inputs(),
        )
        .unwrap();
        assert_eq!(sg[1].bound_id, "term_j1_subgaussian");
        // sg_d3 * alpha * a * p^2 * sigma = 4 * 0.01 * 4 * 0.5
        assert_relative_eq!(sg[1].components.fluctuation, 0.08, max_relative = 1e-12);
    }

    #[test]
    fn stability_golden_and_errors() {
        let consts = t1_consts();
        let v = stability_bound(StabilityRegime::Iid, 100, 2.0, 2.0, 0.0625, &consts).unwrap();
        assert_relative_eq!(v, 0.20444936956763513, max_relative = 1e-12);

        let mconsts = markov_stability_constants(&consts, 4).unwrap();
        let am = mconsts.alpha_q_inf_m(2.0) / 4.0;
        let vm =
            stability_bound(StabilityRegime::Markov(&mconsts), 100, 2.0, 2.0, am, &consts).unwrap();
        assert_relative_eq!(
            vm,
            std::f64::consts::E.powi(2) * (-am * 100.0 / 12.0).exp(),
            max_relative = 1e-12
        );

        match stability_bound(StabilityRegime::Iid, 100, 2.0, 2.0, 0.1, &consts) {
            Err(Error::Assumption(msg)) => assert!(msg.contains("threshold")),
            other => panic!("expected threshold error, got {other:?}"),
        }
        assert!(stability_bound(StabilityRegime::Iid, 100, 4.0, 2.0, 0.01, &consts).is_err());
    }

    #[test]
    fn bias_golden_and_halving() {
        let consts = t1_consts();
        let mconsts = markov_stability_constants(&consts, 4).unwrap();
        let cset = constants(&consts, Some(&mconsts));
        let inputs = BoundInputs { tr_sigma: 34.0 / 27.0, noise_scale: 2.0 / 3.0, init_dist: 0.0 };
        let rep = bias_bound_markov(1 << 16, 1e-4, &consts, &mconsts, &cset, &inputs).unwrap();
        assert!(rep.eligible);
        assert_eq!(rep.components.transient, 0.0); // zero initialization error
        assert_relative_eq!(rep.components.bias, 2719.234181848996, max_relative = 1e-12);

        // the eps part is ~linear in alpha (up to the slow log factor)
        let half = bias_bound_markov(1 << 16, 5e-5, &consts, &mconsts, &cset, &inputs).unwrap();
        let ratio = half.components.bias / rep.components.bias;
        assert!(ratio > 0.45 && ratio < 0.6, "ratio {ratio}");

        // threshold alpha^M_{2,inf}/t = 0.0009566.../4; 1e-3 is above it
        let flagged =
            bias_bound_markov(1 << 16, 1e-3, &consts, &mconsts, &cset, &inputs).unwrap();
        assert!(!flagged.eligible);
    }

    #[test]
    fn hp_iid_golden() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let rep = hp_bound(HpRegime::Iid, 10_000, 0.05, &consts, &cset, &unit_inputs()).unwrap();
        assert!(rep.eligible);
        assert_relative_eq!(rep.inputs.p, 5.0943445622221, max_relative = 1e-12);
        assert_relative_eq!(rep.components.leading, 13.01502170220766, max_relative = 1e-12);
        assert_relative_eq!(rep.components.fluctuation, 1337.663126598157, max_relative = 1e-12);
        assert_relative_eq!(rep.components.transient, 179936.80536097198, max_relative = 1e-11);

        // delta = 3e * e^{-3} maps to p = 3 exactly
        let sub = hp_bound(
            HpRegime::Iid,
            10_000,
            3.0 * std::f64::consts::E * (-3.0f64).exp(),
            &consts,
            &cset,
            &unit_inputs(),
        )
        .unwrap();
        assert_relative_eq!(sub.inputs.p, 3.0, max_relative = 1e-12);

        // halving delta scales the leading term by sqrt((p + ln 2)/p)
        let r1 = hp_bound(HpRegime::Iid, 10_000, 0.1, &consts, &cset, &unit_inputs()).unwrap();
        let r2 = hp_bound(HpRegime::Iid, 10_000, 0.05, &consts, &cset, &unit_inputs()).unwrap();
        let p1 = r1.inputs.p;
        assert_relative_eq!(
            r2.components.leading / r1.components.leading,
            ((p1 + std::f64::consts::LN_2) / p1).sqrt(),
            max_relative = 1e-12
        );

        assert!(hp_bound(HpRegime::Iid, 10_000, 0.0, &consts, &cset, &unit_inputs()).is_err());
        assert!(hp_bound(HpRegime::Iid, 10_000, 1.1, &consts, &cset, &unit_inputs()).is_err());
    }

    #[test]
    fn hp_markov_c1_scaling_and_notes() {
        let consts = t1_consts();
        let mconsts = markov_stability_constants(&consts, 4).unwrap();
        let cset = constants(&consts, Some(&mconsts));
        let mk = |c1_m| {
            hp_bound(
                HpRegime::Markov { mconsts: &mconsts, c1_m },
                4096,
                0.05,
                &consts,
                &cset,
                &unit_inputs(),
            )
            .unwrap()
        };
        let r1 = mk(1.0);
        let r2 = mk(2.0);
        assert_relative_eq!(r2.components.fluctuation, 2.0 * r1.components.fluctuation, max_relative = 1e-15);
        assert_relative_eq!(r2.components.transient, 2.0 * r1.components.transient, max_relative = 1e-15);
        assert_eq!(r1.components.leading, r2.components.leading);
        assert!(r1.notes.iter().any(|s| s.contains("c1_m")));
        assert!(hp_bound(
            HpRegime::Markov { mconsts: &mconsts, c1_m: 1.0 },
            4095,
            0.05,
            &consts,
            &cset,
            &unit_inputs()
        )
        .is_err());
    }

    #[test]
    fn report_serialization_shape() {
        let consts = t1_consts();
        let cset = constants(&consts, None);
        let rep = mse_bound_iid(100, 0.01, &consts, &cset, &unit_inputs()).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["bound_id"], "mse_iid");
        for key in ["leading", "fluctuation", "transient", "bias", "total"] {
            assert!(v["components"][key].is_number(), "missing components.{key}");
        }
        for key in ["n", "p", "q", "alpha", "d", "t_mix", "tr_sigma", "noise_scale", "init_dist"] {
            assert!(!v["inputs"][key].is_null() || key == "t_mix", "missing inputs.{key}");
        }
        assert!(v["eligibility"].as_array().map(|a| !a.is_empty()).unwrap_or(false));
        assert!(v["eligible"].is_boolean());
        assert!(v.get("notes").is_none()); // empty notes are skipped
        let check = &v["eligibility"][0];
        for key in ["name", "threshold", "actual", "satisfied"] {
            assert!(!check[key].is_null(), "missing eligibility.{key}");
        }
    }

    #[test]
    fn termtable_matches_kernels() {
        let mut rng = CounterRng::from_key(0x7ab1e5);
        let logu = |r: &mut CounterRng, lo: f64, hi: f64| {
            (lo.ln() + (hi.ln() - lo.ln()) * r.next_f64()).exp()
        };
        for _ in 0..50 {
            let a = logu(&mut rng, 0.3, 3.0);
            let alpha = logu(&mut rng, 1e-6, 0.5) / a; // keeps alpha*a in (0, 0.5)
            let n = 2.0 * (1.0 + (logu(&mut rng, 1.0, 5e5)).floor());
            let ctx = termtable::Ctx {
                alpha,
                n,
                p: 2.0 + 6.0 * rng.next_f64(),
                a,
                ba: logu(&mut rng, 0.1, 5.0),
                kq: logu(&mut rng, 1.0, 10.0),
                t: (1.0 + (15.0 * rng.next_f64()).floor()),
                d1: logu(&mut rng, 0.01, 1e3),
                d2: logu(&mut rng, 0.01, 1e3),
                d34: logu(&mut rng, 0.01, 1e3),
                sg_d1: logu(&mut rng, 0.01, 1e3),
                sg_d2: logu(&mut rng, 0.01, 1e3),
                sg_d34: logu(&mut rng, 0.01, 1e3),
                dm2: logu(&mut rng, 0.01, 1e3),
                djh1: logu(&mut rng, 0.01, 1e3),
                djh2: logu(&mut rng, 0.01, 1e3),
                dm4: logu(&mut rng, 0.01, 1e3),
                dm5: logu(&mut rng, 0.01, 1e3),
                dm6: logu(&mut rng, 0.01, 1e3),
                c_ros1: logu(&mut rng, 0.01, 1e3),
                c_ros2: logu(&mut rng, 0.01, 1e3),
            };
            let c = &ctx;
            assert_relative_eq!(
                termtable::eval(&termtable::mse_fluctuation(), c),
                delta_fl_mse(c.alpha, c.n, c.d2, c.ba),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                termtable::eval(&termtable::mse_transient(), c),
                delta_tr_mse(c.alpha, c.n, c.a, c.kq, c.ba),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                termtable::eval(&termtable::pth_fluctuation(), c),
                delta_fl_pth(c.alpha, c.n, c.p, c.a, c.ba, c.d1, c.d2, c.d34),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                termtable::eval(&termtable::pth_transient(), c),
                delta_tr_pth(c.alpha, c.n, c.p, c.kq, c.ba),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                termtable::eval(&termtable::sg_fluctuation(), c),
                delta_fl_sg(c.alpha, c.n, c.p, c.a, c.ba, c.sg_d1, c.sg_d2, c.sg_d34),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                termtable::eval(&termtable::sg_transient(), c),
                delta_tr_sg(c.alpha, c.n, c.p, c.kq, c.ba),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                termtable::eval(&termtable::markov_fluctuation(), c),
                r_fl_markov(
                    c.alpha, c.n, c.p, c.a, c.ba, c.t, c.dm2, c.djh1, c.djh2, c.c_ros1, c.c_ros2
                ),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                termtable::eval(&termtable::markov_transient(), c),
                r_tr_markov(c.alpha, c.n, c.p, c.kq, c.ba),
                max_relative = 1e-12
            );
            let (init, eps) = bias_terms_markov(c.alpha, c.n, c.a, c.t, c.dm4, c.dm5, c.dm6);
            assert_relative_eq!(
                termtable::eval(&termtable::bias_init(), c),
                init,
                max_relative = 1e-12
            );
            assert_relative_eq!(termtable::eval(&termtable::bias_eps(), c), eps, max_relative = 1e-12);
        }
    }

    #[test]
    fn scaled_tables_leave_d1_eps_and_d2_eps_invariant() {
        let build = |scale: f64| {
            let model = ObservationModel {
                d: 1,
                s: 2,
                a_table: vec![
                    DMatrix::from_element(1, 1, scale),
                    DMatrix::from_element(1, 1, scale),
                ],
                b_table: vec![
                    DVector::from_element(1, 1.5 * scale),
                    DVector::from_element(1, 0.5 * scale),
                ],
                noise: NoiseProcess::Iid { weights: DVector::from_element(2, 0.5) },
            };
            let inst = Instance::new(model).unwrap();
            let consts = iid_stability_constants(&inst.derived.abar, inst.derived.b_a).unwrap();
            let cset = constants(&consts, None);
            (cset.d1 * inst.derived.eps_sup, cset.d2 * inst.derived.eps_sup)
        };
        let (d1e, d2e) = build(1.0);
        for scale in [0.1, 10.0] {
            let (s1, s2) = build(scale);
            assert_relative_eq!(s1, d1e, max_relative = 1e-9);
            assert_relative_eq!(s2, d2e, max_relative = 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eligible_reports_are_finite_and_additive(
            l in 0.2f64..3.0,
            ba in 0.05f64..4.0,
            frac in 0.05f64..0.95,
            k in 1u32..8,
            p in 2.0f64..6.0,
            d in 1usize..4,
            eps in 0.0f64..3.0,
            dist in 0.0f64..3.0,
            tr in 0.0f64..2.0,
        ) {
            let abar = DMatrix::<f64>::identity(d, d) * l;
            let consts = iid_stability_constants(&abar, ba).unwrap();
            let cset = constants(&consts, None);
            let n = 2u64 << k;
            let inputs = BoundInputs { tr_sigma: tr, noise_scale: eps, init_dist: dist };

            let thr_mse = consts.alpha_inf.min(consts.c_a / (2.0 + 2.0 * (d as f64).ln()));
            let rep = mse_bound_iid(n, frac * thr_mse, &consts, &cset, &inputs).unwrap();
            prop_assert!(rep.eligible);
            for c in [
                rep.components.leading,
                rep.components.fluctuation,
                rep.components.transient,
                rep.components.bias,
            ] {
                prop_assert!(c.is_finite() && c >= 0.0);
            }
            prop_assert_eq!(
                rep.components.total,
                rep.components.leading
                    + rep.components.fluctuation
                    + rep.components.transient
                    + rep.components.bias
            );

            let thr_p = consts.alpha_q_inf(p * (1.0 + (d as f64).ln()));
            let rep2 = pr_moment_bound_iid(
                n,
                p,
                AlphaMode::Explicit(frac * thr_p),
                IidNoise::Bounded,
                &consts,
                &cset,
                &inputs,
            )
            .unwrap();
            prop_assert!(rep2.eligible);
            prop_assert!(rep2.components.total.is_finite() && rep2.components.total >= 0.0);
        }

        #[test]
        fn optimized_step_sizes_meet_their_thresholds(
            l in 0.2f64..3.0,
            ba in 0.05f64..4.0,
            k in 1u32..8,
            p in 2.0f64..6.0,
            d in 1usize..4,
            t in 1u64..12,
        ) {
            let abar = DMatrix::<f64>::identity(d, d) * l;
            let consts = iid_stability_constants(&abar, ba).unwrap();
            let logd = 1.0 + (d as f64).ln();
            let n = (2u64 << k).max(16);

            let a_iid = step_size_iid(n, p, &consts).unwrap();
            prop_assert!(a_iid < consts.alpha_q_inf(p * logd));

            let mconsts = markov_stability_constants(&consts, t).unwrap();
            let a_m = step_size_markov(n, d, p, &mconsts).unwrap();
            prop_assert!(a_m <= mconsts.alpha_q_inf_m(p * logd) / t as f64);
        }
    }
}
