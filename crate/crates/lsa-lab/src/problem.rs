//! Problem instances: observation models on a finite state space, their
//! validation, derived quantities (θ*, ε tables, Σ_ε), and synthetic
//! instance generators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::rng::{split_stream, CounterRng};
use crate::{chains, spectral, Error, Result};

/// Noise regime driving the observations `Z_k`.
#[derive(Debug, Clone)]
pub enum NoiseProcess {
    /// `Z_k` drawn i.i.d. from `weights`.
    Iid { weights: DVector<f64> },
    /// `Z_k` a Markov chain with kernel `p`, initial law `xi`, and a declared
    /// mixing time that must satisfy `δ(P^k) ≤ (1/4)^{⌊k/t_mix⌋}`.
    Markov {
        p: DMatrix<f64>,
        xi: DVector<f64>,
        t_mix: u64,
    },
    /// I.i.d. states plus an additive Gaussian perturbation of `b` with
    /// covariance `sigma`; `sigma_eps` is the declared sub-Gaussian proxy.
    SubGaussianIid {
        weights: DVector<f64>,
        sigma: DMatrix<f64>,
        sigma_eps: f64,
    },
}

impl NoiseProcess {
    pub fn is_markov(&self) -> bool {
        matches!(self, NoiseProcess::Markov { .. })
    }

    /// Stationary distribution of the state process.
    pub fn stationary(&self) -> Result<DVector<f64>> {
        match self {
            NoiseProcess::Iid { weights } | NoiseProcess::SubGaussianIid { weights, .. } => {
                Ok(weights.clone())
            }
            NoiseProcess::Markov { p, .. } => chains::stationary_distribution(p),
        }
    }

    pub fn t_mix(&self) -> Option<u64> {
        match self {
            NoiseProcess::Markov { t_mix, .. } => Some(*t_mix),
            _ => None,
        }
    }
}

/// Raw problem data: per-state observation tables plus the noise process.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    pub d: usize,
    pub s: usize,
    pub a_table: Vec<DMatrix<f64>>,
    pub b_table: Vec<DVector<f64>>,
    pub noise: NoiseProcess,
}

/// Quantities derived from a validated model.
#[derive(Debug, Clone)]
pub struct DerivedInstance {
    pub abar: DMatrix<f64>,
    pub bbar: DVector<f64>,
    pub theta_star: DVector<f64>,
    /// `Ã(z) = A(z) − Ā`
    pub atilde_table: Vec<DMatrix<f64>>,
    /// `ε(z) = Ã(z) θ* − b̃(z)`
    pub eps_table: Vec<DVector<f64>>,
    /// `‖ε‖_∞` over the finite table (the discrete part only for the
    /// sub-Gaussian variant, whose total noise is unbounded).
    pub eps_sup: f64,
    /// Noise covariance at `θ*`; includes the additive Gaussian part when present.
    pub sigma_eps: DMatrix<f64>,
    /// `b_A = sup_z ‖A(z)‖ ∨ sup_z ‖Ã(z)‖`
    pub b_a: f64,
    pub pi: DVector<f64>,
    /// PSD square root of the additive covariance (sub-Gaussian variant only).
    pub additive_sigma_sqrt: Option<DMatrix<f64>>,
}

/// A validated model together with its derived quantities.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: ObservationModel,
    pub derived: DerivedInstance,
}

impl Instance {
    pub fn new(model: ObservationModel) -> Result<Self> {
        let derived = validate_and_derive(&model)?;
        Ok(Instance { model, derived })
    }

    pub fn d(&self) -> usize {
        self.model.d
    }

    pub fn s(&self) -> usize {
        self.model.s
    }

    /// Declared sub-Gaussian variance proxy, when the variant carries one.
    pub fn sub_gaussian_sigma(&self) -> Option<f64> {
        match &self.model.noise {
            NoiseProcess::SubGaussianIid { sigma_eps, .. } => Some(*sigma_eps),
            _ => None,
        }
    }
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = spectral::spectral_norm(m).max(1.0);
    if spectral::spectral_norm(&(m - m.transpose())) > 1e-10 * scale {
        return Err(Error::Domain("additive covariance is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::Domain(format!(
            "additive covariance is not PSD (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt())) * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

fn check_simplex(w: &DVector<f64>, what: &str) -> Result<()> {
    if w.iter().any(|&x| x < -1e-12) {
        return Err(Error::Domain(format!("{what} has a negative entry")));
    }
    if (w.sum() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "{what} sums to {} instead of 1",
            w.sum()
        )));
    }
    Ok(())
}

/// Validates every structural and model assumption and computes the derived
/// quantities. Each failure mode gets its own diagnostic.
pub fn validate_and_derive(model: &ObservationModel) -> Result<DerivedInstance> {
    let (d, s) = (model.d, model.s);
    if d < 1 || s < 1 {
        return Err(Error::Dimension(format!("need d >= 1 and S >= 1, got d={d}, S={s}")));
    }
    if model.a_table.len() != s || model.b_table.len() != s {
        return Err(Error::Dimension(format!(
            "expected {s} A/b entries, got {}/{}",
            model.a_table.len(),
            model.b_table.len()
        )));
    }
    for (z, (a, b)) in model.a_table.iter().zip(&model.b_table).enumerate() {
        if a.nrows() != d || a.ncols() != d || b.len() != d {
            return Err(Error::Dimension(format!("state {z}: table shapes do not match d={d}")));
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("state {z}: non-finite table entry")));
        }
    }

    // noise-process invariants
    match &model.noise {
        NoiseProcess::Iid { weights } => {
            if weights.len() != s {
                return Err(Error::Dimension("weights length != S".into()));
            }
            check_simplex(weights, "iid weights")?;
        }
        NoiseProcess::SubGaussianIid { weights, sigma, .. } => {
            if weights.len() != s {
                return Err(Error::Dimension("weights length != S".into()));
            }
            check_simplex(weights, "iid weights")?;
            if sigma.nrows() != d || sigma.ncols() != d {
                return Err(Error::Dimension("additive covariance must be d x d".into()));
            }
        }
        NoiseProcess::Markov { p, xi, t_mix } => {
            if p.nrows() != s || p.ncols() != s || xi.len() != s {
                return Err(Error::Dimension("transition matrix / xi size != S".into()));
            }
            check_simplex(xi, "initial distribution xi")?;
            for z in 0..s {
                let row_sum: f64 = p.row(z).iter().sum();
                if (row_sum - 1.0).abs() > 1e-12 || p.row(z).iter().any(|&x| x < -1e-12) {
                    return Err(Error::Domain(format!("transition row {z} is not a distribution")));
                }
            }
            if *t_mix < 1 {
                return Err(Error::Domain("t_mix must be >= 1".into()));
            }
            // Certificate: δ(P^{t_mix}) ≤ 1/4 gives the geometric envelope for
            // all k by submultiplicativity; spot-check small k directly too.
            let delta = chains::dobrushin_coefficient(p, *t_mix)?;
            if delta > 0.25 + 1e-12 {
                return Err(Error::Assumption(format!(
                    "t_mix certificate failed: delta(P^{t_mix}) = {delta:.6} > 1/4"
                )));
            }
            let k_max = (4 * *t_mix).min(64);
            for k in 1..=k_max {
                let dk = chains::dobrushin_coefficient(p, k)?;
                let envelope = 0.25f64.powi((k / *t_mix) as i32);
                if dk > envelope + 1e-12 {
                    return Err(Error::Assumption(format!(
                        "t_mix certificate failed at k={k}: delta={dk:.6} > (1/4)^{}",
                        k / *t_mix
                    )));
                }
            }
        }
    }

    let pi = model.noise.stationary()?;

    let mut abar = DMatrix::<f64>::zeros(d, d);
    let mut bbar = DVector::<f64>::zeros(d);
    for z in 0..s {
        abar += &model.a_table[z] * pi[z];
        bbar += &model.b_table[z] * pi[z];
    }

    if !spectral::hurwitz_check(&abar)? {
        return Err(Error::Assumption(
            "mean matrix failure: -Abar is not Hurwitz".into(),
        ));
    }
    let theta_star = abar
        .clone()
        .lu()
        .solve(&bbar)
        .ok_or_else(|| Error::Numerical("Abar theta = bbar solve failed".into()))?;

    let mut atilde_table = Vec::with_capacity(s);
    let mut eps_table = Vec::with_capacity(s);
    let mut b_a: f64 = 0.0;
    for z in 0..s {
        let atilde = &model.a_table[z] - &abar;
        let btilde = &model.b_table[z] - &bbar;
        eps_table.push(&atilde * &theta_star - btilde);
        b_a = b_a
            .max(spectral::spectral_norm(&model.a_table[z]))
            .max(spectral::spectral_norm(&atilde));
        atilde_table.push(atilde);
    }
    let eps_sup = eps_table.iter().map(|e| e.norm()).fold(0.0, f64::max);

    let mean_eps: DVector<f64> = (0..s).map(|z| &eps_table[z] * pi[z]).sum();
    if mean_eps.norm() > 1e-10 * (1.0 + eps_sup) {
        return Err(Error::Numerical(format!(
            "stationary mean of epsilon is {:.3e}, expected 0",
            mean_eps.norm()
        )));
    }

    let mut sigma_eps = DMatrix::<f64>::zeros(d, d);
    for z in 0..s {
        sigma_eps += &eps_table[z] * eps_table[z].transpose() * pi[z];
    }
    let mut additive_sigma_sqrt = None;
    if let NoiseProcess::SubGaussianIid {
        sigma, sigma_eps: proxy, ..
    } = &model.noise
    {
        sigma_eps += sigma;
        let lam_max = SymmetricEigen::new((sigma + sigma.transpose()) * 0.5)
            .eigenvalues
            .max();
        if proxy * proxy + 1e-12 < lam_max + eps_sup * eps_sup {
            return Err(Error::Assumption(format!(
                "declared sigma_eps^2 = {:.6} is below lambda_max(Sigma) + sup|eps|^2 = {:.6}",
                proxy * proxy,
                lam_max + eps_sup * eps_sup
            )));
        }
        additive_sigma_sqrt = Some(psd_sqrt(sigma)?);
    }
    sigma_eps = (&sigma_eps + sigma_eps.transpose()) * 0.5;

    Ok(DerivedInstance {
        abar,
        bbar,
        theta_star,
        atilde_table,
        eps_table,
        eps_sup,
        sigma_eps,
        b_a,
        pi,
        additive_sigma_sqrt,
    })
}

/// Synthetic instance families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    RandomHurwitz,
    TdZero,
}

#[derive(Debug, Clone)]
pub struct GenParams {
    /// Scale of the per-state perturbation of `A(z)` around `Ā`.
    pub spread: f64,
    /// Diagonal shift `c` in `Ā = G Gᵀ + c I`.
    pub shift: f64,
    /// Discount factor for the TD(0) family.
    pub gamma: f64,
    /// Scale of `b̄` and of the per-state deviations of `b(z)`.
    pub b_scale: f64,
    /// Generate a Markov noise chain instead of i.i.d. weights.
    pub markov_noise: bool,
    pub max_retries: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            spread: 0.5,
            shift: 0.1,
            gamma: 0.9,
            b_scale: 1.0,
            markov_noise: false,
            max_retries: 16,
        }
    }
}

const GEN_STREAM: u64 = 0x4745_4e45_5241_5445; // "GENERATE"

fn random_stochastic(rng: &mut CounterRng, s: usize, floor: f64) -> DMatrix<f64> {
    let mut p = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        let mut row: Vec<f64> = (0..s).map(|_| floor + rng.next_f64()).collect();
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
        for (j, v) in row.into_iter().enumerate() {
            p[(i, j)] = v;
        }
    }
    p
}

fn random_simplex(rng: &mut CounterRng, s: usize, floor: f64) -> DVector<f64> {
    let mut w: Vec<f64> = (0..s).map(|_| floor + rng.next_f64()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    DVector::from_vec(w)
}

fn noise_for(rng: &mut CounterRng, s: usize, params: &GenParams) -> Result<NoiseProcess> {
    if params.markov_noise {
        let p = random_stochastic(rng, s, 0.1);
        let t_mix = chains::minimal_mixing_time(&p, 1000)?;
        let xi = DVector::from_element(s, 1.0 / s as f64);
        Ok(NoiseProcess::Markov { p, xi, t_mix })
    } else {
        Ok(NoiseProcess::Iid {
            weights: random_simplex(rng, s, 0.2),
        })
    }
}

/// Deterministic synthetic instance generator.
pub fn generate_instance(
    kind: InstanceKind,
    d: usize,
    s: usize,
    seed: u64,
    params: &GenParams,
) -> Result<ObservationModel> {
    if d < 1 || s < 2 {
        return Err(Error::Domain(format!("generator needs d >= 1, S >= 2, got d={d}, S={s}")));
    }
    for attempt in 0..params.max_retries.max(1) as u64 {
        let mut rng = CounterRng::from_key(split_stream(
            split_stream(seed, GEN_STREAM),
            attempt,
        ));
        let model = match kind {
            InstanceKind::RandomHurwitz => gen_random_hurwitz(&mut rng, d, s, params)?,
            InstanceKind::TdZero => gen_tdzero(&mut rng, d, s, params)?,
        };
        if validate_and_derive(&model).is_ok() {
            return Ok(model);
        }
    }
    Err(Error::Domain(format!(
        "could not generate a valid {kind:?} instance after {} attempts",
        params.max_retries.max(1)
    )))
}

fn gen_random_hurwitz(
    rng: &mut CounterRng,
    d: usize,
    s: usize,
    params: &GenParams,
) -> Result<ObservationModel> {
    let noise = noise_for(rng, s, params)?;
    let pi = noise.stationary()?;

    let g = DMatrix::from_fn(d, d, |_, _| rng.next_normal());
    let abar = &g * g.transpose() + DMatrix::identity(d, d) * params.shift;

    // zero-mean (under pi) perturbations keep A2 true by construction
    let raw_e: Vec<DMatrix<f64>> =
        (0..s).map(|_| DMatrix::from_fn(d, d, |_, _| rng.next_normal())).collect();
    let mean_e: DMatrix<f64> = (0..s).map(|z| &raw_e[z] * pi[z]).sum();
    let a_table: Vec<DMatrix<f64>> = (0..s)
        .map(|z| &abar + (&raw_e[z] - &mean_e) * params.spread)
        .collect();

    let bbar = DVector::from_fn(d, |_, _| rng.next_normal()) * params.b_scale;
    let raw_b: Vec<DVector<f64>> =
        (0..s).map(|_| DVector::from_fn(d, |_, _| rng.next_normal())).collect();
    let mean_b: DVector<f64> = (0..s).map(|z| &raw_b[z] * pi[z]).sum();
    let b_table: Vec<DVector<f64>> = (0..s)
        .map(|z| &bbar + (&raw_b[z] - &mean_b) * params.b_scale)
        .collect();

    Ok(ObservationModel { d, s, a_table, b_table, noise })
}

fn gen_tdzero(
    rng: &mut CounterRng,
    d: usize,
    s: usize,
    params: &GenParams,
) -> Result<ObservationModel> {
    if !(0.0..1.0).contains(&params.gamma) {
        return Err(Error::Domain("tdzero needs gamma in [0, 1)".into()));
    }
    let p_mdp = random_stochastic(rng, s, 0.1);
    let rewards: Vec<f64> = (0..s).map(|_| rng.next_normal()).collect();

    // features with full column rank (retry within the generator's budget)
    let mut phi = DMatrix::from_fn(s, d, |_, _| rng.next_normal());
    for _ in 0..8 {
        let sv = phi.clone().svd(false, false).singular_values;
        if sv.min() > 1e-8 * sv.max().max(1.0) {
            break;
        }
        phi = DMatrix::from_fn(s, d, |_, _| rng.next_normal());
    }

    let p_phi = &p_mdp * &phi; // row z = (Pφ)(z)ᵀ
    let a_table: Vec<DMatrix<f64>> = (0..s)
        .map(|z| {
            let f = phi.row(z).transpose();
            let g = f.clone() - p_phi.row(z).transpose() * params.gamma;
            f * g.transpose()
        })
        .collect();
    let b_table: Vec<DVector<f64>> = (0..s)
        .map(|z| phi.row(z).transpose() * rewards[z])
        .collect();

    let noise = if params.markov_noise {
        let t_mix = chains::minimal_mixing_time(&p_mdp, 1000)?;
        NoiseProcess::Markov {
            p: p_mdp,
            xi: DVector::from_element(s, 1.0 / s as f64),
            t_mix,
        }
    } else {
        // observe states i.i.d. from the MDP's stationary law
        NoiseProcess::Iid {
            weights: chains::stationary_distribution(&p_mdp)?,
        }
    };
    Ok(ObservationModel { d, s, a_table, b_table, noise })
}

// ---------------------------------------------------------------------------
// instance file format

/// On-disk JSON schema for an instance. Matrices are nested row-major arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub d: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
    pub noise: NoiseFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFile {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_mix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_eps: Option<f64>,
}

fn matrix_from_rows(rows: &[Vec<f64>], nr: usize, nc: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Parse(format!("{what}: expected {nr}x{nc} nested array")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance json: {e}")))
    }

    pub fn to_model(&self) -> Result<ObservationModel> {
        let (d, s) = (self.d, self.s);
        if self.a.len() != s || self.b.len() != s {
            return Err(Error::Parse(format!("expected {s} entries in A and b")));
        }
        let mut a_table = Vec::with_capacity(s);
        let mut b_table = Vec::with_capacity(s);
        for z in 0..s {
            a_table.push(matrix_from_rows(&self.a[z], d, d, &format!("A[{z}]"))?);
            if self.b[z].len() != d {
                return Err(Error::Parse(format!("b[{z}]: expected {d} entries")));
            }
            b_table.push(DVector::from_vec(self.b[z].clone()));
        }
        let need = |present: bool, name: &str| -> Result<()> {
            if !present {
                return Err(Error::Parse(format!(
                    "noise variant '{}' requires field '{name}'",
                    self.noise.variant
                )));
            }
            Ok(())
        };
        let noise = match self.noise.variant.as_str() {
            "iid" => {
                need(self.noise.weights.is_some(), "weights")?;
                NoiseProcess::Iid {
                    weights: DVector::from_vec(self.noise.weights.clone().unwrap()),
                }
            }
            "markov" => {
                need(self.noise.p.is_some(), "P")?;
                need(self.noise.t_mix.is_some(), "t_mix")?;
                let p = matrix_from_rows(self.noise.p.as_ref().unwrap(), s, s, "P")?;
                let xi = match &self.noise.xi {
                    Some(x) => DVector::from_vec(x.clone()),
                    None => DVector::from_element(s, 1.0 / s as f64),
                };
                NoiseProcess::Markov { p, xi, t_mix: self.noise.t_mix.unwrap() }
            }
            "subgaussian_iid" => {
                need(self.noise.weights.is_some(), "weights")?;
                need(self.noise.sigma.is_some(), "sigma")?;
                need(self.noise.sigma_eps.is_some(), "sigma_eps")?;
                NoiseProcess::SubGaussianIid {
                    weights: DVector::from_vec(self.noise.weights.clone().unwrap()),
                    sigma: matrix_from_rows(self.noise.sigma.as_ref().unwrap(), d, d, "sigma")?,
                    sigma_eps: self.noise.sigma_eps.unwrap(),
                }
            }
            other => {
                return Err(Error::Parse(format!(
                    "unknown noise variant '{other}' (expected iid | markov | subgaussian_iid)"
                )))
            }
        };
        Ok(ObservationModel { d, s, a_table, b_table, noise })
    }

    pub fn from_model(model: &ObservationModel) -> Self {
        let mat_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let noise = match &model.noise {
            NoiseProcess::Iid { weights } => NoiseFile {
                variant: "iid".into(),
                weights: Some(weights.iter().copied().collect()),
                p: None,
                xi: None,
                t_mix: None,
                sigma: None,
                sigma_eps: None,
            },
            NoiseProcess::Markov { p, xi, t_mix } => NoiseFile {
                variant: "markov".into(),
                weights: None,
                p: Some(mat_rows(p)),
                xi: Some(xi.iter().copied().collect()),
                t_mix: Some(*t_mix),
                sigma: None,
                sigma_eps: None,
            },
            NoiseProcess::SubGaussianIid { weights, sigma, sigma_eps } => NoiseFile {
                variant: "subgaussian_iid".into(),
                weights: Some(weights.iter().copied().collect()),
                p: None,
                xi: None,
                t_mix: None,
                sigma: Some(mat_rows(sigma)),
                sigma_eps: Some(*sigma_eps),
            },
        };
        InstanceFile {
            d: model.d,
            s: model.s,
            a: model.a_table.iter().map(mat_rows).collect(),
            b: model.b_table.iter().map(|v| v.iter().copied().collect()).collect(),
            noise,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t1_model() -> ObservationModel {
        ObservationModel {
            d: 1,
            s: 2,
            a_table: vec![DMatrix::from_element(1, 1, 1.0); 2],
            b_table: vec![
                DVector::from_element(1, 1.5),
                DVector::from_element(1, 0.5),
            ],
            noise: NoiseProcess::Iid {
                weights: DVector::from_element(2, 0.5),
            },
        }
    }

    fn t2_model() -> ObservationModel {
        let mut m = t1_model();
        m.noise = NoiseProcess::Markov {
            p: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]),
            xi: DVector::from_element(2, 0.5),
            t_mix: 4,
        };
        m
    }

    #[test]
    fn t1_derivation() {
        let inst = Instance::new(t1_model()).unwrap();
        let dv = &inst.derived;
        assert_relative_eq!(dv.abar[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(dv.bbar[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(dv.theta_star[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(dv.eps_table[0][0], -0.5, epsilon = 1e-14);
        assert_relative_eq!(dv.eps_table[1][0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(dv.sigma_eps[(0, 0)], 0.25, epsilon = 1e-14);
        assert_relative_eq!(dv.eps_sup, 0.5, epsilon = 1e-14);
        assert_relative_eq!(dv.b_a, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn t2_derivation() {
        let inst = Instance::new(t2_model()).unwrap();
        let dv = &inst.derived;
        assert_relative_eq!(dv.pi[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(dv.pi[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(dv.bbar[0], 7.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(dv.theta_star[0], 7.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(dv.eps_table[0][0], -1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(dv.eps_table[1][0], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_tables_give_zero_eps() {
        let mut m = t1_model();
        m.b_table = vec![DVector::from_element(1, 1.0); 2];
        let inst = Instance::new(m).unwrap();
        assert_eq!(inst.derived.eps_sup, 0.0);
        assert_eq!(inst.derived.sigma_eps[(0, 0)], 0.0);
    }

    #[test]
    fn bad_t_mix_is_rejected() {
        let mut m = t2_model();
        if let NoiseProcess::Markov { t_mix, .. } = &mut m.noise {
            *t_mix = 2; // delta(P^2) = 0.49 > 1/4
        }
        assert!(matches!(Instance::new(m), Err(Error::Assumption(_))));
    }

    #[test]
    fn non_hurwitz_mean_is_rejected() {
        let mut m = t1_model();
        m.a_table = vec![DMatrix::from_element(1, 1, -1.0); 2];
        assert!(matches!(Instance::new(m), Err(Error::Assumption(_))));
    }

    #[test]
    fn subgaussian_proxy_check() {
        let mut m = t1_model();
        m.noise = NoiseProcess::SubGaussianIid {
            weights: DVector::from_element(2, 0.5),
            sigma: DMatrix::from_element(1, 1, 0.04),
            sigma_eps: 0.1, // 0.01 < 0.04 + 0.25
        };
        assert!(matches!(Instance::new(m.clone()), Err(Error::Assumption(_))));
        if let NoiseProcess::SubGaussianIid { sigma_eps, .. } = &mut m.noise {
            *sigma_eps = 0.6; // 0.36 >= 0.29
        }
        let inst = Instance::new(m).unwrap();
        assert_relative_eq!(inst.derived.sigma_eps[(0, 0)], 0.29, epsilon = 1e-12);
        assert_relative_eq!(
            inst.derived.additive_sigma_sqrt.as_ref().unwrap()[(0, 0)],
            0.2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn generators_validate_and_are_deterministic() {
        for seed in [0u64, 1, 7] {
            let p = GenParams::default();
            let m1 = generate_instance(InstanceKind::RandomHurwitz, 3, 5, seed, &p).unwrap();
            let m2 = generate_instance(InstanceKind::RandomHurwitz, 3, 5, seed, &p).unwrap();
            assert_eq!(m1.a_table, m2.a_table);
            assert_eq!(m1.b_table, m2.b_table);
            validate_and_derive(&m1).unwrap();
        }
    }

    #[test]
    fn zero_spread_freezes_a() {
        let params = GenParams { spread: 0.0, ..GenParams::default() };
        let m = generate_instance(InstanceKind::RandomHurwitz, 1, 2, 0, &params).unwrap();
        assert_relative_eq!(
            m.a_table[0][(0, 0)],
            m.a_table[1][(0, 0)],
            epsilon = 1e-14
        );
        let dv = validate_and_derive(&m).unwrap();
        // with A(z) constant the noise varies only through b
        assert!(dv.eps_sup > 0.0);
        assert_relative_eq!(dv.atilde_table[0][(0, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn tdzero_shape() {
        let params = GenParams { markov_noise: true, ..GenParams::default() };
        let m = generate_instance(InstanceKind::TdZero, 2, 4, 7, &params).unwrap();
        let dv = validate_and_derive(&m).unwrap();
        assert!(spectral::hurwitz_check(&dv.abar).unwrap());
        // Abar generically nonsymmetric for TD(0)
        assert!((dv.abar[(0, 1)] - dv.abar[(1, 0)]).abs() > 1e-9);
    }

    #[test]
    fn instance_file_round_trip() {
        let m = t2_model();
        let file = InstanceFile::from_model(&m);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back = InstanceFile::parse(&text).unwrap().to_model().unwrap();
        assert_eq!(back.a_table, m.a_table);
        assert_eq!(back.b_table, m.b_table);
        assert!(back.noise.is_markov());
    }

    #[test]
    fn unknown_json_fields_are_rejected() {
        let text = r#"{"d":1,"S":1,"A":[[[1.0]]],"b":[[1.0]],"noise":{"variant":"iid","weights":[1.0]},"extra":1}"#;
        assert!(InstanceFile::parse(text).is_err());
    }

    #[test]
    fn scaling_leaves_theta_star_fixed() {
        let base = generate_instance(InstanceKind::RandomHurwitz, 2, 3, 11, &GenParams::default()).unwrap();
        let scale = 7.0;
        let scaled = ObservationModel {
            a_table: base.a_table.iter().map(|a| a * scale).collect(),
            b_table: base.b_table.iter().map(|b| b * scale).collect(),
            ..base.clone()
        };
        let d1 = validate_and_derive(&base).unwrap();
        let d2 = validate_and_derive(&scaled).unwrap();
        for i in 0..2 {
            assert_relative_eq!(d1.theta_star[i], d2.theta_star[i], epsilon = 1e-12);
        }
    }
}
