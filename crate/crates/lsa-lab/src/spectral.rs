//! Lyapunov machinery and step-size thresholds.
//!
//! Everything downstream (stability certificates, bound constants, step-size
//! eligibility) is driven by the solution `Q` of the Lyapunov equation
//! `Āᵀ Q + Q Ā = I` and a handful of scalars derived from it.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// True iff every eigenvalue of `abar` has strictly positive real part,
/// i.e. `-abar` is Hurwitz.
pub fn hurwitz_check(abar: &DMatrix<f64>) -> Result<bool> {
    if !abar.is_square() {
        return Err(Error::Dimension(format!(
            "hurwitz_check expects a square matrix, got {}x{}",
            abar.nrows(),
            abar.ncols()
        )));
    }
    if abar.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    Ok(abar.complex_eigenvalues().iter().all(|ev| ev.re > 0.0))
}

/// Solution of `Āᵀ Q + Q Ā = I` with its symmetric square root.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub q: DMatrix<f64>,
    pub q_sqrt: DMatrix<f64>,
    /// Spectral norm of `Āᵀ Q + Q Ā − I`.
    pub residual_norm: f64,
}

/// Symmetric square root and inverse square root of an SPD matrix.
///
/// Fails if the matrix is visibly asymmetric or has a non-positive
/// eigenvalue; positive definiteness is a precondition we check, not repair.
fn sym_sqrt_pair(q: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let scale = spectral_norm(q).max(1.0);
    if spectral_norm(&(q - q.transpose())) > 1e-10 * scale {
        return Err(Error::Domain("matrix is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(q.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Domain(format!(
            "matrix is not positive definite (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    let v = &eig.eigenvectors;
    let sqrt = v * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * v.transpose();
    let inv_sqrt =
        v * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * v.transpose();
    // symmetrize away round-off from the triple product
    Ok((
        (&sqrt + sqrt.transpose()) * 0.5,
        (&inv_sqrt + inv_sqrt.transpose()) * 0.5,
    ))
}

/// Solves `Āᵀ Q + Q Ā = I` by a dense Kronecker-vectorized linear solve.
///
/// With column-major `vec`, the system reads
/// `(I ⊗ Āᵀ + Āᵀ ⊗ I) vec(Q) = vec(I)`.
pub fn solve_lyapunov(abar: &DMatrix<f64>) -> Result<LyapunovSolution> {
    if !hurwitz_check(abar)? {
        return Err(Error::Assumption(
            "-Abar is not Hurwitz: an eigenvalue of Abar has non-positive real part".into(),
        ));
    }
    let d = abar.nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let at = abar.transpose();
    let system = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DMatrix::<f64>::identity(d, d);
    let rhs_vec = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let sol = system
        .lu()
        .solve(&rhs_vec)
        .ok_or_else(|| Error::Numerical("Lyapunov system is singular".into()))?;
    let q_raw = DMatrix::from_column_slice(d, d, sol.as_slice());
    let q = (&q_raw + q_raw.transpose()) * 0.5;

    let residual_norm = spectral_norm(&(abar.transpose() * &q + &q * abar - &eye));
    let tol = 1e-10 * d as f64;
    if residual_norm > tol {
        return Err(Error::Numerical(format!(
            "Lyapunov residual {residual_norm:.3e} exceeds tolerance {tol:.3e}"
        )));
    }
    let (q_sqrt, _) = sym_sqrt_pair(&q)
        .map_err(|e| Error::Numerical(format!("Lyapunov solution is not SPD: {e}")))?;
    Ok(LyapunovSolution {
        q,
        q_sqrt,
        residual_norm,
    })
}

/// `‖M‖_Q = ‖Q^{1/2} M Q^{-1/2}‖` for SPD `Q`.
pub fn weighted_operator_norm(m: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() || m.nrows() != q.nrows() {
        return Err(Error::Dimension(
            "weighted_operator_norm expects square matrices of equal size".into(),
        ));
    }
    let (sqrt, inv_sqrt) = sym_sqrt_pair(q)?;
    Ok(spectral_norm(&(&sqrt * m * &inv_sqrt)))
}

/// Step-size thresholds and contraction constants for the i.i.d. regime.
#[derive(Debug, Clone)]
pub struct StabilityConstants {
    pub d: usize,
    pub lyapunov: LyapunovSolution,
    /// `‖Q‖`
    pub q_norm: f64,
    /// `‖Ā‖_Q`
    pub abar_q_norm: f64,
    /// Contraction rate `a = ‖Q‖^{-1}/2`.
    pub a: f64,
    /// `α_∞ = min{ (1/2) ‖Ā‖_Q^{-2} ‖Q‖^{-1}, ‖Q‖ }`
    pub alpha_inf: f64,
    /// Condition number `λ_max(Q)/λ_min(Q)`.
    pub kappa_q: f64,
    /// `b_Q = 2 √κ_Q · b_A`
    pub b_q: f64,
    /// `c_A = a/(2 b_Q²)`; `+∞` when `b_A = 0` (noiseless degenerate case).
    pub c_a: f64,
    /// `b_A = sup_z ‖A(z)‖ ∨ sup_z ‖Ã(z)‖`
    pub b_a: f64,
}

impl StabilityConstants {
    /// `α_{q,∞} = α_∞ ∧ c_A/q`
    pub fn alpha_q_inf(&self, q: f64) -> f64 {
        self.alpha_inf.min(self.c_a / q)
    }

    /// The degenerate `b_A = 0` case where `c_A` is an infinite sentinel.
    pub fn degenerate(&self) -> bool {
        !self.c_a.is_finite()
    }
}

pub fn iid_stability_constants(abar: &DMatrix<f64>, b_a: f64) -> Result<StabilityConstants> {
    if !(b_a >= 0.0) {
        return Err(Error::Domain(format!("b_A must be >= 0, got {b_a}")));
    }
    let lyapunov = solve_lyapunov(abar)?;
    let q_norm = spectral_norm(&lyapunov.q);
    let abar_q_norm = weighted_operator_norm(abar, &lyapunov.q)?;
    let a = 0.5 / q_norm;
    let alpha_inf = (0.5 / (abar_q_norm * abar_q_norm * q_norm)).min(q_norm);

    let eigs = lyapunov.q.symmetric_eigenvalues();
    let kappa_q = eigs.max() / eigs.min();
    let b_q = 2.0 * kappa_q.sqrt() * b_a;
    let c_a = if b_a == 0.0 {
        f64::INFINITY
    } else {
        a / (2.0 * b_q * b_q)
    };
    Ok(StabilityConstants {
        d: abar.nrows(),
        lyapunov,
        q_norm,
        abar_q_norm,
        a,
        alpha_inf,
        kappa_q,
        b_q,
        c_a,
        b_a,
    })
}

/// Markov-regime thresholds derived from [`StabilityConstants`] and `t_mix`.
#[derive(Debug, Clone)]
pub struct MarkovStabilityConstants {
    /// `α_∞^(M) = [α_∞ ∧ (κ_Q^{1/2} b_A)^{-1} ∧ a/(6e κ_Q b_A)] / ⌈8 κ_Q^{1/2} b_A / a⌉`
    pub alpha_inf_m: f64,
    /// `C_Γ = 4 (κ_Q^{1/2} b_A + a/6)² ⌈8 κ_Q^{1/2} b_A / a⌉`
    pub c_gamma: f64,
    /// `c_A^(M) = a/(12 C_Γ)`
    pub c_a_m: f64,
    /// Block length `h = 1 ∨ ⌈8 κ_Q^{1/2} b_A t_mix / a⌉`.
    pub block_h: u64,
    pub t_mix: u64,
}

impl MarkovStabilityConstants {
    /// `α_{q,∞}^(M) = α_∞^(M) ∧ c_A^(M)/q`
    pub fn alpha_q_inf_m(&self, q: f64) -> f64 {
        self.alpha_inf_m.min(self.c_a_m / q)
    }
}

pub fn markov_stability_constants(
    consts: &StabilityConstants,
    t_mix: u64,
) -> Result<MarkovStabilityConstants> {
    if t_mix < 1 {
        return Err(Error::Domain("t_mix must be >= 1".into()));
    }
    let (a, kappa_q, b_a) = (consts.a, consts.kappa_q, consts.b_a);
    let sk = kappa_q.sqrt();
    // ⌈8 κ^{1/2} b_A / a⌉, clamped to 1 so the degenerate b_A = 0 case stays finite
    let ceil_term = ((8.0 * sk * b_a / a).ceil() as u64).max(1);
    let base = consts
        .alpha_inf
        .min(1.0 / (sk * b_a))
        .min(a / (6.0 * std::f64::consts::E * kappa_q * b_a));
    let alpha_inf_m = base / ceil_term as f64;
    let c_sigma = 2.0 * (sk * b_a + a / 6.0);
    let c_gamma = c_sigma * c_sigma * ceil_term as f64;
    let c_a_m = a / (12.0 * c_gamma);
    let block_h = ((8.0 * sk * b_a * t_mix as f64 / a).ceil() as u64).max(1);
    Ok(MarkovStabilityConstants {
        alpha_inf_m,
        c_gamma,
        c_a_m,
        block_h,
        t_mix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn hurwitz_examples() {
        assert!(hurwitz_check(&DMatrix::identity(2, 2)).unwrap());
        assert!(!hurwitz_check(&m(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap());
        assert!(hurwitz_check(&m(2, 2, &[2.0, 1.0, 0.0, 1.0])).unwrap());
        assert!(matches!(
            hurwitz_check(&m(1, 2, &[1.0, 2.0])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn lyapunov_identity_and_scalar() {
        let sol = solve_lyapunov(&DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(sol.q[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(sol.q[(1, 1)], 0.5, epsilon = 1e-14);
        assert!(sol.q[(0, 1)].abs() < 1e-14);

        let sol = solve_lyapunov(&m(1, 1, &[2.0])).unwrap();
        assert_relative_eq!(sol.q[(0, 0)], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_upper_triangular_oracle() {
        // For Ā = [[2,1],[0,1]] the three independent equations give
        // Q = [[1/4, -1/12], [-1/12, 7/12]].
        let sol = solve_lyapunov(&m(2, 2, &[2.0, 1.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(sol.q[(0, 0)], 0.25, epsilon = 1e-12);
        assert_relative_eq!(sol.q[(0, 1)], -1.0 / 12.0, epsilon = 1e-12);
        assert_relative_eq!(sol.q[(1, 0)], -1.0 / 12.0, epsilon = 1e-12);
        assert_relative_eq!(sol.q[(1, 1)], 7.0 / 12.0, epsilon = 1e-12);
        assert!(sol.residual_norm <= 2e-10);
        let qq = &sol.q_sqrt * &sol.q_sqrt;
        assert_relative_eq!(qq[(0, 0)], sol.q[(0, 0)], max_relative = 1e-10);
        assert_relative_eq!(qq[(1, 1)], sol.q[(1, 1)], max_relative = 1e-10);
    }

    #[test]
    fn lyapunov_rejects_non_hurwitz() {
        assert!(matches!(
            solve_lyapunov(&m(2, 2, &[0.0, 1.0, -1.0, 0.0])),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn weighted_norm_examples() {
        let q = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 4.0]);
        assert_relative_eq!(
            weighted_operator_norm(&DMatrix::identity(2, 2), &q).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            weighted_operator_norm(&DMatrix::zeros(2, 2), &q).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        let diag13 = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 3.0]);
        assert_relative_eq!(
            weighted_operator_norm(&diag13, &q).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        let not_spd = DMatrix::from_diagonal(&nalgebra::dvector![1.0, -1.0]);
        assert!(weighted_operator_norm(&diag13, &not_spd).is_err());
    }

    #[test]
    fn iid_constants_scalar_chain() {
        let c = iid_stability_constants(&m(1, 1, &[1.0]), 1.0).unwrap();
        assert_relative_eq!(c.q_norm, 0.5, epsilon = 1e-14);
        assert_relative_eq!(c.a, 1.0, epsilon = 1e-13);
        assert_relative_eq!(c.kappa_q, 1.0, epsilon = 1e-13);
        assert_relative_eq!(c.alpha_inf, 0.5, epsilon = 1e-13);
        assert_relative_eq!(c.b_q, 2.0, epsilon = 1e-13);
        assert_relative_eq!(c.c_a, 0.125, epsilon = 1e-13);
        assert_relative_eq!(c.alpha_q_inf(2.0), 0.0625, epsilon = 1e-13);
        assert!(c.a * c.alpha_inf <= 0.5 + 1e-15);
    }

    #[test]
    fn iid_constants_identity_d3() {
        let c = iid_stability_constants(&DMatrix::identity(3, 3), 2.0).unwrap();
        assert_relative_eq!(c.kappa_q, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.b_q, 4.0, epsilon = 1e-12);
        assert_relative_eq!(c.c_a, 1.0 / 32.0, epsilon = 1e-12);
    }

    #[test]
    fn iid_constants_scale_covariance() {
        let base = m(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let c1 = iid_stability_constants(&base, 1.0).unwrap();
        let scale = 10.0;
        let c2 = iid_stability_constants(&(&base * scale), scale).unwrap();
        assert_relative_eq!(c2.a, scale * c1.a, max_relative = 1e-9);
        assert_relative_eq!(c2.kappa_q, c1.kappa_q, max_relative = 1e-9);
        assert_relative_eq!(c2.alpha_inf, c1.alpha_inf / scale, max_relative = 1e-9);
        assert!(c2.a * c2.alpha_inf <= 0.5 + 1e-12);
    }

    #[test]
    fn degenerate_b_a_gives_infinite_c_a() {
        let c = iid_stability_constants(&m(1, 1, &[1.0]), 0.0).unwrap();
        assert!(c.degenerate());
        assert_eq!(c.alpha_q_inf(4.0), c.alpha_inf);
    }

    #[test]
    fn markov_constants_scalar_chain() {
        let c = iid_stability_constants(&m(1, 1, &[1.0]), 1.0).unwrap();
        let mc = markov_stability_constants(&c, 4).unwrap();
        assert_relative_eq!(
            mc.alpha_inf_m,
            1.0 / (48.0 * std::f64::consts::E),
            max_relative = 1e-12
        );
        assert_relative_eq!(mc.c_gamma, 1568.0 / 36.0, max_relative = 1e-12);
        assert_relative_eq!(mc.c_a_m, 3.0 / 1568.0, max_relative = 1e-12);
        assert_eq!(mc.block_h, 32);
        assert!(mc.alpha_q_inf_m(2.0) <= mc.alpha_inf_m);

        let mc1 = markov_stability_constants(&c, 1).unwrap();
        assert_eq!(mc1.block_h, 8);
    }

    #[test]
    fn markov_constants_degenerate_block() {
        let c = iid_stability_constants(&m(1, 1, &[1.0]), 0.0).unwrap();
        let mc = markov_stability_constants(&c, 1).unwrap();
        assert_eq!(mc.block_h, 1);
    }
}
