//! The truncated G-matrix.
//!
//! `G^(N)` is the minimal nonnegative solution of
//! `G = sum_{m=-1}^{N} A^(N)_m G^{m+1}`, obtained as the limit of the
//! functional iteration started from the zero matrix. The iterates increase
//! monotonically, which is what makes the limit the minimal solution.

use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{Error, Result};
use crate::model::TruncatedModel;
use crate::numerics::{self, ProbabilityVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GOptions {
    fn default() -> Self {
        GOptions {
            tol: 1e-12,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GSolution {
    pub g_matrix: DMatrix<f64>,
    /// Stationary vector of `G`; `None` when `G` is not stochastic enough to have one.
    pub g_vec: Option<ProbabilityVector>,
    /// `Phi_0^(N) = sum_{m=0}^{N} A^(N)_m G^m`.
    pub phi0: DMatrix<f64>,
    pub iterations: usize,
    /// `|| G - sum_m A^(N)_m G^{m+1} ||_inf` at the returned iterate.
    pub residual: f64,
    /// Largest elementwise decrease seen between consecutive iterates (0 in exact arithmetic).
    pub max_monotone_violation: f64,
    /// Second-largest eigenvalue modulus, filled by [`spectral_gap`] on request.
    pub slem: Option<f64>,
}

/// `sum_{m=0}^{N} A^(N)_m X^m` by Horner's scheme.
fn phi_poly(tm: &TruncatedModel, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = tm.n() as isize;
    let mut acc = tm.a_ref(n).clone();
    for m in (0..n).rev() {
        acc = tm.a_ref(m) + &acc * x;
    }
    acc
}

/// `sum_{m=-1}^{N} A^(N)_m X^{m+1}`.
fn g_map(tm: &TruncatedModel, x: &DMatrix<f64>) -> DMatrix<f64> {
    tm.a_ref(-1) + phi_poly(tm, x) * x
}

/// Natural fixed-point iteration from `G_0 = O`; stops at the first iterate whose
/// step `|| G_n - G_{n-1} ||_inf` is at most `tol`.
pub fn solve_g(tm: &TruncatedModel, opts: GOptions) -> Result<GSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition("G tolerance must be positive".into()));
    }
    let m1 = tm.m1();
    let mut g = DMatrix::zeros(m1, m1);
    let mut violation: f64 = 0.0;
    let mut step = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let next = g_map(tm, &g);
        let diff = &next - &g;
        violation = violation.max(-diff.min());
        step = numerics::norm_inf(&diff);
        g = next;
        if step <= opts.tol {
            let phi0 = phi_poly(tm, &g);
            let residual = numerics::norm_inf(&(&g - (tm.a_ref(-1) + &phi0 * &g)));
            let g_vec = g_stationary(&g).ok();
            return Ok(GSolution {
                g_matrix: g,
                g_vec,
                phi0,
                iterations: it,
                residual,
                max_monotone_violation: violation,
                slem: None,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        step,
    })
}

/// `Phi_0^(N)`; fails when `I - Phi_0^(N)` is singular.
pub fn phi0(tm: &TruncatedModel, gsol: &GSolution) -> Result<DMatrix<f64>> {
    let phi = phi_poly(tm, &gsol.g_matrix);
    numerics::fundamental_inverse(&phi)?;
    Ok(phi)
}

/// Stationary vector `g` of a stochastic `G`.
pub fn g_stationary(g: &DMatrix<f64>) -> Result<ProbabilityVector> {
    numerics::stationary_vector(g)
}

/// Second-largest eigenvalue modulus of `G`; 0 for a 1x1 matrix.
///
/// The empirical geometric-ergodicity margin is `1/slem - 1`.
pub fn spectral_gap(gsol: &mut GSolution) -> Result<f64> {
    let slem = slem(&gsol.g_matrix)?;
    gsol.slem = Some(slem);
    Ok(slem)
}

pub fn slem(g: &DMatrix<f64>) -> Result<f64> {
    if g.nrows() <= 1 {
        return Ok(0.0);
    }
    let eig: Vec<Complex<f64>> = Schur::try_new(g.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    if eig.iter().any(|z| !z.norm().is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    // drop the Perron root (closest to 1), keep the largest of the rest
    let perron = eig
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(eig
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != perron)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max))
}

/// Empirical margin `1/slem - 1` (infinite when `slem = 0`).
pub fn ergodicity_margin(slem: f64) -> f64 {
    if slem == 0.0 {
        f64::INFINITY
    } else {
        1.0 / slem - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{truncate, Mg1Model, TailSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn geo1_g_is_one() {
        let tm = truncate(&geo1(), 20).unwrap();
        let opts = GOptions {
            tol: 1e-13,
            ..Default::default()
        };
        let sol = solve_g(&tm, opts).unwrap();
        // error of a contraction with rate 0.95 is at most 20 steps
        assert_abs_diff_eq!(sol.g_matrix[(0, 0)], 1.0, epsilon = 20.0 * 1e-13 + 1e-15);
        assert!(sol.residual <= 1e-13);
        assert_eq!(sol.max_monotone_violation, 0.0);
        assert_abs_diff_eq!(sol.phi0[(0, 0)], 0.45, epsilon = 1e-11);
        assert_abs_diff_eq!(sol.g_vec.as_ref().unwrap()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_down_moves_give_identity() {
        let m = Mg1Model::new(
            2,
            2,
            vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)],
            DMatrix::identity(2, 2),
            vec![DMatrix::identity(2, 2)],
            TailSpec::Finite,
        )
        .unwrap();
        for n in [1, 3, 8] {
            let sol = solve_g(&truncate(&m, n).unwrap(), GOptions::default()).unwrap();
            assert_eq!(sol.g_matrix, DMatrix::identity(2, 2));
            assert!(sol.iterations <= 2);
            assert_eq!(sol.phi0, DMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn mp2_self_consistent() {
        let tm = truncate(&mp2(), 30).unwrap();
        let sol = solve_g(&tm, GOptions::default()).unwrap();
        let tight = solve_g(
            &tm,
            GOptions {
                tol: 1e-15,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((&sol.g_matrix - &tight.g_matrix).amax() <= 1e-10);
        assert!((&tight.g_matrix - g_map(&tm, &tight.g_matrix)).amax() <= 1e-14);
        let rows = numerics::row_sums(&tight.g_matrix);
        assert!(rows.iter().all(|r| (r - 1.0).abs() < 1e-13));
        let phi_rows = numerics::row_sums(&phi0(&tm, &tight).unwrap());
        assert!(phi_rows.iter().all(|&r| r < 1.0));
    }

    #[test]
    fn a0_only_phi0() {
        let tm = truncate(&scalar_finite(&[0.7, 0.3], 0.7, &[1.0]).unwrap(), 3).unwrap();
        let sol = solve_g(&tm, GOptions::default()).unwrap();
        assert_abs_diff_eq!(phi0(&tm, &sol).unwrap()[(0, 0)], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn g_vec_matches_power_iteration() {
        let tm = truncate(&mp2(), 30).unwrap();
        let sol = solve_g(&tm, GOptions { tol: 1e-15, ..Default::default() }).unwrap();
        let g = sol.g_vec.unwrap();
        let mut v = nalgebra::RowDVector::from_element(2, 0.5);
        for _ in 0..5000 {
            v = &v * &sol.g_matrix;
            v /= v.sum();
        }
        assert!((g.as_row() - v).amax() <= 1e-10);
    }

    #[test]
    fn g_stationary_examples() {
        assert_eq!(g_stationary(&DMatrix::from_element(1, 1, 1.0)).unwrap()[0], 1.0);
        let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(g_stationary(&flip).unwrap()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn slem_examples() {
        assert_eq!(slem(&DMatrix::from_element(1, 1, 1.0)).unwrap(), 0.0);
        let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(slem(&flip).unwrap(), 1.0, epsilon = 1e-12);
        let lazy = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        assert_abs_diff_eq!(slem(&lazy).unwrap(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(ergodicity_margin(0.8), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn max_iter_exceeded() {
        let tm = truncate(&geo1(), 10).unwrap();
        let err = solve_g(&tm, GOptions { tol: 1e-12, max_iter: 5 }).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 5, .. }));
    }

    #[test]
    fn g_converges_in_n() {
        let m = mp2();
        let opts = GOptions { tol: 1e-15, ..Default::default() };
        let reference = solve_g(&truncate(&m, 120).unwrap(), opts).unwrap().g_matrix;
        let gaps: Vec<f64> = [5, 10, 20, 40]
            .iter()
            .map(|&n| (solve_g(&truncate(&m, n).unwrap(), opts).unwrap().g_matrix - &reference).amax())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0] || w[1] < 1e-13), "{gaps:?}");
    }
}
