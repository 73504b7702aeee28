//! Ramaswami's recursion on the truncated chain.
//!
//! For `k = 1..N`
//!
//! ```text
//! R^(N)(k)   = sum_{m=0}^{N-k} A^(N)_{k+m} G^m [I - Phi_0]^{-1}
//! R_0^(N)(k) = sum_{m=0}^{N-k} B^(N)_{k+m} G^m [I - Phi_0]^{-1}
//! pi_k       = pi_0 R_0(k) + sum_{l=1}^{k-1} pi_l R(k - l)
//! ```
//!
//! Both kernel sequences share the suffix recursion `S_k = X_k + S_{k+1} G`,
//! so all `N` kernels cost `O(N)` matrix products.

use std::collections::VecDeque;

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};
use crate::gmatrix::{self, GOptions, GSolution};
use crate::model::{truncate, Mg1Model, TruncatedModel};
use crate::numerics::{self, ProbabilityVector};

#[derive(Debug, Clone)]
pub struct RamaswamiKernels {
    /// `r_seq[k - 1] = R^(N)(k)`, `k = 1..N`.
    pub r_seq: Vec<DMatrix<f64>>,
    /// `r0_seq[k - 1] = R_0^(N)(k)`.
    pub r0_seq: Vec<DMatrix<f64>>,
    pub r_sum: DMatrix<f64>,
    pub r0_sum: DMatrix<f64>,
    /// Censored transition matrix of level 0.
    pub k_matrix: DMatrix<f64>,
    pub kappa: ProbabilityVector,
}

/// Builds `R^(N)(k)`, `R_0^(N)(k)`, `K^(N)` and `kappa^(N)`.
///
/// `K = B_0 + R_0(1) B_{-1}`, i.e. `B_0 + sum_{m>=1} B_m G^{m-1} [I - Phi_0]^{-1} B_{-1}`.
/// When `B_{-1} = A_{-1}` this is `B_0 + sum_{m>=1} B_m G^m`.
pub fn kernels(tm: &TruncatedModel, gsol: &GSolution) -> Result<RamaswamiKernels> {
    let n = tm.n();
    let g = &gsol.g_matrix;
    let inv = numerics::fundamental_inverse(&gsol.phi0)?;
    let mut r_seq = vec![DMatrix::zeros(tm.m1(), tm.m1()); n];
    let mut r0_seq = vec![DMatrix::zeros(tm.m0(), tm.m1()); n];
    let mut sa = tm.a_ref(n as isize).clone();
    let mut sb = tm.b_ref(n).clone();
    for k in (1..=n).rev() {
        if k < n {
            sa = tm.a_ref(k as isize) + &sa * g;
            sb = tm.b_ref(k) + &sb * g;
        }
        r_seq[k - 1] = &sa * &inv;
        r0_seq[k - 1] = &sb * &inv;
    }
    let r_sum = r_seq.iter().fold(DMatrix::zeros(tm.m1(), tm.m1()), |acc, r| acc + r);
    let r0_sum = r0_seq.iter().fold(DMatrix::zeros(tm.m0(), tm.m1()), |acc, r| acc + r);
    let k_matrix = tm.b_ref(0) + &r0_seq[0] * tm.b_minus1();
    if !numerics::is_irreducible(&k_matrix) {
        return Err(Error::Reducible("K^(N) is reducible".into()));
    }
    let kappa = numerics::stationary_vector(&k_matrix)?;
    Ok(RamaswamiKernels {
        r_seq,
        r0_seq,
        r_sum,
        r0_sum,
        k_matrix,
        kappa,
    })
}

impl RamaswamiKernels {
    pub fn n(&self) -> usize {
        self.r_seq.len()
    }

    /// `pi_0 = kappa / (kappa 1 + kappa R_0 [I - R]^{-1} 1)`.
    pub fn boundary_vector(&self) -> Result<RowDVector<f64>> {
        let y = numerics::fundamental_solve_ones(&self.r_sum)?;
        let upper = (self.kappa.as_row() * &self.r0_sum * y)[0];
        Ok(self.kappa.as_row() / (1.0 + upper))
    }

    /// Runs the level recursion until the accumulated mass reaches `1 - mass_tol`
    /// or `k_cap` levels have been produced.
    pub fn level_distribution(&self, mass_tol: f64, k_cap: usize) -> Result<LevelDistribution> {
        let n = self.n();
        let pi0 = self.boundary_vector()?;
        let m1 = self.r_sum.nrows();
        let mut acc = pi0.sum();
        let mut pis: Vec<RowDVector<f64>> = Vec::new();
        // the last N level vectors, newest at the back
        let mut window: VecDeque<RowDVector<f64>> = VecDeque::with_capacity(n);
        let mut k = 0usize;
        while acc < 1.0 - mass_tol && k < k_cap {
            k += 1;
            let mut v = if k <= n {
                &pi0 * &self.r0_seq[k - 1]
            } else {
                RowDVector::zeros(m1)
            };
            for (back, prev) in window.iter().rev().enumerate() {
                // prev is pi_{k-1-back}, jump size back + 1
                v += prev * &self.r_seq[back];
            }
            acc += v.sum();
            if window.len() == n {
                window.pop_front();
            }
            window.push_back(v.clone());
            pis.push(v);
        }
        let tail_mass = 1.0 - acc;
        Ok(LevelDistribution {
            pi0,
            pis,
            tail_mass,
            n_trunc: n,
            is_reference: false,
            hit_cap: tail_mass > mass_tol,
            residual_bound: None,
        })
    }
}

/// Level-wise stationary (or approximate) distribution `pi_0, pi_1, ..., pi_kmax`.
#[derive(Debug, Clone)]
pub struct LevelDistribution {
    pub pi0: RowDVector<f64>,
    /// `pis[k - 1] = pi_k`.
    pub pis: Vec<RowDVector<f64>>,
    /// `1 -` accumulated mass.
    pub tail_mass: f64,
    pub n_trunc: usize,
    pub is_reference: bool,
    /// Set when the level cap stopped the recursion before the mass target.
    pub hit_cap: bool,
    /// Estimated distance to the untruncated `pi` (reference solutions only).
    pub residual_bound: Option<f64>,
}

impl LevelDistribution {
    pub fn k_max(&self) -> usize {
        self.pis.len()
    }

    /// `pi_k`, or `None` beyond the computed range.
    pub fn level(&self, k: usize) -> Option<&RowDVector<f64>> {
        if k == 0 {
            Some(&self.pi0)
        } else {
            self.pis.get(k - 1)
        }
    }

    pub fn level_mass(&self, k: usize) -> f64 {
        self.level(k).map_or(0.0, |v| v.sum())
    }

    pub fn total_mass(&self) -> f64 {
        self.pi0.sum() + self.pis.iter().map(|v| v.sum()).sum::<f64>()
    }

    /// `pi-bar_0 = sum_{l >= 1} pi_l` over the computed range.
    pub fn upper_mass(&self) -> RowDVector<f64> {
        let m1 = self.pis.first().map_or(0, |v| v.len());
        self.pis.iter().fold(RowDVector::zeros(m1), |acc, v| acc + v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub g: GOptions,
    pub mass_tol: f64,
    /// Level cap; `None` means `10 N + 1000`.
    pub k_cap: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            g: GOptions::default(),
            mass_tol: 1e-12,
            k_cap: None,
        }
    }
}

impl SolveOptions {
    pub fn cap_for(&self, n: usize) -> usize {
        self.k_cap.unwrap_or(10 * n + 1000)
    }
}

/// Everything computed for one truncation level.
#[derive(Debug, Clone)]
pub struct TruncatedSolution {
    pub truncated: TruncatedModel,
    pub g: GSolution,
    pub kernels: RamaswamiKernels,
    pub distribution: LevelDistribution,
}

/// `pi^(N)` through the whole pipeline.
pub fn solve_truncated(model: &Mg1Model, n: usize, opts: &SolveOptions) -> Result<TruncatedSolution> {
    let truncated = truncate(model, n)?;
    let g = gmatrix::solve_g(&truncated, opts.g)?;
    let defect = numerics::row_sums(&g.g_matrix).amin();
    if 1.0 - defect > 1e-8 {
        return Err(Error::Degenerate(format!(
            "G^(N) is strictly substochastic (smallest row sum {defect:.6e}); the chain is not positive recurrent"
        )));
    }
    let kernels = kernels(&truncated, &g)?;
    let distribution = kernels.level_distribution(opts.mass_tol, opts.cap_for(n))?;
    Ok(TruncatedSolution {
        truncated,
        g,
        kernels,
        distribution,
    })
}

/// `pi^(N_ref)`, the stand-in for `pi`. Requires `n_ref >= 4 * max_sweep_n`.
pub fn reference_solution(
    model: &Mg1Model,
    n_ref: usize,
    max_sweep_n: usize,
    opts: &SolveOptions,
) -> Result<LevelDistribution> {
    if n_ref < 4 * max_sweep_n {
        return Err(Error::Precondition(format!(
            "n_ref = {n_ref} must be at least 4 x the largest swept N ({max_sweep_n})"
        )));
    }
    let mut dist = solve_truncated(model, n_ref, opts)?.distribution;
    dist.is_reference = true;
    Ok(dist)
}

/// Max over computed interior levels `1 <= k < k_max` of
/// `| pi_k - (pi_0 B_k + sum_{j=1}^{k+1} pi_j A_{k-j}) |` on the truncated blocks.
pub fn balance_defect(tm: &TruncatedModel, dist: &LevelDistribution) -> f64 {
    let n = tm.n();
    let mut worst: f64 = 0.0;
    // level 0: pi_0 = pi_0 B_0 + pi_1 B_{-1}
    if let Some(p1) = dist.level(1) {
        let inflow = &dist.pi0 * tm.b_ref(0) + p1 * tm.b_minus1();
        worst = worst.max((inflow - &dist.pi0).amax());
    }
    for k in 1..dist.k_max() {
        let mut inflow = if k <= n {
            &dist.pi0 * tm.b_ref(k)
        } else {
            RowDVector::zeros(tm.m1())
        };
        let lo = if k > n { k - n } else { 1 };
        for j in lo..=k + 1 {
            let jump = k as isize - j as isize;
            if let Some(pj) = dist.level(j) {
                inflow += pj * tm.a_ref(jump);
            }
        }
        worst = worst.max((inflow - dist.level(k).unwrap()).amax());
    }
    worst
}

/// Mass identity `pi_0 1 + sum_k pi_k 1 + tail_mass - 1`.
pub fn mass_defect(dist: &LevelDistribution) -> f64 {
    (dist.total_mass() + dist.tail_mass - 1.0).abs()
}
