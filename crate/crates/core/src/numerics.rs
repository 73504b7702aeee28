//! Dense kernels for finite stochastic matrices.
//!
//! [`stationary_vector`] uses Grassmann–Taksar–Heyman (GTH) elimination: the
//! pivot of each step is formed from off-diagonal row sums, so no subtraction
//! ever occurs and the result is accurate to working precision even when the
//! chain is nearly decomposable. [`fundamental_solve`] handles the
//! `(I - M) x = b` systems that appear with `[I - Phi_0]^{-1}` and `[I - R]^{-1}`.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// Tolerance on row sums accepted by [`stationary_vector`].
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Reciprocal condition number below which `I - M` is declared singular.
pub const RCOND_MIN: f64 = 1e-14;

/// A nonnegative row vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(RowDVector<f64>);

impl ProbabilityVector {
    /// Normalizes `v` to unit mass. Fails on negative entries or zero mass.
    pub fn from_weights(v: RowDVector<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Degenerate("negative or non-finite weight".into()));
        }
        let total = v.sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("zero total mass".into()));
        }
        Ok(ProbabilityVector(v / total))
    }

    pub fn as_row(&self) -> &RowDVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> RowDVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Stationary distribution of a finite row-stochastic matrix by GTH elimination.
pub fn stationary_vector(p: &DMatrix<f64>) -> Result<ProbabilityVector> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "stationary_vector needs a non-empty square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    check_stochastic(p, "P", STOCHASTIC_TOL)?;
    gth(p.clone())
}

/// GTH on a matrix whose off-diagonal pattern describes an irreducible chain.
///
/// Diagonal entries are never read, so substochastic rows behave as if the
/// missing mass were a self-loop. Consumes the matrix as workspace.
pub(crate) fn gth(mut p: DMatrix<f64>) -> Result<ProbabilityVector> {
    let n = p.nrows();
    let mut nz: Vec<usize> = Vec::with_capacity(n);
    for k in (1..n).rev() {
        nz.clear();
        let mut s = 0.0;
        for j in 0..k {
            let v = p[(k, j)];
            if v != 0.0 {
                s += v;
                nz.push(j);
            }
        }
        if s <= 0.0 {
            return Err(Error::ZeroPivot { state: k });
        }
        for i in 0..k {
            let pik = p[(i, k)];
            if pik == 0.0 {
                continue;
            }
            let f = pik / s;
            p[(i, k)] = f;
            for &j in &nz {
                p[(i, j)] += f * p[(k, j)];
            }
        }
    }
    let mut x = RowDVector::zeros(n);
    x[0] = 1.0;
    for k in 1..n {
        let mut acc = 0.0;
        for i in 0..k {
            acc += x[i] * p[(i, k)];
        }
        x[k] = acc;
    }
    ProbabilityVector::from_weights(x)
}

/// Solves `(I - m) x = rhs` by LU with partial pivoting.
///
/// Fails when the reciprocal 1-norm condition number of `I - m` is below
/// [`RCOND_MIN`] or when the residual check does not hold.
pub fn fundamental_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if !m.is_square() || rhs.nrows() != n {
        return Err(Error::Dimension(format!(
            "fundamental_solve: M is {}x{}, rhs has {} rows",
            m.nrows(),
            m.ncols(),
            rhs.nrows()
        )));
    }
    let a = DMatrix::identity(n, n) - m;
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::Singular { rcond: 0.0 })?;
    let rcond = 1.0 / (norm_one(&a) * norm_one(&inv));
    if !rcond.is_finite() || rcond < RCOND_MIN {
        return Err(Error::Singular { rcond });
    }
    let x = lu.solve(rhs).ok_or(Error::Singular { rcond })?;
    let resid = (&a * &x - rhs).amax();
    if resid > 1e-10 * rhs.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::Singular { rcond });
    }
    Ok(x)
}

/// `(I - m)^{-1}` via [`fundamental_solve`].
pub fn fundamental_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    fundamental_solve(m, &DMatrix::identity(m.nrows(), m.nrows()))
}

/// `(I - m)^{-1} 1`.
pub fn fundamental_solve_ones(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let x = fundamental_solve(m, &DMatrix::from_element(m.nrows(), 1, 1.0))?;
    Ok(x.column(0).into_owned())
}

/// Maximum absolute row sum.
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub fn norm_one(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

/// Checks nonnegativity and unit row sums within `tol`.
pub fn check_stochastic(p: &DMatrix<f64>, name: &str, tol: f64) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::EntryRange(format!("{name} has negative or non-finite entries")));
    }
    for (row, s) in row_sums(p).iter().enumerate() {
        let defect = (s - 1.0).abs();
        if defect > tol {
            return Err(Error::RowSum {
                family: name.to_string(),
                row,
                sum: *s,
                defect,
            });
        }
    }
    Ok(())
}

/// Strong connectivity of the directed graph given by the positive entries of `m`.
pub fn is_irreducible(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { m[(i, j)] } else { m[(j, i)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    };
    reach(true) == n && reach(false) == n
}
