//! M/G/1-type block sequences, their analytic tails, LI truncation and drift.
//!
//! Block indexing follows the transition structure
//!
//! ```text
//!          L0     L1     L2     L3   ...
//!   L0 [  B_0    B_1    B_2    B_3  ... ]
//!   L1 [ B_-1    A_0    A_1    A_2  ... ]
//!   L2 [   O    A_-1    A_0    A_1  ... ]
//! ```
//!
//! with `M_0` phases at level 0 and `M_1` phases at every other level.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, ProbabilityVector};

/// Row-sum tolerance applied to input models. Defects are errors, never renormalized.
pub const INPUT_TOL: f64 = 1e-9;

const SERIES_REL_TOL: f64 = 1e-16;
const SERIES_MAX_TERMS: usize = 10_000_000;

/// The scalar sequence `s(k) = k^{alpha-1} gamma^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGeometric {
    pub gamma: f64,
    pub alpha: f64,
}

impl PowerGeometric {
    pub fn term(&self, k: usize) -> f64 {
        let kf = k as f64;
        if self.alpha == 1.0 {
            self.gamma.powi(k as i32)
        } else {
            ((self.alpha - 1.0) * kf.ln() + kf * self.gamma.ln()).exp()
        }
    }

    /// `sum_{k >= start} s(k)`.
    pub fn sum_from(&self, start: usize) -> Result<f64> {
        if self.alpha == 1.0 {
            return Ok(self.gamma.powi(start as i32) / (1.0 - self.gamma));
        }
        self.sum_weighted(start, |_| 1.0)
    }

    /// `sum_{k >= start} (k - shift) s(k)`; requires `shift <= start`.
    pub fn weighted_sum_from(&self, start: usize, shift: usize) -> Result<f64> {
        debug_assert!(shift <= start);
        let g = self.gamma;
        if self.alpha == 1.0 {
            let lead = (start - shift) as f64 / (1.0 - g) + g / ((1.0 - g) * (1.0 - g));
            return Ok(g.powi(start as i32) * lead);
        }
        self.sum_weighted(start, |k| (k - shift) as f64)
    }

    fn sum_weighted(&self, start: usize, w: impl Fn(usize) -> f64) -> Result<f64> {
        let start = start.max(1);
        let mut acc = 0.0;
        let mut prev = f64::INFINITY;
        let ratio_cap = 0.5 * (1.0 + self.gamma);
        for k in start..start + SERIES_MAX_TERMS {
            let t = w(k) * self.term(k);
            acc += t;
            // only stop once the terms are contracting geometrically
            if t <= ratio_cap * prev && t <= SERIES_REL_TOL * acc {
                return Ok(acc);
            }
            if acc == 0.0 && t == 0.0 && k > start + 10 {
                return Ok(0.0);
            }
            prev = t;
        }
        Err(Error::InvalidTail("tail series did not converge".into()))
    }
}

/// One tail family: `X_k = coeff * s(k)` for `k > k_explicit`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFamily {
    pub coeff: DMatrix<f64>,
    pub series: PowerGeometric,
}

impl TailFamily {
    /// Zero coefficient means the family contributes nothing.
    pub fn is_active(&self) -> bool {
        self.coeff.iter().any(|&x| x > 0.0)
    }
}

/// Analytic description of `A_k`, `B_k` beyond the explicit lists.
#[derive(Debug, Clone, PartialEq)]
pub enum TailSpec {
    /// `A_k = B_k = 0` past the explicit lists.
    Finite,
    /// `A_k = C_A k^{alpha-1} gamma_A^k`, `B_k = C_B k^{beta-1} gamma_B^k` for `k > k_explicit`.
    GeometricPower {
        a: TailFamily,
        b: TailFamily,
        k_explicit: usize,
    },
}

impl TailSpec {
    pub fn is_finite(&self) -> bool {
        matches!(self, TailSpec::Finite)
    }
}

/// On-disk model format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub m0: usize,
    pub m1: usize,
    /// `A_{-1}, A_0, ..., A_{K_A}`, each row-major.
    pub a_blocks: Vec<Vec<Vec<f64>>>,
    pub b_minus1: Vec<Vec<f64>>,
    /// `B_0, B_1, ..., B_{K_B}`.
    pub b_blocks: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub tail: Option<TailFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailFile {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub gamma_a: Option<f64>,
    #[serde(default)]
    pub gamma_b: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub c_mat_a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub c_mat_b: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub k_explicit: Option<usize>,
}

fn to_matrix(rows: &[Vec<f64>], name: &str, nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        let got_cols = rows.first().map_or(0, |r| r.len());
        return Err(Error::Dimension(format!(
            "{name} must be {nrows}x{ncols}, got {}x{}",
            rows.len(),
            got_cols
        )));
    }
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flat_map(|r| r.iter().copied()),
    ))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// An M/G/1-type chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mg1Model {
    m0: usize,
    m1: usize,
    a_blocks: Vec<DMatrix<f64>>,
    b_minus1: DMatrix<f64>,
    b_blocks: Vec<DMatrix<f64>>,
    tail: TailSpec,
}

/// Reads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<Mg1Model> {
    let text = std::fs::read_to_string(path)?;
    Mg1Model::from_json_str(&text)
}

impl Mg1Model {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        let (m0, m1) = (f.m0, f.m1);
        if m0 == 0 || m1 == 0 {
            return Err(Error::Dimension("m0 and m1 must be positive".into()));
        }
        if f.a_blocks.len() < 2 {
            return Err(Error::Dimension("a_blocks must contain at least A_-1 and A_0".into()));
        }
        if f.b_blocks.is_empty() {
            return Err(Error::Dimension("b_blocks must contain at least B_0".into()));
        }
        let a_blocks = f
            .a_blocks
            .iter()
            .enumerate()
            .map(|(i, b)| to_matrix(b, &format!("A_{}", i as isize - 1), m1, m1))
            .collect::<Result<Vec<_>>>()?;
        let b_minus1 = to_matrix(&f.b_minus1, "B_-1", m1, m0)?;
        let b_blocks = f
            .b_blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let cols = if k == 0 { m0 } else { m1 };
                to_matrix(b, &format!("B_{k}"), m0, cols)
            })
            .collect::<Result<Vec<_>>>()?;
        let tail = match &f.tail {
            None => TailSpec::Finite,
            Some(t) => parse_tail(t, m0, m1)?,
        };
        Self::new(m0, m1, a_blocks, b_minus1, b_blocks, tail)
    }

    /// Builds and validates a model from in-memory blocks.
    pub fn new(
        m0: usize,
        m1: usize,
        a_blocks: Vec<DMatrix<f64>>,
        b_minus1: DMatrix<f64>,
        b_blocks: Vec<DMatrix<f64>>,
        tail: TailSpec,
    ) -> Result<Self> {
        let model = Mg1Model {
            m0,
            m1,
            a_blocks,
            b_minus1,
            b_blocks,
            tail,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let (m0, m1) = (self.m0, self.m1);
        if self.a_blocks.len() < 2 || self.b_blocks.is_empty() {
            return Err(Error::Dimension("need A_-1, A_0 and B_0".into()));
        }
        for (i, a) in self.a_blocks.iter().enumerate() {
            check_shape(a, m1, m1, &format!("A_{}", i as isize - 1))?;
            check_entries(a, &format!("A_{}", i as isize - 1))?;
        }
        check_shape(&self.b_minus1, m1, m0, "B_-1")?;
        check_entries(&self.b_minus1, "B_-1")?;
        for (k, b) in self.b_blocks.iter().enumerate() {
            check_shape(b, m0, if k == 0 { m0 } else { m1 }, &format!("B_{k}"))?;
            check_entries(b, &format!("B_{k}"))?;
        }
        if let TailSpec::GeometricPower { a, b, k_explicit } = &self.tail {
            check_shape(&a.coeff, m1, m1, "c_mat_a")?;
            check_shape(&b.coeff, m0, m1, "c_mat_b")?;
            if a.coeff.iter().chain(b.coeff.iter()).any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidTail("coefficient matrices must be nonnegative".into()));
            }
            let k_a = self.a_blocks.len() - 2;
            let k_b = self.b_blocks.len() - 1;
            if *k_explicit < k_a || *k_explicit < k_b {
                return Err(Error::InvalidTail(format!(
                    "k_explicit = {k_explicit} is below the explicit block range (K_A = {k_a}, K_B = {k_b})"
                )));
            }
        }
        let a_total = self.a_tail_from(-1)?;
        check_rows(&a_total, "A = sum A_k", INPUT_TOL)?;
        let level1 = &self.b_minus1 * DVector::from_element(m0, 1.0)
            + numerics::row_sums(&self.a_tail_from(0)?);
        check_row_vector(&level1, "[B_-1 | A_0 A_1 ...]", INPUT_TOL)?;
        let level0 = numerics::row_sums(&self.b_blocks[0])
            + numerics::row_sums(&self.b_tail_from(1)?);
        check_row_vector(&level0, "[B_0 B_1 ...]", INPUT_TOL)?;
        Ok(())
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn tail(&self) -> &TailSpec {
        &self.tail
    }

    /// Largest explicitly listed index of `A_k`.
    pub fn k_a(&self) -> usize {
        self.a_blocks.len() - 2
    }

    /// Largest explicitly listed index of `B_k`.
    pub fn k_b(&self) -> usize {
        self.b_blocks.len() - 1
    }

    pub fn b_minus1(&self) -> &DMatrix<f64> {
        &self.b_minus1
    }

    fn tail_start(&self) -> usize {
        match &self.tail {
            TailSpec::Finite => usize::MAX,
            TailSpec::GeometricPower { k_explicit, .. } => k_explicit + 1,
        }
    }

    /// `A_k` for `k >= -1`.
    pub fn a(&self, k: isize) -> DMatrix<f64> {
        assert!(k >= -1, "A_k is defined for k >= -1");
        let idx = (k + 1) as usize;
        if idx < self.a_blocks.len() {
            return self.a_blocks[idx].clone();
        }
        match &self.tail {
            TailSpec::GeometricPower { a, .. } if k as usize >= self.tail_start() => {
                &a.coeff * a.series.term(k as usize)
            }
            _ => DMatrix::zeros(self.m1, self.m1),
        }
    }

    /// `B_k` for `k >= 0` (`B_-1` is [`Mg1Model::b_minus1`]).
    pub fn b(&self, k: usize) -> DMatrix<f64> {
        if k < self.b_blocks.len() {
            return self.b_blocks[k].clone();
        }
        match &self.tail {
            TailSpec::GeometricPower { b, .. } if k >= self.tail_start() => &b.coeff * b.series.term(k),
            _ => DMatrix::zeros(self.m0, self.m1),
        }
    }

    /// `sum_{l >= from} A_l`; `A-bar_j` is `a_tail_from(j + 1)`.
    pub fn a_tail_from(&self, from: isize) -> Result<DMatrix<f64>> {
        let from = from.max(-1);
        let mut acc = DMatrix::zeros(self.m1, self.m1);
        for (i, blk) in self.a_blocks.iter().enumerate() {
            if i as isize > from {
                acc += blk;
            }
        }
        if let TailSpec::GeometricPower { a, .. } = &self.tail {
            if a.is_active() {
                let start = self.tail_start().max(from.max(0) as usize);
                acc += &a.coeff * a.series.sum_from(start)?;
            }
        }
        Ok(acc)
    }

    /// `sum_{l >= from} B_l` for `from >= 1` (column dimension `M_1`).
    pub fn b_tail_from(&self, from: usize) -> Result<DMatrix<f64>> {
        let from = from.max(1);
        let mut acc = DMatrix::zeros(self.m0, self.m1);
        for (k, blk) in self.b_blocks.iter().enumerate().skip(1) {
            if k >= from {
                acc += blk;
            }
        }
        if let TailSpec::GeometricPower { b, .. } = &self.tail {
            if b.is_active() {
                let start = self.tail_start().max(from);
                acc += &b.coeff * b.series.sum_from(start)?;
            }
        }
        Ok(acc)
    }

    /// `sum_{l >= from} (l - shift) A_l 1`, `from >= 1`, `shift <= from`.
    fn a_weighted_rows(&self, from: usize, shift: usize) -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(self.m1);
        for (i, blk) in self.a_blocks.iter().enumerate().skip(1) {
            let k = i - 1;
            if k >= from {
                acc += numerics::row_sums(blk) * (k - shift) as f64;
            }
        }
        if let TailSpec::GeometricPower { a, .. } = &self.tail {
            if a.is_active() {
                let start = self.tail_start().max(from);
                acc += numerics::row_sums(&a.coeff) * a.series.weighted_sum_from(start, shift)?;
            }
        }
        Ok(acc)
    }

    fn b_weighted_rows(&self, from: usize, shift: usize) -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(self.m0);
        for (k, blk) in self.b_blocks.iter().enumerate().skip(1) {
            if k >= from {
                acc += numerics::row_sums(blk) * (k - shift) as f64;
            }
        }
        if let TailSpec::GeometricPower { b, .. } = &self.tail {
            if b.is_active() {
                let start = self.tail_start().max(from);
                acc += numerics::row_sums(&b.coeff) * b.series.weighted_sum_from(start, shift)?;
            }
        }
        Ok(acc)
    }

    /// `A-double-bar_n 1 = sum_{l > n} A-bar_l 1 = sum_{k >= n+2} (k - n - 1) A_k 1`.
    pub fn a_double_tail(&self, n: usize) -> Result<DVector<f64>> {
        self.a_weighted_rows(n + 2, n + 1)
    }

    /// `B-double-bar_n 1`.
    pub fn b_double_tail(&self, n: usize) -> Result<DVector<f64>> {
        self.b_weighted_rows(n + 2, n + 1)
    }

    /// `m-bar_A^+ = sum_{k >= 1} k A_k 1`.
    pub fn a_upward_moment(&self) -> Result<DVector<f64>> {
        self.a_weighted_rows(1, 0)
    }

    /// `m-bar_B = sum_{k >= 1} k B_k 1`.
    pub fn b_upward_moment(&self) -> Result<DVector<f64>> {
        self.b_weighted_rows(1, 0)
    }

    /// `A = sum_{k >= -1} A_k`.
    pub fn a_total(&self) -> Result<DMatrix<f64>> {
        self.a_tail_from(-1)
    }

    /// Expands blocks up to index `k_max`, filling from the tail formulas.
    pub fn materialize_blocks(&self, k_max: usize) -> Result<Blocks> {
        if k_max < self.k_a() || k_max < self.k_b() {
            return Err(Error::Precondition(format!(
                "k_max = {k_max} is below the explicit range (K_A = {}, K_B = {})",
                self.k_a(),
                self.k_b()
            )));
        }
        Ok(Blocks {
            a: (-1..=k_max as isize).map(|k| self.a(k)).collect(),
            b_minus1: self.b_minus1.clone(),
            b: (0..=k_max).map(|k| self.b(k)).collect(),
        })
    }

    /// The on-disk representation of this model.
    pub fn to_file(&self) -> ModelFile {
        let tail = match &self.tail {
            TailSpec::Finite => TailFile {
                kind: Some("finite".into()),
                gamma_a: None,
                gamma_b: None,
                alpha: None,
                beta: None,
                c_mat_a: None,
                c_mat_b: None,
                k_explicit: None,
            },
            TailSpec::GeometricPower { a, b, k_explicit } => TailFile {
                kind: Some("geometric_power".into()),
                gamma_a: Some(a.series.gamma),
                gamma_b: Some(b.series.gamma),
                alpha: Some(a.series.alpha),
                beta: Some(b.series.alpha),
                c_mat_a: Some(from_matrix(&a.coeff)),
                c_mat_b: Some(from_matrix(&b.coeff)),
                k_explicit: Some(*k_explicit),
            },
        };
        ModelFile {
            m0: self.m0,
            m1: self.m1,
            a_blocks: self.a_blocks.iter().map(from_matrix).collect(),
            b_minus1: from_matrix(&self.b_minus1),
            b_blocks: self.b_blocks.iter().map(from_matrix).collect(),
            tail: Some(tail),
        }
    }
}

fn parse_tail(t: &TailFile, m0: usize, m1: usize) -> Result<TailSpec> {
    let kind = t.kind.as_deref().unwrap_or("finite");
    match kind {
        "finite" => Ok(TailSpec::Finite),
        "geometric_power" => {
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| Error::InvalidTail(format!("geometric_power tail needs {name}")))
            };
            let gamma_a = need(t.gamma_a, "gamma_a")?;
            let gamma_b = need(t.gamma_b, "gamma_b")?;
            let alpha = t.alpha.unwrap_or(1.0);
            let beta = t.beta.unwrap_or(1.0);
            for (name, g) in [("gamma_a", gamma_a), ("gamma_b", gamma_b)] {
                if !(g > 0.0 && g < 1.0) {
                    return Err(Error::InvalidTail(format!("{name} = {g} must lie in (0, 1)")));
                }
            }
            for (name, p) in [("alpha", alpha), ("beta", beta)] {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::InvalidTail(format!("{name} = {p} must be positive")));
                }
            }
            let c_a = t
                .c_mat_a
                .as_ref()
                .ok_or_else(|| Error::InvalidTail("geometric_power tail needs c_mat_a".into()))?;
            let c_b = t
                .c_mat_b
                .as_ref()
                .ok_or_else(|| Error::InvalidTail("geometric_power tail needs c_mat_b".into()))?;
            let k_explicit = t
                .k_explicit
                .ok_or_else(|| Error::InvalidTail("geometric_power tail needs k_explicit".into()))?;
            Ok(TailSpec::GeometricPower {
                a: TailFamily {
                    coeff: to_matrix(c_a, "c_mat_a", m1, m1)?,
                    series: PowerGeometric { gamma: gamma_a, alpha },
                },
                b: TailFamily {
                    coeff: to_matrix(c_b, "c_mat_b", m0, m1)?,
                    series: PowerGeometric { gamma: gamma_b, alpha: beta },
                },
                k_explicit,
            })
        }
        other => Err(Error::InvalidTail(format!("unknown tail kind '{other}'"))),
    }
}

fn check_shape(m: &DMatrix<f64>, r: usize, c: usize, name: &str) -> Result<()> {
    if m.nrows() != r || m.ncols() != c {
        return Err(Error::Dimension(format!(
            "{name} must be {r}x{c}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_entries(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
        return Err(Error::EntryRange(format!("{name} has entries outside [0, 1]")));
    }
    Ok(())
}

fn check_rows(m: &DMatrix<f64>, name: &str, tol: f64) -> Result<()> {
    check_row_vector(&numerics::row_sums(m), name, tol)
}

fn check_row_vector(v: &DVector<f64>, name: &str, tol: f64) -> Result<()> {
    for (row, s) in v.iter().enumerate() {
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

/// Explicit numeric blocks `A_{-1..k_max}`, `B_{-1}`, `B_{0..k_max}`.
#[derive(Debug, Clone)]
pub struct Blocks {
    /// `a[k + 1] = A_k`.
    pub a: Vec<DMatrix<f64>>,
    pub b_minus1: DMatrix<f64>,
    /// `b[k] = B_k`.
    pub b: Vec<DMatrix<f64>>,
}

/// Finite block sequences `A^(N)_{-1..N}`, `B^(N)_{-1..N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedModel {
    n: usize,
    m0: usize,
    m1: usize,
    a: Vec<DMatrix<f64>>,
    b_minus1: DMatrix<f64>,
    b: Vec<DMatrix<f64>>,
}

/// LI truncation at level increment `n`: jumps of size `>= n` become jumps of size `n`.
pub fn truncate(model: &Mg1Model, n: usize) -> Result<TruncatedModel> {
    if n == 0 {
        return Err(Error::Precondition("truncation level N must be >= 1".into()));
    }
    let mut a: Vec<DMatrix<f64>> = (-1..n as isize).map(|k| model.a(k)).collect();
    a.push(model.a_tail_from(n as isize)?);
    let mut b: Vec<DMatrix<f64>> = (0..n).map(|k| model.b(k)).collect();
    b.push(model.b_tail_from(n)?);
    Ok(TruncatedModel {
        n,
        m0: model.m0,
        m1: model.m1,
        a,
        b_minus1: model.b_minus1.clone(),
        b,
    })
}

impl TruncatedModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    /// `A^(N)_k`, zero for `k > N`.
    pub fn a(&self, k: isize) -> DMatrix<f64> {
        assert!(k >= -1);
        self.a
            .get((k + 1) as usize)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.m1, self.m1))
    }

    /// Borrowed `A^(N)_k` for `-1 <= k <= N`.
    pub fn a_ref(&self, k: isize) -> &DMatrix<f64> {
        &self.a[(k + 1) as usize]
    }

    /// `B^(N)_k` for `0 <= k <= N`.
    pub fn b_ref(&self, k: usize) -> &DMatrix<f64> {
        &self.b[k]
    }

    pub fn b_minus1(&self) -> &DMatrix<f64> {
        &self.b_minus1
    }

    /// The truncated chain as a finite-tail model (used to check idempotence).
    pub fn to_model(&self) -> Result<Mg1Model> {
        Mg1Model::new(
            self.m0,
            self.m1,
            self.a.clone(),
            self.b_minus1.clone(),
            self.b.clone(),
            TailSpec::Finite,
        )
    }
}

/// Drift and moment quantities of the repeating part.
#[derive(Debug, Clone)]
pub struct DriftReport {
    /// Stationary vector of `A`.
    pub varpi: ProbabilityVector,
    /// `m-bar_A = sum_{k >= -1} k A_k 1`.
    pub m_bar_a: DVector<f64>,
    /// `m-bar_A^+ = sum_{k >= 1} k A_k 1`.
    pub m_bar_a_plus: DVector<f64>,
    /// `m-bar_B = sum_{k >= 1} k B_k 1`.
    pub m_bar_b: DVector<f64>,
    /// `sigma = varpi m-bar_A`.
    pub sigma: f64,
}

impl DriftReport {
    pub fn is_stable(&self) -> bool {
        self.sigma < 0.0
    }
}

pub fn drift(model: &Mg1Model) -> Result<DriftReport> {
    let a = model.a_total()?;
    if !numerics::is_irreducible(&a) {
        return Err(Error::Reducible("A = sum A_k is reducible".into()));
    }
    let varpi = numerics::stationary_vector(&a)?;
    let m_bar_a_plus = model.a_upward_moment()?;
    let m_bar_b = model.b_upward_moment()?;
    if m_bar_a_plus.iter().chain(m_bar_b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidTail("moment series diverges".into()));
    }
    let down = numerics::row_sums(&model.a(-1));
    let m_bar_a = &m_bar_a_plus - down;
    let sigma = (varpi.as_row() * &m_bar_a)[0];
    Ok(DriftReport {
        varpi,
        m_bar_a,
        m_bar_a_plus,
        m_bar_b,
        sigma,
    })
}

/// Outcome of one assumption check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Unknown,
    /// Needs the computed G-matrix (filled in by [`AssumptionReport::with_slem`]).
    Deferred,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub status: CheckStatus,
    pub detail: String,
}

impl AssumptionCheck {
    fn new(status: CheckStatus, detail: impl Into<String>) -> Self {
        AssumptionCheck {
            status,
            detail: detail.into(),
        }
    }
}

/// Pass/fail/unknown per standing assumption.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Stability: stochastic blocks, irreducible `A`, finite `m-bar_B`, `sigma < 0`.
    pub stability: AssumptionCheck,
    /// Aperiodicity of `G` (via the subdominant eigenvalue modulus).
    pub aperiodic_g: AssumptionCheck,
    /// Light tails: `r = min(r_A, r_B) > 1`.
    pub light_tail: AssumptionCheck,
    /// Tail coefficients `c_A`, `c_B` and ratio-regular `f`.
    pub tail_coefficients: AssumptionCheck,
    pub sigma: Option<f64>,
    pub r: Option<f64>,
    /// Power exponent of `f(N) = N^e`; `Some(0.0)` means `f = 1`.
    pub f_exponent: Option<f64>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        [
            &self.stability,
            &self.aperiodic_g,
            &self.light_tail,
            &self.tail_coefficients,
        ]
        .iter()
        .all(|c| matches!(c.status, CheckStatus::Pass | CheckStatus::Deferred))
    }

    pub fn any_fail(&self) -> bool {
        [
            &self.stability,
            &self.aperiodic_g,
            &self.light_tail,
            &self.tail_coefficients,
        ]
        .iter()
        .any(|c| c.status == CheckStatus::Fail)
    }

    /// Resolves the aperiodicity check from a computed subdominant eigenvalue modulus.
    pub fn with_slem(mut self, slem: f64) -> Self {
        self.aperiodic_g = if slem < 1.0 - 1e-12 {
            AssumptionCheck::new(
                CheckStatus::Pass,
                format!("slem(G) = {slem:.6}, margin eps = {:.6}", 1.0 / slem - 1.0),
            )
        } else {
            AssumptionCheck::new(CheckStatus::Fail, format!("slem(G) = {slem:.6}: G is periodic"))
        };
        self
    }
}

/// Decay radius and `f` exponent of a geometric-power tail family pair.
pub(crate) struct AnalyticRates {
    pub r_a: f64,
    pub r_b: f64,
    pub r: f64,
    pub f_exponent: f64,
    pub heuristic_f: bool,
}

pub(crate) fn analytic_rates(a: &TailFamily, b: &TailFamily) -> AnalyticRates {
    let radius = |t: &TailFamily| {
        if t.is_active() {
            1.0 / t.series.gamma
        } else {
            f64::INFINITY
        }
    };
    let (r_a, r_b) = (radius(a), radius(b));
    let r = r_a.min(r_b);
    let (f_exponent, heuristic_f) = if r_a < r_b {
        (a.series.alpha - 1.0, false)
    } else if r_b < r_a {
        (b.series.alpha - 1.0, false)
    } else {
        let hi = a.series.alpha.max(b.series.alpha);
        (hi - 1.0, a.series.alpha != b.series.alpha)
    };
    AnalyticRates {
        r_a,
        r_b,
        r,
        f_exponent,
        heuristic_f,
    }
}

/// Checks the standing assumptions; never fails, reports instead.
pub fn validate_assumptions(model: &Mg1Model) -> AssumptionReport {
    let mut sigma = None;
    let stability = match drift(model) {
        Err(e) => AssumptionCheck::new(CheckStatus::Fail, e.to_string()),
        Ok(d) => {
            sigma = Some(d.sigma);
            let reach = model.b_minus1.iter().any(|&x| x > 0.0)
                && model.b_tail_from(1).map(|m| m.iter().any(|&x| x > 0.0)).unwrap_or(false);
            if d.sigma >= 0.0 {
                AssumptionCheck::new(
                    CheckStatus::Fail,
                    format!("sigma = {:.6e} >= 0: chain is not positive recurrent", d.sigma),
                )
            } else {
                let note = if reach {
                    "surrogate check: A irreducible, level 0 communicates with level 1"
                } else {
                    "surrogate check: A irreducible, but level 0 and level 1 do not communicate"
                };
                AssumptionCheck::new(
                    CheckStatus::Pass,
                    format!("sigma = {:.6e} < 0, m_bar_B finite; {note}", d.sigma),
                )
            }
        }
    };
    let aperiodic_g = AssumptionCheck::new(
        CheckStatus::Deferred,
        "needs the computed G-matrix (spectral gap)",
    );
    let (light_tail, tail_coefficients, r, f_exponent) = match &model.tail {
        TailSpec::Finite => (
            AssumptionCheck::new(
                CheckStatus::Unknown,
                "no analytic tail declared; decay radius only available from a numeric fit",
            ),
            AssumptionCheck::new(CheckStatus::Unknown, "no analytic tail declared"),
            None,
            None,
        ),
        TailSpec::GeometricPower { a, b, .. } => {
            let rates = analytic_rates(a, b);
            let lt = if rates.r > 1.0 && rates.r.is_finite() {
                AssumptionCheck::new(CheckStatus::Pass, format!("r = {}", rates.r))
            } else if rates.r.is_infinite() {
                AssumptionCheck::new(CheckStatus::Unknown, "both tail coefficient matrices vanish")
            } else {
                AssumptionCheck::new(CheckStatus::Fail, format!("r = {} <= 1", rates.r))
            };
            let tc = if a.is_active() || b.is_active() {
                let mut detail = if rates.f_exponent == 0.0 {
                    "f(N) = 1".to_string()
                } else {
                    format!("f(N) = N^{}", rates.f_exponent)
                };
                if rates.heuristic_f {
                    detail.push_str(" (heuristic f: r_A = r_B with alpha != beta)");
                }
                AssumptionCheck::new(CheckStatus::Pass, detail)
            } else {
                AssumptionCheck::new(CheckStatus::Fail, "c_A and c_B both vanish")
            };
            (lt, tc, Some(rates.r), Some(rates.f_exponent))
        }
    };
    AssumptionReport {
        stability,
        aperiodic_g,
        light_tail,
        tail_coefficients,
        sigma,
        r,
        f_exponent,
    }
}
