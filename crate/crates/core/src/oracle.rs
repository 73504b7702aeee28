//! Brute-force stationary solve of the level-censored truncated chain.
//!
//! Assembles `P^(N)` on levels `0..=L` as one dense matrix and applies GTH to it.
//! Used only to cross-check the Ramaswami pipeline.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};
use crate::model::TruncatedModel;
use crate::numerics;
use crate::ramaswami::LevelDistribution;

/// Hard cap on `M_0 + L M_1`.
pub const STATE_CAP: usize = 200_000;
/// Cap for the dense assembly (`n^2` doubles).
pub const DENSE_CAP: usize = 12_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMethod {
    /// Jumps above `L` land on level `L`; the assembled matrix stays stochastic.
    #[default]
    LumpLast,
    /// Jumps above `L` are dropped and each row is rescaled to sum to one.
    Renormalize,
}

impl OracleMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            OracleMethod::LumpLast => "lump_last",
            OracleMethod::Renormalize => "renormalize",
        }
    }
}

impl std::str::FromStr for OracleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lump_last" | "lump-last" => Ok(OracleMethod::LumpLast),
            "renormalize" => Ok(OracleMethod::Renormalize),
            other => Err(Error::Precondition(format!("unknown oracle method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub levels: usize,
    pub pi_hat: LevelDistribution,
    pub method: OracleMethod,
}

fn offset(tm: &TruncatedModel, level: usize) -> usize {
    if level == 0 {
        0
    } else {
        tm.m0() + (level - 1) * tm.m1()
    }
}

fn add_block(p: &mut DMatrix<f64>, row: usize, col: usize, blk: &DMatrix<f64>) {
    let mut view = p.view_mut((row, col), blk.shape());
    view += blk;
}

/// `P^(N)` restricted to levels `0..=levels`.
pub fn assemble(tm: &TruncatedModel, levels: usize, method: OracleMethod) -> Result<DMatrix<f64>> {
    if levels == 0 {
        return Err(Error::Precondition("oracle needs at least one level above 0".into()));
    }
    let states = tm.m0() + levels * tm.m1();
    if states > STATE_CAP {
        return Err(Error::Precondition(format!(
            "{states} states exceed the oracle cap of {STATE_CAP}"
        )));
    }
    if states > DENSE_CAP {
        return Err(Error::Precondition(format!(
            "{states} states exceed the dense assembly cap of {DENSE_CAP}"
        )));
    }
    let n = tm.n();
    let mut p = DMatrix::zeros(states, states);
    let place = |p: &mut DMatrix<f64>, from: usize, to: usize, blk: &DMatrix<f64>| {
        if to <= levels {
            add_block(p, offset(tm, from), offset(tm, to), blk);
        } else if method == OracleMethod::LumpLast {
            add_block(p, offset(tm, from), offset(tm, levels), blk);
        }
    };
    for j in 0..=n {
        place(&mut p, 0, j, tm.b_ref(j));
    }
    for from in 1..=levels {
        for k in -1..=n as isize {
            let to = (from as isize + k) as usize;
            if to == 0 {
                place(&mut p, from, 0, tm.b_minus1());
            } else {
                place(&mut p, from, to, tm.a_ref(k));
            }
        }
    }
    if method == OracleMethod::Renormalize {
        for mut row in p.row_iter_mut() {
            let s = row.sum();
            if s > 0.0 {
                row /= s;
            }
        }
    }
    Ok(p)
}

/// Stationary vector of the assembled chain, split by level.
///
/// A chain with transient states is accepted as long as it has a single closed class.
pub fn brute_force_stationary(tm: &TruncatedModel, levels: usize, method: OracleMethod) -> Result<OracleSolution> {
    let p = assemble(tm, levels, method)?;
    let v = unichain_stationary(&p)?;
    let pi0 = v.columns(0, tm.m0()).into_owned();
    let pis = (1..=levels)
        .map(|l| v.columns(offset(tm, l), tm.m1()).into_owned())
        .collect();
    let total = v.sum();
    Ok(OracleSolution {
        levels,
        pi_hat: LevelDistribution {
            pi0,
            pis,
            tail_mass: 1.0 - total,
            n_trunc: tm.n(),
            is_reference: false,
            hit_cap: false,
            residual_bound: None,
        },
        method,
    })
}

fn unichain_stationary(p: &DMatrix<f64>) -> Result<RowDVector<f64>> {
    let n = p.nrows();
    if numerics::is_irreducible(p) {
        return Ok(numerics::gth(p.clone())?.into_inner());
    }
    let closed: Vec<Vec<usize>> = strong_components(p)
        .into_iter()
        .filter(|c| {
            let mut inside = vec![false; n];
            c.iter().for_each(|&i| inside[i] = true);
            c.iter().all(|&i| (0..n).all(|j| p[(i, j)] <= 0.0 || inside[j]))
        })
        .collect();
    if closed.len() != 1 {
        return Err(Error::Reducible(format!(
            "assembled chain has {} closed classes",
            closed.len()
        )));
    }
    let class = &closed[0];
    let sub = DMatrix::from_fn(class.len(), class.len(), |a, b| p[(class[a], class[b])]);
    let w = numerics::gth(sub)?;
    let mut v = RowDVector::zeros(n);
    for (a, &i) in class.iter().enumerate() {
        v[i] = w[a];
    }
    Ok(v)
}

/// Strongly connected components of the positive-entry graph (Kosaraju).
fn strong_components(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        // (node, next column to scan)
        let mut stack = vec![(s, 0usize)];
        while let Some((i, j0)) = stack.pop() {
            match (j0..n).find(|&j| p[(i, j)] > 0.0 && !seen[j]) {
                Some(j) => {
                    stack.push((i, j + 1));
                    seen[j] = true;
                    stack.push((j, 0));
                }
                None => order.push(i),
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if p[(j, i)] > 0.0 && comp[j] == usize::MAX {
                    comp[j] = id;
                    members.push(j);
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

/// `sum_{k=0}^{k_max} ||a_k - b_k||_1`; levels missing on one side count as zero.
pub fn tv_distance(a: &LevelDistribution, b: &LevelDistribution, k_max: usize) -> f64 {
    (0..=k_max)
        .map(|k| match (a.level(k), b.level(k)) {
            (Some(x), Some(y)) => (x - y).abs().sum(),
            (Some(x), None) | (None, Some(x)) => x.abs().sum(),
            (None, None) => 0.0,
        })
        .sum()
}

/// Smallest multiple of 50 above which `dist` carries less than `1e-10` mass.
pub fn default_levels(dist: &LevelDistribution) -> Result<usize> {
    let mut cum = dist.pi0.sum();
    let mut level = 0;
    loop {
        level += 50;
        for k in level - 49..=level {
            cum += dist.level_mass(k);
        }
        if 1.0 - cum < 1e-10 {
            return Ok(level);
        }
        if level > dist.k_max() {
            return Err(Error::Precondition(format!(
                "distribution ends at level {} with {:.3e} mass left",
                dist.k_max(),
                1.0 - cum
            )));
        }
    }
}
