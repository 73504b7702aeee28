//! SNL distribution, decay constants and truncation-error diagnostics.
//!
//! With `r` the decay radius of the level increments and `f` the accompanying
//! power factor, the LI truncation error behaves like
//!
//! ```text
//! pi^(N)_k - pi_k  ~  theta * pi_k * r^{-N} f(N)
//! ```
//!
//! where `theta = r (pi_0 c_B + pi-bar_0 c_A) / (-sigma)`. Equivalently the error
//! scales like `theta_DI * D-bar_I(N)` with `D_I` the integrated tail of the
//! stationary nonnegative level-increment (SNL) distribution.

use nalgebra::{DVector, RowDVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{analytic_rates, drift, Mg1Model, TailSpec};
use crate::numerics::{self, ProbabilityVector};
use crate::ramaswami::{solve_truncated, LevelDistribution, SolveOptions};

/// Reference mass that may be missing before `pi-bar_0` is considered unreliable.
pub const REF_TAIL_TOL: f64 = 1e-10;
const SNL_COMPLETE_TOL: f64 = 1e-10;
const CLOSED_FORM_TOL: f64 = 1e-10;
const SNL_EXTRA_LEVELS: usize = 1_000_000;
const FIT_MIN_POINTS: usize = 12;
const FIT_RATE_SPREAD: f64 = 0.05;

/// Cumulative SNL distribution and its integrated tail.
#[derive(Debug, Clone)]
pub struct SnlDistribution {
    /// `D(0..=k_max)`.
    pub d: Vec<f64>,
    /// `1 - D(l)` for `l = 0, 1, ...` until negligible; extends past `k_max`.
    pub tail: Vec<f64>,
    /// `D-bar_I(0..=k_max)`; empty until [`integrated_tail`] runs.
    pub d_bar_i: Vec<f64>,
    /// `sum_{l >= 1} l dD(l)`; zero until [`integrated_tail`] runs.
    pub mean_d: f64,
    /// `D-bar_I` from the double-tail closed form, when the model is known.
    pub d_bar_i_closed: Option<Vec<f64>>,
    pub mean_closed: Option<f64>,
    /// Largest `|D-bar_I - closed form|` over `0..=k_max`.
    pub closed_form_gap: Option<f64>,
    /// `D(k_max) >= 1 - 1e-10`.
    pub complete: bool,
}

impl SnlDistribution {
    /// From a bare CDF on `0..=k_max`; `D(k) = 1` is assumed beyond.
    pub fn from_cdf(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Precondition("empty CDF".into()));
        }
        if d.windows(2).any(|w| w[1] < w[0]) || d.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::EntryRange("CDF must be nondecreasing in [0, 1]".into()));
        }
        let tail: Vec<f64> = d.iter().map(|x| 1.0 - x).collect();
        let complete = tail.last().is_some_and(|&t| t <= SNL_COMPLETE_TOL);
        Ok(SnlDistribution {
            d,
            tail,
            d_bar_i: Vec::new(),
            mean_d: 0.0,
            d_bar_i_closed: None,
            mean_closed: None,
            closed_form_gap: None,
            complete,
        })
    }

    pub fn k_max(&self) -> usize {
        self.d.len() - 1
    }

    /// `D-bar_I(k)`; for `k` beyond the tabulated range the tail is summed directly.
    pub fn d_bar_i_at(&self, k: usize) -> Option<f64> {
        if self.mean_d <= 0.0 {
            return None;
        }
        if let Some(v) = self.d_bar_i.get(k) {
            return Some(*v);
        }
        Some(self.tail.iter().skip(k + 1).sum::<f64>() / self.mean_d)
    }
}

fn reference_masses(reference: &LevelDistribution) -> Result<(RowDVector<f64>, RowDVector<f64>)> {
    if reference.tail_mass.abs() >= REF_TAIL_TOL {
        return Err(Error::Precondition(format!(
            "reference tail mass {:.3e} is not below {REF_TAIL_TOL:e}",
            reference.tail_mass
        )));
    }
    let pi_bar0 = if reference.pis.is_empty() {
        RowDVector::zeros(reference.pi0.len().max(1))
    } else {
        reference.upper_mass()
    };
    Ok((reference.pi0.clone(), pi_bar0))
}

fn dot(v: &RowDVector<f64>, w: &DVector<f64>) -> f64 {
    if v.len() != w.len() {
        // pi-bar_0 of an empty upper range
        return 0.0;
    }
    (v * w)[0]
}

/// `D(k) = sum_{n<=k} pi_0 B_n 1 + sum_{-1<=n<=k} pi-bar_0 A_n 1` on `0..=k_max`.
///
/// The tail `1 - D(l) = pi_0 B-bar_l 1 + pi-bar_0 A-bar_l 1` is evaluated directly,
/// so small values keep their relative accuracy.
pub fn snl(model: &Mg1Model, reference: &LevelDistribution, k_max: usize) -> Result<SnlDistribution> {
    let (pi0, pi_bar0) = reference_masses(reference)?;
    let tail_at = |l: usize| -> Result<f64> {
        let b = numerics::row_sums(&model.b_tail_from(l + 1)?);
        let a = numerics::row_sums(&model.a_tail_from(l as isize + 1)?);
        Ok((dot(&pi0, &b) + dot(&pi_bar0, &a)).max(0.0))
    };
    let mut tail = Vec::with_capacity(k_max + 1);
    for l in 0..=k_max {
        tail.push(tail_at(l)?);
    }
    // extend until the remaining sum is negligible, also relative to the suffix sums
    // that D-bar_I needs near k_max
    let mut l = k_max;
    let mut partial: f64 = tail.iter().sum();
    let floor = tail[k_max] * 1e-17;
    while let Some(&last) = tail.last() {
        if last == 0.0 || (last <= 1e-17 * partial && last <= floor) {
            break;
        }
        l += 1;
        if l > k_max + SNL_EXTRA_LEVELS {
            return Err(Error::NotConverged {
                iterations: SNL_EXTRA_LEVELS,
                step: last,
            });
        }
        let t = tail_at(l)?;
        partial += t;
        tail.push(t);
    }
    let d: Vec<f64> = tail[..=k_max].iter().map(|t| 1.0 - t).collect();
    let complete = tail[k_max] <= SNL_COMPLETE_TOL;
    if !complete {
        log::warn!("SNL tail at k_max = {k_max} is {:.3e}", tail[k_max]);
    }

    let m_b = model.b_upward_moment()?;
    let m_a = model.a_upward_moment()?;
    let mean_closed = dot(&pi0, &m_b) + dot(&pi_bar0, &m_a);
    let closed = if mean_closed > 0.0 {
        let mut v = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let num = dot(&pi0, &model.b_double_tail(k)?) + dot(&pi_bar0, &model.a_double_tail(k)?);
            v.push(num / mean_closed);
        }
        Some(v)
    } else {
        None
    };
    Ok(SnlDistribution {
        d,
        tail,
        d_bar_i: Vec::new(),
        mean_d: 0.0,
        d_bar_i_closed: closed,
        mean_closed: Some(mean_closed),
        closed_form_gap: None,
        complete,
    })
}

/// `D_I(k) = sum_{l<=k} (1 - D(l)) / mean`, stored as `D-bar_I = 1 - D_I`.
pub fn integrated_tail(mut snl: SnlDistribution) -> Result<SnlDistribution> {
    let mean: f64 = snl.tail.iter().sum();
    if !(mean > 0.0) {
        return Err(Error::Degenerate("SNL distribution has zero mean".into()));
    }
    let k_max = snl.k_max();
    let mut suffix = vec![0.0; snl.tail.len() + 1];
    for l in (0..snl.tail.len()).rev() {
        suffix[l] = suffix[l + 1] + snl.tail[l];
    }
    snl.d_bar_i = (0..=k_max).map(|k| suffix[k + 1] / mean).collect();
    snl.mean_d = mean;
    if let Some(closed) = &snl.d_bar_i_closed {
        let gap = snl
            .d_bar_i
            .iter()
            .zip(closed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > CLOSED_FORM_TOL {
            log::warn!("integrated tail differs from its closed form by {gap:.3e}");
        }
        snl.closed_form_gap = Some(gap);
    }
    Ok(snl)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    /// From the declared geometric-power tail.
    Analytic,
    /// Log-linear fit of the explicit blocks.
    Fitted,
}

impl ProfileSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileSource::Analytic => "analytic",
            ProfileSource::Fitted => "fitted",
        }
    }
}

/// Decay radii, tail coefficients and the convergence constants.
#[derive(Debug, Clone)]
pub struct AsymptoticProfile {
    pub r_a: f64,
    pub r_b: f64,
    pub r: f64,
    /// `f(N) = N^f_exponent`.
    pub f_exponent: f64,
    pub heuristic_f: bool,
    pub c_a: DVector<f64>,
    pub c_b: DVector<f64>,
    pub sigma: f64,
    pub varpi: ProbabilityVector,
    pub m_bar_a_plus: DVector<f64>,
    pub m_bar_b: DVector<f64>,
    pub pi0: RowDVector<f64>,
    pub pi_bar0: RowDVector<f64>,
    pub theta: f64,
    pub theta_di: f64,
    pub c_star: f64,
    pub source: ProfileSource,
    /// Reference mass left out of `pi-bar_0`.
    pub reference_tail_mass: f64,
}

impl AsymptoticProfile {
    pub fn f_desc(&self) -> String {
        if self.f_exponent == 0.0 {
            "1".to_string()
        } else {
            format!("N^{}", self.f_exponent)
        }
    }

    pub fn f(&self, n: usize) -> f64 {
        if self.f_exponent == 0.0 {
            1.0
        } else {
            (n as f64).powf(self.f_exponent)
        }
    }

    /// `r^{-N} f(N)`.
    pub fn scale(&self, n: usize) -> f64 {
        (self.f_exponent * (n as f64).ln() - n as f64 * self.r.ln()).exp()
    }

    /// `(c* / -sigma) r^{-N+1} f(N)`.
    pub fn bound(&self, n: usize) -> f64 {
        self.log_bound(n).exp()
    }

    fn log_bound(&self, n: usize) -> f64 {
        if self.c_star == 0.0 {
            return f64::NEG_INFINITY;
        }
        let ln_f = if self.f_exponent == 0.0 {
            0.0
        } else {
            self.f_exponent * (n as f64).ln()
        };
        self.c_star.ln() - (-self.sigma).ln() + (1.0 - n as f64) * self.r.ln() + ln_f
    }
}

/// Closed form for a geometric-power tail, otherwise a fit of the explicit blocks.
pub fn decay_profile(model: &Mg1Model, reference: &LevelDistribution) -> Result<AsymptoticProfile> {
    let (pi0, pi_bar0) = reference_masses(reference)?;
    let dr = drift(model)?;
    if !dr.is_stable() {
        return Err(Error::Precondition(format!(
            "sigma = {:e} >= 0: no stationary distribution",
            dr.sigma
        )));
    }
    let rates = match model.tail() {
        TailSpec::GeometricPower { a, b, .. } => {
            let r = analytic_rates(a, b);
            let lim = |fam: &crate::model::TailFamily, dim: usize, radius: f64, alpha: f64| {
                let g = fam.series.gamma;
                let keep = fam.is_active()
                    && radius == r.r
                    && (!r.heuristic_f || alpha - 1.0 == r.f_exponent);
                if keep {
                    numerics::row_sums(&fam.coeff) * (g * g / ((1.0 - g) * (1.0 - g)))
                } else {
                    DVector::zeros(dim)
                }
            };
            Rates {
                r_a: r.r_a,
                r_b: r.r_b,
                r: r.r,
                f_exponent: r.f_exponent,
                heuristic_f: r.heuristic_f,
                c_a: lim(a, model.m1(), r.r_a, a.series.alpha),
                c_b: lim(b, model.m0(), r.r_b, b.series.alpha),
                source: ProfileSource::Analytic,
            }
        }
        TailSpec::Finite => fitted_rates(model)?,
    };
    if !rates.r.is_finite() {
        return Err(Error::Degenerate("no upward tail: decay radius is infinite".into()));
    }
    if rates.r <= 1.0 {
        return Err(Error::InvalidTail(format!("decay radius r = {} <= 1", rates.r)));
    }
    let neg_sigma = -dr.sigma;
    let theta = rates.r * (dot(&pi0, &rates.c_b) + dot(&pi_bar0, &rates.c_a)) / neg_sigma;
    let theta_di = rates.r * (dot(&pi0, &dr.m_bar_b) + dot(&pi_bar0, &dr.m_bar_a_plus)) / neg_sigma;
    let c_star = rates.c_a.iter().chain(rates.c_b.iter()).fold(0.0, |m, &x| f64::max(m, x));
    Ok(AsymptoticProfile {
        r_a: rates.r_a,
        r_b: rates.r_b,
        r: rates.r,
        f_exponent: rates.f_exponent,
        heuristic_f: rates.heuristic_f,
        c_a: rates.c_a,
        c_b: rates.c_b,
        sigma: dr.sigma,
        varpi: dr.varpi,
        m_bar_a_plus: dr.m_bar_a_plus,
        m_bar_b: dr.m_bar_b,
        pi0,
        pi_bar0,
        theta,
        theta_di,
        c_star,
        source: rates.source,
        reference_tail_mass: reference.tail_mass,
    })
}

struct Rates {
    r_a: f64,
    r_b: f64,
    r: f64,
    f_exponent: f64,
    heuristic_f: bool,
    c_a: DVector<f64>,
    c_b: DVector<f64>,
    source: ProfileSource,
}

/// Rate and per-phase intercept of `log(X-double-bar_N 1) = log c - N log r`.
struct Fit {
    r: f64,
    c: DVector<f64>,
}

/// Fits one family from its double tails at `N = 0, 1, ...` while they stay positive.
/// `Ok(None)` when the family has no usable points at all.
fn fit_family(dim: usize, double_tail: impl Fn(usize) -> Result<DVector<f64>>, name: &str) -> Result<Option<Fit>> {
    let mut points: Vec<DVector<f64>> = Vec::new();
    loop {
        let v = double_tail(points.len())?;
        if v.iter().all(|&x| x <= 0.0) {
            break;
        }
        points.push(v);
    }
    if points.is_empty() {
        return Ok(None);
    }
    if points.len() < FIT_MIN_POINTS {
        return Err(Error::Precondition(format!(
            "{name}: {} usable tail points, need at least {FIT_MIN_POINTS}",
            points.len()
        )));
    }
    let start = points.len() - (2 * points.len()).div_ceil(3);
    let mut rates = Vec::new();
    let mut c = DVector::zeros(dim);
    for phase in 0..dim {
        let window: Vec<(f64, f64)> = (start..points.len())
            .map(|n| (n as f64, points[n][phase]))
            .collect();
        if window.iter().any(|&(_, y)| y <= 0.0) {
            continue;
        }
        let m = window.len() as f64;
        let mx = window.iter().map(|p| p.0).sum::<f64>() / m;
        let my = window.iter().map(|p| p.1.ln()).sum::<f64>() / m;
        let sxy: f64 = window.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
        let sxx: f64 = window.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        rates.push((-slope).exp());
        c[phase] = (my - slope * mx).exp();
    }
    if rates.is_empty() {
        return Err(Error::Precondition(format!("{name}: no phase has a positive tail window")));
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(0.0, f64::max);
    if (hi - lo) / mean > FIT_RATE_SPREAD {
        return Err(Error::Degenerate(format!(
            "{name}: fitted rates disagree across phases ({lo:.4} .. {hi:.4})"
        )));
    }
    Ok(Some(Fit { r: mean, c }))
}

fn fitted_rates(model: &Mg1Model) -> Result<Rates> {
    let fa = fit_family(model.m1(), |n| model.a_double_tail(n), "A")?;
    let fb = fit_family(model.m0(), |n| model.b_double_tail(n), "B")?;
    let r_a = fa.as_ref().map_or(f64::INFINITY, |f| f.r);
    let r_b = fb.as_ref().map_or(f64::INFINITY, |f| f.r);
    let r = r_a.min(r_b);
    // radii within the fit tolerance count as equal
    let close = |x: f64| x.is_finite() && (x - r).abs() <= FIT_RATE_SPREAD * r;
    let c_a = match fa {
        Some(f) if close(r_a) => f.c,
        _ => DVector::zeros(model.m1()),
    };
    let c_b = match fb {
        Some(f) if close(r_b) => f.c,
        _ => DVector::zeros(model.m0()),
    };
    Ok(Rates {
        r_a,
        r_b,
        r,
        f_exponent: 0.0,
        heuristic_f: false,
        c_a,
        c_b,
        source: ProfileSource::Fitted,
    })
}

/// Smallest `N >= 1` with `bound(N) < epsilon`, by forward scan.
pub fn select_n(profile: &AsymptoticProfile, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition("epsilon must be positive".into()));
    }
    if !(profile.r > 1.0) {
        return Err(Error::InvalidTail(format!("decay radius r = {} <= 1", profile.r)));
    }
    let target = epsilon.ln();
    // r^{-N} N^e is eventually decreasing, so the scan terminates
    let mut n = 1usize;
    while profile.log_bound(n) >= target {
        n += 1;
    }
    Ok(n)
}

/// `(N, bound(N))` for `N = 1..=n_max`.
pub fn bound_trace(profile: &AsymptoticProfile, n_max: usize) -> Vec<(usize, f64)> {
    (1..=n_max).map(|n| (n, profile.bound(n))).collect()
}

/// Records the estimated distance `bound(N_ref)` of the reference to `pi`.
pub fn annotate_reference(reference: &mut LevelDistribution, profile: &AsymptoticProfile) {
    reference.residual_bound = Some(profile.bound(reference.n_trunc));
}

/// Per-`N` comparison of `pi^(N)` with the reference.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub n: usize,
    /// `pi^(N)_k - pi_k`, `k = 0..=k_report`.
    pub diff_by_level: Vec<RowDVector<f64>>,
    pub l1_by_level: Vec<f64>,
    /// `||pi^(N)_k - pi_k||_1 / (pi_k 1)`.
    pub rel_by_level: Vec<f64>,
    /// `sum_k ||pi^(N)_k - pi_k||_1` over the common level range.
    pub tv_total: f64,
    /// `r^{-N} f(N)`.
    pub scale: f64,
    /// `D-bar_I(N)`.
    pub d_bar_i: f64,
    /// `diff / (r^{-N} f(N))`, expected to approach `theta pi_k`.
    pub diff_ratio: Vec<RowDVector<f64>>,
    /// `rel / (r^{-N} f(N))`, expected to approach `theta`.
    pub rel_ratio: Vec<f64>,
    /// `diff / D-bar_I(N)`, expected to approach `theta_DI pi_k`.
    pub di_ratio: Vec<RowDVector<f64>>,
    /// `tv_total / (r^{-N} f(N))`; conjectural limit `theta`.
    pub tv_ratio_conjectural: f64,
}

impl SweepRecord {
    /// `pi^(N)_k > pi_k` in every phase.
    pub fn positive_at(&self, k: usize) -> bool {
        self.diff_by_level[k].iter().all(|&x| x > 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    /// Ordered by `N`.
    pub records: Vec<SweepRecord>,
    /// Per level `k`, the smallest swept `N` from which on `pi^(N)_k - pi_k > 0`.
    pub positivity_threshold: Vec<Option<usize>>,
    /// `theta pi_k`, `k = 0..=k_report`.
    pub expected_diff: Vec<RowDVector<f64>>,
    /// `theta_DI pi_k`.
    pub expected_di: Vec<RowDVector<f64>>,
    pub theta: f64,
}

/// Solves every `N` in `ns` (in parallel) and compares against `reference`.
///
/// Each `N` must satisfy `N <= N_ref / 4`, except `N = N_ref` (self-comparison).
/// `pi^(N)` is computed over exactly the levels of the reference.
pub fn sweep_diagnostics(
    model: &Mg1Model,
    ns: &[usize],
    reference: &LevelDistribution,
    profile: &AsymptoticProfile,
    snl: &SnlDistribution,
    k_report: usize,
    opts: &SolveOptions,
) -> Result<Sweep> {
    let n_ref = reference.n_trunc;
    if let Some(bad) = ns.iter().find(|&&n| n == 0 || (4 * n > n_ref && n != n_ref)) {
        return Err(Error::Precondition(format!(
            "swept N = {bad} must satisfy 1 <= N <= N_ref / 4 = {}",
            n_ref / 4
        )));
    }
    let k_max = reference.k_max();
    if k_report > k_max {
        return Err(Error::Precondition(format!(
            "k_report = {k_report} exceeds the reference range {k_max}"
        )));
    }
    let level_opts = SolveOptions {
        mass_tol: 0.0,
        k_cap: Some(k_max),
        ..*opts
    };
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut records: Vec<SweepRecord> = ns
        .par_iter()
        .map(|&n| {
            let approx = solve_truncated(model, n, &level_opts)?.distribution;
            Ok(compare(n, &approx, reference, profile, snl, k_report))
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| r.n);

    let positivity_threshold = (0..=k_report)
        .map(|k| {
            let mut threshold = None;
            for rec in records.iter().rev() {
                if rec.positive_at(k) {
                    threshold = Some(rec.n);
                } else {
                    break;
                }
            }
            threshold
        })
        .collect();
    let level = |k: usize| reference.level(k).cloned().unwrap_or_else(|| RowDVector::zeros(0));
    Ok(Sweep {
        records,
        positivity_threshold,
        expected_diff: (0..=k_report).map(|k| level(k) * profile.theta).collect(),
        expected_di: (0..=k_report).map(|k| level(k) * profile.theta_di).collect(),
        theta: profile.theta,
    })
}

fn compare(
    n: usize,
    approx: &LevelDistribution,
    reference: &LevelDistribution,
    profile: &AsymptoticProfile,
    snl: &SnlDistribution,
    k_report: usize,
) -> SweepRecord {
    let diff_at = |k: usize| -> RowDVector<f64> {
        let r = reference.level(k).expect("level within reference range");
        match approx.level(k) {
            Some(a) => a - r,
            None => -r,
        }
    };
    let mut tv_total = 0.0;
    for k in 0..=reference.k_max() {
        tv_total += diff_at(k).abs().sum();
    }
    let scale = profile.scale(n);
    let d_bar_i = snl.d_bar_i_at(n).unwrap_or(f64::NAN);
    let diff_by_level: Vec<RowDVector<f64>> = (0..=k_report).map(diff_at).collect();
    let l1_by_level: Vec<f64> = diff_by_level.iter().map(|d| d.abs().sum()).collect();
    let rel_by_level: Vec<f64> = l1_by_level
        .iter()
        .enumerate()
        .map(|(k, l1)| l1 / reference.level_mass(k))
        .collect();
    SweepRecord {
        n,
        diff_ratio: diff_by_level.iter().map(|d| d / scale).collect(),
        rel_ratio: rel_by_level.iter().map(|r| r / scale).collect(),
        di_ratio: diff_by_level.iter().map(|d| d / d_bar_i).collect(),
        tv_ratio_conjectural: tv_total / scale,
        diff_by_level,
        l1_by_level,
        rel_by_level,
        tv_total,
        scale,
        d_bar_i,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmatrix::GOptions;
    use crate::model::fixtures::*;
    use crate::model::{PowerGeometric, TailFamily};
    use crate::ramaswami::reference_solution;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn tight() -> SolveOptions {
        SolveOptions {
            g: GOptions {
                tol: 1e-15,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn geo1_ref() -> LevelDistribution {
        reference_solution(&geo1(), 200, 50, &tight()).unwrap()
    }

    #[test]
    fn geo1_snl_closed_forms() {
        let r = geo1_ref();
        let s = snl(&geo1(), &r, 40).unwrap();
        assert_abs_diff_eq!(s.d[0], 0.75, epsilon = 1e-12);
        for k in 0..=40 {
            assert_abs_diff_eq!(1.0 - s.d[k], 0.25 * 0.5f64.powi(k as i32), epsilon = 1e-12);
        }
        assert!(s.complete);
        assert!(s.d.windows(2).all(|w| w[0] <= w[1] && w[1] <= 1.0));
        let s = integrated_tail(s).unwrap();
        assert_abs_diff_eq!(s.mean_d, 0.5, epsilon = 1e-12);
        for k in 0..=40 {
            let expect = 0.5f64.powi(k as i32 + 1);
            assert!((s.d_bar_i[k] / expect - 1.0).abs() < 1e-9, "k = {k}: {} vs {expect}", s.d_bar_i[k]);
        }
        assert!(s.closed_form_gap.unwrap() <= 1e-10);
        assert!(s.d_bar_i.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn mp2_closed_form_agrees() {
        let m = mp2();
        let r = reference_solution(&m, 400, 100, &tight()).unwrap();
        let s = integrated_tail(snl(&m, &r, 60).unwrap()).unwrap();
        assert!(s.closed_form_gap.unwrap() <= 1e-10, "{:?}", s.closed_form_gap);
        assert!((s.mean_d - s.mean_closed.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn no_up_jumps_is_degenerate() {
        let m = scalar_finite(&[0.6, 0.4], 0.6, &[1.0]).unwrap();
        let r = reference_solution(&m, 8, 2, &tight()).unwrap();
        let s = snl(&m, &r, 5).unwrap();
        assert_eq!(s.d[0], 1.0);
        assert!(matches!(integrated_tail(s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn unit_jump_cdf() {
        let s = integrated_tail(SnlDistribution::from_cdf(vec![0.0, 1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(s.mean_d, 1.0);
        assert_eq!(s.d_bar_i[0], 0.0);
        assert_eq!(1.0 - s.d_bar_i[0], 1.0);
    }

    #[test]
    fn geo1_profile() {
        let r = geo1_ref();
        let p = decay_profile(&geo1(), &r).unwrap();
        assert_eq!(p.r, 2.0);
        assert_eq!(p.f_exponent, 0.0);
        assert_eq!(p.f_desc(), "1");
        assert_abs_diff_eq!(p.c_a[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.c_b[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.theta, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.theta_di, 20.0, epsilon = 1e-9);
        assert_eq!(p.c_star, 0.25);
        assert_eq!(p.source, ProfileSource::Analytic);
        let s = integrated_tail(snl(&geo1(), &r, 40).unwrap()).unwrap();
        let n = 40;
        let lhs = p.theta_di * s.d_bar_i[n];
        let rhs = p.theta * p.scale(n);
        assert!((lhs / rhs - 1.0).abs() < 0.02);
    }

    #[test]
    fn series_limit_for_power_factor() {
        for (gamma, alpha) in [(0.4, 2.5), (0.6, 0.5), (0.5, 1.0)] {
            let s = PowerGeometric { gamma, alpha };
            let limit = gamma * gamma / ((1.0 - gamma) * (1.0 - gamma));
            let n = 300usize;
            let got = s.weighted_sum_from(n + 2, n + 1).unwrap() / s.term(n);
            assert!((got / limit - 1.0).abs() < 0.03, "gamma {gamma} alpha {alpha}: {got} vs {limit}");
        }
    }

    fn two_rate_model(gamma_a: f64, gamma_b: f64) -> Mg1Model {
        let g = |x: f64| PowerGeometric { gamma: x, alpha: 1.0 };
        let sa = 0.1 * g(gamma_a).sum_from(1).unwrap();
        let sb = 0.1 * g(gamma_b).sum_from(1).unwrap();
        Mg1Model::new(
            1,
            1,
            vec![
                DMatrix::from_element(1, 1, 0.6),
                DMatrix::from_element(1, 1, 0.4 - sa),
            ],
            DMatrix::from_element(1, 1, 0.6),
            vec![DMatrix::from_element(1, 1, 1.0 - sb)],
            TailSpec::GeometricPower {
                a: TailFamily {
                    coeff: DMatrix::from_element(1, 1, 0.1),
                    series: g(gamma_a),
                },
                b: TailFamily {
                    coeff: DMatrix::from_element(1, 1, 0.1),
                    series: g(gamma_b),
                },
                k_explicit: 0,
            },
        )
        .unwrap()
    }

    #[test]
    fn slower_family_is_zeroed() {
        let m = two_rate_model(0.5, 0.25);
        let r = reference_solution(&m, 200, 50, &tight()).unwrap();
        let p = decay_profile(&m, &r).unwrap();
        assert_eq!(p.r, 2.0);
        assert_eq!(p.r_b, 4.0);
        assert_eq!(p.c_b[0], 0.0);
        assert!(p.c_a[0] > 0.0);
        let m = two_rate_model(0.25, 0.5);
        let r = reference_solution(&m, 200, 50, &tight()).unwrap();
        let p = decay_profile(&m, &r).unwrap();
        assert_eq!(p.c_a[0], 0.0);
        assert!(p.c_b[0] > 0.0 && p.theta > 0.0);
    }

    #[test]
    fn select_n_examples() {
        let p = decay_profile(&geo1(), &geo1_ref()).unwrap();
        assert_eq!(select_n(&p, 1e-3).unwrap(), 14);
        assert_eq!(select_n(&p, 1e-6).unwrap(), 24);
        assert_eq!(select_n(&p, 100.0).unwrap(), 1);
        assert_abs_diff_eq!(p.bound(14), 10.0 * 2f64.powi(-14), epsilon = 1e-15);
        assert!(select_n(&p, 0.0).is_err());
    }

    #[test]
    fn reference_annotation() {
        let mut r = geo1_ref();
        let p = decay_profile(&geo1(), &r).unwrap();
        annotate_reference(&mut r, &p);
        let b = r.residual_bound.unwrap();
        assert!(b < 1e-15 && b > 0.0);
    }

    #[test]
    fn fitted_profile_recovers_rate() {
        // explicit geometric blocks, no declared tail
        let k = 60;
        let gamma: f64 = 0.5;
        let mut a = vec![0.6, 0.0];
        let mut up = 0.0;
        for j in 1..=k {
            let v = 0.1 * gamma.powi(j);
            a.push(v);
            up += v;
        }
        a[1] = 0.4 - up;
        let mut b = vec![0.0];
        let mut upb = 0.0;
        for j in 1..=k {
            let v = 0.1 * gamma.powi(j);
            b.push(v);
            upb += v;
        }
        b[0] = 1.0 - upb;
        let m = scalar_finite(&a, 0.6, &b).unwrap();
        let r = reference_solution(&m, 200, 50, &tight()).unwrap();
        let p = decay_profile(&m, &r).unwrap();
        assert_eq!(p.source, ProfileSource::Fitted);
        assert!((p.r / 2.0 - 1.0).abs() < 0.05, "r = {}", p.r);
        assert!(p.theta > 0.0);
    }

    #[test]
    fn short_finite_model_cannot_be_fitted() {
        let m = scalar_finite(&[0.7, 0.1, 0.1, 0.05, 0.03, 0.02], 0.7, &[0.8, 0.2]).unwrap();
        let r = reference_solution(&m, 40, 10, &tight()).unwrap();
        assert!(matches!(decay_profile(&m, &r), Err(Error::Precondition(_))));
    }

    #[test]
    fn geo1_sweep_ratios() {
        let m = geo1();
        let r = geo1_ref();
        let p = decay_profile(&m, &r).unwrap();
        let s = integrated_tail(snl(&m, &r, 50).unwrap()).unwrap();
        let sw = sweep_diagnostics(&m, &[30, 10, 20], &r, &p, &s, 10, &tight()).unwrap();
        assert_eq!(sw.records.iter().map(|x| x.n).collect::<Vec<_>>(), vec![10, 20, 30]);
        let rec = &sw.records[2];
        let expect = p.theta * r.pi0[0];
        assert!((rec.diff_ratio[0][0] / expect - 1.0).abs() < 0.05);
        for k in 0..=10 {
            assert!((rec.rel_ratio[k] / 10.0 - 1.0).abs() < 0.05, "k = {k}");
        }
        assert!(sw.positivity_threshold.iter().all(|t| t.is_some()));
        assert!(sw.records.windows(2).all(|w| w[1].tv_total < w[0].tv_total));
    }

    #[test]
    fn self_comparison_is_exact() {
        let m = geo1();
        let r = reference_solution(&m, 40, 10, &tight()).unwrap();
        let p = decay_profile(&m, &r).unwrap();
        let s = integrated_tail(snl(&m, &r, 45).unwrap()).unwrap();
        let sw = sweep_diagnostics(&m, &[40], &r, &p, &s, 5, &tight()).unwrap();
        assert!(sw.records[0].diff_by_level.iter().all(|d| d.iter().all(|&x| x == 0.0)));
        assert_eq!(sw.records[0].tv_total, 0.0);
    }

    #[test]
    fn sweep_guard() {
        let m = geo1();
        let r = geo1_ref();
        let p = decay_profile(&m, &r).unwrap();
        let s = integrated_tail(snl(&m, &r, 60).unwrap()).unwrap();
        let err = sweep_diagnostics(&m, &[51], &r, &p, &s, 5, &tight()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
