#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use mg1li::asymptotics::{integrated_tail, snl};
use mg1li::gmatrix::{self, GOptions};
use mg1li::model::{self, Mg1Model, PowerGeometric, TailFamily, TailSpec};
use mg1li::numerics;
use mg1li::oracle::{self, OracleMethod};
use mg1li::ramaswami::{self, SolveOptions};
use nalgebra::{DMatrix, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> Mg1Model {
    let path = format!("{}/tests/data/{name}.json", env!("CARGO_MANIFEST_DIR"));
    model::load_model(path).unwrap()
}

pub fn opts(tol: f64) -> SolveOptions {
    SolveOptions {
        g: GOptions {
            tol,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> RowDVector<f64> {
    let v = RowDVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
    let s = v.sum();
    v / s
}

fn rows(rng: &mut ChaCha8Rng, masses: &[f64], cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(masses.len(), cols);
    for (i, &mass) in masses.iter().enumerate() {
        m.set_row(i, &(weights(rng, cols) * mass));
    }
    m
}

/// Random irreducible model with geometric tails beyond `k = 1` and negative drift.
///
/// Every row of the repeating part has negative mean increment, so `sigma < 0`
/// regardless of the stationary vector of `A`.
pub fn random_model(seed: u64) -> Mg1Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m0 = rng.random_range(1..=5);
    let m1 = rng.random_range(1..=5);
    let ga = PowerGeometric {
        gamma: rng.random_range(0.2..=0.8),
        alpha: 1.0,
    };
    let gb = PowerGeometric {
        gamma: rng.random_range(0.2..=0.8),
        alpha: 1.0,
    };
    let a_mass = ga.sum_from(2).unwrap();
    let a_mean = ga.weighted_sum_from(2, 0).unwrap();
    let b_mass = gb.sum_from(2).unwrap();

    let (mut down, mut zero, mut one, mut tail) = (vec![], vec![], vec![], vec![]);
    for _ in 0..m1 {
        let mut a1: f64 = rng.random_range(0.0..0.2);
        let mut c: f64 = rng.random_range(0.01..0.2);
        let mean = a1 + c * a_mean;
        let s = (0.3 / mean).min(1.0);
        a1 *= s;
        c *= s;
        let d = s * mean + rng.random_range(0.05..0.2);
        down.push(d);
        one.push(a1);
        tail.push(c);
        zero.push(1.0 - d - a1 - c * a_mass);
    }
    let (mut b0, mut b1, mut cb) = (vec![], vec![], vec![]);
    for _ in 0..m0 {
        let mut x: f64 = rng.random_range(0.0..0.3);
        let mut c: f64 = rng.random_range(0.01..0.3);
        let up = x + c * b_mass;
        let s = (0.6 / up).min(1.0);
        x *= s;
        c *= s;
        b1.push(x);
        cb.push(c);
        b0.push(1.0 - x - c * b_mass);
    }
    let a_blocks = vec![
        rows(&mut rng, &down, m1),
        rows(&mut rng, &zero, m1),
        rows(&mut rng, &one, m1),
    ];
    let b_minus1 = rows(&mut rng, &down, m0);
    let b_blocks = vec![rows(&mut rng, &b0, m0), rows(&mut rng, &b1, m1)];
    let tail = TailSpec::GeometricPower {
        a: TailFamily {
            coeff: rows(&mut rng, &tail, m1),
            series: ga,
        },
        b: TailFamily {
            coeff: rows(&mut rng, &cb, m1),
            series: gb,
        },
        k_explicit: 1,
    };
    Mg1Model::new(m0, m1, a_blocks, b_minus1, b_blocks, tail).unwrap()
}

/// Stochasticity, mass conservation and monotone-iterate checks on one model.
/// Returns the list of violated properties.
pub fn check_invariants(m: &Mg1Model, n: usize, with_oracle: bool) -> Vec<String> {
    let mut bad = Vec::new();
    macro_rules! check {
        ($ok:expr, $what:expr $(,)?) => {
            if !$ok {
                bad.push($what);
            }
        };
    }

    let dr = match model::drift(m) {
        Ok(d) => d,
        Err(e) => return vec![format!("drift: {e}")],
    };
    check!(dr.sigma < 0.0, format!("sigma = {} not negative", dr.sigma));
    let a = m.a_total().unwrap();
    check!(
        numerics::row_sums(&a).iter().all(|s| (s - 1.0).abs() < 1e-9),
        "A is not stochastic".into(),
    );
    let varpi_res = (dr.varpi.as_row() * &a - dr.varpi.as_row()).amax();
    check!(varpi_res < 1e-12, format!("varpi residual {varpi_res:e}"));

    let tm = model::truncate(m, n).unwrap();
    let a_n = (-1..=n as isize).fold(DMatrix::zeros(m.m1(), m.m1()), |acc, k| acc + tm.a_ref(k));
    check!(
        numerics::row_sums(&a_n).iter().all(|s| (s - 1.0).abs() < 1e-12),
        "A^(N) rows do not sum to 1".into(),
    );
    let b_n = (1..=n).fold(numerics::row_sums(tm.b_ref(0)), |acc, k| acc + numerics::row_sums(tm.b_ref(k)));
    check!(
        b_n.iter().all(|s| (s - 1.0).abs() < 1e-12),
        "B^(N) rows do not sum to 1".into(),
    );
    let again = model::truncate(&tm.to_model().unwrap(), n).unwrap();
    check!(again == tm, "truncation is not idempotent".into());

    let g = match gmatrix::solve_g(&tm, GOptions { tol: 1e-14, ..Default::default() }) {
        Ok(g) => g,
        Err(e) => {
            bad.push(format!("G: {e}"));
            return bad;
        }
    };
    check!(
        g.max_monotone_violation <= 1e-15,
        format!("G iterates decreased by {:e}", g.max_monotone_violation),
    );
    check!(g.g_matrix.iter().all(|&x| x >= 0.0), "G has negative entries".into());
    check!(
        numerics::row_sums(&g.g_matrix).iter().all(|s| (s - 1.0).abs() < 1e-10),
        "G is not stochastic".into(),
    );

    let dist = match ramaswami::solve_truncated(m, n, &SolveOptions {
        k_cap: Some(50_000),
        ..opts(1e-14)
    }) {
        Ok(s) => s,
        Err(e) => {
            bad.push(format!("ramaswami: {e}"));
            return bad;
        }
    };
    let k = &dist.kernels.k_matrix;
    check!(
        numerics::row_sums(k).iter().all(|s| (s - 1.0).abs() < 1e-10),
        "K is not stochastic".into(),
    );
    let kappa_res = (dist.kernels.kappa.as_row() * k - dist.kernels.kappa.as_row()).amax();
    check!(kappa_res < 1e-12, format!("kappa residual {kappa_res:e}"));
    let pi = &dist.distribution;
    let md = ramaswami::mass_defect(pi);
    check!(md < 1e-12, format!("mass defect {md:e}"));
    check!(pi.tail_mass < 1e-10, format!("tail mass {:e}", pi.tail_mass));
    check!(
        pi.pi0.iter().chain(pi.pis.iter().flat_map(|v| v.iter())).all(|&x| x >= 0.0),
        "negative probability".into(),
    );
    let bd = ramaswami::balance_defect(&tm, pi);
    check!(bd < 1e-9, format!("balance defect {bd:e}"));

    // SNL of the truncated chain against its own stationary distribution
    let s = snl(&tm.to_model().unwrap(), pi, 3 * n)
        .and_then(integrated_tail);
    match s {
        Ok(s) => {
            check!(
                s.d.windows(2).all(|w| w[0] <= w[1]) && s.d.iter().all(|&x| (0.0..=1.0).contains(&x)),
                "D is not a CDF".into(),
            );
            check!(
                s.d_bar_i.windows(2).all(|w| w[1] <= w[0]) && s.d_bar_i.iter().all(|&x| (0.0..=1.0).contains(&x)),
                "D-bar_I is not a tail function".into(),
            );
            let gap = s.closed_form_gap.unwrap_or(f64::INFINITY);
            check!(gap <= 1e-10, format!("integrated tail closed-form gap {gap:e}"));
        }
        Err(e) => bad.push(format!("snl: {e}")),
    }

    if with_oracle {
        match oracle::default_levels(pi).and_then(|l| {
            let l = l.max(40);
            oracle::brute_force_stationary(&tm, l, OracleMethod::LumpLast).map(|o| (l, o))
        }) {
            Ok((l, o)) => {
                let mass = (o.pi_hat.total_mass() - 1.0).abs();
                check!(mass < 1e-12, format!("oracle mass {mass:e}"));
                let above: f64 = 1.0 - (0..=l).map(|k| pi.level_mass(k)).sum::<f64>();
                let tv = oracle::tv_distance(&o.pi_hat, pi, l / 4);
                check!(
                    tv <= f64::max(1e-8, 10.0 * above.abs()),
                    format!("oracle TV {tv:e} at L = {l}"),
                );
            }
            Err(e) => bad.push(format!("oracle: {e}")),
        }
    }
    bad
}
