//! JSON and CSV renderings of solver results.

use std::fmt::Write as _;

use mg1li::asymptotics::{AsymptoticProfile, SnlDistribution, Sweep};
use mg1li::model::AssumptionReport;
use mg1li::ramaswami::LevelDistribution;
use nalgebra::{DVector, RowDVector};
use serde_json::{json, Value};

/// Fixed-width scientific notation, 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(v: &RowDVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn col(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(v))
}

pub fn assumptions(r: &AssumptionReport) -> Value {
    let mut v = serde_json::to_value(r).expect("report serializes");
    v["all_pass"] = json!(r.all_pass());
    v
}

pub fn distribution(d: &LevelDistribution) -> Value {
    json!({
        "n_trunc": d.n_trunc,
        "is_reference": d.is_reference,
        "k_max": d.k_max(),
        "tail_mass": d.tail_mass,
        "hit_cap": d.hit_cap,
        "residual_bound": opt(d.residual_bound),
        "pi0": row(&d.pi0),
        "levels": d.pis.iter().map(row).collect::<Vec<_>>(),
    })
}

/// `k,phase,value` with level 0 first.
pub fn distribution_csv(d: &LevelDistribution) -> String {
    let mut out = String::from("k,phase,value\n");
    for k in 0..=d.k_max() {
        for (i, x) in d.level(k).unwrap().iter().enumerate() {
            let _ = writeln!(out, "{k},{i},{}", num(*x));
        }
    }
    out
}

pub fn profile(p: &AsymptoticProfile) -> Value {
    json!({
        "source": p.source.as_str(),
        "r_a": p.r_a,
        "r_b": p.r_b,
        "r": p.r,
        "f": p.f_desc(),
        "f_exponent": p.f_exponent,
        "heuristic_f": p.heuristic_f,
        "c_a": col(&p.c_a),
        "c_b": col(&p.c_b),
        "c_star": p.c_star,
        "sigma": p.sigma,
        "varpi": row(p.varpi.as_row()),
        "m_bar_a_plus": col(&p.m_bar_a_plus),
        "m_bar_b": col(&p.m_bar_b),
        "pi0": row(&p.pi0),
        "pi_bar0": row(&p.pi_bar0),
        "theta": p.theta,
        "theta_di": p.theta_di,
        "reference_tail_mass": p.reference_tail_mass,
    })
}

pub fn snl(s: &SnlDistribution) -> Value {
    json!({
        "k_max": s.k_max(),
        "complete": s.complete,
        "mean_d": s.mean_d,
        "closed_form_gap": opt(s.closed_form_gap),
        "d": s.d,
        "d_bar_i": s.d_bar_i,
    })
}

pub fn snl_csv(s: &SnlDistribution) -> String {
    let mut out = String::from("k,d,d_bar_i\n");
    for k in 0..=s.k_max() {
        let _ = writeln!(out, "{k},{},{}", num(s.d[k]), num(s.d_bar_i[k]));
    }
    out
}

pub fn sweep(s: &Sweep, conjecture_tv: bool) -> Value {
    let records: Vec<Value> = s
        .records
        .iter()
        .map(|r| {
            let mut v = json!({
                "n": r.n,
                "scale": r.scale,
                "d_bar_i": r.d_bar_i,
                "tv_total": r.tv_total,
                "diff": r.diff_by_level.iter().map(row).collect::<Vec<_>>(),
                "l1": r.l1_by_level,
                "rel": r.rel_by_level,
                "diff_ratio": r.diff_ratio.iter().map(row).collect::<Vec<_>>(),
                "rel_ratio": r.rel_ratio,
                "di_ratio": r.di_ratio.iter().map(row).collect::<Vec<_>>(),
            });
            if conjecture_tv {
                v["tv_ratio_conjectural"] = json!(r.tv_ratio_conjectural);
            }
            v
        })
        .collect();
    json!({
        "records": records,
        "positivity_threshold": s.positivity_threshold,
        "expected_theta": s.theta,
        "expected_theta_pik": s.expected_diff.iter().map(row).collect::<Vec<_>>(),
        "expected_thetadi_pik": s.expected_di.iter().map(row).collect::<Vec<_>>(),
    })
}

/// One row per `(N, k, phase)`; the tv column only with `conjecture_tv`.
pub fn sweep_csv(s: &Sweep, conjecture_tv: bool) -> String {
    let mut out = String::from("N,k,phase,diff,diff_ratio,rel_ratio,di_ratio");
    if conjecture_tv {
        out.push_str(",tv_ratio_conjectural");
    }
    out.push_str(",expected_theta_pik,expected_theta,expected_thetadi_pik\n");
    for r in &s.records {
        for (k, diff) in r.diff_by_level.iter().enumerate() {
            for phase in 0..diff.len() {
                let _ = write!(
                    out,
                    "{},{k},{phase},{},{},{},{}",
                    r.n,
                    num(diff[phase]),
                    num(r.diff_ratio[k][phase]),
                    num(r.rel_ratio[k]),
                    num(r.di_ratio[k][phase])
                );
                if conjecture_tv {
                    let _ = write!(out, ",{}", num(r.tv_ratio_conjectural));
                }
                let _ = writeln!(
                    out,
                    ",{},{},{}",
                    num(s.expected_diff[k][phase]),
                    num(s.theta),
                    num(s.expected_di[k][phase])
                );
            }
        }
    }
    out
}
