#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mg1li::asymptotics::{self, AsymptoticProfile};
use mg1li::gmatrix::{self, GOptions};
use mg1li::model::{self, Mg1Model};
use mg1li::oracle::{self, OracleMethod};
use mg1li::ramaswami::{self, LevelDistribution, SolveOptions};
use mg1li::{Error, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "mg1li", version, about = "Level-increment truncation of M/G/1-type Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Model file (JSON).
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the result here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Step tolerance of the G iteration.
    #[arg(long, default_value_t = 1e-12)]
    tol_g: f64,
    /// Iteration cap of the G iteration.
    #[arg(long, default_value_t = 1_000_000)]
    max_iter_g: usize,
    #[arg(long, default_value_t = 1e-12)]
    mass_tol: f64,
}

impl Common {
    fn solve_options(&self) -> Result<SolveOptions> {
        if !(self.tol_g > 0.0) || !(self.mass_tol >= 0.0) {
            return Err(Error::Precondition("--tol-g must be positive and --mass-tol nonnegative".into()));
        }
        Ok(SolveOptions {
            g: GOptions {
                tol: self.tol_g,
                max_iter: self.max_iter_g,
            },
            mass_tol: self.mass_tol,
            k_cap: None,
        })
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n_from: usize,
    #[arg(long)]
    n_to: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    /// Reference truncation level; defaults to 4 * n_to.
    #[arg(long)]
    n_ref: Option<usize>,
    #[arg(long, default_value_t = 10)]
    k_report: usize,
    /// Also emit the total-variation ratio (its limit is a conjecture).
    #[arg(long)]
    conjecture_tv: bool,
    /// Worker threads for the sweep.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model and the standing assumptions.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Also compute the spectral gap of G^(N).
        #[arg(long)]
        slem: bool,
        /// Truncation level used for the spectral gap.
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
    /// Approximate stationary distribution at truncation level N.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        slem: bool,
    },
    /// Reference distribution at a large truncation level.
    Reference {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_ref: usize,
        /// Largest N the reference will be compared against; defaults to n_ref / 4.
        #[arg(long)]
        max_sweep_n: Option<usize>,
    },
    /// Error of pi^(N) against the reference over a range of N.
    Sweep(SweepArgs),
    /// Decay profile, convergence constants and the SNL table.
    Asymptotics {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        n_ref: usize,
        /// Last level of the SNL table.
        #[arg(long, default_value_t = 60)]
        k_max: usize,
    },
    /// Smallest N whose error bound is below epsilon.
    SelectN {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        n_ref: usize,
    },
    /// Cross-check pi^(N) against a dense solve of the level-capped chain.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        /// Level cap; defaults to the smallest multiple of 50 leaving < 1e-10 mass above.
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, default_value = "lump_last")]
        method: String,
        #[arg(long, default_value_t = 10)]
        k_report: usize,
    },
    /// Sweep joined with the decay profile and the expected limits.
    Diagnose(SweepArgs),
}

enum Output {
    Json(Value),
    Text(String),
}

fn emit(common: &Common, out: Output) -> Result<()> {
    let text = match out {
        Output::Json(v) => {
            let mut s = serde_json::to_string_pretty(&v)?;
            s.push('\n');
            s
        }
        Output::Text(s) => s,
    };
    match &common.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(common: &Common) -> Result<Mg1Model> {
    let m = model::load_model(&common.model)?;
    log::info!("loaded {} (M0 = {}, M1 = {})", common.model.display(), m.m0(), m.m1());
    Ok(m)
}

fn reference(m: &Mg1Model, n_ref: usize, max_sweep_n: usize, opts: &SolveOptions) -> Result<LevelDistribution> {
    let r = ramaswami::reference_solution(m, n_ref, max_sweep_n, opts)?;
    log::info!("reference at N = {n_ref}: {} levels, tail mass {:.3e}", r.k_max(), r.tail_mass);
    Ok(r)
}

fn profile_for(m: &Mg1Model, r: &mut LevelDistribution) -> Result<AsymptoticProfile> {
    let p = asymptotics::decay_profile(m, r)?;
    asymptotics::annotate_reference(r, &p);
    Ok(p)
}

fn sweep_ns(a: &SweepArgs) -> Result<Vec<usize>> {
    if a.step == 0 || a.n_from == 0 || a.n_from > a.n_to {
        return Err(Error::Precondition("need 1 <= n_from <= n_to and step >= 1".into()));
    }
    Ok((a.n_from..=a.n_to).step_by(a.step).collect())
}

fn run_sweep(a: &SweepArgs, joined: bool) -> Result<()> {
    if let Some(jobs) = a.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let m = load(&a.common)?;
    let opts = a.common.solve_options()?;
    let ns = sweep_ns(a)?;
    let n_max = *ns.last().unwrap();
    let n_ref = a.n_ref.unwrap_or(4 * n_max);
    let mut r = reference(&m, n_ref, n_max, &opts)?;
    let p = profile_for(&m, &mut r)?;
    let snl = asymptotics::integrated_tail(asymptotics::snl(&m, &r, r.k_max().max(n_max).max(a.k_report))?)?;
    let s = asymptotics::sweep_diagnostics(&m, &ns, &r, &p, &snl, a.k_report, &opts)?;
    let out = match a.common.format {
        Format::Csv => Output::Text(report::sweep_csv(&s, a.conjecture_tv)),
        Format::Json if joined => Output::Json(json!({
            "n_ref": n_ref,
            "reference_residual_bound": r.residual_bound,
            "profile": report::profile(&p),
            "sweep": report::sweep(&s, a.conjecture_tv),
        })),
        Format::Json => Output::Json(report::sweep(&s, a.conjecture_tv)),
    };
    emit(&a.common, out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { common, slem, n } => {
            let m = load(&common)?;
            let mut rep = model::validate_assumptions(&m);
            if slem {
                let tm = model::truncate(&m, n)?;
                let g = gmatrix::solve_g(&tm, common.solve_options()?.g)?;
                rep = rep.with_slem(gmatrix::slem(&g.g_matrix)?);
            }
            let failed = rep.any_fail();
            emit(&common, Output::Json(report::assumptions(&rep)))?;
            return Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS });
        }
        Command::Solve { common, n, slem } => {
            let m = load(&common)?;
            let mut sol = ramaswami::solve_truncated(&m, n, &common.solve_options()?)?;
            let out = match common.format {
                Format::Csv => Output::Text(report::distribution_csv(&sol.distribution)),
                Format::Json => {
                    let slem = if slem { Some(gmatrix::spectral_gap(&mut sol.g)?) } else { None };
                    let mut v = report::distribution(&sol.distribution);
                    v["g"] = json!({
                        "iterations": sol.g.iterations,
                        "residual": sol.g.residual,
                        "slem": slem,
                        "matrix": sol.g.g_matrix.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
                    });
                    Output::Json(v)
                }
            };
            emit(&common, out)?;
        }
        Command::Reference { common, n_ref, max_sweep_n } => {
            let m = load(&common)?;
            let mut r = reference(&m, n_ref, max_sweep_n.unwrap_or(n_ref / 4), &common.solve_options()?)?;
            if let Err(e) = profile_for(&m, &mut r) {
                log::warn!("no residual bound for the reference: {e}");
            }
            let out = match common.format {
                Format::Csv => Output::Text(report::distribution_csv(&r)),
                Format::Json => Output::Json(report::distribution(&r)),
            };
            emit(&common, out)?;
        }
        Command::Sweep(a) => run_sweep(&a, false)?,
        Command::Diagnose(a) => run_sweep(&a, true)?,
        Command::Asymptotics { common, n_ref, k_max } => {
            let m = load(&common)?;
            let mut r = reference(&m, n_ref, n_ref / 4, &common.solve_options()?)?;
            let p = profile_for(&m, &mut r)?;
            let snl = asymptotics::integrated_tail(asymptotics::snl(&m, &r, k_max)?)?;
            let out = match common.format {
                Format::Csv => Output::Text(report::snl_csv(&snl)),
                Format::Json => Output::Json(json!({
                    "n_ref": n_ref,
                    "reference_residual_bound": r.residual_bound,
                    "profile": report::profile(&p),
                    "snl": report::snl(&snl),
                })),
            };
            emit(&common, out)?;
        }
        Command::SelectN { common, epsilon, n_ref } => {
            let m = load(&common)?;
            let mut r = reference(&m, n_ref, 0, &common.solve_options()?)?;
            let p = profile_for(&m, &mut r)?;
            let n_star = asymptotics::select_n(&p, epsilon)?;
            let trace = asymptotics::bound_trace(&p, n_star);
            let out = match common.format {
                Format::Csv => {
                    let mut s = String::from("N,bound\n");
                    for (n, b) in &trace {
                        let _ = writeln!(s, "{n},{}", report::num(*b));
                    }
                    Output::Text(s)
                }
                Format::Json => Output::Json(json!({
                    "epsilon": epsilon,
                    "n_star": n_star,
                    "bound": p.bound(n_star),
                    "trace": trace.iter().map(|(n, b)| json!({"n": n, "bound": b})).collect::<Vec<_>>(),
                })),
            };
            emit(&common, out)?;
        }
        Command::Oracle { common, n, levels, method, k_report } => {
            let method: OracleMethod = method.parse()?;
            let m = load(&common)?;
            let ram = ramaswami::solve_truncated(&m, n, &common.solve_options()?)?;
            let levels = match levels {
                Some(l) => l,
                None => oracle::default_levels(&ram.distribution)?,
            };
            let o = oracle::brute_force_stationary(&ram.truncated, levels, method)?;
            let span = (levels / 4).max(k_report.min(levels));
            let tv = oracle::tv_distance(&o.pi_hat, &ram.distribution, span);
            let out = match common.format {
                Format::Csv => {
                    let mut s = String::from("k,phase,oracle,ramaswami,diff\n");
                    for k in 0..=k_report.min(levels) {
                        let a = o.pi_hat.level(k).unwrap();
                        for (i, x) in a.iter().enumerate() {
                            let y = ram.distribution.level(k).map_or(0.0, |v| v[i]);
                            let _ = writeln!(s, "{k},{i},{},{},{}", report::num(*x), report::num(y), report::num(x - y));
                        }
                    }
                    Output::Text(s)
                }
                Format::Json => Output::Json(json!({
                    "n": n,
                    "levels": levels,
                    "method": o.method.as_str(),
                    "compared_levels": span,
                    "tv_distance": tv,
                    "oracle_mass": o.pi_hat.total_mass(),
                    "oracle": report::distribution(&o.pi_hat),
                })),
            };
            emit(&common, out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MG1LI_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let code: u8 = if e.is_validation() { 1 } else { 2 };
            let record = json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
