use std::time::Instant;

use clap::ValueEnum;
use serde_json::Value;

use mesp::amesp::{a_local_search, amesp_ratios, solve_apc, volume_sample_best, ALocalOptions};
use mesp::io::{read_matrix, InputFormat};
use mesp::linalg::default_rank_tolerance;
use mesp::local_search::{dual_certificate_from_local, greedy_init, local_search, LocalSearchOptions};
use mesp::oracle::{exact_amesp, exact_mesp};
use mesp::relaxation::{solve_pc, FractionalSolution, FwOptions, FwTrace};
use mesp::sampling::{derandomize, sample_best, SamplingOptions, SamplingReport};
use mesp::spectral::{local_search_bound, mesp_bounds};
use mesp::{factorize, CovarianceInstance, MespError};

use crate::report::{percent_gap, CliError, Report, Sense};
use crate::{Algo, InputKind, SolveArgs};

struct Stopwatch(Instant);

impl Stopwatch {
    fn start() -> Self {
        Self(Instant::now())
    }

    fn lap(&mut self, report: &mut Report, stage: &str) {
        report.time(stage, self.0.elapsed().as_secs_f64());
        self.0 = Instant::now();
    }
}

fn fw_options(args: &SolveArgs) -> FwOptions {
    FwOptions {
        alpha: args.alpha,
        max_iter: args.max_iter,
        ..Default::default()
    }
}

fn sampling_options(args: &SolveArgs) -> SamplingOptions {
    SamplingOptions {
        trials: args.trials,
        seed: args.seed,
        restrict_support: args.restrict_support,
        threads: args.threads,
    }
}

fn record_relaxation(report: &mut Report, sol: &FractionalSolution, trace: &FwTrace) {
    report.set("relaxation", "primal", sol.value);
    report.set("relaxation", "iterations", trace.iterations_run);
    report.set("relaxation", "converged", trace.converged);
    report.set("relaxation", "alpha_target", trace.alpha);
    report.set("relaxation", "alpha_achieved", trace.alpha_achieved);
    // Size of the support of the fractional solution.
    report.set("relaxation", "support_size", sol.support.len());
}

fn trial_records(rep: &SamplingReport) -> String {
    let mut out = String::from("trial,seed,objective,subset\n");
    for r in &rep.records {
        let subset: Vec<String> = r.subset.iter().map(usize::to_string).collect();
        let obj = if r.objective.is_finite() { r.objective.to_string() } else { String::new() };
        out.push_str(&format!("{},{},{},{}\n", r.trial, r.seed, obj, subset.join(" ")));
    }
    out
}

/// Optimal value for the problem `sense`, from the oracle or `--reference`.
fn reference(
    args: &SolveArgs,
    inst: &CovarianceInstance,
    sense: Sense,
    report: &mut Report,
    clock: &mut Stopwatch,
) -> Result<Option<f64>, CliError> {
    if args.with_oracle {
        let (key, (set, z)) = match sense {
            Sense::LogDet => ("z_star", exact_mesp(inst, args.s, args.oracle_cap)?),
            Sense::Trace => ("z_star_a", exact_amesp(inst, args.s, args.oracle_cap)?),
        };
        report.set("oracle", key, z);
        report.set("oracle", "subset", set);
        report.lower_bound("oracle", sense, z);
        report.upper_bound("oracle", sense, z);
        clock.lap(report, "oracle");
        return Ok(Some(z));
    }
    if let Some(z) = args.reference {
        report.set("reference", "value", z);
    }
    Ok(args.reference)
}

fn upper_gap(report: &mut Report, key: &str, upper: f64, z: Option<f64>) {
    if let Some(z) = z {
        report.set("gaps", key, percent_gap(upper, z, z));
    }
}

fn lower_gap(report: &mut Report, key: &str, lower: f64, z: Option<f64>) {
    if let Some(z) = z {
        report.set("gaps", key, percent_gap(z, lower, z));
    }
}

fn mesp_bound_section(report: &mut Report, n: usize, s: usize, theta: f64) -> Result<(), CliError> {
    let b = mesp_bounds(n, s)?;
    report.set("bounds", "sampling", b.sampling);
    report.set("bounds", "factorial_sampling", b.factorial_sampling);
    report.set("bounds", "local_search", local_search_bound(n, s, theta));
    report.set("bounds", "greedy", b.greedy);
    Ok(())
}

/// Run the selected pipeline; returns the report and, for sampling
/// pipelines, the per-trial CSV.
pub fn run(args: &SolveArgs) -> Result<(Report, Option<String>), CliError> {
    let mut report = Report::default();
    let mut clock = Stopwatch::start();
    let total = Instant::now();
    let format = args.input_format.map(|k| match k {
        InputKind::Dense => InputFormat::Dense,
        InputKind::Mtx => InputFormat::MatrixMarket,
    });
    let c = read_matrix(&args.input, format)?;
    let tol = args.rank_tol.unwrap_or_else(|| default_rank_tolerance(c.order()));
    let inst = factorize(&c, tol)?;
    let (n, s) = (inst.n(), args.s);
    if s == 0 || s > n {
        return Err(MespError::BadCardinality { s, max: n }.into());
    }
    let algo = args.algo.to_possible_value().expect("named").get_name().to_string();
    report.set("input", "path", args.input.display().to_string());
    report.set("input", "n", n);
    report.set("input", "rank", inst.d());
    report.set("input", "rank_tolerance", tol);
    report.set("run", "algo", algo);
    report.set("run", "s", s);
    report.set("run", "seed", args.seed);
    clock.lap(&mut report, "read");

    let mut records = None;
    match args.algo {
        Algo::Fw | Algo::Sample | Algo::Dsample => {
            let z = reference(args, &inst, Sense::LogDet, &mut report, &mut clock)?;
            let (sol, cert, trace) = solve_pc(&inst, s, &fw_options(args))?;
            clock.lap(&mut report, "relaxation");
            record_relaxation(&mut report, &sol, &trace);
            report.set("results", "z_ld", cert.bound_value);
            report.upper_bound("z_ld", Sense::LogDet, cert.bound_value);
            upper_gap(&mut report, "z_ld", cert.bound_value, z);
            mesp_bound_section(&mut report, n, s, args.theta.unwrap_or(1e-6))?;
            match args.algo {
                Algo::Sample => {
                    let rep = sample_best(&inst, &sol.x, s, &sampling_options(args))?;
                    clock.lap(&mut report, "rounding");
                    report.set("results", "lb_s", rep.best.objective);
                    report.set("results", "lb_s_subset", rep.best.subset.clone());
                    report.set("results", "lb_s_trial", rep.best.trial);
                    report.set("run", "trials", rep.trials);
                    report.set("results", "finite_trials", rep.finite_trials);
                    report.set("results", "sampling_support", rep.support_size);
                    report.lower_bound("lb_s", Sense::LogDet, rep.best.objective);
                    lower_gap(&mut report, "lb_s", rep.best.objective, z);
                    records = Some(trial_records(&rep));
                }
                Algo::Dsample => {
                    let d = derandomize(&inst, &sol.x, s, args.threads)?;
                    clock.lap(&mut report, "rounding");
                    report.set("results", "lb_d", d.log_det);
                    report.set("results", "lb_d_subset", d.subset.clone());
                    report.set("results", "conditional_chain", d.chain.clone());
                    report.lower_bound("lb_d", Sense::LogDet, d.log_det);
                    lower_gap(&mut report, "lb_d", d.log_det, z);
                }
                _ => {}
            }
        }
        Algo::Local => {
            let theta = args.theta.unwrap_or(1e-6);
            let z = reference(args, &inst, Sense::LogDet, &mut report, &mut clock)?;
            let start = greedy_init(&inst, s)?;
            report.set("results", "greedy", start.log_det);
            report.lower_bound("greedy", Sense::LogDet, start.log_det);
            let opts = LocalSearchOptions {
                theta,
                ..Default::default()
            };
            let (state, trace) = local_search(&inst, start, &opts)?;
            clock.lap(&mut report, "local_search");
            let cert = dual_certificate_from_local(&inst, &state, theta)?;
            clock.lap(&mut report, "certificate");
            report.set("results", "lb_l", state.log_det);
            report.set("results", "lb_l_subset", state.subset.clone());
            report.set("results", "swaps", trace.swaps.len());
            report.set("results", "passes", trace.passes);
            report.set("results", "certificate_bound", cert.bound_value);
            report.set("results", "certified_gap", cert.bound_value - state.log_det);
            report.lower_bound("lb_l", Sense::LogDet, state.log_det);
            report.upper_bound("certificate_bound", Sense::LogDet, cert.bound_value);
            lower_gap(&mut report, "lb_l", state.log_det, z);
            upper_gap(&mut report, "certificate_bound", cert.bound_value, z);
            mesp_bound_section(&mut report, n, s, theta)?;
        }
        Algo::AmespFw | Algo::AmespVolume => {
            let z = reference(args, &inst, Sense::Trace, &mut report, &mut clock)?;
            let (sol, cert, trace) = solve_apc(&inst, s, &fw_options(args))?;
            clock.lap(&mut report, "relaxation");
            record_relaxation(&mut report, &sol, &trace);
            report.set("results", "z_ald", cert.bound_value);
            report.lower_bound("z_ald", Sense::Trace, cert.bound_value);
            lower_gap(&mut report, "z_ald", cert.bound_value, z);
            report.set("bounds", "volume_ratio", (s as f64).min((n - s + 1) as f64));
            if args.algo == Algo::AmespVolume {
                let rep = volume_sample_best(&inst, &sol.x, s, &sampling_options(args))?;
                clock.lap(&mut report, "rounding");
                report.set("results", "ub_v", rep.best.objective);
                report.set("results", "ub_v_subset", rep.best.subset.clone());
                report.set("results", "ub_v_trial", rep.best.trial);
                report.set("run", "trials", rep.trials);
                report.set("results", "finite_trials", rep.finite_trials);
                report.upper_bound("ub_v", Sense::Trace, rep.best.objective);
                upper_gap(&mut report, "ub_v", rep.best.objective, z);
                records = Some(trial_records(&rep));
            }
        }
        Algo::AmespLocal => {
            let theta = args.theta.unwrap_or(1e-9);
            let z = reference(args, &inst, Sense::Trace, &mut report, &mut clock)?;
            let opts = ALocalOptions {
                theta,
                ..Default::default()
            };
            let (state, cert, trace) = a_local_search(&inst, s, None, &opts)?;
            clock.lap(&mut report, "local_search");
            report.set("results", "ub_l", state.trace_inverse);
            report.set("results", "ub_l_subset", state.subset.clone());
            report.set("results", "swaps", state.swap_count);
            report.set("results", "passes", trace.passes);
            report.set("results", "certificate_bound", cert.bound_value);
            report.set("results", "certified_ratio", state.trace_inverse / cert.bound_value);
            report.upper_bound("ub_l", Sense::Trace, state.trace_inverse);
            report.lower_bound("certificate_bound", Sense::Trace, cert.bound_value);
            upper_gap(&mut report, "ub_l", state.trace_inverse, z);
            if args.with_oracle {
                match mesp::relaxation::smoothness_constant(&inst, s, args.oracle_cap) {
                    Ok(sm) if sm.delta > 0.0 => {
                        let r = amesp_ratios(n, s, inst.lambda_max(), sm.delta);
                        report.set("bounds", "delta", sm.delta);
                        report.set("bounds", "local_ratio", r.local);
                        report.set("bounds", "volume_ratio", r.volume);
                    }
                    Ok(_) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Algo::Oracle => {
            let (set, z) = exact_mesp(&inst, s, args.oracle_cap)?;
            report.set("oracle", "z_star", z);
            report.set("oracle", "subset", set);
            let (aset, za) = exact_amesp(&inst, s, args.oracle_cap)?;
            report.set("oracle", "z_star_a", if za.is_finite() { Value::from(za) } else { Value::Null });
            report.set("oracle", "subset_a", aset);
            clock.lap(&mut report, "oracle");
        }
    }
    report.time("total", total.elapsed().as_secs_f64());
    Ok((report, records))
}
