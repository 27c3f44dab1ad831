//! WebAssembly bindings for the browser demo. Every export takes plain
//! values and returns a JSON string; the page does the plotting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use mesp::amesp::{a_local_search, solve_apc, volume_sample_best, ALocalOptions};
use mesp::io::{parse, InputFormat};
use mesp::linalg::default_rank_tolerance;
use mesp::local_search::{dual_certificate_from_local, greedy_init, local_search, LocalSearchOptions};
use mesp::relaxation::{solve_pc, FwOptions};
use mesp::sampling::{derandomize, sample_best, SamplingOptions};
use mesp::spectral::{local_search_bound, log_binomial, mesp_bounds};
use mesp::{factorize, oracle, CovarianceInstance};

/// Exhaustive search only below this many subsets.
const ORACLE_LIMIT: usize = 50_000;

fn instance(text: &str) -> Result<CovarianceInstance, String> {
    let format = if text.trim_start().starts_with("%%MatrixMarket") {
        InputFormat::MatrixMarket
    } else {
        InputFormat::Dense
    };
    let c = parse(text, format).map_err(|e| e.to_string())?;
    factorize(&c, default_rank_tolerance(c.order())).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct GapPoint {
    pub t: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub best_gap: f64,
    pub support: usize,
}

#[derive(Debug, Serialize)]
pub struct GapCurve {
    pub bound: f64,
    pub primal: f64,
    pub converged: bool,
    pub points: Vec<GapPoint>,
}

pub fn gap_curve(text: &str, s: usize, max_iter: usize, trace_problem: bool) -> Result<GapCurve, String> {
    let inst = instance(text)?;
    let opts = FwOptions {
        max_iter: Some(max_iter.max(1)),
        record_trace: true,
        ..Default::default()
    };
    let (sol, cert, trace) = if trace_problem {
        solve_apc(&inst, s, &opts)
    } else {
        solve_pc(&inst, s, &opts)
    }
    .map_err(|e| e.to_string())?;
    Ok(GapCurve {
        bound: cert.bound_value,
        primal: sol.value,
        converged: trace.converged,
        points: trace
            .iterations
            .iter()
            .map(|it| GapPoint {
                t: it.t,
                primal: it.primal,
                dual: it.dual,
                gap: it.gap,
                best_gap: it.best_gap,
                support: it.support,
            })
            .collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub algorithm: &'static str,
    /// "lower", "upper" or "exact".
    pub role: &'static str,
    pub value: f64,
    pub subset: Option<Vec<usize>>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub n: usize,
    pub s: usize,
    pub objective: &'static str,
    pub rows: Vec<Row>,
}

fn row(algorithm: &'static str, role: &'static str, value: f64, subset: Option<Vec<usize>>) -> Row {
    Row {
        algorithm,
        role,
        value,
        subset,
    }
}

pub fn comparison(text: &str, s: usize, trials: usize, seed: u64, trace_problem: bool) -> Result<Comparison, String> {
    let inst = instance(text)?;
    let n = inst.n();
    let e = |e: mesp::MespError| e.to_string();
    let sampling = SamplingOptions {
        trials: trials.max(1),
        seed,
        restrict_support: true,
        threads: None,
    };
    let fw = FwOptions::default();
    let small = log_binomial(n, s).exp() <= ORACLE_LIMIT as f64;
    let mut rows = Vec::new();
    if trace_problem {
        let (sol, cert, _) = solve_apc(&inst, s, &fw).map_err(e)?;
        rows.push(row("relaxation", "lower", cert.bound_value, None));
        let v = volume_sample_best(&inst, &sol.x, s, &sampling).map_err(e)?;
        rows.push(row("volume sampling", "upper", v.best.objective, Some(v.best.subset)));
        let (st, lcert, _) = a_local_search(&inst, s, None, &ALocalOptions::default()).map_err(e)?;
        rows.push(row("local search", "upper", st.trace_inverse, Some(st.subset)));
        rows.push(row("local certificate", "lower", lcert.bound_value, None));
        if small {
            let (set, z) = oracle::exact_amesp(&inst, s, ORACLE_LIMIT).map_err(e)?;
            rows.push(row("exhaustive", "exact", z, Some(set)));
        }
    } else {
        let (sol, cert, _) = solve_pc(&inst, s, &fw).map_err(e)?;
        rows.push(row("relaxation", "upper", cert.bound_value, None));
        let smp = sample_best(&inst, &sol.x, s, &sampling).map_err(e)?;
        rows.push(row("sampling", "lower", smp.best.objective, Some(smp.best.subset)));
        let d = derandomize(&inst, &sol.x, s, None).map_err(e)?;
        rows.push(row("derandomized", "lower", d.log_det, Some(d.subset)));
        let g = greedy_init(&inst, s).map_err(e)?;
        let mut gs = g.subset.clone();
        gs.sort_unstable();
        rows.push(row("greedy", "lower", g.log_det, Some(gs)));
        let (st, _) = local_search(&inst, g, &LocalSearchOptions::default()).map_err(e)?;
        let lc = dual_certificate_from_local(&inst, &st, LocalSearchOptions::default().theta).map_err(e)?;
        rows.push(row("local search", "lower", st.log_det, Some(st.subset)));
        rows.push(row("local certificate", "upper", lc.bound_value, None));
        if small {
            let (set, z) = oracle::exact_mesp(&inst, s, ORACLE_LIMIT).map_err(e)?;
            rows.push(row("exhaustive", "exact", z, Some(set)));
        }
    }
    Ok(Comparison {
        n,
        s,
        objective: if trace_problem { "trace of inverse (minimize)" } else { "log det (maximize)" },
        rows,
    })
}

#[derive(Debug, Serialize)]
pub struct BoundCurves {
    pub n: usize,
    pub s: Vec<usize>,
    pub sampling: Vec<f64>,
    pub factorial_sampling: Vec<f64>,
    pub local_search: Vec<f64>,
    pub greedy: Vec<f64>,
}

pub fn bound_curves(n: usize, theta: f64) -> Result<BoundCurves, String> {
    if n < 2 {
        return Err("n must be at least 2".into());
    }
    let mut out = BoundCurves {
        n,
        s: Vec::new(),
        sampling: Vec::new(),
        factorial_sampling: Vec::new(),
        local_search: Vec::new(),
        greedy: Vec::new(),
    };
    for s in 1..n {
        let b = mesp_bounds(n, s).map_err(|e| e.to_string())?;
        out.s.push(s);
        out.sampling.push(b.sampling);
        out.factorial_sampling.push(b.factorial_sampling);
        out.local_search.push(local_search_bound(n, s, theta));
        out.greedy.push(b.greedy);
    }
    Ok(out)
}

/// Dense text of a random rank-`rank` covariance matrix of order `n`.
pub fn random_matrix_text(n: usize, rank: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = mesp::instances::random_gram(&mut rng, rank.clamp(1, n.max(1)), n.max(1));
    (0..c.order())
        .map(|i| {
            (0..c.order())
                .map(|j| c.get(i, j).to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = fwGapCurve)]
pub fn fw_gap_curve(matrix: &str, s: usize, max_iter: usize, trace_problem: bool) -> Result<String, JsValue> {
    to_js(gap_curve(matrix, s, max_iter, trace_problem))
}

#[wasm_bindgen(js_name = compareAlgorithms)]
pub fn compare_algorithms(matrix: &str, s: usize, trials: usize, seed: u32, trace_problem: bool) -> Result<String, JsValue> {
    to_js(comparison(matrix, s, trials, seed as u64, trace_problem))
}

#[wasm_bindgen(js_name = boundCurves)]
pub fn bound_curves_js(n: usize, theta: f64) -> Result<String, JsValue> {
    to_js(bound_curves(n, theta))
}

#[wasm_bindgen(js_name = randomMatrix)]
pub fn random_matrix(n: usize, rank: usize, seed: u32) -> String {
    random_matrix_text(n, rank, seed as u64)
}
