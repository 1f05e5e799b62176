//! Acceptance suite: one line per criterion; exits non-zero if any fails.

use std::time::{Duration, Instant};

use ergopoint::stats::TestReport;
use ergopoint_cli::{execute, ExperimentConfig, ExperimentKind, RunManifest};
use serde_json::{json, Value};

const SEED: u64 = 42;

struct Gate {
    lines: Vec<String>,
    failed: usize,
    /// Every config run so far, with its reports, for the determinism check.
    runs: Vec<(ExperimentConfig, String)>,
}

impl Gate {
    fn record(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        let line = format!("criterion {id:>2} {:<4} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
        self.failed += usize::from(!pass);
    }

    fn run(&mut self, kind: ExperimentKind, replicates: usize, parameters: Value) -> (RunManifest, Duration) {
        let cfg = ExperimentConfig::new(kind).with_seed(SEED).with_replicates(replicates).with_parameters(parameters);
        let start = Instant::now();
        let m = execute(&cfg).unwrap_or_else(|e| panic!("{kind}: {e}"));
        let elapsed = start.elapsed();
        self.runs.push((cfg, m.reports_json().unwrap()));
        (m, elapsed)
    }
}

fn report<'a>(m: &'a RunManifest, name: &str) -> &'a TestReport {
    m.reports.iter().find(|r| r.test_name == name).unwrap_or_else(|| panic!("no {name} report"))
}

fn reports<'a>(m: &'a RunManifest, name: &'a str) -> impl Iterator<Item = &'a TestReport> + 'a {
    m.reports.iter().filter(move |r| r.test_name == name)
}

fn unit_window(len: f64) -> Value {
    json!({"interval": [0.0, len]})
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn void_probability(g: &mut Gate) {
    let (m, elapsed) = single_threaded(|| {
        let mut inner = Gate { lines: vec![], failed: 0, runs: vec![] };
        let out = inner.run(ExperimentKind::PppVerify, 200_000, json!({"window": unit_window(1.0)}));
        g.runs.extend(inner.runs);
        out
    });
    let r = report(&m, "void_prob_test");
    let target = (-1.0f64).exp();
    let close = (r.statistic - target).abs() <= 0.0032;
    g.record(
        1,
        "void probability",
        r.pass && close && elapsed < Duration::from_secs(60),
        format!("p_hat={:.6} target={target:.6} p={:.4} single-threaded {:.1}s", r.statistic, r.p_value, elapsed.as_secs_f64()),
    );
}

fn count_law(g: &mut Gate) {
    let mut ok = true;
    let mut parts = Vec::new();
    for lambda in [0.5, 1.0, 2.0, 5.0] {
        let mut params = json!({"window": unit_window(lambda)});
        if lambda == 1.0 {
            params["calibration_runs"] = json!(200);
        }
        let (m, _) = g.run(ExperimentKind::PppVerify, 50_000, params);
        let r = report(&m, "poisson_gof");
        ok &= r.pass;
        parts.push(format!("lambda={lambda} p={:.4}", r.p_value));
        if lambda == 1.0 {
            let c = report(&m, "calibration");
            ok &= c.pass;
            parts.push(format!("calibration {}/200 rejected", c.detail("rejections").unwrap_or(f64::NAN)));
        }
    }
    g.record(2, "count law", ok, parts.join(", "));
}

fn independence(g: &mut Gate) {
    let (m, _) = g.run(
        ExperimentKind::PppVerify,
        50_000,
        json!({"window": unit_window(1.0), "second_window": {"interval": [1.0, 2.0]}}),
    );
    let r = report(&m, "independence_test");
    g.record(3, "independence on disjoint windows", r.pass, format!("chi2={:.3} p={:.4}", r.statistic, r.p_value));
}

fn sigma_finite_consistency(g: &mut Gate) {
    let (m, _) = g.run(ExperimentKind::PppVerify, 20_000, json!({"consistency_depth": 3}));
    let r = report(&m, "two_sample_count_test");
    g.record(4, "sigma-finite consistency", r.pass, format!("depth 3 vs direct: p={:.4}", r.p_value));
}

fn equivariance(g: &mut Gate) {
    let maps = json!([{"kind": "translation", "t": 5.0}, {"kind": "interval_swap", "q": 0.0, "r": 1.0}]);
    let (m, _) = g.run(ExperimentKind::Equivariance, 50_000, json!({"maps": maps}));
    let ok = m.reports.len() == 2 && m.overall_pass;
    let ps: Vec<String> = m.reports.iter().map(|r| format!("p={:.4}", r.p_value)).collect();
    g.record(5, "equivariance", ok, format!("translation(5) {}, intervalSwap(0,1) {}", ps[0], ps[1]));
}

fn levy(g: &mut Gate) {
    let (m, _) = g.run(ExperimentKind::LevySquare, 100_000, json!({"map": {"kind": "translation", "t": 5.0}}));
    let r = report(&m, "levy_square_test");
    let closed = report(&m, "levy_closed_form");
    let (p1, p2) = (r.detail("p1").unwrap(), r.detail("p2").unwrap());
    g.record(
        6,
        "levy square identity",
        r.pass && closed.pass && p2 < p1,
        format!("p1={p1:.5} p2={p2:.5} z={:.3} z_closed={:.3}", r.statistic, closed.statistic),
    );
}

fn convolution(g: &mut Gate) {
    let (m, _) = g.run(ExperimentKind::Mollify, 100, json!({"grid_size": 1024}));
    let names = ["l1_contraction", "gcont_bound_check", "constant_invariance"];
    let ok = names.iter().all(|n| report(&m, n).pass);
    g.record(
        7,
        "convolution bounds",
        ok,
        format!(
            "100 instances: max l1 excess={:.2e} min modulus margin={:.3e} constant drift={:.1e}",
            report(&m, names[0]).statistic,
            report(&m, names[1]).statistic,
            report(&m, names[2]).statistic
        ),
    );

    let bounds: Vec<&TestReport> = reports(&m, "arc_l1_bound").collect();
    let ok = bounds.len() == 3 && bounds.iter().all(|r| r.pass) && report(&m, "arc_l1_monotone").pass;
    let errs: Vec<String> = bounds
        .iter()
        .map(|r| format!("eps={} err={:.5}", r.detail("epsilon").unwrap(), r.detail("l1_error").unwrap()))
        .collect();
    g.record(8, "L1 approximation of the arc", ok, errs.join(", "));
}

fn orders(g: &mut Gate) {
    let (m, _) = g.run(
        ExperimentKind::OrdersUniform,
        60_000,
        json!({"n": 3, "betweenness_size": 4, "betweenness": [0, 2, 1], "betweenness_replicates": 100_000}),
    );
    let (u, b) = (report(&m, "uniform_order"), report(&m, "betweenness"));
    g.record(
        9,
        "uniform order law",
        u.pass && b.pass,
        format!("chi2={:.3} p={:.4}; betweenness={:.5} sigma={:.5}", u.statistic, u.p_value, b.statistic, b.detail("sigma").unwrap()),
    );
}

fn back_and_forth(g: &mut Gate) {
    let (m, elapsed) = g.run(ExperimentKind::BackAndForth, 1000, json!({"steps": 200, "cover": 100}));
    let r = report(&m, "back_and_forth");
    g.record(
        10,
        "back-and-forth",
        r.pass && elapsed < Duration::from_secs(30),
        format!("1000 pairs, {} failures, {:.1}s", r.statistic, elapsed.as_secs_f64()),
    );
}

fn divergence(g: &mut Gate) {
    let (m, _) = g.run(
        ExperimentKind::Counterexample,
        1000,
        json!({"max_prefix_len": 4, "bounds": [1.0, 10.0, 100.0, 1000.0], "tolerance": 1e-3}),
    );
    let (d, t) = (report(&m, "divergence_witness"), report(&m, "term_convergence"));
    g.record(
        11,
        "divergence witness",
        d.pass && t.pass,
        format!("min margin over M={:.2e}, max term deviation={:.2e}", d.statistic, t.statistic),
    );
}

fn whirly(g: &mut Gate) {
    let (m, _) = g.run(ExperimentKind::Whirly, 1000, json!({"depth": 8}));
    let r = report(&m, "whirly_witness");
    g.record(
        12,
        "whirly witness",
        r.pass,
        format!("max weak_distance/eps={:.3}, {} nontrivial swaps", r.statistic, r.detail("nontrivial_swaps").unwrap()),
    );
}

fn determinism(g: &mut Gate) {
    // re-run everything on a differently sized pool
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let runs = std::mem::take(&mut g.runs);
    let mismatched: Vec<String> = pool.install(|| {
        runs.iter()
            .filter(|(cfg, json)| execute(cfg).unwrap().reports_json().unwrap() != *json)
            .map(|(cfg, _)| cfg.experiment.to_string())
            .collect()
    });
    g.record(
        13,
        "determinism",
        mismatched.is_empty(),
        format!("{} runs re-executed, mismatches: {mismatched:?}", runs.len()),
    );
}

fn main() {
    let mut g = Gate { lines: Vec::new(), failed: 0, runs: Vec::new() };
    void_probability(&mut g);
    count_law(&mut g);
    independence(&mut g);
    sigma_finite_consistency(&mut g);
    equivariance(&mut g);
    levy(&mut g);
    convolution(&mut g);
    orders(&mut g);
    back_and_forth(&mut g);
    divergence(&mut g);
    whirly(&mut g);
    determinism(&mut g);
    assert_eq!(g.lines.len(), 13);
    println!("acceptance: {} of 13 criteria passed", 13 - g.failed);
    if g.failed > 0 {
        std::process::exit(1);
    }
}
