//! Acceptance checks for the primary deliverable. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::process::Command;
use std::time::Instant;

use allee_core::agent::{micro_step, run_ensemble, Population, SimConfig};
use allee_core::analysis::{
    fixed_points, knowledge_fixed_points, pure_strategy_roots, FixedPointLabel, Stability,
};
use allee_core::ode::{integrate, run_to_steady_state, IntegratorConfig};
use allee_core::seed::rng_from_seed;
use allee_core::sweep::{
    basin_grid, bifurcation_scan, compare_regions, critical_line_agreement, is_sustainable,
    region_map, Axis, BasinGrid, BifurcationScan, GridSpec, SweptParam, TerminalSolver,
};
use allee_core::{
    resource_drift, strategy_drift, validate_params, GrowthKind, Model, ModelParams, State,
    StrategyRule,
};

const ROOT_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-9;
const ZERO_EIG_TOL: f64 = 1e-6;
const ODE_EQ_TOL: f64 = 1e-4;
const ODE_COLLAPSE_TOL: f64 = 1e-6;
const PLAIN_COLLAPSE_TOL: f64 = 1e-3;
const ENSEMBLE_ABS_TOL: f64 = 0.05;
const ENSEMBLE_SEM_FACTOR: f64 = 3.0;
const ENSEMBLE_CHECKPOINTS: usize = 20;
const ENSEMBLE_HORIZON: f64 = 40.0;
const DRIFT_SAMPLES: usize = 100_000;
const DRIFT_SEM_FACTOR: f64 = 3.0;
const BASIN_AGREEMENT: f64 = 0.98;
const KF_EQ_TOL: f64 = 1e-4;

// Independently computed references (bisection on the nullcline equations).
const SC_MINUS: f64 = 0.159_487_516_204_667_3;
const SC_PLUS: f64 = 0.940_512_483_795_332_7;
const SD_MINUS: f64 = 0.320_871_215_252_208;
const SD_PLUS: f64 = 0.779_128_784_747_792;
const KF_STABLE: (f64, f64) = (0.819379, 0.200686);
const KF_SADDLE: (f64, f64) = (0.169512, 0.922765);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn params(allee: f64, e_c: f64, e_d: f64) -> ModelParams {
    ModelParams {
        allee,
        e_c_hat: e_c,
        e_d_hat: e_d,
        ..ModelParams::default()
    }
}

fn model(p: ModelParams, growth: GrowthKind, rule: StrategyRule) -> Model {
    Model::new(validate_params(p).expect("valid parameters"), growth, rule)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c1_roots() -> Outcome {
    let p = params(0.1, 0.5, 1.5);
    let mut worst_root = 0.0f64;
    let mut worst_residual = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for (e, x, oracle) in [
        (0.5, 1.0, [SC_MINUS, SC_PLUS]),
        (1.5, 0.0, [SD_MINUS, SD_PLUS]),
    ] {
        let (lo, hi) = pure_strategy_roots(0.1, e).expect("roots exist");
        let g = |r: f64| (r / 0.1 - 1.0) * (1.0 - r) - e;
        let vertex = 0.55;
        let b = [bisect(g, 0.1, vertex), bisect(g, vertex, 1.0)];
        for (closed, (bis, orc)) in [lo, hi].into_iter().zip(b.into_iter().zip(oracle)) {
            worst_root = worst_root.max((closed - bis).abs());
            worst_oracle = worst_oracle.max((closed - orc).abs());
            let d = resource_drift(State::new(closed, x), &p, GrowthKind::AlleeLogistic);
            worst_residual = worst_residual.max(d.abs());
        }
    }
    outcome(
        worst_root <= ROOT_TOL && worst_residual <= RESIDUAL_TOL && worst_oracle <= ROOT_TOL,
        format!("max |closed-bisection| {worst_root:.1e}, max |closed-oracle| {worst_oracle:.1e}, max residual {worst_residual:.1e}"),
    )
}

fn c2_stability() -> Outcome {
    let m = model(
        params(0.1, 0.5, 1.5),
        GrowthKind::AlleeLogistic,
        StrategyRule::Replicator,
    );
    let points = fixed_points(&m.params, StrategyRule::Replicator).expect("fixed points");
    let get = |l: FixedPointLabel| points.iter().find(|p| p.label == l).expect("present");
    let s0 = get(FixedPointLabel::S0);
    let (zero, neg) = {
        let mut re = s0.eigenvalues.map(|z| z.re);
        re.sort_by(f64::total_cmp);
        (re[1], re[0])
    };
    let checks = [
        get(FixedPointLabel::SDminus).classification.is_unstable(),
        get(FixedPointLabel::SDplus).classification == Stability::Stable,
        get(FixedPointLabel::SCminus).classification.is_unstable(),
        get(FixedPointLabel::SCplus).classification.is_unstable(),
        s0.classification == Stability::NeutralLine && zero.abs() < ZERO_EIG_TOL && neg < 0.0,
    ];
    let names: Vec<String> = [
        FixedPointLabel::SDminus,
        FixedPointLabel::SDplus,
        FixedPointLabel::SCminus,
        FixedPointLabel::SCplus,
        FixedPointLabel::S0,
    ]
    .iter()
    .map(|&l| format!("{}={}", l.as_str(), get(l).classification.as_str()))
    .collect();
    outcome(checks.iter().all(|&c| c), names.join(" "))
}

fn terminal(p: ModelParams, growth: GrowthKind, r0: f64, x0: f64) -> State {
    let m = model(p, growth, StrategyRule::Replicator);
    run_to_steady_state(&m, State::new(r0, x0), &IntegratorConfig::default())
        .expect("integration")
        .final_state
}

fn c3_ode_scenarios() -> Outcome {
    let a = terminal(params(0.1, 0.5, 1.5), GrowthKind::AlleeLogistic, 0.5, 0.5);
    let b = terminal(params(0.1, 0.5, 1.5), GrowthKind::AlleeLogistic, 0.2, 0.5);
    let c = terminal(params(0.3, 0.5, 1.5), GrowthKind::AlleeLogistic, 0.5, 0.5);
    let d = terminal(params(0.1, 0.5, 1.5), GrowthKind::PlainLogistic, 0.5, 0.5);
    let pass = (a.r - SD_PLUS).abs() < ODE_EQ_TOL
        && a.x < ODE_EQ_TOL
        && b.r < ODE_COLLAPSE_TOL
        && c.r < ODE_COLLAPSE_TOL
        && d.r < PLAIN_COLLAPSE_TOL;
    outcome(
        pass,
        format!(
            "mild (0.5,0.5) R={:.6} x={:.1e}; mild (0.2,0.5) R={:.1e}; strong R={:.1e}; plain R={:.1e}",
            a.r, a.x, b.r, c.r, d.r
        ),
    )
}

fn c4_micro_macro() -> Outcome {
    let scenarios = [
        (
            "rep A=0.1 (0.5,0.5)",
            StrategyRule::Replicator,
            0.1,
            0.5,
            0.5,
        ),
        (
            "rep A=0.3 (0.5,0.5)",
            StrategyRule::Replicator,
            0.3,
            0.5,
            0.5,
        ),
        (
            "rep A=0.1 (0.2,0.5)",
            StrategyRule::Replicator,
            0.1,
            0.2,
            0.5,
        ),
        (
            "kf A=0.1 (0.5,0.5)",
            StrategyRule::KnowledgeFeedback,
            0.1,
            0.5,
            0.5,
        ),
        (
            "kf A=0.3 (0.5,0.5)",
            StrategyRule::KnowledgeFeedback,
            0.3,
            0.5,
            0.5,
        ),
        (
            "kf A=0.1 (0.2,0.5)",
            StrategyRule::KnowledgeFeedback,
            0.1,
            0.2,
            0.5,
        ),
    ];
    let n = 200;
    let stride = (ENSEMBLE_HORIZON / ENSEMBLE_CHECKPOINTS as f64 * n as f64) as usize;
    let mut all = true;
    let mut worst = Vec::new();
    for (i, (name, rule, allee, r0, x0)) in scenarios.into_iter().enumerate() {
        let m = model(params(allee, 0.5, 1.5), GrowthKind::AlleeLogistic, rule);
        let s0 = State::new(r0, x0);
        let sim = SimConfig {
            population: n,
            steps: (ENSEMBLE_HORIZON * n as f64) as usize,
            seed: 1000 + i as u64,
            record_stride: stride,
            ..SimConfig::default()
        };
        let stats = run_ensemble(&m, s0, &sim, 50).expect("ensemble");
        let ode = integrate(
            &m,
            s0,
            &IntegratorConfig {
                t_max: ENSEMBLE_HORIZON,
                record_stride: 1,
                stop_at_steady_state: false,
                ..IntegratorConfig::default()
            },
        )
        .expect("ode");
        let mut excess = f64::NEG_INFINITY;
        let mut checked = 0;
        for k in 1..stats.len() {
            let t = stats.times[k];
            let o = ode.sample(t).expect("within horizon");
            let er = (stats.mean_r[k] - o.r).abs()
                - ENSEMBLE_ABS_TOL.max(ENSEMBLE_SEM_FACTOR * stats.sem_r[k]);
            let ex = (stats.mean_x[k] - o.x).abs()
                - ENSEMBLE_ABS_TOL.max(ENSEMBLE_SEM_FACTOR * stats.sem_x[k]);
            excess = excess.max(er).max(ex);
            checked += 1;
        }
        let ok = excess <= 0.0 && checked == ENSEMBLE_CHECKPOINTS;
        all &= ok;
        worst.push(format!("{name}: {}", if ok { "ok" } else { "out" }));
        if !ok {
            worst.push(format!("(excess {excess:.3}, {checked} checkpoints)"));
        }
    }
    outcome(all, worst.join("; "))
}

fn one_step(rule: StrategyRule) -> (f64, f64, f64) {
    let p = params(0.1, 0.5, 1.5);
    let (n, r) = (200, 0.5);
    let pop = Population::from_fraction(n, 0.5);
    let mut rng = rng_from_seed(20_240_501 + rule as u64);
    let samples: Vec<f64> = (0..DRIFT_SAMPLES)
        .map(|_| {
            let next = micro_step(pop, r, &p, rule, &mut rng);
            next.cooperators as f64 - pop.cooperators as f64
        })
        .collect();
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let expected = strategy_drift(State::new(r, pop.fraction()), &p, rule);
    (mean, (var / k).sqrt(), expected)
}

fn c5_one_step_drift() -> Outcome {
    let (rm, rs, re) = one_step(StrategyRule::Replicator);
    let (km, ks, ke) = one_step(StrategyRule::KnowledgeFeedback);
    let pass = (rm - re).abs() <= DRIFT_SEM_FACTOR * rs && (km - ke).abs() <= DRIFT_SEM_FACTOR * ks;
    outcome(
        pass,
        format!("replicator N*E[dx]={rm:.5} vs {re:.5} (sem {rs:.5}); knowledge {km:.5} vs {ke:.5} (sem {ks:.5})"),
    )
}

fn scan(swept: SweptParam, axis: Axis, base: ModelParams) -> BifurcationScan {
    let m = model(base, GrowthKind::AlleeLogistic, StrategyRule::Replicator);
    bifurcation_scan(
        &m,
        swept,
        &axis.values(),
        10,
        7,
        &TerminalSolver::Ode(IntegratorConfig::default()),
    )
    .expect("scan")
}

/// Analytic branch end and the largest value where a simulation sustained.
fn scan_ends(s: &BifurcationScan) -> (Option<f64>, Option<f64>, bool) {
    let end = s.sustainable_branch_end();
    let contiguous = s
        .slices
        .iter()
        .skip_while(|x| x.has_sustainable_branch())
        .all(|x| !x.has_sustainable_branch());
    let sim_end = s
        .slices
        .iter()
        .rev()
        .find(|x| x.simulated.iter().any(|p| is_sustainable(p.r_star)))
        .map(|x| x.value);
    (end, sim_end, contiguous)
}

fn c6_thresholds() -> Outcome {
    let step_e = 0.005;
    let e_scan = scan(
        SweptParam::EDHat,
        Axis::stepped(1.8, 2.2, step_e),
        params(0.1, 0.5, 1.5),
    );
    let step_a = 0.001;
    let a_scan = scan(
        SweptParam::Allee,
        Axis::stepped(0.08, 0.18, step_a),
        params(0.1, 0.5, 1.5),
    );
    let e_bound = 0.9 * 0.9 / 0.4;
    let a_bound = 4.0 - 15f64.sqrt();
    let (ee, es, ec) = scan_ends(&e_scan);
    let (ae, as_, ac) = scan_ends(&a_scan);
    let within =
        |v: Option<f64>, bound: f64, step: f64| v.is_some_and(|v| (v - bound).abs() <= step);
    let pass = ec
        && ac
        && within(ee, e_bound, step_e)
        && within(ae, a_bound, step_a)
        && es.is_some_and(|v| v <= e_bound + step_e)
        && as_.is_some_and(|v| v <= a_bound + step_a);
    outcome(
        pass,
        format!(
            "e_D branch ends {ee:?} (bound {e_bound}), last sustained sim {es:?}; A branch ends {ae:?} (bound {a_bound:.6}), last sustained sim {as_:?}"
        ),
    )
}

fn basin(rule: StrategyRule) -> BasinGrid {
    let m = model(params(0.1, 0.5, 1.5), GrowthKind::AlleeLogistic, rule);
    basin_grid(&m, &GridSpec::default(), &IntegratorConfig::default()).expect("basin")
}

fn c7_basin(rep: &BasinGrid) -> Outcome {
    let agreement = critical_line_agreement(rep, &params(0.1, 0.5, 1.5)).expect("line");
    outcome(
        agreement.fraction() >= BASIN_AGREEMENT && agreement.far_mismatches == 0,
        format!(
            "agreement {:.4} ({} of {}), {} mismatches beyond one cell",
            agreement.fraction(),
            agreement.matching,
            agreement.total,
            agreement.far_mismatches
        ),
    )
}

fn c8_containment() -> Outcome {
    let a = Axis::left_open(0.005, 0.4, 101);
    let e = Axis::left_open(1.0, 3.0, 101);
    let mut pass = true;
    let mut parts = Vec::new();
    for e_c in [0.25, 0.5, 0.75] {
        let rep = region_map(e_c, &a, &e, StrategyRule::Replicator).expect("map");
        let kf = region_map(e_c, &a, &e, StrategyRule::KnowledgeFeedback).expect("map");
        let cmp = compare_regions(&rep, &kf).expect("same axes");
        pass &= cmp.contained;
        parts.push(format!(
            "e_C={e_c}: rep {} kf {} contained={}",
            cmp.first_count, cmp.second_count, cmp.contained
        ));
    }
    let p = params(0.1, 0.5, 2.5);
    let point = allee_core::analysis::is_bistable(&p, StrategyRule::KnowledgeFeedback)
        && !allee_core::analysis::is_bistable(&p, StrategyRule::Replicator);
    parts.push(format!("(0.1, 2.5) kf-only={point}"));
    outcome(pass && point, parts.join("; "))
}

fn c9_basin_sizes(rep: &BasinGrid, kf: &BasinGrid) -> Outcome {
    let (fr, fk) = (rep.sustainable_fraction(), kf.sustainable_fraction());
    outcome(
        fk > fr,
        format!("sustainable fraction knowledge {fk:.4} vs replicator {fr:.4}"),
    )
}

fn c10_kf_equilibrium() -> Outcome {
    let m = model(
        params(0.1, 0.5, 1.5),
        GrowthKind::AlleeLogistic,
        StrategyRule::KnowledgeFeedback,
    );
    let ss = run_to_steady_state(&m, State::new(0.5, 0.5), &IntegratorConfig::default())
        .expect("steady state");
    let s = ss.final_state;
    let points = knowledge_fixed_points(&m.params).expect("points");
    let near = |target: (f64, f64)| {
        points
            .iter()
            .min_by(|a, b| {
                let d = |p: &allee_core::analysis::FixedPoint| {
                    (p.r_star - target.0).hypot(p.x_star - target.1)
                };
                d(a).total_cmp(&d(b))
            })
            .expect("non-empty")
    };
    let stable = near(KF_STABLE);
    let saddle = near(KF_SADDLE);
    let pass = (s.r - KF_STABLE.0).abs() < KF_EQ_TOL
        && (s.x - KF_STABLE.1).abs() < KF_EQ_TOL
        && stable.classification == Stability::Stable
        && (stable.r_star - s.r).abs() < KF_EQ_TOL
        && (saddle.r_star - KF_SADDLE.0).abs() < KF_EQ_TOL
        && (saddle.x_star - KF_SADDLE.1).abs() < KF_EQ_TOL
        && saddle.classification == Stability::Saddle;
    outcome(
        pass,
        format!(
            "steady state ({:.6}, {:.6}); ({:.6}, {:.6}) {}; ({:.6}, {:.6}) {}",
            s.r,
            s.x,
            stable.r_star,
            stable.x_star,
            stable.classification.as_str(),
            saddle.r_star,
            saddle.x_star,
            saddle.classification.as_str()
        ),
    )
}

fn cli(threads: usize, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_allee"))
        .args(args)
        .args(["--quiet", "--threads", &threads.to_string()])
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn c11_determinism() -> Outcome {
    let runs: [&[&str]; 5] = [
        &["basin", "--set", "resolution=41", "--set", "rule=knowledge"],
        &["region", "--set", "rule=knowledge"],
        &["bifurcation", "--set", "n_ics=4", "--set", "sweep_step=0.1"],
        &[
            "bifurcation",
            "--set",
            "terminal=agent",
            "--set",
            "n_ics=3",
            "--set",
            "sweep_step=0.2",
            "--set",
            "steps=4000",
        ],
        &[
            "ensemble",
            "--set",
            "n_runs=20",
            "--set",
            "steps=4000",
            "--seed",
            "5",
        ],
    ];
    let mut differing = Vec::new();
    for args in runs {
        if cli(1, args) != cli(8, args) {
            differing.push(args[0]);
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} runs compared; differing: {differing:?}", runs.len()),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} {} {name} [{secs:.1}s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    };
    report(1, "fixed-point roots", &mut c1_roots);
    report(2, "stability classes", &mut c2_stability);
    report(3, "ODE scenario matrix", &mut c3_ode_scenarios);
    report(4, "micro/macro consistency", &mut c4_micro_macro);
    report(5, "one-step drift", &mut c5_one_step_drift);
    report(6, "bi-stability thresholds", &mut c6_thresholds);
    let start = Instant::now();
    let rep = basin(StrategyRule::Replicator);
    let rep_secs = start.elapsed().as_secs_f64();
    report(7, "critical-line basin", &mut || {
        let mut o = c7_basin(&rep);
        o.detail.push_str(&format!(", grid {rep_secs:.1}s"));
        o
    });
    report(8, "region containment", &mut c8_containment);
    report(9, "basin sizes", &mut || {
        let kf = basin(StrategyRule::KnowledgeFeedback);
        c9_basin_sizes(&rep, &kf)
    });
    report(
        10,
        "knowledge-feedback equilibrium",
        &mut c10_kf_equilibrium,
    );
    report(11, "thread-count determinism", &mut c11_determinism);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
