//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use twc_core::adversary::{apply_attack, estimate_truncation_q, AttackSpec, ChannelParams};
use twc_core::bounds::{capacity_symmetric, grid_search_alpha, optimize_alpha, scale_babble_rate, symmetrization_error_lb};
use twc_core::codebook::{build_ball_code, Codebook, IntegerBallCode};
use twc_core::decoder::{clamp_alpha, effective_channel, estimate_alpha, estimate_r_dec, ToleranceProfile};
use twc_core::geometry::{avg_radius_check, count_sum_pairs, count_sum_pairs_scan, strip_angle_check};
use twc_core::lattice::{Lattice, LinearCode};
use twc_core::linalg::{project_perp, RealVec, SeededRng};
use twc_core::sim::{run_experiment, Experiment, ExperimentConfig};

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

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

fn formula_identity() -> Outcome {
    let mut rng = SeededRng::new(1, 0);
    let (mut worst_id, mut worst_grid) = (0f64, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let p = 0.1 + 10.0 * rng.uniform();
        let n = 2.0 * p * (0.01 + 0.98 * rng.uniform());
        let params = ChannelParams::symmetric(1, p, n).unwrap();
        let (alpha, _) = optimize_alpha(&params);
        let rate = scale_babble_rate(alpha, &params).unwrap();
        let cap = capacity_symmetric(p, n).unwrap();
        worst_id = worst_id.max((rate - cap).abs() / cap.abs().max(1.0));
        let (_, grid) = grid_search_alpha(&params, 1e-4);
        worst_grid = worst_grid.max(grid - cap);
    }
    outcome(
        worst_id <= 1e-12 && worst_grid <= 1e-3,
        format!("max |R(alpha*) - C| = {worst_id:.2e}, max grid excess = {worst_grid:.2e}"),
    )
}

fn random_lattice(n: usize, rng: &mut SeededRng) -> Lattice {
    if rng.uniform() < 0.5 {
        Lattice::scaled_integer(n, 0.7 + 0.5 * rng.uniform()).unwrap()
    } else {
        let q = [3, 5][rng.index(2)];
        let code = LinearCode::random(q, n, rng.index(n + 1), rng).unwrap();
        Lattice::construction_a(&code, 1.0 + rng.uniform()).unwrap()
    }
}

fn sumset_oracle() -> Outcome {
    let mut rng = SeededRng::new(2, 0);
    let mut mismatches = 0;
    let mut nonzero = 0;
    for i in 0..200 {
        let n = 1 + i % 6;
        let l = random_lattice(n, &mut rng);
        let code = build_ball_code(&l, 0.5 + rng.uniform()).unwrap();
        let words = code.codewords();
        let z = if rng.uniform() < 0.8 {
            words[rng.index(words.len())].add(&words[rng.index(words.len())])
        } else {
            RealVec::new((0..n).map(|_| 3.0 * rng.standard_normal()).collect()).unwrap()
        };
        let fast = count_sum_pairs(&code, &z).unwrap();
        let scan = count_sum_pairs_scan(&code, &z).unwrap();
        mismatches += (fast != scan) as u32;
        nonzero += (scan > 0) as u32;
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 200 instances ({nonzero} with pairs)"))
}

fn counting_sandwich() -> Outcome {
    let mut rng = SeededRng::new(3, 0);
    let mut violations = 0;
    for i in 0..100 {
        let n = 1 + i % 4;
        let l = random_lattice(n, &mut rng);
        let center = RealVec::new((0..n).map(|_| 2.0 * rng.standard_normal()).collect()).unwrap();
        let radius = 0.5 + 3.0 * rng.uniform();
        let b = l.count_bounds(&center, radius).unwrap();
        let exact = l.enumerate_in_ball(&center, radius).unwrap().len() as f64;
        violations += (exact < b.lower || exact > b.upper) as u32;
    }
    outcome(violations == 0, format!("{violations} violations over 100 balls"))
}

fn symmetrization_bound() -> Outcome {
    let config = ExperimentConfig::from_json(
        r#"{
            "params": {"n": 128, "pa": 1.0, "pb": 1.0, "na": 1.5, "nb": 1.5},
            "code_a": {
                "lattice": {"kind": "nested_fine", "coarse": {"kind": "scaled_integer", "n": 128, "scale": 2.0},
                            "q": 7, "k": 1, "generator_seed": 11},
                "shaping": {"kind": "voronoi"}
            },
            "attack": {"kind": "z_aware_symmetrization", "victim": "A"},
            "decoder": {"kind": "min_distance"},
            "trials": 2000,
            "root_seed": 4
        }"#,
    )
    .unwrap();
    let exp = Experiment::new(config).unwrap();
    let size = exp.code_a().len().unwrap();
    let s = run_experiment(&exp, None).unwrap().summary;
    let (_, lb) = symmetrization_error_lb(1.0).unwrap();
    let sigma = (lb * (1.0 - lb) / s.trials as f64).sqrt();
    outcome(
        size >= 4 && s.pe_hat >= lb - 3.0 * sigma,
        format!("|C_A| = {size}, pe_hat = {:.4} vs bound {lb} - 3 sigma = {:.4}", s.pe_hat, lb - 3.0 * sigma),
    )
}

fn truncation_q() -> Outcome {
    let spec = AttackSpec::ScaleAndBabble {
        alpha: None,
        eps: 0.05,
        center_correction: false,
    };
    let q = |n: usize| {
        let params = ChannelParams::symmetric(n, 1.0, 0.1).unwrap();
        let code = Codebook::IntegerBall(IntegerBallCode::new(n, 0.45, 1.0).unwrap());
        estimate_truncation_q(&spec, &code, &code, &params, 2000, &SeededRng::new(5, n as u64))
            .unwrap()
            .q_hat
    };
    let (q256, q1024) = (q(256), q(1024));
    outcome(
        q1024 <= 0.05 && q1024 < q256,
        format!("q_hat(256) = {q256:.4}, q_hat(1024) = {q1024:.4}"),
    )
}

fn estimator_accuracy() -> Outcome {
    let n = 512;
    let params = ChannelParams::symmetric(n, 1.0, 0.01).unwrap();
    let code = Codebook::IntegerBall(IntegerBallCode::new(n, 0.45, 1.0).unwrap());
    let spec = AttackSpec::ScaleAndBabble {
        alpha: None,
        eps: 0.05,
        center_correction: false,
    };
    let trials = 1000;
    let (mut alpha_ok, mut rdec_ok) = (0, 0);
    for t in 0..trials {
        let mut rng = SeededRng::derive(6, &[t]);
        let (_, xa) = code.draw(&mut rng);
        let (_, xb) = code.draw(&mut rng);
        let z = xa.add(&xb);
        let s = apply_attack(&spec, &z, &code, &code, &params, None, &mut rng).unwrap().s;
        let y = z.add(&s);
        let (alpha, s_perp) = project_perp(&s, &z).unwrap();
        let alpha_hat = estimate_alpha(&y, &xb, params.pa).unwrap();
        let r_dec = estimate_r_dec(&y, &xb, clamp_alpha(alpha_hat).0).unwrap();
        alpha_ok += ((alpha_hat - alpha).abs() <= 0.02) as u32;
        rdec_ok += ((r_dec - s_perp.norm_sq()).abs() / n as f64 <= 0.05 * params.nb) as u32;
    }
    let (fa, fr) = (alpha_ok as f64 / trials as f64, rdec_ok as f64 / trials as f64);
    outcome(
        fa >= 0.95 && fr >= 0.90,
        format!("alpha within 0.02: {fa:.3} (need 0.95); r_dec within 0.05N: {fr:.3} (need 0.90)"),
    )
}

fn average_radius() -> Outcome {
    let c = avg_radius_check(256, 1.0, 1.0 / 50.0, 0.05, 0.01, 10_000, &mut SeededRng::new(7, 0)).unwrap();
    outcome(
        c.rel_err <= 0.1,
        format!("mean {:.5} vs {:.5} (relative error {:.4})", c.mean, c.target, c.rel_err),
    )
}

fn angle_bracket() -> Outcome {
    let c = strip_angle_check(3, 1.0, 0.2, 0.05, 1.0, 10_000, 1e-9, &mut SeededRng::new(8, 0)).unwrap();
    outcome(
        c.violations == 0,
        format!(
            "{} violations; sampled cos in [{:.4}, {:.4}], bracket [{:.4}, {:.4}]",
            c.violations, c.min_cos, c.max_cos, c.bracket.0, c.bracket.1
        ),
    )
}

fn effective_snr() -> Outcome {
    let mut rng = SeededRng::new(9, 0);
    let mut bad = 0;
    for _ in 0..100 {
        let p = 0.1 + 10.0 * rng.uniform();
        let n = 2.0 * p * (0.01 + 0.98 * rng.uniform());
        let params = ChannelParams::symmetric(1, p, n).unwrap();
        let ch = effective_channel(&params, n / (2.0 * p), &ToleranceProfile::default()).unwrap();
        let ok = rel_close(ch.naive_snr(), p / n - 0.5, 1e-12) && rel_close(ch.average_snr(), p / n + 0.5, 1e-12);
        bad += (!ok) as u32;
    }
    outcome(bad == 0, format!("{bad} of 100 pairs off"))
}

fn concentration() -> Outcome {
    let (n, p) = (256, 1.0);
    let code = Codebook::IntegerBall(IntegerBallCode::new(n, 0.45, p).unwrap());
    let mut rng = SeededRng::new(10, 0);
    let draws = 10_000;
    let nf = n as f64;
    let (mut short, mut cos, mut zdev) = (0, 0, 0);
    for _ in 0..draws {
        let (_, xa) = code.draw(&mut rng);
        let (_, xb) = code.draw(&mut rng);
        short += (xa.norm_sq() <= 0.9 * nf * p) as u32;
        cos += (xa.dot(&xb).abs() >= 0.1 * xa.norm() * xb.norm()) as u32;
        let z2 = xa.add(&xb).norm_sq();
        zdev += ((z2 / (2.0 * nf * p) - 1.0).abs() > 0.1) as u32;
    }
    let f = |k: u32| k as f64 / draws as f64;
    outcome(
        f(short) <= 0.01 && f(cos) <= 0.01 && f(zdev) <= 0.05,
        format!(
            "short norm {:.4} (<= 0.01), |cos| >= 0.1 {:.4} (<= 0.01), z off {:.4} (<= 0.05)",
            f(short),
            f(cos),
            f(zdev)
        ),
    )
}

fn determinism() -> Outcome {
    let configs = [
        r#"{
            "params": {"n": 8, "pa": 1.0, "pb": 1.0, "na": 0.4, "nb": 0.4},
            "code_a": {"lattice": {"kind": "construction_a", "n": 8, "q": 5, "k": 2, "generator_seed": 3, "scale": 2.0},
                       "shaping": {"kind": "ball", "power": 1.0}},
            "attack": {"kind": "gaussian_babble"},
            "decoder": {"kind": "min_distance"},
            "trials": 400,
            "root_seed": 21
        }"#,
        r#"{
            "params": {"n": 32, "pa": 1.0, "pb": 1.0, "na": 0.1, "nb": 0.1},
            "code_a": {"lattice": {"kind": "scaled_integer", "n": 32, "scale": 0.9}, "shaping": {"kind": "ball", "power": 1.0}},
            "attack": {"kind": "scale_and_babble", "eps": 0.05},
            "decoder": {"kind": "estimation"},
            "trials": 300,
            "root_seed": 22
        }"#,
    ];
    let mut diffs = Vec::new();
    for (i, text) in configs.iter().enumerate() {
        let run = |threads| {
            let exp = Experiment::new(ExperimentConfig::from_json(text).unwrap()).unwrap();
            let out = run_experiment(&exp, Some(threads)).unwrap();
            (out.summary_json(), out.trials_csv())
        };
        let first = run(4);
        if run(4) != first {
            diffs.push(format!("config {i}: repeated run differs"));
        }
        for k in [1, 8] {
            if run(k) != first {
                diffs.push(format!("config {i}: {k} threads differ"));
            }
        }
    }
    outcome(diffs.is_empty(), if diffs.is_empty() { "byte-identical across runs and 1/4/8 threads".into() } else { diffs.join("; ") })
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 11] = [
        ("formula identity", formula_identity, Duration::from_secs(5)),
        ("sumset oracle", sumset_oracle, Duration::from_secs(30)),
        ("counting sandwich", counting_sandwich, Duration::from_secs(10)),
        ("symmetrization lower bound", symmetrization_bound, Duration::from_secs(120)),
        ("truncation probability", truncation_q, Duration::from_secs(120)),
        ("estimator accuracy", estimator_accuracy, Duration::from_secs(120)),
        ("average effective radius", average_radius, Duration::from_secs(60)),
        ("extremal angle bracket", angle_bracket, Duration::from_secs(30)),
        ("effective SNR algebra", effective_snr, Duration::from_secs(1)),
        ("concentration suite", concentration, Duration::from_secs(60)),
        ("end-to-end determinism", determinism, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = o.pass && in_time;
        failed += (!pass) as u32;
        let timing = if in_time {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!("{:.2}s, over the {}s limit", elapsed.as_secs_f64(), limit.as_secs())
        };
        println!(
            "criterion {:>2} {:<28} {}  {} [{timing}]",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() as u32 - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
