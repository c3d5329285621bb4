//! End-to-end acceptance checks. Each test exercises one numbered
//! criterion at its stated tolerance and prints a single summary line;
//! run with `--nocapture` to see the lines for passing criteria too.

use std::fs;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use orthant_reflect::harness::{
    build_model, paper_example_deviation, paper_example_input, run_scenario, ScenarioConfig,
};
use orthant_reflect::matrix::{symmetric_half_2d, ReflectionMatrix};
use orthant_reflect::paths::GridPath;
use orthant_reflect::projection::{self, verify_lemma1};
use orthant_reflect::sde::{
    coarsen_path, fast_euler_diffusion, generate_wiener, moment_surrogate, strong_error,
    DriverStream, WienerConfig,
};
use orthant_reflect::skorokhod::{
    check_theorem3, check_theorem4, fast_scheme, fixed_point_gap, fixed_point_oracle,
    running_max_map_1d, ORACLE_TOL,
};
use orthant_reflect::vector;

fn report(criterion: u32, ok: bool, detail: &str) {
    let line = format!(
        "[{}] criterion {criterion}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    println!("{line}");
    assert!(ok, "{line}");
}

fn random_reflection(rng: &mut ChaCha12Rng, d: usize, cap: f64) -> ReflectionMatrix {
    let mut entries = vec![0.0; d * d];
    if d > 1 {
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    entries[i * d + j] = rng.gen_range(0.0..cap / (d as f64 - 1.0));
                }
            }
        }
    }
    ReflectionMatrix::new(d, entries).expect("generated entries are valid")
}

fn random_walk(rng: &mut ChaCha12Rng, n: u32, horizon: f64, d: usize, step: f64) -> GridPath {
    let steps = (n as f64 * horizon) as usize;
    let mut values = Vec::with_capacity((steps + 1) * d);
    for _ in 0..d {
        values.push(rng.gen_range(0.0..1.0));
    }
    for i in 1..=steps {
        for j in 0..d {
            let prev = values[(i - 1) * d + j];
            values.push(prev + rng.gen_range(-step..step));
        }
    }
    GridPath::from_values(n, horizon, d, values).expect("generated walk is valid")
}

#[test]
fn criterion_01_paper_example_exactness() {
    let start = Instant::now();
    let q = symmetric_half_2d();
    let mut worst_dev = 0.0_f64;
    let mut worst_sup_dev = 0.0_f64;
    for n in [4u32, 16, 64] {
        let y = paper_example_input(n).unwrap();
        let sol = fast_scheme(&q, &y).unwrap();
        let (dev, sup_dev) = paper_example_deviation(&sol, n);
        worst_dev = worst_dev.max(dev);
        worst_sup_dev = worst_sup_dev.max(sup_dev);
    }
    let elapsed = start.elapsed();
    let ok = worst_dev <= 1e-12 && worst_sup_dev <= 1e-14 && elapsed.as_secs_f64() < 1.0;
    report(
        1,
        ok,
        &format!(
            "closed-form deviation {worst_dev:.2e} (tol 1e-12), sup-error deviation {worst_sup_dev:.2e} (tol 1e-14), {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_lemma1_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(1001);
    let mut worst_relative = 0.0_f64;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=6);
        let cap = rng.gen_range(0.05..0.9);
        let q = random_reflection(&mut rng, d, cap);
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let gap = verify_lemma1(&q, &z, 30);
        worst_relative = worst_relative.max(gap / (1.0 + vector::sup_norm(&z)));
    }
    let elapsed = start.elapsed();
    let ok = worst_relative <= 1e-12 && elapsed.as_secs_f64() < 5.0;
    report(
        2,
        ok,
        &format!(
            "1000 random (Q, z), worst relative route discrepancy {worst_relative:.2e} (tol 1e-12), {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_03_projection_correctness() {
    let mut rng = ChaCha12Rng::seed_from_u64(1001);
    let mut worst_residual = 0.0_f64;
    let mut worst_orthant = 0.0_f64;
    let mut complementarity_ok = true;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=6);
        let cap = rng.gen_range(0.05..0.9);
        let q = random_reflection(&mut rng, d, cap);
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let result = projection::project(&q, &z).unwrap();
        worst_residual = worst_residual.max(result.residual);
        for j in 0..d {
            worst_orthant = worst_orthant.max(-result.pi[j]);
            if result.r_bar[j] > 1e-8 && result.pi[j].abs() > 1e-8 {
                complementarity_ok = false;
            }
        }
    }
    let q = symmetric_half_2d();
    let paper = projection::project(&q, &[-1.0, -1.0]).unwrap();
    let point_dev = vector::sup_norm_diff(&paper.pi, &[0.0, 0.0])
        .max(vector::sup_norm_diff(&paper.r_bar, &[2.0, 2.0]));
    let ok = worst_residual <= 1e-10
        && worst_orthant <= 1e-10
        && complementarity_ok
        && point_dev <= 1e-12;
    report(
        3,
        ok,
        &format!(
            "residual {worst_residual:.2e} (tol 1e-10), orthant excursion {worst_orthant:.2e}, complementarity {}, symmetric point deviation {point_dev:.2e} (tol 1e-12)",
            if complementarity_ok { "clean" } else { "violated" }
        ),
    );
}

#[test]
fn criterion_04_theorem3_bound_on_continuous_sine() {
    let q = symmetric_half_2d();
    let horizon = 2.0;
    let sample = |t: f64| {
        vec![
            0.5 + 0.8 * (std::f64::consts::PI * t).sin(),
            0.5 + 0.8 * (std::f64::consts::PI * t).cos(),
        ]
    };
    let mut all_bounded = true;
    let mut decreasing = true;
    let mut previous = f64::INFINITY;
    let mut details = Vec::new();
    let mut final_lhs = f64::INFINITY;
    for n in [10u32, 100, 1000] {
        let y = GridPath::sample(n, horizon, 2, sample).unwrap();
        let fine = GridPath::sample(10 * n, horizon, 2, sample).unwrap();
        let reference = fixed_point_oracle(&q, &fine, ORACLE_TOL).unwrap();
        let rep = check_theorem3(&q, &y, &reference, horizon).unwrap();
        all_bounded &= rep.pass;
        decreasing &= rep.lhs < previous;
        previous = rep.lhs;
        final_lhs = rep.lhs;
        details.push(format!("n={n} lhs {:.2e} <= rhs {:.2e}", rep.lhs, rep.rhs));
    }
    let ok = all_bounded && decreasing && final_lhs < 1e-2;
    report(
        4,
        ok,
        &format!(
            "{}; decreasing {decreasing}; final {final_lhs:.2e} < 1e-2",
            details.join(", ")
        ),
    );
}

#[test]
fn criterion_05_theorem4_pushing_stability() {
    let mut rng = ChaCha12Rng::seed_from_u64(2002);
    let mut violations = 0_usize;
    let mut worst_ratio = 0.0_f64;
    let pairs = 500;
    for _ in 0..pairs {
        let d = rng.gen_range(1..=4);
        let q = random_reflection(&mut rng, d, 0.8);
        let n = rng.gen_range(8..=48);
        let y1 = random_walk(&mut rng, n, 1.0, d, 0.5);
        let mut perturbed = Vec::with_capacity(y1.points() * d);
        for i in 0..y1.points() {
            for j in 0..d {
                let v = y1.at(i)[j] + rng.gen_range(-0.3..0.3);
                perturbed.push(if i == 0 { v.max(0.0) } else { v });
            }
        }
        let y2 = GridPath::from_values(n, 1.0, d, perturbed).unwrap();
        let rep = check_theorem4(&q, &y1, &y2, 1.0).unwrap();
        if !rep.k_bound.pass {
            violations += 1;
        }
        if rep.k_bound.rhs > 0.0 {
            worst_ratio = worst_ratio.max(rep.k_bound.lhs / rep.k_bound.rhs);
        }
    }
    let ok = violations == 0;
    report(
        5,
        ok,
        &format!(
            "{pairs} random pairs, {violations} violations of sup|k1-k2| <= sup|y1-y2|/(1-q), worst lhs/rhs {worst_ratio:.3}"
        ),
    );
}

#[test]
fn criterion_06_fixed_point_form_battery() {
    let mut worst = 0.0_f64;
    let mut runs = 0_usize;
    let q2 = symmetric_half_2d();
    for n in [4u32, 16, 64] {
        let y = paper_example_input(n).unwrap();
        let sol = fast_scheme(&q2, &y).unwrap();
        worst = worst.max(fixed_point_gap(&q2, &y, &sol.k).unwrap());
        runs += 1;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(3003);
    for _ in 0..60 {
        let d = rng.gen_range(1..=4);
        let cap = rng.gen_range(0.0..0.85);
        let q = random_reflection(&mut rng, d, cap);
        let n = rng.gen_range(8..=40);
        let y = random_walk(&mut rng, n, 1.0, d, 0.6);
        let sol = fast_scheme(&q, &y).unwrap();
        worst = worst.max(fixed_point_gap(&q, &y, &sol.k).unwrap());
        runs += 1;
    }
    let (qd, model) = build_model("diffusion-2d").unwrap();
    for seed in 0..10u64 {
        let cfg = WienerConfig {
            seed,
            n_max: 256,
            d: 2,
            horizon: 1.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        let run = fast_euler_diffusion(&qd, &model, &w, 64).unwrap();
        worst = worst.max(fixed_point_gap(&qd, &run.y, &run.solution.k).unwrap());
        runs += 1;
    }
    let ok = worst <= 1e-12;
    report(
        6,
        ok,
        &format!("{runs} scheme runs, worst delayed fixed-point gap {worst:.2e} (tol 1e-12)"),
    );
}

#[test]
fn criterion_07_one_dimensional_oracle_equivalence() {
    let (q, model) = build_model("bm-1d").unwrap();
    let mut worst = 0.0_f64;
    for seed in 0..100u64 {
        let cfg = WienerConfig {
            seed,
            n_max: 512,
            d: 1,
            horizon: 1.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        let run = fast_euler_diffusion(&q, &model, &w, 64).unwrap();
        let coarse = coarsen_path(&w, 64).unwrap();
        let oracle = running_max_map_1d(&coarse).unwrap();
        for i in 0..run.solution.x.points() {
            worst = worst
                .max(vector::sup_norm_diff(run.solution.x.at(i), oracle.x.at(i)))
                .max(vector::sup_norm_diff(run.solution.k.at(i), oracle.k.at(i)));
        }
    }
    let ok = worst <= 1e-12;
    report(
        7,
        ok,
        &format!("100 seeded paths, worst gap to the running-max map {worst:.2e} (tol 1e-12)"),
    );
}

#[test]
fn criterion_08_rate_reproduction() {
    let start = Instant::now();
    let densities = [16u32, 32, 64, 128, 256, 512, 1024];

    let (q1, bm) = build_model("bm-1d").unwrap();
    let cfg1 = WienerConfig {
        seed: 42,
        n_max: 8192,
        d: 1,
        horizon: 1.0,
    };
    let bm_report = strong_error(&q1, &bm, &cfg1, &densities, 1, 200).unwrap();
    let bm_fit = bm_report.fit.expect("bm-1d fit");

    let (q2, diffusion) = build_model("diffusion-2d").unwrap();
    let cfg2 = WienerConfig {
        seed: 42,
        n_max: 8192,
        d: 2,
        horizon: 1.0,
    };
    let diff_report = strong_error(&q2, &diffusion, &cfg2, &densities, 1, 200).unwrap();
    let diff_fit = diff_report.fit.expect("diffusion-2d fit");

    let elapsed = start.elapsed();
    let ok = (0.7..=1.3).contains(&bm_fit.slope)
        && bm_fit.r_squared >= 0.95
        && (0.6..=1.4).contains(&diff_fit.slope)
        && elapsed.as_secs_f64() <= 300.0;
    report(
        8,
        ok,
        &format!(
            "bm-1d slope {:.3} (in [0.7, 1.3]) r^2 {:.4} (>= 0.95); diffusion-2d slope {:.3} (in [0.6, 1.4]) r^2 {:.4}; {:.1}s",
            bm_fit.slope,
            bm_fit.r_squared,
            diff_fit.slope,
            diff_fit.r_squared,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_09_moment_boundedness_surrogate() {
    let (q, model) = build_model("diffusion-2d").unwrap();
    let cfg = WienerConfig {
        seed: 42,
        n_max: 8192,
        d: 2,
        horizon: 1.0,
    };
    let rows = moment_surrogate(&q, &model, &cfg, &[64, 256, 1024], 500).unwrap();
    let lo = rows.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
    let hi = rows
        .iter()
        .map(|r| r.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    let ok = spread.is_finite() && spread < 0.10;
    let detail: Vec<String> = rows
        .iter()
        .map(|r| format!("n={} mean {:.4}", r.n, r.mean))
        .collect();
    report(
        9,
        ok,
        &format!(
            "{}; spread {spread:.3} < 0.10 at M = 500",
            detail.join(", ")
        ),
    );
}

#[test]
fn criterion_10_scenario_determinism() {
    let plans: [(&str, Option<usize>); 5] = [
        ("paper-example", None),
        ("continuous-sine", None),
        ("step-random", Some(120)),
        ("bm-1d-rate", Some(25)),
        ("diffusion-2d-rate", Some(25)),
    ];
    let mut compared = 0_usize;
    let mut identical = true;
    for (name, paths) in plans {
        let cfg = ScenarioConfig { seed: 42, paths };
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let a = run_scenario(name, Some(dir1.path()), &cfg).unwrap();
        let b = run_scenario(name, Some(dir2.path()), &cfg).unwrap();
        assert_eq!(a.artifacts.len(), b.artifacts.len(), "{name}");
        for (pa, pb) in a.artifacts.iter().zip(&b.artifacts) {
            let bytes_a = fs::read(pa).unwrap();
            let bytes_b = fs::read(pb).unwrap();
            if bytes_a != bytes_b {
                identical = false;
            }
            compared += 1;
        }
    }
    report(
        10,
        identical,
        &format!("{compared} artifact CSVs byte-compared across repeated seeded runs"),
    );
}

#[test]
fn jump_driver_equivalence_supports_criterion_06() {
    // The fixed-point identity also holds along semimartingale runs driven
    // by a pure-jump stream; covered here so the battery spans both entry
    // points into the scheme.
    let q = symmetric_half_2d();
    let n = 16u32;
    let steps = 32;
    let mut increments = vec![0.0; steps * 2];
    increments[(n as usize - 1) * 2] = -1.0;
    increments[(n as usize - 1) * 2 + 1] = -1.0;
    let driver = DriverStream::from_increments(n, 2.0, 2, increments).unwrap();
    let run = orthant_reflect::sde::fast_euler_semimartingale(
        &q,
        &[0.0, 0.0],
        |_, out| {
            out.fill(0.0);
            out[0] = 1.0;
            out[3] = 1.0;
        },
        &driver,
    )
    .unwrap();
    let gap = fixed_point_gap(&q, &run.y, &run.solution.k).unwrap();
    assert!(gap <= 1e-12, "jump-driver fixed-point gap {gap}");
}
