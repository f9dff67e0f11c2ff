//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
//! criterion fails. Operators come from the library; expected values come from
//! separate implementations in this file wherever one exists.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use azimuth_core::aeconv::{aeconv_backward, aeconv_forward_naive, aeconv_forward_planned, GatherPlan};
use azimuth_core::anchor::{angle_distance, decode, encode, AzimuthAnchor, BoxState, ResidualState};
use azimuth_core::bench::run_bench;
use azimuth_core::depth::{DepthMapping, FixedDepthSpec, VirtualDepthSpec};
use azimuth_core::geometry::{GridSpec, RadialBasisField};
use azimuth_core::revolve::{run_revolve_with_plan, SyntheticScene};
use azimuth_core::tensor::{standard_conv, FeatureMap, Kernel};
use azimuth_core::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        summary: summary.into(),
    }
}

/// Zero-padded cross-correlation by direct index arithmetic.
fn brute_conv(x: &FeatureMap, k: &Kernel) -> FeatureMap {
    let (c_in, h, w) = (x.channels(), x.height() as isize, x.width() as isize);
    let ext = k.extent();
    let r = (ext / 2) as isize;
    FeatureMap::from_fn(k.out_channels(), x.height(), x.width(), |o, i, j| {
        let mut acc = 0.0;
        for c in 0..c_in {
            for a in 0..ext {
                for b in 0..ext {
                    let (ii, jj) = (i as isize + a as isize - r, j as isize + b as isize - r);
                    if (0..h).contains(&ii) && (0..w).contains(&jj) {
                        acc += k.weight(o, c, a * ext + b) * x.get(c, ii as usize, jj as usize);
                    }
                }
            }
        }
        acc
    })
}

/// Counter-clockwise quarter turn of a square map about its middle cell by
/// index permutation.
fn quarter_turn(x: &FeatureMap) -> FeatureMap {
    let n = x.height();
    assert_eq!(n, x.width());
    FeatureMap::from_fn(x.channels(), n, n, |c, i, j| x.get(c, j, n - 1 - i))
}

fn max_abs_excluding(a: &FeatureMap, b: &FeatureMap, margin: usize, skip: (usize, usize)) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..a.channels() {
        for i in margin..a.height() - margin {
            for j in margin..a.width() - margin {
                if (i, j) != skip {
                    worst = worst.max((a.get(c, i, j) - b.get(c, i, j)).abs());
                }
            }
        }
    }
    worst
}

fn instances(seed: u64) -> Vec<(FeatureMap, Kernel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|_| {
            let x = FeatureMap::random(8, 32, 32, &mut rng);
            let k = Kernel::random(8, 8, 3, &mut rng).unwrap();
            (x, k)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let plan = GatherPlan::build(&RadialBasisField::uniform(32, 32, 0.0), 3).unwrap();
    let mut worst: f64 = 0.0;
    for (x, k) in instances(1) {
        let ae = aeconv_forward_planned(&x, &k, &plan).unwrap();
        worst = worst.max(ae.max_abs_diff(&standard_conv(&x, &k).unwrap()));
        worst = worst.max(ae.max_abs_diff(&brute_conv(&x, &k)));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(5),
        format!("zero-azimuth reduction: max abs diff {worst:.2e} (<= 1e-12), {elapsed:.2?} (< 5 s)"),
    )
}

fn criterion_2() -> Outcome {
    let grid = GridSpec::centered(32, 32, 0.8, Vec2::ZERO).unwrap();
    let field = RadialBasisField::radial(&grid, Vec2::new(0.37, -0.21));
    let plan = GatherPlan::build(&field, 3).unwrap();
    let mut worst: f64 = 0.0;
    for (x, k) in instances(1) {
        let planned = aeconv_forward_planned(&x, &k, &plan).unwrap();
        worst = worst.max(planned.max_abs_diff(&aeconv_forward_naive(&x, &k, &field).unwrap()));
    }
    let rows = run_bench(&[16], 2, 3, 5, 0).unwrap();
    let has_table = ["aeconv_naive", "aeconv_planned"]
        .iter()
        .all(|op| rows.iter().any(|r| r.operator == *op && r.ns_per_cell > 0.0));
    outcome(
        worst <= 1e-12 && has_table,
        format!("planned vs naive: max abs diff {worst:.2e} (<= 1e-12); throughput table emitted: {has_table}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 33;
    let grid = GridSpec::centered(n, n, 0.5, Vec2::new(1.2, -0.4)).unwrap();
    let field = RadialBasisField::radial(&grid, Vec2::new(1.2, -0.4));
    let mid = (n - 1) / 2;
    assert_eq!(field.singular_cell(), Some((mid, mid)));
    let plan = GatherPlan::build(&field, 3).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = FeatureMap::random(2, n, n, &mut rng);
        let k = Kernel::random(2, 2, 3, &mut rng).unwrap();
        let lhs = aeconv_forward_planned(&quarter_turn(&x), &k, &plan).unwrap();
        let rhs = quarter_turn(&aeconv_forward_planned(&x, &k, &plan).unwrap());
        worst = worst.max(max_abs_excluding(&lhs, &rhs, 1, (mid, mid)));
    }
    outcome(
        worst <= 1e-9,
        format!("quarter turn, 33x33, 10 kernels: max abs diff {worst:.2e} (<= 1e-9; boundary ring and center cell excluded)"),
    )
}

fn criterion_4() -> (Outcome, String) {
    let grid = GridSpec::centered(33, 33, 0.5, Vec2::ZERO).unwrap();
    let plan = GatherPlan::build(&RadialBasisField::radial(&grid, Vec2::ZERO), 3).unwrap();
    let scenes: Vec<SyntheticScene> = (0..10)
        .map(|s| SyntheticScene::random(grid, Vec2::ZERO, 6, 40 + s))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let signed: Vec<Kernel> = (0..10).map(|_| Kernel::random(2, 1, 3, &mut rng).unwrap()).collect();
    let averaging: Vec<Kernel> = (0..10)
        .map(|_| Kernel::new(2, 1, 3, (0..18).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap())
        .collect();

    // Worst ratio to 2x the baseline (floored at 1e-12) and strict ordering.
    let sweep = |kernels: &[Kernel]| -> Vec<(f64, f64, bool)> {
        [30.0f64, 60.0, 90.0, 120.0]
            .iter()
            .map(|&deg| {
                let mut worst: f64 = 0.0;
                let mut ordered = true;
                for (scene, k) in scenes.iter().zip(kernels) {
                    let r = run_revolve_with_plan(scene, k, &plan, deg.to_radians()).unwrap();
                    worst = worst.max(r.aeconv_rel_l2 / (2.0 * r.resample_rel_l2).max(1e-12));
                    ordered &= r.aeconv_rel_l2 < r.standard_rel_l2;
                }
                (deg, worst, ordered)
            })
            .collect()
    };
    let fmt = |rows: &[(f64, f64, bool)]| {
        rows.iter()
            .map(|(d, w, o)| format!("{d}deg ratio {w:.2}{}", if *o { "" } else { " ORDER-VIOLATED" }))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let main = sweep(&signed);
    let passed = main.iter().all(|&(_, w, o)| w <= 1.0 && o);
    let info = format!("non-negative kernels: {}", fmt(&sweep(&averaging)));
    (
        outcome(
            passed,
            format!(
                "revolve, signed random kernels, aeconv / (2x resample baseline) <= 1 and aeconv < standard: {}",
                fmt(&main)
            ),
        ),
        info,
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 8;
    let grid = GridSpec::centered(n, n, 1.0, Vec2::ZERO).unwrap();
    let h = 1e-5;
    let mut worst_fd: f64 = 0.0;
    let mut worst_adj: f64 = 0.0;
    for _ in 0..10 {
        let center = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let plan = GatherPlan::build(&RadialBasisField::radial(&grid, center), 3).unwrap();
        let x = FeatureMap::random(2, n, n, &mut rng);
        let k = Kernel::random(2, 2, 3, &mut rng).unwrap();
        let loss = |x: &FeatureMap, k: &Kernel| {
            let y = aeconv_forward_planned(x, k, &plan).unwrap();
            y.data().iter().map(|v| v * v).sum::<f64>()
        };
        let y = aeconv_forward_planned(&x, &k, &plan).unwrap();
        let (gx, gk) = aeconv_backward(&x, &k, &plan, &y.scaled(2.0)).unwrap();

        let mut fd_x = Vec::new();
        for idx in 0..x.data().len() {
            let mut p = x.clone();
            p.data_mut()[idx] += h;
            let mut m = x.clone();
            m.data_mut()[idx] -= h;
            fd_x.push((loss(&p, &k) - loss(&m, &k)) / (2.0 * h));
        }
        let mut fd_k = Vec::new();
        for idx in 0..k.weights().len() {
            let mut p = k.clone();
            p.weights_mut()[idx] += h;
            let mut m = k.clone();
            m.weights_mut()[idx] -= h;
            fd_k.push((loss(&x, &p) - loss(&x, &m)) / (2.0 * h));
        }
        let rel = |a: &[f64], b: &[f64]| {
            let num = a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            num / b.iter().map(|v| v.abs()).fold(0.0, f64::max)
        };
        worst_fd = worst_fd.max(rel(gx.data(), &fd_x)).max(rel(gk.weights(), &fd_k));

        let u = FeatureMap::random(2, n, n, &mut rng);
        let (adj_x, _) = aeconv_backward(&x, &k, &plan, &u).unwrap();
        let lhs = y.dot(&u);
        let rhs = x.dot(&adj_x);
        worst_adj = worst_adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    outcome(
        worst_fd <= 1e-5 && worst_adj <= 1e-10,
        format!("gradients: finite-difference rel error {worst_fd:.2e} (<= 1e-5), adjoint {worst_adj:.2e} (<= 1e-10)"),
    )
}

fn random_box(rng: &mut impl Rng) -> BoxState {
    BoxState {
        center: Vec2::new(rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0)),
        z: rng.gen_range(-2.0..3.0),
        size: [
            rng.gen_range(0.3..12.0),
            rng.gen_range(0.3..4.0),
            rng.gen_range(0.5..4.0),
        ],
        orientation: rng.gen_range(-PI..PI),
        velocity: Vec2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)),
    }
}

fn box_gap(a: &BoxState, b: &BoxState) -> f64 {
    [
        a.center.x - b.center.x,
        a.center.y - b.center.y,
        a.z - b.z,
        a.size[0] - b.size[0],
        a.size[1] - b.size[1],
        a.size[2] - b.size[2],
        a.velocity.x - b.velocity.x,
        a.velocity.y - b.velocity.y,
        angle_distance(a.orientation, b.orientation),
    ]
    .iter()
    .fold(0.0, |m, v| m.max(v.abs()))
}

fn residual_gap(a: &ResidualState, b: &ResidualState) -> f64 {
    [
        a.d_r - b.d_r,
        a.d_o - b.d_o,
        a.d_z - b.d_z,
        a.d_size[0] - b.d_size[0],
        a.d_size[1] - b.d_size[1],
        a.d_size[2] - b.d_size[2],
        a.v_r - b.v_r,
        a.v_o - b.v_o,
        angle_distance(a.d_theta, b.d_theta),
    ]
    .iter()
    .fold(0.0, |m, v| m.max(v.abs()))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let center = Vec2::new(0.6, -0.1);
    let mut round_trip: f64 = 0.0;
    for _ in 0..1000 {
        let b = random_box(&mut rng);
        let loc = b.center + Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let a = AzimuthAnchor::implicit(loc, rng.gen_range(-1.0..1.0), center).with_size([
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
        ]);
        round_trip = round_trip.max(box_gap(&decode(&encode(&b, &a), &a), &b));
    }
    let mut rotation: f64 = 0.0;
    for _ in 0..100 {
        let delta = rng.gen_range(-PI..PI);
        let b = random_box(&mut rng);
        let loc = b.center + Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let a = AzimuthAnchor::implicit(loc, 0.0, center);
        let turned_loc = center + (loc - center).rotate(delta);
        let a_turned = AzimuthAnchor::implicit(turned_loc, 0.0, center);
        let r = encode(&b, &a);
        let r_turned = encode(&b.rotated(delta, center), &a_turned);
        rotation = rotation.max(residual_gap(&r, &r_turned));
    }
    outcome(
        round_trip <= 1e-12 && rotation <= 1e-12,
        format!("codec: round trip {round_trip:.2e}, rotation residual gap {rotation:.2e} (both <= 1e-12)"),
    )
}

fn criterion_7() -> Outcome {
    let v = VirtualDepthSpec::new(180, 54.0, 800.0).unwrap();
    let f = FixedDepthSpec::new(2.0, 54.0, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();
    let mut ok = true;

    let n = f.bins();
    ok &= n == 104;
    notes.push(format!("N={n}"));

    let s_v: Vec<f64> = (0..180).map(|_| rng.gen_range(0.0..1.0)).collect();
    let at_f_v = DepthMapping::new(v, f, 800.0, 800.0).unwrap().apply(&s_v).unwrap();
    let first = (at_f_v[0] - (s_v[6] / 3.0 + 2.0 * s_v[7] / 3.0)).abs();
    ok &= first <= 1e-12;
    notes.push(format!("first bin {first:.1e}"));

    // 400^2 + 1800^2 == 1200^2 + 1400^2 exactly.
    let rms_a = DepthMapping::new(v, f, 400.0, 1800.0).unwrap();
    let rms_b = DepthMapping::new(v, f, 1200.0, 1400.0).unwrap();
    let mut rms: f64 = 0.0;
    let mut props: f64 = 0.0;
    for _ in 0..100 {
        let s: Vec<f64> = (0..180).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a = rms_a.apply(&s).unwrap();
        let b = rms_b.apply(&s).unwrap();
        rms = rms.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));

        let fx = rng.gen_range(800.0..2000.0);
        let fy = rng.gen_range(800.0..2000.0);
        let m = DepthMapping::new(v, f, fx, fy).unwrap();
        let out = m.apply(&s).unwrap();
        let step = ((fx * fx + fy * fy) / 2.0).sqrt() / 800.0 * 0.3;
        for (i, &val) in out.iter().enumerate() {
            let u = (2.0 + 0.5 * i as f64) / step;
            let lo = u.floor() as usize;
            let t = u - lo as f64;
            let hi = (lo + 1).min(179);
            let expect = (1.0 - t) * s[lo] + t * s[hi];
            let (mn, mx) = (s[lo].min(s[hi]), s[lo].max(s[hi]));
            props = props.max((val - expect).abs());
            if val < mn - 1e-12 || val > mx + 1e-12 {
                props = f64::INFINITY;
            }
        }
        let c = rng.gen_range(0.0..1.0);
        let constant = m.apply(&vec![c; 180]).unwrap();
        props = props.max(constant.iter().map(|x| (x - c).abs()).fold(0.0, f64::max));
    }
    ok &= rms <= 1e-12 && props <= 1e-12;
    notes.push(format!("rms focal {rms:.1e}"));
    notes.push(format!("constant/convexity {props:.1e}"));

    let rejected = DepthMapping::new(v, f, 799.0, 799.0).is_err();
    ok &= rejected;
    notes.push(format!("short focal rejected: {rejected}"));
    outcome(ok, format!("depth mapping: {} (tolerances 1e-12)", notes.join(", ")))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_azimuth"))
        .arg("check")
        .current_dir(dir.path())
        .output()
        .expect("run azimuth check");
    let elapsed = start.elapsed();
    let failed: Vec<String> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| l.starts_with("FAIL"))
        .filter_map(|l| l.split_whitespace().nth(1).map(str::to_string))
        .collect();
    let code = out.status.code();
    outcome(
        code == Some(0) && elapsed < Duration::from_secs(120),
        format!(
            "`azimuth check`: exit {code:?} (want 0), {elapsed:.2?} (< 120 s){}",
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", failed.join(", "))
            }
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: usize, o: Outcome| {
        all &= o.passed;
        println!(
            "{} criterion {id}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.summary
        );
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    let (c4, info) = criterion_4();
    report(4, c4);
    println!("     criterion 4 (informational) {info}");
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
