//! The property suite behind `azimuth check`.
//!
//! Each check draws its instances from a seeded RNG, measures one metric and
//! compares it with a threshold taken from [`Tolerances`]. Checks never panic
//! on a violated property; they report it.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aeconv::{aeconv_backward, aeconv_forward_naive, aeconv_forward_planned, GatherPlan};
use crate::anchor::{angle_distance, decode, encode, wrap_angle, AzimuthAnchor, BoxState};
use crate::depth::{map_scores, real_bin_size, real_focal, DepthMapping};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, RadialBasisField};
use crate::io::config::{RunConfig, Tolerances};
use crate::revolve::{run_revolve_with_plan, SyntheticScene};
use crate::tensor::{rotate_resample, standard_conv, FeatureMap, Kernel};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
    pub elapsed: Duration,
}

struct Probe {
    name: &'static str,
    start: Instant,
}

impl Probe {
    fn start(name: &'static str) -> Self {
        Probe {
            name,
            start: Instant::now(),
        }
    }

    /// Passes when `metric <= threshold`.
    fn at_most(self, metric: f64, threshold: f64, detail: impl Into<String>) -> CheckResult {
        self.finish(metric <= threshold, metric, threshold, detail)
    }

    fn finish(self, passed: bool, metric: f64, threshold: f64, detail: impl Into<String>) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            passed: passed && metric.is_finite(),
            metric,
            threshold,
            detail: detail.into(),
            elapsed: self.start.elapsed(),
        }
    }
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// A radial field whose center sits off the cell lattice, so every tap is a
/// genuine bilinear blend.
fn off_lattice_field(n: usize, rng: &mut impl Rng) -> (GridSpec, RadialBasisField) {
    let grid = GridSpec::centered(n, n, 0.8, Vec2::ZERO).expect("valid grid");
    let center = Vec2::new(rng.gen_range(-0.35..0.35), rng.gen_range(-0.35..0.35));
    let field = RadialBasisField::radial(&grid, center);
    (grid, field)
}

/// Criterion 1: with every azimuth zero the convolution is the ordinary one.
pub fn check_reduction(tol: &Tolerances, seed: u64) -> Result<CheckResult> {
    let probe = Probe::start("reduction_zero_azimuth");
    let mut rng = rng_for(seed, 1);
    let field = RadialBasisField::uniform(32, 32, 0.0);
    let plan = GatherPlan::build(&field, 3)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = FeatureMap::random(8, 32, 32, &mut rng);
        let k = Kernel::random(8, 8, 3, &mut rng)?;
        let reference = standard_conv(&x, &k)?;
        worst = worst.max(aeconv_forward_naive(&x, &k, &field)?.max_abs_diff(&reference));
        worst = worst.max(aeconv_forward_planned(&x, &k, &plan)?.max_abs_diff(&reference));
    }
    Ok(probe.at_most(worst, tol.exact, "20 instances, 32x32, 8->8, k=3; max abs diff"))
}

/// Criterion 2: gather-plan execution reproduces the direct evaluation.
pub fn check_plan_equivalence(tol: &Tolerances, seed: u64) -> Result<CheckResult> {
    let probe = Probe::start("plan_matches_naive");
    let mut rng = rng_for(seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (_, field) = off_lattice_field(32, &mut rng);
        let plan = GatherPlan::build(&field, 3)?;
        let x = FeatureMap::random(8, 32, 32, &mut rng);
        let k = Kernel::random(8, 8, 3, &mut rng)?;
        let naive = aeconv_forward_naive(&x, &k, &field)?;
        worst = worst.max(aeconv_forward_planned(&x, &k, &plan)?.max_abs_diff(&naive));
    }
    Ok(probe.at_most(
        worst,
        tol.exact,
        "20 instances, 32x32, 8->8, k=3, radial field; max abs diff",
    ))
}

/// Criterion 3: a quarter turn about the middle cell of a 33x33 grid commutes
/// with the convolution.
pub fn check_quarter_turn(tol: &Tolerances, seed: u64) -> Result<CheckResult> {
    let probe = Probe::start("quarter_turn_equivariance");
    let mut rng = rng_for(seed, 3);
    let n = 33;
    let grid = GridSpec::centered(n, n, 0.5, Vec2::new(0.9, 0.0))?;
    let field = RadialBasisField::radial(&grid, Vec2::new(0.9, 0.0));
    let plan = GatherPlan::build(&field, 3)?;
    let pivot = Vec2::new(16.0, 16.0);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = FeatureMap::random(2, n, n, &mut rng);
        let k = Kernel::random(3, 2, 3, &mut rng)?;
        let lhs = aeconv_forward_planned(&rotate_resample(&x, PI / 2.0, pivot), &k, &plan)?;
        let rhs = rotate_resample(&aeconv_forward_planned(&x, &k, &plan)?, PI / 2.0, pivot);
        worst = worst.max(lhs.max_abs_diff_region(&rhs, 1, field.singular_cell()));
    }
    Ok(probe.at_most(
        worst,
        tol.equivariance,
        "10 kernels, 33x33, interior (1-cell ring and center cell excluded); max abs diff",
    ))
}

/// Criterion 4: rotate-the-rig test at 30/60/90/120 degrees.
///
/// Passes when, for every (scene, kernel, angle), the convolution residual is
/// at most `revolve_factor` times the input resampling residual (floored at
/// `tol.exact` for lattice-exact turns) and strictly below the residual of the
/// ordinary convolution.
pub fn check_revolve(tol: &Tolerances, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = rng_for(seed, 4);
    let grid = GridSpec::centered(33, 33, 0.5, Vec2::ZERO)?;
    let field = RadialBasisField::radial(&grid, Vec2::ZERO);
    let plan = GatherPlan::build(&field, 3)?;
    let scenes: Vec<SyntheticScene> = (0..10)
        .map(|s| SyntheticScene::random(grid, Vec2::ZERO, 6, seed.wrapping_add(s)))
        .collect();
    let kernels: Vec<Kernel> = (0..10)
        .map(|_| Kernel::random(2, 1, 3, &mut rng))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (name, deg) in [
        ("revolve_30deg", 30.0f64),
        ("revolve_60deg", 60.0),
        ("revolve_90deg", 90.0),
        ("revolve_120deg", 120.0),
    ] {
        let probe = Probe::start(name);
        let mut worst_ratio: f64 = 0.0;
        let mut worst_ae: f64 = 0.0;
        let mut ordered = true;
        for (scene, kernel) in scenes.iter().zip(&kernels) {
            let r = run_revolve_with_plan(scene, kernel, &plan, deg.to_radians())?;
            let allowed = (tol.revolve_factor * r.resample_rel_l2).max(tol.exact);
            worst_ratio = worst_ratio.max(r.aeconv_rel_l2 / allowed);
            worst_ae = worst_ae.max(r.aeconv_rel_l2);
            ordered &= r.aeconv_rel_l2 < r.standard_rel_l2;
        }
        out.push(probe.finish(
            worst_ratio <= 1.0 && ordered,
            worst_ratio,
            1.0,
            format!(
                "metric = aeconv_rel_l2 / ({}x resample baseline); worst aeconv_rel_l2 = {worst_ae:.3e}; aeconv < standard everywhere: {ordered}",
                tol.revolve_factor
            ),
        ));
    }
    Ok(out)
}

/// Infinity-norm relative error `max|a - b| / max|b|`.
fn rel_inf(analytic: &[f64], numeric: &[f64]) -> f64 {
    let num = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let den = numeric.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn loss(x: &FeatureMap, k: &Kernel, plan: &GatherPlan) -> Result<f64> {
    let y = aeconv_forward_planned(x, k, plan)?;
    Ok(y.data().iter().map(|v| v * v).sum())
}

/// Criterion 5: analytic gradients of `L = sum(y^2)` against central
/// differences, plus the dot-product adjoint identity.
pub fn check_gradients(tol: &Tolerances, seed: u64) -> Result<Vec<CheckResult>> {
    let grad_probe = Probe::start("gradient_finite_difference");
    let mut rng = rng_for(seed, 5);
    let h = tol.fd_step;
    let mut worst_grad: f64 = 0.0;
    let mut worst_adj: f64 = 0.0;
    for _ in 0..10 {
        let (_, field) = off_lattice_field(8, &mut rng);
        let plan = GatherPlan::build(&field, 3)?;
        let x = FeatureMap::random(2, 8, 8, &mut rng);
        let k = Kernel::random(2, 2, 3, &mut rng)?;
        let y = aeconv_forward_planned(&x, &k, &plan)?;
        let (gx, gw) = aeconv_backward(&x, &k, &plan, &y.scaled(2.0))?;

        let mut fd_x = Vec::with_capacity(x.data().len());
        for idx in 0..x.data().len() {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            fd_x.push((loss(&xp, &k, &plan)? - loss(&xm, &k, &plan)?) / (2.0 * h));
        }
        let mut fd_w = Vec::with_capacity(k.weights().len());
        for idx in 0..k.weights().len() {
            let mut kp = k.clone();
            kp.weights_mut()[idx] += h;
            let mut km = k.clone();
            km.weights_mut()[idx] -= h;
            fd_w.push((loss(&x, &kp, &plan)? - loss(&x, &km, &plan)?) / (2.0 * h));
        }
        worst_grad = worst_grad
            .max(rel_inf(gx.data(), &fd_x))
            .max(rel_inf(gw.weights(), &fd_w));

        let u = FeatureMap::random(2, 8, 8, &mut rng);
        let (gu, _) = aeconv_backward(&x, &k, &plan, &u)?;
        worst_adj = worst_adj.max((y.dot(&u) - x.dot(&gu)).abs());
    }
    let grad = grad_probe.at_most(
        worst_grad,
        tol.gradient,
        format!("10 instances 8x8x2, k=3, step {h}; max |analytic - fd| / max |fd|"),
    );
    let adj_probe = Probe::start("adjoint_dot_product");
    let adj = adj_probe.at_most(worst_adj, tol.adjoint, "|<A x, u> - <x, A^T u>| over 10 instances");
    Ok(vec![grad, adj])
}

fn random_box(rng: &mut impl Rng) -> BoxState {
    BoxState {
        center: Vec2::new(rng.gen_range(-54.0..54.0), rng.gen_range(-54.0..54.0)),
        z: rng.gen_range(-3.0..3.0),
        size: [
            rng.gen_range(0.3..12.0),
            rng.gen_range(0.3..4.0),
            rng.gen_range(0.5..4.0),
        ],
        orientation: wrap_angle(rng.gen_range(-PI..PI)),
        velocity: Vec2::new(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0)),
    }
}

/// Criterion 6: codec round trip and rotation invariance of the targets.
pub fn check_codec(tol: &Tolerances, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = rng_for(seed, 6);
    let center = Vec2::new(0.93, 0.0);

    let probe = Probe::start("codec_round_trip");
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let b = random_box(&mut rng);
        let loc = Vec2::new(rng.gen_range(-54.0..54.0), rng.gen_range(-54.0..54.0));
        let a = AzimuthAnchor::implicit(loc, rng.gen_range(-1.0..1.0), center).with_size([
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..3.0),
            rng.gen_range(0.0..2.0),
        ]);
        let back = decode(&encode(&b, &a), &a);
        worst = worst
            .max((back.center - b.center).norm())
            .max((back.velocity - b.velocity).norm())
            .max((back.z - b.z).abs())
            .max(angle_distance(back.orientation, b.orientation));
        for d in 0..3 {
            worst = worst.max((back.size[d] - b.size[d]).abs());
        }
    }
    let round_trip = probe.at_most(worst, tol.exact, "1000 random boxes/anchors; worst field error");

    let probe = Probe::start("codec_rotation_invariance");
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let delta = rng.gen_range(-PI..PI);
        let b = random_box(&mut rng);
        let loc = Vec2::new(rng.gen_range(-54.0..54.0), rng.gen_range(-54.0..54.0));
        let r0 = encode(&b, &AzimuthAnchor::implicit(loc, 0.0, center));
        let loc1 = center + (loc - center).rotate(delta);
        let r1 = encode(&b.rotated(delta, center), &AzimuthAnchor::implicit(loc1, 0.0, center));
        worst = worst
            .max(angle_distance(r0.d_theta, r1.d_theta))
            .max((r0.d_r - r1.d_r).abs())
            .max((r0.d_o - r1.d_o).abs())
            .max((r0.v_r - r1.v_r).abs())
            .max((r0.v_o - r1.v_o).abs())
            .max((r0.d_z - r1.d_z).abs());
    }
    let invariance = probe.at_most(worst, tol.exact, "100 random angles; worst residual component change");
    Ok(vec![round_trip, invariance])
}

/// Criterion 7: depth remapping with the configured constants.
pub fn check_depth(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let tol = &cfg.tolerances;
    let vspec = cfg.virtual_depth()?;
    let fspec = cfg.fixed_depth()?;
    let mut rng = rng_for(cfg.seed, 7);
    let mut out = Vec::new();

    let probe = Probe::start("depth_fixed_bin_count");
    let bins = fspec.bins();
    let defaults = RunConfig::default();
    let expected = if (cfg.fixed_depth_min, cfg.fixed_depth_max, cfg.fixed_depth_step)
        == (
            defaults.fixed_depth_min,
            defaults.fixed_depth_max,
            defaults.fixed_depth_step,
        ) {
        104.0
    } else {
        ((fspec.max_depth - fspec.min_depth) / fspec.bin_size).round()
    };
    out.push(probe.finish(
        bins as f64 == expected,
        bins as f64,
        expected,
        "N = (d_f2 - d_f1) / step",
    ));

    let probe = Probe::start("depth_first_bin_interpolation");
    let mapping = DepthMapping::new(vspec, fspec, vspec.focal, vspec.focal)?;
    let s_v: Vec<f64> = (0..vspec.bins).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let s_f = mapping.apply(&s_v)?;
    let u = fspec.min_depth / mapping.real_bin;
    let (j, frac) = (u.floor() as usize, u - u.floor());
    let expect = (1.0 - frac) * s_v[j] + frac * s_v[j + 1];
    out.push(probe.at_most(
        (s_f[0] - expect).abs(),
        tol.exact,
        format!(
            "f_r = f_v: s_f[0] reads virtual coordinate {u:.6} (bins {j}, {})",
            j + 1
        ),
    ));

    let probe = Probe::start("depth_rms_focal_invariance");
    // (600, 800) and (500, sqrt(2 * 500000 - 250000)) share an RMS focal of
    // sqrt(500000); both are scaled up past f_v.
    let scale = 1.6;
    let pair_a = (600.0 * scale, 800.0 * scale);
    let pair_b = (500.0 * scale, 750_000f64.sqrt() * scale);
    let ma = DepthMapping::new(vspec, fspec, pair_a.0, pair_a.1)?;
    let mb = DepthMapping::new(vspec, fspec, pair_b.0, pair_b.1)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let s: Vec<f64> = (0..vspec.bins).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (a, b) = (ma.apply(&s)?, mb.apply(&s)?);
        worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x - y).abs()));
    }
    out.push(probe.at_most(
        worst,
        tol.exact,
        format!("RMS focal {:.6} vs {:.6}", ma.real_focal, mb.real_focal),
    ));

    let probe = Probe::start("depth_constant_and_convexity");
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = rng.gen_range(vspec.focal..2.5 * vspec.focal);
        let m = DepthMapping::new(vspec, fspec, f, f * rng.gen_range(0.95f64..1.05).max(vspec.focal / f))?;
        let c = rng.gen_range(-3.0..3.0);
        for v in m.apply(&vec![c; vspec.bins])? {
            worst = worst.max((v - c).abs());
        }
        let s: Vec<f64> = (0..vspec.bins).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mapped = m.apply(&s)?;
        for (i, &(j, frac)) in m.sample_points().iter().enumerate() {
            let hi = if frac == 0.0 { j } else { j + 1 };
            let lo_v = s[j].min(s[hi]);
            let hi_v = s[j].max(s[hi]);
            let excess = (lo_v - mapped[i]).max(mapped[i] - hi_v).max(0.0);
            worst = worst.max(excess);
        }
    }
    out.push(probe.at_most(
        worst,
        tol.exact,
        "100 random vectors; constant drift and convex-hull excess",
    ));

    let probe = Probe::start("depth_rejects_short_focal");
    let below = vspec.focal * 0.999;
    let rejected = matches!(real_bin_size(&vspec, below), Err(Error::Coverage(_)))
        && DepthMapping::new(vspec, fspec, below, below).is_err()
        && real_focal(below, below).is_ok();
    out.push(probe.finish(
        rejected,
        if rejected { 0.0 } else { 1.0 },
        0.0,
        format!("f_r = {below} < f_v"),
    ));

    // Guard against silent clamping: too few virtual bins must error.
    let probe = Probe::start("depth_rejects_short_range");
    let short = map_scores(&vec![0.0; vspec.bins / 2], &fspec, vspec.bin_size());
    let ok = matches!(short, Err(Error::Coverage(_)));
    out.push(probe.finish(ok, if ok { 0.0 } else { 1.0 }, 0.0, "half the virtual bins"));
    Ok(out)
}

/// Runs every check in order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let tol = &cfg.tolerances;
    let seed = cfg.seed;
    let mut out = vec![
        check_reduction(tol, seed)?,
        check_plan_equivalence(tol, seed)?,
        check_quarter_turn(tol, seed)?,
    ];
    out.extend(check_revolve(tol, seed)?);
    out.extend(check_gradients(tol, seed)?);
    out.extend(check_codec(tol, seed)?);
    out.extend(check_depth(cfg)?);
    Ok(out)
}

pub fn write_report_csv(results: &[CheckResult], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["check", "passed", "metric", "threshold", "elapsed_ms", "detail"])?;
    for r in results {
        w.write_record([
            r.name.as_str(),
            if r.passed { "true" } else { "false" },
            &r.metric.to_string(),
            &r.threshold.to_string(),
            &format!("{:.3}", r.elapsed.as_secs_f64() * 1e3),
            &r.detail,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
