//! Rotate-the-rig harness on synthetic BEV features.
//!
//! A scene of isotropic Gaussian blobs placed in polar coordinates around the
//! azimuth center is rendered twice: as-is and with every blob turned by the
//! test angle (re-rendered analytically, never resampled). An operator is
//! equivariant when its response to the turned scene equals its response to
//! the original scene turned afterwards.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aeconv::{aeconv_forward_planned, GatherPlan};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, RadialBasisField};
use crate::tensor::{rotate_resample, standard_conv, FeatureMap, Kernel};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    /// Distance from the azimuth center in meters.
    pub range: f64,
    pub azimuth: f64,
    pub amplitude: f64,
    /// Gaussian sigma in meters.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub blobs: Vec<Blob>,
    pub grid: GridSpec,
    /// Azimuth center in ego meters.
    pub center: Vec2,
    pub seed: u64,
}

impl SyntheticScene {
    pub fn new(blobs: Vec<Blob>, grid: GridSpec, center: Vec2, seed: u64) -> Result<Self> {
        for (n, b) in blobs.iter().enumerate() {
            if b.width.is_nan() || b.width <= 0.0 {
                return Err(Error::config(format!("blob {n}: width must be positive")));
            }
            if !(b.range >= 0.0 && b.range.is_finite() && b.azimuth.is_finite() && b.amplitude.is_finite()) {
                return Err(Error::config(format!("blob {n}: invalid polar position or amplitude")));
            }
        }
        Ok(SyntheticScene {
            blobs,
            grid,
            center,
            seed,
        })
    }

    /// `count` blobs drawn from `seed`, kept inside the disc inscribed in the
    /// grid (with a three-sigma margin) so that any rotation keeps them on the
    /// map. Widths are 1.5 to 3 cells.
    pub fn random(grid: GridSpec, center: Vec2, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = grid.resolution;
        let c = grid.to_cell(center);
        let inscribed = [c.x, c.y, grid.height as f64 - 1.0 - c.x, grid.width as f64 - 1.0 - c.y]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            * res;
        let blobs = (0..count)
            .map(|_| {
                let width = rng.gen_range(1.5..3.0) * res;
                let max_range = (inscribed - 3.0 * width).max(0.0);
                Blob {
                    range: rng.gen_range(0.0..=max_range),
                    azimuth: rng.gen_range(-PI..PI),
                    amplitude: rng.gen_range(0.5..1.5),
                    width,
                }
            })
            .collect();
        SyntheticScene {
            blobs,
            grid,
            center,
            seed,
        }
    }

    /// The same scene with every blob turned counter-clockwise by `delta`.
    pub fn rotated(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blobs {
            b.azimuth += delta;
        }
        out
    }
}

/// Renders the scene as a single-channel map.
pub fn synth_scene(scene: &SyntheticScene) -> FeatureMap {
    let g = &scene.grid;
    let centers: Vec<(Vec2, f64, f64)> = scene
        .blobs
        .iter()
        .map(|b| {
            let p = scene.center + Vec2::from_angle(b.azimuth) * b.range;
            (p, b.amplitude, 1.0 / (2.0 * b.width * b.width))
        })
        .collect();
    FeatureMap::from_fn(1, g.height, g.width, |_, i, j| {
        let p = g.cell_center(i, j);
        centers
            .iter()
            .map(|&(b, amp, inv)| {
                let d = p - b;
                amp * (-(d.dot(d)) * inv).exp()
            })
            .sum()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevolveReport {
    pub angle: f64,
    pub aeconv_rel_l2: f64,
    pub standard_rel_l2: f64,
    pub max_abs_aeconv: f64,
    pub max_abs_standard: f64,
    /// Residual of resampling the input alone: `rotate_resample(scene)` vs
    /// the re-rendered turned scene.
    pub resample_rel_l2: f64,
    pub interior_margin: usize,
}

/// Runs both operators on the scene and its turned copy and measures the
/// commutation residual over the interior. A cell lying exactly on the
/// azimuth center is left out of every metric since its frame is arbitrary.
pub fn run_revolve(scene: &SyntheticScene, kernel: &Kernel, angle: f64) -> Result<RevolveReport> {
    let field = RadialBasisField::radial(&scene.grid, scene.center);
    let plan = GatherPlan::build(&field, kernel.extent())?;
    run_revolve_with_plan(scene, kernel, &plan, angle)
}

/// As [`run_revolve`], reusing a plan built for `scene.grid` about
/// `scene.center`.
pub fn run_revolve_with_plan(
    scene: &SyntheticScene,
    kernel: &Kernel,
    plan: &GatherPlan,
    angle: f64,
) -> Result<RevolveReport> {
    if !angle.is_finite() {
        return Err(Error::config("revolve angle must be finite"));
    }
    let original = synth_scene(scene);
    let turned = synth_scene(&scene.rotated(angle));
    let pivot = scene.grid.to_cell(scene.center);
    let margin = kernel.radius() + 1;
    let on_lattice = (pivot.x - pivot.x.round()).abs() <= 1e-12 && (pivot.y - pivot.y.round()).abs() <= 1e-12;
    let skip = scene.grid.nearest_cell(scene.center).filter(|_| on_lattice);

    let resampled_input = rotate_resample(&original, angle, pivot);

    let ae_orig = aeconv_forward_planned(&original, kernel, plan)?;
    let ae_turned = aeconv_forward_planned(&turned, kernel, plan)?;
    let ae_expect = rotate_resample(&ae_orig, angle, pivot);

    let st_orig = standard_conv(&original, kernel)?;
    let st_turned = standard_conv(&turned, kernel)?;
    let st_expect = rotate_resample(&st_orig, angle, pivot);

    Ok(RevolveReport {
        angle,
        aeconv_rel_l2: ae_turned.rel_l2_region(&ae_expect, margin, skip),
        standard_rel_l2: st_turned.rel_l2_region(&st_expect, margin, skip),
        max_abs_aeconv: ae_turned.max_abs_diff_region(&ae_expect, margin, skip),
        max_abs_standard: st_turned.max_abs_diff_region(&st_expect, margin, skip),
        resample_rel_l2: resampled_input.rel_l2_region(&turned, margin, skip),
        interior_margin: margin,
    })
}

/// Writes `angle_deg,operator,rel_l2,max_abs,interior_margin` rows; the
/// resampling baseline appears as operator `resample`.
pub fn write_reports_csv(reports: &[RevolveReport], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle_deg", "operator", "rel_l2", "max_abs", "interior_margin"])?;
    for r in reports {
        let deg = r.angle.to_degrees().to_string();
        let margin = r.interior_margin.to_string();
        w.write_record([
            &deg,
            "aeconv",
            &r.aeconv_rel_l2.to_string(),
            &r.max_abs_aeconv.to_string(),
            &margin,
        ])?;
        w.write_record([
            &deg,
            "standard",
            &r.standard_rel_l2.to_string(),
            &r.max_abs_standard.to_string(),
            &margin,
        ])?;
        w.write_record([&deg, "resample", &r.resample_rel_l2.to_string(), "", &margin])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid33() -> GridSpec {
        GridSpec::centered(33, 33, 0.5, Vec2::ZERO).unwrap()
    }

    #[test]
    fn empty_scene_is_zero() {
        let s = SyntheticScene::new(vec![], grid33(), Vec2::ZERO, 0).unwrap();
        assert!(synth_scene(&s).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn centered_blob_is_quarter_turn_symmetric() {
        let blob = Blob {
            range: 0.0,
            azimuth: 0.0,
            amplitude: 1.0,
            width: 1.2,
        };
        let s = SyntheticScene::new(vec![blob], grid33(), Vec2::ZERO, 0).unwrap();
        let m = synth_scene(&s);
        let turned = rotate_resample(&m, PI / 2.0, Vec2::new(16.0, 16.0));
        assert!(turned.max_abs_diff(&m) <= 1e-12);
    }

    #[test]
    fn rotated_scene_is_rerendered_blob() {
        let blob = Blob {
            range: 5.0,
            azimuth: 0.0,
            amplitude: 1.0,
            width: 1.0,
        };
        let s = SyntheticScene::new(vec![blob], grid33(), Vec2::ZERO, 0).unwrap();
        let delta = 0.83;
        let moved = SyntheticScene::new(vec![Blob { azimuth: delta, ..blob }], grid33(), Vec2::ZERO, 0).unwrap();
        assert!(synth_scene(&s.rotated(delta)).max_abs_diff(&synth_scene(&moved)) <= 1e-12);
    }

    #[test]
    fn random_scene_is_deterministic() {
        let a = SyntheticScene::random(grid33(), Vec2::ZERO, 6, 42);
        let b = SyntheticScene::random(grid33(), Vec2::ZERO, 6, 42);
        assert_eq!(a, b);
        assert_ne!(a, SyntheticScene::random(grid33(), Vec2::ZERO, 6, 43));
    }

    #[test]
    fn zero_angle_has_no_discrepancy() {
        let s = SyntheticScene::random(grid33(), Vec2::ZERO, 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = Kernel::random(2, 1, 3, &mut rng).unwrap();
        let r = run_revolve(&s, &k, 0.0).unwrap();
        assert_eq!(r.aeconv_rel_l2, 0.0);
        assert_eq!(r.standard_rel_l2, 0.0);
        assert_eq!(r.interior_margin, 2);
    }

    #[test]
    fn quarter_turn_is_exact_for_aeconv_only() {
        let s = SyntheticScene::random(grid33(), Vec2::ZERO, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = Kernel::random(2, 1, 3, &mut rng).unwrap();
        let r = run_revolve(&s, &k, PI / 2.0).unwrap();
        assert!(r.aeconv_rel_l2 <= 1e-9, "{r:?}");
        assert!(r.standard_rel_l2 > 1e-3, "{r:?}");
    }

    #[test]
    fn sixty_degrees_favours_aeconv() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..3 {
            let s = SyntheticScene::random(grid33(), Vec2::ZERO, 6, seed);
            let k = Kernel::random(2, 1, 3, &mut rng).unwrap();
            let r = run_revolve(&s, &k, PI / 3.0).unwrap();
            assert!(r.aeconv_rel_l2 < r.standard_rel_l2, "{r:?}");
            assert!(r.resample_rel_l2 > 0.0);
        }
    }

    // Same physical scene on a grid twice as fine: both residuals are
    // interpolation error and shrink together.
    #[test]
    fn residual_shrinks_under_refinement() {
        let blobs = vec![
            Blob {
                range: 4.0,
                azimuth: 0.4,
                amplitude: 1.0,
                width: 1.2,
            },
            Blob {
                range: 2.5,
                azimuth: -2.0,
                amplitude: 0.7,
                width: 1.0,
            },
        ];
        let k = Kernel::random(1, 1, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let residual = |n: usize, res: f64| {
            let g = GridSpec::centered(n, n, res, Vec2::ZERO).unwrap();
            let s = SyntheticScene::new(blobs.clone(), g, Vec2::ZERO, 0).unwrap();
            run_revolve(&s, &k, PI / 3.0).unwrap()
        };
        let coarse = residual(33, 0.4);
        let fine = residual(65, 0.2);
        let gain = coarse.aeconv_rel_l2 / fine.aeconv_rel_l2;
        assert!(gain > 2.5, "{coarse:?} {fine:?}");
        assert!(coarse.resample_rel_l2 / fine.resample_rel_l2 > 2.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = SyntheticScene::random(grid33(), Vec2::ZERO, 3, 5);
        let k = Kernel::random(1, 1, 3, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let r = run_revolve(&s, &k, PI / 3.0).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "angle_deg,operator,rel_l2,max_abs,interior_margin");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].contains(",aeconv,"));
    }
}
