//! Camera rigs, the BEV grid and the per-cell azimuth frame.
//!
//! Azimuth is measured from ego-forward (+x, grid axis 0) towards ego-left
//! (+y, grid axis 1), in `(-pi, pi]`. The radial unit `e_r` points away from
//! the azimuth center and the tangential unit `e_o` is `e_r` turned 90 degrees
//! counter-clockwise, so `(e_r, e_o)` is a right-handed orthonormal frame.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub name: String,
    /// Ego-frame position in meters.
    pub position: Vec2,
    pub yaw: f64,
    pub fx: f64,
    pub fy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<Camera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::config("camera rig needs at least one camera"));
        }
        for cam in &cameras {
            if !(cam.fx > 0.0 && cam.fy > 0.0) {
                return Err(Error::config(format!(
                    "camera {}: focal lengths must be positive (fx={}, fy={})",
                    cam.name, cam.fx, cam.fy
                )));
            }
            if !(cam.position.x.is_finite() && cam.position.y.is_finite() && cam.yaw.is_finite()) {
                return Err(Error::config(format!("camera {}: non-finite pose", cam.name)));
            }
        }
        Ok(CameraRig { cameras })
    }

    /// A six-camera surround rig with roughly 60 degree spacing.
    pub fn surround_default() -> Self {
        let layout: [(&str, f64, f64, f64, f64); 6] = [
            ("front", 1.70, 0.00, 0.0, 1266.4),
            ("front_left", 1.50, 0.49, 55.0, 1272.6),
            ("back_left", 1.04, 0.48, 110.0, 1256.7),
            ("back", 0.05, 0.00, 180.0, 809.2),
            ("back_right", 1.05, -0.48, -110.0, 1259.5),
            ("front_right", 1.52, -0.49, -55.0, 1260.8),
        ];
        let cameras = layout
            .iter()
            .map(|&(name, x, y, yaw_deg, f)| Camera {
                name: name.to_string(),
                position: Vec2::new(x, y),
                yaw: yaw_deg.to_radians(),
                fx: f,
                fy: f,
            })
            .collect();
        CameraRig { cameras }
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn camera(&self, name: &str) -> Option<&Camera> {
        self.cameras.iter().find(|c| c.name == name)
    }

    /// Parses the line-oriented rig format:
    /// `camera <name> x=<m> y=<m> yaw=<rad> fx=<px> fy=<px>`.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut cameras = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            if tokens.next() != Some("camera") {
                return Err(perr(line_no, "expected `camera <name> key=value...`".into()));
            }
            let name = tokens
                .next()
                .ok_or_else(|| perr(line_no, "missing camera name".into()))?
                .to_string();
            let mut fields: [Option<f64>; 5] = [None; 5];
            const KEYS: [&str; 5] = ["x", "y", "yaw", "fx", "fy"];
            for tok in tokens {
                let (key, value) = tok
                    .split_once('=')
                    .ok_or_else(|| perr(line_no, format!("expected key=value, got `{tok}`")))?;
                let slot = KEYS
                    .iter()
                    .position(|k| *k == key)
                    .ok_or_else(|| perr(line_no, format!("unknown key `{key}`")))?;
                if fields[slot].is_some() {
                    return Err(perr(line_no, format!("duplicate key `{key}`")));
                }
                let v: f64 = value
                    .parse()
                    .map_err(|_| perr(line_no, format!("invalid number `{value}` for `{key}`")))?;
                fields[slot] = Some(v);
            }
            let mut vals = [0.0; 5];
            for (i, f) in fields.iter().enumerate() {
                vals[i] = f.ok_or_else(|| perr(line_no, format!("missing key `{}`", KEYS[i])))?;
            }
            if !(vals[3] > 0.0 && vals[4] > 0.0) {
                return Err(perr(line_no, "focal lengths must be positive".into()));
            }
            cameras.push(Camera {
                name,
                position: Vec2::new(vals[0], vals[1]),
                yaw: vals[2],
                fx: vals[3],
                fy: vals[4],
            });
        }
        if cameras.is_empty() {
            return Err(perr(0, "rig file contains no cameras".into()));
        }
        CameraRig::new(cameras)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.cameras {
            let _ = writeln!(
                s,
                "camera {} x={} y={} yaw={} fx={} fy={}",
                c.name, c.position.x, c.position.y, c.yaw, c.fx, c.fy
            );
        }
        s
    }
}

/// Mean camera position: the shared azimuth center for all views.
pub fn rig_center(rig: &CameraRig) -> Vec2 {
    let n = rig.cameras.len() as f64;
    let sum = rig.cameras.iter().fold(Vec2::ZERO, |acc, c| acc + c.position);
    sum * (1.0 / n)
}

/// Azimuth of `point` seen from `center`, in `(-pi, pi]`.
pub fn azimuth_of(point: Vec2, center: Vec2) -> Result<f64> {
    let d = point - center;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(Error::config("azimuth undefined at the center point"));
    }
    Ok(normalize_atan2(d.y.atan2(d.x)))
}

#[inline]
fn normalize_atan2(a: f64) -> f64 {
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// BEV grid: cell `(i, j)` has its center at `origin + resolution * (i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    pub resolution: f64,
    pub origin: Vec2,
}

impl GridSpec {
    pub fn new(height: usize, width: usize, resolution: f64, origin: Vec2) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::config("grid must have at least one cell"));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::config(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        Ok(GridSpec {
            height,
            width,
            resolution,
            origin,
        })
    }

    /// Grid whose geometric middle `((h-1)/2, (w-1)/2)` sits at `center`.
    pub fn centered(height: usize, width: usize, resolution: f64, center: Vec2) -> Result<Self> {
        let half = Vec2::new((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
        Self::new(height, width, resolution, center - half * resolution)
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64, j as f64) * self.resolution
    }

    /// Continuous cell coordinates of an ego-frame point.
    pub fn to_cell(&self, point: Vec2) -> Vec2 {
        (point - self.origin) * (1.0 / self.resolution)
    }

    /// Nearest cell to `point`, if it lies on the grid.
    pub fn nearest_cell(&self, point: Vec2) -> Option<(usize, usize)> {
        let c = self.to_cell(point);
        let (i, j) = (c.x.round(), c.y.round());
        if i >= 0.0 && j >= 0.0 && (i as usize) < self.height && (j as usize) < self.width {
            Some((i as usize, j as usize))
        } else {
            None
        }
    }
}

/// Per-cell azimuth and radial/tangential unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialBasisField {
    height: usize,
    width: usize,
    alpha: Vec<f64>,
    radial: Vec<Vec2>,
    tangential: Vec<Vec2>,
    singular: Option<(usize, usize)>,
}

impl RadialBasisField {
    /// Field radiating from `center` (ego-frame meters) over `grid`.
    ///
    /// The cell coinciding with the center gets `alpha = 0` and the ego axes.
    pub fn radial(grid: &GridSpec, center: Vec2) -> Self {
        let n = grid.cells();
        let mut alpha = Vec::with_capacity(n);
        let mut radial = Vec::with_capacity(n);
        let eps = 1e-12 * grid.resolution;
        let mut singular = None;
        for i in 0..grid.height {
            for j in 0..grid.width {
                let d = grid.cell_center(i, j) - center;
                let r = d.norm();
                if r <= eps {
                    singular = Some((i, j));
                    alpha.push(0.0);
                    radial.push(Vec2::X);
                } else {
                    alpha.push(normalize_atan2(d.y.atan2(d.x)));
                    radial.push(d * (1.0 / r));
                }
            }
        }
        let tangential = radial.iter().map(|e| e.perp()).collect();
        RadialBasisField {
            height: grid.height,
            width: grid.width,
            alpha,
            radial,
            tangential,
            singular,
        }
    }

    /// Every cell shares azimuth `alpha`; `alpha = 0` reproduces the ego axes
    /// exactly.
    pub fn uniform(height: usize, width: usize, alpha: f64) -> Self {
        let e_r = if alpha == 0.0 { Vec2::X } else { Vec2::from_angle(alpha) };
        let n = height * width;
        RadialBasisField {
            height,
            width,
            alpha: vec![alpha; n],
            radial: vec![e_r; n],
            tangential: vec![e_r.perp(); n],
            singular: None,
        }
    }

    /// The cell sitting on the azimuth center, whose frame is fixed to the ego
    /// axes rather than derived from the geometry.
    pub fn singular_cell(&self) -> Option<(usize, usize)> {
        self.singular
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn radial_units(&self) -> &[Vec2] {
        &self.radial
    }

    pub fn tangential_units(&self) -> &[Vec2] {
        &self.tangential
    }

    #[inline]
    pub fn basis(&self, i: usize, j: usize) -> (Vec2, Vec2) {
        let idx = i * self.width + j;
        (self.radial[idx], self.tangential[idx])
    }

    #[inline]
    pub fn azimuth(&self, i: usize, j: usize) -> f64 {
        self.alpha[i * self.width + j]
    }
}

/// Convenience: field of `grid` about the rig's mean camera position.
pub fn radial_basis_field(grid: &GridSpec, center: Vec2) -> RadialBasisField {
    RadialBasisField::radial(grid, center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn singular_cell_only_on_lattice_center() {
        let odd = GridSpec::centered(5, 5, 0.5, Vec2::ZERO).unwrap();
        assert_eq!(RadialBasisField::radial(&odd, Vec2::ZERO).singular_cell(), Some((2, 2)));
        let even = GridSpec::centered(4, 4, 0.5, Vec2::ZERO).unwrap();
        assert_eq!(RadialBasisField::radial(&even, Vec2::ZERO).singular_cell(), None);
        assert_eq!(RadialBasisField::uniform(3, 3, 0.0).singular_cell(), None);
    }

    fn cam(name: &str, x: f64, y: f64) -> Camera {
        Camera {
            name: name.into(),
            position: Vec2::new(x, y),
            yaw: 0.0,
            fx: 800.0,
            fy: 800.0,
        }
    }

    #[test]
    fn rig_center_examples() {
        let one = CameraRig::new(vec![cam("a", 0.0, 0.0)]).unwrap();
        assert_eq!(rig_center(&one), Vec2::ZERO);
        let two = CameraRig::new(vec![cam("a", 1.0, 0.0), cam("b", -1.0, 0.0)]).unwrap();
        assert_eq!(rig_center(&two), Vec2::ZERO);
        let hex = CameraRig::new(
            (0..6)
                .map(|k| {
                    let p = Vec2::from_angle(k as f64 * PI / 3.0);
                    cam(&format!("c{k}"), p.x, p.y)
                })
                .collect(),
        )
        .unwrap();
        assert!(rig_center(&hex).norm() <= 1e-12);
    }

    #[test]
    fn empty_rig_rejected() {
        assert!(matches!(CameraRig::new(vec![]), Err(Error::Config(_))));
    }

    #[test]
    fn azimuth_examples() {
        let c = Vec2::new(2.0, -1.0);
        assert_eq!(azimuth_of(c + Vec2::X, c).unwrap(), 0.0);
        assert_eq!(azimuth_of(c + Vec2::Y, c).unwrap(), FRAC_PI_2);
        assert_eq!(azimuth_of(c - Vec2::X, c).unwrap(), PI);
        assert_eq!(azimuth_of(Vec2::new(-1.0, -0.0), Vec2::ZERO).unwrap(), PI);
        assert!(azimuth_of(c, c).is_err());
    }

    #[test]
    fn field_on_axes() {
        let grid = GridSpec::centered(5, 5, 1.0, Vec2::ZERO).unwrap();
        let f = RadialBasisField::radial(&grid, Vec2::ZERO);
        // (3, 2) is one cell forward of center, (2, 3) one cell left.
        assert_eq!(f.basis(3, 2), (Vec2::X, Vec2::Y));
        assert_eq!(f.basis(2, 3), (Vec2::Y, Vec2::new(-1.0, 0.0)));
        assert_eq!(f.basis(2, 2), (Vec2::X, Vec2::Y));
        assert_eq!(f.azimuth(2, 2), 0.0);
    }

    #[test]
    fn field_orthonormal_and_radial() {
        let grid = GridSpec::new(13, 17, 0.8, Vec2::new(-5.3, -6.1)).unwrap();
        let center = Vec2::new(0.4, 0.2);
        let f = RadialBasisField::radial(&grid, center);
        for i in 0..grid.height {
            for j in 0..grid.width {
                let (er, eo) = f.basis(i, j);
                assert!((er.norm() - 1.0).abs() <= 1e-12);
                assert!((eo.norm() - 1.0).abs() <= 1e-12);
                assert!(er.dot(eo).abs() <= 1e-12);
                assert!((er.cross(eo) - 1.0).abs() <= 1e-12);
                let d = grid.cell_center(i, j) - center;
                assert!(er.cross(d * (1.0 / d.norm())).abs() <= 1e-12);
                assert!(er.dot(d) > 0.0);
            }
        }
    }

    #[test]
    fn azimuth_equivariance_under_rotation() {
        let c = Vec2::new(0.7, -0.3);
        for k in 0..50 {
            let p = c + Vec2::new(1.0 + k as f64 * 0.37, -2.0 + k as f64 * 0.11);
            let delta = -3.0 + k as f64 * 0.123;
            let a = azimuth_of(p, c).unwrap();
            let b = azimuth_of(c + (p - c).rotate(delta), c).unwrap();
            let diff = crate::anchor::wrap_angle(b - (a + delta));
            assert!(diff.abs() <= 1e-12, "k={k} diff={diff}");
        }
    }

    #[test]
    fn rotated_grid_field_matches_rotated_basis() {
        // Cells of a grid rotated by 90 degrees about the center land on cells
        // of the original grid; their bases must be the rotated originals.
        let grid = GridSpec::centered(9, 9, 0.5, Vec2::new(1.0, 2.0)).unwrap();
        let c = Vec2::new(1.0, 2.0);
        let f = RadialBasisField::radial(&grid, c);
        for i in 0..9 {
            for j in 0..9 {
                if (i, j) == (4, 4) {
                    continue;
                }
                // R(90) maps offset (di, dj) to (-dj, di).
                let (ri, rj) = (8 - j, i);
                let (er, eo) = f.basis(i, j);
                let (er2, eo2) = f.basis(ri, rj);
                assert!((er.perp() - er2).norm() <= 1e-12);
                assert!((eo.perp() - eo2).norm() <= 1e-12);
            }
        }
        // Arbitrary angle: evaluate the field at rotated points analytically.
        let delta = 0.9;
        for i in 0..9 {
            for j in 0..9 {
                let p = grid.cell_center(i, j);
                if (p - c).norm() < 1e-9 {
                    continue;
                }
                let q = c + (p - c).rotate(delta);
                let g = GridSpec::new(1, 1, 1.0, q).unwrap();
                let fq = RadialBasisField::radial(&g, c);
                let (er, eo) = f.basis(i, j);
                let (erq, eoq) = fq.basis(0, 0);
                assert!((er.rotate(delta) - erq).norm() <= 1e-12);
                assert!((eo.rotate(delta) - eoq).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn uniform_zero_is_ego_axes() {
        let f = RadialBasisField::uniform(3, 4, 0.0);
        assert!(f.radial_units().iter().all(|&e| e == Vec2::X));
        assert!(f.tangential_units().iter().all(|&e| e == Vec2::Y));
    }

    #[test]
    fn parse_rig_file() {
        let text = "# rig\n\ncamera front x=1.5 y=0 yaw=0 fx=1266 fy=1260 # trailing\ncamera back x=-1 y=0.0 yaw=3.14 fx=800 fy=800\n";
        let rig = CameraRig::parse(text, "rig.txt").unwrap();
        assert_eq!(rig.cameras().len(), 2);
        assert_eq!(rig.camera("front").unwrap().fy, 1260.0);
        let again = CameraRig::parse(&rig.to_text(), "x").unwrap();
        assert_eq!(again, rig);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "camera a x=0 y=0 yaw=0 fx=1 fy=1\n\ncamera b x=0 y=zero yaw=0 fx=1 fy=1\n";
        match CameraRig::parse(bad, "rig.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let missing = "camera a x=0 y=0 yaw=0 fx=1\n";
        assert!(matches!(
            CameraRig::parse(missing, "r"),
            Err(Error::Parse { line: 1, .. })
        ));
        let neg = "camera a x=0 y=0 yaw=0 fx=-1 fy=1\n";
        assert!(CameraRig::parse(neg, "r").is_err());
        assert!(CameraRig::parse("lens a\n", "r").is_err());
        assert!(CameraRig::parse("# nothing\n", "r").is_err());
    }
}
