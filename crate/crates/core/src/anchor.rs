//! Regression targets in the radial frame of an anchor.
//!
//! An [`AzimuthAnchor`] carries its azimuth and the `(e_r, e_o)` frame of its
//! cell. Targets are the orientation relative to the azimuth, plus center
//! offset and velocity projected onto `e_r` and `e_o`. Size and height
//! residuals are plain differences so that zero-size (implicit) anchors work
//! the same way as sized ones.

use std::f64::consts::{PI, TAU};

use crate::geometry::{azimuth_of, RadialBasisField};
use crate::vec2::Vec2;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut r = theta % TAU;
    if r > PI {
        r -= TAU;
    } else if r <= -PI {
        r += TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxState {
    /// Ego-frame center in meters (x forward, y left).
    pub center: Vec2,
    pub z: f64,
    /// `(l, w, h)` in meters.
    pub size: [f64; 3],
    pub orientation: f64,
    pub velocity: Vec2,
}

impl BoxState {
    /// Rotates the box counter-clockwise by `delta` about `pivot`: center,
    /// heading and velocity all turn together.
    pub fn rotated(&self, delta: f64, pivot: Vec2) -> BoxState {
        BoxState {
            center: pivot + (self.center - pivot).rotate(delta),
            z: self.z,
            size: self.size,
            orientation: wrap_angle(self.orientation + delta),
            velocity: self.velocity.rotate(delta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzimuthAnchor {
    pub location: Vec2,
    pub z: f64,
    pub size: [f64; 3],
    pub azimuth: f64,
    pub radial: Vec2,
    pub tangential: Vec2,
}

impl AzimuthAnchor {
    /// Zero-size anchor at `location` oriented along the azimuth seen from
    /// `center`. At the center itself the ego axes are used.
    pub fn implicit(location: Vec2, z: f64, center: Vec2) -> Self {
        let (azimuth, radial) = match azimuth_of(location, center) {
            Ok(a) => {
                let d = location - center;
                (a, d * (1.0 / d.norm()))
            }
            Err(_) => (0.0, Vec2::X),
        };
        AzimuthAnchor {
            location,
            z,
            size: [0.0; 3],
            azimuth,
            radial,
            tangential: radial.perp(),
        }
    }

    /// The anchor-free head's implicit anchor: zero size, zero orientation,
    /// Cartesian axes.
    pub fn cartesian(location: Vec2, z: f64) -> Self {
        AzimuthAnchor {
            location,
            z,
            size: [0.0; 3],
            azimuth: 0.0,
            radial: Vec2::X,
            tangential: Vec2::Y,
        }
    }

    /// Anchor whose frame is taken from cell `(i, j)` of `field`, so anchors
    /// and the convolution agree on directions.
    pub fn from_field(field: &RadialBasisField, i: usize, j: usize, location: Vec2, z: f64) -> Self {
        let (radial, tangential) = field.basis(i, j);
        AzimuthAnchor {
            location,
            z,
            size: [0.0; 3],
            azimuth: field.azimuth(i, j),
            radial,
            tangential,
        }
    }

    pub fn with_size(mut self, size: [f64; 3]) -> Self {
        self.size = size;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualState {
    pub d_theta: f64,
    pub d_r: f64,
    pub d_o: f64,
    pub d_z: f64,
    /// `(dl, dw, dh)`.
    pub d_size: [f64; 3],
    pub v_r: f64,
    pub v_o: f64,
}

pub fn encode(b: &BoxState, anchor: &AzimuthAnchor) -> ResidualState {
    let offset = b.center - anchor.location;
    ResidualState {
        d_theta: wrap_angle(b.orientation - anchor.azimuth),
        d_r: anchor.radial.dot(offset),
        d_o: anchor.tangential.dot(offset),
        d_z: b.z - anchor.z,
        d_size: [
            b.size[0] - anchor.size[0],
            b.size[1] - anchor.size[1],
            b.size[2] - anchor.size[2],
        ],
        v_r: anchor.radial.dot(b.velocity),
        v_o: anchor.tangential.dot(b.velocity),
    }
}

pub fn decode(res: &ResidualState, anchor: &AzimuthAnchor) -> BoxState {
    BoxState {
        center: anchor.location + anchor.radial * res.d_r + anchor.tangential * res.d_o,
        z: anchor.z + res.d_z,
        size: [
            anchor.size[0] + res.d_size[0],
            anchor.size[1] + res.d_size[1],
            anchor.size[2] + res.d_size[2],
        ],
        orientation: wrap_angle(res.d_theta + anchor.azimuth),
        velocity: anchor.radial * res.v_r + anchor.tangential * res.v_o,
    }
}

/// Absolute angular distance on the circle, in `[0, pi]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}
