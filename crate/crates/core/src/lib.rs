//! Numerical kernels for azimuth-aware bird's-eye-view perception.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense feature maps, bilinear sampling, rotation resampling and
//!   the reference zero-padded convolution.
//! * [`geometry`]: camera rigs, the shared azimuth center and the per-cell
//!   radial/tangential basis field.
//! * [`aeconv`]: the azimuth-equivariant convolution (naive reference, gather
//!   plan execution and analytic backward pass).
//! * [`anchor`]: regression targets expressed in the radial frame of an anchor.
//! * [`depth`]: virtual-depth bin layout and remapping to a fixed bin layout.
//! * [`revolve`]: synthetic scenes and the rotate-the-rig equivariance harness.
//! * [`io`], [`check`], [`bench`]: file formats, the property suite and timing.

pub mod aeconv;
pub mod anchor;
pub mod bench;
pub mod check;
pub mod depth;
pub mod error;
pub mod geometry;
pub mod io;
pub mod revolve;
pub mod tensor;
pub mod vec2;

pub use aeconv::{aeconv_backward, aeconv_forward_naive, aeconv_forward_planned, GatherPlan};
pub use anchor::{decode, encode, wrap_angle, AzimuthAnchor, BoxState, ResidualState};
pub use depth::{DepthMapping, FixedDepthSpec, VirtualDepthSpec};
pub use error::{Error, Result};
pub use geometry::{CameraRig, GridSpec, RadialBasisField};
pub use tensor::{FeatureMap, Kernel};
pub use vec2::Vec2;
