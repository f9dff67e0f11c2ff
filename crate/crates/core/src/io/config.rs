//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors so that a
//! misspelt tolerance never silently falls back to its default.

use std::path::{Path, PathBuf};

use crate::depth::{FixedDepthSpec, VirtualDepthSpec};
use crate::error::{Error, Result};
use crate::geometry::{rig_center, CameraRig, GridSpec};
use crate::io::tensor_file::read_tensor_file;
use crate::tensor::Kernel;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Identities that hold up to rounding (reductions, plan vs naive, codec).
    pub exact: f64,
    /// Quarter-turn commutation residual.
    pub equivariance: f64,
    /// Finite-difference relative error.
    pub gradient: f64,
    /// Dot-product adjoint test.
    pub adjoint: f64,
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Multiple of the resampling baseline allowed in the revolving test.
    pub revolve_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-12,
            equivariance: 1e-9,
            gradient: 1e-5,
            adjoint: 1e-10,
            fd_step: 1e-5,
            revolve_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid_height: usize,
    pub grid_width: usize,
    pub resolution: f64,
    /// Ego coordinate of cell (0, 0); `None` centers the grid on the ego origin.
    pub origin: Option<Vec2>,
    pub rig: Option<PathBuf>,
    pub kernel_extent: usize,
    pub kernel_seed: u64,
    pub kernel_weights: Option<PathBuf>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub depth_bins: usize,
    pub virtual_depth_max: f64,
    pub virtual_focal: f64,
    pub fixed_depth_min: f64,
    pub fixed_depth_max: f64,
    pub fixed_depth_step: f64,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub bench_repetitions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_height: 64,
            grid_width: 64,
            resolution: 0.8,
            origin: None,
            rig: None,
            kernel_extent: 3,
            kernel_seed: 7,
            kernel_weights: None,
            in_channels: 8,
            out_channels: 8,
            depth_bins: 180,
            virtual_depth_max: 54.0,
            virtual_focal: 800.0,
            fixed_depth_min: 2.0,
            fixed_depth_max: 54.0,
            fixed_depth_step: 0.5,
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("out"),
            seed: 2024,
            bench_repetitions: 5,
        }
    }
}

impl RunConfig {
    /// Parses config text. Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, source_name: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let perr = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let resolve = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        let mut origin_x = None;
        let mut origin_y = None;
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(line_no, format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(perr(line_no, format!("duplicate key `{key}`")));
            }
            let float = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| perr(line_no, format!("`{key}`: invalid number `{value}`")))
            };
            let positive = || -> Result<f64> {
                let v = float()?;
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(perr(line_no, format!("`{key}` must be positive, got {v}")))
                }
            };
            let count = || -> Result<usize> {
                value
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| perr(line_no, format!("`{key}`: expected a positive integer, got `{value}`")))
            };
            let int = || -> Result<u64> {
                value
                    .parse::<u64>()
                    .map_err(|_| perr(line_no, format!("`{key}`: expected an unsigned integer, got `{value}`")))
            };
            match key {
                "grid_height" => cfg.grid_height = count()?,
                "grid_width" => cfg.grid_width = count()?,
                "grid_resolution" => cfg.resolution = positive()?,
                "grid_origin_x" => origin_x = Some(float()?),
                "grid_origin_y" => origin_y = Some(float()?),
                "rig" => cfg.rig = Some(resolve(value)),
                "kernel_extent" => {
                    let k = count()?;
                    if k.is_multiple_of(2) {
                        return Err(perr(line_no, format!("`kernel_extent` must be odd, got {k}")));
                    }
                    cfg.kernel_extent = k;
                }
                "kernel_seed" => cfg.kernel_seed = int()?,
                "kernel_weights" => cfg.kernel_weights = Some(resolve(value)),
                "in_channels" => cfg.in_channels = count()?,
                "out_channels" => cfg.out_channels = count()?,
                "depth_bins" => cfg.depth_bins = count()?,
                "virtual_depth_max" => cfg.virtual_depth_max = positive()?,
                "virtual_focal" => cfg.virtual_focal = positive()?,
                "fixed_depth_min" => cfg.fixed_depth_min = float()?,
                "fixed_depth_max" => cfg.fixed_depth_max = positive()?,
                "fixed_depth_step" => cfg.fixed_depth_step = positive()?,
                "tol_exact" => cfg.tolerances.exact = positive()?,
                "tol_equivariance" => cfg.tolerances.equivariance = positive()?,
                "tol_gradient" => cfg.tolerances.gradient = positive()?,
                "tol_adjoint" => cfg.tolerances.adjoint = positive()?,
                "fd_step" => cfg.tolerances.fd_step = positive()?,
                "revolve_factor" => cfg.tolerances.revolve_factor = positive()?,
                "output_dir" => cfg.output_dir = resolve(value),
                "seed" => cfg.seed = int()?,
                "bench_repetitions" => cfg.bench_repetitions = count()?,
                other => return Err(perr(line_no, format!("unknown key `{other}`"))),
            }
        }
        cfg.origin = match (origin_x, origin_y) {
            (Some(x), Some(y)) => Some(Vec2::new(x, y)),
            (None, None) => None,
            _ => {
                return Err(perr(0, "grid_origin_x and grid_origin_y must be given together".into()));
            }
        };
        // Cross-field validation.
        cfg.fixed_depth()?;
        cfg.virtual_depth()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), path.parent())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        match self.origin {
            Some(o) => GridSpec::new(self.grid_height, self.grid_width, self.resolution, o),
            None => GridSpec::centered(self.grid_height, self.grid_width, self.resolution, Vec2::ZERO),
        }
    }

    pub fn camera_rig(&self) -> Result<CameraRig> {
        match &self.rig {
            Some(p) => CameraRig::from_path(p),
            None => Ok(CameraRig::surround_default()),
        }
    }

    pub fn azimuth_center(&self) -> Result<Vec2> {
        Ok(rig_center(&self.camera_rig()?))
    }

    /// Kernel from `kernel_weights`, or drawn from `kernel_seed` with the
    /// configured channel counts.
    pub fn kernel(&self) -> Result<Kernel> {
        match &self.kernel_weights {
            Some(p) => read_tensor_file(p)?.into_kernel(),
            None => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.kernel_seed);
                Kernel::random(self.out_channels, self.in_channels, self.kernel_extent, &mut rng)
            }
        }
    }

    pub fn virtual_depth(&self) -> Result<VirtualDepthSpec> {
        VirtualDepthSpec::new(self.depth_bins, self.virtual_depth_max, self.virtual_focal)
    }

    pub fn fixed_depth(&self) -> Result<FixedDepthSpec> {
        FixedDepthSpec::new(self.fixed_depth_min, self.fixed_depth_max, self.fixed_depth_step)
    }
}
