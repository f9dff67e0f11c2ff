//! Camera-decoupled depth bins.
//!
//! A depth network predicts scores over `M` uniform bins of `[0, d_v]` as if
//! every camera had focal length `f_v`. For a camera with RMS focal `f_r` each
//! virtual bin spans `(f_r / f_v) * d_v / M` meters of real depth; the scores
//! are then linearly resampled onto a fixed bin layout over `[d_f1, d_f2]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualDepthSpec {
    pub bins: usize,
    pub max_depth: f64,
    pub focal: f64,
}

impl Default for VirtualDepthSpec {
    fn default() -> Self {
        VirtualDepthSpec {
            bins: 180,
            max_depth: 54.0,
            focal: 800.0,
        }
    }
}

impl VirtualDepthSpec {
    pub fn new(bins: usize, max_depth: f64, focal: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("virtual depth needs at least one bin"));
        }
        if !(max_depth > 0.0 && max_depth.is_finite()) {
            return Err(Error::config(format!(
                "virtual depth range must be positive, got {max_depth}"
            )));
        }
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::config(format!(
                "virtual focal length must be positive, got {focal}"
            )));
        }
        Ok(VirtualDepthSpec { bins, max_depth, focal })
    }

    pub fn bin_size(&self) -> f64 {
        self.max_depth / self.bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let step = self.bin_size();
        (0..self.bins).map(|j| (j as f64 + 0.5) * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedDepthSpec {
    pub min_depth: f64,
    pub max_depth: f64,
    pub bin_size: f64,
    bins: usize,
}

impl Default for FixedDepthSpec {
    fn default() -> Self {
        FixedDepthSpec::new(2.0, 54.0, 0.5).expect("default fixed depth layout is valid")
    }
}

impl FixedDepthSpec {
    /// The range must split into a whole number of bins.
    pub fn new(min_depth: f64, max_depth: f64, bin_size: f64) -> Result<Self> {
        if !(min_depth.is_finite() && max_depth.is_finite() && min_depth >= 0.0 && min_depth < max_depth) {
            return Err(Error::config(format!(
                "fixed depth range must satisfy 0 <= d_f1 < d_f2, got [{min_depth}, {max_depth}]"
            )));
        }
        if !(bin_size > 0.0 && bin_size.is_finite()) {
            return Err(Error::config(format!(
                "fixed bin size must be positive, got {bin_size}"
            )));
        }
        let n = (max_depth - min_depth) / bin_size;
        let rounded = n.round();
        if rounded < 1.0 || (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::config(format!(
                "fixed range [{min_depth}, {max_depth}] is not a whole number of {bin_size} m bins"
            )));
        }
        Ok(FixedDepthSpec {
            min_depth,
            max_depth,
            bin_size,
            bins: rounded as usize,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|i| self.min_depth + (i as f64 + 0.5) * self.bin_size)
            .collect()
    }
}

/// RMS of the two focal lengths.
pub fn real_focal(fx: f64, fy: f64) -> Result<f64> {
    if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
        return Err(Error::config(format!(
            "focal lengths must be positive, got fx={fx}, fy={fy}"
        )));
    }
    Ok(((fx * fx + fy * fy) / 2.0).sqrt())
}

/// Real-depth extent of one virtual bin for a camera with focal `f_r`.
///
/// Focal lengths below the virtual focal shrink the mapped range under `d_v`
/// and are rejected.
pub fn real_bin_size(vspec: &VirtualDepthSpec, f_r: f64) -> Result<f64> {
    if !(f_r.is_finite() && f_r >= vspec.focal) {
        return Err(Error::Coverage(format!(
            "real focal {f_r} px is below the virtual focal {} px; mapped range would not cover d_v = {} m",
            vspec.focal, vspec.max_depth
        )));
    }
    Ok(f_r / vspec.focal * vspec.bin_size())
}

/// Linear interpolation of `s_v` at the fractional bin coordinates
/// `(d_f1 + i * step) / real_bin` for each fixed bin `i`.
pub fn map_scores(s_v: &[f64], fspec: &FixedDepthSpec, real_bin: f64) -> Result<Vec<f64>> {
    let plan = sample_plan(s_v.len(), fspec, real_bin)?;
    Ok(apply_plan(&plan, s_v))
}

fn sample_plan(virtual_bins: usize, fspec: &FixedDepthSpec, real_bin: f64) -> Result<Vec<(usize, f64)>> {
    if !(real_bin > 0.0 && real_bin.is_finite()) {
        return Err(Error::config(format!("real bin size must be positive, got {real_bin}")));
    }
    if virtual_bins == 0 {
        return Err(Error::config("empty virtual score vector"));
    }
    let covered = virtual_bins as f64 * real_bin;
    if covered < fspec.max_depth {
        return Err(Error::Coverage(format!(
            "{virtual_bins} bins of {real_bin} m reach {covered} m, short of d_f2 = {} m",
            fspec.max_depth
        )));
    }
    let last = (virtual_bins - 1) as f64;
    (0..fspec.bins)
        .map(|i| {
            let u = (fspec.min_depth + i as f64 * fspec.bin_size) / real_bin;
            if u > last {
                return Err(Error::Coverage(format!(
                    "fixed bin {i} reads virtual coordinate {u}, past the last bin {last}"
                )));
            }
            let j = u.floor();
            Ok((j as usize, u - j))
        })
        .collect()
}

fn apply_plan(plan: &[(usize, f64)], s_v: &[f64]) -> Vec<f64> {
    plan.iter()
        .map(|&(j, frac)| {
            if frac == 0.0 {
                s_v[j]
            } else {
                (1.0 - frac) * s_v[j] + frac * s_v[j + 1]
            }
        })
        .collect()
}

/// Per-camera mapping with the interpolation coordinates precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMapping {
    pub vspec: VirtualDepthSpec,
    pub fspec: FixedDepthSpec,
    pub real_focal: f64,
    pub real_bin: f64,
    plan: Vec<(usize, f64)>,
}

impl DepthMapping {
    pub fn new(vspec: VirtualDepthSpec, fspec: FixedDepthSpec, fx: f64, fy: f64) -> Result<Self> {
        let f_r = real_focal(fx, fy)?;
        let real_bin = real_bin_size(&vspec, f_r)?;
        let plan = sample_plan(vspec.bins, &fspec, real_bin)?;
        Ok(DepthMapping {
            vspec,
            fspec,
            real_focal: f_r,
            real_bin,
            plan,
        })
    }

    /// `(lower virtual bin, fraction)` read by each fixed bin.
    pub fn sample_points(&self) -> &[(usize, f64)] {
        &self.plan
    }

    pub fn apply(&self, s_v: &[f64]) -> Result<Vec<f64>> {
        if s_v.len() != self.vspec.bins {
            return Err(Error::config(format!(
                "expected {} virtual scores, got {}",
                self.vspec.bins,
                s_v.len()
            )));
        }
        if s_v.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("virtual scores must be finite"));
        }
        Ok(apply_plan(&self.plan, s_v))
    }
}
