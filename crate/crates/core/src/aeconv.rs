//! Azimuth-equivariant convolution.
//!
//! At each output cell `q` the regular offsets `p = (a, b)` are re-expressed in
//! the local radial frame, `p_rot = a * e_r(q) + b * e_o(q)`, and the input is
//! sampled bilinearly at `q + p_rot`. The weight for offset `p` stays attached
//! to `p`; only its sampling position moves. With `e_r = +x`, `e_o = +y`
//! everywhere this is the ordinary zero-padded correlation.
//!
//! Because the field does not depend on the features, the four bilinear
//! corners and weights of every tap are computed once into a [`GatherPlan`]
//! and reused by the forward and backward passes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, RadialBasisField};
use crate::tensor::{bilinear_sample, bilinear_taps, regular_offsets, FeatureMap, Kernel};
use crate::vec2::Vec2;

fn check_conv_shapes(map: &FeatureMap, kernel: &Kernel, h: usize, w: usize) -> Result<()> {
    if kernel.in_channels() != map.channels() {
        return Err(Error::config(format!(
            "kernel expects {} input channels, map has {}",
            kernel.in_channels(),
            map.channels()
        )));
    }
    if map.height() != h || map.width() != w {
        return Err(Error::config(format!(
            "map is {}x{} but the sampling field is {h}x{w}",
            map.height(),
            map.width()
        )));
    }
    Ok(())
}

/// Direct evaluation, one bilinear sample per (cell, channel, tap). Sequential
/// and deterministic; used as the reference for the planned path.
pub fn aeconv_forward_naive(map: &FeatureMap, kernel: &Kernel, field: &RadialBasisField) -> Result<FeatureMap> {
    check_conv_shapes(map, kernel, field.height(), field.width())?;
    let offsets = kernel.offsets();
    let mut out = FeatureMap::zeros(kernel.out_channels(), map.height(), map.width());
    for o in 0..kernel.out_channels() {
        for i in 0..map.height() {
            for j in 0..map.width() {
                let q = Vec2::new(i as f64, j as f64);
                let (er, eo) = field.basis(i, j);
                let mut acc = 0.0;
                for c in 0..map.channels() {
                    for (t, p) in offsets.iter().enumerate() {
                        let pos = q + er * p.x + eo * p.y;
                        acc += kernel.weight(o, c, t) * bilinear_sample(map, c, pos);
                    }
                }
                out.set(o, i, j, acc);
            }
        }
    }
    Ok(out)
}

/// Precomputed bilinear gather for every (output cell, tap).
#[derive(Debug, Clone, PartialEq)]
pub struct GatherPlan {
    height: usize,
    width: usize,
    k: usize,
    indices: Vec<[u32; 4]>,
    weights: Vec<[f64; 4]>,
}

impl GatherPlan {
    pub fn build(field: &RadialBasisField, k: usize) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::config(format!("kernel extent must be odd, got {k}")));
        }
        let (h, w) = (field.height(), field.width());
        if h * w > u32::MAX as usize {
            return Err(Error::config("grid too large for 32-bit gather indices"));
        }
        let offsets = regular_offsets(k);
        let kk = offsets.len();
        let mut indices = vec![[0u32; 4]; h * w * kk];
        let mut weights = vec![[0.0f64; 4]; h * w * kk];
        indices
            .par_chunks_mut(w * kk)
            .zip(weights.par_chunks_mut(w * kk))
            .enumerate()
            .for_each(|(i, (idx_row, wt_row))| {
                for j in 0..w {
                    let q = Vec2::new(i as f64, j as f64);
                    let (er, eo) = field.basis(i, j);
                    for (t, p) in offsets.iter().enumerate() {
                        let taps = bilinear_taps(h, w, q + er * p.x + eo * p.y);
                        let slot = j * kk + t;
                        for (n, (src, wt)) in taps.into_iter().enumerate() {
                            idx_row[slot][n] = src as u32;
                            wt_row[slot][n] = wt;
                        }
                    }
                }
            });
        Ok(GatherPlan {
            height: h,
            width: w,
            k,
            indices,
            weights,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn extent(&self) -> usize {
        self.k
    }

    pub fn taps_per_cell(&self) -> usize {
        self.k * self.k
    }

    /// Total number of (cell, tap) entries.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Source indices and weights of tap `t` at cell `(i, j)`.
    pub fn entry(&self, i: usize, j: usize, t: usize) -> ([u32; 4], [f64; 4]) {
        let slot = (i * self.width + j) * self.taps_per_cell() + t;
        (self.indices[slot], self.weights[slot])
    }

    pub fn weights(&self) -> &[[f64; 4]] {
        &self.weights
    }

    /// Bilinear samples of every channel and tap at `cell`, laid out
    /// `[c * kk + t]`.
    #[inline]
    fn gather_cell(&self, map: &FeatureMap, cell: usize, cols: &mut [f64]) {
        let kk = self.taps_per_cell();
        let base = cell * kk;
        for c in 0..map.channels() {
            let plane = map.plane(c);
            for t in 0..kk {
                let idx = &self.indices[base + t];
                let wt = &self.weights[base + t];
                cols[c * kk + t] = wt[0] * plane[idx[0] as usize]
                    + wt[1] * plane[idx[1] as usize]
                    + wt[2] * plane[idx[2] as usize]
                    + wt[3] * plane[idx[3] as usize];
            }
        }
    }
}

/// Builds the plan after checking that `grid` and `field` describe the same
/// lattice.
pub fn build_gather_plan(field: &RadialBasisField, k: usize, grid: &GridSpec) -> Result<GatherPlan> {
    if grid.height != field.height() || grid.width != field.width() {
        return Err(Error::config(format!(
            "grid {}x{} does not match field {}x{}",
            grid.height,
            grid.width,
            field.height(),
            field.width()
        )));
    }
    GatherPlan::build(field, k)
}

fn check_plan(map: &FeatureMap, kernel: &Kernel, plan: &GatherPlan) -> Result<()> {
    check_conv_shapes(map, kernel, plan.height, plan.width)?;
    if kernel.extent() != plan.k {
        return Err(Error::config(format!(
            "kernel extent {} does not match plan extent {}",
            kernel.extent(),
            plan.k
        )));
    }
    Ok(())
}

/// Forward pass through a prebuilt plan. Parallel over rows; each output value
/// is summed in the same order as the naive path.
pub fn aeconv_forward_planned(map: &FeatureMap, kernel: &Kernel, plan: &GatherPlan) -> Result<FeatureMap> {
    check_plan(map, kernel, plan)?;
    let (h, w) = (plan.height, plan.width);
    let kk = plan.taps_per_cell();
    let cin = map.channels();
    let cout = kernel.out_channels();
    let wts = kernel.weights();
    let row_len = cin * kk;

    // Cell-major scratch, transposed into channel-major afterwards.
    let mut cell_major = vec![0.0; h * w * cout];
    cell_major.par_chunks_mut(w * cout).enumerate().for_each(|(i, row)| {
        let mut cols = vec![0.0; row_len];
        for j in 0..w {
            plan.gather_cell(map, i * w + j, &mut cols);
            for o in 0..cout {
                let wo = &wts[o * row_len..(o + 1) * row_len];
                row[j * cout + o] = wo.iter().zip(&cols).map(|(a, b)| a * b).sum();
            }
        }
    });

    let mut out = FeatureMap::zeros(cout, h, w);
    for o in 0..cout {
        for (cell, dst) in out.plane_mut(o).iter_mut().enumerate() {
            *dst = cell_major[cell * cout + o];
        }
    }
    Ok(out)
}

/// Gradients of a scalar loss given `upstream_grad = dL/d(output)`.
///
/// Returns `(dL/d(input), dL/d(weights))`; both are exact adjoints of the
/// forward map, which is linear in each argument.
pub fn aeconv_backward(
    map: &FeatureMap,
    kernel: &Kernel,
    plan: &GatherPlan,
    upstream_grad: &FeatureMap,
) -> Result<(FeatureMap, Kernel)> {
    check_plan(map, kernel, plan)?;
    if upstream_grad.channels() != kernel.out_channels()
        || upstream_grad.height() != plan.height
        || upstream_grad.width() != plan.width
    {
        return Err(Error::config(format!(
            "upstream gradient is {}x{}x{}, expected {}x{}x{}",
            upstream_grad.channels(),
            upstream_grad.height(),
            upstream_grad.width(),
            kernel.out_channels(),
            plan.height,
            plan.width
        )));
    }
    let (h, w) = (plan.height, plan.width);
    let kk = plan.taps_per_cell();
    let cin = map.channels();
    let cout = kernel.out_channels();
    let row_len = cin * kk;

    // Weight gradient: per-row partial sums, reduced in row order.
    let partials: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; cout * row_len];
            let mut cols = vec![0.0; row_len];
            for j in 0..w {
                let cell = i * w + j;
                plan.gather_cell(map, cell, &mut cols);
                for o in 0..cout {
                    let g = upstream_grad.plane(o)[cell];
                    if g == 0.0 {
                        continue;
                    }
                    for (a, s) in acc[o * row_len..(o + 1) * row_len].iter_mut().zip(&cols) {
                        *a += g * s;
                    }
                }
            }
            acc
        })
        .collect();
    let mut wgrad = vec![0.0; cout * row_len];
    for p in &partials {
        for (a, b) in wgrad.iter_mut().zip(p) {
            *a += b;
        }
    }

    // Input gradient: scatter per input channel.
    let mut input_grad = FeatureMap::zeros(cin, h, w);
    let n = h * w;
    let wts = kernel.weights();
    input_grad
        .data_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(c, dst)| {
            for cell in 0..n {
                let base = cell * kk;
                for t in 0..kk {
                    let mut g = 0.0;
                    for o in 0..cout {
                        g += upstream_grad.plane(o)[cell] * wts[o * row_len + c * kk + t];
                    }
                    if g == 0.0 {
                        continue;
                    }
                    let idx = &plan.indices[base + t];
                    let wt = &plan.weights[base + t];
                    for m in 0..4 {
                        dst[idx[m] as usize] += wt[m] * g;
                    }
                }
            }
        });

    let weight_grad = Kernel::new(cout, cin, kernel.extent(), wgrad)?;
    Ok((input_grad, weight_grad))
}
