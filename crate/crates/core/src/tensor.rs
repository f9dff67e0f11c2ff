//! Dense feature maps, bilinear sampling and the reference convolution.
//!
//! Layout is channel-major, then axis 0 (rows, ego-forward), then axis 1
//! (columns, ego-left). A continuous position `Vec2 { x, y }` addresses
//! `(row = x, col = y)` in cell units; cell centers sit on integer positions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::config(format!(
                "feature map {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("non-finite value at flat index {i}")));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for i in 0..height {
                for j in 0..width {
                    data.push(f(c, i, j));
                }
            }
        }
        FeatureMap {
            channels,
            height,
            width,
            data,
        }
    }

    /// Uniform values in [-1, 1).
    pub fn random(channels: usize, height: usize, width: usize, rng: &mut impl Rng) -> Self {
        Self::from_fn(channels, height, width, |_, _, _| rng.gen_range(-1.0..1.0))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        self.data[(c * self.height + i) * self.width + j] = v;
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    pub fn scaled(&self, a: f64) -> FeatureMap {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &FeatureMap, b: f64) -> Result<FeatureMap> {
        if !self.same_shape(other) {
            return Err(Error::config("axpby: shape mismatch"));
        }
        let mut out = self.clone();
        for (o, x) in out.data.iter_mut().zip(&other.data) {
            *o = a * *o + b * x;
        }
        Ok(out)
    }

    pub fn dot(&self, other: &FeatureMap) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> f64 {
        self.max_abs_diff_interior(other, 0)
    }

    /// Maximum absolute difference over cells at least `margin` cells away from
    /// every border.
    pub fn max_abs_diff_interior(&self, other: &FeatureMap, margin: usize) -> f64 {
        self.max_abs_diff_region(other, margin, None)
    }

    /// `||self - reference|| / ||reference||` over the interior region.
    /// Returns the absolute norm when the reference is identically zero.
    pub fn rel_l2_interior(&self, reference: &FeatureMap, margin: usize) -> f64 {
        self.rel_l2_region(reference, margin, None)
    }

    /// As [`Self::max_abs_diff_interior`], also skipping cell `skip` in every channel.
    pub fn max_abs_diff_region(&self, other: &FeatureMap, margin: usize, skip: Option<(usize, usize)>) -> f64 {
        assert!(self.same_shape(other), "shape mismatch");
        let mut worst: f64 = 0.0;
        self.for_region(margin, skip, |idx| {
            worst = worst.max((self.data[idx] - other.data[idx]).abs());
        });
        worst
    }

    /// As [`Self::rel_l2_interior`], also skipping cell `skip` in every channel.
    pub fn rel_l2_region(&self, reference: &FeatureMap, margin: usize, skip: Option<(usize, usize)>) -> f64 {
        assert!(self.same_shape(reference), "shape mismatch");
        let mut diff = 0.0;
        let mut norm = 0.0;
        self.for_region(margin, skip, |idx| {
            let d = self.data[idx] - reference.data[idx];
            diff += d * d;
            norm += reference.data[idx] * reference.data[idx];
        });
        if norm == 0.0 {
            diff.sqrt()
        } else {
            (diff / norm).sqrt()
        }
    }

    fn for_region(&self, margin: usize, skip: Option<(usize, usize)>, mut f: impl FnMut(usize)) {
        if 2 * margin >= self.height || 2 * margin >= self.width {
            return;
        }
        for c in 0..self.channels {
            for i in margin..self.height - margin {
                for j in margin..self.width - margin {
                    if skip != Some((i, j)) {
                        f((c * self.height + i) * self.width + j);
                    }
                }
            }
        }
    }
}

/// Convolution weights over the centered `k x k` integer grid.
///
/// Weights are stored `[out][in][a][b]`, where tap `(a, b)` has offset
/// `(a - r, b - r)` with `r = (k - 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    out_channels: usize,
    in_channels: usize,
    k: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(out_channels: usize, in_channels: usize, k: usize, weights: Vec<f64>) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::config(format!("kernel extent must be odd, got {k}")));
        }
        let n = out_channels * in_channels * k * k;
        if weights.len() != n {
            return Err(Error::config(format!(
                "kernel {out_channels}x{in_channels}x{k}x{k} needs {n} weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("kernel weights must be finite"));
        }
        Ok(Kernel {
            out_channels,
            in_channels,
            k,
            weights,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, k: usize) -> Result<Self> {
        Self::new(
            out_channels,
            in_channels,
            k,
            vec![0.0; out_channels * in_channels * k * k],
        )
    }

    /// 1x1 kernel mapping channel `c` to channel `c`.
    pub fn identity(channels: usize) -> Self {
        let mut weights = vec![0.0; channels * channels];
        for c in 0..channels {
            weights[c * channels + c] = 1.0;
        }
        Kernel {
            out_channels: channels,
            in_channels: channels,
            k: 1,
            weights,
        }
    }

    pub fn random(out_channels: usize, in_channels: usize, k: usize, rng: &mut impl Rng) -> Result<Self> {
        let n = out_channels * in_channels * k * k;
        Self::new(
            out_channels,
            in_channels,
            k,
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn extent(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> usize {
        self.k / 2
    }

    pub fn taps(&self) -> usize {
        self.k * self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    pub fn weight(&self, o: usize, c: usize, tap: usize) -> f64 {
        self.weights[(o * self.in_channels + c) * self.k * self.k + tap]
    }

    /// The regular sampling grid in tap order.
    pub fn offsets(&self) -> Vec<Vec2> {
        regular_offsets(self.k)
    }

    pub fn scaled(&self, a: f64) -> Kernel {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= a);
        out
    }

    /// Adjoint kernel of the zero-padded correlation: channels swapped and the
    /// spatial taps reversed.
    pub fn flipped_transpose(&self) -> Kernel {
        let kk = self.taps();
        let mut weights = vec![0.0; self.weights.len()];
        for o in 0..self.out_channels {
            for c in 0..self.in_channels {
                for t in 0..kk {
                    weights[(c * self.out_channels + o) * kk + (kk - 1 - t)] = self.weight(o, c, t);
                }
            }
        }
        Kernel {
            out_channels: self.in_channels,
            in_channels: self.out_channels,
            k: self.k,
            weights,
        }
    }
}

/// Centered integer offsets `{-(k-1)/2 .. (k-1)/2}^2`, axis 1 fastest.
pub fn regular_offsets(k: usize) -> Vec<Vec2> {
    let r = (k / 2) as i64;
    let mut out = Vec::with_capacity(k * k);
    for a in -r..=r {
        for b in -r..=r {
            out.push(Vec2::new(a as f64, b as f64));
        }
    }
    out
}

/// Bilinear interpolation with zero padding outside the map.
pub fn bilinear_sample(map: &FeatureMap, channel: usize, pos: Vec2) -> f64 {
    let plane = map.plane(channel);
    let taps = bilinear_taps(map.height, map.width, pos);
    taps.iter().map(|&(idx, w)| w * plane[idx]).sum()
}

/// The four `(flat index, weight)` contributions of a bilinear sample. Corners
/// falling outside the map get weight 0 and index 0.
#[inline]
pub fn bilinear_taps(height: usize, width: usize, pos: Vec2) -> [(usize, f64); 4] {
    let x0 = pos.x.floor();
    let y0 = pos.y.floor();
    let fx = pos.x - x0;
    let fy = pos.y - y0;
    let corners = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0, y0 + 1.0, (1.0 - fx) * fy),
        (x0 + 1.0, y0, fx * (1.0 - fy)),
        (x0 + 1.0, y0 + 1.0, fx * fy),
    ];
    corners.map(|(i, j, w)| {
        if i >= 0.0 && j >= 0.0 && (i as usize) < height && (j as usize) < width {
            (i as usize * width + j as usize, w)
        } else {
            (0, 0.0)
        }
    })
}

/// Rotates the content of `map` counter-clockwise by `angle` about `center`
/// (continuous cell coordinates): `out(p) = in(R(-angle)(p - center) + center)`.
pub fn rotate_resample(map: &FeatureMap, angle: f64, center: Vec2) -> FeatureMap {
    let (h, w) = (map.height, map.width);
    let mut out = FeatureMap::zeros(map.channels, h, w);
    let mut taps = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let p = Vec2::new(i as f64, j as f64);
            let src = (p - center).rotate(-angle) + center;
            taps.push(bilinear_taps(h, w, Vec2::new(snap(src.x), snap(src.y))));
        }
    }
    for c in 0..map.channels {
        let src = map.plane(c);
        for (dst, t) in out.plane_mut(c).iter_mut().zip(&taps) {
            *dst = t.iter().map(|&(idx, wt)| wt * src[idx]).sum();
        }
    }
    out
}

/// Rounds coordinates within 1e-10 of an integer so that quarter turns about a
/// cell center land exactly on the lattice despite `cos(pi/2) != 0`.
#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-10 {
        r
    } else {
        v
    }
}

/// Zero-padded, stride-1, dilation-1 correlation with same-size output.
pub fn standard_conv(map: &FeatureMap, kernel: &Kernel) -> Result<FeatureMap> {
    if kernel.in_channels != map.channels {
        return Err(Error::config(format!(
            "kernel expects {} input channels, map has {}",
            kernel.in_channels, map.channels
        )));
    }
    let (h, w) = (map.height as i64, map.width as i64);
    let r = kernel.radius() as i64;
    let k = kernel.k;
    let mut out = FeatureMap::zeros(kernel.out_channels, map.height, map.width);
    for o in 0..kernel.out_channels {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for c in 0..kernel.in_channels {
                    for a in 0..k {
                        let si = i + a as i64 - r;
                        if si < 0 || si >= h {
                            continue;
                        }
                        for b in 0..k {
                            let sj = j + b as i64 - r;
                            if sj < 0 || sj >= w {
                                continue;
                            }
                            acc += kernel.weight(o, c, a * k + b) * map.get(c, si as usize, sj as usize);
                        }
                    }
                }
                out.set(o, i as usize, j as usize, acc);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent brute-force correlation over explicit tap offsets.
    fn brute_conv(x: &FeatureMap, k: &Kernel) -> FeatureMap {
        let offs = regular_offsets(k.extent());
        FeatureMap::from_fn(k.out_channels(), x.height(), x.width(), |o, i, j| {
            let mut s = 0.0;
            for c in 0..x.channels() {
                for (t, off) in offs.iter().enumerate() {
                    let si = i as f64 + off.x;
                    let sj = j as f64 + off.y;
                    if si >= 0.0 && sj >= 0.0 && (si as usize) < x.height() && (sj as usize) < x.width() {
                        s += k.weight(o, c, t) * x.get(c, si as usize, sj as usize);
                    }
                }
            }
            s
        })
    }

    #[test]
    fn offsets_follow_regular_grid_order() {
        let offs = regular_offsets(3);
        assert_eq!(offs.len(), 9);
        assert_eq!(offs[0], Vec2::new(-1.0, -1.0));
        assert_eq!(offs[1], Vec2::new(-1.0, 0.0));
        assert_eq!(offs[7], Vec2::new(1.0, 0.0));
        assert_eq!(offs[8], Vec2::new(1.0, 1.0));
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(Kernel::zeros(1, 1, 2).is_err());
    }

    #[test]
    fn bilinear_exact_at_integer_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = FeatureMap::random(1, 5, 6, &mut rng);
        assert_eq!(bilinear_sample(&m, 0, Vec2::new(2.0, 3.0)), m.get(0, 2, 3));
        assert_eq!(bilinear_sample(&m, 0, Vec2::new(4.0, 5.0)), m.get(0, 4, 5));
    }

    #[test]
    fn bilinear_midpoint_is_mean() {
        let m = FeatureMap::from_vec(1, 2, 2, vec![1.0, 2.0, 3.0, 7.0]).unwrap();
        assert!((bilinear_sample(&m, 0, Vec2::new(0.5, 0.5)) - 13.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn bilinear_zero_padding_far_outside() {
        let m = FeatureMap::from_fn(2, 4, 4, |_, _, _| 3.0);
        assert_eq!(bilinear_sample(&m, 1, Vec2::new(-5.0, -5.0)), 0.0);
        assert_eq!(bilinear_sample(&m, 1, Vec2::new(10.0, 1.0)), 0.0);
        // Half a cell outside the last row blends with padding.
        assert!((bilinear_sample(&m, 0, Vec2::new(3.5, 1.0)) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn bilinear_reproduces_linear_maps() {
        let m = FeatureMap::from_fn(1, 6, 6, |_, i, j| 2.0 * i as f64 - 0.5 * j as f64 + 1.0);
        for &(x, y) in &[(0.5, 0.5), (1.25, 3.75), (4.9, 0.1), (2.0, 2.5)] {
            let expect = 2.0 * x - 0.5 * y + 1.0;
            assert!((bilinear_sample(&m, 0, Vec2::new(x, y)) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn rotate_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = FeatureMap::random(2, 7, 9, &mut rng);
        assert_eq!(rotate_resample(&m, 0.0, Vec2::new(3.0, 4.0)), m);
    }

    #[test]
    fn rotate_quarter_turn_is_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 9;
        let m = FeatureMap::random(2, n, n, &mut rng);
        let c = (n / 2) as f64;
        let r = rotate_resample(&m, std::f64::consts::FRAC_PI_2, Vec2::new(c, c));
        // out(i, j) = in(R(-90)(p - c) + c): R(-90)(dx, dy) = (dy, -dx).
        let expect = FeatureMap::from_fn(2, n, n, |ch, i, j| m.get(ch, j, n - 1 - i));
        assert_eq!(r.max_abs_diff(&expect), 0.0);
    }

    #[test]
    fn rotate_round_trip_on_smooth_map() {
        let n = 41;
        let c = 20.0;
        let m = FeatureMap::from_fn(1, n, n, |_, i, j| {
            let (dx, dy) = (i as f64 - c, j as f64 - c);
            (-(dx * dx + dy * dy) / (2.0 * 36.0)).exp() * (1.0 + 0.3 * (dx / 6.0).sin())
        });
        let center = Vec2::new(c, c);
        let back = rotate_resample(&rotate_resample(&m, 0.7, center), -0.7, center);
        let err = back.rel_l2_interior(&m, 0);
        assert!(err <= 1e-2, "round trip rel l2 {err}");
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = FeatureMap::random(3, 5, 5, &mut rng);
        assert_eq!(standard_conv(&m, &Kernel::identity(3)).unwrap(), m);
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = FeatureMap::random(2, 5, 5, &mut rng);
        let out = standard_conv(&m, &Kernel::zeros(4, 2, 3).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.channels(), 4);
    }

    #[test]
    fn standard_conv_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = FeatureMap::random(1, 5, 5, &mut rng);
        let k = Kernel::random(1, 1, 3, &mut rng).unwrap();
        let got = standard_conv(&m, &k).unwrap();
        assert!(got.max_abs_diff(&brute_conv(&m, &k)) <= 1e-12);
        let m = FeatureMap::random(3, 6, 4, &mut rng);
        let k = Kernel::random(2, 3, 5, &mut rng).unwrap();
        assert!(standard_conv(&m, &k).unwrap().max_abs_diff(&brute_conv(&m, &k)) <= 1e-12);
    }

    #[test]
    fn standard_conv_channel_mismatch() {
        let m = FeatureMap::zeros(2, 3, 3);
        assert!(matches!(
            standard_conv(&m, &Kernel::zeros(1, 3, 3).unwrap()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(FeatureMap::from_vec(1, 1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(FeatureMap::from_vec(1, 1, 2, vec![1.0]).is_err());
    }
}
