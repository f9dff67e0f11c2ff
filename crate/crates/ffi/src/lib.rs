//! C ABI over `azimuth-core`.
//!
//! Every entry point returns an [`AzStatus`]; results are written through out
//! pointers. Objects with internal state are handed out as opaque handles that
//! must be released with the matching `*_free` function. Dense arrays are
//! row-major `f64`: feature maps `[channels][height][width]`, kernels
//! `[out][in][k][k]`.
//!
//! On failure a description is stored per thread and can be read with
//! [`az_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use azimuth_core::tensor::standard_conv;
use azimuth_core::{
    aeconv_backward, aeconv_forward_planned, decode, encode, AzimuthAnchor, BoxState, DepthMapping, Error, FeatureMap,
    FixedDepthSpec, GatherPlan, GridSpec, Kernel, RadialBasisField, ResidualState, Vec2, VirtualDepthSpec,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Coverage = 3,
    Format = 4,
    Io = 5,
    Parse = 6,
    Panic = 7,
}

/// Gather plan for one grid and azimuth center.
pub struct AzPlan {
    plan: GatherPlan,
    field: RadialBasisField,
    grid: GridSpec,
}

/// Precomputed virtual-to-fixed depth remapping for one camera.
pub struct AzDepthMapping {
    mapping: DepthMapping,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AzBox {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AzResidual {
    pub dr: f64,
    pub d_o: f64,
    pub dz: f64,
    pub dl: f64,
    pub dw: f64,
    pub dh: f64,
    pub dtheta: f64,
    pub vr: f64,
    pub vo: f64,
}

/// Anchor location, size and frame. The tangential axis is the radial axis
/// turned a quarter counter-clockwise.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AzAnchor {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub azimuth: f64,
    pub radial_x: f64,
    pub radial_y: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> AzStatus {
    match err {
        Error::Config(_) => AzStatus::InvalidArgument,
        Error::Coverage(_) => AzStatus::Coverage,
        Error::Format { .. } => AzStatus::Format,
        Error::Parse { .. } | Error::Csv(_) => AzStatus::Parse,
        Error::Io { .. } => AzStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), AzStatus>) -> AzStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AzStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_last_error("internal panic");
            AzStatus::Panic
        }
    }
}

fn fail(err: Error) -> AzStatus {
    set_last_error(&err.to_string());
    status_of(&err)
}

fn null(what: &str) -> AzStatus {
    set_last_error(&format!("`{what}` is null"));
    AzStatus::NullPointer
}

fn invalid(msg: &str) -> AzStatus {
    set_last_error(msg);
    AzStatus::InvalidArgument
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], AzStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], AzStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, AzStatus> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(ptr: *mut T, value: T, what: &str) -> Result<(), AzStatus> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

fn checked_len(dims: &[usize]) -> Result<usize, AzStatus> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| invalid("array size overflows"))
}

unsafe fn read_map(ptr: *const f64, c: usize, h: usize, w: usize, what: &str) -> Result<FeatureMap, AzStatus> {
    let data = slice(ptr, checked_len(&[c, h, w])?, what)?.to_vec();
    FeatureMap::from_vec(c, h, w, data).map_err(fail)
}

unsafe fn read_kernel(ptr: *const f64, o: usize, c: usize, k: usize) -> Result<Kernel, AzStatus> {
    let data = slice(ptr, checked_len(&[o, c, k, k])?, "kernel")?.to_vec();
    Kernel::new(o, c, k, data).map_err(fail)
}

/// Static description of a status code; unknown codes get a generic text.
#[no_mangle]
pub extern "C" fn az_status_message(status: i32) -> *const c_char {
    let s: &'static [u8] = match status {
        0 => b"ok\0",
        1 => b"null pointer argument\0",
        2 => b"invalid argument\0",
        3 => b"depth range not covered\0",
        4 => b"malformed data\0",
        5 => b"i/o failure\0",
        6 => b"parse failure\0",
        7 => b"internal panic\0",
        _ => b"unknown status\0",
    };
    s.as_ptr().cast()
}

/// Details of the last failure on this thread, or an empty string. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn az_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds the radial field about `(center_x, center_y)` over a
/// `height x width` grid whose cell `(0, 0)` sits at `(origin_x, origin_y)`
/// and its gather plan for `k x k` kernels.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn az_plan_new(
    height: usize,
    width: usize,
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
    center_x: f64,
    center_y: f64,
    k: usize,
    out: *mut *mut AzPlan,
) -> AzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = GridSpec::new(height, width, resolution, Vec2::new(origin_x, origin_y)).map_err(fail)?;
        let center = Vec2::new(center_x, center_y);
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(invalid("azimuth center must be finite"));
        }
        let field = RadialBasisField::radial(&grid, center);
        let plan = GatherPlan::build(&field, k).map_err(fail)?;
        out.write(Box::into_raw(Box::new(AzPlan { plan, field, grid })));
        Ok(())
    })
}

/// # Safety
/// `plan` must come from [`az_plan_new`] and not be used afterwards. Null is
/// accepted.
#[no_mangle]
pub unsafe extern "C" fn az_plan_free(plan: *mut AzPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `plan` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn az_plan_dims(
    plan: *const AzPlan,
    height: *mut usize,
    width: *mut usize,
    k: *mut usize,
) -> AzStatus {
    guard(|| {
        let p = deref(plan, "plan")?;
        for (ptr, v) in [(height, p.plan.height()), (width, p.plan.width()), (k, p.plan.extent())] {
            if !ptr.is_null() {
                ptr.write(v);
            }
        }
        Ok(())
    })
}

/// Zero-size anchor at cell `(i, j)` using the plan's frame at that cell.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn az_plan_anchor(
    plan: *const AzPlan,
    i: usize,
    j: usize,
    z: f64,
    out: *mut AzAnchor,
) -> AzStatus {
    guard(|| {
        let p = deref(plan, "plan")?;
        if i >= p.grid.height || j >= p.grid.width {
            return Err(invalid("cell index outside the grid"));
        }
        let a = AzimuthAnchor::from_field(&p.field, i, j, p.grid.cell_center(i, j), z);
        write_out(out, anchor_to_c(&a), "out")
    })
}

/// Forward pass: `input` is `[in_channels][h][w]`, `kernel`
/// `[out_channels][in_channels][k][k]`, `output` `[out_channels][h][w]`.
///
/// # Safety
/// All arrays must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn az_aeconv_forward(
    plan: *const AzPlan,
    input: *const f64,
    in_channels: usize,
    kernel: *const f64,
    out_channels: usize,
    output: *mut f64,
) -> AzStatus {
    guard(|| {
        let p = deref(plan, "plan")?;
        let (h, w, k) = (p.plan.height(), p.plan.width(), p.plan.extent());
        let x = read_map(input, in_channels, h, w, "input")?;
        let kern = read_kernel(kernel, out_channels, in_channels, k)?;
        let y = aeconv_forward_planned(&x, &kern, &p.plan).map_err(fail)?;
        slice_mut(output, checked_len(&[out_channels, h, w])?, "output")?.copy_from_slice(y.data());
        Ok(())
    })
}

/// Backward pass for upstream gradient `upstream` (shaped like the forward
/// output). Writes the input gradient and the weight gradient.
///
/// # Safety
/// All arrays must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn az_aeconv_backward(
    plan: *const AzPlan,
    input: *const f64,
    in_channels: usize,
    kernel: *const f64,
    out_channels: usize,
    upstream: *const f64,
    input_grad: *mut f64,
    weight_grad: *mut f64,
) -> AzStatus {
    guard(|| {
        let p = deref(plan, "plan")?;
        let (h, w, k) = (p.plan.height(), p.plan.width(), p.plan.extent());
        let x = read_map(input, in_channels, h, w, "input")?;
        let kern = read_kernel(kernel, out_channels, in_channels, k)?;
        let up = read_map(upstream, out_channels, h, w, "upstream")?;
        let (gx, gk) = aeconv_backward(&x, &kern, &p.plan, &up).map_err(fail)?;
        slice_mut(input_grad, gx.data().len(), "input_grad")?.copy_from_slice(gx.data());
        slice_mut(weight_grad, gk.weights().len(), "weight_grad")?.copy_from_slice(gk.weights());
        Ok(())
    })
}

/// Ordinary zero-padded cross-correlation on the regular grid.
///
/// # Safety
/// All arrays must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn az_standard_conv(
    height: usize,
    width: usize,
    input: *const f64,
    in_channels: usize,
    kernel: *const f64,
    out_channels: usize,
    k: usize,
    output: *mut f64,
) -> AzStatus {
    guard(|| {
        let x = read_map(input, in_channels, height, width, "input")?;
        let kern = read_kernel(kernel, out_channels, in_channels, k)?;
        let y = standard_conv(&x, &kern).map_err(fail)?;
        slice_mut(output, checked_len(&[out_channels, height, width])?, "output")?.copy_from_slice(y.data());
        Ok(())
    })
}

fn anchor_to_c(a: &AzimuthAnchor) -> AzAnchor {
    AzAnchor {
        x: a.location.x,
        y: a.location.y,
        z: a.z,
        l: a.size[0],
        w: a.size[1],
        h: a.size[2],
        azimuth: a.azimuth,
        radial_x: a.radial.x,
        radial_y: a.radial.y,
    }
}

fn anchor_from_c(a: &AzAnchor) -> Result<AzimuthAnchor, AzStatus> {
    let radial = Vec2::new(a.radial_x, a.radial_y);
    if ((radial.norm() - 1.0).abs() > 1e-9) || !a.azimuth.is_finite() {
        return Err(invalid("anchor radial axis must be a unit vector"));
    }
    Ok(AzimuthAnchor {
        location: Vec2::new(a.x, a.y),
        z: a.z,
        size: [a.l, a.w, a.h],
        azimuth: a.azimuth,
        radial,
        tangential: radial.perp(),
    })
}

fn box_from_c(b: &AzBox) -> BoxState {
    BoxState {
        center: Vec2::new(b.x, b.y),
        z: b.z,
        size: [b.l, b.w, b.h],
        orientation: b.theta,
        velocity: Vec2::new(b.vx, b.vy),
    }
}

fn box_to_c(b: &BoxState) -> AzBox {
    AzBox {
        x: b.center.x,
        y: b.center.y,
        z: b.z,
        l: b.size[0],
        w: b.size[1],
        h: b.size[2],
        theta: b.orientation,
        vx: b.velocity.x,
        vy: b.velocity.y,
    }
}

/// Zero-size anchor at `(x, y, z)` oriented along the azimuth seen from
/// `(center_x, center_y)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn az_anchor_implicit(
    x: f64,
    y: f64,
    z: f64,
    center_x: f64,
    center_y: f64,
    out: *mut AzAnchor,
) -> AzStatus {
    guard(|| {
        if ![x, y, z, center_x, center_y].iter().all(|v| v.is_finite()) {
            return Err(invalid("anchor coordinates must be finite"));
        }
        let a = AzimuthAnchor::implicit(Vec2::new(x, y), z, Vec2::new(center_x, center_y));
        write_out(out, anchor_to_c(&a), "out")
    })
}

/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn az_encode_box(b: *const AzBox, anchor: *const AzAnchor, out: *mut AzResidual) -> AzStatus {
    guard(|| {
        let b = box_from_c(deref(b, "box")?);
        let a = anchor_from_c(deref(anchor, "anchor")?)?;
        let r = encode(&b, &a);
        let res = AzResidual {
            dr: r.d_r,
            d_o: r.d_o,
            dz: r.d_z,
            dl: r.d_size[0],
            dw: r.d_size[1],
            dh: r.d_size[2],
            dtheta: r.d_theta,
            vr: r.v_r,
            vo: r.v_o,
        };
        write_out(out, res, "out")
    })
}

/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn az_decode_box(res: *const AzResidual, anchor: *const AzAnchor, out: *mut AzBox) -> AzStatus {
    guard(|| {
        let r = deref(res, "residual")?;
        let a = anchor_from_c(deref(anchor, "anchor")?)?;
        let state = ResidualState {
            d_theta: r.dtheta,
            d_r: r.dr,
            d_o: r.d_o,
            d_z: r.dz,
            d_size: [r.dl, r.dw, r.dh],
            v_r: r.vr,
            v_o: r.vo,
        };
        write_out(out, box_to_c(&decode(&state, &a)), "out")
    })
}

/// Remapping from `bins` virtual bins spanning `(0, max_depth]` at focal
/// `virtual_focal` onto fixed bins `[fixed_min, fixed_max)` of width
/// `fixed_step`, for a camera with focal lengths `fx`, `fy`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn az_depth_mapping_new(
    bins: usize,
    max_depth: f64,
    virtual_focal: f64,
    fixed_min: f64,
    fixed_max: f64,
    fixed_step: f64,
    fx: f64,
    fy: f64,
    out: *mut *mut AzDepthMapping,
) -> AzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = VirtualDepthSpec::new(bins, max_depth, virtual_focal).map_err(fail)?;
        let f = FixedDepthSpec::new(fixed_min, fixed_max, fixed_step).map_err(fail)?;
        let mapping = DepthMapping::new(v, f, fx, fy).map_err(fail)?;
        out.write(Box::into_raw(Box::new(AzDepthMapping { mapping })));
        Ok(())
    })
}

/// # Safety
/// `mapping` must come from [`az_depth_mapping_new`] and not be used
/// afterwards. Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn az_depth_mapping_free(mapping: *mut AzDepthMapping) {
    if !mapping.is_null() {
        drop(Box::from_raw(mapping));
    }
}

/// Number of virtual bins expected by [`az_depth_mapping_apply`], or 0 for a
/// null handle.
///
/// # Safety
/// `mapping` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn az_depth_mapping_virtual_len(mapping: *const AzDepthMapping) -> usize {
    mapping.as_ref().map_or(0, |m| m.mapping.vspec.bins)
}

/// Number of fixed bins written by [`az_depth_mapping_apply`], or 0 for a
/// null handle.
///
/// # Safety
/// `mapping` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn az_depth_mapping_fixed_len(mapping: *const AzDepthMapping) -> usize {
    mapping.as_ref().map_or(0, |m| m.mapping.fspec.bins())
}

/// Maps one score vector. `scores_len` and `out_len` must equal the virtual
/// and fixed bin counts.
///
/// # Safety
/// Arrays must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn az_depth_mapping_apply(
    mapping: *const AzDepthMapping,
    scores: *const f64,
    scores_len: usize,
    out: *mut f64,
    out_len: usize,
) -> AzStatus {
    guard(|| {
        let m = &deref(mapping, "mapping")?.mapping;
        if out_len != m.fspec.bins() {
            return Err(invalid(&format!(
                "output needs {} values, got {out_len}",
                m.fspec.bins()
            )));
        }
        let s = slice(scores, scores_len, "scores")?;
        let mapped = m.apply(s).map_err(fail)?;
        slice_mut(out, out_len, "out")?.copy_from_slice(&mapped);
        Ok(())
    })
}
