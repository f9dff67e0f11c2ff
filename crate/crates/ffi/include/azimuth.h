#ifndef AZIMUTH_H
#define AZIMUTH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AzStatus {
  AZ_STATUS_OK = 0,
  AZ_STATUS_NULL_POINTER = 1,
  AZ_STATUS_INVALID_ARGUMENT = 2,
  AZ_STATUS_COVERAGE = 3,
  AZ_STATUS_FORMAT = 4,
  AZ_STATUS_IO = 5,
  AZ_STATUS_PARSE = 6,
  AZ_STATUS_PANIC = 7,
} AzStatus;

/**
 * Precomputed virtual-to-fixed depth remapping for one camera.
 */
typedef struct AzDepthMapping AzDepthMapping;

/**
 * Gather plan for one grid and azimuth center.
 */
typedef struct AzPlan AzPlan;

/**
 * Anchor location, size and frame. The tangential axis is the radial axis
 * turned a quarter counter-clockwise.
 */
typedef struct AzAnchor {
  double x;
  double y;
  double z;
  double l;
  double w;
  double h;
  double azimuth;
  double radial_x;
  double radial_y;
} AzAnchor;

typedef struct AzBox {
  double x;
  double y;
  double z;
  double l;
  double w;
  double h;
  double theta;
  double vx;
  double vy;
} AzBox;

typedef struct AzResidual {
  double dr;
  double d_o;
  double dz;
  double dl;
  double dw;
  double dh;
  double dtheta;
  double vr;
  double vo;
} AzResidual;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code; unknown codes get a generic text.
 */
const char *az_status_message(int32_t status);

/**
 * Details of the last failure on this thread, or an empty string. Valid until
 * the next call into the library from the same thread.
 */
const char *az_last_error(void);

/**
 * Builds the radial field about `(center_x, center_y)` over a
 * `height x width` grid whose cell `(0, 0)` sits at `(origin_x, origin_y)`
 * and its gather plan for `k x k` kernels.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AzStatus az_plan_new(size_t height,
                          size_t width,
                          double resolution,
                          double origin_x,
                          double origin_y,
                          double center_x,
                          double center_y,
                          size_t k,
                          struct AzPlan **out);

/**
 * # Safety
 * `plan` must come from [`az_plan_new`] and not be used afterwards. Null is
 * accepted.
 */
void az_plan_free(struct AzPlan *plan);

/**
 * # Safety
 * `plan` must be a live handle; the out pointers may be null.
 */
enum AzStatus az_plan_dims(const struct AzPlan *plan, size_t *height, size_t *width, size_t *k);

/**
 * Zero-size anchor at cell `(i, j)` using the plan's frame at that cell.
 *
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum AzStatus az_plan_anchor(const struct AzPlan *plan,
                             size_t i,
                             size_t j,
                             double z,
                             struct AzAnchor *out);

/**
 * Forward pass: `input` is `[in_channels][h][w]`, `kernel`
 * `[out_channels][in_channels][k][k]`, `output` `[out_channels][h][w]`.
 *
 * # Safety
 * All arrays must hold the stated number of values.
 */
enum AzStatus az_aeconv_forward(const struct AzPlan *plan,
                                const double *input,
                                size_t in_channels,
                                const double *kernel,
                                size_t out_channels,
                                double *output);

/**
 * Backward pass for upstream gradient `upstream` (shaped like the forward
 * output). Writes the input gradient and the weight gradient.
 *
 * # Safety
 * All arrays must hold the stated number of values.
 */
enum AzStatus az_aeconv_backward(const struct AzPlan *plan,
                                 const double *input,
                                 size_t in_channels,
                                 const double *kernel,
                                 size_t out_channels,
                                 const double *upstream,
                                 double *input_grad,
                                 double *weight_grad);

/**
 * Ordinary zero-padded cross-correlation on the regular grid.
 *
 * # Safety
 * All arrays must hold the stated number of values.
 */
enum AzStatus az_standard_conv(size_t height,
                               size_t width,
                               const double *input,
                               size_t in_channels,
                               const double *kernel,
                               size_t out_channels,
                               size_t k,
                               double *output);

/**
 * Zero-size anchor at `(x, y, z)` oriented along the azimuth seen from
 * `(center_x, center_y)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AzStatus az_anchor_implicit(double x,
                                 double y,
                                 double z,
                                 double center_x,
                                 double center_y,
                                 struct AzAnchor *out);

/**
 * # Safety
 * Pointers must be valid; `out` writable.
 */
enum AzStatus az_encode_box(const struct AzBox *b,
                            const struct AzAnchor *anchor,
                            struct AzResidual *out);

/**
 * # Safety
 * Pointers must be valid; `out` writable.
 */
enum AzStatus az_decode_box(const struct AzResidual *res,
                            const struct AzAnchor *anchor,
                            struct AzBox *out);

/**
 * Remapping from `bins` virtual bins spanning `(0, max_depth]` at focal
 * `virtual_focal` onto fixed bins `[fixed_min, fixed_max)` of width
 * `fixed_step`, for a camera with focal lengths `fx`, `fy`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AzStatus az_depth_mapping_new(size_t bins,
                                   double max_depth,
                                   double virtual_focal,
                                   double fixed_min,
                                   double fixed_max,
                                   double fixed_step,
                                   double fx,
                                   double fy,
                                   struct AzDepthMapping **out);

/**
 * # Safety
 * `mapping` must come from [`az_depth_mapping_new`] and not be used
 * afterwards. Null is accepted.
 */
void az_depth_mapping_free(struct AzDepthMapping *mapping);

/**
 * Number of virtual bins expected by [`az_depth_mapping_apply`], or 0 for a
 * null handle.
 *
 * # Safety
 * `mapping` must be null or a live handle.
 */
size_t az_depth_mapping_virtual_len(const struct AzDepthMapping *mapping);

/**
 * Number of fixed bins written by [`az_depth_mapping_apply`], or 0 for a
 * null handle.
 *
 * # Safety
 * `mapping` must be null or a live handle.
 */
size_t az_depth_mapping_fixed_len(const struct AzDepthMapping *mapping);

/**
 * Maps one score vector. `scores_len` and `out_len` must equal the virtual
 * and fixed bin counts.
 *
 * # Safety
 * Arrays must hold the stated number of values.
 */
enum AzStatus az_depth_mapping_apply(const struct AzDepthMapping *mapping,
                                     const double *scores,
                                     size_t scores_len,
                                     double *out,
                                     size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AZIMUTH_H */
