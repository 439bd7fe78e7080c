/* C interface for the camber pose/focal refinement library. */

#ifndef CAMBER_H
#define CAMBER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Predictor selector for [`camber_refine`].
 */
typedef enum CamberPredictor {
  /*
   Exact update onto the ground truth each step.
   */
  CAMBER_PREDICTOR_IDEAL = 0,
  /*
   Fractional step of `gamma` per iteration in natural spaces.
   */
  CAMBER_PREDICTOR_DAMPED = 1,
  /*
   Noise-perturbed coarse step at k = 0, damped steps afterwards.
   */
  CAMBER_PREDICTOR_NOISY = 2,
} CamberPredictor;

/*
 Result of a camber C API call.
 */
typedef enum CamberStatus {
  /*
   Success.
   */
  CAMBER_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  CAMBER_STATUS_NULL_POINTER = 1,
  /*
   An argument failed validation (bad range, degenerate input, schema).
   */
  CAMBER_STATUS_INVALID_ARGUMENT = 2,
  /*
   The operating system reported an I/O failure.
   */
  CAMBER_STATUS_IO_ERROR = 3,
  /*
   A numeric/domain failure (point behind camera, resample exhaustion).
   */
  CAMBER_STATUS_NUMERIC_ERROR = 4,
} CamberStatus;

/*
 Opaque triangle-mesh handle.
 */
typedef struct CamberMesh CamberMesh;

/*
 Opaque handle to points sampled on a mesh surface.
 */
typedef struct CamberPoints CamberPoints;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *camber_version(void);

/*
 Static description of a status code.
 */
const char *camber_status_message(enum CamberStatus status);

/*
 Load a plain-text triangle mesh (`v x y z` / `f i j k` lines).

 # Safety
 `path` must be a valid NUL-terminated string and `out` a valid pointer.
 The returned handle must be released with `camber_mesh_free`.
 */
enum CamberStatus camber_mesh_load(const char *path, struct CamberMesh **out);

/*
 Create a procedural mesh: `"cube"` (1 m edges) or `"icosphere"`
 (1 m diameter), uniformly scaled by `scale`.

 # Safety
 `name` must be a valid NUL-terminated string and `out` a valid pointer.
 The returned handle must be released with `camber_mesh_free`.
 */
enum CamberStatus camber_mesh_builtin(const char *name, double scale, struct CamberMesh **out);

/*
 Release a mesh handle; null is ignored.

 # Safety
 `mesh` must be null or a handle returned by a `camber_mesh_*` function
 that has not been freed yet.
 */
void camber_mesh_free(struct CamberMesh *mesh);

/*
 Sample `n` points uniformly over the mesh surface (area-weighted,
 deterministic for a given seed).

 # Safety
 `mesh` must be a live mesh handle and `out` a valid pointer. The
 returned handle must be released with `camber_points_free`.
 */
enum CamberStatus camber_points_sample(const struct CamberMesh *mesh,
                                       size_t n,
                                       uint64_t seed,
                                       struct CamberPoints **out);

/*
 Number of points in a sampled set; 0 for null.

 # Safety
 `points` must be null or a live points handle.
 */
size_t camber_points_len(const struct CamberPoints *points);

/*
 Copy point `index` into `out_xyz[3]`.

 # Safety
 `points` must be a live points handle and `out_xyz` must point to at
 least 3 writable doubles.
 */
enum CamberStatus camber_points_get(const struct CamberPoints *points,
                                    size_t index,
                                    double *out_xyz);

/*
 Release a points handle; null is ignored.

 # Safety
 `points` must be null or a handle returned by `camber_points_sample`
 that has not been freed yet.
 */
void camber_points_free(struct CamberPoints *points);

/*
 Project an object-frame point under `state[13]` with the principal point
 at `(cx, cy)`, writing pixel coordinates to `out_uv[2]`.

 # Safety
 `state` and `point` must point to 13 and 3 readable doubles; `out_uv`
 to 2 writable doubles.
 */
enum CamberStatus camber_project_point(const double *state,
                                       double cx,
                                       double cy,
                                       const double *point,
                                       double *out_uv);

/*
 Orthonormalize two 3-vectors into a rotation matrix (`out_r[9]`,
 row-major).

 # Safety
 `v1`, `v2` must point to 3 readable doubles each; `out_r` to 9 writable
 doubles.
 */
enum CamberStatus camber_rotation_from_6d(const double *v1, const double *v2, double *out_r);

/*
 Geodesic angle in radians between two rotation matrices (`r1[9]`,
 `r2[9]`, row-major), written to `out_angle`.

 # Safety
 `r1`, `r2` must point to 9 readable doubles each; `out_angle` must be
 writable.
 */
enum CamberStatus camber_rotation_geodesic(const double *r1, const double *r2, double *out_angle);

/*
 Apply an update vector to a state: `out_state = U(state, delta)`.

 # Safety
 `state`, `delta` must point to 13 and 10 readable doubles; `out_state`
 to 13 writable doubles.
 */
enum CamberStatus camber_apply_update(const double *state, const double *delta, double *out_state);

/*
 Closed-form update mapping `state` onto `target` in one application.

 # Safety
 `state`, `target` must point to 13 readable doubles each; `out_delta`
 to 10 writable doubles.
 */
enum CamberStatus camber_ideal_update(const double *state, const double *target, double *out_delta);

/*
 Initial state for a detection box under a centered pinhole camera with
 focal length `f`: identity rotation, 1 m depth, in-plane translation
 chosen so the origin projects to the box center.

 # Safety
 `det_box` must point to 4 readable doubles; `out_state` to 13 writable
 doubles.
 */
enum CamberStatus camber_init_state(const double *det_box,
                                    double f,
                                    double cx,
                                    double cy,
                                    double *out_state);

/*
 Full training loss of a predicted update against a target state.
 Writes `[pose, huber_focal, disent_reproj, total]` to `out_breakdown[4]`.

 # Safety
 `state`, `delta`, `target` must point to 13/10/13 readable doubles;
 `points` must be a live points handle; `out_breakdown` must point to 4
 writable doubles.
 */
enum CamberStatus camber_total_loss(const double *state,
                                    const double *delta,
                                    const double *target,
                                    const struct CamberPoints *points,
                                    double cx,
                                    double cy,
                                    double alpha,
                                    double beta,
                                    double *out_breakdown);

/*
 Benchmark errors of a prediction against ground truth. Writes
 `[pose_err, rot_err, trans_err, focal_err, proj_err, iou]` to
 `out_record[6]`. The ground-truth box sets the normalizing diagonal and
 the principal point sits at the image center.

 # Safety
 `pred`, `gt` must point to 13 readable doubles; `pred_box`, `gt_box` to
 4 readable doubles; `points` must be a live points handle; `out_record`
 must point to 6 writable doubles.
 */
enum CamberStatus camber_eval_record(const double *pred,
                                     const double *gt,
                                     const double *pred_box,
                                     const double *gt_box,
                                     const struct CamberPoints *points,
                                     double image_w,
                                     double image_h,
                                     double *out_record);

/*
 Run `iters` refinement iterations from `init` against `gt` and write the
 per-iteration evaluation records (including iteration 0) as
 `(iters + 1) * 6` doubles to `out_records`, laid out record-major.

 `noise` selects the noisy predictor's sigmas and may be null for the
 defaults; it is ignored by the other predictors.

 # Safety
 `init`, `gt` must point to 13 readable doubles; `gt_box` to 4;
 `noise` to 4 when non-null; `points` must be a live points handle;
 `out_records` must point to `(iters + 1) * 6` writable doubles.
 */
enum CamberStatus camber_refine(const double *init,
                                const double *gt,
                                const double *gt_box,
                                const struct CamberPoints *points,
                                double image_w,
                                double image_h,
                                enum CamberPredictor predictor,
                                double gamma,
                                uint64_t seed,
                                const double *noise,
                                uint32_t iters,
                                double *out_records);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAMBER_H */
