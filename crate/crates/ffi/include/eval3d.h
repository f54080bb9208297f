#ifndef EVAL3D_H
#define EVAL3D_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  EVAL3D_STATUS_OK = 0,
  EVAL3D_STATUS_NULL_POINTER = 1,
  EVAL3D_STATUS_INVALID_ARGUMENT = 2,
  EVAL3D_STATUS_IO = 3,
  EVAL3D_STATUS_MESH = 4,
  EVAL3D_STATUS_METRIC = 5,
  EVAL3D_STATUS_PIPELINE = 6,
  EVAL3D_STATUS_PANIC = 7,
} Eval3dStatus;

/**
 * Opaque mesh handle.
 */
typedef struct Eval3dMesh Eval3dMesh;

/**
 * Camera on a turntable around the origin, looking at the origin.
 */
typedef struct {
  double azimuth_deg;
  double elevation_deg;
  double distance;
  double vfov_deg;
  uint32_t resolution;
  double near;
  double far;
} Eval3dCamera;

/**
 * Pairwise judgment: 0 = A wins, 1 = B wins, 2 = tie.
 */
typedef struct {
  uint32_t model_a;
  uint32_t model_b;
  uint32_t verdict;
} Eval3dOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *eval3d_last_error(void);

/**
 * Library version as a static string.
 */
const char *eval3d_version(void);

/**
 * Loads an OBJ or PLY file, centered and scaled to a largest extent of 2.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out_mesh` writable.
 */
Eval3dStatus eval3d_mesh_load(const char *path, Eval3dMesh **out_mesh);

/**
 * Builds a mesh from `3 · n_vertices` coordinates and `3 · n_faces` indices.
 * The mesh is used as given, without normalization.
 *
 * # Safety
 * The arrays must hold the stated number of elements.
 */
Eval3dStatus eval3d_mesh_from_arrays(const double *vertices,
                                     size_t n_vertices,
                                     const uint32_t *faces,
                                     size_t n_faces,
                                     Eval3dMesh **out_mesh);

/**
 * # Safety
 * `mesh` must be null or a handle from this library.
 */
size_t eval3d_mesh_vertex_count(const Eval3dMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a handle from this library.
 */
size_t eval3d_mesh_face_count(const Eval3dMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a handle from this library, freed at most once.
 */
void eval3d_mesh_free(Eval3dMesh *mesh);

/**
 * Renders one view. `depth` receives `resolution²` viewing depths (0 for
 * background) and `normals` `3 · resolution²` camera-space normals. Either
 * output may be null.
 *
 * # Safety
 * Non-null outputs must hold the stated number of elements.
 */
Eval3dStatus eval3d_render(const Eval3dMesh *mesh,
                           const Eval3dCamera *camera,
                           bool smooth,
                           float *depth,
                           float *normals);

/**
 * Geometric consistency of one view: percent of masked pixels whose two
 * normals differ by less than `delta_deg`. Normals are `3 · n_pixels`
 * floats; all-zero normals are invalid.
 *
 * # Safety
 * Arrays must hold the stated number of elements; `mask` may be null to
 * use every pixel.
 */
Eval3dStatus eval3d_geometric_score(const float *analytic,
                                    const float *predicted,
                                    const uint8_t *mask,
                                    size_t n_pixels,
                                    double delta_deg,
                                    double *out_score);

/**
 * Semantic consistency from per-vertex feature variances; NaN entries are
 * excluded vertices.
 *
 * # Safety
 * `variances` must hold `n` elements.
 */
Eval3dStatus eval3d_semantic_score(const double *variances,
                                   size_t n,
                                   double delta,
                                   double *out_score);

/**
 * Structural consistency from perceptual distances laid out row-major as
 * `n_inputs × n_targets`.
 *
 * # Safety
 * `distances` must hold `n_inputs · n_targets` elements.
 */
Eval3dStatus eval3d_structural_score(const double *distances,
                                     size_t n_inputs,
                                     size_t n_targets,
                                     double *out_score);

/**
 * Text-3D alignment from a row-major `n_questions × n_views` table of
 * per-view correctness (nonzero = correct).
 *
 * # Safety
 * `correct` must hold `n_questions · n_views` elements.
 */
Eval3dStatus eval3d_alignment_score(const uint8_t *correct,
                                    size_t n_questions,
                                    size_t n_views,
                                    size_t radius,
                                    double *out_score);

/**
 * Bradley–Terry ranking of `n_models` models indexed `0..n_models`.
 * `out_normalized` and `out_elo` (either may be null) receive one value per
 * model in index order.
 *
 * # Safety
 * `outcomes` must hold `n_outcomes` elements and non-null outputs
 * `n_models`.
 */
Eval3dStatus eval3d_elo(const Eval3dOutcome *outcomes,
                        size_t n_outcomes,
                        size_t n_models,
                        double *out_normalized,
                        double *out_elo);

/**
 * Runs a full evaluation from a JSON run config. Relative paths resolve
 * against `base_dir` (may be null for the working directory). On success
 * `out_report` receives the report JSON, to be freed with
 * [`eval3d_string_free`].
 *
 * # Safety
 * String arguments must be nul-terminated; `out_report` writable.
 */
Eval3dStatus eval3d_run(const char *config_json,
                        const char *base_dir,
                        const char *out_dir,
                        bool stub_all,
                        char **out_report);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void eval3d_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVAL3D_H */
