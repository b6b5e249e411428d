/* C API for the lidar super-resolution toolkit.
 *
 * Conventions: every function that can fail returns an lsr_status; 0 is
 * success. On failure lsr_last_error() returns a thread-local message.
 * Objects are opaque handles released with their lsr_*_free function.
 * Accessors on valid handles do not fail.
 */
#ifndef LSR_H
#define LSR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsr_status {
  LSR_OK = 0,
  LSR_ERROR = 1,          /* unexpected failure */
  LSR_CONFIG_ERROR = 2,   /* bad arguments, missing files, mismatched setups */
  LSR_FORMAT_ERROR = 3,   /* malformed data files */
  LSR_NUMERIC_ERROR = 4   /* NaN/Inf detected */
} lsr_status;

const char* lsr_last_error(void);
int lsr_version(void);

/* Caps worker threads (also honors the LSR_THREADS env var). */
void lsr_set_threads(int n);

typedef struct lsr_intrinsics {
  uint32_t channels;
  uint32_t h_res;
  float v_fov_deg;
  float v_center_deg;
  float max_range_m;
  float min_range_m;
} lsr_intrinsics;

typedef struct lsr_pose {
  double x, y, z;
  double yaw, pitch, roll; /* radians, applied yaw-pitch-roll */
} lsr_pose;

typedef struct lsr_scan lsr_scan;      /* range image */
typedef struct lsr_cloud lsr_cloud;    /* point cloud */
typedef struct lsr_scene lsr_scene;
typedef struct lsr_model lsr_model;
typedef struct lsr_grid lsr_grid;      /* occupancy grid */
typedef struct lsr_mc_result lsr_mc_result;

/* ---- scans ------------------------------------------------------------ */

/* data may be NULL for an all-zero scan; otherwise rows*cols row-major. */
lsr_status lsr_scan_create(const lsr_intrinsics* intr, const float* data, lsr_scan** out);
lsr_status lsr_scan_load(const char* path, lsr_scan** out);
lsr_status lsr_scan_save(const lsr_scan* scan, const char* path);
lsr_status lsr_scan_save_pgm(const lsr_scan* scan, const char* path);
void lsr_scan_free(lsr_scan* scan);

uint32_t lsr_scan_rows(const lsr_scan* scan);
uint32_t lsr_scan_cols(const lsr_scan* scan);
const float* lsr_scan_data(const lsr_scan* scan);
void lsr_scan_intrinsics(const lsr_scan* scan, lsr_intrinsics* out);

lsr_status lsr_scan_subsample(const lsr_scan* scan, uint32_t factor, lsr_scan** out);
lsr_status lsr_scan_to_cloud(const lsr_scan* scan, lsr_cloud** out);

/* ---- clouds ----------------------------------------------------------- */

lsr_status lsr_cloud_project(const lsr_cloud* cloud, const lsr_intrinsics* intr, lsr_scan** out,
                             uint64_t* dropped);
size_t lsr_cloud_size(const lsr_cloud* cloud);
/* Fills up to `cap` points as xyz triples plus ring ids; returns the count
 * written. Either output may be NULL. */
size_t lsr_cloud_points(const lsr_cloud* cloud, double* xyz, uint16_t* ring, size_t cap);
lsr_status lsr_cloud_save_csv(const lsr_cloud* cloud, const char* path);
void lsr_cloud_free(lsr_cloud* cloud);

/* ---- scenes / simulation ---------------------------------------------- */

lsr_status lsr_scene_load(const char* path, lsr_scene** out);
void lsr_scene_free(lsr_scene* scene);
lsr_status lsr_raycast(const lsr_scene* scene, const lsr_pose* pose, const lsr_intrinsics* intr,
                       lsr_scan** out);

/* ---- models ----------------------------------------------------------- */

lsr_status lsr_model_load(const char* path, lsr_model** out);
lsr_status lsr_model_save(const lsr_model* model, const char* path);
void lsr_model_free(lsr_model* model);
int lsr_model_factor(const lsr_model* model);
int lsr_model_epochs_trained(const lsr_model* model);

/* ---- upscaling --------------------------------------------------------- */

/* method: "linear" | "cubic" (factor taken from the argument). */
lsr_status lsr_upscale_interp(const lsr_scan* low, uint32_t factor, const char* method,
                              lsr_scan** out);
/* Single deterministic forward pass. */
lsr_status lsr_upscale_nn(const lsr_scan* low, const lsr_model* model, lsr_scan** out);

typedef struct lsr_mc_params {
  int passes;      /* T */
  double lambda;   /* keep when std < lambda * mean */
  uint64_t seed;
} lsr_mc_params;

lsr_status lsr_upscale_nn_mc(const lsr_scan* low, const lsr_model* model,
                             const lsr_mc_params* params, lsr_mc_result** out);
/* which: 0 = mean, 1 = std, 2 = final (all in meters). */
lsr_status lsr_mc_result_scan(const lsr_mc_result* result, int which, lsr_scan** out);
double lsr_mc_result_removed_pct(const lsr_mc_result* result);
void lsr_mc_result_free(lsr_mc_result* result);

/* ---- occupancy grids --------------------------------------------------- */

typedef struct lsr_grid_params {
  double origin[3];
  double resolution;
  uint32_t nx, ny, nz;
  float l_hit, l_miss, l_min, l_max; /* pass 0s for defaults */
} lsr_grid_params;

lsr_status lsr_grid_create(const lsr_grid_params* params, lsr_grid** out);
lsr_status lsr_grid_load(const char* path, lsr_grid** out);
lsr_status lsr_grid_save(const lsr_grid* grid, const char* path);
lsr_status lsr_grid_save_csv(const lsr_grid* grid, const char* path);
void lsr_grid_free(lsr_grid* grid);

lsr_status lsr_grid_integrate(lsr_grid* grid, const lsr_cloud* cloud, const lsr_pose* pose,
                              double max_range);
/* Occupancy probability in [0,1]; untouched voxels read 0.5. */
lsr_status lsr_grid_occupancy(const lsr_grid* grid, int x, int y, int z, double* out);
void lsr_grid_dims(const lsr_grid* grid, uint32_t* nx, uint32_t* ny, uint32_t* nz);

/* ---- metrics ----------------------------------------------------------- */

/* Mean |a-b| over all pixels, computed on ranges normalized by max_range. */
lsr_status lsr_l1(const lsr_scan* a, const lsr_scan* b, double* out);
/* AUC of pred vs truth occupancy; optionally writes the ROC curve CSV. */
lsr_status lsr_roc_auc(const lsr_grid* pred, const lsr_grid* truth, const char* roc_csv_path,
                       double* auc);

/* ---- command-level entry points ---------------------------------------- */
/* config_json: pipeline configuration document (missing keys take their
 * defaults; see lsr_default_config). */

/* Returns a malloc'd JSON string of the default configuration; free with
 * lsr_string_free. */
char* lsr_default_config(void);
void lsr_string_free(char* s);

lsr_status lsr_run_gen_data(const char* config_json, const char* out_dir, size_t* pair_count);
lsr_status lsr_run_train(const char* config_json, const char* data_dir, const char* model_path,
                         const char* init_model_or_null, double* final_l1);
lsr_status lsr_run_upscale(const char* config_json, const char* scan_path,
                           const char* model_or_null, const char* method, const char* out_dir);
lsr_status lsr_run_map(const char* config_json, const char* manifest_path, int use_high,
                       const char* like_grid_or_null, const char* out_path);
/* methods: comma-separated list, e.g. "baseline,linear,cubic,nn,nn-mc". */
lsr_status lsr_run_eval(const char* config_json, const char* manifest_path,
                        const char* model_or_null, const char* methods, const char* out_dir);
lsr_status lsr_run_pipeline(const char* config_json, const char* out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LSR_H */
