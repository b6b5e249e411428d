#include "lsr/lsr.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "lsr/error.hpp"
#include "lsr/io.hpp"
#include "lsr/parallel.hpp"
#include "lsr/pipeline.hpp"
#include "lsr/upscale.hpp"

namespace {

thread_local std::string t_last_error;

lsr_status fail(const std::exception& e, lsr_status code) {
  t_last_error = e.what();
  return code;
}

template <typename Fn>
lsr_status guarded(Fn&& fn) {
  try {
    fn();
    return LSR_OK;
  } catch (const lsr::ConfigError& e) {
    return fail(e, LSR_CONFIG_ERROR);
  } catch (const lsr::FormatError& e) {
    return fail(e, LSR_FORMAT_ERROR);
  } catch (const lsr::NumericError& e) {
    return fail(e, LSR_NUMERIC_ERROR);
  } catch (const std::exception& e) {
    return fail(e, LSR_ERROR);
  }
}

lsr::SensorIntrinsics from_c(const lsr_intrinsics& in) {
  return {in.channels, in.h_res, in.v_fov_deg, in.v_center_deg, in.max_range_m, in.min_range_m};
}

lsr_intrinsics to_c(const lsr::SensorIntrinsics& in) {
  return {in.channels, in.h_res, in.v_fov_deg, in.v_center_deg, in.max_range_m, in.min_range_m};
}

lsr::Pose from_c(const lsr_pose& p) { return {p.x, p.y, p.z, p.yaw, p.pitch, p.roll}; }

nlohmann::json parse_config_doc(const char* config_json) {
  if (!config_json || !*config_json) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw lsr::ConfigError(std::string("config json: ") + e.what());
  }
}

lsr::PipelineConfig config_from(const char* config_json) {
  return lsr::parse_config(parse_config_doc(config_json));
}

std::string str_or_empty(const char* s) { return s ? std::string(s) : std::string(); }

}  // namespace

struct lsr_scan {
  lsr::RangeImage img;
};
struct lsr_cloud {
  lsr::PointCloud cloud;
};
struct lsr_scene {
  lsr::Scene scene;
};
struct lsr_model {
  lsr::ModelFile model;
};
struct lsr_grid {
  lsr::VoxelGrid grid;
};
struct lsr_mc_result {
  lsr::McResult mc;
};

extern "C" {

const char* lsr_last_error(void) { return t_last_error.c_str(); }

int lsr_version(void) { return 10000; }  // 1.0.0

void lsr_set_threads(int n) { lsr::set_max_threads(n); }

/* ---- scans ------------------------------------------------------------ */

lsr_status lsr_scan_create(const lsr_intrinsics* intr, const float* data, lsr_scan** out) {
  return guarded([&] {
    if (!intr || !out) throw lsr::ConfigError("scan_create: null argument");
    lsr::RangeImage img = lsr::RangeImage::zeros(from_c(*intr));
    if (data) std::memcpy(img.data.data(), data, img.data.size() * sizeof(float));
    *out = new lsr_scan{std::move(img)};
  });
}

lsr_status lsr_scan_load(const char* path, lsr_scan** out) {
  return guarded([&] {
    if (!path || !out) throw lsr::ConfigError("scan_load: null argument");
    *out = new lsr_scan{lsr::read_lsrs(path)};
  });
}

lsr_status lsr_scan_save(const lsr_scan* scan, const char* path) {
  return guarded([&] {
    if (!scan || !path) throw lsr::ConfigError("scan_save: null argument");
    lsr::write_lsrs(path, scan->img);
  });
}

lsr_status lsr_scan_save_pgm(const lsr_scan* scan, const char* path) {
  return guarded([&] {
    if (!scan || !path) throw lsr::ConfigError("scan_save_pgm: null argument");
    lsr::write_pgm16(path, scan->img);
  });
}

void lsr_scan_free(lsr_scan* scan) { delete scan; }

uint32_t lsr_scan_rows(const lsr_scan* scan) { return scan->img.rows(); }
uint32_t lsr_scan_cols(const lsr_scan* scan) { return scan->img.cols(); }
const float* lsr_scan_data(const lsr_scan* scan) { return scan->img.data.data(); }
void lsr_scan_intrinsics(const lsr_scan* scan, lsr_intrinsics* out) {
  if (out) *out = to_c(scan->img.intrinsics);
}

lsr_status lsr_scan_subsample(const lsr_scan* scan, uint32_t factor, lsr_scan** out) {
  return guarded([&] {
    if (!scan || !out) throw lsr::ConfigError("scan_subsample: null argument");
    *out = new lsr_scan{lsr::subsample_rows(scan->img, factor)};
  });
}

lsr_status lsr_scan_to_cloud(const lsr_scan* scan, lsr_cloud** out) {
  return guarded([&] {
    if (!scan || !out) throw lsr::ConfigError("scan_to_cloud: null argument");
    *out = new lsr_cloud{lsr::unproject(scan->img)};
  });
}

/* ---- clouds ----------------------------------------------------------- */

lsr_status lsr_cloud_project(const lsr_cloud* cloud, const lsr_intrinsics* intr, lsr_scan** out,
                             uint64_t* dropped) {
  return guarded([&] {
    if (!cloud || !intr || !out) throw lsr::ConfigError("cloud_project: null argument");
    lsr::ProjectionResult res = lsr::project(cloud->cloud, from_c(*intr));
    if (dropped) *dropped = res.dropped;
    *out = new lsr_scan{std::move(res.image)};
  });
}

size_t lsr_cloud_size(const lsr_cloud* cloud) { return cloud->cloud.size(); }

size_t lsr_cloud_points(const lsr_cloud* cloud, double* xyz, uint16_t* ring, size_t cap) {
  const size_t n = std::min(cap, cloud->cloud.size());
  for (size_t i = 0; i < n; ++i) {
    const lsr::LidarPoint& p = cloud->cloud.points[i];
    if (xyz) {
      xyz[3 * i] = p.x;
      xyz[3 * i + 1] = p.y;
      xyz[3 * i + 2] = p.z;
    }
    if (ring) ring[i] = p.ring;
  }
  return n;
}

lsr_status lsr_cloud_save_csv(const lsr_cloud* cloud, const char* path) {
  return guarded([&] {
    if (!cloud || !path) throw lsr::ConfigError("cloud_save_csv: null argument");
    lsr::write_cloud_csv(path, cloud->cloud);
  });
}

void lsr_cloud_free(lsr_cloud* cloud) { delete cloud; }

/* ---- scenes ----------------------------------------------------------- */

lsr_status lsr_scene_load(const char* path, lsr_scene** out) {
  return guarded([&] {
    if (!path || !out) throw lsr::ConfigError("scene_load: null argument");
    *out = new lsr_scene{lsr::load_scene(path)};
  });
}

void lsr_scene_free(lsr_scene* scene) { delete scene; }

lsr_status lsr_raycast(const lsr_scene* scene, const lsr_pose* pose, const lsr_intrinsics* intr,
                       lsr_scan** out) {
  return guarded([&] {
    if (!scene || !pose || !intr || !out) throw lsr::ConfigError("raycast: null argument");
    *out = new lsr_scan{lsr::raycast_scan(scene->scene, from_c(*pose), from_c(*intr))};
  });
}

/* ---- models ----------------------------------------------------------- */

lsr_status lsr_model_load(const char* path, lsr_model** out) {
  return guarded([&] {
    if (!path || !out) throw lsr::ConfigError("model_load: null argument");
    *out = new lsr_model{lsr::read_lsrm(path)};
  });
}

lsr_status lsr_model_save(const lsr_model* model, const char* path) {
  return guarded([&] {
    if (!model || !path) throw lsr::ConfigError("model_save: null argument");
    lsr::write_lsrm(path, model->model);
  });
}

void lsr_model_free(lsr_model* model) { delete model; }

int lsr_model_factor(const lsr_model* model) { return model->model.meta.factor; }
int lsr_model_epochs_trained(const lsr_model* model) { return model->model.meta.epochs_trained; }

/* ---- upscaling --------------------------------------------------------- */

lsr_status lsr_upscale_interp(const lsr_scan* low, uint32_t factor, const char* method,
                              lsr_scan** out) {
  return guarded([&] {
    if (!low || !method || !out) throw lsr::ConfigError("upscale_interp: null argument");
    const lsr::NormalizedImage n = lsr::normalize(low->img);
    lsr::NormalizedImage up;
    if (std::strcmp(method, "linear") == 0)
      up = lsr::upscale_linear(n, factor);
    else if (std::strcmp(method, "cubic") == 0)
      up = lsr::upscale_cubic(n, factor);
    else
      throw lsr::ConfigError("upscale_interp: method must be linear or cubic");
    *out = new lsr_scan{lsr::denormalize(up)};
  });
}

lsr_status lsr_upscale_nn(const lsr_scan* low, const lsr_model* model, lsr_scan** out) {
  return guarded([&] {
    if (!low || !model || !out) throw lsr::ConfigError("upscale_nn: null argument");
    const lsr::NormalizedImage up =
        lsr::nn_upscale(model->model.spec, model->model.params, lsr::normalize(low->img));
    lsr::RangeImage img;
    img.intrinsics = up.intrinsics;
    img.data.resize(up.data.size());
    const double max_r = up.intrinsics.max_range_m;
    for (size_t i = 0; i < up.data.size(); ++i) {
      const double v = std::clamp(static_cast<double>(up.data[i]), 0.0, 1.0);
      img.data[i] = static_cast<float>(v * max_r);
    }
    *out = new lsr_scan{std::move(img)};
  });
}

lsr_status lsr_upscale_nn_mc(const lsr_scan* low, const lsr_model* model,
                             const lsr_mc_params* params, lsr_mc_result** out) {
  return guarded([&] {
    if (!low || !model || !params || !out) throw lsr::ConfigError("upscale_nn_mc: null argument");
    lsr::McConfig cfg{params->passes, params->lambda, params->seed};
    *out = new lsr_mc_result{
        lsr::mc_infer(lsr::normalize(low->img), model->model.spec, model->model.params, cfg)};
  });
}

lsr_status lsr_mc_result_scan(const lsr_mc_result* result, int which, lsr_scan** out) {
  return guarded([&] {
    if (!result || !out) throw lsr::ConfigError("mc_result_scan: null argument");
    const lsr::NormalizedImage* src = nullptr;
    switch (which) {
      case 0: src = &result->mc.mean; break;
      case 1: src = &result->mc.std; break;
      case 2: src = &result->mc.final; break;
      default: throw lsr::ConfigError("mc_result_scan: which must be 0, 1 or 2");
    }
    lsr::RangeImage img;
    img.intrinsics = src->intrinsics;
    img.data.resize(src->data.size());
    const double max_r = src->intrinsics.max_range_m;
    for (size_t i = 0; i < src->data.size(); ++i) {
      double v = static_cast<double>(src->data[i]);
      if (which != 1) v = std::clamp(v, 0.0, 1.0);
      img.data[i] = static_cast<float>(v * max_r);
    }
    *out = new lsr_scan{std::move(img)};
  });
}

double lsr_mc_result_removed_pct(const lsr_mc_result* result) {
  return result->mc.removed_fraction;
}

void lsr_mc_result_free(lsr_mc_result* result) { delete result; }

/* ---- grids ------------------------------------------------------------- */

lsr_status lsr_grid_create(const lsr_grid_params* params, lsr_grid** out) {
  return guarded([&] {
    if (!params || !out) throw lsr::ConfigError("grid_create: null argument");
    lsr::GridConfig cfg;
    cfg.origin = {params->origin[0], params->origin[1], params->origin[2]};
    cfg.resolution = params->resolution;
    cfg.nx = params->nx;
    cfg.ny = params->ny;
    cfg.nz = params->nz;
    if (params->l_hit != 0.0f) cfg.occ.l_hit = params->l_hit;
    if (params->l_miss != 0.0f) cfg.occ.l_miss = params->l_miss;
    if (params->l_min != 0.0f) cfg.occ.l_min = params->l_min;
    if (params->l_max != 0.0f) cfg.occ.l_max = params->l_max;
    *out = new lsr_grid{lsr::VoxelGrid(cfg)};
  });
}

lsr_status lsr_grid_load(const char* path, lsr_grid** out) {
  return guarded([&] {
    if (!path || !out) throw lsr::ConfigError("grid_load: null argument");
    *out = new lsr_grid{lsr::read_lsrg(path)};
  });
}

lsr_status lsr_grid_save(const lsr_grid* grid, const char* path) {
  return guarded([&] {
    if (!grid || !path) throw lsr::ConfigError("grid_save: null argument");
    lsr::write_lsrg(path, grid->grid);
  });
}

lsr_status lsr_grid_save_csv(const lsr_grid* grid, const char* path) {
  return guarded([&] {
    if (!grid || !path) throw lsr::ConfigError("grid_save_csv: null argument");
    lsr::write_grid_csv(path, grid->grid);
  });
}

void lsr_grid_free(lsr_grid* grid) { delete grid; }

lsr_status lsr_grid_integrate(lsr_grid* grid, const lsr_cloud* cloud, const lsr_pose* pose,
                              double max_range) {
  return guarded([&] {
    if (!grid || !cloud || !pose) throw lsr::ConfigError("grid_integrate: null argument");
    grid->grid.integrate_scan(cloud->cloud, from_c(*pose), max_range);
  });
}

lsr_status lsr_grid_occupancy(const lsr_grid* grid, int x, int y, int z, double* out) {
  return guarded([&] {
    if (!grid || !out) throw lsr::ConfigError("grid_occupancy: null argument");
    *out = grid->grid.occupancy({x, y, z});
  });
}

void lsr_grid_dims(const lsr_grid* grid, uint32_t* nx, uint32_t* ny, uint32_t* nz) {
  if (nx) *nx = grid->grid.config().nx;
  if (ny) *ny = grid->grid.config().ny;
  if (nz) *nz = grid->grid.config().nz;
}

/* ---- metrics ----------------------------------------------------------- */

lsr_status lsr_l1(const lsr_scan* a, const lsr_scan* b, double* out) {
  return guarded([&] {
    if (!a || !b || !out) throw lsr::ConfigError("l1: null argument");
    *out = lsr::l1_metric(lsr::normalize(a->img), lsr::normalize(b->img));
  });
}

lsr_status lsr_roc_auc(const lsr_grid* pred, const lsr_grid* truth, const char* roc_csv_path,
                       double* auc) {
  return guarded([&] {
    if (!pred || !truth || !auc) throw lsr::ConfigError("roc_auc: null argument");
    const lsr::RocCurve curve = lsr::roc_auc(pred->grid, truth->grid);
    if (roc_csv_path) lsr::write_roc_csv(roc_csv_path, curve);
    *auc = curve.auc;
  });
}

/* ---- command-level entry points ---------------------------------------- */

char* lsr_default_config(void) {
  const std::string s = lsr::default_config_json().dump(2);
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void lsr_string_free(char* s) { std::free(s); }

lsr_status lsr_run_gen_data(const char* config_json, const char* out_dir, size_t* pair_count) {
  return guarded([&] {
    if (!out_dir) throw lsr::ConfigError("gen_data: null out_dir");
    const size_t n = lsr::run_gen_data(config_from(config_json), out_dir);
    if (pair_count) *pair_count = n;
  });
}

lsr_status lsr_run_train(const char* config_json, const char* data_dir, const char* model_path,
                         const char* init_model_or_null, double* final_l1) {
  return guarded([&] {
    if (!data_dir || !model_path) throw lsr::ConfigError("train: null path");
    const lsr::TrainSummary s = lsr::run_train(config_from(config_json), data_dir, model_path,
                                               str_or_empty(init_model_or_null));
    if (final_l1) *final_l1 = s.final_l1;
  });
}

lsr_status lsr_run_upscale(const char* config_json, const char* scan_path,
                           const char* model_or_null, const char* method, const char* out_dir) {
  return guarded([&] {
    if (!scan_path || !method || !out_dir) throw lsr::ConfigError("upscale: null argument");
    lsr::run_upscale(config_from(config_json), scan_path, str_or_empty(model_or_null), method,
                     out_dir);
  });
}

lsr_status lsr_run_map(const char* config_json, const char* manifest_path, int use_high,
                       const char* like_grid_or_null, const char* out_path) {
  return guarded([&] {
    if (!manifest_path || !out_path) throw lsr::ConfigError("map: null path");
    lsr::run_map(config_from(config_json), manifest_path, use_high != 0,
                 str_or_empty(like_grid_or_null), out_path);
  });
}

lsr_status lsr_run_eval(const char* config_json, const char* manifest_path,
                        const char* model_or_null, const char* methods, const char* out_dir) {
  return guarded([&] {
    if (!manifest_path || !methods || !out_dir) throw lsr::ConfigError("eval: null argument");
    std::vector<std::string> list;
    std::stringstream ss(methods);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) list.push_back(item);
    }
    if (list.empty()) throw lsr::ConfigError("eval: empty method list");
    lsr::run_eval(config_from(config_json), manifest_path, str_or_empty(model_or_null), list,
                  out_dir);
  });
}

lsr_status lsr_run_pipeline(const char* config_json, const char* out_dir) {
  return guarded([&] {
    if (!out_dir) throw lsr::ConfigError("pipeline: null out_dir");
    lsr::run_pipeline(config_from(config_json), out_dir);
  });
}

}  // extern "C"
