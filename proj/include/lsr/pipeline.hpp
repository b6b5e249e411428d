#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsr/dataset.hpp"
#include "lsr/io.hpp"
#include "lsr/metrics.hpp"
#include "lsr/upscale.hpp"

namespace lsr {

// Configuration shared by every command. Assembled from defaults, an
// optional JSON config file, --set key=value overrides and explicit flags.
struct PipelineConfig {
  std::uint64_t seed = 1;
  std::uint32_t factor = 4;
  SensorIntrinsics intrinsics{64, 256, 30.0f, 0.0f, 100.0f, 0.3f};  // hi-res sensor

  std::string scene;            // training scene / trajectory
  std::string trajectory;
  std::string test_scene;       // held-out scene / trajectory (pipeline, eval)
  std::string test_trajectory;

  AugmentConfig augment{0.5, 0.5, 0, 0.85, 1.15, 0};
  std::uint32_t augment_multiplier = 1;
  double attitude_jitter_deg = 3.0;

  struct Net {
    int base_filters = 8;
    int epochs = 50;
    int batch = 4;
    float lr = 1e-4f;
    float decay = 1e-5f;
    float dropout = 0.25f;
  } net;

  McConfig mc{50, 0.03, 0};

  struct Grid {
    double resolution = 0.05;
    OccupancyParams occ;
  } grid;

  bool measure_timing = true;
};

nlohmann::ordered_json default_config_json();
void merge_config(nlohmann::ordered_json& base, const nlohmann::json& overlay);
// "--set a.b.c=value"; value parsed as JSON when possible, else as a string.
void apply_set_override(nlohmann::ordered_json& cfg, const std::string& key_value);
PipelineConfig parse_config(const nlohmann::json& j);

// gen-data: raycast pairs + manifest under out_dir. Returns the pair count.
std::size_t run_gen_data(const PipelineConfig& cfg, const std::string& out_dir);

struct TrainSummary {
  double final_l1 = 0.0;
  int epochs_trained = 0;
  double seconds = 0.0;
};

// train: consumes a gen-data directory, writes model + sidecar + loss CSV
// (<model>.loss.csv). `init_model` resumes from an existing model.
TrainSummary run_train(const PipelineConfig& cfg, const std::string& data_dir,
                       const std::string& model_path, const std::string& init_model);

// upscale one scan; nn methods require model_path. Writes the upscaled
// LSRS, a point-cloud CSV, and for nn-mc the mean/std maps plus a summary
// JSON. Returns the primary output path.
std::string run_upscale(const PipelineConfig& cfg, const std::string& scan_path,
                        const std::string& model_path, const std::string& method,
                        const std::string& out_dir);

// map: builds an occupancy grid from a dataset manifest. `use_high` picks
// the scan column; bounds come from `like_grid` when given, else auto-fit.
void run_map(const PipelineConfig& cfg, const std::string& manifest_path, bool use_high,
             const std::string& like_grid, const std::string& out_path);

// eval: compares methods on a test manifest against the ground-truth map.
// Writes metrics.csv, per-method ROC curves and grids under out_dir.
std::vector<MethodMetrics> run_eval(const PipelineConfig& cfg, const std::string& manifest_path,
                                    const std::string& model_path,
                                    const std::vector<std::string>& methods,
                                    const std::string& out_dir);

// pipeline: gen-data -> train -> gen test data -> eval, all under out_dir.
std::vector<MethodMetrics> run_pipeline(const PipelineConfig& cfg, const std::string& out_dir);

}  // namespace lsr
