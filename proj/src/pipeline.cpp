#include "lsr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lsr/error.hpp"
#include "lsr/nn/train.hpp"

namespace lsr {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

nlohmann::ordered_json default_config_json() {
  const PipelineConfig d;
  nlohmann::ordered_json j;
  j["seed"] = d.seed;
  j["factor"] = d.factor;
  j["full"] = false;
  j["intrinsics"] = {{"channels", d.intrinsics.channels},
                     {"h_res", d.intrinsics.h_res},
                     {"v_fov_deg", d.intrinsics.v_fov_deg},
                     {"v_center_deg", d.intrinsics.v_center_deg},
                     {"max_range_m", d.intrinsics.max_range_m},
                     {"min_range_m", d.intrinsics.min_range_m}};
  j["scene"] = "";
  j["trajectory"] = "";
  j["test_scene"] = "";
  j["test_trajectory"] = "";
  j["augment"] = {{"flip_topdown", d.augment.flip_topdown},
                  {"flip_horizontal", d.augment.flip_horizontal},
                  {"shift_cols", d.augment.shift_cols},
                  {"scale_lo", d.augment.scale_lo},
                  {"scale_hi", d.augment.scale_hi},
                  {"multiplier", d.augment_multiplier},
                  {"attitude_jitter_deg", d.attitude_jitter_deg}};
  j["net"] = {{"base_filters", d.net.base_filters}, {"epochs", d.net.epochs},
              {"batch", d.net.batch},               {"lr", d.net.lr},
              {"decay", d.net.decay},               {"dropout", d.net.dropout}};
  j["mc"] = {{"passes", d.mc.passes}, {"lambda", d.mc.lambda}};
  j["grid"] = {{"resolution", d.grid.resolution},
               {"l_hit", d.grid.occ.l_hit},
               {"l_miss", d.grid.occ.l_miss},
               {"l_min", d.grid.occ.l_min},
               {"l_max", d.grid.occ.l_max},
               {"state_delta", d.grid.occ.state_delta}};
  j["measure_timing"] = d.measure_timing;
  return j;
}

void merge_config(nlohmann::ordered_json& base, const nlohmann::json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      nlohmann::ordered_json sub = base[it.key()];
      merge_config(sub, *it);
      base[it.key()] = sub;
    } else {
      base[it.key()] = *it;
    }
  }
}

void apply_set_override(nlohmann::ordered_json& cfg, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + key_value + "'");
  const std::string key = key_value.substr(0, eq);
  const std::string raw = key_value.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;  // plain string
  }

  nlohmann::ordered_json* node = &cfg;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ConfigError("--set: empty key segment in '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = nlohmann::ordered_json::object();
    node = &(*node)[part];
    pos = dot + 1;
  }
}

PipelineConfig parse_config(const nlohmann::json& in) {
  nlohmann::ordered_json j = default_config_json();
  merge_config(j, in);
  if (j.value("full", false)) {
    // Full-scale preset; explicit overrides in `in` still win.
    nlohmann::ordered_json full;
    full["intrinsics"]["h_res"] = 1024;
    full["net"]["base_filters"] = 32;
    merge_config(full, in);
    full["full"] = true;
    nlohmann::ordered_json base = default_config_json();
    merge_config(base, full);
    j = base;
  }

  PipelineConfig cfg;
  try {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.factor = j.at("factor").get<std::uint32_t>();
    const auto& intr = j.at("intrinsics");
    cfg.intrinsics.channels = intr.at("channels").get<std::uint32_t>();
    cfg.intrinsics.h_res = intr.at("h_res").get<std::uint32_t>();
    cfg.intrinsics.v_fov_deg = intr.at("v_fov_deg").get<float>();
    cfg.intrinsics.v_center_deg = intr.at("v_center_deg").get<float>();
    cfg.intrinsics.max_range_m = intr.at("max_range_m").get<float>();
    cfg.intrinsics.min_range_m = intr.at("min_range_m").get<float>();
    cfg.scene = j.at("scene").get<std::string>();
    cfg.trajectory = j.at("trajectory").get<std::string>();
    cfg.test_scene = j.at("test_scene").get<std::string>();
    cfg.test_trajectory = j.at("test_trajectory").get<std::string>();
    const auto& aug = j.at("augment");
    cfg.augment.flip_topdown = aug.at("flip_topdown").get<double>();
    cfg.augment.flip_horizontal = aug.at("flip_horizontal").get<double>();
    cfg.augment.shift_cols = aug.at("shift_cols").get<std::uint32_t>();
    cfg.augment.scale_lo = aug.at("scale_lo").get<double>();
    cfg.augment.scale_hi = aug.at("scale_hi").get<double>();
    cfg.augment_multiplier = aug.at("multiplier").get<std::uint32_t>();
    cfg.attitude_jitter_deg = aug.at("attitude_jitter_deg").get<double>();
    const auto& net = j.at("net");
    cfg.net.base_filters = net.at("base_filters").get<int>();
    cfg.net.epochs = net.at("epochs").get<int>();
    cfg.net.batch = net.at("batch").get<int>();
    cfg.net.lr = net.at("lr").get<float>();
    cfg.net.decay = net.at("decay").get<float>();
    cfg.net.dropout = net.at("dropout").get<float>();
    const auto& mc = j.at("mc");
    cfg.mc.passes = mc.at("passes").get<int>();
    cfg.mc.lambda = mc.at("lambda").get<double>();
    const auto& grid = j.at("grid");
    cfg.grid.resolution = grid.at("resolution").get<double>();
    cfg.grid.occ.l_hit = grid.at("l_hit").get<float>();
    cfg.grid.occ.l_miss = grid.at("l_miss").get<float>();
    cfg.grid.occ.l_min = grid.at("l_min").get<float>();
    cfg.grid.occ.l_max = grid.at("l_max").get<float>();
    cfg.grid.occ.state_delta = grid.at("state_delta").get<float>();
    cfg.measure_timing = j.at("measure_timing").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.augment.seed = cfg.seed;
  cfg.mc.seed = cfg.seed;
  cfg.intrinsics.validate();
  cfg.augment.validate();
  cfg.mc.validate();
  cfg.grid.occ.validate();
  if (cfg.factor != 2 && cfg.factor != 4 && cfg.factor != 8)
    throw ConfigError("config: factor must be 2, 4 or 8");
  return cfg;
}

namespace {

std::string pair_name(const char* kind, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05zu.lsrs", kind, i);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir + ": " + ec.message());
}

std::vector<ScanPair> generate_pairs(const PipelineConfig& cfg, const std::string& scene_path,
                                     const std::string& traj_path, std::uint32_t multiplier,
                                     double jitter_deg) {
  if (scene_path.empty()) throw ConfigError("no scene file configured");
  if (traj_path.empty()) throw ConfigError("no trajectory file configured");
  const Scene scene = load_scene(scene_path);
  const Trajectory traj = load_trajectory(traj_path);
  return generate_dataset(scene, traj, cfg.intrinsics, cfg.factor, cfg.augment, multiplier,
                          jitter_deg);
}

std::size_t write_pairs(const std::vector<ScanPair>& pairs, const PipelineConfig& cfg,
                        const std::string& out_dir) {
  ensure_dir(out_dir);
  DatasetManifest manifest;
  manifest.intrinsics = cfg.intrinsics;
  manifest.factor = cfg.factor;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ManifestEntry e;
    e.low_path = pair_name("low", i);
    e.high_path = pair_name("high", i);
    e.pose = pairs[i].pose;
    write_lsrs((fs::path(out_dir) / e.low_path).string(), pairs[i].low);
    write_lsrs((fs::path(out_dir) / e.high_path).string(), pairs[i].high);
    manifest.pairs.push_back(std::move(e));
  }
  write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
  return pairs.size();
}

nn::Tensor4 image_tensor(const NormalizedImage& img) {
  nn::Tensor4 t(1, 1, static_cast<int>(img.rows()), static_cast<int>(img.cols()));
  std::copy(img.data.begin(), img.data.end(), t.data.begin());
  return t;
}

RangeImage denorm_clamped(const NormalizedImage& img) {
  RangeImage out;
  out.intrinsics = img.intrinsics;
  out.data.resize(img.data.size());
  const double max_r = img.intrinsics.max_range_m;
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<float>(std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0) * max_r);
  return out;
}

ModelFile load_model(const std::string& path) {
  if (path.empty()) throw ConfigError("this method requires --model");
  return read_lsrm(path);
}

std::unique_ptr<Upscaler> make_upscaler(const std::string& method, const PipelineConfig& cfg,
                                        const ModelFile* model) {
  if (method == "linear") return std::make_unique<LinearUpscaler>(cfg.factor);
  if (method == "cubic") return std::make_unique<CubicUpscaler>(cfg.factor);
  if (method == "nn" || method == "nn-mc") {
    if (!model) throw ConfigError("method '" + method + "' requires a model");
    if (static_cast<std::uint32_t>(model->meta.factor) != cfg.factor)
      throw ConfigError("model factor " + std::to_string(model->meta.factor) +
                        " does not match configured factor " + std::to_string(cfg.factor));
    std::optional<McConfig> mc;
    if (method == "nn-mc") mc = cfg.mc;
    return std::make_unique<NeuralUpscaler>(model->spec, model->params, mc);
  }
  throw ConfigError("unknown method '" + method + "' (expected linear|cubic|nn|nn-mc)");
}

}  // namespace

std::size_t run_gen_data(const PipelineConfig& cfg, const std::string& out_dir) {
  const auto pairs =
      generate_pairs(cfg, cfg.scene, cfg.trajectory, cfg.augment_multiplier, cfg.attitude_jitter_deg);
  return write_pairs(pairs, cfg, out_dir);
}

TrainSummary run_train(const PipelineConfig& cfg, const std::string& data_dir,
                       const std::string& model_path, const std::string& init_model) {
  const std::string manifest_path = (fs::path(data_dir) / "manifest.json").string();
  const DatasetManifest manifest = read_manifest(manifest_path);
  if (manifest.factor != cfg.factor)
    throw ConfigError("dataset factor " + std::to_string(manifest.factor) +
                      " does not match configured factor " + std::to_string(cfg.factor));

  const std::vector<ScanPair> pairs = load_dataset_pairs(manifest_path);
  if (pairs.empty()) throw ConfigError("dataset has no pairs: " + data_dir);

  std::vector<std::pair<nn::Tensor4, nn::Tensor4>> samples;
  samples.reserve(pairs.size());
  for (const ScanPair& p : pairs)
    samples.emplace_back(image_tensor(normalize(p.low)), image_tensor(normalize(p.high)));

  ModelFile model;
  int start_epoch = 0;
  if (!init_model.empty()) {
    model = read_lsrm(init_model);
    if (static_cast<std::uint32_t>(model.meta.factor) != cfg.factor)
      throw ConfigError("resume model factor mismatch");
    if (!model.adam) model.adam = nn::init_adam(model.spec);
    start_epoch = model.meta.epochs_trained;
  } else {
    model.spec = nn::build_srnet(static_cast<int>(cfg.factor), cfg.net.base_filters, cfg.net.dropout);
    model.params = nn::init_params(model.spec, cfg.seed);
    model.adam = nn::init_adam(model.spec);
    model.meta.factor = static_cast<int>(cfg.factor);
    model.meta.base_filters = cfg.net.base_filters;
    model.meta.dropout = cfg.net.dropout;
    model.meta.base_lr = cfg.net.lr;
    model.meta.decay = cfg.net.decay;
    model.meta.epochs_trained = 0;
  }

  nn::TrainConfig tc;
  tc.epochs = cfg.net.epochs;
  tc.batch = cfg.net.batch;
  tc.lr = cfg.net.lr;
  tc.decay = cfg.net.decay;
  tc.seed = cfg.seed;
  tc.start_epoch = start_epoch;

  const auto t0 = Clock::now();
  const std::vector<nn::LossPoint> curve = nn::train(model.spec, model.params, *model.adam, samples, tc);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  model.meta.epochs_trained = start_epoch + cfg.net.epochs;
  write_lsrm(model_path, model);
  const std::string loss_csv = model_path + ".loss.csv";
  if (start_epoch > 0)
    append_loss_csv(loss_csv, curve);
  else
    write_loss_csv(loss_csv, curve);

  TrainSummary s;
  s.final_l1 = curve.empty() ? 0.0 : curve.back().train_l1;
  s.epochs_trained = model.meta.epochs_trained;
  s.seconds = seconds;
  return s;
}

std::string run_upscale(const PipelineConfig& cfg, const std::string& scan_path,
                        const std::string& model_path, const std::string& method,
                        const std::string& out_dir) {
  const RangeImage low = read_lsrs(scan_path);
  ModelFile model;
  const ModelFile* model_ptr = nullptr;
  if (method == "nn" || method == "nn-mc") {
    model = load_model(model_path);
    model_ptr = &model;
  }
  const auto upscaler = make_upscaler(method, cfg, model_ptr);

  ensure_dir(out_dir);
  const std::string stem = fs::path(scan_path).stem().string() + "_" + method;
  const fs::path base = fs::path(out_dir) / stem;

  const UpscaleOutput out = upscaler->run(normalize(low));
  const PointCloud cloud = unproject(denorm_clamped(out.image));

  write_lsrs(base.string() + ".lsrs", denorm_clamped(out.image));
  write_cloud_csv(base.string() + "_cloud.csv", cloud);
  if (out.mc) {
    write_lsrs(base.string() + "_mean.lsrs", denorm_clamped(out.mc->mean));
    RangeImage std_m;
    std_m.intrinsics = out.mc->std.intrinsics;
    std_m.data.resize(out.mc->std.data.size());
    for (std::size_t i = 0; i < std_m.data.size(); ++i)
      std_m.data[i] = static_cast<float>(out.mc->std.data[i] *
                                         static_cast<double>(std_m.intrinsics.max_range_m));
    write_lsrs(base.string() + "_std.lsrs", std_m);
    nlohmann::ordered_json summary;
    summary["T"] = cfg.mc.passes;
    summary["lambda"] = cfg.mc.lambda;
    summary["removed_fraction"] = out.mc->removed_fraction;
    std::ofstream js(base.string() + "_summary.json", std::ios::trunc);
    if (!js) throw ConfigError("cannot write summary json");
    js << summary.dump(2) << "\n";
  }
  return base.string() + ".lsrs";
}

void run_map(const PipelineConfig& cfg, const std::string& manifest_path, bool use_high,
             const std::string& like_grid, const std::string& out_path) {
  const std::vector<ScanPair> pairs = load_dataset_pairs(manifest_path);
  if (pairs.empty()) throw ConfigError("manifest has no pairs: " + manifest_path);

  std::vector<std::pair<PointCloud, Pose>> scans;
  scans.reserve(pairs.size());
  for (const ScanPair& p : pairs)
    scans.emplace_back(unproject(use_high ? p.high : p.low), p.pose);

  GridConfig gc;
  if (!like_grid.empty()) {
    gc = read_lsrg(like_grid).config();
    gc.occ = cfg.grid.occ;
  } else {
    gc = fit_grid_bounds(scans, cfg.grid.resolution, cfg.grid.occ);
  }
  const VoxelGrid grid = build_map(scans, gc, cfg.intrinsics.max_range_m);
  write_lsrg(out_path, grid);
  write_grid_csv(out_path + ".csv", grid);
}

std::vector<MethodMetrics> run_eval(const PipelineConfig& cfg, const std::string& manifest_path,
                                    const std::string& model_path,
                                    const std::vector<std::string>& methods,
                                    const std::string& out_dir) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const std::vector<ScanPair> pairs = load_dataset_pairs(manifest_path);
  if (pairs.empty()) throw ConfigError("manifest has no pairs: " + manifest_path);
  ensure_dir(out_dir);

  const double max_range = cfg.intrinsics.max_range_m;

  // Ground-truth map fixes the lattice every other map shares.
  std::vector<std::pair<PointCloud, Pose>> truth_scans;
  for (const ScanPair& p : pairs) truth_scans.emplace_back(unproject(p.high), p.pose);
  const GridConfig gc = fit_grid_bounds(truth_scans, cfg.grid.resolution, cfg.grid.occ);
  const VoxelGrid truth = build_map(truth_scans, gc, max_range);
  write_lsrg((fs::path(out_dir) / "truth.lsrg").string(), truth);

  ModelFile model;
  const ModelFile* model_ptr = nullptr;
  const bool needs_model = std::any_of(methods.begin(), methods.end(), [](const std::string& m) {
    return m == "nn" || m == "nn-mc";
  });
  if (needs_model) {
    model = load_model(model_path);
    model_ptr = &model;
    if (static_cast<std::uint32_t>(model.meta.factor) != manifest.factor)
      throw ConfigError("model factor does not match the test dataset factor");
  }

  std::vector<MethodMetrics> rows;
  for (const std::string& method : methods) {
    MethodMetrics row;
    row.method = method;
    row.scan_count = static_cast<int>(pairs.size());

    VoxelGrid grid(gc);
    if (method == "baseline") {
      for (const ScanPair& p : pairs) grid.integrate_scan(unproject(p.low), p.pose, max_range);
    } else {
      const auto upscaler = make_upscaler(method, cfg, model_ptr);
      double l1_sum = 0.0, removed_sum = 0.0, time_sum = 0.0;
      for (const ScanPair& p : pairs) {
        const NormalizedImage low_n = normalize(p.low);
        const auto t0 = Clock::now();
        const UpscaleOutput out = upscaler->run(low_n);
        time_sum += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

        // MC methods score the pre-filter ensemble mean; the filtered image
        // is what goes into the map.
        const NormalizedImage& scored = out.mc ? out.mc->mean : out.image;
        l1_sum += l1_metric(scored, normalize(p.high));
        if (out.mc) removed_sum += out.mc->removed_fraction;

        grid.integrate_scan(unproject(denorm_clamped(out.image)), p.pose, max_range);
      }
      row.l1 = l1_sum / pairs.size();
      if (method == "nn-mc") row.removed_pct = removed_sum / pairs.size();
      row.ms_per_image = cfg.measure_timing ? std::optional<double>(time_sum / pairs.size())
                                            : std::optional<double>(0.0);
    }

    const RocCurve roc = roc_auc(grid, truth);
    row.auc = roc.auc;
    write_roc_csv((fs::path(out_dir) / ("roc_" + method + ".csv")).string(), roc);
    write_lsrg((fs::path(out_dir) / (method + ".lsrg")).string(), grid);
    rows.push_back(std::move(row));
  }

  write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), rows);
  return rows;
}

std::vector<MethodMetrics> run_pipeline(const PipelineConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  const std::string data_dir = (fs::path(out_dir) / "train_data").string();
  run_gen_data(cfg, data_dir);

  const std::string model_path = (fs::path(out_dir) / "model.lsrm").string();
  run_train(cfg, data_dir, model_path, "");

  // Held-out evaluation set: no augmentation, no attitude jitter.
  PipelineConfig test_cfg = cfg;
  test_cfg.augment_multiplier = 1;
  test_cfg.attitude_jitter_deg = 0.0;
  const auto test_pairs = generate_pairs(test_cfg, cfg.test_scene, cfg.test_trajectory, 1, 0.0);
  const std::string test_dir = (fs::path(out_dir) / "test_data").string();
  write_pairs(test_pairs, test_cfg, test_dir);

  return run_eval(cfg, (fs::path(test_dir) / "manifest.json").string(), model_path,
                  {"baseline", "linear", "cubic", "nn", "nn-mc"},
                  (fs::path(out_dir) / "eval").string());
}

}  // namespace lsr
