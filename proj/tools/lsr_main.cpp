// lsr: simulation-trained lidar super-resolution toolkit.
//
// Talks to the core exclusively through the C API in lsr/lsr.h; CLI11 and
// nlohmann/json are used header-only for argument and config handling.

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lsr/lsr.h"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

int report(lsr_status status) {
  if (status != LSR_OK) std::fprintf(stderr, "error: %s\n", lsr_last_error());
  return static_cast<int>(status);
}

// defaults <- config file <- --set overrides <- explicit flags
struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;
  ordered_json flags = ordered_json::object();

  std::string assemble() const {
    char* def = lsr_default_config();
    ordered_json doc = ordered_json::parse(def);
    lsr_string_free(def);

    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) {
        std::fprintf(stderr, "error: config file not found: %s\n", config_file.c_str());
        std::exit(2);
      }
      json file_cfg;
      try {
        in >> file_cfg;
      } catch (const json::parse_error& e) {
        std::fprintf(stderr, "error: %s: %s\n", config_file.c_str(), e.what());
        std::exit(3);
      }
      merge(doc, file_cfg);
    }
    for (const std::string& kv : sets) apply_set(doc, kv);
    merge(doc, flags);
    return doc.dump();
  }

  static void merge(ordered_json& base, const json& overlay) {
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
      if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
        ordered_json sub = base[it.key()];
        merge(sub, *it);
        base[it.key()] = sub;
      } else {
        base[it.key()] = *it;
      }
    }
  }

  static void apply_set(ordered_json& doc, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      std::exit(2);
    }
    const std::string key = kv.substr(0, eq);
    json value;
    try {
      value = json::parse(kv.substr(eq + 1));
    } catch (const json::parse_error&) {
      value = kv.substr(eq + 1);
    }
    ordered_json* node = &doc;
    std::size_t pos = 0;
    while (true) {
      const std::size_t dot = key.find('.', pos);
      const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
      if (dot == std::string::npos) {
        (*node)[part] = value;
        return;
      }
      if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = ordered_json::object();
      node = &(*node)[part];
      pos = dot + 1;
    }
  }

  void add_common(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file");
    cmd->add_option("--set", sets, "override a config key, e.g. --set net.epochs=10")
        ->take_all();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lidar super-resolution toolkit: synthetic scan generation, "
               "encoder-decoder upscaling with MC-dropout filtering, and "
               "occupancy-map evaluation"};
  app.require_subcommand(1);

  // ---- gen-data ----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "raycast a scene into training pairs");
  ConfigArgs gen_cfg;
  gen_cfg.add_common(gen);
  std::string gen_scene, gen_traj, gen_out;
  std::optional<int> gen_channels, gen_cols, gen_factor, gen_mult;
  std::optional<std::uint64_t> gen_seed;
  bool gen_full = false;
  gen->add_option("--scene", gen_scene, "scene JSON file")->required();
  gen->add_option("--traj", gen_traj, "trajectory JSON file")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--channels", gen_channels, "hi-res channel count");
  gen->add_option("--cols", gen_cols, "range image columns");
  gen->add_option("--factor", gen_factor, "upscaling factor (2, 4 or 8)");
  gen->add_option("--augment-mult", gen_mult, "pairs per pose (1 = no augmentation)");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_flag("--full", gen_full, "full-scale preset (1024 columns, 32 filters)");

  // ---- train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train the upscaling network on a dataset");
  ConfigArgs train_cfg;
  train_cfg.add_common(train);
  std::string train_data, train_out, train_init;
  std::optional<int> train_factor, train_epochs, train_batch, train_filters;
  std::optional<double> train_lr, train_decay, train_dropout;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--data", train_data, "gen-data output directory")->required();
  train->add_option("--out", train_out, "model output path (.lsrm)")->required();
  train->add_option("--factor", train_factor, "upscaling factor");
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--batch", train_batch, "batch size");
  train->add_option("--base-filters", train_filters, "encoder base filter count");
  train->add_option("--lr", train_lr, "Adam learning rate");
  train->add_option("--decay", train_decay, "per-epoch inverse-time lr decay");
  train->add_option("--dropout", train_dropout, "dropout rate");
  train->add_option("--seed", train_seed, "RNG seed");
  train->add_option("--init-from", train_init, "resume from an existing model");

  // ---- upscale --------------------------------------------------------------
  auto* up = app.add_subcommand("upscale", "upscale one scan");
  ConfigArgs up_cfg;
  up_cfg.add_common(up);
  std::string up_in, up_model, up_method = "nn-mc", up_out;
  std::optional<int> up_factor, up_passes;
  std::optional<double> up_lambda;
  std::optional<std::uint64_t> up_seed;
  up->add_option("--in", up_in, "input scan (.lsrs)")->required();
  up->add_option("--method", up_method, "linear | cubic | nn | nn-mc")->required();
  up->add_option("--model", up_model, "model path (nn / nn-mc)");
  up->add_option("--out", up_out, "output directory")->required();
  up->add_option("--factor", up_factor, "upscaling factor (linear / cubic)");
  up->add_option("--passes", up_passes, "MC inference count T");
  up->add_option("--lambda", up_lambda, "MC filter threshold coefficient");
  up->add_option("--seed", up_seed, "RNG seed");

  // ---- map --------------------------------------------------------------------
  auto* map = app.add_subcommand("map", "build an occupancy grid from a dataset manifest");
  ConfigArgs map_cfg;
  map_cfg.add_common(map);
  std::string map_manifest, map_out, map_like, map_use = "high";
  std::optional<double> map_res;
  map->add_option("--manifest", map_manifest, "dataset manifest JSON")->required();
  map->add_option("--out", map_out, "output grid (.lsrg)")->required();
  map->add_option("--use", map_use, "which scans to integrate: high | low");
  map->add_option("--res", map_res, "voxel resolution in meters");
  map->add_option("--like", map_like, "copy grid bounds from an existing .lsrg");

  // ---- eval ---------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "compare methods against the ground-truth map");
  ConfigArgs ev_cfg;
  ev_cfg.add_common(ev);
  std::string ev_manifest, ev_model, ev_out, ev_methods = "baseline,linear,cubic,nn,nn-mc";
  std::string ev_pred, ev_truth;
  std::optional<double> ev_res;
  ev->add_option("--data", ev_manifest, "test dataset manifest JSON");
  ev->add_option("--model", ev_model, "model path for nn methods");
  ev->add_option("--out", ev_out, "output directory");
  ev->add_option("--methods", ev_methods, "comma-separated method list");
  ev->add_option("--res", ev_res, "voxel resolution in meters");
  ev->add_option("--pred", ev_pred, "grid-mode: predicted .lsrg");
  ev->add_option("--truth", ev_truth, "grid-mode: ground-truth .lsrg");

  // ---- pipeline -------------------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "gen-data + train + eval in one run");
  ConfigArgs pipe_cfg;
  pipe_cfg.add_common(pipe);
  std::string pipe_out;
  bool pipe_full = false;
  pipe->add_option("--out", pipe_out, "output directory")->required();
  pipe->add_flag("--full", pipe_full, "full-scale preset (1024 columns, 32 filters)");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    gen_cfg.flags["scene"] = gen_scene;
    gen_cfg.flags["trajectory"] = gen_traj;
    if (gen_full) gen_cfg.flags["full"] = true;
    if (gen_channels) gen_cfg.flags["intrinsics"]["channels"] = *gen_channels;
    if (gen_cols) gen_cfg.flags["intrinsics"]["h_res"] = *gen_cols;
    if (gen_factor) gen_cfg.flags["factor"] = *gen_factor;
    if (gen_mult) gen_cfg.flags["augment"]["multiplier"] = *gen_mult;
    if (gen_seed) gen_cfg.flags["seed"] = *gen_seed;
    size_t pairs = 0;
    const lsr_status st = lsr_run_gen_data(gen_cfg.assemble().c_str(), gen_out.c_str(), &pairs);
    if (st == LSR_OK) std::printf("wrote %zu pairs to %s\n", pairs, gen_out.c_str());
    return report(st);
  }

  if (train->parsed()) {
    if (train_factor) train_cfg.flags["factor"] = *train_factor;
    if (train_epochs) train_cfg.flags["net"]["epochs"] = *train_epochs;
    if (train_batch) train_cfg.flags["net"]["batch"] = *train_batch;
    if (train_filters) train_cfg.flags["net"]["base_filters"] = *train_filters;
    if (train_lr) train_cfg.flags["net"]["lr"] = *train_lr;
    if (train_decay) train_cfg.flags["net"]["decay"] = *train_decay;
    if (train_dropout) train_cfg.flags["net"]["dropout"] = *train_dropout;
    if (train_seed) train_cfg.flags["seed"] = *train_seed;
    double final_l1 = 0.0;
    const lsr_status st =
        lsr_run_train(train_cfg.assemble().c_str(), train_data.c_str(), train_out.c_str(),
                      train_init.empty() ? nullptr : train_init.c_str(), &final_l1);
    if (st == LSR_OK) std::printf("final train L1: %.6f\n", final_l1);
    return report(st);
  }

  if (up->parsed()) {
    if (up_factor) up_cfg.flags["factor"] = *up_factor;
    if (up_passes) up_cfg.flags["mc"]["passes"] = *up_passes;
    if (up_lambda) up_cfg.flags["mc"]["lambda"] = *up_lambda;
    if (up_seed) up_cfg.flags["seed"] = *up_seed;
    const lsr_status st =
        lsr_run_upscale(up_cfg.assemble().c_str(), up_in.c_str(),
                        up_model.empty() ? nullptr : up_model.c_str(), up_method.c_str(),
                        up_out.c_str());
    return report(st);
  }

  if (map->parsed()) {
    if (map_use != "high" && map_use != "low") {
      std::fprintf(stderr, "error: --use must be high or low\n");
      return 2;
    }
    if (map_res) map_cfg.flags["grid"]["resolution"] = *map_res;
    const lsr_status st =
        lsr_run_map(map_cfg.assemble().c_str(), map_manifest.c_str(), map_use == "high" ? 1 : 0,
                    map_like.empty() ? nullptr : map_like.c_str(), map_out.c_str());
    return report(st);
  }

  if (ev->parsed()) {
    if (!ev_pred.empty() || !ev_truth.empty()) {
      if (ev_pred.empty() || ev_truth.empty()) {
        std::fprintf(stderr, "error: grid mode needs both --pred and --truth\n");
        return 2;
      }
      lsr_grid* pred = nullptr;
      lsr_grid* truth = nullptr;
      lsr_status st = lsr_grid_load(ev_pred.c_str(), &pred);
      if (st == LSR_OK) st = lsr_grid_load(ev_truth.c_str(), &truth);
      double auc = 0.0;
      if (st == LSR_OK) {
        const std::string roc = ev_out.empty() ? "roc.csv" : ev_out + "/roc.csv";
        st = lsr_roc_auc(pred, truth, roc.c_str(), &auc);
        if (st == LSR_OK) std::printf("auc: %.6f (curve: %s)\n", auc, roc.c_str());
      }
      lsr_grid_free(pred);
      lsr_grid_free(truth);
      return report(st);
    }
    if (ev_manifest.empty() || ev_out.empty()) {
      std::fprintf(stderr, "error: eval needs --data and --out (or --pred/--truth)\n");
      return 2;
    }
    if (ev_res) ev_cfg.flags["grid"]["resolution"] = *ev_res;
    const lsr_status st =
        lsr_run_eval(ev_cfg.assemble().c_str(), ev_manifest.c_str(),
                     ev_model.empty() ? nullptr : ev_model.c_str(), ev_methods.c_str(),
                     ev_out.c_str());
    if (st == LSR_OK) std::printf("wrote %s/metrics.csv\n", ev_out.c_str());
    return report(st);
  }

  if (pipe->parsed()) {
    if (pipe_full) pipe_cfg.flags["full"] = true;
    const lsr_status st = lsr_run_pipeline(pipe_cfg.assemble().c_str(), pipe_out.c_str());
    if (st == LSR_OK) std::printf("wrote %s/eval/metrics.csv\n", pipe_out.c_str());
    return report(st);
  }

  return 0;
}
