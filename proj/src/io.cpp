#include "lsr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lsr/error.hpp"

namespace lsr {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  return in;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  const std::uint64_t lo = get_u32(in, path);
  const std::uint64_t hi = get_u32(in, path);
  return lo | (hi << 32);
}

float get_f32(std::istream& in, const std::string& path) {
  const std::uint32_t bits = get_u32(in, path);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double get_f64(std::istream& in, const std::string& path) {
  const std::uint64_t bits = get_u64(in, path);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_f32_array(std::ostream& out, const std::vector<float>& v) {
  // Little-endian host: bulk write, else fall back per element.
  static_assert(sizeof(float) == 4);
  for (float f : v) put_f32(out, f);
}

void get_f32_array(std::istream& in, std::vector<float>& v, const std::string& path) {
  for (float& f : v) f = get_f32(in, path);
}

void check_magic(std::istream& in, const char* magic, const std::string& path) {
  char buf[4];
  if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
    throw FormatError(path + ": bad magic, expected " + magic);
}

// Shortest float repr that round-trips; used for the LSRS intrinsics
// trailer where space is fixed at 64 bytes.
std::string f32_str(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

float f32_field(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw FormatError(path + ": intrinsics trailer missing '" + key + "'");
  return j.at(key).get<float>();
}

}  // namespace

void write_lsrs(const std::string& path, const RangeImage& img) {
  if (img.data.size() != static_cast<std::size_t>(img.rows()) * img.cols())
    throw ConfigError("lsrs write: image data size mismatch");
  std::ofstream out = open_out(path);
  out.write("LSRS", 4);
  put_u32(out, 1);
  put_u32(out, img.rows());
  put_u32(out, img.cols());
  put_f32_array(out, img.data);

  std::string trailer = "{\"vf\":" + f32_str(img.intrinsics.v_fov_deg) +
                        ",\"vc\":" + f32_str(img.intrinsics.v_center_deg) +
                        ",\"rx\":" + f32_str(img.intrinsics.max_range_m) +
                        ",\"rn\":" + f32_str(img.intrinsics.min_range_m) + "}";
  if (trailer.size() > 64)
    throw FormatError("lsrs write: intrinsics trailer exceeds 64 bytes: " + trailer);
  trailer.resize(64, '\0');
  out.write(trailer.data(), 64);
  if (!out) throw ConfigError("lsrs write failed: " + path);
}

RangeImage read_lsrs(const std::string& path) {
  std::ifstream in = open_in(path);
  check_magic(in, "LSRS", path);
  const std::uint32_t version = get_u32(in, path);
  if (version != 1) throw FormatError(path + ": unsupported LSRS version " + std::to_string(version));
  const std::uint32_t rows = get_u32(in, path);
  const std::uint32_t cols = get_u32(in, path);
  if (rows < 2 || cols < 4 || static_cast<std::uint64_t>(rows) * cols > (1ull << 26))
    throw FormatError(path + ": implausible dims " + std::to_string(rows) + "x" + std::to_string(cols));

  RangeImage img;
  img.data.resize(static_cast<std::size_t>(rows) * cols);
  get_f32_array(in, img.data, path);

  char trailer[65] = {0};
  if (!in.read(trailer, 64)) throw FormatError(path + ": missing intrinsics trailer");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(std::string(trailer, strnlen(trailer, 64)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": intrinsics trailer: " + e.what());
  }
  img.intrinsics.channels = rows;
  img.intrinsics.h_res = cols;
  img.intrinsics.v_fov_deg = f32_field(meta, "vf", path);
  img.intrinsics.v_center_deg = f32_field(meta, "vc", path);
  img.intrinsics.max_range_m = f32_field(meta, "rx", path);
  img.intrinsics.min_range_m = f32_field(meta, "rn", path);
  img.intrinsics.validate();
  for (float v : img.data)
    if (!std::isfinite(v)) throw FormatError(path + ": non-finite range value");
  return img;
}

void write_pgm16(const std::string& path, const RangeImage& img) {
  std::ofstream out = open_out(path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n65535\n";
  for (float v : img.data) {
    const long long mm = std::llround(std::max(0.0, static_cast<double>(v) * 1000.0));
    const std::uint16_t q = static_cast<std::uint16_t>(std::min<long long>(65535, mm));
    const unsigned char b[2] = {static_cast<unsigned char>(q >> 8),
                                static_cast<unsigned char>(q & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!out) throw ConfigError("pgm write failed: " + path);
}

namespace {

// Trainable arrays in canonical (spec) order: weight, bias, gamma, beta.
template <typename Params, typename Fn>
void for_each_trainable(const nn::NetworkSpec& spec, Params& params, Fn&& fn) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    auto& p = params.layers[i];
    fn(p.weight);
    fn(p.bias);
    fn(p.gamma);
    fn(p.beta);
  }
}

std::uint64_t total_f32_count(const nn::NetworkSpec& spec) {
  std::uint64_t n = 0;
  for (const nn::LayerSpec& l : spec.layers) {
    if (l.kind == nn::LayerKind::Conv || l.kind == nn::LayerKind::TransposedConv)
      n += l.conv.weight_count() + l.conv.out_ch;
    else if (l.kind == nn::LayerKind::BatchNorm)
      n += 4ull * l.channels;  // gamma, beta, running mean/var
  }
  return n;
}

}  // namespace

void write_lsrm(const std::string& path, const ModelFile& model) {
  if (model.spec.layers.size() != model.params.layers.size())
    throw ConfigError("lsrm write: params do not match spec");

  nlohmann::ordered_json side;
  side["format"] = "lsrm";
  side["version"] = 1;
  side["factor"] = model.meta.factor;
  side["base_filters"] = model.meta.base_filters;
  side["dropout"] = model.meta.dropout;
  side["base_lr"] = model.meta.base_lr;
  side["decay"] = model.meta.decay;
  side["epochs_trained"] = model.meta.epochs_trained;
  side["network"] = model.spec.to_json();
  {
    std::ofstream out = open_out(path + ".json");
    out << side.dump(2) << "\n";
    if (!out) throw ConfigError("lsrm sidecar write failed: " + path + ".json");
  }

  std::ofstream out = open_out(path);
  out.write("LSRM", 4);
  put_u32(out, 1);
  put_u64(out, total_f32_count(model.spec));
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    const nn::LayerParams& p = model.params.layers[i];
    put_f32_array(out, p.weight);
    put_f32_array(out, p.bias);
    put_f32_array(out, p.gamma);
    put_f32_array(out, p.beta);
    put_f32_array(out, p.running_mean);
    put_f32_array(out, p.running_var);
  }
  out.put(model.adam ? 1 : 0);
  if (model.adam) {
    put_u64(out, model.adam->step);
    for_each_trainable(model.spec, model.adam->m,
                       [&](const std::vector<float>& a) { put_f32_array(out, a); });
    for_each_trainable(model.spec, model.adam->v,
                       [&](const std::vector<float>& a) { put_f32_array(out, a); });
  }
  if (!out) throw ConfigError("lsrm write failed: " + path);
}

ModelFile read_lsrm(const std::string& path) {
  nlohmann::json side;
  {
    std::ifstream sin(path + ".json", std::ios::binary);
    if (!sin) throw ConfigError("model sidecar not found: " + path + ".json");
    try {
      sin >> side;
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path + ".json: " + e.what());
    }
  }
  ModelFile model;
  try {
    model.meta.factor = side.at("factor").get<int>();
    model.meta.base_filters = side.at("base_filters").get<int>();
    model.meta.dropout = side.at("dropout").get<float>();
    model.meta.base_lr = side.at("base_lr").get<float>();
    model.meta.decay = side.at("decay").get<float>();
    model.meta.epochs_trained = side.at("epochs_trained").get<int>();
    model.spec = nn::NetworkSpec::from_json(side.at("network"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ".json: " + e.what());
  }

  std::ifstream in = open_in(path);
  check_magic(in, "LSRM", path);
  const std::uint32_t version = get_u32(in, path);
  if (version != 1) throw FormatError(path + ": unsupported LSRM version " + std::to_string(version));
  const std::uint64_t expect = get_u64(in, path);
  if (expect != total_f32_count(model.spec))
    throw FormatError(path + ": parameter count does not match the sidecar spec");

  model.params.layers.resize(model.spec.layers.size());
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    const nn::LayerSpec& l = model.spec.layers[i];
    nn::LayerParams& p = model.params.layers[i];
    if (l.kind == nn::LayerKind::Conv || l.kind == nn::LayerKind::TransposedConv) {
      p.weight.resize(l.conv.weight_count());
      p.bias.resize(l.conv.out_ch);
    } else if (l.kind == nn::LayerKind::BatchNorm) {
      p.gamma.resize(l.channels);
      p.beta.resize(l.channels);
      p.running_mean.resize(l.channels);
      p.running_var.resize(l.channels);
    }
    get_f32_array(in, p.weight, path);
    get_f32_array(in, p.bias, path);
    get_f32_array(in, p.gamma, path);
    get_f32_array(in, p.beta, path);
    get_f32_array(in, p.running_mean, path);
    get_f32_array(in, p.running_var, path);
  }
  char has_adam = 0;
  if (!in.get(has_adam)) throw FormatError(path + ": truncated file");
  if (has_adam) {
    nn::AdamState st = nn::init_adam(model.spec);
    st.step = get_u64(in, path);
    for_each_trainable(model.spec, st.m, [&](std::vector<float>& a) { get_f32_array(in, a, path); });
    for_each_trainable(model.spec, st.v, [&](std::vector<float>& a) { get_f32_array(in, a, path); });
    model.adam = std::move(st);
  }
  return model;
}

void write_lsrg(const std::string& path, const VoxelGrid& grid) {
  const GridConfig& cfg = grid.config();
  std::ofstream out = open_out(path);
  out.write("LSRG", 4);
  put_u32(out, 1);
  put_u32(out, cfg.nx);
  put_u32(out, cfg.ny);
  put_u32(out, cfg.nz);
  put_f64(out, cfg.origin.x);
  put_f64(out, cfg.origin.y);
  put_f64(out, cfg.origin.z);
  put_f64(out, cfg.resolution);
  put_f32(out, cfg.occ.l_hit);
  put_f32(out, cfg.occ.l_miss);
  put_f32(out, cfg.occ.l_min);
  put_f32(out, cfg.occ.l_max);
  put_f32(out, cfg.occ.state_delta);
  put_f32_array(out, grid.raw_log_odds());
  out.write(reinterpret_cast<const char*>(grid.raw_touched().data()),
            static_cast<std::streamsize>(grid.raw_touched().size()));
  if (!out) throw ConfigError("lsrg write failed: " + path);
}

VoxelGrid read_lsrg(const std::string& path) {
  std::ifstream in = open_in(path);
  check_magic(in, "LSRG", path);
  const std::uint32_t version = get_u32(in, path);
  if (version != 1) throw FormatError(path + ": unsupported LSRG version " + std::to_string(version));
  GridConfig cfg;
  cfg.nx = get_u32(in, path);
  cfg.ny = get_u32(in, path);
  cfg.nz = get_u32(in, path);
  cfg.origin.x = get_f64(in, path);
  cfg.origin.y = get_f64(in, path);
  cfg.origin.z = get_f64(in, path);
  cfg.resolution = get_f64(in, path);
  cfg.occ.l_hit = get_f32(in, path);
  cfg.occ.l_miss = get_f32(in, path);
  cfg.occ.l_min = get_f32(in, path);
  cfg.occ.l_max = get_f32(in, path);
  cfg.occ.state_delta = get_f32(in, path);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path + ": " + e.what());
  }
  VoxelGrid grid(cfg);
  std::vector<float> lo(grid.voxel_count());
  std::vector<std::uint8_t> touched(grid.voxel_count());
  get_f32_array(in, lo, path);
  if (!in.read(reinterpret_cast<char*>(touched.data()),
               static_cast<std::streamsize>(touched.size())))
    throw FormatError(path + ": truncated touched array");
  grid.load_raw(std::move(lo), std::move(touched));
  return grid;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void write_cloud_csv(const std::string& path, const PointCloud& cloud) {
  std::ofstream out = open_out(path);
  out << "x,y,z,ring\n";
  for (const LidarPoint& p : cloud.points)
    out << fmt(p.x) << "," << fmt(p.y) << "," << fmt(p.z) << "," << p.ring << "\n";
  if (!out) throw ConfigError("csv write failed: " + path);
}

void write_grid_csv(const std::string& path, const VoxelGrid& grid) {
  std::ofstream out = open_out(path);
  out << "x,y,z,p\n";
  const GridConfig& cfg = grid.config();
  for (int z = 0; z < static_cast<int>(cfg.nz); ++z)
    for (int y = 0; y < static_cast<int>(cfg.ny); ++y)
      for (int x = 0; x < static_cast<int>(cfg.nx); ++x) {
        const VoxelIndex v{x, y, z};
        if (grid.state(v) != VoxelState::Occupied) continue;
        const Vec3 c = grid.center_of(v);
        out << fmt(c.x) << "," << fmt(c.y) << "," << fmt(c.z) << "," << fmt(grid.occupancy(v))
            << "\n";
      }
  if (!out) throw ConfigError("csv write failed: " + path);
}

void write_roc_csv(const std::string& path, const RocCurve& curve) {
  std::ofstream out = open_out(path);
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points)
    out << fmt(p.threshold) << "," << fmt(p.fpr) << "," << fmt(p.tpr) << "\n";
  if (!out) throw ConfigError("csv write failed: " + path);
}

void write_loss_csv(const std::string& path, const std::vector<nn::LossPoint>& curve) {
  std::ofstream out = open_out(path);
  out << "epoch,lr,train_l1\n";
  for (const auto& p : curve) out << p.epoch << "," << fmt(p.lr) << "," << fmt(p.train_l1) << "\n";
  if (!out) throw ConfigError("csv write failed: " + path);
}

void append_loss_csv(const std::string& path, const std::vector<nn::LossPoint>& curve) {
  if (!fs::exists(path)) {
    write_loss_csv(path, curve);
    return;
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot open for append: " + path);
  for (const auto& p : curve) out << p.epoch << "," << fmt(p.lr) << "," << fmt(p.train_l1) << "\n";
}

void write_metrics_csv(const std::string& path, const std::vector<MethodMetrics>& rows) {
  std::ofstream out = open_out(path);
  out << "method,l1,removed_pct,auc,ms_per_image,scan_count\n";
  const auto cell = [&](const std::optional<double>& v) {
    return v ? fmt(*v) : std::string("N/A");
  };
  for (const MethodMetrics& r : rows)
    out << r.method << "," << cell(r.l1) << "," << cell(r.removed_pct) << "," << cell(r.auc)
        << "," << cell(r.ms_per_image) << "," << r.scan_count << "\n";
  if (!out) throw ConfigError("csv write failed: " + path);
}

namespace {

nlohmann::ordered_json pose_to_json(const Pose& p) {
  nlohmann::ordered_json j;
  j["position"] = {p.x, p.y, p.z};
  j["yaw"] = p.yaw;
  j["pitch"] = p.pitch;
  j["roll"] = p.roll;
  return j;
}

Pose pose_from_json(const nlohmann::json& j) {
  Pose p;
  const auto& pos = j.at("position");
  p.x = pos[0].get<double>();
  p.y = pos[1].get<double>();
  p.z = pos[2].get<double>();
  p.yaw = j.at("yaw").get<double>();
  p.pitch = j.at("pitch").get<double>();
  p.roll = j.at("roll").get<double>();
  return p;
}

}  // namespace

void write_manifest(const std::string& path, const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["intrinsics"] = {{"channels", m.intrinsics.channels},
                     {"h_res", m.intrinsics.h_res},
                     {"v_fov_deg", m.intrinsics.v_fov_deg},
                     {"v_center_deg", m.intrinsics.v_center_deg},
                     {"max_range_m", m.intrinsics.max_range_m},
                     {"min_range_m", m.intrinsics.min_range_m}};
  j["factor"] = m.factor;
  j["pairs"] = nlohmann::ordered_json::array();
  for (const ManifestEntry& e : m.pairs) {
    nlohmann::ordered_json r;
    r["low_path"] = e.low_path;
    r["high_path"] = e.high_path;
    r["pose"] = pose_to_json(e.pose);
    j["pairs"].push_back(std::move(r));
  }
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw ConfigError("manifest write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("manifest not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    const auto& intr = j.at("intrinsics");
    m.intrinsics.channels = intr.at("channels").get<std::uint32_t>();
    m.intrinsics.h_res = intr.at("h_res").get<std::uint32_t>();
    m.intrinsics.v_fov_deg = intr.at("v_fov_deg").get<float>();
    m.intrinsics.v_center_deg = intr.at("v_center_deg").get<float>();
    m.intrinsics.max_range_m = intr.at("max_range_m").get<float>();
    m.intrinsics.min_range_m = intr.at("min_range_m").get<float>();
    m.factor = j.at("factor").get<std::uint32_t>();
    for (const auto& r : j.at("pairs")) {
      ManifestEntry e;
      e.low_path = r.at("low_path").get<std::string>();
      e.high_path = r.at("high_path").get<std::string>();
      e.pose = pose_from_json(r.at("pose"));
      m.pairs.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  m.intrinsics.validate();
  return m;
}

std::vector<ScanPair> load_dataset_pairs(const std::string& manifest_path) {
  const DatasetManifest m = read_manifest(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<ScanPair> pairs;
  pairs.reserve(m.pairs.size());
  for (const ManifestEntry& e : m.pairs) {
    ScanPair p;
    p.low = read_lsrs((dir / e.low_path).string());
    p.high = read_lsrs((dir / e.high_path).string());
    p.pose = e.pose;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace lsr
