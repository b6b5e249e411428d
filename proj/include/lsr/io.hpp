#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lsr/dataset.hpp"
#include "lsr/geometry.hpp"
#include "lsr/metrics.hpp"
#include "lsr/nn/network.hpp"
#include "lsr/nn/train.hpp"
#include "lsr/voxel_grid.hpp"

namespace lsr {

// LSRS scan file: magic "LSRS", u32 LE version (1), u32 rows, u32 cols,
// rows*cols f32 LE ranges in meters (row-major), then a 64-byte zero-padded
// JSON fragment {"vf","vc","rx","rn"} with the remaining intrinsics.
// Loading checks structure and finiteness only, so sigma maps and raw
// predictions can share the container.
void write_lsrs(const std::string& path, const RangeImage& img);
RangeImage read_lsrs(const std::string& path);

// 16-bit PGM (P5, maxval 65535, big-endian samples): range in millimeters,
// clamped to 65535.
void write_pgm16(const std::string& path, const RangeImage& img);

// Model file: binary blob at `path` (magic "LSRM", u32 version, f32 LE
// parameter arrays in spec order, optional Adam state) plus a JSON sidecar
// at `path`.json describing the architecture and training meta.
struct ModelMeta {
  int factor = 4;
  int base_filters = 8;
  float dropout = 0.25f;
  float base_lr = 1e-4f;
  float decay = 1e-5f;
  int epochs_trained = 0;
};

struct ModelFile {
  nn::NetworkSpec spec;
  nn::NetworkParams params;
  std::optional<nn::AdamState> adam;
  ModelMeta meta;
};

void write_lsrm(const std::string& path, const ModelFile& model);
ModelFile read_lsrm(const std::string& path);

// Grid file: magic "LSRG", u32 version (1), u32 nx/ny/nz, f64 origin xyz,
// f64 resolution, f32 l_hit/l_miss/l_min/l_max/state_delta, f32 log-odds
// array, u8 touched array.
void write_lsrg(const std::string& path, const VoxelGrid& grid);
VoxelGrid read_lsrg(const std::string& path);

void write_cloud_csv(const std::string& path, const PointCloud& cloud);
void write_grid_csv(const std::string& path, const VoxelGrid& grid);  // occupied voxels x,y,z,p
void write_roc_csv(const std::string& path, const RocCurve& curve);
void write_loss_csv(const std::string& path, const std::vector<nn::LossPoint>& curve);
void append_loss_csv(const std::string& path, const std::vector<nn::LossPoint>& curve);
void write_metrics_csv(const std::string& path, const std::vector<MethodMetrics>& rows);

// Dataset manifest: {"intrinsics", "factor", "pairs":[{low_path, high_path,
// pose}]} with paths relative to the manifest directory.
struct ManifestEntry {
  std::string low_path;
  std::string high_path;
  Pose pose;
};

struct DatasetManifest {
  SensorIntrinsics intrinsics;  // hi-res
  std::uint32_t factor = 4;
  std::vector<ManifestEntry> pairs;
};

void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

// Loads the pair files next to the manifest.
std::vector<ScanPair> load_dataset_pairs(const std::string& manifest_path);

}  // namespace lsr
