#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cycletrans/tensor.hpp"

namespace cycletrans {

enum class Axis { Axial, Coronal, Sagittal };

const char* axis_name(Axis a);
Axis axis_from_string(const std::string& s);

/// 3D scalar image with millimeter spacing. Voxels are stored x-fastest,
/// matching the NIfTI raster order.
struct Volume {
  std::vector<double> voxels;
  Eigen::Index nx = 0, ny = 0, nz = 0;
  double sx = 1, sy = 1, sz = 1;
  std::string modality_tag;
  std::string id;

  double at(Eigen::Index x, Eigen::Index y, Eigen::Index z) const {
    return voxels[x + nx * (y + ny * z)];
  }
  double& at(Eigen::Index x, Eigen::Index y, Eigen::Index z) {
    return voxels[x + nx * (y + ny * z)];
  }

  Eigen::Index extent(Axis a) const {
    switch (a) {
      case Axis::Sagittal: return nx;
      case Axis::Coronal: return ny;
      default: return nz;
    }
  }

  /// Enforces type invariants; names the first offending voxel coordinate.
  void validate() const;
};

struct SliceRecord {
  ImageD pixels;  // crop_size x crop_size in [-1, 1]
  std::string source_volume_id;
  Axis axis = Axis::Axial;
  int index = 0;
  bool degenerate = false;
};

enum class NormalizationMode { PerSliceMinMax, PerVolumePercentile };

const char* normalization_name(NormalizationMode m);
NormalizationMode normalization_from_string(const std::string& s);

/// Half-open slice index interval.
struct IndexInterval {
  int begin = 0;
  int end = 0;
};

struct DataConfig {
  std::vector<Axis> axes{Axis::Axial};
  int crop_size = 144;
  NormalizationMode normalization = NormalizationMode::PerVolumePercentile;
  double percentile_lo = 1.0;
  double percentile_hi = 99.0;
  // slices whose raw range falls below this fraction of the normalization
  // range are flagged degenerate
  double degenerate_rel = 1e-3;
  int test_volumes_per_domain = 0;
  uint64_t seed = 0;
  bool exclude_degenerate_from_train = true;
  std::optional<IndexInterval> keep_range;
};

enum class SplitKind { Train, Test };

struct UnpairedDataset {
  std::vector<SliceRecord> domain_x;
  std::vector<SliceRecord> domain_y;
  SplitKind split = SplitKind::Train;
};

struct PreparedData {
  UnpairedDataset train;
  UnpairedDataset test;
  nlohmann::json manifest;
};

/// Reads a NIfTI file (.nii / .nii.gz) or a directory of grayscale PNG
/// slices stacked along the axial axis.
Volume load_volume(const std::filesystem::path& path);

std::vector<ImageD> slice_volume(const Volume& v, Axis axis,
                                 std::optional<IndexInterval> keep_range = {});

/// Inverse of slice_volume along the same axis; spacing/tag metadata supplied
/// by the caller.
Volume stack_slices(const std::vector<ImageD>& slices, Axis axis, double sx, double sy,
                    double sz, const std::string& tag, const std::string& id);

struct PreprocessResult {
  ImageD pixels;
  bool degenerate = false;
};

/// Zero-pads small inputs, center-crops to crop_size, and affinely maps
/// [clip_lo, clip_hi] onto [-1, 1] (clamped). Min-max mode derives the clip
/// bounds from the raw slice itself; constant slices map to -1.
PreprocessResult preprocess_slice(const ImageD& raw, int crop_size, NormalizationMode mode,
                                  double clip_lo, double clip_hi,
                                  double degenerate_rel = 1e-3);

std::pair<double, double> volume_percentiles(const Volume& v, double lo_pct, double hi_pct);

PreparedData build_dataset(const std::vector<Volume>& domain_x,
                           const std::vector<Volume>& domain_y, const DataConfig& config);

/// One epoch's deterministic unpaired pairing: every x exactly once in
/// shuffled order, y drawn from an independent shuffle with wrap-around.
std::vector<std::pair<int, int>> unpaired_epoch_order(int nx, int ny, uint64_t seed,
                                                      int epoch);

void save_prepared(const std::filesystem::path& dir, const PreparedData& data);
PreparedData load_prepared(const std::filesystem::path& dir);

}  // namespace cycletrans
