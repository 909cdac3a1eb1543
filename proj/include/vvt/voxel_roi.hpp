#pragma once

// Cube decomposition of a point-cloud scene, gaze-frustum hit counting,
// and volumetric ROI levels: F_a = density * hit_frequency / mean_distance
// per cube, with hit_frequency = hits / total_samples.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vvt/geometry.hpp"
#include "vvt/trace.hpp"

namespace vvt {

using CubeKey = std::int64_t;

struct CubeStats {
  std::int64_t point_count = 0;
  double density = 0;             // points per cubic meter
  std::int64_t hit_count = 0;     // samples whose gaze cone contains the center
  double mean_hit_distance = 0;   // meters, over hit samples
  double sum_inv_hit_distance = 0;
};

class VoxelGrid {
 public:
  /// Bins every point into a cube of side `edge_m`; bounds cover all
  /// points. Throws DataError("EmptyScene...") on an empty cloud.
  static VoxelGrid build(std::span<const Vec3> points, double edge_m);

  const Vec3& origin() const { return origin_; }
  double edge() const { return edge_; }
  const Eigen::Vector3i& dims() const { return dims_; }

  CubeKey key_of(int i, int j, int k) const;
  Eigen::Vector3i coords_of(CubeKey key) const;
  Vec3 center_of(CubeKey key) const;
  /// Key of the cube containing p, or -1 if outside the grid bounds.
  CubeKey key_for_point(const Vec3& p) const;

  // Deterministically ordered (std::map keeps keys sorted).
  const std::map<CubeKey, CubeStats>& cubes() const { return cubes_; }
  std::map<CubeKey, CubeStats>& cubes() { return cubes_; }

  std::int64_t total_points() const;

 private:
  Vec3 origin_{0, 0, 0};
  double edge_ = 0;
  Eigen::Vector3i dims_{0, 0, 0};
  std::map<CubeKey, CubeStats> cubes_;
};

struct ThresholdRule {
  enum class Mode {
    kFixed,             // keep cubes with point_count >= tau0
    kDistanceAdaptive,  // tau scales quadratically with viewing distance
  };
  Mode mode = Mode::kFixed;
  double tau0 = 4.0;
  double distance_ref_m = 1.0;
  double max_scale = 16.0;  // tau clamped to [tau0, max_scale * tau0]
};

/// Near-empty-cube filter. Distance-adaptive mode needs the headset
/// trajectory to compute each cube's mean viewing distance.
std::vector<CubeKey> filter_cubes(const VoxelGrid& grid,
                                  const ThresholdRule& rule,
                                  std::span<const Vec3> trajectory = {});

struct HitStats {
  std::int64_t hit_count = 0;
  double mean_distance = 0;
  double sum_inv_distance = 0;
};

/// Counts, per cube, the samples whose gaze cone contains the cube center,
/// and the mean headset-to-center distance over those samples. `threads`
/// only affects wall time; results are bit-identical for any value.
std::map<CubeKey, HitStats> count_hits(const Session& session,
                                       std::span<const GlobalGaze> gaze,
                                       const VoxelGrid& grid,
                                       std::span<const CubeKey> cubes,
                                       double half_angle_deg = 30.0,
                                       int threads = 1);

enum class RoiDistanceMode {
  kMeanDistance,  // F_a = density * f_g / mean_hit_distance
  kPerSample,     // F_a = density * sum_hits(1/distance_i) / N_sample
};

struct RoiCell {
  Eigen::Vector3i coords;
  Vec3 center;
  std::int64_t point_count = 0;
  double density = 0;
  std::int64_t hit_count = 0;
  double f_g = 0;   // frustum-hit frequency, in [0, 1]
  double mean_hit_distance = 0;
  double f_a = 0;   // volumetric ROI level, 0 for unhit cubes
};

struct RoiMap {
  double edge = 0;
  std::int64_t n_sample = 0;
  std::map<CubeKey, RoiCell> cells;
};

/// `density_override` substitutes per-cube densities (e.g. the mean
/// density of the frame being viewed when frame-aligned clouds exist)
/// for the static union-cloud density.
RoiMap roi_levels(const std::map<CubeKey, HitStats>& hits,
                  const VoxelGrid& grid, std::span<const CubeKey> cubes,
                  std::int64_t n_sample,
                  RoiDistanceMode mode = RoiDistanceMode::kMeanDistance,
                  const std::map<CubeKey, double>* density_override = nullptr);

/// Mean per-cube density of the frame being viewed, averaged over the
/// samples whose gaze cone contains the cube center. `frame_counts[f]`
/// holds cube -> point count for frame f; sample frames clamp to the
/// available range. Cubes never hit fall back to the union density.
std::map<CubeKey, double> mean_viewed_density(
    const Session& session, std::span<const GlobalGaze> gaze,
    const VoxelGrid& grid, std::span<const CubeKey> cubes,
    double half_angle_deg,
    const std::vector<std::map<CubeKey, std::int64_t>>& frame_counts);

struct Histogram {
  std::vector<double> edges;            // bins + 1 ascending edges
  std::vector<std::int64_t> counts;     // per bin
};

struct RoiDistribution {
  Histogram histogram;
  double mean = 0;
  double std_dev = 0;  // population standard deviation
  std::int64_t cube_count = 0;
};

/// Distribution of F_a over effective cubes. Cubes hit in fewer than
/// `min_hit_count` samples are excluded (set 0 to keep everything).
RoiDistribution roi_distribution(const RoiMap& m, int bins,
                                 std::int64_t min_hit_count = 5);

void write_roi_csv(const RoiMap& m, const std::string& path);
void write_histogram_csv(const RoiDistribution& d, const std::string& path);

}  // namespace vvt
