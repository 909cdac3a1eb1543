#include "vvt/voxel_roi.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "vvt/errors.hpp"

namespace vvt {

VoxelGrid VoxelGrid::build(std::span<const Vec3> points, double edge_m) {
  if (points.empty()) {
    throw DataError("EmptyScene: cannot build a grid over zero points");
  }
  if (!(edge_m > 0)) {
    throw UsageError("cube edge must be positive");
  }
  VoxelGrid g;
  g.edge_ = edge_m;
  Vec3 lo = points.front(), hi = points.front();
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  g.origin_ = lo;
  for (int c = 0; c < 3; ++c) {
    const double extent = hi[c] - lo[c];
    g.dims_[c] = std::max<int>(1, static_cast<int>(
                                      std::ceil(extent / edge_m + 1e-12)));
  }
  for (const Vec3& p : points) {
    const CubeKey key = g.key_for_point(p);
    g.cubes_[key].point_count += 1;
  }
  const double volume = edge_m * edge_m * edge_m;
  for (auto& [key, stats] : g.cubes_) {
    stats.density = static_cast<double>(stats.point_count) / volume;
  }
  return g;
}

CubeKey VoxelGrid::key_of(int i, int j, int k) const {
  return (static_cast<CubeKey>(i) * dims_[1] + j) * dims_[2] + k;
}

Eigen::Vector3i VoxelGrid::coords_of(CubeKey key) const {
  const int k = static_cast<int>(key % dims_[2]);
  const CubeKey rest = key / dims_[2];
  const int j = static_cast<int>(rest % dims_[1]);
  const int i = static_cast<int>(rest / dims_[1]);
  return {i, j, k};
}

Vec3 VoxelGrid::center_of(CubeKey key) const {
  const Eigen::Vector3i c = coords_of(key);
  return origin_ + Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5) * edge_;
}

CubeKey VoxelGrid::key_for_point(const Vec3& p) const {
  Eigen::Vector3i idx;
  for (int c = 0; c < 3; ++c) {
    const double rel = (p[c] - origin_[c]) / edge_;
    int i = static_cast<int>(std::floor(rel));
    // points on the upper boundary fall into the last cube
    i = std::clamp(i, 0, dims_[c] - 1);
    if (rel < -1e-9 || rel > dims_[c] + 1e-9) return -1;
    idx[c] = i;
  }
  return key_of(idx[0], idx[1], idx[2]);
}

std::int64_t VoxelGrid::total_points() const {
  std::int64_t n = 0;
  for (const auto& [key, stats] : cubes_) n += stats.point_count;
  return n;
}

std::vector<CubeKey> filter_cubes(const VoxelGrid& grid,
                                  const ThresholdRule& rule,
                                  std::span<const Vec3> trajectory) {
  if (rule.mode == ThresholdRule::Mode::kDistanceAdaptive &&
      trajectory.empty()) {
    throw UsageError(
        "distance-adaptive filtering needs the headset trajectory");
  }
  std::vector<CubeKey> kept;
  for (const auto& [key, stats] : grid.cubes()) {
    double tau = rule.tau0;
    if (rule.mode == ThresholdRule::Mode::kDistanceAdaptive) {
      double sum = 0;
      for (const Vec3& pos : trajectory) {
        sum += (grid.center_of(key) - pos).norm();
      }
      const double mean_dist = sum / static_cast<double>(trajectory.size());
      const double scale =
          std::clamp(std::pow(mean_dist / rule.distance_ref_m, 2.0), 1.0,
                     rule.max_scale);
      tau = rule.tau0 * scale;
    }
    if (static_cast<double>(stats.point_count) >= tau) {
      kept.push_back(key);
    }
  }
  return kept;
}

namespace {

struct BlockAccum {
  std::vector<std::int64_t> hits;
  std::vector<double> dist_sum;
  std::vector<double> inv_dist_sum;
};

// One fixed-size block of samples, accumulated serially. Blocks are fixed
// regardless of thread count, and merged in block order, so the reduction
// is bit-identical for any `threads`.
constexpr std::size_t kHitBlock = 256;

void accumulate_block(const Session& session, std::span<const GlobalGaze> gaze,
                      const std::vector<Vec3>& centers, double half_angle_deg,
                      std::size_t begin, std::size_t end, BlockAccum& acc) {
  acc.hits.assign(centers.size(), 0);
  acc.dist_sum.assign(centers.size(), 0.0);
  acc.inv_dist_sum.assign(centers.size(), 0.0);
  for (std::size_t s = begin; s < end; ++s) {
    const GlobalGaze& ray = gaze[s];
    const Vec3& headset = session.samples[s].headset.position;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (centers[c] == ray.origin) continue;
      if (in_frustum(ray, centers[c], half_angle_deg)) {
        const double d = (centers[c] - headset).norm();
        acc.hits[c] += 1;
        acc.dist_sum[c] += d;
        if (d > 0) acc.inv_dist_sum[c] += 1.0 / d;
      }
    }
  }
}

}  // namespace

std::map<CubeKey, HitStats> count_hits(const Session& session,
                                       std::span<const GlobalGaze> gaze,
                                       const VoxelGrid& grid,
                                       std::span<const CubeKey> cubes,
                                       double half_angle_deg, int threads) {
  if (gaze.size() != session.samples.size()) {
    throw DataError("MisalignedInputs: gaze list must be 1:1 with samples");
  }
  std::vector<Vec3> centers;
  centers.reserve(cubes.size());
  for (CubeKey key : cubes) centers.push_back(grid.center_of(key));

  const std::size_t n = session.samples.size();
  const std::size_t n_blocks = (n + kHitBlock - 1) / kHitBlock;
  std::vector<BlockAccum> blocks(n_blocks);

  const int workers = std::max(1, threads);
  if (workers == 1 || n_blocks <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) {
      accumulate_block(session, gaze, centers, half_angle_deg, b * kHitBlock,
                       std::min(n, (b + 1) * kHitBlock), blocks[b]);
    }
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next.fetch_add(1); b < n_blocks;
             b = next.fetch_add(1)) {
          accumulate_block(session, gaze, centers, half_angle_deg,
                           b * kHitBlock, std::min(n, (b + 1) * kHitBlock),
                           blocks[b]);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  std::map<CubeKey, HitStats> out;
  for (std::size_t c = 0; c < cubes.size(); ++c) {
    HitStats st;
    double dist_sum = 0;
    for (const BlockAccum& acc : blocks) {
      st.hit_count += acc.hits[c];
      dist_sum += acc.dist_sum[c];
      st.sum_inv_distance += acc.inv_dist_sum[c];
    }
    if (st.hit_count > 0) {
      st.mean_distance = dist_sum / static_cast<double>(st.hit_count);
    }
    out.emplace(cubes[c], st);
  }
  return out;
}

RoiMap roi_levels(const std::map<CubeKey, HitStats>& hits,
                  const VoxelGrid& grid, std::span<const CubeKey> cubes,
                  std::int64_t n_sample, RoiDistanceMode mode,
                  const std::map<CubeKey, double>* density_override) {
  if (n_sample <= 0) {
    throw UsageError("roi_levels: n_sample must be positive");
  }
  RoiMap m;
  m.edge = grid.edge();
  m.n_sample = n_sample;
  for (CubeKey key : cubes) {
    const auto grid_it = grid.cubes().find(key);
    if (grid_it == grid.cubes().end()) continue;
    const CubeStats& gs = grid_it->second;
    RoiCell cell;
    cell.coords = grid.coords_of(key);
    cell.center = grid.center_of(key);
    cell.point_count = gs.point_count;
    cell.density = gs.density;
    if (density_override) {
      const auto it = density_override->find(key);
      if (it != density_override->end()) cell.density = it->second;
    }
    const auto hit_it = hits.find(key);
    if (hit_it != hits.end() && hit_it->second.hit_count > 0) {
      const HitStats& hs = hit_it->second;
      cell.hit_count = hs.hit_count;
      cell.f_g = static_cast<double>(hs.hit_count) /
                 static_cast<double>(n_sample);
      cell.mean_hit_distance = hs.mean_distance;
      if (mode == RoiDistanceMode::kMeanDistance) {
        cell.f_a = cell.density * cell.f_g / hs.mean_distance;
      } else {
        cell.f_a = cell.density * hs.sum_inv_distance /
                   static_cast<double>(n_sample);
      }
    }
    m.cells.emplace(key, cell);
  }
  return m;
}

std::map<CubeKey, double> mean_viewed_density(
    const Session& session, std::span<const GlobalGaze> gaze,
    const VoxelGrid& grid, std::span<const CubeKey> cubes,
    double half_angle_deg,
    const std::vector<std::map<CubeKey, std::int64_t>>& frame_counts) {
  if (gaze.size() != session.samples.size()) {
    throw DataError("MisalignedInputs: gaze list must be 1:1 with samples");
  }
  if (frame_counts.empty()) {
    throw UsageError("mean_viewed_density needs at least one frame cloud");
  }
  const double volume = grid.edge() * grid.edge() * grid.edge();
  const auto last_frame =
      static_cast<std::int64_t>(frame_counts.size()) - 1;

  std::map<CubeKey, double> out;
  for (CubeKey key : cubes) {
    const Vec3 center = grid.center_of(key);
    double density_sum = 0;
    std::int64_t hit = 0;
    for (std::size_t i = 0; i < session.samples.size(); ++i) {
      if ((center - gaze[i].origin).squaredNorm() == 0) continue;
      if (!in_frustum(gaze[i], center, half_angle_deg)) continue;
      const auto f = static_cast<std::size_t>(
          std::clamp<std::int64_t>(session.samples[i].frame, 0, last_frame));
      const auto it = frame_counts[f].find(key);
      const double count =
          it == frame_counts[f].end() ? 0.0 : static_cast<double>(it->second);
      density_sum += count / volume;
      ++hit;
    }
    if (hit > 0) {
      out[key] = density_sum / static_cast<double>(hit);
    } else {
      const auto it = grid.cubes().find(key);
      out[key] = it == grid.cubes().end() ? 0.0 : it->second.density;
    }
  }
  return out;
}

RoiDistribution roi_distribution(const RoiMap& m, int bins,
                                 std::int64_t min_hit_count) {
  if (bins <= 0) throw UsageError("roi_distribution: bins must be positive");
  std::vector<double> values;
  for (const auto& [key, cell] : m.cells) {
    if (cell.hit_count < min_hit_count) continue;
    values.push_back(cell.f_a);
  }
  if (values.empty()) {
    throw DataError("EmptyMap: no effective cubes for the ROI distribution");
  }

  RoiDistribution d;
  d.cube_count = static_cast<std::int64_t>(values.size());
  double sum = 0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - d.mean) * (v - d.mean);
  d.std_dev = std::sqrt(ss / static_cast<double>(values.size()));

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) hi = lo + 1.0;  // all-equal values get one spanning bin
  d.histogram.edges.resize(static_cast<std::size_t>(bins) + 1);
  d.histogram.counts.assign(static_cast<std::size_t>(bins), 0);
  for (int b = 0; b <= bins; ++b) {
    d.histogram.edges[static_cast<std::size_t>(b)] =
        lo + (hi - lo) * static_cast<double>(b) / bins;
  }
  for (double v : values) {
    int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    b = std::clamp(b, 0, bins - 1);
    d.histogram.counts[static_cast<std::size_t>(b)] += 1;
  }
  return d;
}

void write_roi_csv(const RoiMap& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  out << "i,j,k,center_x,center_y,center_z,point_count,density,hit_count,"
         "f_g,mean_hit_distance,f_a\n";
  char buf[256];
  for (const auto& [key, c] : m.cells) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%d,%d,%.17g,%.17g,%.17g,%lld,%.17g,%lld,%.17g,%.17g,"
                  "%.17g\n",
                  c.coords[0], c.coords[1], c.coords[2], c.center.x(),
                  c.center.y(), c.center.z(),
                  static_cast<long long>(c.point_count), c.density,
                  static_cast<long long>(c.hit_count), c.f_g,
                  c.mean_hit_distance, c.f_a);
    out << buf;
  }
}

void write_histogram_csv(const RoiDistribution& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  out << "bin_lo,bin_hi,count\n";
  char buf[128];
  for (std::size_t b = 0; b < d.histogram.counts.size(); ++b) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%lld\n", d.histogram.edges[b],
                  d.histogram.edges[b + 1],
                  static_cast<long long>(d.histogram.counts[b]));
    out << buf;
  }
}

}  // namespace vvt
