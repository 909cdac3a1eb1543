#include "vvt/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "vvt/errors.hpp"

namespace vvt {
namespace {

void require_samples(const Session& s, std::size_t n, const char* op) {
  if (s.samples.size() < n) {
    throw DataError(std::string("InsufficientSamples: ") + op + " needs >= " +
                    std::to_string(n) + " samples");
  }
}

// Horizontal heading of the headset; world x when looking straight up or
// down (heading undefined there).
Vec3 horizontal_forward(const Pose& pose, EulerOrder order) {
  const Vec3 f = forward_vector(euler_to_matrix(pose.orientation, order));
  Vec3 h(f.x(), f.y(), 0.0);
  const double n = h.norm();
  if (n < 1e-9) return Vec3(1, 0, 0);
  return h / n;
}

struct FloorGrid {
  double min_x = 0, min_y = 0;
  double cell = 0;
  int nx = 0, ny = 0;

  static FloorGrid fit(const Session& s, double cell_m) {
    if (!(cell_m > 0)) throw UsageError("heatmap cell size must be positive");
    FloorGrid g;
    g.cell = cell_m;
    double max_x, max_y;
    g.min_x = max_x = s.samples.front().headset.position.x();
    g.min_y = max_y = s.samples.front().headset.position.y();
    for (const TraceSample& t : s.samples) {
      g.min_x = std::min(g.min_x, t.headset.position.x());
      g.min_y = std::min(g.min_y, t.headset.position.y());
      max_x = std::max(max_x, t.headset.position.x());
      max_y = std::max(max_y, t.headset.position.y());
    }
    g.nx = std::max(1, static_cast<int>(
                           std::ceil((max_x - g.min_x) / cell_m + 1e-12)));
    g.ny = std::max(1, static_cast<int>(
                           std::ceil((max_y - g.min_y) / cell_m + 1e-12)));
    return g;
  }

  int x_index(double x) const {
    return std::clamp(static_cast<int>(std::floor((x - min_x) / cell)), 0,
                      nx - 1);
  }
  int y_index(double y) const {
    return std::clamp(static_cast<int>(std::floor((y - min_y) / cell)), 0,
                      ny - 1);
  }
  double x_center(int i) const { return min_x + (i + 0.5) * cell; }
  double y_center(int j) const { return min_y + (j + 0.5) * cell; }
};

}  // namespace

MovementSeries axis_distances(const Session& s, EulerOrder order) {
  require_samples(s, 2, "axis_distances");
  MovementSeries m;
  const std::size_t steps = s.samples.size() - 1;
  m.timestamps.reserve(steps);
  m.lateral.reserve(steps);
  m.forward.reserve(steps);
  m.vertical.reserve(steps);
  m.total.reserve(steps);

  double lat = 0, fwd = 0, up = 0, tot = 0;
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    const TraceSample& a = s.samples[i];
    const TraceSample& b = s.samples[i + 1];
    const Vec3 step = b.headset.position - a.headset.position;
    const Vec3 heading = horizontal_forward(a.headset, order);
    const Vec3 right(heading.y(), -heading.x(), 0.0);
    lat += std::abs(step.dot(right));
    fwd += std::abs(step.dot(heading));
    up += std::abs(step.z());
    tot += step.norm();
    m.timestamps.push_back(b.timestamp);
    m.lateral.push_back(lat);
    m.forward.push_back(fwd);
    m.vertical.push_back(up);
    m.total.push_back(tot);
  }
  return m;
}

double total_distance(const Session& s) {
  require_samples(s, 2, "total_distance");
  double total = 0;
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    total +=
        (s.samples[i + 1].headset.position - s.samples[i].headset.position)
            .norm();
  }
  return total;
}

RotationSeries rotational_acceleration(const Session& s, EulerOrder order) {
  require_samples(s, 3, "rotational_acceleration");
  const double t0 = s.samples.front().timestamp;
  const double t_end = s.samples.back().timestamp;
  const double nominal =
      (t_end - t0) / static_cast<double>(s.samples.size() - 1);
  if (!(nominal > 0)) {
    throw DataError("rotational_acceleration: non-increasing timestamps");
  }
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    const double dt = s.samples[i + 1].timestamp - s.samples[i].timestamp;
    if (std::abs(dt - nominal) > 0.10 * nominal) {
      throw DataError(
          "NonUniformRate: timestamp jitter exceeds 10% of the nominal "
          "interval; resample first");
    }
  }

  RotationSeries out;
  std::vector<Mat3> rot(s.samples.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    rot[i] = euler_to_matrix(s.samples[i].headset.orientation, order);
  }
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    const double dt = s.samples[i + 1].timestamp - s.samples[i].timestamp;
    const double angle = geodesic_angle_deg(rot[i], rot[i + 1]);
    out.velocity_timestamps.push_back(
        0.5 * (s.samples[i].timestamp + s.samples[i + 1].timestamp));
    out.velocity_deg_s.push_back(angle / dt);
  }
  for (std::size_t i = 0; i + 1 < out.velocity_deg_s.size(); ++i) {
    const double dt =
        out.velocity_timestamps[i + 1] - out.velocity_timestamps[i];
    out.accel_timestamps.push_back(s.samples[i + 1].timestamp);
    out.accel_deg_s2.push_back(
        std::abs(out.velocity_deg_s[i + 1] - out.velocity_deg_s[i]) / dt);
  }
  return out;
}

std::vector<std::pair<double, double>> cdf(std::span<const double> series) {
  if (series.empty()) throw DataError("EmptySeries: cdf of nothing");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  out.back().second = 1.0;  // exact, regardless of division rounding
  return out;
}

DwellHeatmap dwell_heatmap(const Session& s, double cell_m) {
  if (s.samples.empty()) throw DataError("EmptySession: dwell_heatmap");
  const FloorGrid g = FloorGrid::fit(s, cell_m);
  DwellHeatmap h;
  h.min_x = g.min_x;
  h.min_y = g.min_y;
  h.cell = g.cell;
  h.dwell_s = Eigen::MatrixXd::Zero(g.ny, g.nx);
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    const double dt = s.samples[i + 1].timestamp - s.samples[i].timestamp;
    const Vec3& p = s.samples[i].headset.position;
    h.dwell_s(g.y_index(p.y()), g.x_index(p.x())) += dt;
  }
  return h;
}

IntersectionMask gaze_trajectory_intersection(const Session& s,
                                              std::span<const GlobalGaze> gaze,
                                              double cell_m,
                                              double tolerance_m,
                                              double floor_z) {
  if (gaze.size() != s.samples.size()) {
    throw DataError("MisalignedInputs: gaze list must be 1:1 with samples");
  }
  if (s.samples.empty()) throw DataError("EmptySession");
  const FloorGrid g = FloorGrid::fit(s, cell_m);
  if (tolerance_m <= 0) tolerance_m = cell_m * std::sqrt(2.0);

  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> visited =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(g.ny,
                                                                        g.nx);
  for (const TraceSample& t : s.samples) {
    visited(g.y_index(t.headset.position.y()),
            g.x_index(t.headset.position.x())) = 1;
  }

  // Floor intersections of descending gaze rays.
  std::vector<Eigen::Vector2d> floor_points;
  for (const GlobalGaze& ray : gaze) {
    if (ray.direction.z() >= 0) continue;  // never reaches the floor
    const double dist = (floor_z - ray.origin.z()) / ray.direction.z();
    if (dist < 0) continue;
    const Vec3 q = ray.origin + dist * ray.direction;
    floor_points.emplace_back(q.x(), q.y());
  }

  IntersectionMask out;
  out.min_x = g.min_x;
  out.min_y = g.min_y;
  out.cell = g.cell;
  out.mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
      g.ny, g.nx);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (!visited(j, i)) continue;
      const Eigen::Vector2d center(g.x_center(i), g.y_center(j));
      for (const Eigen::Vector2d& q : floor_points) {
        if ((q - center).norm() <= tolerance_m) {
          out.mask(j, i) = 1;
          break;
        }
      }
    }
  }
  return out;
}

void write_movement_csv(const MovementSeries& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  out << "timestamp,dist_x_lateral,dist_y_forward,dist_z_up,dist_total\n";
  char buf[192];
  for (std::size_t i = 0; i < m.timestamps.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  m.timestamps[i], m.lateral[i], m.forward[i], m.vertical[i],
                  m.total[i]);
    out << buf;
  }
}

void write_rotation_csv(const RotationSeries& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  out << "timestamp,velocity_deg_s,accel_timestamp,accel_deg_s2\n";
  char buf[160];
  const std::size_t rows =
      std::max(r.velocity_deg_s.size(), r.accel_deg_s2.size());
  for (std::size_t i = 0; i < rows; ++i) {
    if (i < r.velocity_deg_s.size()) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,",
                    r.velocity_timestamps[i], r.velocity_deg_s[i]);
    } else {
      std::snprintf(buf, sizeof(buf), ",,");
    }
    out << buf;
    if (i < r.accel_deg_s2.size()) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r.accel_timestamps[i],
                    r.accel_deg_s2[i]);
    } else {
      std::snprintf(buf, sizeof(buf), ",\n");
    }
    out << buf;
  }
}

void write_cdf_csv(std::span<const std::pair<double, double>> cdf,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  out << "value,fraction\n";
  char buf[96];
  for (const auto& [v, f] : cdf) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", v, f);
    out << buf;
  }
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  char buf[48];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), c ? ",%.17g" : "%.17g", m(r, c));
      out << buf;
    }
    out << '\n';
  }
}

void write_pgm(const Eigen::MatrixXd& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  const double max_v = grid.size() ? grid.maxCoeff() : 0.0;
  out << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
  // row 0 of the image is the max-y edge
  for (Eigen::Index r = grid.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      const double v = max_v > 0 ? grid(r, c) / max_v : 0.0;
      const auto byte = static_cast<unsigned char>(
          std::clamp(std::lround(v * 255.0), 0L, 255L));
      out.put(static_cast<char>(byte));
    }
  }
}

}  // namespace vvt
