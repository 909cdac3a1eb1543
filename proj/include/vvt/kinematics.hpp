#pragma once

// Movement and rotation analytics: body-frame axis distances, rotational
// velocity/acceleration, empirical CDFs, floor-plane dwell heatmaps and
// gaze/trajectory intersection masks.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vvt/trace.hpp"

namespace vvt {

/// Cumulative path lengths, one entry per step (at the step's end time).
/// Axes are body-relative per step: lateral along headset-right, body
/// forward along the horizontal heading, up along the world vertical.
struct MovementSeries {
  std::vector<double> timestamps;
  std::vector<double> lateral;   // "x" in aerial-view terms
  std::vector<double> forward;   // "y", toward/away from the viewed content
  std::vector<double> vertical;  // "z", up-down
  std::vector<double> total;
};

MovementSeries axis_distances(const Session& s,
                              EulerOrder order = EulerOrder::kRollPitchYaw);

double total_distance(const Session& s);

struct RotationSeries {
  std::vector<double> velocity_timestamps;
  std::vector<double> velocity_deg_s;
  std::vector<double> accel_timestamps;
  std::vector<double> accel_deg_s2;  // magnitudes, >= 0
};

/// Angular velocity from geodesic angles between successive orientations,
/// acceleration from velocity differences. Needs >= 3 samples at a
/// near-uniform rate (jitter <= 10% of the nominal interval), resample
/// first otherwise.
RotationSeries rotational_acceleration(const Session& s,
                                       EulerOrder order = EulerOrder::kRollPitchYaw);

/// Empirical CDF: sorted unique values with right-continuous cumulative
/// fractions; the final fraction is exactly 1.
std::vector<std::pair<double, double>> cdf(std::span<const double> series);

struct DwellHeatmap {
  double min_x = 0, min_y = 0;
  double cell = 0;
  // rows indexed by y cell, cols by x cell
  Eigen::MatrixXd dwell_s;

  double total_dwell() const { return dwell_s.sum(); }
};

/// Credits each sample interval to the floor cell under the headset at the
/// interval start. Total dwell equals the session duration exactly.
DwellHeatmap dwell_heatmap(const Session& s, double cell_m);

struct IntersectionMask {
  double min_x = 0, min_y = 0;
  double cell = 0;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask;
};

/// Cells both visited by the trajectory and pointed at by some gaze ray:
/// a downward ray marks the cell(s) within `tolerance_m` of its floor
/// intersection. `tolerance_m <= 0` defaults to one cell diagonal.
IntersectionMask gaze_trajectory_intersection(const Session& s,
                                              std::span<const GlobalGaze> gaze,
                                              double cell_m,
                                              double tolerance_m = 0,
                                              double floor_z = 0);

void write_movement_csv(const MovementSeries& m, const std::string& path);
void write_rotation_csv(const RotationSeries& r, const std::string& path);
void write_cdf_csv(std::span<const std::pair<double, double>> cdf,
                   const std::string& path);
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);

/// 8-bit binary PGM, linearly scaled so the matrix maximum maps to 255.
/// Image row 0 is the maximum-y edge of the grid.
void write_pgm(const Eigen::MatrixXd& grid, const std::string& path);

}  // namespace vvt
