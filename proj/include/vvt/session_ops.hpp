#pragma once

// Session-level transformations: validation/repair, fixed-rate
// resampling, and signed axis permutation between capture and analysis
// frames. All are pure value transformations.

#include <array>
#include <cstdint>
#include <string>

#include "vvt/trace.hpp"

namespace vvt {

struct ValidationPolicy {
  enum class Confidence {
    kZeroBelowMin,  // zero out low-confidence eyes; downstream falls back
                    // to the headset-forward direction
    kClampToRange,  // clamp confidences into [0, 1]
    kDropSample,    // drop the whole sample when either eye is below min
  };
  Confidence confidence = Confidence::kZeroBelowMin;
  double min_confidence = 0.5;
};

struct ValidationReport {
  std::int64_t duplicate_timestamps_dropped = 0;
  std::int64_t non_increasing_dropped = 0;
  std::int64_t non_finite_dropped = 0;
  std::int64_t low_confidence_eyes_zeroed = 0;
  std::int64_t confidences_clamped = 0;
  std::int64_t low_confidence_samples_dropped = 0;

  std::int64_t total_repairs() const {
    return duplicate_timestamps_dropped + non_increasing_dropped +
           non_finite_dropped + low_confidence_eyes_zeroed +
           confidences_clamped + low_confidence_samples_dropped;
  }
};

/// Repairs a session per policy: duplicate timestamps keep the first
/// occurrence, non-finite samples are dropped, confidences handled per
/// policy. Output timestamps are strictly increasing. Idempotent.
/// Throws DataError("EmptySession...") if nothing survives.
Session validate_session(const Session& s, const ValidationPolicy& policy,
                         ValidationReport* report = nullptr);

/// Resamples onto a uniform timestamp grid at `rate_hz` spanning the input
/// range. Positions interpolate linearly, orientations along the shortest
/// rotational arc per angle, eye confidence takes the min of the two
/// bracketing samples. Grid points that coincide with input timestamps
/// reproduce those samples verbatim.
Session resample(const Session& s, double rate_hz);

/// Signed permutation of the coordinate axes: out[i] = sign[i] * in[from[i]].
struct AxisMap {
  std::array<int, 3> from{0, 1, 2};
  std::array<double, 3> sign{1, 1, 1};

  static AxisMap identity();
  /// y-up capture frame to the z-up analysis frame (swaps y and z).
  static AxisMap y_up_to_z_up();
  /// Parses e.g. "x,z,y" or "x,-z,y": the i-th entry names the source
  /// component (with optional sign) of output axis i.
  static AxisMap parse(const std::string& spec);

  AxisMap inverse() const;
  bool is_identity() const;
  /// +1 or -1; -1 means the map flips handedness.
  double determinant() const;

  Vec3 apply(const Vec3& v) const;
};

/// Applies the axis map to every position in the session. Orientation
/// angles are multiplied by the map's determinant: yaw/pitch/roll are
/// body-semantic quantities, so a handedness flip reverses every rotation
/// sense and a proper rotation of the frame leaves them unchanged.
/// Exactly invertible: axis_map(m.inverse(), axis_map(m, s)) == s bitwise.
Session axis_map(const Session& s, const AxisMap& m);

}  // namespace vvt
