#include "vvt/session_ops.hpp"

#include <algorithm>
#include <cmath>

#include "vvt/errors.hpp"

namespace vvt {
namespace {

bool all_finite(const Pose& p) {
  return p.position.allFinite() && std::isfinite(p.orientation.yaw) &&
         std::isfinite(p.orientation.pitch) && std::isfinite(p.orientation.roll);
}

bool all_finite(const EyeSample& e) {
  return std::isfinite(e.direction.yaw) && std::isfinite(e.direction.pitch) &&
         std::isfinite(e.direction.roll) && std::isfinite(e.confidence);
}

bool all_finite(const TraceSample& s) {
  return std::isfinite(s.timestamp) && all_finite(s.headset) &&
         all_finite(s.controller_left) && all_finite(s.controller_right) &&
         all_finite(s.eye_left) && all_finite(s.eye_right);
}

// a + alpha * (shortest signed arc from a to b), in degrees. Exact at
// alpha == 0; stays within 180 degrees of a, so a constant input never
// drifts under re-wrapping.
double lerp_angle_deg(double a, double b, double alpha) {
  const double d = std::remainder(b - a, 360.0);
  return a + alpha * d;
}

EulerAngles lerp_euler(const EulerAngles& a, const EulerAngles& b,
                       double alpha) {
  return EulerAngles{lerp_angle_deg(a.yaw, b.yaw, alpha),
                     lerp_angle_deg(a.pitch, b.pitch, alpha),
                     lerp_angle_deg(a.roll, b.roll, alpha)};
}

Vec3 lerp_vec(const Vec3& a, const Vec3& b, double alpha) {
  return a + alpha * (b - a);
}

Pose lerp_pose(const Pose& a, const Pose& b, double alpha) {
  return Pose{lerp_vec(a.position, b.position, alpha),
              lerp_euler(a.orientation, b.orientation, alpha)};
}

}  // namespace

Session validate_session(const Session& s, const ValidationPolicy& policy,
                         ValidationReport* report) {
  ValidationReport rep;
  Session out;
  out.user_id = s.user_id;
  out.video_id = s.video_id;
  out.nominal_rate_hz = s.nominal_rate_hz;
  out.samples.reserve(s.samples.size());

  bool have_prev = false;
  double prev_t = 0;
  for (TraceSample sample : s.samples) {
    if (!all_finite(sample)) {
      ++rep.non_finite_dropped;
      continue;
    }
    if (have_prev && sample.timestamp == prev_t) {
      ++rep.duplicate_timestamps_dropped;
      continue;
    }
    if (have_prev && sample.timestamp < prev_t) {
      ++rep.non_increasing_dropped;
      continue;
    }

    switch (policy.confidence) {
      case ValidationPolicy::Confidence::kZeroBelowMin:
        for (EyeSample* e : {&sample.eye_left, &sample.eye_right}) {
          if (e->confidence != 0.0 && e->confidence < policy.min_confidence) {
            e->confidence = 0.0;
            ++rep.low_confidence_eyes_zeroed;
          } else if (e->confidence > 1.0) {
            e->confidence = 1.0;
            ++rep.confidences_clamped;
          }
        }
        break;
      case ValidationPolicy::Confidence::kClampToRange:
        for (EyeSample* e : {&sample.eye_left, &sample.eye_right}) {
          if (e->confidence < 0.0 || e->confidence > 1.0) {
            e->confidence = std::clamp(e->confidence, 0.0, 1.0);
            ++rep.confidences_clamped;
          }
        }
        break;
      case ValidationPolicy::Confidence::kDropSample:
        if (sample.eye_left.confidence < policy.min_confidence ||
            sample.eye_right.confidence < policy.min_confidence) {
          ++rep.low_confidence_samples_dropped;
          continue;
        }
        break;
    }

    out.samples.push_back(sample);
    prev_t = sample.timestamp;
    have_prev = true;
  }

  if (report) *report = rep;
  if (out.samples.empty()) {
    throw DataError("EmptySession: no samples survive validation");
  }
  return out;
}

Session resample(const Session& s, double rate_hz) {
  if (s.samples.size() < 2) {
    throw DataError("InsufficientSamples: resample needs at least 2 samples");
  }
  if (!(rate_hz > 0)) {
    throw UsageError("resample rate must be positive");
  }
  const double t0 = s.samples.front().timestamp;
  const double t_end = s.samples.back().timestamp;
  if (!(t_end > t0)) {
    throw DataError("resample: non-increasing timestamps, validate first");
  }
  const double dt = 1.0 / rate_hz;
  const auto n_steps =
      static_cast<std::size_t>(std::floor((t_end - t0) / dt + 1e-9));

  Session out;
  out.user_id = s.user_id;
  out.video_id = s.video_id;
  out.nominal_rate_hz = rate_hz;
  out.samples.reserve(n_steps + 1);

  std::size_t seg = 0;  // invariant: samples[seg].timestamp <= t
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    while (seg + 2 < s.samples.size() && s.samples[seg + 1].timestamp <= t) {
      ++seg;
    }
    const TraceSample& a = s.samples[seg];
    const TraceSample& b = s.samples[seg + 1];

    if (t <= a.timestamp) {
      out.samples.push_back(a);
      out.samples.back().timestamp = t;
      continue;
    }
    if (t >= b.timestamp) {
      out.samples.push_back(b);
      out.samples.back().timestamp = t;
      continue;
    }

    const double alpha = (t - a.timestamp) / (b.timestamp - a.timestamp);
    TraceSample r;
    r.timestamp = t;
    r.frame = std::llround(static_cast<double>(a.frame) +
                           alpha * static_cast<double>(b.frame - a.frame));
    r.headset = lerp_pose(a.headset, b.headset, alpha);
    r.controller_left = lerp_pose(a.controller_left, b.controller_left, alpha);
    r.controller_right =
        lerp_pose(a.controller_right, b.controller_right, alpha);
    r.eye_left.direction =
        lerp_euler(a.eye_left.direction, b.eye_left.direction, alpha);
    r.eye_right.direction =
        lerp_euler(a.eye_right.direction, b.eye_right.direction, alpha);
    r.eye_left.confidence =
        std::min(a.eye_left.confidence, b.eye_left.confidence);
    r.eye_right.confidence =
        std::min(a.eye_right.confidence, b.eye_right.confidence);
    out.samples.push_back(r);
  }
  return out;
}

AxisMap AxisMap::identity() { return AxisMap{}; }

AxisMap AxisMap::y_up_to_z_up() {
  AxisMap m;
  m.from = {0, 2, 1};
  m.sign = {1, 1, 1};
  return m;
}

AxisMap AxisMap::parse(const std::string& spec) {
  AxisMap m;
  std::array<bool, 3> used{false, false, false};
  std::size_t axis = 0;
  std::size_t i = 0;
  while (i < spec.size() && axis < 3) {
    double sign = 1;
    if (spec[i] == '-') {
      sign = -1;
      ++i;
    } else if (spec[i] == '+') {
      ++i;
    }
    if (i >= spec.size()) break;
    const char c = spec[i];
    int src = -1;
    if (c == 'x') src = 0;
    if (c == 'y') src = 1;
    if (c == 'z') src = 2;
    if (src < 0) {
      throw UsageError("InvalidMapping: bad axis character in '" + spec + "'");
    }
    m.from[axis] = src;
    m.sign[axis] = sign;
    used[static_cast<std::size_t>(src)] = true;
    ++axis;
    ++i;
    if (i < spec.size() && spec[i] == ',') ++i;
  }
  if (axis != 3 || i != spec.size() || !used[0] || !used[1] || !used[2]) {
    throw UsageError("InvalidMapping: '" + spec +
                     "' is not a signed permutation of x,y,z");
  }
  return m;
}

AxisMap AxisMap::inverse() const {
  AxisMap inv;
  for (int i = 0; i < 3; ++i) {
    inv.from[static_cast<std::size_t>(from[static_cast<std::size_t>(i)])] = i;
    inv.sign[static_cast<std::size_t>(from[static_cast<std::size_t>(i)])] =
        sign[static_cast<std::size_t>(i)];
  }
  return inv;
}

bool AxisMap::is_identity() const {
  return from == std::array<int, 3>{0, 1, 2} &&
         sign == std::array<double, 3>{1, 1, 1};
}

double AxisMap::determinant() const {
  // permutation parity times the product of signs
  const bool even = (from[0] == 0 && from[1] == 1 && from[2] == 2) ||
                    (from[0] == 1 && from[1] == 2 && from[2] == 0) ||
                    (from[0] == 2 && from[1] == 0 && from[2] == 1);
  return (even ? 1.0 : -1.0) * sign[0] * sign[1] * sign[2];
}

Vec3 AxisMap::apply(const Vec3& v) const {
  return Vec3(sign[0] * v[from[0]], sign[1] * v[from[1]], sign[2] * v[from[2]]);
}

Session axis_map(const Session& s, const AxisMap& m) {
  std::array<bool, 3> used{false, false, false};
  for (int src : m.from) {
    if (src < 0 || src > 2 || used[static_cast<std::size_t>(src)]) {
      throw UsageError("InvalidMapping: not a signed permutation");
    }
    used[static_cast<std::size_t>(src)] = true;
  }
  for (double sg : m.sign) {
    if (sg != 1.0 && sg != -1.0) {
      throw UsageError("InvalidMapping: signs must be +1 or -1");
    }
  }

  const double det = m.determinant();
  Session out = s;
  auto map_pose = [&](Pose& p) {
    p.position = m.apply(p.position);
    p.orientation.yaw *= det;
    p.orientation.pitch *= det;
    p.orientation.roll *= det;
  };
  for (TraceSample& sample : out.samples) {
    map_pose(sample.headset);
    map_pose(sample.controller_left);
    map_pose(sample.controller_right);
    for (EyeSample* e : {&sample.eye_left, &sample.eye_right}) {
      e->direction.yaw *= det;
      e->direction.pitch *= det;
      e->direction.roll *= det;
    }
  }
  return out;
}

}  // namespace vvt
