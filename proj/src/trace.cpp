#include "vvt/trace.hpp"

#include "vvt/errors.hpp"

namespace vvt {

MovementClass movement_class_from_string(const std::string& s) {
  if (s == "static") return MovementClass::kStatic;
  if (s == "small") return MovementClass::kSmall;
  if (s == "middle") return MovementClass::kMiddle;
  if (s == "large") return MovementClass::kLarge;
  throw DataError("unknown movement class: " + s);
}

std::string to_string(MovementClass m) {
  switch (m) {
    case MovementClass::kStatic: return "static";
    case MovementClass::kSmall: return "small";
    case MovementClass::kMiddle: return "middle";
    case MovementClass::kLarge: return "large";
  }
  throw DataError("invalid movement class value");
}

GlobalGaze sample_gaze(const TraceSample& s, EulerOrder order) {
  const Mat3 headset = euler_to_matrix(s.headset.orientation, order);
  const double cl = s.eye_left.confidence;
  const double cr = s.eye_right.confidence;
  if (cl <= 0 && cr <= 0) {
    // Neither eye is usable: the headset-forward direction stands in.
    return GlobalGaze{s.headset.position, forward_vector(headset)};
  }
  const Mat3 left = euler_to_matrix(s.eye_left.direction, order);
  const Mat3 right = euler_to_matrix(s.eye_right.direction, order);
  const Vec3 dl = forward_vector(compose_gaze(headset, left));
  const Vec3 dr = forward_vector(compose_gaze(headset, right));
  return GlobalGaze{s.headset.position, combine_eyes(dl, cl, dr, cr)};
}

std::vector<GlobalGaze> session_gaze(const Session& s, EulerOrder order) {
  std::vector<GlobalGaze> out;
  out.reserve(s.samples.size());
  for (const TraceSample& sample : s.samples) {
    out.push_back(sample_gaze(sample, order));
  }
  return out;
}

}  // namespace vvt
