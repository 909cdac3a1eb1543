#pragma once

// Trace data model: one recorded sample is 28 scalar dimensions
// (frame, timestamp, three 6-DoF poses, two eyes with confidence).

#include <cstdint>
#include <string>
#include <vector>

#include "vvt/geometry.hpp"

namespace vvt {

struct Pose {
  Vec3 position{0, 0, 0};          // meters, analysis frame (z vertical)
  EulerAngles orientation{};       // degrees
};

struct EyeSample {
  EulerAngles direction{};         // eye rotation relative to the headset frame
  double confidence{0};            // in [0, 1] after validation
};

struct TraceSample {
  std::int64_t frame{0};
  double timestamp{0};             // seconds
  Pose headset;
  Pose controller_left;
  Pose controller_right;
  EyeSample eye_left;
  EyeSample eye_right;
};

/// One user watching one video: metadata plus the ordered sample sequence.
struct Session {
  std::string user_id;
  std::string video_id;
  std::vector<TraceSample> samples;
  double nominal_rate_hz{144.0};
};

enum class MovementClass { kStatic, kSmall, kMiddle, kLarge };

struct VideoMeta {
  std::string name;
  int actor_count{0};
  int frame_count{0};
  MovementClass movement_class{MovementClass::kStatic};
};

enum class Gender { kFemale, kMale };
enum class AgeBracket { k16To20, k20To24, k24To30, k30Plus };
enum class ExperienceBracket { kNever, k1To5, k6To10, k10Plus };

struct UserProfile {
  std::string user_id;
  Gender gender{Gender::kFemale};
  AgeBracket age{AgeBracket::k16To20};
  ExperienceBracket vr_experience{ExperienceBracket::kNever};
  ExperienceBracket vv_experience{ExperienceBracket::kNever};
};

struct DatasetConfig {
  std::vector<VideoMeta> videos;
  std::vector<UserProfile> users;
};

MovementClass movement_class_from_string(const std::string& s);
std::string to_string(MovementClass m);

/// World-frame viewing ray for one sample: composed headset+eye rotation
/// with confidence-weighted binocular fusion. Falls back to the headset
/// forward direction when neither eye is valid.
GlobalGaze sample_gaze(const TraceSample& s,
                       EulerOrder order = EulerOrder::kRollPitchYaw);

/// sample_gaze applied across a session, index-aligned with samples.
std::vector<GlobalGaze> session_gaze(const Session& s,
                                     EulerOrder order = EulerOrder::kRollPitchYaw);

}  // namespace vvt
