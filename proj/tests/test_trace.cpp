#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "vvt/errors.hpp"
#include "vvt/session_ops.hpp"
#include "vvt/trace_io.hpp"
#include "vvt/ply.hpp"

using namespace vvt;
using vvt::testing::sample_at;
using vvt::testing::session_of;

namespace {

std::string row_of_28(double frame, double t, double fill) {
  std::ostringstream out;
  out << static_cast<long long>(frame) << ',' << t;
  for (int i = 0; i < 26; ++i) out << ',' << fill;
  return out.str();
}

std::string header_line() {
  const TraceSchema schema = TraceSchema::standard();
  std::string h;
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) h += ',';
    h += schema.columns[i];
  }
  return h;
}

Session random_session(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::vector<TraceSample> samples;
  double t = 0;
  for (int i = 0; i < n; ++i) {
    TraceSample s = sample_at(t, Vec3(u(rng), u(rng), u(rng)),
                              EulerAngles{u(rng) * 30, u(rng) * 10, u(rng)});
    s.frame = i;
    s.controller_left.position = Vec3(u(rng), u(rng), u(rng));
    s.controller_right.orientation = EulerAngles{u(rng), u(rng), u(rng)};
    s.eye_left.direction = EulerAngles{u(rng), u(rng), 0};
    s.eye_right.direction = EulerAngles{u(rng), u(rng), 0};
    s.eye_left.confidence = conf(rng);
    s.eye_right.confidence = conf(rng);
    samples.push_back(s);
    t += 1.0 / 144.0 + 1e-4 * u(rng) * u(rng);
  }
  return session_of(std::move(samples));
}

bool samples_equal(const TraceSample& a, const TraceSample& b) {
  auto pose_eq = [](const Pose& x, const Pose& y) {
    return (x.position.array() == y.position.array()).all() &&
           x.orientation.yaw == y.orientation.yaw &&
           x.orientation.pitch == y.orientation.pitch &&
           x.orientation.roll == y.orientation.roll;
  };
  auto eye_eq = [](const EyeSample& x, const EyeSample& y) {
    return x.direction.yaw == y.direction.yaw &&
           x.direction.pitch == y.direction.pitch &&
           x.direction.roll == y.direction.roll &&
           x.confidence == y.confidence;
  };
  return a.frame == b.frame && a.timestamp == b.timestamp &&
         pose_eq(a.headset, b.headset) &&
         pose_eq(a.controller_left, b.controller_left) &&
         pose_eq(a.controller_right, b.controller_right) &&
         eye_eq(a.eye_left, b.eye_left) && eye_eq(a.eye_right, b.eye_right);
}

}  // namespace

TEST_CASE("parse_trace: one full row becomes a one-sample session") {
  std::istringstream in(header_line() + "\n" + row_of_28(0, 0.0, 1.5) + "\n");
  const Session s = parse_trace(in, TraceSchema::standard(), "u1", "v1");
  REQUIRE(s.samples.size() == 1);
  CHECK(s.samples[0].frame == 0);
  CHECK(s.samples[0].timestamp == 0.0);
  CHECK(s.samples[0].headset.position.x() == 1.5);
  CHECK(s.samples[0].eye_right.confidence == 1.5);
  CHECK(s.user_id == "u1");
}

TEST_CASE("parse_trace: wrong column count is a schema mismatch") {
  std::istringstream in(header_line() + "\n0,0.0,1,2,3\n");
  CHECK_THROWS_WITH_AS(parse_trace(in, TraceSchema::standard()),
                       doctest::Contains("schema mismatch"), DataError);
}

TEST_CASE("parse_trace: header with 27 columns is a schema mismatch") {
  std::string h = header_line();
  h.erase(h.rfind(','));
  std::istringstream in(h + "\n");
  CHECK_THROWS_AS(parse_trace(in, TraceSchema::standard()), DataError);
}

TEST_CASE("parse_trace: malformed field names line and column") {
  std::istringstream in(header_line() + "\n" + row_of_28(0, 0.0, 1.0) + "\n" +
                        "1,abc" + row_of_28(0, 0, 2.0).substr(3) + "\n");
  CHECK_THROWS_WITH_AS(parse_trace(in, TraceSchema::standard()),
                       doctest::Contains("line 3"), DataError);
}

TEST_CASE("serialize then parse is the identity, bit-exact") {
  std::mt19937_64 rng(41);
  for (int round = 0; round < 5; ++round) {
    const Session s = random_session(50, rng);
    std::ostringstream out;
    serialize_trace(s, TraceSchema::standard(), out);
    std::istringstream in(out.str());
    const Session back = parse_trace(in, TraceSchema::standard(), s.user_id,
                                     s.video_id);
    REQUIRE(back.samples.size() == s.samples.size());
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      CHECK(samples_equal(s.samples[i], back.samples[i]));
    }
  }
}

TEST_CASE("dataset config accepts the video table") {
  const char* json = R"({
    "videos": [
      {"name": "Chatting", "actor_count": 2, "frame_count": 300,
       "movement_class": "small"}
    ],
    "users": [
      {"user_id": "u1", "gender": "female", "age": "16-20",
       "vr_experience": "never", "vv_experience": "1-5"}
    ]
  })";
  const std::string path =
      (std::filesystem::temp_directory_path() / "vvt_dataset_cfg.json").string();
  {
    std::ofstream out(path);
    out << json;
  }
  const DatasetConfig cfg = load_dataset_config(path);
  REQUIRE(cfg.videos.size() == 1);
  CHECK(cfg.videos[0].name == "Chatting");
  CHECK(cfg.videos[0].actor_count == 2);
  CHECK(cfg.videos[0].frame_count == 300);
  REQUIRE(cfg.users.size() == 1);
  CHECK(cfg.users[0].age == AgeBracket::k16To20);
  std::remove(path.c_str());
}

TEST_CASE("validate_session: clean input is unchanged with a zero report") {
  const Session s = session_of({sample_at(0.0, {0, 0, 0}),
                                sample_at(0.1, {1, 0, 0}),
                                sample_at(0.2, {2, 0, 0})});
  ValidationReport rep;
  const Session out = validate_session(s, ValidationPolicy{}, &rep);
  CHECK(out.samples.size() == 3);
  CHECK(rep.total_repairs() == 0);
}

TEST_CASE("validate_session: duplicate timestamp keeps the first sample") {
  Session s = session_of({sample_at(0.0, {0, 0, 0}), sample_at(0.1, {1, 0, 0}),
                          sample_at(0.1, {9, 9, 9})});
  ValidationReport rep;
  const Session out = validate_session(s, ValidationPolicy{}, &rep);
  REQUIRE(out.samples.size() == 2);
  CHECK(out.samples[1].headset.position.x() == 1.0);
  CHECK(rep.duplicate_timestamps_dropped == 1);
}

TEST_CASE("validate_session: all-invalid confidences under drop policy") {
  Session s = session_of({sample_at(0.0, {0, 0, 0}, {}, -1.0),
                          sample_at(0.1, {1, 0, 0}, {}, -1.0)});
  ValidationPolicy policy;
  policy.confidence = ValidationPolicy::Confidence::kDropSample;
  CHECK_THROWS_WITH_AS(validate_session(s, policy),
                       doctest::Contains("EmptySession"), DataError);
}

TEST_CASE("validate_session: low confidence zeroed under the default policy") {
  Session s = session_of({sample_at(0.0, {0, 0, 0}, {}, 0.3),
                          sample_at(0.1, {1, 0, 0}, {}, 0.9)});
  ValidationReport rep;
  const Session out = validate_session(s, ValidationPolicy{}, &rep);
  CHECK(out.samples[0].eye_left.confidence == 0.0);
  CHECK(out.samples[0].eye_right.confidence == 0.0);
  CHECK(out.samples[1].eye_left.confidence == 0.9);
  CHECK(rep.low_confidence_eyes_zeroed == 2);
}

TEST_CASE("validate_session is idempotent") {
  std::mt19937_64 rng(43);
  for (int round = 0; round < 10; ++round) {
    Session s = random_session(60, rng);
    // inject some damage
    s.samples[5].timestamp = s.samples[4].timestamp;
    s.samples[20].headset.position.x() =
        std::numeric_limits<double>::quiet_NaN();
    s.samples[30].eye_left.confidence = -2.0;
    for (auto policy : {ValidationPolicy::Confidence::kZeroBelowMin,
                        ValidationPolicy::Confidence::kClampToRange}) {
      ValidationPolicy p;
      p.confidence = policy;
      ValidationReport rep2;
      const Session once = validate_session(s, p);
      const Session twice = validate_session(once, p, &rep2);
      CHECK(rep2.total_repairs() == 0);
      REQUIRE(once.samples.size() == twice.samples.size());
      for (std::size_t i = 0; i < once.samples.size(); ++i) {
        CHECK(samples_equal(once.samples[i], twice.samples[i]));
      }
    }
  }
}

TEST_CASE("resample: linear interpolation of position") {
  const Session s =
      session_of({sample_at(0.0, {0, 0, 0}), sample_at(1.0, {1, 0, 0})});
  const Session out = resample(s, 2.0);
  REQUIRE(out.samples.size() == 3);
  CHECK(out.samples[1].timestamp == 0.5);
  CHECK(out.samples[1].headset.position.x() == 0.5);
  CHECK(out.samples[2].headset.position.x() == 1.0);
}

TEST_CASE("resample: constant pose stays constant at any rate") {
  const EulerAngles orient{350.0, -20.0, 5.0};
  const Session s = session_of({sample_at(0.0, {1, 2, 3}, orient),
                                sample_at(0.7, {1, 2, 3}, orient),
                                sample_at(1.3, {1, 2, 3}, orient)});
  for (double rate : {7.0, 30.0, 144.0}) {
    const Session out = resample(s, rate);
    for (const TraceSample& t : out.samples) {
      CHECK(t.headset.position.x() == 1.0);
      CHECK(t.headset.orientation.yaw == 350.0);
      CHECK(t.headset.orientation.pitch == -20.0);
      CHECK(t.headset.orientation.roll == 5.0);
    }
  }
}

TEST_CASE("resample: yaw 350 -> 10 crosses zero along the short arc") {
  const Session s = session_of({sample_at(0.0, {0, 0, 0}, {350, 0, 0}),
                                sample_at(1.0, {0, 0, 0}, {10, 0, 0})});
  const Session out = resample(s, 2.0);
  REQUIRE(out.samples.size() == 3);
  // shortest-arc oracle over the unit-circle embedding
  const double a = deg_to_rad(350.0), b = deg_to_rad(10.0);
  const double delta = std::atan2(std::sin(b - a), std::cos(b - a));
  const double expected =
      rad_to_deg(std::atan2(std::sin(a + 0.5 * delta),
                            std::cos(a + 0.5 * delta)));
  CHECK(expected == doctest::Approx(0.0).epsilon(1e-12));
  const double got = out.samples[1].headset.orientation.yaw;
  // compare on the circle
  CHECK(std::remainder(got - expected, 360.0) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("resample: grid points on input timestamps reproduce samples") {
  const Session s = session_of({sample_at(0.0, {0, 0, 0}, {10, 1, 2}, 0.25),
                                sample_at(0.5, {2, 0, 0}, {20, 2, 3}, 0.5),
                                sample_at(1.0, {7, 0, 0}, {30, 3, 4}, 1.0)});
  const Session out = resample(s, 2.0);
  REQUIRE(out.samples.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(samples_equal(out.samples[i], s.samples[i]));
  }
}

TEST_CASE("resample: eye confidence takes the bracketing minimum") {
  Session s = session_of({sample_at(0.0, {0, 0, 0}, {}, 0.9),
                          sample_at(1.0, {1, 0, 0}, {}, 0.2)});
  const Session out = resample(s, 4.0);
  CHECK(out.samples[1].eye_left.confidence == 0.2);
  CHECK(out.samples[2].eye_left.confidence == 0.2);
}

TEST_CASE("resample: fewer than two samples is an error") {
  CHECK_THROWS_WITH_AS(resample(session_of({sample_at(0.0, {0, 0, 0})}), 10.0),
                       doctest::Contains("InsufficientSamples"), DataError);
}

TEST_CASE("axis_map: identity leaves the session untouched") {
  std::mt19937_64 rng(47);
  const Session s = random_session(20, rng);
  const Session out = axis_map(s, AxisMap::identity());
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    CHECK(samples_equal(s.samples[i], out.samples[i]));
  }
}

TEST_CASE("axis_map: y-up to z-up moves (0,1,0) to (0,0,1)") {
  Session s = session_of({sample_at(0.0, {0, 1, 0})});
  const Session out = axis_map(s, AxisMap::y_up_to_z_up());
  CHECK((out.samples[0].headset.position - Vec3(0, 0, 1)).norm() == 0.0);
}

TEST_CASE("axis_map: applying a map then its inverse is bit-exact") {
  std::mt19937_64 rng(53);
  const Session s = random_session(30, rng);
  for (const char* spec : {"x,z,y", "-y,x,z", "z,-x,-y", "x,y,-z"}) {
    const AxisMap m = AxisMap::parse(spec);
    const Session back = axis_map(axis_map(s, m), m.inverse());
    REQUIRE(back.samples.size() == s.samples.size());
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      CHECK(samples_equal(s.samples[i], back.samples[i]));
    }
  }
}

TEST_CASE("axis_map: a transposition flips every rotation sense") {
  Session s = session_of({sample_at(0.0, {0, 0, 0}, {30, -10, 5})});
  const Session out = axis_map(s, AxisMap::y_up_to_z_up());
  CHECK(out.samples[0].headset.orientation.yaw == -30.0);
  CHECK(out.samples[0].headset.orientation.pitch == 10.0);
  CHECK(out.samples[0].headset.orientation.roll == -5.0);
}

TEST_CASE("axis_map: malformed specs are rejected") {
  CHECK_THROWS_AS(AxisMap::parse("x,x,y"), UsageError);
  CHECK_THROWS_AS(AxisMap::parse("x,y"), UsageError);
  CHECK_THROWS_AS(AxisMap::parse("a,b,c"), UsageError);
  AxisMap bad;
  bad.from = {0, 0, 2};
  CHECK_THROWS_AS(axis_map(Session{}, bad), UsageError);
}

TEST_CASE("ply: ascii and binary files round-trip through the reader") {
  std::mt19937_64 rng(59);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 64; ++i) pts.emplace_back(u(rng), u(rng), u(rng));

  const std::string dir = std::filesystem::temp_directory_path().string();
  const std::string ascii_path = dir + "/vvt_rt_ascii.ply";
  const std::string bin_path = dir + "/vvt_rt_bin.ply";
  vvt::write_ply_ascii(ascii_path, pts);
  vvt::write_ply_binary(bin_path, pts);
  const std::vector<Vec3> a = vvt::read_ply(ascii_path);
  const std::vector<Vec3> b = vvt::read_ply(bin_path);
  REQUIRE(a.size() == pts.size());
  REQUIRE(b.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK((a[i] - pts[i]).norm() < 1e-12);
    CHECK((b[i].array() == pts[i].array()).all());  // binary is bit-exact
  }
  std::remove(ascii_path.c_str());
  std::remove(bin_path.c_str());
}

TEST_CASE("parse_trace: a renamed schema adapts foreign exports") {
  TraceSchema schema = TraceSchema::standard();
  schema.columns[0] = "FrameNo";
  schema.columns[2] = "HeadX";
  std::string header;
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) header += ',';
    header += schema.columns[i];
  }
  std::istringstream in(header + "\n" + row_of_28(3, 0.25, 2.5) + "\n");
  const Session s = parse_trace(in, schema);
  REQUIRE(s.samples.size() == 1);
  CHECK(s.samples[0].frame == 3);
  CHECK(s.samples[0].headset.position.x() == 2.5);

  // the standard schema must reject the renamed header
  std::istringstream again(header + "\n");
  CHECK_THROWS_AS(parse_trace(again, TraceSchema::standard()), DataError);
}

TEST_CASE("resample: grid never extends past the final sample") {
  const Session s = session_of({sample_at(0.0, {0, 0, 0}),
                                sample_at(1.05, {1, 0, 0})});
  const Session out = resample(s, 2.0);  // grid 0.0, 0.5, 1.0
  REQUIRE(out.samples.size() == 3);
  CHECK(out.samples.back().timestamp <= 1.05);
  CHECK(out.samples.back().timestamp == 1.0);
}
