#include "vvt/trace_io.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vvt/errors.hpp"

namespace vvt {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& field, std::size_t line_no,
                    const std::string& column) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || errno == ERANGE ||
      !std::isfinite(v)) {
    throw DataError("malformed row at line " + std::to_string(line_no) +
                    ", column '" + column + "': '" + field + "'");
  }
  return v;
}

std::int64_t parse_frame(const std::string& field, std::size_t line_no,
                         const std::string& column) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(field.c_str(), &end, 10);
  if (end == field.c_str() || *end != '\0' || errno == ERANGE || v < 0) {
    throw DataError("malformed row at line " + std::to_string(line_no) +
                    ", column '" + column + "': '" + field + "'");
  }
  return v;
}

void append_pose_columns(std::array<std::string, 28>& c, std::size_t at,
                         const std::string& prefix) {
  c[at + 0] = prefix + "_x";
  c[at + 1] = prefix + "_y";
  c[at + 2] = prefix + "_z";
  c[at + 3] = prefix + "_yaw";
  c[at + 4] = prefix + "_pitch";
  c[at + 5] = prefix + "_roll";
}

// Round-trip-exact double formatting (17 significant digits).
void print_double(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

ExperienceBracket experience_from_string(const std::string& s) {
  if (s == "never") return ExperienceBracket::kNever;
  if (s == "1-5") return ExperienceBracket::k1To5;
  if (s == "6-10") return ExperienceBracket::k6To10;
  if (s == "10+") return ExperienceBracket::k10Plus;
  throw DataError("unknown experience bracket: " + s);
}

AgeBracket age_from_string(const std::string& s) {
  if (s == "16-20") return AgeBracket::k16To20;
  if (s == "20-24") return AgeBracket::k20To24;
  if (s == "24-30") return AgeBracket::k24To30;
  if (s == "30+") return AgeBracket::k30Plus;
  throw DataError("unknown age bracket: " + s);
}

}  // namespace

TraceSchema TraceSchema::standard() {
  TraceSchema s;
  s.columns[0] = "frame";
  s.columns[1] = "timestamp";
  append_pose_columns(s.columns, 2, "hmd");
  append_pose_columns(s.columns, 8, "lctl");
  append_pose_columns(s.columns, 14, "rctl");
  s.columns[20] = "lgaze_yaw";
  s.columns[21] = "lgaze_pitch";
  s.columns[22] = "lgaze_roll";
  s.columns[23] = "lgaze_conf";
  s.columns[24] = "rgaze_yaw";
  s.columns[25] = "rgaze_pitch";
  s.columns[26] = "rgaze_roll";
  s.columns[27] = "rgaze_conf";
  return s;
}

Session parse_trace(std::istream& rows, const TraceSchema& schema,
                    std::string user_id, std::string video_id) {
  std::string line;
  if (!std::getline(rows, line)) {
    throw DataError("schema mismatch: empty input, header row is mandatory");
  }
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() != schema.columns.size()) {
    throw DataError("schema mismatch: expected " +
                    std::to_string(schema.columns.size()) + " columns, got " +
                    std::to_string(header.size()));
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] != schema.columns[i]) {
      throw DataError("schema mismatch: column " + std::to_string(i) +
                      " is '" + header[i] + "', expected '" +
                      schema.columns[i] + "'");
    }
  }

  Session session;
  session.user_id = std::move(user_id);
  session.video_id = std::move(video_id);

  std::size_t line_no = 1;
  while (std::getline(rows, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != schema.columns.size()) {
      throw DataError("schema mismatch at line " + std::to_string(line_no) +
                      ": expected " + std::to_string(schema.columns.size()) +
                      " fields, got " + std::to_string(f.size()));
    }
    auto num = [&](std::size_t i) {
      return parse_double(f[i], line_no, schema.columns[i]);
    };
    TraceSample s;
    s.frame = parse_frame(f[0], line_no, schema.columns[0]);
    s.timestamp = num(1);
    auto pose = [&](std::size_t at) {
      Pose p;
      p.position = Vec3(num(at), num(at + 1), num(at + 2));
      p.orientation = EulerAngles{num(at + 3), num(at + 4), num(at + 5)};
      return p;
    };
    s.headset = pose(2);
    s.controller_left = pose(8);
    s.controller_right = pose(14);
    s.eye_left.direction = EulerAngles{num(20), num(21), num(22)};
    s.eye_left.confidence = num(23);
    s.eye_right.direction = EulerAngles{num(24), num(25), num(26)};
    s.eye_right.confidence = num(27);
    session.samples.push_back(s);
  }
  return session;
}

Session parse_trace_file(const std::string& path, const TraceSchema& schema,
                         std::string user_id, std::string video_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file: " + path);
  return parse_trace(in, schema, std::move(user_id), std::move(video_id));
}

void serialize_trace(const Session& s, const TraceSchema& schema,
                     std::ostream& out) {
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) out << ',';
    out << schema.columns[i];
  }
  out << '\n';
  for (const TraceSample& t : s.samples) {
    out << t.frame << ',';
    print_double(out, t.timestamp);
    auto pose = [&](const Pose& p) {
      for (double v : {p.position.x(), p.position.y(), p.position.z(),
                       p.orientation.yaw, p.orientation.pitch,
                       p.orientation.roll}) {
        out << ',';
        print_double(out, v);
      }
    };
    pose(t.headset);
    pose(t.controller_left);
    pose(t.controller_right);
    for (const EyeSample& e : {t.eye_left, t.eye_right}) {
      for (double v : {e.direction.yaw, e.direction.pitch, e.direction.roll,
                       e.confidence}) {
        out << ',';
        print_double(out, v);
      }
    }
    out << '\n';
  }
}

void serialize_trace_file(const Session& s, const TraceSchema& schema,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  serialize_trace(s, schema, out);
}

DatasetConfig load_dataset_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset config parse error: " + std::string(e.what()));
  }
  DatasetConfig cfg;
  try {
    for (const auto& v : j.value("videos", nlohmann::json::array())) {
      VideoMeta m;
      m.name = v.at("name").get<std::string>();
      m.actor_count = v.at("actor_count").get<int>();
      m.frame_count = v.at("frame_count").get<int>();
      m.movement_class =
          movement_class_from_string(v.at("movement_class").get<std::string>());
      if (m.frame_count <= 0) {
        throw DataError("video '" + m.name + "': frame_count must be > 0");
      }
      cfg.videos.push_back(std::move(m));
    }
    for (const auto& u : j.value("users", nlohmann::json::array())) {
      UserProfile p;
      p.user_id = u.at("user_id").get<std::string>();
      const std::string g = u.at("gender").get<std::string>();
      if (g == "female") {
        p.gender = Gender::kFemale;
      } else if (g == "male") {
        p.gender = Gender::kMale;
      } else {
        throw DataError("unknown gender bracket: " + g);
      }
      p.age = age_from_string(u.at("age").get<std::string>());
      p.vr_experience =
          experience_from_string(u.at("vr_experience").get<std::string>());
      p.vv_experience =
          experience_from_string(u.at("vv_experience").get<std::string>());
      cfg.users.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset config: " + std::string(e.what()));
  }
  return cfg;
}

}  // namespace vvt
