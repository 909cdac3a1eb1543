#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_support.hpp"
#include "vvt/ply.hpp"
#include "vvt/trace_io.hpp"

namespace fs = std::filesystem;
using namespace vvt;
using vvt::testing::sample_at;
using vvt::testing::session_of;

namespace {

std::string binary() {
#ifdef VVTRACE_BIN_PATH
  return VVTRACE_BIN_PATH;
#else
  return "vvtrace";
#endif
}

int run(const std::string& args) {
  const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel = "") const {
    return (path / rel).string();
  }
};

void write_stationary_fixture(const std::string& path, int n = 50) {
  Session s = vvt::testing::stationary_session(n, 10.0, Vec3(1.0, 2.0, 1.7));
  serialize_trace_file(s, TraceSchema::standard(), path);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli: unknown subcommand exits 2 with usage text") {
  CHECK(run("definitely-not-a-subcommand") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("cli: kinematics on a stationary fixture reports zero distance") {
  TempDir dir("vvt_cli_kin");
  write_stationary_fixture(dir.str("session.csv"));
  const int rc = run("--out-dir " + dir.str("out") + " kinematics --session " +
                     dir.str("session.csv"));
  REQUIRE(rc == 0);
  const std::string summary = slurp(dir.str("out/kinematics_summary.json"));
  CHECK(summary.find("\"total_distance_m\": 0.0") != std::string::npos);
}

TEST_CASE("cli: missing input file exits 3 and still writes a manifest") {
  TempDir dir("vvt_cli_err");
  const int rc = run("--out-dir " + dir.str("out") +
                     " kinematics --session " + dir.str("nope.csv"));
  CHECK(rc == 3);
  const std::string manifest = slurp(dir.str("out/kinematics_manifest.json"));
  CHECK(manifest.find("\"category\": \"data\"") != std::string::npos);
}

TEST_CASE("cli: roi pipeline matches the library computation") {
  TempDir dir("vvt_cli_roi");
  // viewer at x=-4 looking +x toward a single dense cluster
  std::vector<TraceSample> samples;
  for (int i = 0; i < 60; ++i) {
    TraceSample t = sample_at(i * 0.1, Vec3(-4.0, 0.5, 0.5));
    t.eye_left.confidence = 0.0;  // headset-forward fallback
    t.eye_right.confidence = 0.0;
    samples.push_back(t);
  }
  serialize_trace_file(session_of(std::move(samples)),
                       TraceSchema::standard(), dir.str("session.csv"));

  std::vector<Vec3> pts;
  for (int i = 0; i < 20; ++i) {
    pts.emplace_back(0.3 + 0.02 * i, 0.5, 0.5);
  }
  write_ply_ascii(dir.str("scene.ply"), pts);

  const int rc = run("--out-dir " + dir.str("out") + " roi --session " +
                     dir.str("session.csv") + " --scene " +
                     dir.str("scene.ply") +
                     " --edge 1.0 --tau 1 --min-hits 1 --bins 4");
  REQUIRE(rc == 0);

  const std::string roi_csv = slurp(dir.str("out/roi.csv"));
  // single cube, hit by every one of the 60 samples: f_g = 1
  CHECK(roi_csv.find(",20,") != std::string::npos);  // point_count
  CHECK(roi_csv.find(",1,") != std::string::npos);   // f_g column
  CHECK(roi_csv.find(",60,") != std::string::npos);  // hit_count
}

TEST_CASE("cli: reruns with the same inputs are byte-identical") {
  TempDir dir("vvt_cli_det");
  write_stationary_fixture(dir.str("session.csv"));
  std::vector<Vec3> pts;
  for (int i = 0; i < 30; ++i) {
    pts.emplace_back(1.0 + 0.01 * i, 2.0, 0.5);
  }
  write_ply_ascii(dir.str("scene.ply"), pts);

  const std::string out1 = dir.str("out1");
  const std::string out2 = dir.str("out2");
  for (const std::string& out : {out1, out2}) {
    REQUIRE(run("--threads 1 --out-dir " + out + " roi --session " +
                dir.str("session.csv") + " --scene " + dir.str("scene.ply") +
                " --edge 0.5 --tau 1 --min-hits 0") == 0);
    REQUIRE(run("--threads 1 --out-dir " + out + " heatmap --session " +
                dir.str("session.csv")) == 0);
  }
  for (const std::string name :
       {"roi.csv", "roi_hist.csv", "roi_summary.json", "dwell.csv",
        "dwell.pgm"}) {
    CHECK(slurp(out1 + "/" + name) == slurp(out2 + "/" + name));
  }
  // manifests reference different out dirs only through output paths; the
  // checksums inside must agree
  CHECK(slurp(out1 + "/roi_manifest.json").find("fnv1a64") !=
        std::string::npos);
}

TEST_CASE("cli: ingest axis map default converts y-up to z-up") {
  TempDir dir("vvt_cli_axis");
  // one sample at capture position (0, 1, 0) in a y-up frame
  Session s = session_of({sample_at(0.0, Vec3(0.0, 1.0, 0.0))});
  serialize_trace_file(s, TraceSchema::standard(), dir.str("raw.csv"));
  REQUIRE(run("--out-dir " + dir.str("out") + " ingest --trace " +
              dir.str("raw.csv")) == 0);
  const Session out = parse_trace_file(dir.str("out/session.csv"),
                                       TraceSchema::standard());
  REQUIRE(out.samples.size() == 1);
  CHECK(out.samples[0].headset.position.z() == 1.0);
  CHECK(out.samples[0].headset.position.y() == 0.0);
}

TEST_CASE("cli: validate policy flag is honored") {
  TempDir dir("vvt_cli_val");
  Session s = session_of({sample_at(0.0, {0, 0, 0}, {}, -1.0),
                          sample_at(0.1, {0, 0, 0}, {}, -1.0)});
  serialize_trace_file(s, TraceSchema::standard(), dir.str("session.csv"));
  // drop policy drops everything: data error, exit 3
  CHECK(run("--out-dir " + dir.str("out") + " validate --session " +
            dir.str("session.csv") + " --policy drop") == 3);
  // zero policy keeps the samples
  CHECK(run("--out-dir " + dir.str("out") + " validate --session " +
            dir.str("session.csv") + " --policy zero") == 0);
}

TEST_CASE("cli: report aggregates the manifests in a directory") {
  TempDir dir("vvt_cli_report");
  write_stationary_fixture(dir.str("session.csv"));
  REQUIRE(run("--out-dir " + dir.str("out") + " kinematics --session " +
              dir.str("session.csv")) == 0);
  REQUIRE(run("--out-dir " + dir.str("out") + " heatmap --session " +
              dir.str("session.csv")) == 0);
  REQUIRE(run("--out-dir " + dir.str("out") + " report") == 0);
  const std::string report = slurp(dir.str("out/report.json"));
  CHECK(report.find("\"subcommand\": \"kinematics\"") != std::string::npos);
  CHECK(report.find("\"subcommand\": \"heatmap\"") != std::string::npos);
  const std::string csv = slurp(dir.str("out/report.csv"));
  CHECK(csv.find("kinematics,ok") != std::string::npos);
}
