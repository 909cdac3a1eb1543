#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "vvt/errors.hpp"
#include "vvt/streaming.hpp"

#include <filesystem>
#include <fstream>

using namespace vvt;
using namespace vvt::stream;
using vvt::testing::sample_at;
using vvt::testing::session_of;

namespace {

std::vector<CubeKey> all_keys(const VoxelGrid& g) {
  std::vector<CubeKey> keys;
  for (const auto& [key, stats] : g.cubes()) keys.push_back(key);
  return keys;
}

// Scene of three separated dense clusters along y, viewed from -x.
struct ToyScene {
  std::vector<Vec3> points;
  VoxelGrid grid{VoxelGrid::build(std::vector<Vec3>{{0, 0, 0}}, 1.0)};
  std::vector<CubeKey> keys;

  static ToyScene make() {
    ToyScene s;
    s.points.clear();
    for (double y : {0.5, 3.5, 6.5}) {
      for (int i = 0; i < 6; ++i) {
        s.points.emplace_back(0.4 + 0.02 * i, y, 0.5);
      }
    }
    s.grid = VoxelGrid::build(s.points, 1.0);
    s.keys = all_keys(s.grid);
    return s;
  }
};

RoiMap uniform_roi(const VoxelGrid& grid, const std::vector<CubeKey>& keys,
                   const std::vector<double>& f_a) {
  RoiMap roi;
  roi.edge = grid.edge();
  roi.n_sample = 1;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    RoiCell cell;
    cell.coords = grid.coords_of(keys[i]);
    cell.center = grid.center_of(keys[i]);
    cell.point_count = grid.cubes().at(keys[i]).point_count;
    cell.density = grid.cubes().at(keys[i]).density;
    cell.hit_count = 1;
    cell.f_g = 1.0;
    cell.mean_hit_distance = 1.0;
    cell.f_a = f_a[i];
    roi.cells[keys[i]] = cell;
  }
  return roi;
}

}  // namespace

TEST_CASE("QualityLadder: validation catches malformed ladders") {
  QualityLadder ok;
  ok.validate();
  QualityLadder no_zero;
  no_zero.bits_per_point = {1.0, 2.0};
  CHECK_THROWS_AS(no_zero.validate(), UsageError);
  QualityLadder not_increasing;
  not_increasing.bits_per_point = {0.0, 2.0, 2.0};
  CHECK_THROWS_AS(not_increasing.validate(), UsageError);
}

TEST_CASE("cull: looking away yields empty sets") {
  const ToyScene s = ToyScene::make();
  ViewportTrajectory pred(4, predict::ViewportState{Vec3(-5, 3.5, 0.5),
                                                    Vec3(-1, 0, 0)});
  const auto visible = cull(pred, s.grid, s.keys, 30.0);
  REQUIRE(visible.size() == 4);
  for (const auto& v : visible) CHECK(v.empty());
}

TEST_CASE("cull: a wide cone from afar sees every cube") {
  const ToyScene s = ToyScene::make();
  ViewportTrajectory pred(1, predict::ViewportState{Vec3(-50, 3.5, 0.5),
                                                    Vec3(1, 0, 0)});
  const auto visible = cull(pred, s.grid, s.keys, 30.0);
  CHECK(visible[0].size() == s.keys.size());
}

TEST_CASE("cull: matches a per-cube in_frustum enumeration") {
  const ToyScene s = ToyScene::make();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ViewportTrajectory pred;
  for (int i = 0; i < 10; ++i) {
    pred.push_back(predict::ViewportState{
        Vec3(-4.0, 3.5 + 2.0 * u(rng), 0.5),
        Vec3(1.0, 0.5 * u(rng), 0.2 * u(rng)).normalized()});
  }
  const auto visible = cull(pred, s.grid, s.keys, 30.0);
  for (std::size_t f = 0; f < pred.size(); ++f) {
    std::vector<CubeKey> expected;
    const GlobalGaze ray{pred[f].position, pred[f].forward};
    for (CubeKey key : s.keys) {
      if (in_frustum(ray, s.grid.center_of(key), 30.0)) {
        expected.push_back(key);
      }
    }
    CHECK(visible[f] == expected);
  }
}

TEST_CASE("allocate: zero budget sends nothing") {
  const ToyScene s = ToyScene::make();
  const RoiMap roi = uniform_roi(s.grid, s.keys, {3.0, 2.0, 1.0});
  const AllocationPlan plan = allocate(s.keys, roi, QualityLadder{}, 0.0);
  CHECK(plan.levels.empty());
  CHECK(plan.bits_used == 0.0);
}

TEST_CASE("allocate: ample budget sends everything at the top level") {
  const ToyScene s = ToyScene::make();
  const RoiMap roi = uniform_roi(s.grid, s.keys, {3.0, 2.0, 1.0});
  const QualityLadder ladder;
  double total = 0;
  for (CubeKey key : s.keys) {
    total += ladder.bits_per_point.back() *
             double(s.grid.cubes().at(key).point_count);
  }
  const AllocationPlan plan = allocate(s.keys, roi, ladder, total);
  CHECK(plan.levels.size() == s.keys.size());
  for (const auto& [key, level] : plan.levels) {
    CHECK(level == ladder.top_level());
  }
  CHECK(plan.bits_used == doctest::Approx(total));
}

TEST_CASE("allocate: three-cube toy case matches exhaustive search") {
  const ToyScene s = ToyScene::make();
  REQUIRE(s.keys.size() == 3);
  const std::vector<double> f_a{5.0, 2.0, 1.0};
  const RoiMap roi = uniform_roi(s.grid, s.keys, f_a);
  QualityLadder ladder;
  ladder.bits_per_point = {0.0, 1.0, 2.0, 3.0};  // unit increments
  const double unit = 6.0;  // six points per cube -> each raise costs 6 bits

  for (double budget : {0.0, 6.0, 12.0, 18.0, 24.0, 30.0, 36.0, 42.0, 54.0}) {
    const AllocationPlan plan = allocate(s.keys, roi, ladder, budget);
    CHECK(plan.bits_used <= budget);

    // exhaustive search over all feasible level assignments
    double best = -1.0;
    for (int a = 0; a <= 3; ++a)
      for (int b = 0; b <= 3; ++b)
        for (int c = 0; c <= 3; ++c) {
          const double cost = unit * (a + b + c);
          if (cost > budget) continue;
          best = std::max(best, f_a[0] * a + f_a[1] * b + f_a[2] * c);
        }
    auto level = [&](std::size_t i) {
      const auto it = plan.levels.find(s.keys[i]);
      return it == plan.levels.end() ? 0 : it->second;
    };
    const double got =
        f_a[0] * level(0) + f_a[1] * level(1) + f_a[2] * level(2);
    CHECK(got == doctest::Approx(best));
  }
}

TEST_CASE("allocate: plans grow pointwise with budget") {
  const ToyScene s = ToyScene::make();
  const RoiMap roi = uniform_roi(s.grid, s.keys, {5.0, 4.0, 3.0});
  QualityLadder ladder;
  ladder.bits_per_point = {0.0, 0.7, 1.9, 4.2};
  AllocationPlan prev;
  for (double budget = 0.0; budget <= 80.0; budget += 2.5) {
    const AllocationPlan plan = allocate(s.keys, roi, ladder, budget);
    for (const auto& [key, level] : prev.levels) {
      const auto it = plan.levels.find(key);
      const int now = it == plan.levels.end() ? 0 : it->second;
      CHECK(now >= level);
    }
    prev = plan;
  }
}

TEST_CASE("simulate: a perfect oracle with ample budget has recall 1") {
  const ToyScene s = ToyScene::make();
  // viewer fixates the middle cluster; side clusters stay outside the cone
  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  for (int i = 0; i < 30; ++i) {
    const Vec3 pos(-4.0, 3.5, 0.5);
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, Vec3(1, 0, 0)));
  }
  const Session session = session_of(std::move(samples));

  // honest ROI from the recorded gaze
  const auto hits = count_hits(session, gaze, s.grid, s.keys, 30.0);
  const RoiMap roi = roi_levels(hits, s.grid, s.keys, 30);

  SimConfig cfg;
  cfg.horizon = 5;
  auto oracle = make_oracle_predictor();
  const SimReport report = simulate(session, gaze, *oracle, s.grid, s.keys,
                                    roi, QualityLadder{}, 1e9, cfg);
  CHECK(report.recall == 1.0);
  CHECK(report.viewed_cube_count > 0);
  CHECK(report.bandwidth_saved_fraction > 0.0);  // side clusters never sent
  CHECK(report.bandwidth_used_bits <
        report.bandwidth_full_bits);
  // saved identity
  CHECK(report.bandwidth_saved_fraction ==
        doctest::Approx(1.0 - report.bandwidth_used_bits /
                                  report.bandwidth_full_bits)
            .epsilon(1e-12));
}

TEST_CASE("simulate: persistence on a stationary viewer has recall 1") {
  const ToyScene s = ToyScene::make();
  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  for (int i = 0; i < 25; ++i) {
    const Vec3 pos(-4.0, 3.5, 0.5);
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, Vec3(1, 0, 0)));
  }
  const Session session = session_of(std::move(samples));
  const auto hits = count_hits(session, gaze, s.grid, s.keys, 30.0);
  const RoiMap roi = roi_levels(hits, s.grid, s.keys, 25);

  SimConfig cfg;
  cfg.horizon = 4;
  auto persistence = make_persistence_predictor();
  const SimReport report = simulate(session, gaze, *persistence, s.grid,
                                    s.keys, roi, QualityLadder{}, 1e9, cfg);
  CHECK(report.recall == 1.0);
}

TEST_CASE("simulate: a lagging predictor misses exactly the switch frames") {
  const ToyScene s = ToyScene::make();
  // frames 0..9 fixate cluster A (y=0.5), frames 10..19 cluster C (y=6.5)
  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  for (int i = 0; i < 20; ++i) {
    const Vec3 pos(-4.0, 3.5, 0.5);
    const Vec3 target = i < 10 ? Vec3(0.5, 0.5, 0.5) : Vec3(0.5, 6.5, 0.5);
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, target - pos));
  }
  const Session session = session_of(std::move(samples));
  const RoiMap roi = uniform_roi(s.grid, s.keys, {1.0, 1.0, 1.0});

  SimConfig cfg;
  cfg.horizon = 1;
  cfg.sliding_window = true;
  auto persistence = make_persistence_predictor();
  std::vector<FrameTrace> trace;
  const SimReport report =
      simulate(session, gaze, *persistence, s.grid, s.keys, roi,
               QualityLadder{}, 1e9, cfg, &trace);

  // hand-computed: 19 scored frames (1..19); frame 10 is predicted from
  // frame 9's gaze (cluster A) while the user already views cluster C
  std::size_t viewed = 0, sent = 0;
  for (const FrameTrace& f : trace) {
    viewed += f.viewed;
    sent += f.viewed_sent;
  }
  CHECK(report.frames_scored == 19);
  CHECK(viewed > sent);  // the switch frame misses
  CHECK(report.recall == doctest::Approx(double(sent) / double(viewed)));
  for (const FrameTrace& f : trace) {
    if (f.frame == 10) CHECK(f.viewed_sent == 0);
    if (f.frame == 12) CHECK(f.viewed_sent == f.viewed);
  }
}

TEST_CASE("simulate: recall is monotone over a budget sweep") {
  const ToyScene s = ToyScene::make();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  for (int i = 0; i < 40; ++i) {
    const Vec3 pos(-4.0, 3.5 + 2.5 * u(rng), 0.5);
    const Vec3 target(0.5, 3.5 + 3.0 * u(rng), 0.5);
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, target - pos));
  }
  const Session session = session_of(std::move(samples));
  const auto hits = count_hits(session, gaze, s.grid, s.keys, 30.0);
  const RoiMap roi = roi_levels(hits, s.grid, s.keys, 40);

  SimConfig cfg;
  cfg.horizon = 5;
  double prev_recall = -1.0, prev_quality = -1.0;
  for (double budget : {0.0, 8.0, 16.0, 24.0, 48.0, 96.0}) {
    auto oracle = make_oracle_predictor();
    const SimReport report = simulate(session, gaze, *oracle, s.grid, s.keys,
                                      roi, QualityLadder{}, budget, cfg);
    CHECK(report.recall >= prev_recall);
    CHECK(report.mean_viewed_quality >= prev_quality);
    prev_recall = report.recall;
    prev_quality = report.mean_viewed_quality;
  }
}

TEST_CASE("simulate: oracle recall dominates the baselines") {
  const ToyScene s = ToyScene::make();
  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  for (int i = 0; i < 30; ++i) {
    const Vec3 pos(-4.0, 3.5, 0.5);
    const Vec3 target = (i / 5) % 2 == 0 ? Vec3(0.5, 0.5, 0.5)
                                         : Vec3(0.5, 6.5, 0.5);
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, target - pos));
  }
  const Session session = session_of(std::move(samples));
  const RoiMap roi = uniform_roi(s.grid, s.keys, {1.0, 1.0, 1.0});

  SimConfig cfg;
  cfg.horizon = 3;
  auto oracle = make_oracle_predictor();
  auto persistence = make_persistence_predictor();
  const SimReport oracle_report = simulate(session, gaze, *oracle, s.grid,
                                           s.keys, roi, QualityLadder{}, 1e9,
                                           cfg);
  const SimReport persist_report =
      simulate(session, gaze, *persistence, s.grid, s.keys, roi,
               QualityLadder{}, 1e9, cfg);
  CHECK(oracle_report.recall >= persist_report.recall);
  CHECK(oracle_report.recall == 1.0);
}

TEST_CASE("simulate: misaligned gaze is an error") {
  const ToyScene s = ToyScene::make();
  const Session session = session_of({sample_at(0.0, {0, 0, 0})});
  const RoiMap roi = uniform_roi(s.grid, s.keys, {1, 1, 1});
  auto oracle = make_oracle_predictor();
  CHECK_THROWS_WITH_AS(simulate(session, {}, *oracle, s.grid, s.keys, roi,
                                QualityLadder{}, 1.0, SimConfig{}),
                       doctest::Contains("MisalignedInputs"), DataError);
}

TEST_CASE("allocate: budget feasibility on random instances") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ToyScene s = ToyScene::make();
  for (int round = 0; round < 100; ++round) {
    const RoiMap roi =
        uniform_roi(s.grid, s.keys, {u(rng) * 9, u(rng) * 9, u(rng) * 9});
    QualityLadder ladder;
    ladder.bits_per_point = {0.0, u(rng) + 0.1, u(rng) + 1.2, u(rng) + 2.4};
    const double budget = u(rng) * 60.0;
    const AllocationPlan plan = allocate(s.keys, roi, ladder, budget);
    CHECK(plan.bits_used <= budget + 1e-12);
    for (const auto& [key, level] : plan.levels) {
      CHECK(level >= 1);
      CHECK(level <= ladder.top_level());
    }
  }
}

TEST_CASE("QualityLadder: loads from JSON and validates") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "vvt_ladder.json").string();
  {
    std::ofstream out(path);
    out << R"({"bits_per_point": [0.0, 0.5, 1.5, 4.0]})";
  }
  const QualityLadder ladder = QualityLadder::from_json_file(path);
  CHECK(ladder.top_level() == 3);
  CHECK(ladder.bits_per_point[2] == 1.5);
  {
    std::ofstream out(path);
    out << R"({"bits_per_point": [0.5, 1.0]})";
  }
  CHECK_THROWS_AS(QualityLadder::from_json_file(path), UsageError);
  std::remove(path.c_str());
}
