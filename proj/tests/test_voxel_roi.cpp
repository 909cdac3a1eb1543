#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "test_support.hpp"
#include "vvt/errors.hpp"
#include "vvt/voxel_roi.hpp"

using namespace vvt;
using vvt::testing::sample_at;
using vvt::testing::session_of;

namespace {

std::vector<CubeKey> all_keys(const VoxelGrid& g) {
  std::vector<CubeKey> keys;
  for (const auto& [key, stats] : g.cubes()) keys.push_back(key);
  return keys;
}

// Brute force over every (sample, cube) pair, straight from the membership
// definition, kept independent of count_hits' internals.
std::map<CubeKey, HitStats> hits_oracle(const Session& session,
                                        const std::vector<GlobalGaze>& gaze,
                                        const VoxelGrid& grid,
                                        const std::vector<CubeKey>& keys,
                                        double half_deg) {
  std::map<CubeKey, HitStats> out;
  for (CubeKey key : keys) {
    HitStats st;
    const Vec3 center = grid.center_of(key);
    double sum = 0;
    for (std::size_t i = 0; i < session.samples.size(); ++i) {
      const Vec3 to = center - gaze[i].origin;
      if (to.norm() == 0) continue;
      const double angle =
          rad_to_deg(std::acos(std::clamp(
              to.normalized().dot(gaze[i].direction), -1.0, 1.0)));
      if (angle <= half_deg + 1e-7) {
        st.hit_count += 1;
        sum += (center - session.samples[i].headset.position).norm();
      }
    }
    if (st.hit_count > 0) st.mean_distance = sum / double(st.hit_count);
    out[key] = st;
  }
  return out;
}

}  // namespace

TEST_CASE("build_grid: one point, one cube, density 1") {
  const std::vector<Vec3> pts{{0, 0, 0}};
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  REQUIRE(g.cubes().size() == 1);
  const auto& [key, stats] = *g.cubes().begin();
  CHECK(stats.point_count == 1);
  CHECK(stats.density == 1.0);
  CHECK((g.center_of(key) - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12);
}

TEST_CASE("build_grid: 2x2x2 arrangement fills eight cubes") {
  std::vector<Vec3> pts;
  for (double x : {0.5, 1.5})
    for (double y : {0.5, 1.5})
      for (double z : {0.5, 1.5}) pts.emplace_back(x, y, z);
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  CHECK(g.cubes().size() == 8);
  for (const auto& [key, stats] : g.cubes()) {
    CHECK(stats.point_count == 1);
  }
}

TEST_CASE("build_grid: point conservation on random clouds") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> edge(0.1, 1.5);
  for (int round = 0; round < 30; ++round) {
    const std::vector<Vec3> pts = vvt::testing::random_cloud(1000, rng);
    const VoxelGrid g = VoxelGrid::build(pts, edge(rng));
    CHECK(g.total_points() == 1000);
  }
}

TEST_CASE("build_grid: empty cloud and non-positive edge are errors") {
  CHECK_THROWS_WITH_AS(VoxelGrid::build({}, 1.0),
                       doctest::Contains("EmptyScene"), DataError);
  const std::vector<Vec3> pts{{0, 0, 0}};
  CHECK_THROWS_AS(VoxelGrid::build(pts, 0.0), UsageError);
}

TEST_CASE("filter_cubes: fixed thresholds") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i) pts.emplace_back(0.1 * i, 0, 0);  // one cube
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);

  ThresholdRule keep_all;
  keep_all.tau0 = 1.0;
  CHECK(filter_cubes(g, keep_all).size() == g.cubes().size());

  ThresholdRule strict;
  strict.tau0 = 10.0;
  CHECK(filter_cubes(g, strict).empty());
}

TEST_CASE("filter_cubes: distance-adaptive threshold scales quadratically") {
  // 12 points inside one 1m cube centered at (0.5, 0.5, 0.5)
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) {
    pts.emplace_back(0.3 + 0.03 * i, 0.5, 0.5);
  }
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  REQUIRE(g.cubes().size() == 1);
  const Vec3 center = g.center_of(all_keys(g)[0]);

  ThresholdRule rule;
  rule.mode = ThresholdRule::Mode::kDistanceAdaptive;
  rule.tau0 = 4.0;
  rule.distance_ref_m = 1.0;

  // trajectory at constant distance 2m: tau = 4 * (2/1)^2 = 16 > 12
  std::vector<Vec3> far{center + Vec3(2, 0, 0), center + Vec3(0, 2, 0)};
  CHECK(filter_cubes(g, rule, far).empty());

  // at 1m: tau = 4 <= 12
  std::vector<Vec3> near{center + Vec3(1, 0, 0)};
  CHECK(filter_cubes(g, rule, near).size() == 1);

  CHECK_THROWS_AS(filter_cubes(g, rule), UsageError);
}

TEST_CASE("count_hits: fixating a center counts every sample") {
  std::vector<Vec3> pts{{0.5, 0.5, 0.5}};
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  const std::vector<CubeKey> keys = all_keys(g);
  const Vec3 center = g.center_of(keys[0]);

  const int n = 25;
  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  for (int i = 0; i < n; ++i) {
    const Vec3 pos(5, 0.5, 0.5);
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, center - pos));
  }
  const Session s = session_of(std::move(samples));
  const auto hits = count_hits(s, gaze, g, keys, 30.0);
  CHECK(hits.at(keys[0]).hit_count == n);
  const double expected = (center - Vec3(5, 0.5, 0.5)).norm();
  CHECK(hits.at(keys[0]).mean_distance ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("count_hits: a cube behind the viewer is never hit") {
  std::vector<Vec3> pts{{0.5, 0.5, 0.5}};
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  const std::vector<CubeKey> keys = all_keys(g);

  std::vector<TraceSample> samples{sample_at(0.0, {5, 0.5, 0.5})};
  std::vector<GlobalGaze> gaze{
      GlobalGaze::from({5, 0.5, 0.5}, {1, 0, 0})};  // looking away
  const auto hits = count_hits(session_of(std::move(samples)), gaze, g, keys,
                               30.0);
  CHECK(hits.at(keys[0]).hit_count == 0);
}

TEST_CASE("count_hits: misaligned inputs are an error") {
  std::vector<Vec3> pts{{0, 0, 0}};
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  const Session s = session_of({sample_at(0.0, {1, 1, 1})});
  CHECK_THROWS_WITH_AS(count_hits(s, {}, g, all_keys(g), 30.0),
                       doctest::Contains("MisalignedInputs"), DataError);
}

TEST_CASE("count_hits: scripted sweep matches the per-pair oracle") {
  // three cubes in a row, a gaze that sweeps across them
  std::vector<Vec3> pts;
  for (double x : {0.5, 1.5, 2.5}) {
    for (int i = 0; i < 4; ++i) pts.emplace_back(x - 0.1 + 0.05 * i, 0.5, 0.5);
  }
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  const std::vector<CubeKey> keys = all_keys(g);
  REQUIRE(keys.size() == 3);

  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  for (int i = 0; i < 10; ++i) {
    const Vec3 pos(1.5, -4.0, 0.5);
    const double yaw_deg = 60.0 + i * (-120.0) / 9.0;  // sweep left to right
    const Vec3 dir(std::sin(deg_to_rad(yaw_deg)), std::cos(deg_to_rad(yaw_deg)),
                   0.0);
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, dir));
  }
  const Session s = session_of(std::move(samples));
  const auto got = count_hits(s, gaze, g, keys, 30.0);
  const auto expected = hits_oracle(s, gaze, g, keys, 30.0);
  for (CubeKey key : keys) {
    CHECK(got.at(key).hit_count == expected.at(key).hit_count);
    CHECK(got.at(key).mean_distance ==
          doctest::Approx(expected.at(key).mean_distance).epsilon(1e-12));
  }
  // the sweep must actually hit something
  std::int64_t total = 0;
  for (CubeKey key : keys) total += got.at(key).hit_count;
  CHECK(total > 0);
}

TEST_CASE("count_hits: sample order does not matter") {
  std::mt19937_64 rng(67);
  const std::vector<Vec3> pts = vvt::testing::random_cloud(60, rng, 1.0);
  const VoxelGrid g = VoxelGrid::build(pts, 0.5);
  const std::vector<CubeKey> keys = all_keys(g);

  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const Vec3 pos(3.0 + u(rng), u(rng), u(rng));
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, Vec3(-1.0, 0.3 * u(rng), 0.3 * u(rng))));
  }
  const Session s = session_of(samples);
  const auto base = count_hits(s, gaze, g, keys, 30.0);

  std::vector<std::size_t> perm(samples.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<TraceSample> samples2;
  std::vector<GlobalGaze> gaze2;
  for (std::size_t i : perm) {
    samples2.push_back(samples[i]);
    gaze2.push_back(gaze[i]);
  }
  const auto shuffled =
      count_hits(session_of(std::move(samples2)), gaze2, g, keys, 30.0);
  for (CubeKey key : keys) {
    CHECK(base.at(key).hit_count == shuffled.at(key).hit_count);
    CHECK(base.at(key).mean_distance ==
          doctest::Approx(shuffled.at(key).mean_distance).epsilon(1e-12));
  }
}

TEST_CASE("count_hits: thread count does not change a single bit") {
  std::mt19937_64 rng(71);
  const std::vector<Vec3> pts = vvt::testing::random_cloud(40, rng, 1.0);
  const VoxelGrid g = VoxelGrid::build(pts, 0.5);
  const std::vector<CubeKey> keys = all_keys(g);

  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 pos(3.0 + u(rng), u(rng), u(rng));
    samples.push_back(sample_at(i * 0.01, pos));
    gaze.push_back(GlobalGaze::from(pos, Vec3(-1.0, u(rng), u(rng))));
  }
  const Session s = session_of(std::move(samples));
  const auto t1 = count_hits(s, gaze, g, keys, 30.0, 1);
  const auto t4 = count_hits(s, gaze, g, keys, 30.0, 4);
  for (CubeKey key : keys) {
    CHECK(t1.at(key).hit_count == t4.at(key).hit_count);
    CHECK(t1.at(key).mean_distance == t4.at(key).mean_distance);
    CHECK(t1.at(key).sum_inv_distance == t4.at(key).sum_inv_distance);
  }
}

TEST_CASE("roi_levels: direct formula substitution") {
  // density 8 (8 points in a 1m cube), f_g = 0.5, mean distance 2
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(0.1 + 0.1 * i, 0.5, 0.5);
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  const std::vector<CubeKey> keys = all_keys(g);

  std::map<CubeKey, HitStats> hits;
  hits[keys[0]] = HitStats{5, 2.0, 5.0 / 2.0};
  const RoiMap m = roi_levels(hits, g, keys, 10);
  CHECK(m.cells.at(keys[0]).f_g == 0.5);
  CHECK(m.cells.at(keys[0]).f_a == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("roi_levels: unhit cubes have level zero") {
  std::vector<Vec3> pts{{0.25, 0.25, 0.25}, {0.75, 0.75, 0.75}};
  const VoxelGrid g = VoxelGrid::build(pts, 0.5);
  const std::vector<CubeKey> keys = all_keys(g);
  std::map<CubeKey, HitStats> hits;  // nothing hit
  const RoiMap m = roi_levels(hits, g, keys, 100);
  for (CubeKey key : keys) {
    CHECK(m.cells.at(key).f_a == 0.0);
    CHECK(m.cells.at(key).f_g == 0.0);
  }
}

TEST_CASE("roi pipeline matches a single-pass oracle recomputation") {
  std::mt19937_64 rng(73);
  // scene: up to 27 cubes of a 3x3x3 block
  std::vector<Vec3> pts;
  std::uniform_real_distribution<double> jitter(0.05, 0.95);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int p = 0; p < 5; ++p)
          pts.emplace_back(i + jitter(rng), j + jitter(rng), k + jitter(rng));
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  const std::vector<CubeKey> keys = all_keys(g);

  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n_samples = 150;
  for (int i = 0; i < n_samples; ++i) {
    const Vec3 pos(1.5 + u(rng), -5.0, 1.5 + u(rng));
    const Vec3 target(1.5 + 1.5 * u(rng), 1.5, 1.5 + 1.5 * u(rng));
    samples.push_back(sample_at(i * 0.05, pos));
    gaze.push_back(GlobalGaze::from(pos, target - pos));
  }
  const Session s = session_of(std::move(samples));

  const auto hits = count_hits(s, gaze, g, keys, 30.0);
  const RoiMap m = roi_levels(hits, g, keys, n_samples);

  // oracle: recompute the levels from scratch, straight from the formulas
  const auto oracle = hits_oracle(s, gaze, g, keys, 30.0);
  for (CubeKey key : keys) {
    const RoiCell& cell = m.cells.at(key);
    const HitStats& o = oracle.at(key);
    CHECK(cell.hit_count == o.hit_count);
    CHECK(cell.f_g >= 0.0);
    CHECK(cell.f_g <= 1.0);
    const double f_g = double(o.hit_count) / double(n_samples);
    const double density = double(cell.point_count) / 1.0;
    if (o.hit_count > 0) {
      const double expected = density * f_g / o.mean_distance;
      CHECK(cell.f_a ==
            doctest::Approx(expected).epsilon(1e-12));
    } else {
      CHECK(cell.f_a == 0.0);
    }
  }
}

TEST_CASE("roi: duplicating every point doubles density and level exactly") {
  std::mt19937_64 rng(79);
  std::vector<Vec3> pts = vvt::testing::random_cloud(200, rng, 1.5);

  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Vec3 pos(4.0, u(rng), u(rng));
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, Vec3(-1, 0.2 * u(rng), 0.2 * u(rng))));
  }
  const Session s = session_of(samples);

  const VoxelGrid g1 = VoxelGrid::build(pts, 0.5);
  std::vector<Vec3> doubled = pts;
  doubled.insert(doubled.end(), pts.begin(), pts.end());
  const VoxelGrid g2 = VoxelGrid::build(doubled, 0.5);

  const std::vector<CubeKey> keys = all_keys(g1);
  const auto hits1 = count_hits(s, gaze, g1, keys, 30.0);
  const auto hits2 = count_hits(s, gaze, g2, keys, 30.0);
  const RoiMap m1 = roi_levels(hits1, g1, keys, 50);
  const RoiMap m2 = roi_levels(hits2, g2, keys, 50);
  for (CubeKey key : keys) {
    CHECK(m2.cells.at(key).density == 2.0 * m1.cells.at(key).density);
    CHECK(m2.cells.at(key).f_g == m1.cells.at(key).f_g);
    CHECK(m2.cells.at(key).f_a == 2.0 * m1.cells.at(key).f_a);
  }
}

TEST_CASE("roi_distribution: identical levels give zero deviation") {
  std::vector<Vec3> pts{{0.5, 0.5, 0.5}};
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  RoiMap m;
  m.edge = 1.0;
  m.n_sample = 10;
  for (CubeKey key = 0; key < 4; ++key) {
    RoiCell cell;
    cell.hit_count = 10;
    cell.f_a = 3.0;
    m.cells[key] = cell;
  }
  const RoiDistribution d = roi_distribution(m, 4, 1);
  CHECK(d.mean == 3.0);
  CHECK(d.std_dev == 0.0);
  CHECK(d.cube_count == 4);
}

TEST_CASE("roi_distribution: zero-exclusion off includes unhit cubes") {
  RoiMap m;
  m.n_sample = 10;
  for (CubeKey key = 0; key < 3; ++key) {
    RoiCell cell;
    cell.hit_count = key == 2 ? 10 : 0;
    cell.f_a = key == 2 ? 10.0 : 0.0;
    m.cells[key] = cell;
  }
  const RoiDistribution with_zeros = roi_distribution(m, 2, 0);
  CHECK(with_zeros.mean == doctest::Approx(10.0 / 3.0).epsilon(1e-12));
  const RoiDistribution without = roi_distribution(m, 2, 5);
  CHECK(without.mean == 10.0);
  CHECK(without.cube_count == 1);
}

TEST_CASE("roi_distribution: histogram matches a direct recomputation") {
  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> level(0.0, 50.0);
  RoiMap m;
  m.n_sample = 100;
  std::vector<double> values;
  for (CubeKey key = 0; key < 60; ++key) {
    RoiCell cell;
    cell.hit_count = 10;
    cell.f_a = level(rng);
    values.push_back(cell.f_a);
    m.cells[key] = cell;
  }
  const RoiDistribution d = roi_distribution(m, 10, 1);
  double mean = 0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  CHECK(d.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(d.std_dev ==
        doctest::Approx(std::sqrt(ss / double(values.size()))).epsilon(1e-12));
  std::int64_t total = 0;
  for (std::int64_t c : d.histogram.counts) total += c;
  CHECK(total == static_cast<std::int64_t>(values.size()));
  CHECK_THROWS_WITH_AS(roi_distribution(RoiMap{}, 4, 0),
                       doctest::Contains("EmptyMap"), DataError);
}

TEST_CASE("roi_levels: per-sample distance mode uses reciprocal distances") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(0.1 + 0.1 * i, 0.5, 0.5);
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  std::vector<CubeKey> keys;
  for (const auto& [key, stats] : g.cubes()) keys.push_back(key);

  HitStats st;
  st.hit_count = 2;
  st.mean_distance = (2.0 + 4.0) / 2.0;
  st.sum_inv_distance = 1.0 / 2.0 + 1.0 / 4.0;
  std::map<CubeKey, HitStats> hits{{keys[0], st}};

  const RoiMap per_sample =
      roi_levels(hits, g, keys, 10, RoiDistanceMode::kPerSample);
  CHECK(per_sample.cells.at(keys[0]).f_a ==
        doctest::Approx(8.0 * (0.5 + 0.25) / 10.0).epsilon(1e-12));

  const RoiMap mean_mode =
      roi_levels(hits, g, keys, 10, RoiDistanceMode::kMeanDistance);
  CHECK(mean_mode.cells.at(keys[0]).f_a ==
        doctest::Approx(8.0 * 0.2 / 3.0).epsilon(1e-12));
}

TEST_CASE("roi: F_a is monotone in density and hit rate, anti-monotone in "
          "distance") {
  std::vector<Vec3> pts{{0.5, 0.5, 0.5}};
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  std::vector<CubeKey> keys;
  for (const auto& [key, stats] : g.cubes()) keys.push_back(key);
  auto level = [&](std::int64_t hit, double dist, std::int64_t n) {
    std::map<CubeKey, HitStats> hits{{keys[0], HitStats{hit, dist, 0}}};
    return roi_levels(hits, g, keys, n).cells.at(keys[0]).f_a;
  };
  CHECK(level(6, 2.0, 10) > level(3, 2.0, 10));  // more hits
  CHECK(level(3, 1.0, 10) > level(3, 2.0, 10));  // closer
}

TEST_CASE("roi: f_g of a union is the sample-weighted mean of the parts") {
  std::mt19937_64 rng(113);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<Vec3> pts = vvt::testing::random_cloud(50, rng, 1.0);
  const VoxelGrid g = VoxelGrid::build(pts, 0.5);
  const std::vector<CubeKey> keys = all_keys(g);

  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  for (int i = 0; i < 60; ++i) {
    const Vec3 pos(3.0, u(rng), u(rng));
    samples.push_back(sample_at(i * 0.1, pos));
    gaze.push_back(GlobalGaze::from(pos, Vec3(-1.0, 0.5 * u(rng), 0.5 * u(rng))));
  }
  const std::size_t split = 23;
  Session first = session_of({samples.begin(), samples.begin() + split});
  Session second = session_of({samples.begin() + split, samples.end()});
  std::vector<GlobalGaze> gaze1(gaze.begin(), gaze.begin() + split);
  std::vector<GlobalGaze> gaze2(gaze.begin() + split, gaze.end());

  const auto h1 = count_hits(first, gaze1, g, keys, 30.0);
  const auto h2 = count_hits(second, gaze2, g, keys, 30.0);
  const auto hall = count_hits(session_of(samples), gaze, g, keys, 30.0);
  const RoiMap m1 = roi_levels(h1, g, keys, std::int64_t(split));
  const RoiMap m2 = roi_levels(h2, g, keys, std::int64_t(60 - split));
  const RoiMap mall = roi_levels(hall, g, keys, 60);
  for (CubeKey key : keys) {
    const double expected =
        (m1.cells.at(key).f_g * double(split) +
         m2.cells.at(key).f_g * double(60 - split)) /
        60.0;
    CHECK(mall.cells.at(key).f_g ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("mean_viewed_density averages the viewed frame's densities") {
  // one cube; frame 0 holds 2 points, frame 1 holds 6
  std::vector<Vec3> pts{{0.4, 0.5, 0.5}, {0.6, 0.5, 0.5}};
  const VoxelGrid g = VoxelGrid::build(pts, 1.0);
  std::vector<CubeKey> keys;
  for (const auto& [key, stats] : g.cubes()) keys.push_back(key);

  std::vector<std::map<CubeKey, std::int64_t>> frames(2);
  frames[0][keys[0]] = 2;
  frames[1][keys[0]] = 6;

  std::vector<TraceSample> samples;
  std::vector<GlobalGaze> gaze;
  const Vec3 center = g.center_of(keys[0]);
  for (int i = 0; i < 4; ++i) {
    const Vec3 pos(4.0, 0.5, 0.5);
    TraceSample t = sample_at(i * 0.1, pos);
    t.frame = i < 2 ? 0 : 1;  // two samples per frame
    samples.push_back(t);
    gaze.push_back(GlobalGaze::from(pos, center - pos));
  }
  const Session s = session_of(std::move(samples));
  const auto density = mean_viewed_density(s, gaze, g, keys, 30.0, frames);
  CHECK(density.at(keys[0]) == doctest::Approx(4.0).epsilon(1e-12));

  const auto hits = count_hits(s, gaze, g, keys, 30.0);
  const RoiMap m = roi_levels(hits, g, keys, 4,
                              RoiDistanceMode::kMeanDistance, &density);
  CHECK(m.cells.at(keys[0]).density == doctest::Approx(4.0).epsilon(1e-12));
}
