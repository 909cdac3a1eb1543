#include "vvt/streaming.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

#include "vvt/errors.hpp"

namespace vvt::stream {

void QualityLadder::validate() const {
  if (bits_per_point.size() < 2) {
    throw UsageError("quality ladder needs level 0 plus at least one level");
  }
  if (bits_per_point[0] != 0.0) {
    throw UsageError("quality ladder level 0 must cost 0 (not sent)");
  }
  for (std::size_t i = 1; i < bits_per_point.size(); ++i) {
    if (!(bits_per_point[i] > bits_per_point[i - 1])) {
      throw UsageError("quality ladder costs must strictly increase");
    }
  }
}

QualityLadder QualityLadder::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ladder file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("ladder parse error: " + std::string(e.what()));
  }
  QualityLadder ladder;
  ladder.bits_per_point = j.at("bits_per_point").get<std::vector<double>>();
  ladder.validate();
  return ladder;
}

std::vector<std::vector<CubeKey>> cull(const ViewportTrajectory& predicted,
                                       const VoxelGrid& grid,
                                       std::span<const CubeKey> cubes,
                                       double half_angle_deg) {
  std::vector<std::vector<CubeKey>> out;
  out.reserve(predicted.size());
  for (const ViewportState& state : predicted) {
    std::vector<CubeKey> visible;
    const double norm = state.forward.norm();
    if (!(norm > 0)) {
      out.push_back(std::move(visible));
      continue;
    }
    const GlobalGaze ray{state.position, state.forward / norm};
    for (CubeKey key : cubes) {
      const Vec3 center = grid.center_of(key);
      if ((center - ray.origin).squaredNorm() == 0) continue;
      if (in_frustum(ray, center, half_angle_deg)) visible.push_back(key);
    }
    out.push_back(std::move(visible));
  }
  return out;
}

AllocationPlan allocate(std::span<const CubeKey> visible, const RoiMap& roi,
                        const QualityLadder& ladder, double budget_bits) {
  ladder.validate();
  if (budget_bits < 0) throw UsageError("budget must be >= 0");

  struct Entry {
    CubeKey key;
    double f_a;
    std::int64_t points;
  };
  std::vector<Entry> order;
  order.reserve(visible.size());
  for (CubeKey key : visible) {
    const auto it = roi.cells.find(key);
    if (it == roi.cells.end()) continue;
    order.push_back({key, it->second.f_a, it->second.point_count});
  }
  std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
    if (a.f_a != b.f_a) return a.f_a > b.f_a;
    return a.key < b.key;
  });

  AllocationPlan plan;
  for (const Entry& e : order) {
    int level = 0;
    for (int next = 1; next <= ladder.top_level(); ++next) {
      const double inc = (ladder.bits_per_point[static_cast<std::size_t>(next)] -
                          ladder.bits_per_point[static_cast<std::size_t>(next - 1)]) *
                         static_cast<double>(e.points);
      if (plan.bits_used + inc > budget_bits) {
        if (level > 0) plan.levels[e.key] = level;
        return plan;
      }
      plan.bits_used += inc;
      level = next;
    }
    if (level > 0) plan.levels[e.key] = level;
  }
  return plan;
}

namespace {

ViewportTrajectory gaze_future(std::span<const GlobalGaze> gaze,
                               std::size_t now, int horizon) {
  ViewportTrajectory traj;
  traj.reserve(static_cast<std::size_t>(horizon));
  for (int j = 0; j < horizon && now + static_cast<std::size_t>(j) < gaze.size();
       ++j) {
    const GlobalGaze& g = gaze[now + static_cast<std::size_t>(j)];
    traj.push_back(ViewportState{g.origin, g.direction});
  }
  return traj;
}

class OraclePredictor final : public SimPredictor {
 public:
  std::string name() const override { return "oracle"; }
  int min_history() const override { return 0; }
  ViewportTrajectory predict(const Session& session,
                             std::span<const GlobalGaze> gaze, std::size_t now,
                             int horizon) override {
    (void)session;
    return gaze_future(gaze, now, horizon);
  }
};

class PersistencePredictor final : public SimPredictor {
 public:
  std::string name() const override { return "persistence"; }
  int min_history() const override { return 1; }
  ViewportTrajectory predict(const Session& session,
                             std::span<const GlobalGaze> gaze, std::size_t now,
                             int horizon) override {
    (void)session;
    const GlobalGaze& last = gaze[now - 1];
    return ViewportTrajectory(static_cast<std::size_t>(horizon),
                              ViewportState{last.origin, last.direction});
  }
};

class LinearPredictor final : public SimPredictor {
 public:
  explicit LinearPredictor(int window) : window_(std::max(2, window)) {}
  std::string name() const override { return "linear"; }
  int min_history() const override { return window_; }
  ViewportTrajectory predict(const Session& session,
                             std::span<const GlobalGaze> gaze, std::size_t now,
                             int horizon) override {
    (void)session;
    std::vector<predict::HistoryStep> hist;
    hist.reserve(static_cast<std::size_t>(window_));
    for (std::size_t i = now - static_cast<std::size_t>(window_); i < now;
         ++i) {
      predict::HistoryStep step;
      step.viewport = ViewportState{gaze[i].origin, gaze[i].direction};
      step.gaze = gaze[i];
      hist.push_back(step);
    }
    return predict::linear_regression_baseline(hist, horizon);
  }

 private:
  int window_;
};

class ModelPredictor final : public SimPredictor {
 public:
  ModelPredictor(std::shared_ptr<predict::GazePredictor> model,
                 std::shared_ptr<const std::vector<Vec3>> scene,
                 EulerOrder order)
      : model_(std::move(model)), scene_(std::move(scene)), order_(order) {}
  std::string name() const override { return "model"; }
  int min_history() const override { return model_->config().history_len; }
  ViewportTrajectory predict(const Session& session,
                             std::span<const GlobalGaze> gaze, std::size_t now,
                             int horizon) override {
    std::vector<predict::HistoryStep> hist;
    const auto n = static_cast<std::size_t>(model_->config().history_len);
    hist.reserve(n);
    for (std::size_t i = now - n; i < now; ++i) {
      hist.push_back(predict::HistoryStep{
          predict::viewport_state_of(session.samples[i], order_), gaze[i]});
    }
    ViewportTrajectory traj = model_->predict(hist, *scene_);
    traj.resize(std::min<std::size_t>(traj.size(),
                                      static_cast<std::size_t>(horizon)));
    return traj;
  }

 private:
  std::shared_ptr<predict::GazePredictor> model_;
  std::shared_ptr<const std::vector<Vec3>> scene_;
  EulerOrder order_;
};

}  // namespace

std::unique_ptr<SimPredictor> make_oracle_predictor() {
  return std::make_unique<OraclePredictor>();
}
std::unique_ptr<SimPredictor> make_persistence_predictor() {
  return std::make_unique<PersistencePredictor>();
}
std::unique_ptr<SimPredictor> make_linear_predictor(int window) {
  return std::make_unique<LinearPredictor>(window);
}
std::unique_ptr<SimPredictor> make_model_predictor(
    std::shared_ptr<predict::GazePredictor> model,
    std::shared_ptr<const std::vector<Vec3>> scene, EulerOrder order) {
  return std::make_unique<ModelPredictor>(std::move(model), std::move(scene),
                                          order);
}

SimReport simulate(const Session& session, std::span<const GlobalGaze> gaze,
                   SimPredictor& predictor, const VoxelGrid& grid,
                   std::span<const CubeKey> effective, const RoiMap& roi,
                   const QualityLadder& ladder, double budget_bits,
                   const SimConfig& cfg, std::vector<FrameTrace>* trace) {
  if (gaze.size() != session.samples.size()) {
    throw DataError("MisalignedInputs: gaze list must be 1:1 with samples");
  }
  ladder.validate();

  double full_per_frame = 0;
  for (CubeKey key : effective) {
    const auto it = roi.cells.find(key);
    if (it == roi.cells.end()) continue;
    full_per_frame += ladder.bits_per_point.back() *
                      static_cast<double>(it->second.point_count);
  }

  SimReport report;
  std::int64_t viewed_total = 0, viewed_sent = 0;
  std::int64_t viewed_quality_sum = 0;

  const auto start = static_cast<std::size_t>(predictor.min_history());
  std::size_t now = start;
  while (now < session.samples.size()) {
    const int block = cfg.sliding_window ? 1 : cfg.horizon;
    const ViewportTrajectory predicted =
        predictor.predict(session, gaze, now, cfg.horizon);
    const std::vector<std::vector<CubeKey>> visible =
        cull(predicted, grid, effective, cfg.half_angle_deg);

    for (int j = 0; j < block; ++j) {
      const std::size_t frame = now + static_cast<std::size_t>(j);
      if (frame >= session.samples.size()) break;
      if (static_cast<std::size_t>(j) >= visible.size()) break;

      const AllocationPlan plan =
          allocate(visible[static_cast<std::size_t>(j)], roi, ladder,
                   budget_bits);
      report.bandwidth_used_bits += plan.bits_used;
      report.bandwidth_full_bits += full_per_frame;

      // ground truth: cubes inside the recorded gaze cone
      std::size_t viewed = 0, sent = 0;
      for (CubeKey key : effective) {
        const Vec3 center = grid.center_of(key);
        if ((center - gaze[frame].origin).squaredNorm() == 0) continue;
        if (!in_frustum(gaze[frame], center, cfg.half_angle_deg)) continue;
        ++viewed;
        const auto it = plan.levels.find(key);
        if (it != plan.levels.end() && it->second > 0) {
          ++sent;
          viewed_quality_sum += it->second;
        }
      }
      viewed_total += static_cast<std::int64_t>(viewed);
      viewed_sent += static_cast<std::int64_t>(sent);
      ++report.frames_scored;
      if (trace) {
        trace->push_back(FrameTrace{
            frame, visible[static_cast<std::size_t>(j)].size(), viewed, sent,
            plan.bits_used});
      }
    }
    now += static_cast<std::size_t>(block);
  }

  report.viewed_cube_count = viewed_total;
  report.recall = viewed_total > 0 ? static_cast<double>(viewed_sent) /
                                         static_cast<double>(viewed_total)
                                   : 1.0;
  report.mean_viewed_quality =
      viewed_total > 0 ? static_cast<double>(viewed_quality_sum) /
                             static_cast<double>(viewed_total)
                       : 0.0;
  report.bandwidth_saved_fraction =
      report.bandwidth_full_bits > 0
          ? 1.0 - report.bandwidth_used_bits / report.bandwidth_full_bits
          : 0.0;
  return report;
}

}  // namespace vvt::stream
