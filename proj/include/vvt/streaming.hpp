#pragma once

// Cube-based streaming value model: predict the viewport, cull cubes to
// the predicted gaze cone, spend a per-frame bit budget by ROI priority,
// and score the plan against the cubes the user actually viewed.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vvt/predictor.hpp"
#include "vvt/voxel_roi.hpp"

namespace vvt::stream {

using predict::ViewportState;
using predict::ViewportTrajectory;

/// Transmission quality ladder: bits per point per frame by level.
/// Level 0 means "not sent" and always costs 0; costs strictly increase
/// with level.
struct QualityLadder {
  std::vector<double> bits_per_point{0.0, 1.0, 2.0, 4.0};

  int top_level() const { return static_cast<int>(bits_per_point.size()) - 1; }
  void validate() const;
  static QualityLadder from_json_file(const std::string& path);
};

/// Per-frame visible cube sets under a predicted trajectory: cubes whose
/// centers fall inside the gaze cone of each predicted state.
std::vector<std::vector<CubeKey>> cull(const ViewportTrajectory& predicted,
                                       const VoxelGrid& grid,
                                       std::span<const CubeKey> cubes,
                                       double half_angle_deg = 30.0);

struct AllocationPlan {
  std::map<CubeKey, int> levels;  // visible cubes only; absent = level 0
  double bits_used = 0;
};

/// Greedy allocation: visible cubes ordered by descending ROI level (ties
/// by cube index) are each raised level-by-level to the top while the
/// budget allows; allocation stops at the first raise that does not fit.
/// The raise sequence is budget-independent, so plans grow pointwise with
/// the budget.
AllocationPlan allocate(std::span<const CubeKey> visible, const RoiMap& roi,
                        const QualityLadder& ladder, double budget_bits);

/// Viewport source for the simulation loop.
class SimPredictor {
 public:
  virtual ~SimPredictor() = default;
  virtual std::string name() const = 0;
  virtual int min_history() const = 0;
  virtual ViewportTrajectory predict(const Session& session,
                                     std::span<const GlobalGaze> gaze,
                                     std::size_t now, int horizon) = 0;
};

/// Ground truth replayed as the prediction.
std::unique_ptr<SimPredictor> make_oracle_predictor();
/// Repeats the last observed gaze ray.
std::unique_ptr<SimPredictor> make_persistence_predictor();
/// Per-dimension linear extrapolation of the recent window.
std::unique_ptr<SimPredictor> make_linear_predictor(int window);
/// Wraps a trained model; scene features come from the supplied cloud.
std::unique_ptr<SimPredictor> make_model_predictor(
    std::shared_ptr<predict::GazePredictor> model,
    std::shared_ptr<const std::vector<Vec3>> scene,
    EulerOrder order = EulerOrder::kRollPitchYaw);

struct SimConfig {
  double half_angle_deg = 30.0;
  int horizon = 30;
  bool sliding_window = false;  // re-predict every frame instead of every
                                // horizon block
};

struct SimReport {
  double bandwidth_used_bits = 0;
  double bandwidth_full_bits = 0;   // every effective cube at top level
  double bandwidth_saved_fraction = 0;
  double recall = 0;                // viewed cubes sent at level > 0
  double mean_viewed_quality = 0;   // mean level over viewed cubes
  std::int64_t frames_scored = 0;
  std::int64_t viewed_cube_count = 0;
};

struct FrameTrace {
  std::size_t frame = 0;
  std::size_t visible = 0;
  std::size_t viewed = 0;
  std::size_t viewed_sent = 0;
  double bits = 0;
};

/// Per frame: predict, cull, allocate, then score against the cubes inside
/// the recorded gaze cone. Frames before the predictor's minimum history
/// are not scored.
SimReport simulate(const Session& session, std::span<const GlobalGaze> gaze,
                   SimPredictor& predictor, const VoxelGrid& grid,
                   std::span<const CubeKey> effective, const RoiMap& roi,
                   const QualityLadder& ladder, double budget_bits,
                   const SimConfig& cfg,
                   std::vector<FrameTrace>* trace = nullptr);

}  // namespace vvt::stream
