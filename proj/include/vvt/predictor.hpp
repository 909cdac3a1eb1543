#pragma once

// Gaze-assisted cross-modal viewport predictor. History windows of 6-DoF
// viewport states are embedded per step, scene features come from the
// set-abstraction encoder, per-step gaze features are gathered from the
// per-point feature map, and a bidirectional cross-attention stack fuses
// the streams before a positional-encoding decoder head emits future
// states as residuals over the last observed state.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vvt/geometry.hpp"
#include "vvt/nn.hpp"
#include "vvt/scene_encoder.hpp"
#include "vvt/trace.hpp"

namespace vvt::predict {

/// One 6-DoF viewport state: position plus viewing direction. The
/// direction is kept as a vector (not Euler angles) so regression has no
/// wrap discontinuities; conversions for reporting go through
/// forward_to_euler.
struct ViewportState {
  Vec3 position{0, 0, 0};
  Vec3 forward{1, 0, 0};
};

using ViewportTrajectory = std::vector<ViewportState>;

ViewportState viewport_state_of(const TraceSample& s,
                                EulerOrder order = EulerOrder::kRollPitchYaw);

struct HistoryStep {
  ViewportState viewport;
  GlobalGaze gaze;
};

struct PredictorConfig {
  int history_len = 90;  // n
  int horizon = 30;      // t
  int embed_dim = 64;    // d, divisible by heads
  int heads = 4;
  int fusion_layers = 2;
  int scene_points = 256;
  double half_angle_deg = 30.0;
  int head_hidden = 64;
  double orientation_loss_weight = 0.1;  // degrees weighted against meters
  double learning_rate = 1e-2;
  int epochs = 200;
  std::uint64_t seed = 1;
  SceneEncoderConfig encoder{};

  void validate() const;
};

struct AblationFlags {
  bool no_gaze = false;           // learned constant instead of gaze gather
  bool no_point_encoder = false;  // raw-coordinate statistics instead of SA
  bool no_cross_modal = false;    // plain concatenation instead of fusion
};

/// Indices of points whose direction from the ray origin lies within the
/// cone; empty when nothing qualifies.
std::vector<int> cone_point_indices(std::span<const Vec3> points,
                                    const GlobalGaze& ray,
                                    double half_angle_deg);

/// Point minimizing the angle to the ray among cone members, -1 if the
/// cone is empty. Ties break toward the lower index.
int select_gaze_point(std::span<const Vec3> points, const GlobalGaze& ray,
                      double half_angle_deg);

struct GazeGather {
  nn::Mat per_step;              // n x d rows gathered from F_p
  std::vector<int> point_index;  // -1 where the fallback row was used
  std::vector<std::uint8_t> fallback;
};

/// Per-step gaze feature rows: nearest-angle cone member of the gaze ray,
/// headset-forward retry, zero row as the flagged fallback.
GazeGather gather_gaze_features(const nn::Mat& per_point,
                                std::span<const Vec3> points,
                                std::span<const HistoryStep> window,
                                double half_angle_deg);

/// One bidirectional cross-modal fusion layer. Viewport stream: the scene
/// context queries the viewport sequence, then the result queries the gaze
/// sequence. Gaze stream: the viewport sequence queries the gaze sequence.
/// Residual connections and layer norm on every sub-block.
class FusionLayer {
 public:
  FusionLayer(Eigen::Index dim, int heads, nn::Rng& rng,
              const std::string& name);

  struct Out {
    nn::Mat viewport;  // f_{m-g}: scene- then gaze-aware viewport sequence
    nn::Mat gaze;      // f_{g-m}: viewport-updated gaze sequence
    nn::Mat scene_aware_viewport;  // f_{m-s}, before the gaze update
  };
  Out forward(const nn::Mat& viewport_seq, const nn::Mat& context_seq,
              const nn::Mat& gaze_seq);

  struct Grads {
    nn::Mat viewport_seq;
    nn::Mat context_seq;
    nn::Mat gaze_seq;
  };
  Grads backward(const nn::Mat& grad_viewport_out, const nn::Mat& grad_gaze_out);

  void collect(std::vector<nn::Param>& out);
  void zero_grad();

  nn::MultiHeadAttention& scene_attention() { return attn_ms_; }
  nn::MultiHeadAttention& gaze_attention() { return attn_mg_; }

 private:
  nn::MultiHeadAttention attn_ms_, attn_mg_, attn_gm_;
  nn::LayerNorm ln_ms_, ln_mg_, ln_gm_;
};

struct TrainingItem {
  std::string user_id;
  std::string video_id;
  std::vector<HistoryStep> window;               // length n
  std::shared_ptr<const std::vector<Vec3>> scene;
  ViewportTrajectory target;                     // length t
};

class GazePredictor {
 public:
  explicit GazePredictor(const PredictorConfig& cfg, AblationFlags flags = {});

  ViewportTrajectory predict(std::span<const HistoryStep> window,
                             std::span<const Vec3> scene);

  /// Forward + loss + full backward; gradients accumulate into the
  /// parameter store. Returns the loss value.
  double loss_and_grad(const TrainingItem& item);

  double loss_only(const TrainingItem& item);

  std::vector<nn::Param> params();
  void zero_grad();
  std::int64_t parameter_count();
  /// Parameters of the cross-modal machinery (context attention plus all
  /// fusion layers) — exactly what the no_cross_modal ablation removes.
  std::int64_t cross_modal_parameter_count();

  const PredictorConfig& config() const { return cfg_; }
  const AblationFlags& flags() const { return flags_; }

  /// Per-step viewport embeddings of a window (n x d).
  nn::Mat embed_window(std::span<const HistoryStep> window);
  /// Sinusoidal temporal encodings with the learned scale (t x d rows).
  nn::Mat positional_encoding(int horizon) const;

  /// Scene features for a cloud: the configured encoder, or the
  /// raw-statistics stand-in under no_point_encoder.
  SceneEncoderOut encode(std::span<const Vec3> scene);

 private:
  struct ForwardCache;

  ViewportTrajectory forward_impl(std::span<const HistoryStep> window,
                                  std::span<const Vec3> scene,
                                  ForwardCache* cache);
  void backward_impl(const ForwardCache& cache, const nn::Mat& grad_states);

  static nn::Mat sinusoid_table(int horizon, Eigen::Index dim);

  PredictorConfig cfg_;
  AblationFlags flags_;

  nn::Linear viewport_embed_;
  std::optional<SceneEncoder> encoder_;
  nn::Linear lift_point_, lift_stats_;  // no_point_encoder stand-ins
  std::optional<nn::MultiHeadAttention> ctx_attn_;
  std::vector<FusionLayer> fusion_;
  nn::Mat gaze_const_, grad_gaze_const_;  // no_gaze replacement row
  nn::Mat pos_scale_, grad_pos_scale_;
  nn::Linear head_in_, head_out_;
  nn::ReLU head_relu_;
};

struct Metrics {
  double maea_deg = 0;        // mean geodesic angle between directions
  double position_mae_m = 0;  // mean absolute positional error
};

/// Mean absolute error angle between predicted and true viewing
/// directions, plus positional MAE. Symmetric in its arguments.
Metrics evaluate_maea(const ViewportTrajectory& pred,
                      const ViewportTrajectory& truth);

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 1e-2;
  std::uint64_t seed = 1;
  bool cosine_decay = true;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean loss per epoch
};

/// Deterministic single-threaded training loop (Adam, per-item steps,
/// seeded shuffling). Throws on an empty dataset or a non-finite loss.
TrainResult train(GazePredictor& model, std::span<const TrainingItem> items,
                  const TrainConfig& cfg);

ViewportTrajectory persistence_baseline(std::span<const HistoryStep> window,
                                        int horizon);

/// Per-dimension least-squares line over the window, extrapolated.
ViewportTrajectory linear_regression_baseline(
    std::span<const HistoryStep> window, int horizon);

class MlpBaseline {
 public:
  MlpBaseline(int history_len, int horizon, int hidden, std::uint64_t seed);

  ViewportTrajectory predict(std::span<const HistoryStep> window);
  double loss_and_grad(const TrainingItem& item);
  std::vector<nn::Param> params();
  void zero_grad();
  int history_len() const { return history_len_; }
  int horizon() const { return horizon_; }

 private:
  int history_len_, horizon_;
  nn::Linear l1_, l2_;
  nn::ReLU relu_;
  ViewportState last_;
};

/// Sliding windows over a session: (n history, t target) pairs.
std::vector<TrainingItem> make_items(
    const Session& session, std::span<const GlobalGaze> gaze,
    std::shared_ptr<const std::vector<Vec3>> scene, int history_len,
    int horizon, int stride, EulerOrder order = EulerOrder::kRollPitchYaw);

/// Leave-users-out split: whole users are assigned to validation until
/// val_fraction of items is reached.
void split_by_user(std::span<const TrainingItem> items, double val_fraction,
                   std::uint64_t seed, std::vector<TrainingItem>& train_out,
                   std::vector<TrainingItem>& val_out);

struct AblationRow {
  std::string variant;
  double maea_deg = 0;
  double position_mae_m = 0;
  std::int64_t parameters = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;  // full, no_gaze, no_point_encoder, no_cross_modal
  std::int64_t full_parameters = 0;
  std::int64_t cross_modal_parameters = 0;
  bool parameter_audit_ok = false;
};

AblationReport run_ablations(std::span<const TrainingItem> train_items,
                             std::span<const TrainingItem> eval_items,
                             const PredictorConfig& cfg,
                             const TrainConfig& train_cfg);

/// Versioned binary checkpoint (config header + named tensors) plus a
/// text manifest of tensor names, shapes and checksums.
void save_model(GazePredictor& model, const std::string& path);
GazePredictor load_model(const std::string& path);

PredictorConfig predictor_config_from_json_file(const std::string& path);
std::string predictor_config_to_json(const PredictorConfig& cfg);

}  // namespace vvt::predict
