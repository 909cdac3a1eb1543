#include "vvt/predictor.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "vvt/checksum.hpp"
#include "vvt/errors.hpp"

namespace vvt::predict {

void PredictorConfig::validate() const {
  if (history_len < 1) throw UsageError("history_len must be >= 1");
  if (horizon < 1) throw UsageError("horizon must be >= 1");
  if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0) {
    throw UsageError("embed_dim must be a positive multiple of heads");
  }
  if (fusion_layers < 0) throw UsageError("fusion_layers must be >= 0");
  if (head_hidden < 1) throw UsageError("head_hidden must be >= 1");
}

ViewportState viewport_state_of(const TraceSample& s, EulerOrder order) {
  return ViewportState{
      s.headset.position,
      forward_vector(euler_to_matrix(s.headset.orientation, order))};
}

std::vector<int> cone_point_indices(std::span<const Vec3> points,
                                    const GlobalGaze& ray,
                                    double half_angle_deg) {
  std::vector<int> out;
  const double limit = deg_to_rad(half_angle_deg) + kAngularEpsRad;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const Vec3 to = points[static_cast<std::size_t>(i)] - ray.origin;
    if (to.squaredNorm() == 0) continue;
    if (angle_between<double>(to, ray.direction) <= limit) out.push_back(i);
  }
  return out;
}

int select_gaze_point(std::span<const Vec3> points, const GlobalGaze& ray,
                      double half_angle_deg) {
  const double limit = deg_to_rad(half_angle_deg) + kAngularEpsRad;
  int best = -1;
  double best_angle = limit;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const Vec3 to = points[static_cast<std::size_t>(i)] - ray.origin;
    if (to.squaredNorm() == 0) continue;
    const double a = angle_between<double>(to, ray.direction);
    if (a < best_angle || (best < 0 && a <= limit)) {
      best_angle = a;
      best = i;
    }
  }
  return best;
}

GazeGather gather_gaze_features(const nn::Mat& per_point,
                                std::span<const Vec3> points,
                                std::span<const HistoryStep> window,
                                double half_angle_deg) {
  GazeGather g;
  const Eigen::Index n = static_cast<Eigen::Index>(window.size());
  g.per_step = nn::Mat::Zero(n, per_point.cols());
  g.point_index.assign(window.size(), -1);
  g.fallback.assign(window.size(), 0);
  for (Eigen::Index s = 0; s < n; ++s) {
    const HistoryStep& step = window[static_cast<std::size_t>(s)];
    int idx = select_gaze_point(points, step.gaze, half_angle_deg);
    if (idx < 0) {
      const GlobalGaze headset_fwd{step.viewport.position,
                                   step.viewport.forward};
      idx = select_gaze_point(points, headset_fwd, half_angle_deg);
    }
    if (idx >= 0) {
      g.per_step.row(s) = per_point.row(idx);
      g.point_index[static_cast<std::size_t>(s)] = idx;
    } else {
      g.fallback[static_cast<std::size_t>(s)] = 1;
    }
  }
  return g;
}

FusionLayer::FusionLayer(Eigen::Index dim, int heads, nn::Rng& rng,
                         const std::string& name)
    : attn_ms_(dim, heads, rng, name + ".ms"),
      attn_mg_(dim, heads, rng, name + ".mg"),
      attn_gm_(dim, heads, rng, name + ".gm"),
      ln_ms_(dim, name + ".ln_ms"),
      ln_mg_(dim, name + ".ln_mg"),
      ln_gm_(dim, name + ".ln_gm") {}

FusionLayer::Out FusionLayer::forward(const nn::Mat& viewport_seq,
                                      const nn::Mat& context_seq,
                                      const nn::Mat& gaze_seq) {
  Out out;
  const nn::Mat a_ms = attn_ms_.forward(context_seq, viewport_seq);
  out.scene_aware_viewport = ln_ms_.forward(viewport_seq + a_ms);
  const nn::Mat a_mg = attn_mg_.forward(out.scene_aware_viewport, gaze_seq);
  out.viewport = ln_mg_.forward(out.scene_aware_viewport + a_mg);
  const nn::Mat a_gm = attn_gm_.forward(viewport_seq, gaze_seq);
  out.gaze = ln_gm_.forward(gaze_seq + a_gm);
  return out;
}

FusionLayer::Grads FusionLayer::backward(const nn::Mat& grad_viewport_out,
                                         const nn::Mat& grad_gaze_out) {
  Grads g;
  const nn::Mat d_sum_gm = ln_gm_.backward(grad_gaze_out);
  const auto [dq_gm, dkv_gm] = attn_gm_.backward(d_sum_gm);
  g.gaze_seq = d_sum_gm + dkv_gm;
  g.viewport_seq = dq_gm;

  const nn::Mat d_sum_mg = ln_mg_.backward(grad_viewport_out);
  const auto [dq_mg, dkv_mg] = attn_mg_.backward(d_sum_mg);
  g.gaze_seq += dkv_mg;
  const nn::Mat d_fms = d_sum_mg + dq_mg;

  const nn::Mat d_sum_ms = ln_ms_.backward(d_fms);
  const auto [dq_ms, dkv_ms] = attn_ms_.backward(d_sum_ms);
  g.context_seq = dq_ms;
  g.viewport_seq += d_sum_ms + dkv_ms;
  return g;
}

void FusionLayer::collect(std::vector<nn::Param>& out) {
  attn_ms_.collect(out);
  attn_mg_.collect(out);
  attn_gm_.collect(out);
  ln_ms_.collect(out);
  ln_mg_.collect(out);
  ln_gm_.collect(out);
}

void FusionLayer::zero_grad() {
  attn_ms_.zero_grad();
  attn_mg_.zero_grad();
  attn_gm_.zero_grad();
  ln_ms_.zero_grad();
  ln_mg_.zero_grad();
  ln_gm_.zero_grad();
}

struct GazePredictor::ForwardCache {
  std::vector<HistoryStep> window;
  nn::Mat M;
  SceneEncoderOut enc;
  std::vector<int> ctx_indices;
  nn::Mat C;
  GazeGather gaze;
  nn::Mat final_M, final_G;
  nn::Mat Z;
  ViewportState last;
  Eigen::Index scene_size = 0;
};

GazePredictor::GazePredictor(const PredictorConfig& cfg, AblationFlags flags)
    : cfg_(cfg), flags_(flags) {
  cfg_.validate();
  cfg_.encoder.out_dim = cfg_.embed_dim;
  nn::Rng rng(cfg_.seed);
  const Eigen::Index d = cfg_.embed_dim;
  viewport_embed_ = nn::Linear(6, d, rng, "viewport.embed");
  if (flags_.no_point_encoder) {
    lift_point_ = nn::Linear(3, d, rng, "lift.point");
    lift_stats_ = nn::Linear(12, d, rng, "lift.stats");
  } else {
    encoder_.emplace(cfg_.encoder, rng);
  }
  if (!flags_.no_cross_modal) {
    ctx_attn_.emplace(d, cfg_.heads, rng, "ctx");
    fusion_.reserve(static_cast<std::size_t>(cfg_.fusion_layers));
    for (int l = 0; l < cfg_.fusion_layers; ++l) {
      fusion_.emplace_back(d, cfg_.heads, rng,
                           "fusion." + std::to_string(l));
    }
  }
  if (flags_.no_gaze) {
    gaze_const_ = rng.normal_matrix(d, 1, 1.0 / std::sqrt(double(d)));
    grad_gaze_const_ = nn::Mat::Zero(d, 1);
  }
  pos_scale_ = nn::Mat::Ones(d, 1);
  grad_pos_scale_ = nn::Mat::Zero(d, 1);
  head_in_ = nn::Linear(3 * d + d, cfg_.head_hidden, rng, "head.in");
  head_out_ = nn::Linear(cfg_.head_hidden, 6, rng, "head.out");
}

nn::Mat GazePredictor::sinusoid_table(int horizon, Eigen::Index dim) {
  nn::Mat table(horizon, dim);
  for (int j = 0; j < horizon; ++j) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double exponent =
          static_cast<double>(k - (k % 2)) / static_cast<double>(dim);
      const double omega = 1.0 / std::pow(10000.0, exponent);
      const double phase = static_cast<double>(j) * omega;
      table(j, k) = (k % 2 == 0) ? std::sin(phase) : std::cos(phase);
    }
  }
  return table;
}

nn::Mat GazePredictor::positional_encoding(int horizon) const {
  nn::Mat table = sinusoid_table(horizon, cfg_.embed_dim);
  for (Eigen::Index j = 0; j < table.rows(); ++j) {
    table.row(j) = table.row(j).cwiseProduct(pos_scale_.col(0).transpose());
  }
  return table;
}

nn::Mat GazePredictor::embed_window(std::span<const HistoryStep> window) {
  nn::Mat w(static_cast<Eigen::Index>(window.size()), 6);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const HistoryStep& h = window[static_cast<std::size_t>(i)];
    w.row(i) << h.viewport.position.x(), h.viewport.position.y(),
        h.viewport.position.z(), h.viewport.forward.x(),
        h.viewport.forward.y(), h.viewport.forward.z();
  }
  return viewport_embed_.forward(w);
}

SceneEncoderOut GazePredictor::encode(std::span<const Vec3> scene) {
  if (!flags_.no_point_encoder) {
    return encoder_->forward(scene);
  }
  if (scene.empty()) throw DataError("TooFewPoints: empty scene");
  const Eigen::Index p = static_cast<Eigen::Index>(scene.size());
  nn::Mat coords(p, 3);
  for (Eigen::Index i = 0; i < p; ++i) {
    coords.row(i) = scene[static_cast<std::size_t>(i)].transpose();
  }
  SceneEncoderOut out;
  out.per_point = lift_point_.forward(coords);
  nn::Mat stats(1, 12);
  const Eigen::RowVector3d mean = coords.colwise().mean();
  const Eigen::RowVector3d var =
      (coords.rowwise() - mean).array().square().colwise().mean();
  stats << mean, var.array().sqrt().matrix(), coords.colwise().minCoeff(),
      coords.colwise().maxCoeff();
  out.global = lift_stats_.forward(stats).row(0).transpose();
  return out;
}

ViewportTrajectory GazePredictor::forward_impl(
    std::span<const HistoryStep> window, std::span<const Vec3> scene,
    ForwardCache* cache) {
  if (window.empty()) {
    throw DataError("InsufficientHistory: empty viewport window");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(window.size());
  const Eigen::Index d = cfg_.embed_dim;

  const nn::Mat m = embed_window(window);
  const SceneEncoderOut enc = encode(scene);

  std::vector<int> ctx_indices;
  nn::Mat context = nn::Mat::Zero(n, d);
  if (!flags_.no_cross_modal) {
    const HistoryStep& last_step = window.back();
    const GlobalGaze view_ray{last_step.viewport.position,
                              last_step.viewport.forward};
    ctx_indices = cone_point_indices(scene, view_ray, cfg_.half_angle_deg);
    if (ctx_indices.empty()) {
      ctx_indices.resize(scene.size());
      std::iota(ctx_indices.begin(), ctx_indices.end(), 0);
    }
    nn::Mat keys(static_cast<Eigen::Index>(ctx_indices.size()), d);
    for (Eigen::Index r = 0; r < keys.rows(); ++r) {
      keys.row(r) = enc.per_point.row(ctx_indices[static_cast<std::size_t>(r)]);
    }
    context = ctx_attn_->forward(m, keys);
  }

  GazeGather gaze;
  if (flags_.no_gaze) {
    gaze.per_step = gaze_const_.col(0).transpose().replicate(n, 1);
    gaze.point_index.assign(window.size(), -1);
    gaze.fallback.assign(window.size(), 0);
  } else {
    gaze = gather_gaze_features(enc.per_point, scene, window,
                                cfg_.half_angle_deg);
  }

  nn::Mat viewport_seq = m;
  nn::Mat gaze_seq = gaze.per_step;
  for (FusionLayer& layer : fusion_) {
    FusionLayer::Out out = layer.forward(viewport_seq, context, gaze_seq);
    viewport_seq = std::move(out.viewport);
    gaze_seq = std::move(out.gaze);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  nn::Mat u(1, 3 * d);
  u.middleCols(0, d) = gaze_seq.colwise().sum() * inv_n;
  u.middleCols(d, d) = viewport_seq.colwise().sum() * inv_n;
  u.middleCols(2 * d, d) = enc.global.transpose();

  const nn::Mat table = sinusoid_table(cfg_.horizon, d);
  nn::Mat z(cfg_.horizon, 3 * d + d);
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    z.row(j).head(3 * d) = u.row(0);
    z.row(j).tail(d) =
        table.row(j).cwiseProduct(pos_scale_.col(0).transpose());
  }
  const nn::Mat deltas =
      head_out_.forward(head_relu_.forward(head_in_.forward(z)));

  const ViewportState& last = window.back().viewport;
  ViewportTrajectory traj(static_cast<std::size_t>(cfg_.horizon));
  for (Eigen::Index j = 0; j < deltas.rows(); ++j) {
    ViewportState& st = traj[static_cast<std::size_t>(j)];
    st.position = last.position + Vec3(deltas(j, 0), deltas(j, 1), deltas(j, 2));
    st.forward = last.forward + Vec3(deltas(j, 3), deltas(j, 4), deltas(j, 5));
  }

  if (cache) {
    cache->window.assign(window.begin(), window.end());
    cache->M = m;
    cache->enc = enc;
    cache->ctx_indices = std::move(ctx_indices);
    cache->C = context;
    cache->gaze = std::move(gaze);
    cache->final_M = viewport_seq;
    cache->final_G = gaze_seq;
    cache->Z = z;
    cache->last = last;
    cache->scene_size = static_cast<Eigen::Index>(scene.size());
  }
  return traj;
}

ViewportTrajectory GazePredictor::predict(std::span<const HistoryStep> window,
                                          std::span<const Vec3> scene) {
  return forward_impl(window, scene, nullptr);
}

void GazePredictor::backward_impl(const ForwardCache& cache,
                                  const nn::Mat& grad_states) {
  const Eigen::Index n = cache.M.rows();
  const Eigen::Index d = cfg_.embed_dim;

  const nn::Mat grad_z = head_in_.backward(
      head_relu_.backward(head_out_.backward(grad_states)));

  nn::Mat grad_u = nn::Mat::Zero(1, 3 * d);
  const nn::Mat table = sinusoid_table(cfg_.horizon, d);
  for (Eigen::Index j = 0; j < grad_z.rows(); ++j) {
    grad_u.row(0) += grad_z.row(j).head(3 * d);
    grad_pos_scale_.col(0) +=
        grad_z.row(j).tail(d).cwiseProduct(table.row(j)).transpose();
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const nn::Mat grad_final_G =
      (grad_u.middleCols(0, d) * inv_n).replicate(n, 1);
  const nn::Mat grad_final_M =
      (grad_u.middleCols(d, d) * inv_n).replicate(n, 1);
  const nn::Vec grad_global = grad_u.middleCols(2 * d, d).row(0).transpose();

  nn::Mat grad_fp =
      nn::Mat::Zero(cache.enc.per_point.rows(), cache.enc.per_point.cols());

  nn::Mat grad_m;
  nn::Mat grad_g;
  if (!flags_.no_cross_modal) {
    nn::Mat grad_viewport = grad_final_M;
    nn::Mat grad_gaze = grad_final_G;
    nn::Mat grad_context = nn::Mat::Zero(n, d);
    for (auto it = fusion_.rbegin(); it != fusion_.rend(); ++it) {
      FusionLayer::Grads grads = it->backward(grad_viewport, grad_gaze);
      grad_viewport = std::move(grads.viewport_seq);
      grad_gaze = std::move(grads.gaze_seq);
      grad_context += grads.context_seq;
    }
    const auto [grad_ctx_q, grad_keys] = ctx_attn_->backward(grad_context);
    grad_m = grad_viewport + grad_ctx_q;
    grad_g = grad_gaze;
    for (Eigen::Index r = 0;
         r < static_cast<Eigen::Index>(cache.ctx_indices.size()); ++r) {
      grad_fp.row(cache.ctx_indices[static_cast<std::size_t>(r)]) +=
          grad_keys.row(r);
    }
  } else {
    grad_m = grad_final_M;
    grad_g = grad_final_G;
  }

  if (flags_.no_gaze) {
    grad_gaze_const_.col(0) += grad_g.colwise().sum().transpose();
  } else {
    for (Eigen::Index s = 0; s < n; ++s) {
      const int idx = cache.gaze.point_index[static_cast<std::size_t>(s)];
      if (idx >= 0) grad_fp.row(idx) += grad_g.row(s);
    }
  }

  viewport_embed_.backward(grad_m);

  if (!flags_.no_point_encoder) {
    encoder_->backward(grad_fp, grad_global);
  } else {
    lift_point_.backward(grad_fp);
    lift_stats_.backward(grad_global.transpose());
  }
}

double GazePredictor::loss_and_grad(const TrainingItem& item) {
  if (!item.scene) throw DataError("training item has no scene cloud");
  if (static_cast<int>(item.target.size()) != cfg_.horizon) {
    throw DataError("LengthMismatch: target length differs from horizon");
  }
  ForwardCache cache;
  const ViewportTrajectory pred =
      forward_impl(item.window, *item.scene, &cache);

  const double t = static_cast<double>(cfg_.horizon);
  const double w_ang = cfg_.orientation_loss_weight;
  double loss = 0;
  nn::Mat grad_states = nn::Mat::Zero(cfg_.horizon, 6);
  for (int j = 0; j < cfg_.horizon; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const Vec3 dp = pred[ju].position - item.target[ju].position;
    loss += dp.cwiseAbs().sum() / (3.0 * t);
    for (int c = 0; c < 3; ++c) {
      grad_states(j, c) = (dp[c] > 0 ? 1.0 : (dp[c] < 0 ? -1.0 : 0.0)) /
                          (3.0 * t);
    }

    const Vec3& a = pred[ju].forward;
    const Vec3& b = item.target[ju].forward;
    const Vec3 cross = a.cross(b);
    const double s = cross.norm();
    const double c = a.dot(b);
    const double angle_deg = rad_to_deg(std::atan2(s, c));
    loss += w_ang * angle_deg / t;
    if (s > 1e-12) {
      const double denom = s * s + c * c;
      const Vec3 ds_da = b.cross(cross) / s;
      const Vec3 grad_a =
          (w_ang / t) * rad_to_deg(1.0) * ((c / denom) * ds_da -
                                           (s / denom) * b);
      grad_states(j, 3) = grad_a.x();
      grad_states(j, 4) = grad_a.y();
      grad_states(j, 5) = grad_a.z();
    }
  }
  backward_impl(cache, grad_states);
  return loss;
}

double GazePredictor::loss_only(const TrainingItem& item) {
  if (!item.scene) throw DataError("training item has no scene cloud");
  const ViewportTrajectory pred = predict(item.window, *item.scene);
  const double t = static_cast<double>(pred.size());
  const double w_ang = cfg_.orientation_loss_weight;
  double loss = 0;
  for (std::size_t j = 0; j < pred.size() && j < item.target.size(); ++j) {
    loss += (pred[j].position - item.target[j].position).cwiseAbs().sum() /
            (3.0 * t);
    loss += w_ang *
            direction_angle_deg<double>(pred[j].forward,
                                        item.target[j].forward) /
            t;
  }
  return loss;
}

std::vector<nn::Param> GazePredictor::params() {
  std::vector<nn::Param> out;
  viewport_embed_.collect(out);
  if (encoder_) {
    encoder_->collect(out);
  } else {
    lift_point_.collect(out);
    lift_stats_.collect(out);
  }
  if (ctx_attn_) ctx_attn_->collect(out);
  for (FusionLayer& f : fusion_) f.collect(out);
  if (flags_.no_gaze) {
    out.push_back({"gaze.const", &gaze_const_, &grad_gaze_const_});
  }
  out.push_back({"head.pos_scale", &pos_scale_, &grad_pos_scale_});
  head_in_.collect(out);
  head_out_.collect(out);
  return out;
}

void GazePredictor::zero_grad() {
  viewport_embed_.zero_grad();
  if (encoder_) {
    encoder_->zero_grad();
  } else {
    lift_point_.zero_grad();
    lift_stats_.zero_grad();
  }
  if (ctx_attn_) ctx_attn_->zero_grad();
  for (FusionLayer& f : fusion_) f.zero_grad();
  grad_gaze_const_.setZero();
  grad_pos_scale_.setZero();
  head_in_.zero_grad();
  head_out_.zero_grad();
}

std::int64_t GazePredictor::parameter_count() {
  return nn::param_count(params());
}

std::int64_t GazePredictor::cross_modal_parameter_count() {
  std::int64_t n = 0;
  for (const nn::Param& p : params()) {
    if (p.name.rfind("ctx.", 0) == 0 || p.name.rfind("fusion.", 0) == 0) {
      n += p.value->size();
    }
  }
  return n;
}

Metrics evaluate_maea(const ViewportTrajectory& pred,
                      const ViewportTrajectory& truth) {
  if (pred.size() != truth.size()) {
    throw DataError("LengthMismatch: trajectories differ in length");
  }
  if (pred.empty()) throw DataError("LengthMismatch: empty trajectories");
  Metrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    m.maea_deg += direction_angle_deg<double>(pred[i].forward, truth[i].forward);
    m.position_mae_m +=
        (pred[i].position - truth[i].position).cwiseAbs().sum() / 3.0;
  }
  m.maea_deg /= static_cast<double>(pred.size());
  m.position_mae_m /= static_cast<double>(pred.size());
  return m;
}

TrainResult train(GazePredictor& model, std::span<const TrainingItem> items,
                  const TrainConfig& cfg) {
  if (items.empty()) throw DataError("EmptyDataset: nothing to train on");
  nn::Rng rng(cfg.seed);
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.learning_rate;
  nn::Adam adam(adam_cfg);
  const std::vector<nn::Param> params = model.params();

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(cfg.epochs));
  const double total_steps =
      std::max(1.0, static_cast<double>(cfg.epochs) *
                        static_cast<double>(items.size()));
  double step = 0;
  std::vector<double> item_loss(items.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      model.zero_grad();
      const double loss = model.loss_and_grad(items[i]);
      if (!std::isfinite(loss)) {
        throw NumericError("NonFiniteLoss at epoch " + std::to_string(epoch) +
                           ", item " + std::to_string(i));
      }
      item_loss[i] = loss;
      double lr = cfg.learning_rate;
      if (cfg.cosine_decay) {
        lr *= 0.5 * (1.0 + std::cos(kPi * step / total_steps));
      }
      adam.step(params, lr);
      step += 1.0;
    }
    // summed in item order, so the mean does not depend on the shuffle
    double epoch_loss = 0;
    for (double l : item_loss) epoch_loss += l;
    result.loss_curve.push_back(epoch_loss /
                                static_cast<double>(items.size()));
  }
  return result;
}

ViewportTrajectory persistence_baseline(std::span<const HistoryStep> window,
                                        int horizon) {
  if (window.empty()) {
    throw DataError("InsufficientHistory: persistence needs 1 sample");
  }
  return ViewportTrajectory(static_cast<std::size_t>(horizon),
                            window.back().viewport);
}

ViewportTrajectory linear_regression_baseline(
    std::span<const HistoryStep> window, int horizon) {
  const std::size_t n = window.size();
  if (n < 2) {
    throw DataError("InsufficientHistory: linear regression needs 2 samples");
  }
  // least squares y = a + b*x over x = 0..n-1, per dimension
  const double nn_ = static_cast<double>(n);
  const double sx = nn_ * (nn_ - 1.0) / 2.0;
  const double sxx = (nn_ - 1.0) * nn_ * (2.0 * nn_ - 1.0) / 6.0;
  const double denom = nn_ * sxx - sx * sx;

  Eigen::Matrix<double, 6, 1> sy = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> sxy = Eigen::Matrix<double, 6, 1>::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Matrix<double, 6, 1> y;
    y << window[i].viewport.position, window[i].viewport.forward;
    sy += y;
    sxy += static_cast<double>(i) * y;
  }
  const Eigen::Matrix<double, 6, 1> slope = (nn_ * sxy - sx * sy) / denom;
  const Eigen::Matrix<double, 6, 1> intercept = (sy - slope * sx) / nn_;

  ViewportTrajectory out(static_cast<std::size_t>(horizon));
  for (int j = 0; j < horizon; ++j) {
    const double x = static_cast<double>(n) + static_cast<double>(j);
    const Eigen::Matrix<double, 6, 1> y = intercept + slope * x;
    out[static_cast<std::size_t>(j)].position = y.head<3>();
    out[static_cast<std::size_t>(j)].forward = y.tail<3>();
  }
  return out;
}

MlpBaseline::MlpBaseline(int history_len, int horizon, int hidden,
                         std::uint64_t seed)
    : history_len_(history_len), horizon_(horizon) {
  nn::Rng rng(seed);
  l1_ = nn::Linear(6 * history_len, hidden, rng, "mlp.l1");
  l2_ = nn::Linear(hidden, 6 * horizon, rng, "mlp.l2");
}

ViewportTrajectory MlpBaseline::predict(std::span<const HistoryStep> window) {
  if (static_cast<int>(window.size()) != history_len_) {
    throw DataError("InsufficientHistory: MLP window must have " +
                    std::to_string(history_len_) + " samples");
  }
  nn::Mat z(1, 6 * history_len_);
  for (int i = 0; i < history_len_; ++i) {
    const HistoryStep& h = window[static_cast<std::size_t>(i)];
    z.block(0, 6 * i, 1, 3) = h.viewport.position.transpose();
    z.block(0, 6 * i + 3, 1, 3) = h.viewport.forward.transpose();
  }
  const nn::Mat deltas = l2_.forward(relu_.forward(l1_.forward(z)));
  last_ = window.back().viewport;
  ViewportTrajectory out(static_cast<std::size_t>(horizon_));
  for (int j = 0; j < horizon_; ++j) {
    out[static_cast<std::size_t>(j)].position =
        last_.position + deltas.block(0, 6 * j, 1, 3).transpose();
    out[static_cast<std::size_t>(j)].forward =
        last_.forward + deltas.block(0, 6 * j + 3, 1, 3).transpose();
  }
  return out;
}

double MlpBaseline::loss_and_grad(const TrainingItem& item) {
  const ViewportTrajectory pred = predict(item.window);
  if (static_cast<int>(item.target.size()) != horizon_) {
    throw DataError("LengthMismatch: target length differs from horizon");
  }
  const double t = static_cast<double>(horizon_);
  double loss = 0;
  nn::Mat grad(1, 6 * horizon_);
  grad.setZero();
  for (int j = 0; j < horizon_; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const Vec3 dp = pred[ju].position - item.target[ju].position;
    loss += dp.cwiseAbs().sum() / (3.0 * t);
    for (int c = 0; c < 3; ++c) {
      grad(0, 6 * j + c) =
          (dp[c] > 0 ? 1.0 : (dp[c] < 0 ? -1.0 : 0.0)) / (3.0 * t);
    }
    const Vec3 df = pred[ju].forward - item.target[ju].forward;
    loss += df.cwiseAbs().sum() / (3.0 * t);
    for (int c = 0; c < 3; ++c) {
      grad(0, 6 * j + 3 + c) =
          (df[c] > 0 ? 1.0 : (df[c] < 0 ? -1.0 : 0.0)) / (3.0 * t);
    }
  }
  l1_.backward(relu_.backward(l2_.backward(grad)));
  return loss;
}

std::vector<nn::Param> MlpBaseline::params() {
  std::vector<nn::Param> out;
  l1_.collect(out);
  l2_.collect(out);
  return out;
}

void MlpBaseline::zero_grad() {
  l1_.zero_grad();
  l2_.zero_grad();
}

std::vector<TrainingItem> make_items(
    const Session& session, std::span<const GlobalGaze> gaze,
    std::shared_ptr<const std::vector<Vec3>> scene, int history_len,
    int horizon, int stride, EulerOrder order) {
  if (gaze.size() != session.samples.size()) {
    throw DataError("MisalignedInputs: gaze list must be 1:1 with samples");
  }
  if (stride < 1) throw UsageError("stride must be >= 1");
  std::vector<TrainingItem> items;
  const std::size_t need = static_cast<std::size_t>(history_len + horizon);
  if (session.samples.size() < need) return items;
  for (std::size_t start = 0; start + need <= session.samples.size();
       start += static_cast<std::size_t>(stride)) {
    TrainingItem item;
    item.user_id = session.user_id;
    item.video_id = session.video_id;
    item.scene = scene;
    item.window.reserve(static_cast<std::size_t>(history_len));
    for (int i = 0; i < history_len; ++i) {
      const std::size_t at = start + static_cast<std::size_t>(i);
      item.window.push_back(HistoryStep{
          viewport_state_of(session.samples[at], order), gaze[at]});
    }
    item.target.reserve(static_cast<std::size_t>(horizon));
    for (int j = 0; j < horizon; ++j) {
      const std::size_t at =
          start + static_cast<std::size_t>(history_len) +
          static_cast<std::size_t>(j);
      item.target.push_back(viewport_state_of(session.samples[at], order));
    }
    items.push_back(std::move(item));
  }
  return items;
}

void split_by_user(std::span<const TrainingItem> items, double val_fraction,
                   std::uint64_t seed, std::vector<TrainingItem>& train_out,
                   std::vector<TrainingItem>& val_out) {
  train_out.clear();
  val_out.clear();
  std::vector<std::string> users;
  for (const TrainingItem& item : items) {
    if (std::find(users.begin(), users.end(), item.user_id) == users.end()) {
      users.push_back(item.user_id);
    }
  }
  nn::Rng rng(seed);
  rng.shuffle(users);
  std::set<std::string> val_users;
  const auto target =
      static_cast<std::size_t>(val_fraction * static_cast<double>(items.size()));
  std::size_t val_count = 0;
  for (const std::string& u : users) {
    if (val_count >= target || val_users.size() + 1 >= users.size()) break;
    val_users.insert(u);
    for (const TrainingItem& item : items) {
      if (item.user_id == u) ++val_count;
    }
  }
  for (const TrainingItem& item : items) {
    if (val_users.count(item.user_id)) {
      val_out.push_back(item);
    } else {
      train_out.push_back(item);
    }
  }
}

AblationReport run_ablations(std::span<const TrainingItem> train_items,
                             std::span<const TrainingItem> eval_items,
                             const PredictorConfig& cfg,
                             const TrainConfig& train_cfg) {
  AblationReport report;
  const std::vector<std::pair<std::string, AblationFlags>> variants = {
      {"full", {}},
      {"no_gaze", {.no_gaze = true}},
      {"no_point_encoder", {.no_point_encoder = true}},
      {"no_cross_modal", {.no_cross_modal = true}},
  };

  std::int64_t no_cm_params = 0, no_gaze_params = 0, no_pe_params = 0;
  std::int64_t enc_params = 0, lift_params = 0;
  for (const auto& [name, flags] : variants) {
    GazePredictor model(cfg, flags);
    train(model, train_items, train_cfg);
    double maea = 0, pos = 0;
    for (const TrainingItem& item : eval_items) {
      const ViewportTrajectory pred = model.predict(item.window, *item.scene);
      const Metrics m = evaluate_maea(pred, item.target);
      maea += m.maea_deg;
      pos += m.position_mae_m;
    }
    const double count = std::max<std::size_t>(1, eval_items.size());
    AblationRow row;
    row.variant = name;
    row.maea_deg = maea / count;
    row.position_mae_m = pos / count;
    row.parameters = model.parameter_count();
    report.rows.push_back(row);

    if (name == "full") {
      report.full_parameters = row.parameters;
      report.cross_modal_parameters = model.cross_modal_parameter_count();
      for (const nn::Param& p : model.params()) {
        if (p.name.rfind("enc.", 0) == 0) enc_params += p.value->size();
      }
    }
    if (name == "no_cross_modal") no_cm_params = row.parameters;
    if (name == "no_gaze") no_gaze_params = row.parameters;
    if (name == "no_point_encoder") {
      no_pe_params = row.parameters;
      for (const nn::Param& p : model.params()) {
        if (p.name.rfind("lift.", 0) == 0) lift_params += p.value->size();
      }
    }
  }

  const bool cm_ok = report.full_parameters - no_cm_params ==
                     report.cross_modal_parameters;
  const bool gaze_ok =
      no_gaze_params - report.full_parameters == cfg.embed_dim;
  const bool pe_ok =
      report.full_parameters - no_pe_params == enc_params - lift_params;
  report.parameter_audit_ok = cm_ok && gaze_ok && pe_ok;
  return report;
}

namespace {

nlohmann::json config_to_json(const PredictorConfig& cfg) {
  nlohmann::json j;
  j["history_len"] = cfg.history_len;
  j["horizon"] = cfg.horizon;
  j["embed_dim"] = cfg.embed_dim;
  j["heads"] = cfg.heads;
  j["fusion_layers"] = cfg.fusion_layers;
  j["scene_points"] = cfg.scene_points;
  j["half_angle_deg"] = cfg.half_angle_deg;
  j["head_hidden"] = cfg.head_hidden;
  j["orientation_loss_weight"] = cfg.orientation_loss_weight;
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["encoder"] = {{"hidden", cfg.encoder.hidden},
                  {"level1_centroids", cfg.encoder.level1_centroids},
                  {"level2_centroids", cfg.encoder.level2_centroids},
                  {"radius1", cfg.encoder.radius1},
                  {"radius2", cfg.encoder.radius2},
                  {"max_group", cfg.encoder.max_group},
                  {"min_points", cfg.encoder.min_points}};
  return j;
}

PredictorConfig config_from_json(const nlohmann::json& j) {
  PredictorConfig cfg;
  cfg.history_len = j.value("history_len", cfg.history_len);
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.fusion_layers = j.value("fusion_layers", cfg.fusion_layers);
  cfg.scene_points = j.value("scene_points", cfg.scene_points);
  cfg.half_angle_deg = j.value("half_angle_deg", cfg.half_angle_deg);
  cfg.head_hidden = j.value("head_hidden", cfg.head_hidden);
  cfg.orientation_loss_weight =
      j.value("orientation_loss_weight", cfg.orientation_loss_weight);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("encoder")) {
    const nlohmann::json& e = j["encoder"];
    cfg.encoder.hidden = e.value("hidden", cfg.encoder.hidden);
    cfg.encoder.level1_centroids =
        e.value("level1_centroids", cfg.encoder.level1_centroids);
    cfg.encoder.level2_centroids =
        e.value("level2_centroids", cfg.encoder.level2_centroids);
    cfg.encoder.radius1 = e.value("radius1", cfg.encoder.radius1);
    cfg.encoder.radius2 = e.value("radius2", cfg.encoder.radius2);
    cfg.encoder.max_group = e.value("max_group", cfg.encoder.max_group);
    cfg.encoder.min_points = e.value("min_points", cfg.encoder.min_points);
  }
  cfg.encoder.out_dim = cfg.embed_dim;
  return cfg;
}

constexpr char kModelMagic[4] = {'V', 'V', 'T', 'M'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

std::string predictor_config_to_json(const PredictorConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

PredictorConfig predictor_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictor config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("predictor config parse error: " + std::string(e.what()));
  }
  return config_from_json(j);
}

void save_model(GazePredictor& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open model output: " + path);

  nlohmann::json header = config_to_json(model.config());
  header["flags"] = {{"no_gaze", model.flags().no_gaze},
                     {"no_point_encoder", model.flags().no_point_encoder},
                     {"no_cross_modal", model.flags().no_cross_modal}};
  const std::string header_str = header.dump();

  out.write(kModelMagic, 4);
  auto write_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  write_u32(kModelVersion);
  write_u32(static_cast<std::uint32_t>(header_str.size()));
  out.write(header_str.data(),
            static_cast<std::streamsize>(header_str.size()));

  const std::vector<nn::Param> params = model.params();
  write_u32(static_cast<std::uint32_t>(params.size()));

  std::ofstream manifest(path + ".manifest.txt", std::ios::binary);
  if (!manifest) throw DataError("cannot open model manifest output");
  for (const nn::Param& p : params) {
    write_u32(static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(static_cast<std::uint32_t>(p.value->rows()));
    write_u32(static_cast<std::uint32_t>(p.value->cols()));
    const auto bytes = static_cast<std::size_t>(p.value->size()) *
                       sizeof(double);
    out.write(reinterpret_cast<const char*>(p.value->data()),
              static_cast<std::streamsize>(bytes));
    manifest << p.name << ' ' << p.value->rows() << 'x' << p.value->cols()
             << ' ' << to_hex(fnv1a64(p.value->data(), bytes)) << '\n';
  }
}

GazePredictor load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw DataError("not a model checkpoint: " + path);
  }
  auto read_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw DataError("truncated model checkpoint: " + path);
    return v;
  };
  const std::uint32_t version = read_u32();
  if (version != kModelVersion) {
    throw DataError("unsupported model version " + std::to_string(version));
  }
  const std::uint32_t header_len = read_u32();
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw DataError("truncated model checkpoint: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model header parse error: " + std::string(e.what()));
  }
  AblationFlags flags;
  if (header.contains("flags")) {
    flags.no_gaze = header["flags"].value("no_gaze", false);
    flags.no_point_encoder = header["flags"].value("no_point_encoder", false);
    flags.no_cross_modal = header["flags"].value("no_cross_modal", false);
  }
  GazePredictor model(config_from_json(header), flags);

  const std::uint32_t count = read_u32();
  std::vector<nn::Param> params = model.params();
  if (count != params.size()) {
    throw DataError("model checkpoint tensor count mismatch");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32();
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = read_u32();
    const std::uint32_t cols = read_u32();
    if (name != params[i].name ||
        rows != static_cast<std::uint32_t>(params[i].value->rows()) ||
        cols != static_cast<std::uint32_t>(params[i].value->cols())) {
      throw DataError("model checkpoint tensor mismatch at '" + name + "'");
    }
    in.read(reinterpret_cast<char*>(params[i].value->data()),
            static_cast<std::streamsize>(params[i].value->size() *
                                         sizeof(double)));
    if (!in) throw DataError("truncated model checkpoint: " + path);
  }
  return model;
}

}  // namespace vvt::predict
