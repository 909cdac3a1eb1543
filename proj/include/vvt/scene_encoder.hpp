#pragma once

// Point-cloud feature encoder: a two-level set-abstraction hierarchy
// (farthest-point sampling, radius grouping, shared pointwise MLPs,
// max-pooling) producing a permutation-equivariant per-point feature map
// and a permutation-invariant global descriptor. The global descriptor is
// a linear transform of the columnwise max over per-point features.

#include <span>
#include <vector>

#include "vvt/geometry.hpp"
#include "vvt/nn.hpp"

namespace vvt::predict {

/// Deterministic farthest-point sampling: starts at the lexicographically
/// smallest point, ties broken toward lexicographically smaller
/// coordinates, so the selected coordinate set is independent of input
/// order.
std::vector<int> farthest_point_indices(std::span<const Vec3> points,
                                        int count);

struct SceneEncoderConfig {
  int out_dim = 64;       // feature dimension d
  int hidden = 32;        // per-level MLP width
  int level1_centroids = 64;
  int level2_centroids = 16;
  double radius1 = 0.5;   // meters
  double radius2 = 1.0;
  int max_group = 16;     // neighbor cap per centroid
  int min_points = 1;
};

struct SceneEncoderOut {
  nn::Mat per_point;  // P x d
  nn::Vec global;     // d
};

class SceneEncoder {
 public:
  SceneEncoder(const SceneEncoderConfig& cfg, nn::Rng& rng);

  SceneEncoderOut forward(std::span<const Vec3> points);
  /// Routes gradients back through pooling and the shared MLPs; gradients
  /// with respect to point coordinates are not propagated.
  void backward(const nn::Mat& grad_per_point, const nn::Vec& grad_global);

  void collect(std::vector<nn::Param>& out);
  void zero_grad();

  const SceneEncoderConfig& config() const { return cfg_; }

 private:
  struct Pooled {
    nn::Mat features;                    // groups x width
    std::vector<std::vector<int>> argmax;  // per group, per column: row in
                                           // the stacked input matrix
  };

  Pooled pool_groups(const nn::Mat& rows,
                     const std::vector<std::vector<int>>& groups,
                     const std::vector<int>& row_offset) const;

  SceneEncoderConfig cfg_;
  nn::Linear mlp1_a_, mlp1_b_;
  nn::Linear mlp2_a_, mlp2_b_;
  nn::Linear point_a_, point_b_;
  nn::Linear global_;
  nn::ReLU relu1_, relu2_, relu3_;

  // forward caches
  std::vector<int> order_;  // order_[k] = input index of the k-th sorted point
  std::vector<std::vector<int>> groups1_, groups2_;
  std::vector<int> offsets1_, offsets2_;
  std::vector<int> nearest1_, nearest2_;
  Pooled pooled1_, pooled2_;
  std::vector<int> global_argmax_;
  Eigen::Index n_points_ = 0;
  Eigen::Index rows1_count_ = 0, rows2_count_ = 0;
};

}  // namespace vvt::predict
