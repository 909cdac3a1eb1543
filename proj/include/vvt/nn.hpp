#pragma once

// Small dense-network toolkit used by the viewport predictor: linear,
// ReLU, layer norm, multi-head attention and Adam, all with explicit
// forward/backward passes so gradients can be checked against finite
// differences. Double precision throughout; single-threaded and
// deterministic under a fixed seed.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vvt/errors.hpp"

namespace vvt::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Named view of one trainable tensor and its gradient accumulator.
struct Param {
  std::string name;
  Mat* value = nullptr;
  Mat* grad = nullptr;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  Mat normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = normal() * stddev;
      }
    }
    return m;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// y = x W^T + b, rows of x are items.
class Linear {
 public:
  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng, std::string name);

  Mat forward(const Mat& x);
  /// Accumulates parameter gradients, returns d loss / d x.
  Mat backward(const Mat& grad_y);

  void collect(std::vector<Param>& out);
  void zero_grad();
  Eigen::Index in_dim() const { return weight_.cols(); }
  Eigen::Index out_dim() const { return weight_.rows(); }

  Mat& weight() { return weight_; }
  Mat& bias() { return bias_; }

 private:
  std::string name_;
  Mat weight_;  // out x in
  Mat bias_;    // out x 1
  Mat grad_weight_, grad_bias_;
  Mat x_cache_;
};

class ReLU {
 public:
  Mat forward(const Mat& x);
  Mat backward(const Mat& grad_y);

 private:
  Mat mask_;
};

/// Per-row layer normalization with learned gain and shift.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(Eigen::Index dim, std::string name);

  Mat forward(const Mat& x);
  Mat backward(const Mat& grad_y);

  void collect(std::vector<Param>& out);
  void zero_grad();

  static constexpr double kEps = 1e-5;

 private:
  std::string name_;
  Mat gain_, shift_;            // dim x 1
  Mat grad_gain_, grad_shift_;
  Mat xhat_cache_;
  Vec inv_std_cache_;
};

/// Row-wise softmax with cached output for the backward pass.
class Softmax {
 public:
  Mat forward(const Mat& scores);
  Mat backward(const Mat& grad_p);

 private:
  Mat p_cache_;
};

/// Multi-head scaled dot-product attention. Queries and key/value inputs
/// may differ (cross attention); all projections map d -> d.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(Eigen::Index dim, int heads, Rng& rng, std::string name);

  /// q: nq x d, kv: nk x d; returns nq x d.
  Mat forward(const Mat& q, const Mat& kv);
  /// Returns {grad_q, grad_kv}.
  std::pair<Mat, Mat> backward(const Mat& grad_out);

  void collect(std::vector<Param>& out);
  void zero_grad();
  int heads() const { return heads_; }

  /// Attention weights of the last forward, one row block per head.
  const std::vector<Mat>& last_weights() const { return p_; }

  Linear& value_projection() { return proj_v_; }
  Linear& output_projection() { return proj_out_; }

 private:
  int heads_ = 1;
  Eigen::Index dim_ = 0;
  Linear proj_q_, proj_k_, proj_v_, proj_out_;
  std::vector<Mat> qh_, kh_, vh_, p_;
  std::vector<Softmax> softmax_;
  Eigen::Index nq_ = 0, nk_ = 0;
};

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Param>& params, double lr_override = -1);

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

std::int64_t param_count(const std::vector<Param>& params);

}  // namespace vvt::nn
