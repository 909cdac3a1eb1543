#include "vvt/nn.hpp"

#include <cmath>

namespace vvt::nn {

Linear::Linear(Eigen::Index in, Eigen::Index out, Rng& rng, std::string name)
    : name_(std::move(name)),
      weight_(rng.normal_matrix(out, in, 1.0 / std::sqrt(double(in)))),
      bias_(Mat::Zero(out, 1)),
      grad_weight_(Mat::Zero(out, in)),
      grad_bias_(Mat::Zero(out, 1)) {}

Mat Linear::forward(const Mat& x) {
  x_cache_ = x;
  // row-by-row so a row's output is bit-identical for any batch size
  Mat y(x.rows(), weight_.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    y.row(r) =
        (weight_ * x.row(r).transpose() + bias_.col(0)).transpose();
  }
  return y;
}

Mat Linear::backward(const Mat& grad_y) {
  grad_weight_ += grad_y.transpose() * x_cache_;
  grad_bias_.col(0) += grad_y.colwise().sum().transpose();
  return grad_y * weight_;
}

void Linear::collect(std::vector<Param>& out) {
  out.push_back({name_ + ".weight", &weight_, &grad_weight_});
  out.push_back({name_ + ".bias", &bias_, &grad_bias_});
}

void Linear::zero_grad() {
  grad_weight_.setZero();
  grad_bias_.setZero();
}

Mat ReLU::forward(const Mat& x) {
  mask_ = (x.array() > 0.0).cast<double>();
  return x.cwiseProduct(mask_);
}

Mat ReLU::backward(const Mat& grad_y) { return grad_y.cwiseProduct(mask_); }

LayerNorm::LayerNorm(Eigen::Index dim, std::string name)
    : name_(std::move(name)),
      gain_(Mat::Ones(dim, 1)),
      shift_(Mat::Zero(dim, 1)),
      grad_gain_(Mat::Zero(dim, 1)),
      grad_shift_(Mat::Zero(dim, 1)) {}

Mat LayerNorm::forward(const Mat& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  xhat_cache_.resize(n, d);
  inv_std_cache_.resize(n);
  Mat y(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + kEps);
    inv_std_cache_(r) = inv_std;
    xhat_cache_.row(r) = (x.row(r).array() - mu) * inv_std;
    y.row(r) = xhat_cache_.row(r).cwiseProduct(gain_.col(0).transpose()) +
               shift_.col(0).transpose();
  }
  return y;
}

Mat LayerNorm::backward(const Mat& grad_y) {
  const Eigen::Index n = grad_y.rows(), d = grad_y.cols();
  Mat grad_x(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::RowVectorXd gy = grad_y.row(r);
    const Eigen::RowVectorXd xhat = xhat_cache_.row(r);
    const Eigen::RowVectorXd g_xhat = gy.cwiseProduct(gain_.col(0).transpose());
    const double mean_g = g_xhat.mean();
    const double mean_gx = g_xhat.cwiseProduct(xhat).mean();
    grad_x.row(r) =
        inv_std_cache_(r) *
        (g_xhat.array() - mean_g - xhat.array() * mean_gx).matrix();
    grad_gain_.col(0) += gy.cwiseProduct(xhat).transpose();
    grad_shift_.col(0) += gy.transpose();
  }
  return grad_x;
}

void LayerNorm::collect(std::vector<Param>& out) {
  out.push_back({name_ + ".gain", &gain_, &grad_gain_});
  out.push_back({name_ + ".shift", &shift_, &grad_shift_});
}

void LayerNorm::zero_grad() {
  grad_gain_.setZero();
  grad_shift_.setZero();
}

Mat Softmax::forward(const Mat& scores) {
  Mat p(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    const Eigen::ArrayXd e = (scores.row(r).array() - m).exp();
    p.row(r) = (e / e.sum()).matrix();
  }
  p_cache_ = p;
  return p;
}

Mat Softmax::backward(const Mat& grad_p) {
  Mat grad_s(grad_p.rows(), grad_p.cols());
  for (Eigen::Index r = 0; r < grad_p.rows(); ++r) {
    const double dot = grad_p.row(r).dot(p_cache_.row(r));
    grad_s.row(r) = p_cache_.row(r).cwiseProduct(
        (grad_p.row(r).array() - dot).matrix());
  }
  return grad_s;
}

MultiHeadAttention::MultiHeadAttention(Eigen::Index dim, int heads, Rng& rng,
                                       std::string name)
    : heads_(heads), dim_(dim) {
  if (dim % heads != 0) {
    throw UsageError("attention dim must be divisible by the head count");
  }
  proj_q_ = Linear(dim, dim, rng, name + ".q");
  proj_k_ = Linear(dim, dim, rng, name + ".k");
  proj_v_ = Linear(dim, dim, rng, name + ".v");
  proj_out_ = Linear(dim, dim, rng, name + ".out");
}

Mat MultiHeadAttention::forward(const Mat& q, const Mat& kv) {
  nq_ = q.rows();
  nk_ = kv.rows();
  const Eigen::Index dh = dim_ / heads_;
  const Mat qp = proj_q_.forward(q);
  const Mat kp = proj_k_.forward(kv);
  const Mat vp = proj_v_.forward(kv);
  qh_.assign(heads_, Mat());
  kh_.assign(heads_, Mat());
  vh_.assign(heads_, Mat());
  p_.assign(heads_, Mat());
  softmax_.assign(heads_, Softmax());
  Mat concat(nq_, dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads_; ++h) {
    qh_[h] = qp.middleCols(h * dh, dh);
    kh_[h] = kp.middleCols(h * dh, dh);
    vh_[h] = vp.middleCols(h * dh, dh);
    const Mat scores = scale * (qh_[h] * kh_[h].transpose());
    p_[h] = softmax_[h].forward(scores);
    concat.middleCols(h * dh, dh) = p_[h] * vh_[h];
  }
  return proj_out_.forward(concat);
}

std::pair<Mat, Mat> MultiHeadAttention::backward(const Mat& grad_out) {
  const Eigen::Index dh = dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat grad_concat = proj_out_.backward(grad_out);
  Mat grad_qp(nq_, dim_), grad_kp(nk_, dim_), grad_vp(nk_, dim_);
  for (int h = 0; h < heads_; ++h) {
    const Mat grad_oh = grad_concat.middleCols(h * dh, dh);
    const Mat grad_p = grad_oh * vh_[h].transpose();
    grad_vp.middleCols(h * dh, dh) = p_[h].transpose() * grad_oh;
    const Mat grad_scores = softmax_[h].backward(grad_p);
    grad_qp.middleCols(h * dh, dh) = scale * (grad_scores * kh_[h]);
    grad_kp.middleCols(h * dh, dh) =
        scale * (grad_scores.transpose() * qh_[h]);
  }
  const Mat grad_q = proj_q_.backward(grad_qp);
  const Mat grad_kv = proj_k_.backward(grad_kp) + proj_v_.backward(grad_vp);
  return {grad_q, grad_kv};
}

void MultiHeadAttention::collect(std::vector<Param>& out) {
  proj_q_.collect(out);
  proj_k_.collect(out);
  proj_v_.collect(out);
  proj_out_.collect(out);
}

void MultiHeadAttention::zero_grad() {
  proj_q_.zero_grad();
  proj_k_.zero_grad();
  proj_v_.zero_grad();
  proj_out_.zero_grad();
}

void Adam::step(const std::vector<Param>& params, double lr_override) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Param& p : params) {
      m_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
    }
  }
  if (m_.size() != params.size()) {
    throw NumericError("Adam: parameter list changed between steps");
  }
  ++t_;
  const double lr = lr_override > 0 ? lr_override : cfg_.lr;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Mat& g = *params[i].grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Mat m_hat = m_[i] / bc1;
    const Mat v_hat = v_[i] / bc2;
    params[i].value->array() -=
        lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
  }
}

std::int64_t param_count(const std::vector<Param>& params) {
  std::int64_t n = 0;
  for (const Param& p : params) n += p.value->size();
  return n;
}

}  // namespace vvt::nn
