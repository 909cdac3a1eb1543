#pragma once

// Shared fixtures and oracles for the unit tests.

#include <cmath>
#include <random>
#include <vector>

#include "vvt/nn.hpp"
#include "vvt/trace.hpp"

namespace vvt::testing {

inline TraceSample sample_at(double t, const Vec3& pos,
                             const EulerAngles& orient = {},
                             double conf = 1.0) {
  TraceSample s;
  s.frame = static_cast<std::int64_t>(t * 144.0);
  s.timestamp = t;
  s.headset.position = pos;
  s.headset.orientation = orient;
  s.eye_left.confidence = conf;
  s.eye_right.confidence = conf;
  return s;
}

inline Session session_of(std::vector<TraceSample> samples,
                          double rate = 144.0) {
  Session s;
  s.user_id = "u1";
  s.video_id = "v1";
  s.samples = std::move(samples);
  s.nominal_rate_hz = rate;
  return s;
}

/// Stationary viewer at `pos` facing +x for `n` samples at `rate` Hz.
inline Session stationary_session(int n, double rate = 10.0,
                                  const Vec3& pos = {0, 0, 1.7}) {
  std::vector<TraceSample> samples;
  for (int i = 0; i < n; ++i) {
    samples.push_back(sample_at(i / rate, pos));
  }
  return session_of(std::move(samples), rate);
}

inline std::vector<Vec3> random_cloud(int n, std::mt19937_64& rng,
                                      double extent = 2.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    pts.emplace_back(u(rng), u(rng), u(rng));
  }
  return pts;
}

/// Adds noise to every parameter entry. Gradient checks run on randomized
/// parameters so no ReLU kink or pooling tie sits exactly at the
/// evaluation point (zero-initialized biases put them there).
inline void randomize_params(const std::vector<nn::Param>& params,
                             nn::Rng& rng, double scale = 0.05) {
  for (const nn::Param& p : params) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      p.value->data()[i] += rng.normal() * scale;
    }
  }
}

/// Central finite differences over every parameter entry against the
/// accumulated analytic gradients. Returns the worst relative error; the
/// denominator is floored at 1e-4 so that exactly-zero gradients are not
/// compared against bare finite-difference noise.
template <typename LossFn>
double max_grad_rel_error(const std::vector<nn::Param>& params,
                          LossFn&& loss_fn, double h = 1e-6) {
  double worst = 0.0;
  for (const nn::Param& p : params) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      const double saved = p.value->data()[i];
      p.value->data()[i] = saved + h;
      const double up = loss_fn();
      p.value->data()[i] = saved - h;
      const double down = loss_fn();
      p.value->data()[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = p.grad->data()[i];
      const double scale = std::max(1e-4, std::abs(fd) + std::abs(an));
      worst = std::max(worst, std::abs(fd - an) / scale);
    }
  }
  return worst;
}

}  // namespace vvt::testing
