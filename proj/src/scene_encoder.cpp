#include "vvt/scene_encoder.hpp"

#include <algorithm>
#include <limits>

#include "vvt/errors.hpp"

namespace vvt::predict {
namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

// Neighbor indices of `center` within `radius`, nearest first, capped at
// `max_group`. Ordering is (distance, lexicographic coords), so it does
// not depend on input order.
std::vector<int> radius_group(std::span<const Vec3> points, const Vec3& center,
                              double radius, int max_group) {
  std::vector<int> idx;
  const double r2 = radius * radius;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    if ((points[static_cast<std::size_t>(i)] - center).squaredNorm() <= r2) {
      idx.push_back(i);
    }
  }
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double da =
        (points[static_cast<std::size_t>(a)] - center).squaredNorm();
    const double db =
        (points[static_cast<std::size_t>(b)] - center).squaredNorm();
    if (da != db) return da < db;
    return lex_less(points[static_cast<std::size_t>(a)],
                    points[static_cast<std::size_t>(b)]);
  });
  if (static_cast<int>(idx.size()) > max_group) {
    idx.resize(static_cast<std::size_t>(max_group));
  }
  return idx;
}

int nearest_index(std::span<const Vec3> candidates, const Vec3& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    const double d = (candidates[static_cast<std::size_t>(i)] - p).squaredNorm();
    if (d < best_d ||
        (d == best_d && lex_less(candidates[static_cast<std::size_t>(i)],
                                 candidates[static_cast<std::size_t>(best)]))) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

std::vector<int> farthest_point_indices(std::span<const Vec3> points,
                                        int count) {
  if (points.empty() || count <= 0) return {};
  const int n = static_cast<int>(points.size());
  count = std::min(count, n);

  int start = 0;
  for (int i = 1; i < n; ++i) {
    if (lex_less(points[static_cast<std::size_t>(i)],
                 points[static_cast<std::size_t>(start)])) {
      start = i;
    }
  }

  std::vector<int> selected{start};
  std::vector<double> min_dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    min_dist[static_cast<std::size_t>(i)] =
        (points[static_cast<std::size_t>(i)] -
         points[static_cast<std::size_t>(start)])
            .squaredNorm();
  }
  while (static_cast<int>(selected.size()) < count) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (best < 0) {
        best = i;
        continue;
      }
      const double di = min_dist[static_cast<std::size_t>(i)];
      const double db = min_dist[static_cast<std::size_t>(best)];
      if (di > db ||
          (di == db && lex_less(points[static_cast<std::size_t>(i)],
                                points[static_cast<std::size_t>(best)]))) {
        best = i;
      }
    }
    selected.push_back(best);
    for (int i = 0; i < n; ++i) {
      min_dist[static_cast<std::size_t>(i)] =
          std::min(min_dist[static_cast<std::size_t>(i)],
                   (points[static_cast<std::size_t>(i)] -
                    points[static_cast<std::size_t>(best)])
                       .squaredNorm());
    }
  }
  return selected;
}

SceneEncoder::SceneEncoder(const SceneEncoderConfig& cfg, nn::Rng& rng)
    : cfg_(cfg),
      mlp1_a_(3, cfg.hidden, rng, "enc.mlp1.a"),
      mlp1_b_(cfg.hidden, cfg.hidden, rng, "enc.mlp1.b"),
      mlp2_a_(3 + cfg.hidden, cfg.hidden, rng, "enc.mlp2.a"),
      mlp2_b_(cfg.hidden, cfg.hidden, rng, "enc.mlp2.b"),
      point_a_(3 + 2 * cfg.hidden, cfg.out_dim, rng, "enc.point.a"),
      point_b_(cfg.out_dim, cfg.out_dim, rng, "enc.point.b"),
      global_(cfg.out_dim, cfg.out_dim, rng, "enc.global") {}

SceneEncoder::Pooled SceneEncoder::pool_groups(
    const nn::Mat& rows, const std::vector<std::vector<int>>& groups,
    const std::vector<int>& row_offset) const {
  Pooled p;
  const Eigen::Index width = rows.cols();
  p.features.resize(static_cast<Eigen::Index>(groups.size()), width);
  p.argmax.resize(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    p.argmax[g].assign(static_cast<std::size_t>(width), row_offset[g]);
    for (Eigen::Index c = 0; c < width; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      int best_row = row_offset[g];
      for (std::size_t m = 0; m < groups[g].size(); ++m) {
        const int row = row_offset[g] + static_cast<int>(m);
        const double v = rows(row, c);
        if (v > best) {
          best = v;
          best_row = row;
        }
      }
      p.features(static_cast<Eigen::Index>(g), c) = best;
      p.argmax[g][static_cast<std::size_t>(c)] = best_row;
    }
  }
  return p;
}

SceneEncoderOut SceneEncoder::forward(std::span<const Vec3> raw_points) {
  if (raw_points.size() <
      static_cast<std::size_t>(std::max(1, cfg_.min_points))) {
    throw DataError("TooFewPoints: encoder needs at least " +
                    std::to_string(std::max(1, cfg_.min_points)) + " points");
  }
  n_points_ = static_cast<Eigen::Index>(raw_points.size());

  // Canonicalize the processing order so every float reduction sees the
  // same operand order for any input permutation; outputs are mapped back
  // to input order at the end.
  order_.resize(raw_points.size());
  for (std::size_t i = 0; i < raw_points.size(); ++i) {
    order_[i] = static_cast<int>(i);
  }
  std::sort(order_.begin(), order_.end(), [&](int a, int b) {
    return lex_less(raw_points[static_cast<std::size_t>(a)],
                    raw_points[static_cast<std::size_t>(b)]);
  });
  std::vector<Vec3> pts(raw_points.size());
  for (std::size_t k = 0; k < order_.size(); ++k) {
    pts[k] = raw_points[static_cast<std::size_t>(order_[k])];
  }
  const std::span<const Vec3> points(pts);

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  // Level 1: sample centroids from the cloud, group, transform, pool.
  const std::vector<int> idx1 =
      farthest_point_indices(points, cfg_.level1_centroids);
  std::vector<Vec3> c1;
  c1.reserve(idx1.size());
  for (int i : idx1) c1.push_back(points[static_cast<std::size_t>(i)]);

  groups1_.clear();
  offsets1_.clear();
  int total1 = 0;
  for (const Vec3& c : c1) {
    groups1_.push_back(radius_group(points, c, cfg_.radius1, cfg_.max_group));
    offsets1_.push_back(total1);
    total1 += static_cast<int>(groups1_.back().size());
  }
  rows1_count_ = total1;
  nn::Mat rows1(total1, 3);
  for (std::size_t g = 0; g < groups1_.size(); ++g) {
    for (std::size_t m = 0; m < groups1_[g].size(); ++m) {
      const Vec3 local =
          points[static_cast<std::size_t>(groups1_[g][m])] - c1[g];
      rows1.row(offsets1_[g] + static_cast<int>(m)) = local.transpose();
    }
  }
  const nn::Mat h1 = mlp1_b_.forward(relu1_.forward(mlp1_a_.forward(rows1)));
  pooled1_ = pool_groups(h1, groups1_, offsets1_);

  // Level 2: sample among the level-1 centroids.
  const std::vector<int> idx2 = farthest_point_indices(c1, cfg_.level2_centroids);
  std::vector<Vec3> c2;
  c2.reserve(idx2.size());
  for (int i : idx2) c2.push_back(c1[static_cast<std::size_t>(i)]);

  groups2_.clear();
  offsets2_.clear();
  int total2 = 0;
  for (const Vec3& c : c2) {
    groups2_.push_back(radius_group(c1, c, cfg_.radius2, cfg_.max_group));
    offsets2_.push_back(total2);
    total2 += static_cast<int>(groups2_.back().size());
  }
  rows2_count_ = total2;
  nn::Mat rows2(total2, 3 + cfg_.hidden);
  for (std::size_t g = 0; g < groups2_.size(); ++g) {
    for (std::size_t m = 0; m < groups2_[g].size(); ++m) {
      const int i = groups2_[g][m];
      const Vec3 local = c1[static_cast<std::size_t>(i)] - c2[g];
      const int row = offsets2_[g] + static_cast<int>(m);
      rows2.row(row).head<3>() = local.transpose();
      rows2.row(row).tail(cfg_.hidden) = pooled1_.features.row(i);
    }
  }
  const nn::Mat h2 = mlp2_b_.forward(relu2_.forward(mlp2_a_.forward(rows2)));
  pooled2_ = pool_groups(h2, groups2_, offsets2_);

  // Per-point features: own position plus the nearest context at both
  // levels.
  nearest1_.resize(points.size());
  nearest2_.resize(points.size());
  nn::Mat point_in(n_points_, 3 + 2 * cfg_.hidden);
  for (Eigen::Index p = 0; p < n_points_; ++p) {
    const Vec3& pt = points[static_cast<std::size_t>(p)];
    const int n1 = nearest_index(c1, pt);
    const int n2 = nearest_index(c2, pt);
    nearest1_[static_cast<std::size_t>(p)] = n1;
    nearest2_[static_cast<std::size_t>(p)] = n2;
    point_in.row(p).head<3>() = (pt - centroid).transpose();
    point_in.row(p).segment(3, cfg_.hidden) = pooled1_.features.row(n1);
    point_in.row(p).tail(cfg_.hidden) = pooled2_.features.row(n2);
  }
  const nn::Mat fp_sorted =
      point_b_.forward(relu3_.forward(point_a_.forward(point_in)));

  // Global descriptor: transform of the columnwise max over F_p rows.
  global_argmax_.assign(static_cast<std::size_t>(cfg_.out_dim), 0);
  nn::Mat pooled(1, cfg_.out_dim);
  for (Eigen::Index c = 0; c < cfg_.out_dim; ++c) {
    Eigen::Index best_row = 0;
    double best = fp_sorted(0, c);
    for (Eigen::Index r = 1; r < n_points_; ++r) {
      if (fp_sorted(r, c) > best) {
        best = fp_sorted(r, c);
        best_row = r;
      }
    }
    pooled(0, c) = best;
    global_argmax_[static_cast<std::size_t>(c)] = static_cast<int>(best_row);
  }

  SceneEncoderOut out;
  out.per_point.resize(n_points_, cfg_.out_dim);
  for (Eigen::Index k = 0; k < n_points_; ++k) {
    out.per_point.row(order_[static_cast<std::size_t>(k)]) = fp_sorted.row(k);
  }
  out.global = global_.forward(pooled).row(0).transpose();
  return out;
}

void SceneEncoder::backward(const nn::Mat& grad_per_point,
                            const nn::Vec& grad_global) {
  nn::Mat grad_fp = nn::Mat::Zero(n_points_, cfg_.out_dim);
  if (grad_per_point.size() != 0) {
    // back into the canonical (sorted) row order used by the caches
    for (Eigen::Index k = 0; k < n_points_; ++k) {
      grad_fp.row(k) = grad_per_point.row(order_[static_cast<std::size_t>(k)]);
    }
  }
  const nn::Mat grad_pooled = global_.backward(grad_global.transpose());
  for (Eigen::Index c = 0; c < cfg_.out_dim; ++c) {
    grad_fp(global_argmax_[static_cast<std::size_t>(c)], c) +=
        grad_pooled(0, c);
  }

  const nn::Mat grad_point_in =
      point_a_.backward(relu3_.backward(point_b_.backward(grad_fp)));

  // Route the context slices back onto the pooled level features.
  nn::Mat grad_g1 =
      nn::Mat::Zero(pooled1_.features.rows(), pooled1_.features.cols());
  nn::Mat grad_g2 =
      nn::Mat::Zero(pooled2_.features.rows(), pooled2_.features.cols());
  for (Eigen::Index p = 0; p < n_points_; ++p) {
    grad_g1.row(nearest1_[static_cast<std::size_t>(p)]) +=
        grad_point_in.row(p).segment(3, cfg_.hidden);
    grad_g2.row(nearest2_[static_cast<std::size_t>(p)]) +=
        grad_point_in.row(p).tail(cfg_.hidden);
  }

  // Level 2 backward: unpool onto the stacked rows, then through the MLP.
  nn::Mat grad_rows2_out = nn::Mat::Zero(rows2_count_, cfg_.hidden);
  for (std::size_t g = 0; g < groups2_.size(); ++g) {
    for (Eigen::Index c = 0; c < cfg_.hidden; ++c) {
      grad_rows2_out(pooled2_.argmax[g][static_cast<std::size_t>(c)], c) +=
          grad_g2(static_cast<Eigen::Index>(g), c);
    }
  }
  const nn::Mat grad_rows2_in =
      mlp2_a_.backward(relu2_.backward(mlp2_b_.backward(grad_rows2_out)));
  for (std::size_t g = 0; g < groups2_.size(); ++g) {
    for (std::size_t m = 0; m < groups2_[g].size(); ++m) {
      const int row = offsets2_[g] + static_cast<int>(m);
      grad_g1.row(groups2_[g][m]) += grad_rows2_in.row(row).tail(cfg_.hidden);
    }
  }

  // Level 1 backward.
  nn::Mat grad_rows1_out = nn::Mat::Zero(rows1_count_, cfg_.hidden);
  for (std::size_t g = 0; g < groups1_.size(); ++g) {
    for (Eigen::Index c = 0; c < cfg_.hidden; ++c) {
      grad_rows1_out(pooled1_.argmax[g][static_cast<std::size_t>(c)], c) +=
          grad_g1(static_cast<Eigen::Index>(g), c);
    }
  }
  mlp1_a_.backward(relu1_.backward(mlp1_b_.backward(grad_rows1_out)));
}

void SceneEncoder::collect(std::vector<nn::Param>& out) {
  mlp1_a_.collect(out);
  mlp1_b_.collect(out);
  mlp2_a_.collect(out);
  mlp2_b_.collect(out);
  point_a_.collect(out);
  point_b_.collect(out);
  global_.collect(out);
}

void SceneEncoder::zero_grad() {
  mlp1_a_.zero_grad();
  mlp1_b_.zero_grad();
  mlp2_a_.zero_grad();
  mlp2_b_.zero_grad();
  point_a_.zero_grad();
  point_b_.zero_grad();
  global_.zero_grad();
}

}  // namespace vvt::predict
