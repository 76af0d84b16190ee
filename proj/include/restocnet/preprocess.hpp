#ifndef RESTOCNET_PREPROCESS_HPP
#define RESTOCNET_PREPROCESS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "restocnet/error.hpp"
#include "restocnet/parallel.hpp"
#include "restocnet/tensor.hpp"

namespace restocnet {

/// Per-channel statistics of the fitting (train) split; population std.
struct GcnStats {
  std::vector<double> mean, stddev;
};

inline GcnStats gcn_fit(const LabeledImageSet& set, double epsilon = 0.0) {
  require(set.count() > 0, ErrorClass::State, "cannot fit GCN on an empty set");
  const std::size_t channels = set.images.c;
  const std::size_t per_channel = set.images.h * set.images.w;
  GcnStats stats{std::vector<double>(channels, 0.0),
                 std::vector<double>(channels, 0.0)};
  const double count = static_cast<double>(set.count() * per_channel);
  for (std::size_t i = 0; i < set.count(); ++i)
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const float* p = set.images.image(i) + ch * per_channel;
      for (std::size_t k = 0; k < per_channel; ++k) stats.mean[ch] += p[k];
    }
  for (std::size_t ch = 0; ch < channels; ++ch) stats.mean[ch] /= count;
  for (std::size_t i = 0; i < set.count(); ++i)
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const float* p = set.images.image(i) + ch * per_channel;
      for (std::size_t k = 0; k < per_channel; ++k) {
        const double d = p[k] - stats.mean[ch];
        stats.stddev[ch] += d * d;
      }
    }
  for (std::size_t ch = 0; ch < channels; ++ch) {
    stats.stddev[ch] = std::sqrt(stats.stddev[ch] / count + epsilon);
    require(stats.stddev[ch] > 0.0, ErrorClass::Numeric,
            "degenerate constant channel " + std::to_string(ch) +
                " under contrast normalization (see gcn_epsilon)");
  }
  return stats;
}

inline void gcn_apply(const GcnStats& stats, LabeledImageSet& set) {
  require(stats.mean.size() == set.images.c, ErrorClass::Dimension,
          "GCN statistics channel count mismatch");
  const std::size_t per_channel = set.images.h * set.images.w;
  for (std::size_t i = 0; i < set.count(); ++i)
    for (std::size_t ch = 0; ch < set.images.c; ++ch) {
      float* p = set.images.image(i) + ch * per_channel;
      const float mean = static_cast<float>(stats.mean[ch]);
      const float inv = static_cast<float>(1.0 / stats.stddev[ch]);
      for (std::size_t k = 0; k < per_channel; ++k) p[k] = (p[k] - mean) * inv;
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric d x d matrix stored
/// row-major in `a`. On return `a` holds the diagonalized matrix
/// (eigenvalues on the diagonal) and the columns of `v` the orthonormal
/// eigenvectors, so input = V diag V^T. Converges when the off-diagonal
/// Frobenius norm falls below rel_tol times the input Frobenius norm.
///
/// Pairs are visited in tournament (round-robin) order: each round rotates
/// d/2 disjoint pairs whose angles all come from the round-start matrix, so
/// the update runs as streaming row passes instead of strided column walks.
/// Rounds are split across `workers` threads; chunks write disjoint rows,
/// so the result is identical for any worker count.
inline void jacobi_eigen(std::vector<double>& a, std::vector<double>& v,
                         std::size_t d, double rel_tol = 1e-10,
                         int max_sweeps = 50, unsigned workers = 1) {
  require(a.size() == d * d, ErrorClass::Dimension,
          "matrix storage does not match its dimension");
  v.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
  if (d < 2) return;
  double norm = 0.0;
  for (double x : a) norm += x * x;
  const double tol = rel_tol * std::sqrt(norm);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q)
        s += 2.0 * a[p * d + q] * a[p * d + q];
    return std::sqrt(s);
  };

  // Tournament schedule: slot 0 is fixed, the rest rotate one position per
  // round; n - 1 rounds visit every unordered pair exactly once. Odd d gets
  // a phantom index that pairs as the identity rotation.
  const std::size_t n = d + (d % 2);
  const std::size_t half = n / 2;
  std::vector<std::size_t> ring(n);
  for (std::size_t i = 0; i < n; ++i) ring[i] = i;
  std::vector<std::size_t> ps(half), qs(half);
  std::vector<double> cs(half), sn(half);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double off = off_norm();
    if (off <= tol) return;
    // Skip rotations on elements already far below the sweep's scale.
    const double small = off / (static_cast<double>(d) * d);
    for (std::size_t round = 0; round + 1 < n; ++round) {
      for (std::size_t i = 0; i < half; ++i) {
        std::size_t p = ring[i], q = ring[n - 1 - i];
        if (p > q) std::swap(p, q);
        ps[i] = p;
        qs[i] = q;
        cs[i] = 1.0;
        sn[i] = 0.0;
        if (q >= d) continue;
        const double apq = a[p * d + q];
        if (std::fabs(apq) <= small) continue;
        const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        cs[i] = 1.0 / std::sqrt(t * t + 1.0);
        sn[i] = t * cs[i];
      }
      // A <- J^T A J, streaming each pair's two rows once: the pair's own
      // row rotation, then every pair's column rotation inside those rows.
      parallel_for(half, workers, [&](std::size_t i) {
        double* rp = &a[ps[i] * d];
        double* rq = qs[i] < d ? &a[qs[i] * d] : nullptr;
        if (rq && sn[i] != 0.0) {
          const double c = cs[i], s = sn[i];
          for (std::size_t k = 0; k < d; ++k) {
            const double xp = rp[k], xq = rq[k];
            rp[k] = c * xp - s * xq;
            rq[k] = s * xp + c * xq;
          }
        }
        for (std::size_t j = 0; j < half; ++j) {
          if (sn[j] == 0.0) continue;
          const double c = cs[j], s = sn[j];
          const std::size_t pj = ps[j], qj = qs[j];
          const double xp = rp[pj], xq = rp[qj];
          rp[pj] = c * xp - s * xq;
          rp[qj] = s * xp + c * xq;
          if (rq) {
            const double yp = rq[pj], yq = rq[qj];
            rq[pj] = c * yp - s * yq;
            rq[qj] = s * yp + c * yq;
          }
        }
      });
      // V <- V J.
      parallel_for(d, workers, [&](std::size_t k) {
        double* row = &v[k * d];
        for (std::size_t j = 0; j < half; ++j) {
          if (sn[j] == 0.0) continue;
          const double xp = row[ps[j]], xq = row[qs[j]];
          row[ps[j]] = cs[j] * xp - sn[j] * xq;
          row[qs[j]] = sn[j] * xp + cs[j] * xq;
        }
      });
      const std::size_t last = ring[n - 1];
      for (std::size_t j = n - 1; j > 1; --j) ring[j] = ring[j - 1];
      ring[1] = last;
    }
  }
  require(off_norm() <= tol, ErrorClass::Numeric,
          "Jacobi eigendecomposition did not converge");
}

/// Whitening model: x -> W * ((x - mean_ch) / std_ch) with
/// W = E (Lambda + eps I)^(-1/2) E^T from the covariance eigendecomposition.
struct ZcaModel {
  GcnStats gcn;
  std::size_t dim = 0;
  std::vector<float> whitening;  // dim x dim, row-major
  double epsilon = 0.0;
};

/// Fit the whitening filter on a contrast-normalized training set.
inline ZcaModel zca_fit(const LabeledImageSet& set, const GcnStats& stats,
                        double epsilon, unsigned workers = 1) {
  require(epsilon > 0.0, ErrorClass::Config, "ZCA epsilon must be > 0");
  require(set.count() >= 2, ErrorClass::Numeric,
          "ZCA fit requires at least two images");
  const std::size_t d = set.images.image_size();
  const std::size_t n = set.count();

  // Mean-centered covariance, accumulated in double via blocked products.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Map<const Eigen::VectorXf> x(set.images.image(i),
                                        static_cast<Eigen::Index>(d));
    mean += x.cast<double>();
  }
  mean /= static_cast<double>(n);

  Eigen::MatrixXd cov =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const std::size_t block = 2048;
  Eigen::MatrixXd centered(static_cast<Eigen::Index>(block),
                           static_cast<Eigen::Index>(d));
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t rows = std::min(block, n - start);
    for (std::size_t r = 0; r < rows; ++r) {
      Eigen::Map<const Eigen::VectorXf> x(set.images.image(start + r),
                                          static_cast<Eigen::Index>(d));
      centered.row(static_cast<Eigen::Index>(r)) =
          (x.cast<double>() - mean).transpose();
    }
    const auto part = centered.topRows(static_cast<Eigen::Index>(rows));
    cov.noalias() += part.transpose() * part;
  }
  cov /= static_cast<double>(n);

  std::vector<double> a(d * d), v;
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      a[r * d + c] = cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  jacobi_eigen(a, v, d, 1e-10, 50, workers);

  std::vector<double> scale(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double lambda = a[k * d + k];
    scale[k] = 1.0 / std::sqrt(std::max(lambda, 0.0) + epsilon);
  }

  // W = V diag(scale) V^T.
  ZcaModel model;
  model.gcn = stats;
  model.dim = d;
  model.epsilon = epsilon;
  model.whitening.resize(d * d);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>>
      vm(v.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::MatrixXd w = vm *
                      Eigen::Map<Eigen::VectorXd>(scale.data(),
                                                  static_cast<Eigen::Index>(d))
                          .asDiagonal() *
                      vm.transpose();
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      model.whitening[r * d + c] =
          static_cast<float>(w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
  return model;
}

/// Multiply each (already contrast-normalized) image by the whitening filter.
inline void zca_apply(const ZcaModel& model, LabeledImageSet& set) {
  require(set.images.image_size() == model.dim, ErrorClass::Dimension,
          "image dimension does not match whitening filter");
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      w(model.whitening.data(), static_cast<Eigen::Index>(model.dim),
        static_cast<Eigen::Index>(model.dim));
  Eigen::VectorXf tmp(static_cast<Eigen::Index>(model.dim));
  for (std::size_t i = 0; i < set.count(); ++i) {
    Eigen::Map<Eigen::VectorXf> x(set.images.image(i),
                                  static_cast<Eigen::Index>(model.dim));
    tmp.noalias() = w * x;
    x = tmp;
  }
}

}  // namespace restocnet

#endif
