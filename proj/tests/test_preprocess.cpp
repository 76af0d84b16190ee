#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "restocnet/error.hpp"
#include "restocnet/preprocess.hpp"

using namespace restocnet;

namespace {

LabeledImageSet make_set(std::size_t n, std::size_t c, std::size_t h,
                         std::size_t w) {
  LabeledImageSet set;
  set.images = Tensor4<float>(n, c, h, w);
  set.labels.assign(n, 0);
  return set;
}

}  // namespace

TEST_CASE("contrast normalization maps {0,2} onto {-1,+1}", "[preprocess]") {
  LabeledImageSet set = make_set(2, 1, 1, 2);
  set.images.data = {0.0f, 2.0f, 2.0f, 0.0f};  // mean 1, population std 1
  const GcnStats stats = gcn_fit(set);
  CHECK(stats.mean[0] == Catch::Approx(1.0));
  CHECK(stats.stddev[0] == Catch::Approx(1.0));
  gcn_apply(stats, set);
  CHECK(set.images.data == std::vector<float>{-1.0f, 1.0f, 1.0f, -1.0f});
}

TEST_CASE("contrast normalization is per channel", "[preprocess]") {
  LabeledImageSet set = make_set(2, 2, 1, 1);
  // channel 0: {0, 2}; channel 1: {10, 30}.
  set.images.data = {0.0f, 10.0f, 2.0f, 30.0f};
  const GcnStats stats = gcn_fit(set);
  CHECK(stats.mean[1] == Catch::Approx(20.0));
  CHECK(stats.stddev[1] == Catch::Approx(10.0));
  gcn_apply(stats, set);
  CHECK(set.images.data[0] == Catch::Approx(-1.0f));
  CHECK(set.images.data[1] == Catch::Approx(-1.0f));
  CHECK(set.images.data[3] == Catch::Approx(1.0f));
}

TEST_CASE("constant channels need the variance floor", "[preprocess]") {
  LabeledImageSet set = make_set(3, 1, 2, 2);
  for (float& v : set.images.data) v = 5.0f;
  CHECK_THROWS_AS(gcn_fit(set), Error);
  const GcnStats stats = gcn_fit(set, 1e-4);
  CHECK(stats.stddev[0] == Catch::Approx(1e-2));
  CHECK_THROWS_AS(gcn_fit(make_set(0, 1, 2, 2)), Error);
}

TEST_CASE("Jacobi eigendecomposition on closed forms", "[preprocess]") {
  // [[2,1],[1,2]] has eigenvalues 1 and 3.
  std::vector<double> a{2, 1, 1, 2}, v;
  jacobi_eigen(a, v, 2);
  const double lo = std::min(a[0], a[3]), hi = std::max(a[0], a[3]);
  CHECK(lo == Catch::Approx(1.0).margin(1e-12));
  CHECK(hi == Catch::Approx(3.0).margin(1e-12));
  CHECK(std::fabs(a[1]) < 1e-12);

  // Eigenvectors reconstruct the input: A = V diag(A) V^T.
  const std::size_t d = 6;
  std::vector<double> m(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c <= r; ++c)
      m[r * d + c] = m[c * d + r] =
          std::sin(static_cast<double>(r * 7 + c * 3 + 1));
  std::vector<double> diag = m, vec;
  jacobi_eigen(diag, vec, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      double recon = 0.0, ortho = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        recon += vec[r * d + k] * diag[k * d + k] * vec[c * d + k];
        ortho += vec[k * d + r] * vec[k * d + c];
      }
      CHECK(recon == Catch::Approx(m[r * d + c]).margin(1e-9));
      CHECK(ortho == Catch::Approx(r == c ? 1.0 : 0.0).margin(1e-9));
    }
}

TEST_CASE("Jacobi result is worker-count invariant", "[preprocess]") {
  const std::size_t d = 9;  // odd dimension exercises the phantom slot
  std::vector<double> base(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c <= r; ++c)
      base[r * d + c] = base[c * d + r] =
          std::cos(static_cast<double>(r * 5 + c * 11));
  std::vector<double> a1 = base, v1, a4 = base, v4;
  jacobi_eigen(a1, v1, d, 1e-10, 50, 1);
  jacobi_eigen(a4, v4, d, 1e-10, 50, 4);
  CHECK(a1 == a4);
  CHECK(v1 == v4);
}

TEST_CASE("whitening a diagonal covariance is a closed form", "[preprocess]") {
  // All eight sign patterns of 3 pixels scaled by (1, 2, 0.5): zero mean,
  // exactly diagonal covariance diag(1, 4, 0.25).
  const double s[3] = {1.0, 2.0, 0.5};
  LabeledImageSet set = make_set(8, 1, 1, 3);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t p = 0; p < 3; ++p)
      set.images.image(i)[p] =
          static_cast<float>(((i >> p) & 1 ? 1.0 : -1.0) * s[p]);

  const double eps = 0.25;
  const ZcaModel model = zca_fit(set, GcnStats{}, eps);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      const double expect = r == c ? 1.0 / std::sqrt(s[r] * s[r] + eps) : 0.0;
      CHECK(model.whitening[r * 3 + c] == Catch::Approx(expect).margin(1e-6));
    }

  zca_apply(model, set);
  CHECK(set.images.image(7)[1] ==
        Catch::Approx(2.0 / std::sqrt(4.25)).margin(1e-6));
}

TEST_CASE("whitened data has near-identity covariance", "[preprocess]") {
  const std::size_t n = 64, d = 6;
  LabeledImageSet set = make_set(n, 1, 2, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p)
      set.images.image(i)[p] = static_cast<float>(
          std::sin(static_cast<double>(i * (p + 3) + p)) +
          0.5 * std::cos(static_cast<double>(i + p * p)));

  const ZcaModel model = zca_fit(set, GcnStats{}, 1e-8);
  // The filter itself is symmetric.
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      CHECK(model.whitening[r * d + c] ==
            Catch::Approx(model.whitening[c * d + r]).margin(1e-6));

  zca_apply(model, set);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p) mean[p] += set.images.image(i)[p];
  for (double& m : mean) m /= n;
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      double cov = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        cov += (set.images.image(i)[r] - mean[r]) *
               (set.images.image(i)[c] - mean[c]);
      cov /= n;
      CHECK(cov == Catch::Approx(r == c ? 1.0 : 0.0).margin(1e-3));
    }
}

TEST_CASE("whitening preconditions", "[preprocess]") {
  LabeledImageSet set = make_set(4, 1, 1, 2);
  for (std::size_t i = 0; i < set.images.size(); ++i)
    set.images.data[i] = static_cast<float>(i % 3) - 1.0f;
  CHECK_THROWS_AS(zca_fit(set, GcnStats{}, 0.0), Error);
  CHECK_THROWS_AS(zca_fit(make_set(1, 1, 1, 2), GcnStats{}, 0.1), Error);
  const ZcaModel model = zca_fit(set, GcnStats{}, 0.1);
  LabeledImageSet wrong = make_set(2, 1, 1, 3);
  CHECK_THROWS_AS(zca_apply(model, wrong), Error);
}
