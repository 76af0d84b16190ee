#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "restocnet/classifier.hpp"
#include "restocnet/error.hpp"

using namespace restocnet;

namespace {

ActivationSet blob_data(std::size_t per_class, std::size_t dim,
                        std::uint32_t salt) {
  // Two well-separated clusters around (+1,...) and (-1,...).
  ActivationSet set;
  set.count = 2 * per_class;
  set.dim = dim;
  set.values.resize(set.count * dim);
  set.labels.resize(set.count);
  for (std::size_t i = 0; i < set.count; ++i) {
    const int label = static_cast<int>(i % 2);
    set.labels[i] = label;
    const float center = label == 0 ? 1.0f : -1.0f;
    for (std::size_t c = 0; c < dim; ++c) {
      const double u =
          rng::uniform_at(4321, rng::Phase::Test, salt, 0, 0, i * dim + c);
      set.values[i * dim + c] =
          center + static_cast<float>(0.4 * (u - 0.5));
    }
  }
  return set;
}

}  // namespace

TEST_CASE("classifier gradients match central differences", "[classifier]") {
  Mlp<double> net(6, {5, 3}, 42);
  const std::size_t batch = 4;
  RowMatrix<double> x(batch, 6);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < 6; ++c)
      x(r, c) = rng::uniform_at(7, rng::Phase::Test, 2, 0, 0, r * 6 + c);
  const std::vector<int> labels{0, 1, 2, 1};

  std::vector<RowMatrix<double>> cache;
  net.forward(x, &cache);
  std::vector<RowMatrix<double>> grad_w;
  std::vector<RowVector<double>> grad_b;
  net.backward(cache, labels, nullptr, grad_w, grad_b);

  auto loss_at = [&] {
    std::vector<RowMatrix<double>> c2;
    net.forward(x, &c2);
    std::vector<RowMatrix<double>> gw;
    std::vector<RowVector<double>> gb;
    return net.backward(c2, labels, nullptr, gw, gb);
  };

  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    auto& layer = net.layer(l);
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) {
        const double keep = layer.w(r, c);
        layer.w(r, c) = keep + h;
        const double up = loss_at();
        layer.w(r, c) = keep - h;
        const double down = loss_at();
        layer.w(r, c) = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double rel = std::fabs(numeric - grad_w[l](r, c)) /
                           std::max(1.0, std::fabs(grad_w[l](r, c)));
        worst = std::max(worst, rel);
      }
    for (Eigen::Index c = 0; c < layer.b.cols(); ++c) {
      const double keep = layer.b(c);
      layer.b(c) = keep + h;
      const double up = loss_at();
      layer.b(c) = keep - h;
      const double down = loss_at();
      layer.b(c) = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double rel = std::fabs(numeric - grad_b[l](c)) /
                         std::max(1.0, std::fabs(grad_b[l](c)));
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("adam update follows the bias-corrected recurrence", "[classifier]") {
  Mlp<double> net(1, {1}, 0);
  net.layer(0).w(0, 0) = 0.5;
  net.layer(0).b(0) = 0.25;
  std::vector<RowMatrix<double>> gw{RowMatrix<double>::Constant(1, 1, 0.2)};
  std::vector<RowVector<double>> gb{RowVector<double>::Constant(1, -0.1)};

  net.adam_step(gw, gb, 1, 0.01, 0.9, 0.999, 1e-8);
  CHECK(net.layer(0).w(0, 0) == Catch::Approx(0.4900000005).margin(1e-12));
  CHECK(net.layer(0).b(0) == Catch::Approx(0.2599999990000001).margin(1e-12));

  net.adam_step(gw, gb, 2, 0.01, 0.9, 0.999, 1e-8);
  CHECK(net.layer(0).w(0, 0) == Catch::Approx(0.480000001).margin(1e-12));
  CHECK(net.layer(0).b(0) ==
        Catch::Approx(0.26999999800000013).margin(1e-12));

  // Zero learning rate moves nothing even with live moments.
  Mlp<double> still(1, {1}, 0);
  const double w0 = still.layer(0).w(0, 0);
  still.adam_step(gw, gb, 1, 0.0, 0.9, 0.999, 1e-8);
  CHECK(still.layer(0).w(0, 0) == w0);
  CHECK(still.layer(0).b(0) == 0.0);

  CHECK_THROWS_AS(still.adam_step(gw, gb, 0, 0.01, 0.9, 0.999, 1e-8), Error);
}

TEST_CASE("dropout masks scale surviving activations", "[classifier]") {
  Mlp<float> net(2, {2, 2}, 1);
  net.layer(0).w << 1, 0, 0, 1;
  net.layer(0).b << 0, 0;
  net.layer(1).w << 1, 1, 0, 0;
  net.layer(1).b << 0, 0;

  RowMatrix<float> x(1, 2);
  x << 2, 3;
  const RowMatrix<float> plain = net.forward(x);
  CHECK(plain(0, 0) == 5.0f);
  CHECK(plain(0, 1) == 0.0f);

  // Drop the first hidden unit, keep the second at inverted scale 1/0.5.
  std::vector<RowMatrix<float>> masks{RowMatrix<float>(1, 2)};
  masks[0] << 0, 2;
  const RowMatrix<float> masked = net.forward(x, nullptr, &masks);
  CHECK(masked(0, 0) == 6.0f);
  CHECK(masked(0, 1) == 0.0f);

  RowMatrix<float> bad(1, 3);
  bad << 1, 2, 3;
  CHECK_THROWS_AS(net.forward(bad), Error);
}

TEST_CASE("index shuffling is a keyed permutation", "[classifier]") {
  std::vector<std::size_t> order(97);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_indices(order, 5, 0);

  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

  std::vector<std::size_t> again(97);
  for (std::size_t i = 0; i < again.size(); ++i) again[i] = i;
  shuffle_indices(again, 5, 0);
  CHECK(again == order);

  shuffle_indices(again, 5, 1);
  CHECK(again != order);  // epochs draw different permutations
}

TEST_CASE("classifier training separates easy clusters", "[classifier]") {
  const ActivationSet train = blob_data(30, 4, 0);
  const ActivationSet test = blob_data(10, 4, 1);

  TrainClassifierParams params;
  params.epochs = 40;
  params.batch = 16;
  params.lr = 5e-3;
  params.dropout = 0.25;
  params.seed = 3;

  Mlp<float> net(4, {8, 2}, 3);
  const std::vector<EpochStats> history =
      train_classifier(net, train, &test, params);
  REQUIRE(history.size() == 40);
  CHECK(history.back().loss < history.front().loss);
  CHECK(history.back().accuracy == 1.0);
  CHECK(classifier_accuracy(net, train) == 1.0);

  // Same seed reproduces the run bit for bit.
  Mlp<float> twin(4, {8, 2}, 3);
  train_classifier(twin, train, &test, params);
  const auto a = net.to_checkpoint(), b = twin.to_checkpoint();
  REQUIRE(a.size() == b.size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    CHECK(a[l].weights == b[l].weights);
    CHECK(a[l].bias == b[l].bias);
  }
}

TEST_CASE("classifier training validates its inputs", "[classifier]") {
  ActivationSet train = blob_data(4, 4, 2);
  Mlp<float> net(4, {2}, 0);
  TrainClassifierParams params;
  params.epochs = 1;

  params.dropout = 1.0;
  CHECK_THROWS_AS(train_classifier(net, train, nullptr, params), Error);
  params.dropout = -0.1;
  CHECK_THROWS_AS(train_classifier(net, train, nullptr, params), Error);
  params.dropout = 0.0;
  params.batch = 0;
  CHECK_THROWS_AS(train_classifier(net, train, nullptr, params), Error);
  params.batch = 4;

  ActivationSet empty;
  empty.dim = 4;
  CHECK_THROWS_AS(train_classifier(net, empty, nullptr, params), Error);

  Mlp<float> narrow(3, {2}, 0);
  CHECK_THROWS_AS(train_classifier(narrow, train, nullptr, params), Error);
  CHECK_THROWS_AS(classifier_accuracy(narrow, train), Error);

  params.log_path = "/tmp/restocnet_test_classifier_log.csv";
  train_classifier(net, train, nullptr, params);
  std::ifstream log(params.log_path);
  REQUIRE(log.good());
  std::string header;
  std::getline(log, header);
  CHECK(header == "epoch,loss,accuracy");
  std::string row;
  CHECK(std::getline(log, row));
  log.close();
  std::remove(params.log_path.c_str());
}

TEST_CASE("classifier checkpoints round-trip", "[classifier]") {
  Mlp<float> net(3, {4, 2}, 11);
  net.layer(0).b << 0.5f, -0.25f, 0.0f, 1.0f;
  const std::vector<ClassifierLayer> saved = net.to_checkpoint();
  REQUIRE(saved.size() == 2);
  CHECK(saved[0].in == 3);
  CHECK(saved[0].out == 4);
  CHECK(saved[1].out == 2);

  Mlp<float> copy(3, {4, 2}, 99);  // different init, then overwritten
  copy.load_checkpoint(saved);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(copy.layer(l).w == net.layer(l).w);
    CHECK(copy.layer(l).b == net.layer(l).b);
  }

  Mlp<float> other(3, {5, 2}, 0);
  CHECK_THROWS_AS(other.load_checkpoint(saved), Error);
  Mlp<float> shallow(3, {2}, 0);
  CHECK_THROWS_AS(shallow.load_checkpoint(saved), Error);
}

TEST_CASE("prediction ties break to the lowest class index", "[classifier]") {
  Mlp<float> net(3, {4}, 0);
  net.layer(0).w = RowMatrix<float>::Zero(4, 3);
  net.layer(0).b = RowVector<float>::Zero(4);

  ActivationSet data;
  data.count = 4;
  data.dim = 3;
  data.values.assign(12, 1.0f);
  data.labels = {0, 1, 0, 3};
  // All logits equal: every prediction is class 0.
  CHECK(classifier_accuracy(net, data) == 0.5);

  ActivationSet none;
  none.dim = 3;
  CHECK(classifier_accuracy(net, none) == 0.0);
}
