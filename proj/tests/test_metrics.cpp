#include <catch2/catch_amalgamated.hpp>

#include "restocnet/error.hpp"
#include "restocnet/metrics.hpp"

using namespace restocnet;

TEST_CASE("kernel compression reproduces the headline ratios", "[metrics]") {
  // 32 5x5 full-precision kernels vs 36 3x3 binary ({-1,+1} => 2 bits).
  const CompressionReport a = kernel_compression(32, 5, 36, 3);
  CHECK(a.num == 3200);
  CHECK(a.den == 81);
  CHECK(a.decimal_text() == "39.5");

  // 64 7x7 full-precision kernels vs 256 3x3 binary.
  const CompressionReport b = kernel_compression(64, 7, 256, 3);
  CHECK(b.num == 196);
  CHECK(b.den == 9);
  CHECK(b.decimal_text() == "21.7");
  CHECK(b.decimal() == Catch::Approx(21.7));
}

TEST_CASE("synaptic compression reproduces the fully-connected ratio", "[metrics]") {
  // 1600 full-precision neurons vs 6400 binary neurons, same input count.
  const CompressionReport r = synaptic_compression(1600, 6400, 784);
  CHECK(r.num == 8);
  CHECK(r.den == 1);
  CHECK(r.decimal_text() == "8.0");

  // Equal neuron counts reduce to the pure bit-width ratio.
  const CompressionReport eq = synaptic_compression(400, 400, 784);
  CHECK(eq.num == 32);
  CHECK(eq.den == 1);
  CHECK(eq.decimal_text() == "32.0");
}

TEST_CASE("ratio text truncates to one decimal", "[metrics]") {
  // 196/9 = 21.777... -> 21.7 (truncation, not rounding).
  CHECK(CompressionReport{{}, {}, 196, 9}.decimal_text() == "21.7");
  // 3200/81 = 39.506... -> 39.5.
  CHECK(CompressionReport{{}, {}, 3200, 81}.decimal_text() == "39.5");
  // 199/10 = 19.9 lands exactly.
  CHECK(CompressionReport{{}, {}, 199, 10}.decimal_text() == "19.9");
  // Integer ratios keep a trailing .0.
  CHECK(CompressionReport{{}, {}, 24, 1}.decimal_text() == "24.0");
}

TEST_CASE("compression ratio reduces exactly and validates inputs", "[metrics]") {
  const CompressionReport r =
      compression_ratio({3, 1, 32}, {2, 1, 2});
  CHECK(r.num == 24);
  CHECK(r.den == 1);
  CHECK_THROWS_AS(compression_ratio({0, 1, 32}, {1, 1, 2}), Error);
  CHECK_THROWS_AS(compression_ratio({1, 1, 32}, {1, 0, 2}), Error);
  CHECK_THROWS_AS(compression_ratio({1, 1, 0}, {1, 1, 2}), Error);
}

TEST_CASE("accuracy report counts correct predictions", "[metrics]") {
  SECTION("all correct") {
    const std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const AccuracyReport r = evaluate_accuracy(labels, labels);
    CHECK(r.accuracy == 1.0);
    CHECK(r.correct == 10);
    for (int i = 0; i < 10; ++i) CHECK(r.confusion[i][i] == 1);
  }
  SECTION("constant predictor on balanced labels") {
    const std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<int> preds(10, 0);
    const AccuracyReport r = evaluate_accuracy(preds, labels);
    CHECK(r.accuracy == 0.1);
    CHECK(r.confusion[7][0] == 1);
    CHECK(r.confusion[7][7] == 0);
  }
  SECTION("hand-counted fixture") {
    const std::vector<int> labels{3, 3, 5, 0, 9, 1, 1, 4, 8, 2};
    const std::vector<int> preds {3, 5, 5, 0, 9, 1, 7, 4, 8, 8};
    const AccuracyReport r = evaluate_accuracy(preds, labels);
    CHECK(r.correct == 7);
    CHECK(r.accuracy == 0.7);
    CHECK(r.confusion[3][5] == 1);
    CHECK(r.confusion[1][7] == 1);
    CHECK(r.confusion[2][8] == 1);
  }
  SECTION("length mismatch is an error") {
    CHECK_THROWS_AS(evaluate_accuracy({1, 2}, {1}), Error);
  }
  SECTION("silent predictions count against accuracy") {
    const AccuracyReport r = evaluate_accuracy({-1, 2}, {2, 2});
    CHECK(r.total == 2);
    CHECK(r.correct == 1);
    CHECK(r.accuracy == 0.5);
  }
}
