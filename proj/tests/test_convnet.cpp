#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "restocnet/convnet.hpp"
#include "restocnet/error.hpp"

using namespace restocnet;

namespace {

double unit(std::uint32_t i, std::uint32_t salt) {
  return rng::uniform_at(1234, rng::Phase::Test, salt, 0, 0, i);
}

}  // namespace

TEST_CASE("topology parsing", "[convnet]") {
  const NetworkTopology a = parse_topology("16C3-2P-10FC");
  REQUIRE(a.layers.size() == 1);
  CHECK(a.layers[0].maps == 16);
  CHECK(a.layers[0].kernel == 3);
  CHECK(a.pooling.window == 2);
  CHECK(a.classifier_dims == std::vector<std::size_t>{10});

  const NetworkTopology b =
      parse_topology("36C3-36C3-36C3-2P-1024FC-10FC");
  REQUIRE(b.layers.size() == 3);
  CHECK(b.layers[2].maps == 36);
  CHECK(b.classifier_dims == std::vector<std::size_t>{1024, 10});
  CHECK(serialize_topology(b) == "36C3-36C3-36C3-2P-1024FC-10FC");

  CHECK_THROWS_AS(parse_topology(""), Error);
  CHECK_THROWS_AS(parse_topology("2P"), Error);            // no conv layer
  CHECK_THROWS_AS(parse_topology("16C3-2P"), Error);       // no classifier
  CHECK_THROWS_AS(parse_topology("10FC-16C3-2P"), Error);  // fc before conv
  CHECK_THROWS_AS(parse_topology("16C3-2P-16C3-10FC"), Error);
  CHECK_THROWS_AS(parse_topology("16Q3-2P-10FC"), Error);
  CHECK_THROWS_AS(parse_topology("16C3--2P-10FC"), Error);
}

TEST_CASE("geometry and feature lengths", "[convnet]") {
  const NetworkTopology mnist16 = parse_topology("16C3-2P-10FC");
  const auto g16 = compute_geometry(mnist16, 1, 28, 28);
  CHECK(g16[0].out_h == 26);
  CHECK(g16[0].pooled_h == 13);
  CHECK(feature_length(mnist16, g16) == 16 * 13 * 13);  // 2704

  const NetworkTopology mnist36 = parse_topology("36C3-2P-128FC-10FC");
  CHECK(feature_length(mnist36, compute_geometry(mnist36, 1, 28, 28)) == 6084);

  const NetworkTopology r1 = parse_topology("36C3-2P-1024FC-10FC");
  CHECK(feature_length(r1, compute_geometry(r1, 3, 32, 32)) == 8100);

  const NetworkTopology r2 = parse_topology("36C3-36C3-2P-1024FC-10FC");
  const auto gr2 = compute_geometry(r2, 3, 32, 32);
  CHECK(gr2[1].out_h == 28);
  CHECK(gr2[1].pooled_h == 14);
  CHECK(feature_length(r2, gr2) == 15 * 15 * 36 + 14 * 14 * 36);  // 15156

  const NetworkTopology r3 = parse_topology("36C3-36C3-36C3-2P-1024FC-10FC");
  const auto gr3 = compute_geometry(r3, 3, 32, 32);
  CHECK(feature_length(r3, gr3) == 8100 + 7056 + 6084);  // 21240
  CHECK(feature_length(r3, gr3, {2}) == 6084);           // last layer only
  CHECK(feature_length(r3, gr3, {0, 2}) == 8100 + 6084);
}

TEST_CASE("kernel initialization density follows the fan rule", "[convnet]") {
  ConvLayerSpec spec;
  spec.maps = 16;
  spec.kernel = 3;
  spec.alpha_init = 75.0;
  // p_high = sqrt(75 / (9 + 144)).
  const double p_high = std::sqrt(75.0 / 153.0);
  CHECK(p_high == Catch::Approx(0.70014004201400493).margin(1e-15));
  const WeightBank bank = init_kernels(spec, 1, 7, 0);
  REQUIRE(bank.bits.size() == 144);
  std::size_t high = 0;
  for (const std::uint8_t b : bank.bits) high += b;
  const double sigma = std::sqrt(144.0 * p_high * (1.0 - p_high));
  CHECK(std::fabs(static_cast<double>(high) - 144.0 * p_high) < 3.0 * sigma);
  CHECK(bank.thresholds == std::vector<float>(16, 0.0f));

  // Same seed reproduces; different layer ids decorrelate.
  CHECK(init_kernels(spec, 1, 7, 0).bits == bank.bits);
  CHECK(init_kernels(spec, 1, 7, 1).bits != bank.bits);

  ConvLayerSpec tiny = spec;
  tiny.maps = 2;  // fan sum 27 < alpha: probability above 1
  CHECK_THROWS_AS(init_kernels(tiny, 1, 7, 0), Error);

  const WeightBank real = init_kernels_real(spec, 1, 7, 0);
  CHECK(real.full_precision());
  for (const float v : real.real_weights) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("binary convolution equals brute force", "[convnet]") {
  for (std::uint32_t inst = 0; inst < 50; ++inst) {
    const std::size_t in_maps = 1 + inst % 4;
    const std::size_t h = 4 + (inst * 7) % 5, w = 4 + (inst * 11) % 5;
    const std::size_t k = 2 + inst % 2, J = 1 + (inst * 3) % 5;
    WeightBank bank;
    bank.out = static_cast<std::uint16_t>(J);
    bank.in = static_cast<std::uint16_t>(in_maps);
    bank.height = bank.width = static_cast<std::uint16_t>(k);
    bank.bits.resize(bank.weight_count());
    for (std::size_t i = 0; i < bank.bits.size(); ++i)
      bank.bits[i] = unit(static_cast<std::uint32_t>(i), inst) < 0.5;

    std::vector<float> input(in_maps * h * w);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const double u = unit(static_cast<std::uint32_t>(i), inst + 1000);
      input[i] = u < 0.25 ? -1.0f : (u < 0.5 ? 1.0f : 0.0f);
    }

    const std::size_t oh = h - k + 1, ow = w - k + 1;
    std::vector<float> out(J * oh * ow);
    binary_conv2d(input.data(), in_maps, h, w, build_scatter(bank),
                  out.data());

    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          float acc = 0.0f;
          for (std::size_t i = 0; i < in_maps; ++i)
            for (std::size_t r = 0; r < k; ++r)
              for (std::size_t c = 0; c < k; ++c)
                acc += input[(i * h + y + r) * w + x + c] *
                       bank.value(j, i, r, c);
          REQUIRE(out[(j * oh + y) * ow + x] == acc);
        }
  }
}

TEST_CASE("residual combination replicates, crops, and clamps", "[convnet]") {
  // Direct path: 3 channels of 2x2; source: 2 channels of 4x4 (crop offset 1).
  std::vector<float> direct(3 * 4, 0.0f);
  direct[0] = 1.0f;   // ch 0, (0,0)
  direct[4] = -1.0f;  // ch 1, (0,0)
  std::vector<float> src(2 * 16, 0.0f);
  src[5] = 1.0f;   // ch 0, (1,1) -> lands on (0,0) after the center crop
  src[21] = 1.0f;  // ch 1, (1,1)

  std::vector<float> out(3 * 4);
  residual_combine(direct.data(), 3, 2, 2,
                   {{src.data(), 2, 4, 4, false}}, out.data());
  CHECK(out[0] == 1.0f);   // 1 + 1 clamps to 1
  CHECK(out[4] == 0.0f);   // -1 + 1 cancels
  CHECK(out[8] == 1.0f);   // ch 2 replicates source ch 0 (2 % 2)

  residual_combine(direct.data(), 3, 2, 2,
                   {{src.data(), 2, 4, 4, true}}, out.data());
  CHECK(out[0] == 0.0f);   // 1 - 1
  CHECK(out[4] == -1.0f);  // -1 - 1 clamps to -1
  CHECK(out[8] == -1.0f);

  // No sources: pure sign pass-through.
  residual_combine(direct.data(), 3, 2, 2, {}, out.data());
  CHECK(out[0] == 1.0f);
  CHECK(out[1] == 0.0f);

  std::vector<float> small(2 * 1, 0.0f);
  CHECK_THROWS_AS(residual_combine(direct.data(), 3, 2, 2,
                                   {{small.data(), 2, 1, 1, false}},
                                   out.data()),
                  Error);
}

TEST_CASE("window averaging truncates odd borders", "[convnet]") {
  // 1 map of 3x5, window 2: one 2x2 output row of two windows.
  const std::vector<float> spikes{1, 1, 0, 1, 1,   //
                                  1, 0, 0, 0, 1,   //
                                  9, 9, 9, 9, 9};  // truncated row
  std::vector<float> drive(1 * 1 * 2);
  avg_pool_input(spikes.data(), 1, 3, 5, 2, drive.data());
  CHECK(drive[0] == 0.75f);
  CHECK(drive[1] == 0.25f);
}

TEST_CASE("low-pass activation closed form", "[convnet]") {
  // A spike on every one of 100 steps at dt 1 ms, tau 99.5 ms is the
  // geometric series (1 - d^100) / (1 - d) = 63.396987175883048, then
  // normalized by the 100 ms window.
  const std::vector<float> train(100, 1.0f);
  const double act = lpf_activation(train, 1e-3, 0.0995, 0.1);
  CHECK(act * 100.0 == Catch::Approx(63.396987175883048).margin(1e-9));

  // Single spike at the first step decays for the remaining 99.
  std::vector<float> one(100, 0.0f);
  one[0] = 1.0f;
  const double single = lpf_activation(one, 1e-3, 0.0995, 0.1);
  CHECK(single * 100.0 ==
        Catch::Approx(std::exp(-99.0 / 99.5)).margin(1e-9));
  CHECK(lpf_activation({}, 1e-3, 0.0995, 0.1) == 0.0);
  CHECK_THROWS_AS(lpf_activation(train, 1e-3, 0.0, 0.1), Error);
}

TEST_CASE("runner activations are deterministic and worker invariant", "[convnet]") {
  const NetworkTopology topo = [] {
    NetworkTopology t = parse_topology("6C3-4C3-2P-10FC");
    t.layers[0].alpha_init = 20.0;
    t.layers[1].alpha_init = 20.0;
    t.layers[1].residuals = {{-1, false}};
    return t;
  }();
  std::vector<WeightBank> banks{init_kernels(topo.layers[0], 1, 11, 0),
                                init_kernels(topo.layers[1], 6, 11, 1)};

  LabeledImageSet set;
  set.images = Tensor4<float>(6, 1, 14, 14);
  for (std::size_t i = 0; i < set.images.size(); ++i)
    set.images.data[i] =
        static_cast<float>(255.0 * unit(static_cast<std::uint32_t>(i), 2));
  set.labels = {0, 1, 2, 3, 4, 5};

  const NetworkRunner runner(topo, banks, 1, 14, 14, PolarityMode::Unsigned,
                             11);
  const ActivationSet a = extract_activations(runner, set, 1, {}, 1);
  const ActivationSet b = extract_activations(runner, set, 1, {}, 4);
  CHECK(a.values == b.values);
  CHECK(a.labels == b.labels);
  CHECK(a.dim == feature_length(topo, compute_geometry(topo, 1, 14, 14)));
  double total = 0.0;
  for (const float v : a.values) {
    CHECK(v >= 0.0f);
    total += v;
  }
  CHECK(total > 0.0);  // the network actually spiked

  // A different stream re-rolls the encoding.
  const ActivationSet c = extract_activations(runner, set, 2, {}, 1);
  CHECK(a.values != c.values);

  // Restricting features to layer 1 selects a suffix of the full vector.
  const ActivationSet tail = extract_activations(runner, set, 1, {1}, 1);
  const std::size_t l0 = 6 * 6 * 6;  // layer 0 pooled 6x6x6
  CHECK(tail.dim == a.dim - l0);
  for (std::size_t i = 0; i < tail.dim; ++i)
    CHECK(tail.row(0)[i] == a.row(0)[l0 + i]);
}

TEST_CASE("layer-wise training adapts thresholds deterministically", "[convnet]") {
  NetworkTopology topo = parse_topology("4C3-4C3-2P-10FC");
  topo.layers[0].alpha_init = 15.0;
  topo.layers[1].alpha_init = 15.0;

  LabeledImageSet set;
  set.images = Tensor4<float>(8, 1, 10, 10);
  for (std::size_t i = 0; i < set.images.size(); ++i)
    set.images.data[i] =
        static_cast<float>(255.0 * unit(static_cast<std::uint32_t>(i), 3));
  set.labels.assign(8, 0);

  TrainConvParams params;
  params.batch = 4;
  params.iterations = 3;
  params.stride = 2;
  params.seed = 5;
  params.encoder.max_rate = 200.0;
  params.encoder.duration = 0.025;

  auto make_banks = [&] {
    return std::vector<WeightBank>{init_kernels(topo.layers[0], 1, 5, 0),
                                   init_kernels(topo.layers[1], 4, 5, 1)};
  };

  // Training the second layer first violates the layer-wise order.
  {
    std::vector<WeightBank> banks = make_banks();
    banks[0].thresholds.clear();
    CHECK_THROWS_AS(
        train_conv_layer(topo, banks, 1, set, {0, 1, 2, 3}, params),
        Error);
  }

  std::vector<WeightBank> banks1 = make_banks();
  params.workers = 1;
  train_conv_layer(topo, banks1, 0, set, {0, 1, 2, 3, 4, 5, 6, 7}, params);
  std::vector<WeightBank> banks8 = make_banks();
  params.workers = 8;
  train_conv_layer(topo, banks8, 0, set, {0, 1, 2, 3, 4, 5, 6, 7}, params);
  CHECK(banks1[0].bits == banks8[0].bits);
  CHECK(banks1[0].thresholds == banks8[0].thresholds);

  double thresh = 0.0;
  for (const float t : banks1[0].thresholds) {
    CHECK(t >= 0.0f);
    thresh += t;
  }
  CHECK(thresh > 0.0);  // homeostasis raised at least one threshold
  for (const std::uint8_t b : banks1[0].bits) CHECK((b == 0 || b == 1));

  // Layer 1 trains on top of the frozen layer 0.
  train_conv_layer(topo, banks1, 1, set, {0, 1, 2, 3, 4, 5, 6, 7}, params);
  CHECK(banks1[1].bits.size() == 4 * 4 * 9);
}
