#ifndef RESTOCNET_CLASSIFIER_HPP
#define RESTOCNET_CLASSIFIER_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "restocnet/activation_io.hpp"
#include "restocnet/checkpoint.hpp"
#include "restocnet/error.hpp"
#include "restocnet/rng.hpp"

namespace restocnet {

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Fully-connected ReLU network trained with softmax cross-entropy and Adam.
/// Hidden activations are dropped out during training (inverted scaling).
template <typename Scalar = float>
class Mlp {
 public:
  struct Layer {
    RowMatrix<Scalar> w;  // out x in
    RowVector<Scalar> b;  // out
    RowMatrix<Scalar> mw, vw;  // Adam moments
    RowVector<Scalar> mb, vb;
  };

  Mlp(std::size_t input_dim, const std::vector<std::size_t>& widths,
      std::uint64_t seed) {
    require(!widths.empty(), ErrorClass::Config,
            "classifier needs at least an output layer");
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < widths.size(); ++l) {
      const std::size_t out = widths[l];
      require(in > 0 && out > 0, ErrorClass::Config,
              "classifier layer widths must be positive");
      Layer layer;
      layer.w.resize(out, in);
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      for (std::size_t r = 0; r < out; ++r)
        for (std::size_t c = 0; c < in; ++c)
          layer.w(r, c) = static_cast<Scalar>(
              (2.0 * rng::uniform_at(seed, rng::Phase::ClassifierInit,
                                     static_cast<std::uint32_t>(l), 0, 0,
                                     r * in + c) -
               1.0) *
              limit);
      layer.b = RowVector<Scalar>::Zero(static_cast<Eigen::Index>(out));
      layer.mw = RowMatrix<Scalar>::Zero(layer.w.rows(), layer.w.cols());
      layer.vw = RowMatrix<Scalar>::Zero(layer.w.rows(), layer.w.cols());
      layer.mb = RowVector<Scalar>::Zero(layer.b.cols());
      layer.vb = RowVector<Scalar>::Zero(layer.b.cols());
      layers_.push_back(std::move(layer));
      in = out;
    }
  }

  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const {
    return static_cast<std::size_t>(layers_.front().w.cols());
  }
  std::size_t output_dim() const {
    return static_cast<std::size_t>(layers_.back().w.rows());
  }
  Layer& layer(std::size_t l) { return layers_[l]; }
  const Layer& layer(std::size_t l) const { return layers_[l]; }

  /// Logits for a batch (rows = samples). With `cache` set, stores the
  /// pre-dropout activations needed by backward().
  RowMatrix<Scalar> forward(const RowMatrix<Scalar>& x,
                            std::vector<RowMatrix<Scalar>>* cache = nullptr,
                            const std::vector<RowMatrix<Scalar>>* masks =
                                nullptr) const {
    require(static_cast<std::size_t>(x.cols()) == input_dim(),
            ErrorClass::Dimension, "classifier input width mismatch");
    RowMatrix<Scalar> a = x;
    if (cache) {
      cache->clear();
      cache->push_back(a);
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      RowMatrix<Scalar> z =
          (a * layers_[l].w.transpose()).rowwise() + layers_[l].b;
      if (l + 1 < layers_.size()) {
        a = z.cwiseMax(Scalar(0));
        if (masks) a = a.cwiseProduct((*masks)[l]);
      } else {
        a = std::move(z);
      }
      if (cache) cache->push_back(a);
    }
    return a;
  }

  /// Mean softmax cross-entropy and parameter gradients for one batch.
  /// `cache` must come from forward() on the same inputs and masks.
  Scalar backward(const std::vector<RowMatrix<Scalar>>& cache,
                  const std::vector<int>& labels,
                  const std::vector<RowMatrix<Scalar>>* masks,
                  std::vector<RowMatrix<Scalar>>& grad_w,
                  std::vector<RowVector<Scalar>>& grad_b) const {
    const RowMatrix<Scalar>& logits = cache.back();
    const Eigen::Index batch = logits.rows();
    require(static_cast<std::size_t>(batch) == labels.size(),
            ErrorClass::Dimension, "label count does not match batch");

    // Log-sum-exp stabilized softmax and loss.
    RowMatrix<Scalar> probs = logits;
    Scalar loss = 0;
    for (Eigen::Index r = 0; r < batch; ++r) {
      const Scalar peak = probs.row(r).maxCoeff();
      probs.row(r) = (probs.row(r).array() - peak).exp();
      const Scalar norm = probs.row(r).sum();
      probs.row(r) /= norm;
      const int y = labels[static_cast<std::size_t>(r)];
      require(y >= 0 && y < logits.cols(), ErrorClass::State,
              "label outside the output range");
      loss -= std::log(probs(r, y));
    }
    loss /= static_cast<Scalar>(batch);

    grad_w.assign(layers_.size(), {});
    grad_b.assign(layers_.size(), {});
    RowMatrix<Scalar> delta = probs;
    for (Eigen::Index r = 0; r < batch; ++r)
      delta(r, labels[static_cast<std::size_t>(r)]) -= Scalar(1);
    delta /= static_cast<Scalar>(batch);

    for (std::size_t l = layers_.size(); l-- > 0;) {
      grad_w[l] = delta.transpose() * cache[l];
      grad_b[l] = delta.colwise().sum();
      if (l == 0) break;
      RowMatrix<Scalar> upstream = delta * layers_[l].w;
      if (masks) upstream = upstream.cwiseProduct((*masks)[l - 1]);
      // cache[l] already carries the mask; positive entries mark live ReLUs.
      delta = upstream.cwiseProduct(
          (cache[l].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
    return loss;
  }

  /// One Adam update with bias correction; `t` counts updates from 1.
  void adam_step(const std::vector<RowMatrix<Scalar>>& grad_w,
                 const std::vector<RowVector<Scalar>>& grad_b, long t,
                 Scalar lr, Scalar beta1, Scalar beta2, Scalar eps) {
    require(t >= 1, ErrorClass::State, "Adam step counter starts at 1");
    const Scalar bc1 = Scalar(1) - std::pow(beta1, Scalar(t));
    const Scalar bc2 = Scalar(1) - std::pow(beta2, Scalar(t));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Layer& layer = layers_[l];
      layer.mw = beta1 * layer.mw + (Scalar(1) - beta1) * grad_w[l];
      layer.vw =
          beta2 * layer.vw + (Scalar(1) - beta2) * grad_w[l].cwiseProduct(
                                                       grad_w[l]);
      layer.w -= lr * (layer.mw / bc1)
                          .cwiseQuotient(((layer.vw / bc2).cwiseSqrt().array() +
                                          eps)
                                             .matrix());
      layer.mb = beta1 * layer.mb + (Scalar(1) - beta1) * grad_b[l];
      layer.vb =
          beta2 * layer.vb + (Scalar(1) - beta2) * grad_b[l].cwiseProduct(
                                                       grad_b[l]);
      layer.b -= lr * (layer.mb / bc1)
                          .cwiseQuotient(((layer.vb / bc2).cwiseSqrt().array() +
                                          eps)
                                             .matrix());
    }
  }

  std::vector<ClassifierLayer> to_checkpoint() const {
    std::vector<ClassifierLayer> out;
    for (const Layer& layer : layers_) {
      ClassifierLayer cl;
      cl.in = static_cast<std::uint32_t>(layer.w.cols());
      cl.out = static_cast<std::uint32_t>(layer.w.rows());
      cl.weights.resize(static_cast<std::size_t>(layer.w.size()));
      cl.bias.resize(static_cast<std::size_t>(layer.b.size()));
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
          cl.weights[static_cast<std::size_t>(r * layer.w.cols() + c)] =
              static_cast<float>(layer.w(r, c));
      for (Eigen::Index c = 0; c < layer.b.cols(); ++c)
        cl.bias[static_cast<std::size_t>(c)] = static_cast<float>(layer.b(c));
      out.push_back(std::move(cl));
    }
    return out;
  }

  void load_checkpoint(const std::vector<ClassifierLayer>& layers) {
    require(layers.size() == layers_.size(), ErrorClass::Dimension,
            "classifier depth mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Layer& dst = layers_[l];
      const ClassifierLayer& src = layers[l];
      require(src.in == static_cast<std::uint32_t>(dst.w.cols()) &&
                  src.out == static_cast<std::uint32_t>(dst.w.rows()),
              ErrorClass::Dimension, "classifier layer shape mismatch");
      for (Eigen::Index r = 0; r < dst.w.rows(); ++r)
        for (Eigen::Index c = 0; c < dst.w.cols(); ++c)
          dst.w(r, c) = static_cast<Scalar>(
              src.weights[static_cast<std::size_t>(r * dst.w.cols() + c)]);
      for (Eigen::Index c = 0; c < dst.b.cols(); ++c)
        dst.b(c) = static_cast<Scalar>(src.bias[static_cast<std::size_t>(c)]);
    }
  }

 private:
  std::vector<Layer> layers_;
};

struct TrainClassifierParams {
  std::size_t epochs = 100;
  std::size_t batch = 256;
  double lr = 1.5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double dropout = 0.5;  // drop probability on hidden activations
  std::uint64_t seed = 0;
  std::string log_path;  // optional per-epoch CSV: epoch,loss,accuracy
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Keyed in-place Fisher-Yates shuffle; identical for any worker count.
inline void shuffle_indices(std::vector<std::size_t>& order,
                            std::uint64_t seed, std::uint32_t epoch) {
  for (std::size_t k = order.size(); k > 1; --k) {
    const rng::Block block =
        rng::draw(seed, rng::Phase::ClassifierShuffle, 0, epoch,
                  static_cast<std::uint32_t>(k - 1), 0);
    const std::uint64_t r = rng::bounded(block.u64(0, 1), k);
    std::swap(order[k - 1], order[r]);
  }
}

template <typename Scalar>
double classifier_accuracy(const Mlp<Scalar>& net, const ActivationSet& data) {
  require(data.dim == net.input_dim(), ErrorClass::Dimension,
          "activation width does not match the classifier");
  std::size_t hits = 0;
  const std::size_t chunk = 1024;
  for (std::size_t base = 0; base < data.count; base += chunk) {
    const std::size_t rows = std::min(chunk, data.count - base);
    RowMatrix<Scalar> x(rows, data.dim);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < data.dim; ++c)
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            static_cast<Scalar>(data.row(base + r)[c]);
    const RowMatrix<Scalar> logits = net.forward(x);
    for (std::size_t r = 0; r < rows; ++r) {
      Eigen::Index best;
      logits.row(static_cast<Eigen::Index>(r)).maxCoeff(&best);
      if (static_cast<int>(best) == data.labels[base + r]) ++hits;
    }
  }
  return data.count == 0
             ? 0.0
             : static_cast<double>(hits) / static_cast<double>(data.count);
}

/// Mini-batch Adam training over activation features. Shuffling and dropout
/// are keyed by (epoch, position), so runs are reproducible bit-for-bit.
/// Returns per-epoch stats (training loss, eval accuracy when `eval` given).
template <typename Scalar>
std::vector<EpochStats> train_classifier(Mlp<Scalar>& net,
                                         const ActivationSet& train,
                                         const ActivationSet* eval,
                                         const TrainClassifierParams& params) {
  require(train.count > 0, ErrorClass::State, "empty training set");
  require(train.dim == net.input_dim(), ErrorClass::Dimension,
          "activation width does not match the classifier");
  require(params.dropout >= 0.0 && params.dropout < 1.0, ErrorClass::Config,
          "dropout must lie in [0, 1)");
  require(params.batch >= 1, ErrorClass::Config, "batch size must be >= 1");

  std::ofstream log;
  if (!params.log_path.empty()) {
    log.open(params.log_path, std::ios::trunc);
    require(log.good(), ErrorClass::Io,
            "cannot write log: " + params.log_path);
    log << "epoch,loss,accuracy\n";
  }

  std::vector<std::size_t> order(train.count);
  for (std::size_t i = 0; i < train.count; ++i) order[i] = i;

  const Scalar keep = static_cast<Scalar>(1.0 - params.dropout);
  std::vector<EpochStats> history;
  long step = 0;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    shuffle_indices(order, params.seed, static_cast<std::uint32_t>(epoch));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t base = 0; base < train.count; base += params.batch) {
      const std::size_t rows = std::min(params.batch, train.count - base);
      RowMatrix<Scalar> x(rows, train.dim);
      std::vector<int> labels(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t src = order[base + r];
        labels[r] = train.labels[src];
        for (std::size_t c = 0; c < train.dim; ++c)
          x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              static_cast<Scalar>(train.row(src)[c]);
      }

      // Inverted dropout masks for every hidden layer, keyed by the sample's
      // dataset index so masks are independent of shuffling order.
      std::vector<RowMatrix<Scalar>> masks;
      const bool use_dropout = params.dropout > 0.0 && net.depth() > 1;
      if (use_dropout) {
        for (std::size_t l = 0; l + 1 < net.depth(); ++l) {
          const std::size_t width =
              static_cast<std::size_t>(net.layer(l).w.rows());
          RowMatrix<Scalar> mask(rows, width);
          for (std::size_t r = 0; r < rows; ++r) {
            const std::uint32_t sample =
                static_cast<std::uint32_t>(order[base + r]);
            for (std::size_t c = 0; c < width; ++c) {
              const double u = rng::uniform_at(
                  params.seed, rng::Phase::ClassifierDropout,
                  static_cast<std::uint32_t>(l),
                  static_cast<std::uint32_t>(epoch), sample, c);
              mask(static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(c)) =
                  u < params.dropout ? Scalar(0) : Scalar(1) / keep;
            }
          }
          masks.push_back(std::move(mask));
        }
      }

      std::vector<RowMatrix<Scalar>> cache;
      net.forward(x, &cache, use_dropout ? &masks : nullptr);
      std::vector<RowMatrix<Scalar>> grad_w;
      std::vector<RowVector<Scalar>> grad_b;
      const Scalar loss = net.backward(
          cache, labels, use_dropout ? &masks : nullptr, grad_w, grad_b);
      net.adam_step(grad_w, grad_b, ++step, static_cast<Scalar>(params.lr),
                    static_cast<Scalar>(params.beta1),
                    static_cast<Scalar>(params.beta2),
                    static_cast<Scalar>(params.eps));
      epoch_loss += static_cast<double>(loss);
      ++batches;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / static_cast<double>(batches);
    stats.accuracy = eval ? classifier_accuracy(net, *eval) : 0.0;
    history.push_back(stats);
    if (log.is_open()) {
      log << stats.epoch << "," << stats.loss << "," << stats.accuracy
          << "\n";
      log.flush();
    }
  }
  return history;
}

}  // namespace restocnet

#endif  // RESTOCNET_CLASSIFIER_HPP
