#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "taildep/extremes.hpp"
#include "taildep/rng.hpp"
#include "taildep/types.hpp"

namespace taildep {

// Channel-last tensor: index (y, x, ch) flattens to (y*w + x)*c + ch, so the
// flat buffer is already in Flatten order.
struct Tensor3 {
  std::size_t h = 0, w = 0, c = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(std::size_t h_, std::size_t w_, std::size_t c_)
      : h(h_), w(w_), c(c_), v(h_ * w_ * c_, 0.0) {}

  double& at(std::size_t y, std::size_t x, std::size_t ch) {
    return v[(y * w + x) * c + ch];
  }
  double at(std::size_t y, std::size_t x, std::size_t ch) const {
    return v[(y * w + x) * c + ch];
  }
};

// chi plane becomes channel 0, chibar channel 1
Tensor3 tensor3_from_dependence(const DependenceTensor& t);

enum class LayerKind : std::uint8_t {
  Conv2D = 1,
  MaxPool2D = 2,
  Flatten = 3,
  Dense = 4,
};

enum class Activation : std::uint8_t {
  None = 0,
  ReLU = 1,
  Softmax = 2,
};

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t units = 0;  // feature maps (conv) or output units (dense)
  std::size_t kh = 0, kw = 0;
  std::size_t sh = 1, sw = 1;
  Activation act = Activation::None;
};

struct Shape3 {
  std::size_t h = 0, w = 0, c = 0;
  std::size_t count() const { return h * w * c; }
  bool operator==(const Shape3&) const = default;
};

struct LayerParams {
  std::vector<double> w;
  std::vector<double> b;
};

struct NetworkState {
  Shape3 input;
  std::size_t classes = 2;
  std::uint64_t seed = 0;
  std::vector<LayerSpec> specs;
  std::vector<LayerParams> params;
  std::vector<LayerParams> m;  // Adam first moments
  std::vector<LayerParams> v;  // Adam second moments
  std::uint64_t step = 0;

  std::size_t param_count() const;
};

inline constexpr std::size_t kDefaultDense1 = 1024;
inline constexpr std::size_t kDefaultDense2 = 512;

// The classifier stack: three convolutions with two max-pools, then two
// hidden dense layers and a softmax head.
std::vector<LayerSpec> classifier_chain(std::size_t classes,
                                        std::size_t dense1 = kDefaultDense1,
                                        std::size_t dense2 = kDefaultDense2);

// Output shape after every layer; throws ShapeError naming the first layer
// whose valid-padding window no longer fits.
std::vector<Shape3> shape_chain(Shape3 input, const std::vector<LayerSpec>& specs);

// He-scaled normal weights, zero biases, zeroed Adam moments.
NetworkState build_network_with(Shape3 input, std::vector<LayerSpec> specs,
                                std::size_t classes, std::uint64_t seed);
NetworkState build_network(std::size_t d, std::size_t classes, std::uint64_t seed,
                           std::size_t dense1 = kDefaultDense1,
                           std::size_t dense2 = kDefaultDense2);

struct ForwardTrace {
  std::vector<double> input;
  std::vector<std::vector<double>> act;               // post-activation per layer
  std::vector<std::vector<std::size_t>> pool_argmax;  // flat input index per pool output
};

std::vector<double> forward(const NetworkState& net, const Tensor3& x);
const std::vector<double>& forward_with_trace(const NetworkState& net, const Tensor3& x,
                                              ForwardTrace& trace);

double cross_entropy(const std::vector<double>& probs, std::size_t label);
double l2_penalty(const NetworkState& net, double l2);
double loss_value(const std::vector<double>& probs, std::size_t label,
                  const NetworkState& net, double l2);

struct Gradients {
  std::vector<LayerParams> g;
  void match(const NetworkState& net);  // allocate/zero to the network's shapes
  void add(const Gradients& other);
  void scale(double s);
};

// Accumulates (+=) the gradient of [cross-entropy + l2 penalty] for one
// sample into grads; grads must already match the network.
void backward(const NetworkState& net, const ForwardTrace& trace, std::size_t label,
              double l2, Gradients& grads);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

void adam_step(NetworkState& net, const Gradients& grads, double learning_rate);

struct TrainConfig {
  double learning_rate = 1e-4;
  double l2 = 5e-5;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 3;
  bool early_stop = true;
  int threads = 1;

  // Seed the early-stop tracker when resuming, so the patience window spans
  // the interruption exactly as it would in one uninterrupted run.
  bool has_prior_best = false;
  double prior_best_val = 0.0;
  std::size_t prior_best_epoch = 0;

  void validate() const;
};

// Stop once `patience` consecutive epochs fail to improve the best loss.
struct EarlyStop {
  std::size_t patience = 3;
  double best = 0.0;
  std::size_t best_epoch = 0;
  bool seen = false;

  // returns true when training should stop after this epoch
  bool observe(std::size_t epoch, double val_loss);
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  NetworkState best;
  NetworkState last;
  std::vector<EpochStats> history;
  // Epoch (1-based, counted from the start of training) whose state `best`
  // holds. Stays 0 when a resumed run never beats the seeded prior best; the
  // previously saved best state remains the winner then.
  std::size_t best_epoch = 0;
};

// Mini-batch Adam training with per-epoch validation. Gradient accumulation
// runs in a fixed number of slots reduced in a fixed order, so the result is
// bitwise identical for any cfg.threads. A nonzero net.step resumes mid-run:
// completed epochs are inferred from it and the same shuffles replay.
TrainResult train(NetworkState net, const std::vector<Tensor3>& train_x,
                  const std::vector<std::size_t>& train_y,
                  const std::vector<Tensor3>& val_x,
                  const std::vector<std::size_t>& val_y, const TrainConfig& cfg,
                  rng::Philox stream);

// argmax with ties resolved toward the lower class index
std::pair<std::size_t, std::vector<double>> predict_probs(const NetworkState& net,
                                                          const Tensor3& x);
std::pair<DependenceClass, std::vector<double>> predict(const NetworkState& net,
                                                        const DependenceTensor& t);

}  // namespace taildep
