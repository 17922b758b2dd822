#include "ablate/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ablate/error.hpp"
#include "ablate/ops.hpp"
#include "ablate/rng.hpp"

namespace ablate {

namespace {

struct LayerCache {
  Tensor input;  // conv2d, dense, relu
  MaxPoolOut pool;
  DropoutOut dropout;
  std::vector<std::int64_t> pre_flatten_shape;
};

Tensor forward_cached(const Network& net, const Tensor& batch, Rng& rng,
                      std::vector<LayerCache>& caches, std::size_t stop) {
  Tensor current = batch;
  for (std::size_t i = 0; i < stop; ++i) {
    const LayerSpec& spec = net.layers[i];
    LayerCache& cache = caches[i];
    switch (spec.kind) {
      case LayerKind::conv2d: {
        cache.input = current;
        const LayerParams& p = *net.params[i];
        current = conv2d_forward(current, p.weights, p.biases, spec.stride, spec.padding);
        break;
      }
      case LayerKind::dense: {
        cache.input = current;
        const LayerParams& p = *net.params[i];
        current = dense_forward(current, p.weights, p.biases);
        break;
      }
      case LayerKind::relu:
        cache.input = current;
        current = relu(current);
        break;
      case LayerKind::maxpool:
        cache.input = current;
        cache.pool = maxpool_forward(current, spec.window, spec.pool_stride);
        current = cache.pool.output;
        break;
      case LayerKind::flatten:
        cache.pre_flatten_shape = current.shape;
        current = flatten(current);
        break;
      case LayerKind::dropout:
        cache.dropout = dropout_train(current, spec.rate, rng);
        current = cache.dropout.output;
        break;
      case LayerKind::softmax:
        throw ValidationError("training supports softmax only as the final layer");
    }
  }
  return current;
}

void backward_cached(const Network& net, const std::vector<LayerCache>& caches, std::size_t stop,
                     const Tensor& logit_grad, std::vector<std::optional<LayerParams>>& grads) {
  Tensor upstream = logit_grad;
  for (std::size_t step = stop; step > 0; --step) {
    const std::size_t i = step - 1;
    const LayerSpec& spec = net.layers[i];
    const LayerCache& cache = caches[i];
    switch (spec.kind) {
      case LayerKind::conv2d: {
        const LayerParams& p = *net.params[i];
        Conv2dGrads g = conv2d_backward(cache.input, p.weights, spec.stride, spec.padding, upstream);
        grads[i] = LayerParams{std::move(g.kernel_grad), std::move(g.bias_grad)};
        upstream = std::move(g.input_grad);
        break;
      }
      case LayerKind::dense: {
        const LayerParams& p = *net.params[i];
        DenseGrads g = dense_backward(cache.input, p.weights, upstream);
        grads[i] = LayerParams{std::move(g.weight_grad), std::move(g.bias_grad)};
        upstream = std::move(g.input_grad);
        break;
      }
      case LayerKind::relu:
        upstream = relu_backward(cache.input, upstream);
        break;
      case LayerKind::maxpool:
        upstream = maxpool_backward(cache.input, cache.pool, upstream);
        break;
      case LayerKind::flatten:
        upstream = reshape_like(upstream, cache.pre_flatten_shape);
        break;
      case LayerKind::dropout:
        upstream = dropout_backward(cache.dropout, upstream);
        break;
      case LayerKind::softmax:
        break;  // unreachable: excluded from the training stack
    }
  }
}

}  // namespace

std::vector<EpochRecord> train(Network& net, const Dataset& data, const TrainConfig& cfg) {
  if (data.count() < 1) throw ValidationError("train: empty dataset");
  if (cfg.epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (cfg.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0.f)) throw ValidationError("train: learning_rate must be >= 0");
  if (!(cfg.momentum >= 0.f && cfg.momentum < 1.f))
    throw ValidationError("train: momentum must be in [0, 1)");
  for (int label : data.labels)
    if (label < 0 || label >= net.class_count)
      throw ValidationError("train: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(net.class_count) + ")");

  // The loss folds the softmax in, so training stops before a trailing
  // softmax layer.
  std::size_t stop = net.layers.size();
  if (stop > 0 && net.layers[stop - 1].kind == LayerKind::softmax) --stop;
  for (std::size_t i = 0; i < stop; ++i)
    if (net.layers[i].kind == LayerKind::softmax)
      throw ValidationError("training supports softmax only as the final layer");

  std::vector<std::optional<LayerParams>> velocity(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.params[i])
      velocity[i] = LayerParams{Tensor(net.params[i]->weights.shape),
                                Tensor(net.params[i]->biases.shape)};

  const std::int64_t n = data.count();
  const std::int64_t c = data.images.dim(1), h = data.images.dim(2), w = data.images.dim(3);
  const std::int64_t pixels = c * h * w;

  Rng rng(cfg.seed);
  std::vector<EpochRecord> history;
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;

    for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
      const std::int64_t rows = std::min<std::int64_t>(cfg.batch_size, n - start);
      Tensor batch({rows, c, h, w});
      std::vector<int> labels(static_cast<std::size_t>(rows));
      for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t src = order[static_cast<std::size_t>(start + r)];
        std::copy_n(data.images.data.begin() + src * pixels, pixels,
                    batch.data.begin() + r * pixels);
        labels[static_cast<std::size_t>(r)] = data.labels[static_cast<std::size_t>(src)];
      }

      std::vector<LayerCache> caches(net.layers.size());
      const Tensor logits = forward_cached(net, batch, rng, caches, stop);
      const SoftmaxXentOut xent = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(xent.loss))
        throw RuntimeError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch offset " + std::to_string(start));
      loss_sum += xent.loss * static_cast<double>(rows);

      std::vector<std::optional<LayerParams>> grads(net.layers.size());
      backward_cached(net, caches, stop, xent.logit_grad, grads);
      for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.params[i]) continue;
        sgd_update(net.params[i]->weights, grads[i]->weights, cfg.learning_rate, cfg.momentum,
                   velocity[i]->weights);
        sgd_update(net.params[i]->biases, grads[i]->biases, cfg.learning_rate, cfg.momentum,
                   velocity[i]->biases);
      }
    }

    history.push_back(
        {epoch, loss_sum / static_cast<double>(n), evaluate_topk(net, data, 1)});
  }
  return history;
}

}  // namespace ablate
