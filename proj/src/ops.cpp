#include "ablate/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ablate/error.hpp"

namespace ablate {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

std::int64_t pooled_extent(std::int64_t in, int window, int stride) {
  return (in - window) / stride + 1;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
                      int padding) {
  require(input.rank() == 4, "conv2d: input must be [N,C,H,W], got " + input.shape_str());
  require(kernel.rank() == 4, "conv2d: kernel must be [F,C,kh,kw], got " + kernel.shape_str());
  require(bias.rank() == 1 && bias.dim(0) == kernel.dim(0),
          "conv2d: bias must be [F] matching the kernel");
  require(input.dim(1) == kernel.dim(1),
          "conv2d: input channels " + std::to_string(input.dim(1)) + " != kernel channels " +
              std::to_string(kernel.dim(1)));
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(padding >= 0, "conv2d: padding must be >= 0");

  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::int64_t f = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const std::int64_t span_h = h + 2 * padding - kh, span_w = w + 2 * padding - kw;
  require(span_h >= 0 && span_w >= 0, "conv2d: kernel larger than padded input");
  require(span_h % stride == 0 && span_w % stride == 0,
          "conv2d: non-integer output extent (input " + input.shape_str() + ", kernel " +
              kernel.shape_str() + ", stride " + std::to_string(stride) + ", padding " +
              std::to_string(padding) + ")");
  const std::int64_t oh = span_h / stride + 1, ow = span_w / stride + 1;

  Tensor out({n, f, oh, ow});
  for (std::int64_t in_ = 0; in_ < n; ++in_)
    for (std::int64_t of = 0; of < f; ++of)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
          double acc = 0.0;
          // Fixed order: channels innermost, kernel rows, kernel columns.
          for (std::int64_t j = 0; j < kw; ++j) {
            const std::int64_t iw = x * stride - padding + j;
            if (iw < 0 || iw >= w) continue;
            for (std::int64_t i = 0; i < kh; ++i) {
              const std::int64_t ih = y * stride - padding + i;
              if (ih < 0 || ih >= h) continue;
              for (std::int64_t ic = 0; ic < c; ++ic)
                acc += static_cast<double>(input.at4(in_, ic, ih, iw)) *
                       static_cast<double>(kernel.at4(of, ic, i, j));
            }
          }
          out.at4(in_, of, y, x) = static_cast<float>(acc + static_cast<double>(bias[of]));
        }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int padding,
                            const Tensor& upstream) {
  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::int64_t f = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  require(upstream.rank() == 4 && upstream.dim(0) == n && upstream.dim(1) == f,
          "conv2d backward: upstream shape " + upstream.shape_str() + " does not match forward");
  const std::int64_t oh = upstream.dim(2), ow = upstream.dim(3);
  require(oh == (h + 2 * padding - kh) / stride + 1 && ow == (w + 2 * padding - kw) / stride + 1,
          "conv2d backward: upstream spatial extents do not match the cached forward");

  std::vector<double> dk(static_cast<std::size_t>(kernel.size()), 0.0);
  std::vector<double> db(static_cast<std::size_t>(f), 0.0);
  std::vector<double> dx(static_cast<std::size_t>(input.size()), 0.0);

  for (std::int64_t in_ = 0; in_ < n; ++in_)
    for (std::int64_t of = 0; of < f; ++of)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
          const double g = upstream.at4(in_, of, y, x);
          if (g == 0.0) continue;
          db[static_cast<std::size_t>(of)] += g;
          for (std::int64_t j = 0; j < kw; ++j) {
            const std::int64_t iw = x * stride - padding + j;
            if (iw < 0 || iw >= w) continue;
            for (std::int64_t i = 0; i < kh; ++i) {
              const std::int64_t ih = y * stride - padding + i;
              if (ih < 0 || ih >= h) continue;
              for (std::int64_t ic = 0; ic < c; ++ic) {
                dk[static_cast<std::size_t>(kernel.offset4(of, ic, i, j))] +=
                    g * static_cast<double>(input.at4(in_, ic, ih, iw));
                dx[static_cast<std::size_t>(input.offset4(in_, ic, ih, iw))] +=
                    g * static_cast<double>(kernel.at4(of, ic, i, j));
              }
            }
          }
        }

  Conv2dGrads grads{Tensor(kernel.shape), Tensor({f}), Tensor(input.shape)};
  for (std::int64_t i = 0; i < kernel.size(); ++i)
    grads.kernel_grad[i] = static_cast<float>(dk[static_cast<std::size_t>(i)]);
  for (std::int64_t i = 0; i < f; ++i) grads.bias_grad[i] = static_cast<float>(db[static_cast<std::size_t>(i)]);
  for (std::int64_t i = 0; i < input.size(); ++i)
    grads.input_grad[i] = static_cast<float>(dx[static_cast<std::size_t>(i)]);
  return grads;
}

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require(input.rank() == 2, "dense: input must be [N,D], got " + input.shape_str());
  require(weight.rank() == 2, "dense: weight must be [U,D], got " + weight.shape_str());
  require(input.dim(1) == weight.dim(1),
          "dense: inner dimensions disagree, input " + input.shape_str() + " vs weight " +
              weight.shape_str());
  require(bias.rank() == 1 && bias.dim(0) == weight.dim(0), "dense: bias must be [U]");

  const std::int64_t n = input.dim(0), d = input.dim(1), u = weight.dim(0);
  Tensor out({n, u});
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t o = 0; o < u; ++o) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < d; ++k)
        acc += static_cast<double>(input.at2(r, k)) * static_cast<double>(weight.at2(o, k));
      out.at2(r, o) = static_cast<float>(acc + static_cast<double>(bias[o]));
    }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weight, const Tensor& upstream) {
  const std::int64_t n = input.dim(0), d = input.dim(1), u = weight.dim(0);
  require(upstream.rank() == 2 && upstream.dim(0) == n && upstream.dim(1) == u,
          "dense backward: upstream shape " + upstream.shape_str() + " does not match forward");

  DenseGrads grads{Tensor(weight.shape), Tensor({u}), Tensor(input.shape)};
  for (std::int64_t o = 0; o < u; ++o) {
    double db = 0.0;
    for (std::int64_t r = 0; r < n; ++r) db += static_cast<double>(upstream.at2(r, o));
    grads.bias_grad[o] = static_cast<float>(db);
    for (std::int64_t k = 0; k < d; ++k) {
      double dw = 0.0;
      for (std::int64_t r = 0; r < n; ++r)
        dw += static_cast<double>(upstream.at2(r, o)) * static_cast<double>(input.at2(r, k));
      grads.weight_grad.at2(o, k) = static_cast<float>(dw);
    }
  }
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t k = 0; k < d; ++k) {
      double dx = 0.0;
      for (std::int64_t o = 0; o < u; ++o)
        dx += static_cast<double>(upstream.at2(r, o)) * static_cast<double>(weight.at2(o, k));
      grads.input_grad.at2(r, k) = static_cast<float>(dx);
    }
  return grads;
}

MaxPoolOut maxpool_forward(const Tensor& input, int window, int stride) {
  require(input.rank() == 4, "maxpool: input must be [N,C,H,W], got " + input.shape_str());
  require(window >= 1 && stride >= 1, "maxpool: window and stride must be >= 1");
  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(window <= h && window <= w,
          "maxpool: window " + std::to_string(window) + " larger than input " + input.shape_str());
  const std::int64_t oh = pooled_extent(h, window, stride), ow = pooled_extent(w, window, stride);

  MaxPoolOut result{Tensor({n, c, oh, ow}), {}};
  result.argmax.resize(static_cast<std::size_t>(result.output.size()));
  std::int64_t cursor = 0;
  for (std::int64_t in_ = 0; in_ < n; ++in_)
    for (std::int64_t ic = 0; ic < c; ++ic)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
          float best = -std::numeric_limits<float>::infinity();
          std::int64_t best_idx = -1;
          // Window scanned in flat order; strict > keeps the lowest flat
          // index on ties.
          for (int i = 0; i < window; ++i)
            for (int j = 0; j < window; ++j) {
              const std::int64_t idx = input.offset4(in_, ic, y * stride + i, x * stride + j);
              if (input[idx] > best) {
                best = input[idx];
                best_idx = idx;
              }
            }
          result.output[cursor] = best;
          result.argmax[static_cast<std::size_t>(cursor)] = best_idx;
          ++cursor;
        }
  return result;
}

Tensor maxpool_backward(const Tensor& input, const MaxPoolOut& cached, const Tensor& upstream) {
  require(cached.output.same_shape(upstream),
          "maxpool backward: upstream shape " + upstream.shape_str() +
              " does not match the cached forward output " + cached.output.shape_str());
  Tensor dinput(input.shape);
  for (std::int64_t i = 0; i < upstream.size(); ++i)
    dinput[cached.argmax[static_cast<std::size_t>(i)]] += upstream[i];
  return dinput;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape);
  for (std::int64_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.f ? input[i] : 0.f;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
  require(input.same_shape(upstream), "relu backward: shape mismatch");
  Tensor out(input.shape);
  for (std::int64_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.f ? upstream[i] : 0.f;
  return out;
}

DropoutOut dropout_train(const Tensor& input, float rate, Rng& rng) {
  require(rate >= 0.f && rate < 1.f, "dropout: rate must be in [0, 1)");
  DropoutOut result{Tensor(input.shape), {}, rate};
  result.kept.resize(static_cast<std::size_t>(input.size()));
  const float scale = 1.f / (1.f - rate);
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const bool keep = rng.next_unit() >= static_cast<double>(rate);
    result.kept[static_cast<std::size_t>(i)] = keep ? 1 : 0;
    result.output[i] = keep ? input[i] * scale : 0.f;
  }
  return result;
}

Tensor dropout_backward(const DropoutOut& cached, const Tensor& upstream) {
  require(cached.output.same_shape(upstream), "dropout backward: shape mismatch");
  Tensor out(upstream.shape);
  const float scale = 1.f / (1.f - cached.rate);
  for (std::int64_t i = 0; i < upstream.size(); ++i)
    out[i] = cached.kept[static_cast<std::size_t>(i)] ? upstream[i] * scale : 0.f;
  return out;
}

Tensor softmax(const Tensor& logits) {
  require(logits.rank() == 2, "softmax: input must be [N,C], got " + logits.shape_str());
  const std::int64_t n = logits.dim(0), c = logits.dim(1);
  Tensor out(logits.shape);
  for (std::int64_t r = 0; r < n; ++r) {
    float mx = logits.at2(r, 0);
    for (std::int64_t k = 1; k < c; ++k) mx = std::max(mx, logits.at2(r, k));
    double sum = 0.0;
    for (std::int64_t k = 0; k < c; ++k) {
      const double e = std::exp(static_cast<double>(logits.at2(r, k)) - static_cast<double>(mx));
      out.at2(r, k) = static_cast<float>(e);
      sum += e;
    }
    for (std::int64_t k = 0; k < c; ++k)
      out.at2(r, k) = static_cast<float>(static_cast<double>(out.at2(r, k)) / sum);
  }
  return out;
}

SoftmaxXentOut softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require(logits.rank() == 2, "cross-entropy: logits must be [N,C], got " + logits.shape_str());
  const std::int64_t n = logits.dim(0), c = logits.dim(1);
  require(static_cast<std::int64_t>(labels.size()) == n,
          "cross-entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
              " rows");
  for (int label : labels)
    require(label >= 0 && label < c, "cross-entropy: label " + std::to_string(label) +
                                         " out of range [0, " + std::to_string(c) + ")");

  SoftmaxXentOut result{0.0, Tensor(logits.shape)};
  double total = 0.0;
  for (std::int64_t r = 0; r < n; ++r) {
    double mx = logits.at2(r, 0);
    for (std::int64_t k = 1; k < c; ++k) mx = std::max(mx, static_cast<double>(logits.at2(r, k)));
    double sum = 0.0;
    for (std::int64_t k = 0; k < c; ++k) sum += std::exp(static_cast<double>(logits.at2(r, k)) - mx);
    const double log_sum = std::log(sum);
    total += log_sum - (static_cast<double>(logits.at2(r, labels[static_cast<std::size_t>(r)])) - mx);
    for (std::int64_t k = 0; k < c; ++k) {
      const double p = std::exp(static_cast<double>(logits.at2(r, k)) - mx) / sum;
      const double y = (k == labels[static_cast<std::size_t>(r)]) ? 1.0 : 0.0;
      result.logit_grad.at2(r, k) = static_cast<float>((p - y) / static_cast<double>(n));
    }
  }
  result.loss = total / static_cast<double>(n);
  return result;
}

Tensor flatten(const Tensor& input) {
  require(input.rank() >= 2, "flatten: input must have a leading batch dimension");
  std::int64_t rest = 1;
  for (int i = 1; i < input.rank(); ++i) rest *= input.dim(i);
  return Tensor({input.dim(0), rest}, input.data);
}

Tensor reshape_like(const Tensor& flat, const std::vector<std::int64_t>& extents) {
  require(shape_count(extents) == flat.size(), "reshape: element count mismatch");
  return Tensor(extents, flat.data);
}

void sgd_update(Tensor& param, const Tensor& grad, float learning_rate, float momentum,
                Tensor& velocity) {
  require(param.same_shape(grad) && param.same_shape(velocity),
          "sgd_update: param/grad/velocity shapes disagree");
  require(learning_rate >= 0.f, "sgd_update: learning_rate must be >= 0");
  require(momentum >= 0.f && momentum < 1.f, "sgd_update: momentum must be in [0, 1)");
  for (std::int64_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] - learning_rate * grad[i];
    param[i] += velocity[i];
  }
}

}  // namespace ablate
