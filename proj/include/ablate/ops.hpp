#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ablate/rng.hpp"
#include "ablate/tensor.hpp"

namespace ablate {

// Layer-level forward/backward kernels. Forwards are pure; each backward
// takes the inputs its forward cached. Reductions run in a fixed order
// (input channel innermost, then kernel rows, then kernel columns) with
// double accumulators, so serial results are bit-reproducible.

// input [N,C,H,W], kernel [F,C,kh,kw], bias [F] -> [N,F,H',W']
// Cross-correlation; zero padding; H' = (H + 2*padding - kh)/stride + 1
// must be a positive integer.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                      int stride, int padding);

struct Conv2dGrads {
  Tensor kernel_grad, bias_grad, input_grad;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int padding,
                            const Tensor& upstream);

// input [N,D], weight [U,D], bias [U] -> [N,U]
Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct DenseGrads {
  Tensor weight_grad, bias_grad, input_grad;
};
DenseGrads dense_backward(const Tensor& input, const Tensor& weight, const Tensor& upstream);

// Per-window maximum over [N,C,H,W]; a non-dividing stride floors the
// output extent. Ties go to the lowest flat index, which fixes the
// backward routing.
struct MaxPoolOut {
  Tensor output;
  std::vector<std::int64_t> argmax;  // flat input index feeding each output element
};
MaxPoolOut maxpool_forward(const Tensor& input, int window, int stride);
Tensor maxpool_backward(const Tensor& input, const MaxPoolOut& cached, const Tensor& upstream);

Tensor relu(const Tensor& input);
// Gradient passes where the forward input was strictly positive.
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

// Inverted dropout: each element is zeroed independently with probability
// `rate`, survivors are scaled by 1/(1-rate) so evaluation needs no rescale.
// 0 <= rate < 1. Consumes one uniform per element, flat order.
struct DropoutOut {
  Tensor output;
  std::vector<std::uint8_t> kept;
  float rate = 0.f;
};
DropoutOut dropout_train(const Tensor& input, float rate, Rng& rng);
Tensor dropout_backward(const DropoutOut& cached, const Tensor& upstream);

// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

// Mean cross-entropy over the batch plus its gradient w.r.t. the logits.
struct SoftmaxXentOut {
  double loss = 0;
  Tensor logit_grad;
};
SoftmaxXentOut softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// [N, rest...] -> [N, prod(rest)]
Tensor flatten(const Tensor& input);
Tensor reshape_like(const Tensor& flat, const std::vector<std::int64_t>& extents);

// velocity <- momentum*velocity - learning_rate*grad; param <- param + velocity
void sgd_update(Tensor& param, const Tensor& grad, float learning_rate, float momentum,
                Tensor& velocity);

}  // namespace ablate
