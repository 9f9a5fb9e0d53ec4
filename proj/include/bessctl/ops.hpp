#pragma once

#include <cstdint>
#include <vector>

#include "bessctl/common.hpp"
#include "bessctl/tensor.hpp"

// Differentiable primitives. Every op takes the tape first; pass nullptr to
// run without recording (inference). Values are float32, but every reduction
// (matmul inner products, means, layer-norm statistics, softmax sums, bias
// gradients) accumulates in double.
//
// Broadcasting is deliberately restricted: `add` accepts a trailing-dimension
// bias, everything else wants exact shapes and throws std::invalid_argument
// with both shapes in the message.
namespace bessctl::ad {

// a: [..., m, k] (stack of matrices), b: same leading dims or plain 2-D
// (shared right factor, the linear-layer case). trans_a / trans_b read the
// last two dims swapped.
TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b, bool trans_a = false,
                 bool trans_b = false);

// same shape, or b 1-D matching a's last dim (bias).
TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);  // elementwise, same shape
TensorPtr scale(Tape* tape, const TensorPtr& a, double c);

TensorPtr relu(Tape* tape, const TensorPtr& a);
TensorPtr tanh_op(Tape* tape, const TensorPtr& a);
TensorPtr softmax_lastdim(Tape* tape, const TensorPtr& a);

// Normalizes over the last dim with eps inside the sqrt; a constant row
// normalizes to exactly zero before the affine part. gamma/beta are 1-D of
// the last-dim size.
TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                     double eps = 1e-5);

// table: [rows, d]; indices laid out in row-major prefix_shape order.
// Output: prefix_shape + [d].
TensorPtr embedding_lookup(Tape* tape, const TensorPtr& table, const std::vector<int32_t>& indices,
                           Shape prefix_shape);

TensorPtr concat(Tape* tape, const std::vector<TensorPtr>& parts, int axis);
TensorPtr slice(Tape* tape, const TensorPtr& a, int axis, int64_t start, int64_t len);

// mask has one byte per element; non-zero entries are replaced by `fill`
// and receive zero gradient.
TensorPtr masked_fill(Tape* tape, const TensorPtr& a, const std::vector<uint8_t>& mask, float fill);

TensorPtr reduce_mean(Tape* tape, const TensorPtr& a);  // full reduction to a scalar

// elementwise 0.5*x^2/beta for |x| < beta, |x| - 0.5*beta otherwise
TensorPtr smooth_l1(Tape* tape, const TensorPtr& a, double beta);

// Inverted dropout; identity when p == 0. The mask is drawn from `rng`, so
// training remains deterministic per seed.
TensorPtr dropout(Tape* tape, const TensorPtr& a, double p, Rng& rng);

// (B,T,d) x3 -> (B,3T,d), tokens interleaved per timestep: a_t, b_t, c_t.
TensorPtr interleave3(Tape* tape, const TensorPtr& a, const TensorPtr& b, const TensorPtr& c);

// picks indices start, start+stride, ... along axis 1 of a 3-D tensor
TensorPtr take_every(Tape* tape, const TensorPtr& a, int64_t start, int64_t stride);

}  // namespace bessctl::ad
