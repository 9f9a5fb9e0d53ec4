#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace bessctl::ad {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Dense float32 tensor, row-major. Gradients live in `grad` (same shape,
// allocated lazily by Tape::backward). `nonfinite` is a sticky flag: set
// when constructed from non-finite data and propagated through every op.
struct Tensor {
    Shape shape;
    std::vector<float> values;
    bool requires_grad = false;
    bool nonfinite = false;
    std::vector<float> grad;
    // full-precision copy of scalar reductions (set by reduce_mean); the
    // float32 value is authoritative for the graph, this one feeds loss
    // curves and finite-difference checks
    double hi = 0.0;
    bool has_hi = false;

    int64_t numel() const { return static_cast<int64_t>(values.size()); }
    int64_t dim(int i) const;  // negative i counts from the back
    int ndim() const { return static_cast<int>(shape.size()); }

    // zero-fills (or allocates) the grad buffer
    void ensure_grad();
    float grad_at(int64_t i) const { return grad.empty() ? 0.0f : grad[i]; }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(Shape shape, std::vector<float> values, bool requires_grad = false);
TensorPtr zeros(Shape shape, bool requires_grad = false);
TensorPtr full(Shape shape, float value, bool requires_grad = false);
TensorPtr scalar(float value, bool requires_grad = false);

// Reverse-mode tape. Ops append one node each; backward() visits nodes in
// reverse order exactly once. Nodes keep their tensors alive, so the bytes
// held by a tape are also the inference memory model (see memory_estimate).
class Tape {
public:
    struct Node {
        std::vector<TensorPtr> inputs;
        TensorPtr output;
        std::function<void()> backward;  // null when output needs no grad
        const char* name;
    };

    void record(std::vector<TensorPtr> inputs, TensorPtr output,
                std::function<void()> backward, const char* name);

    // d(loss)/dx for every requires_grad tensor on the tape. Grads are
    // zeroed first, so repeated calls give identical results.
    void backward(const TensorPtr& loss);

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Bytes held by distinct tensor value buffers reachable from the tape.
    size_t resident_value_bytes() const;

private:
    std::vector<Node> nodes_;
};

}  // namespace bessctl::ad
