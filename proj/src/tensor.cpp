#include "bessctl/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "bessctl/common.hpp"

namespace bessctl::ad {

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

int64_t Tensor::dim(int i) const {
    int nd = ndim();
    if (i < 0) i += nd;
    if (i < 0 || i >= nd) throw std::invalid_argument("Tensor::dim: axis out of range");
    return shape[i];
}

void Tensor::ensure_grad() {
    grad.assign(values.size(), 0.0f);
}

TensorPtr make_tensor(Shape shape, std::vector<float> values, bool requires_grad) {
    for (int64_t d : shape) {
        if (d <= 0) throw std::invalid_argument("make_tensor: non-positive dim in " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
        throw std::invalid_argument("make_tensor: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    }
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->values = std::move(values);
    t->requires_grad = requires_grad;
    t->nonfinite = !all_finite(t->values);
    return t;
}

TensorPtr zeros(Shape shape, bool requires_grad) {
    size_t n = static_cast<size_t>(shape_numel(shape));
    return make_tensor(std::move(shape), std::vector<float>(n, 0.0f), requires_grad);
}

TensorPtr full(Shape shape, float value, bool requires_grad) {
    size_t n = static_cast<size_t>(shape_numel(shape));
    return make_tensor(std::move(shape), std::vector<float>(n, value), requires_grad);
}

TensorPtr scalar(float value, bool requires_grad) {
    return make_tensor({1}, {value}, requires_grad);
}

void Tape::record(std::vector<TensorPtr> inputs, TensorPtr output, std::function<void()> backward,
                  const char* name) {
    nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward), name});
}

void Tape::backward(const TensorPtr& loss) {
    if (!loss || loss->numel() != 1) {
        throw std::invalid_argument("Tape::backward: loss must be a scalar tensor");
    }
    bool found = false;
    for (const auto& n : nodes_) {
        if (n.output == loss) found = true;
    }
    if (!found) throw std::invalid_argument("Tape::backward: loss is not an output on this tape");

    std::unordered_set<Tensor*> seen;
    for (const auto& n : nodes_) {
        for (const auto& in : n.inputs) {
            if (in->requires_grad && seen.insert(in.get()).second) in->ensure_grad();
        }
        if (n.output->requires_grad && seen.insert(n.output.get()).second) n.output->ensure_grad();
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0f;

    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->backward) it->backward();
    }
}

size_t Tape::resident_value_bytes() const {
    std::unordered_set<const Tensor*> seen;
    size_t bytes = 0;
    for (const auto& n : nodes_) {
        for (const auto& in : n.inputs) {
            if (seen.insert(in.get()).second) bytes += in->values.size() * sizeof(float);
        }
        if (seen.insert(n.output.get()).second) bytes += n.output->values.size() * sizeof(float);
    }
    return bytes;
}

}  // namespace bessctl::ad
