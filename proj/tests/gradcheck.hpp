#pragma once

// Central finite-difference check: analytic gradients from the engine's tape
// against finite differences of an independent double-precision reference
// loss (see dref.hpp). Both are evaluated at the same float32-representable
// base point.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bessctl/ops.hpp"
#include "bessctl/tensor.hpp"

namespace gradcheck {

using bessctl::ad::Tape;
using bessctl::ad::TensorPtr;

using DoubleParams = std::vector<std::vector<double>>;
using RefLoss = std::function<double(const DoubleParams&)>;
using EngineLoss = std::function<TensorPtr(Tape*)>;

struct Result {
    double max_rel_err = 0.0;
    double loss_gap = 0.0;  // |engine loss - reference loss| at the base point
};

inline Result run(const std::vector<TensorPtr>& params, const EngineLoss& engine_forward,
                  const RefLoss& ref_loss, double eps = 1e-3, double denom_floor = 1e-4) {
    Tape tape;
    auto loss = engine_forward(&tape);
    tape.backward(loss);

    DoubleParams base(params.size());
    for (size_t pi = 0; pi < params.size(); ++pi) {
        base[pi].assign(params[pi]->values.begin(), params[pi]->values.end());
    }

    Result res;
    double engine_val = loss->has_hi ? loss->hi : static_cast<double>(loss->values[0]);
    res.loss_gap = std::abs(engine_val - ref_loss(base));

    DoubleParams work = base;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        const auto& grad = params[pi]->grad;
        for (size_t i = 0; i < base[pi].size(); ++i) {
            work[pi][i] = base[pi][i] + eps;
            double lp = ref_loss(work);
            work[pi][i] = base[pi][i] - eps;
            double lm = ref_loss(work);
            work[pi][i] = base[pi][i];
            double fd = (lp - lm) / (2.0 * eps);
            double an = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
            double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), denom_floor});
            res.max_rel_err = std::max(res.max_rel_err, rel);
        }
    }
    return res;
}

}  // namespace gradcheck
