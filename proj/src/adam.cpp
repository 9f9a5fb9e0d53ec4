#include "bessctl/adam.hpp"

#include <cmath>

#include "bessctl/common.hpp"

namespace bessctl::ad {

Adam::Adam(const ParamList& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p.tensor->values.size(), 0.0f);
        v_.emplace_back(p.tensor->values.size(), 0.0f);
    }
}

void Adam::step(const ParamList& params) {
    if (params.size() != m_.size()) throw std::invalid_argument("Adam::step: parameter list changed size");
    for (const auto& p : params) {
        if (!p.tensor->grad.empty() && !all_finite(p.tensor->grad)) {
            throw NumericError("Adam::step: non-finite gradient for parameter '" + p.name + "'");
        }
    }
    step_count_ += 1;
    const double t = static_cast<double>(step_count_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);

    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& theta = params[pi].tensor->values;
        const auto& grad = params[pi].tensor->grad;
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < theta.size(); ++i) {
            double th = theta[i];
            if (cfg_.weight_decay != 0.0) th -= cfg_.lr * cfg_.weight_decay * th;
            const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
            const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            th -= cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
            theta[i] = static_cast<float>(th);
        }
    }
}

}  // namespace bessctl::ad
