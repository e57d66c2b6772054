#include "flowinv/adam.hpp"

#include <cmath>

#include "flowinv/errors.hpp"

namespace flowinv {

void adam_step(AdamState& state, std::span<double> target, std::span<const double> grad) {
    if (target.size() != grad.size() || state.m.size() != target.size() ||
        state.v.size() != target.size()) {
        throw ShapeError("adam: target has " + std::to_string(target.size()) + " entries, grad " +
                         std::to_string(grad.size()) + ", moments " +
                         std::to_string(state.m.size()));
    }
    const auto& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double g = grad[i];
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        target[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

}  // namespace flowinv
