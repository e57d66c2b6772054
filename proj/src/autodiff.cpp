#include "flowinv/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "flowinv/errors.hpp"

namespace flowinv {

void backward(const VelocityField& field, const ForwardTrace& trace,
              std::span<const double> grad_output, std::span<double> param_grad,
              std::span<double> input_grad) {
    const auto& layers = field.layers();
    const auto params = field.parameters();
    if (grad_output.size() != field.dims().latent_dim) {
        throw ShapeError("output gradient has wrong dimension");
    }
    if (!param_grad.empty() && param_grad.size() != field.parameter_count()) {
        throw ShapeError("parameter gradient buffer has wrong size");
    }
    if (!input_grad.empty() && input_grad.size() != field.dims().input_dim()) {
        throw ShapeError("input gradient buffer has wrong size");
    }

    // delta holds dL/d(pre-activation) of the current layer.
    Vector delta(grad_output.begin(), grad_output.end());
    Vector below;
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& s = layers[l];
        const Vector& in = l == 0 ? trace.input : trace.hidden[l - 1];
        if (!param_grad.empty()) {
            for (std::size_t o = 0; o < s.out; ++o) {
                double* row = param_grad.data() + s.weight_offset + o * s.in;
                const double d = delta[o];
                for (std::size_t i = 0; i < s.in; ++i) {
                    row[i] += d * in[i];
                }
                param_grad[s.bias_offset + o] += d;
            }
        }
        if (l == 0 && input_grad.empty()) {
            break;
        }
        below.assign(s.in, 0.0);
        for (std::size_t o = 0; o < s.out; ++o) {
            const double* row = params.data() + s.weight_offset + o * s.in;
            const double d = delta[o];
            for (std::size_t i = 0; i < s.in; ++i) {
                below[i] += row[i] * d;
            }
        }
        if (l == 0) {
            std::copy(below.begin(), below.end(), input_grad.begin());
            break;
        }
        // tanh'(x) = 1 - tanh(x)^2, with tanh(x) stored in the trace.
        for (std::size_t i = 0; i < s.in; ++i) {
            const double h = in[i];
            below[i] *= 1.0 - h * h;
        }
        delta.swap(below);
    }
}

EmbeddingLoss grad_loss_wrt_embedding(const VelocityField& field, const Latent& z, double t,
                                      std::span<const double> uncond_embedding,
                                      const StepLossSpec& spec) {
    const auto& dims = field.dims();
    if (spec.target.size() != dims.latent_dim) {
        throw ShapeError("target latent has wrong dimension");
    }
    if (!std::isfinite(spec.guidance)) {
        throw NumericError("guidance scale is not finite");
    }

    ForwardTrace uncond;
    ForwardTrace cond;
    forward(field, z.span(), t, uncond_embedding, uncond);
    forward(field, z.span(), t, spec.cond_embedding, cond);

    const double dt = spec.t_next - t;
    const double w = spec.guidance;
    const std::size_t d = dims.latent_dim;
    EmbeddingLoss result;
    result.prediction = Latent(d);
    Vector residual(d);
    double loss = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double v = uncond.output[k] + w * (cond.output[k] - uncond.output[k]);
        result.prediction[k] = z[k] + dt * v;
        residual[k] = result.prediction[k] - spec.target[k];
        loss += residual[k] * residual[k];
    }
    loss /= static_cast<double>(d);
    if (!std::isfinite(loss)) {
        throw NumericError("non-finite step loss at t=" + std::to_string(t));
    }
    result.loss = loss;

    // dL/dv_u = (2/d) * residual * dt * (1 - w)
    Vector grad_out(d);
    const double scale = 2.0 / static_cast<double>(d) * dt * (1.0 - w);
    for (std::size_t k = 0; k < d; ++k) {
        grad_out[k] = scale * residual[k];
    }
    Vector input_grad(dims.input_dim());
    backward(field, uncond, grad_out, {}, input_grad);
    result.gradient.assign(input_grad.begin() + static_cast<std::ptrdiff_t>(d + 1),
                           input_grad.end());
    if (!all_finite(result.gradient)) {
        throw NumericError("non-finite embedding gradient at t=" + std::to_string(t));
    }
    return result;
}

}  // namespace flowinv
