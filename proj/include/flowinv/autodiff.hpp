#pragma once

#include <span>

#include "flowinv/core.hpp"

namespace flowinv {

// Gradients mirroring a VelocityField: `params` uses the field's flat
// layout, `embedding_grad` is the gradient w.r.t. the conditioning
// embedding fed into the forward pass.
struct ParamGradients {
    Vector params;
    Vector embedding_grad;
};

// Reverse-mode pass through the MLP recorded in `trace`.
//
// `grad_output` is dL/d(output). If `param_grad` is non-empty it must have
// parameter_count() entries and layer gradients are ACCUMULATED into it
// (the embedding-table section is left untouched; callers route
// `input_grad` into the table row they used). If `input_grad` is
// non-empty it receives dL/d(input) for the full [z, t, embedding] input.
void backward(const VelocityField& field, const ForwardTrace& trace,
              std::span<const double> grad_output, std::span<double> param_grad,
              std::span<double> input_grad);

// One guided Euler step whose unconditional branch is the optimization
// variable. The prediction is
//   v    = v(z, t, e_u) + w * (v(z, t, e_c) - v(z, t, e_u))
//   pred = z + (t_next - t) * v
// and the loss is mean((pred - target)^2).
struct StepLossSpec {
    double t_next = 0.0;
    Vector cond_embedding;
    Latent target;
    double guidance = 5.0;
};

struct EmbeddingLoss {
    double loss = 0.0;
    Vector gradient;  // d loss / d e_u
    Latent prediction;
};

EmbeddingLoss grad_loss_wrt_embedding(const VelocityField& field, const Latent& z, double t,
                                      std::span<const double> uncond_embedding,
                                      const StepLossSpec& spec);

}  // namespace flowinv
