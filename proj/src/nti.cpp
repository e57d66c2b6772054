#include "flowinv/nti.hpp"

#include <cmath>

#include "flowinv/adam.hpp"
#include "flowinv/autodiff.hpp"
#include "flowinv/errors.hpp"

namespace flowinv {

void NTIConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw ConfigError("NTI learning rate must be positive and finite");
    }
    if (!std::isfinite(guidance)) {
        throw ConfigError("NTI guidance scale must be finite");
    }
}

namespace {

double mean_squared_gap(const Latent& a, const Latent& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double r = a[k] - b[k];
        acc += r * r;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace

NtiResult nti_optimize(const VelocityField& field, const Trajectory& reference,
                       const Condition& cond, const NTIConfig& config) {
    config.validate();
    if (reference.direction != Direction::Forward || reference.steps() == 0) {
        throw ConfigError("NTI reference must be a forward trajectory with at least one step");
    }
    const std::size_t n = reference.steps();
    const TimeGrid grid = TimeGrid::uniform(n, Direction::Backward);
    for (std::size_t i = 0; i <= n; ++i) {
        if (reference.records[n - i].t != grid.points[i]) {
            throw ConfigError("NTI reference was not recorded on the uniform grid");
        }
    }

    NtiResult result;
    auto& schedule = result.schedule;
    schedule.embeddings.reserve(n);
    schedule.initial_loss.reserve(n);
    schedule.final_loss.reserve(n);
    result.trajectory.direction = Direction::Backward;
    result.trajectory.records.reserve(n + 1);

    const auto null_row = field.embedding_row(kEmptyToken);
    Vector embedding(null_row.begin(), null_row.end());
    Latent z = reference.final_latent();
    StepLossSpec spec;
    spec.cond_embedding = cond.embedding;
    spec.guidance = config.guidance;

    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.points[i];
        spec.t_next = grid.points[i + 1];
        spec.target = reference.records[n - 1 - i].z;

        if (!config.warm_start || i == 0) {
            embedding.assign(null_row.begin(), null_row.end());
        }
        AdamState adam(embedding.size(), AdamConfig{config.lr, 0.9, 0.999, 1e-8});
        double initial_loss = 0.0;
        for (std::size_t j = 0; j < config.inner_steps; ++j) {
            EmbeddingLoss step;
            try {
                step = grad_loss_wrt_embedding(field, z, t, embedding, spec);
            } catch (const NumericError& e) {
                throw NtiError(i, j, std::string("NTI step ") + std::to_string(i) + ", inner " +
                                         std::to_string(j) + ": " + e.what());
            }
            if (j == 0) {
                initial_loss = step.loss;
            }
            adam_step(adam, embedding, step.gradient);
        }
        if (!all_finite(embedding)) {
            throw NtiError(i, config.inner_steps, "NTI step " + std::to_string(i) +
                                                      ": optimized embedding is not finite");
        }

        const Latent v = guided_velocity(field, z, t, cond, embedding, config.guidance);
        Latent next = euler_step(z, t, spec.t_next, v);
        const double final_loss = mean_squared_gap(next, spec.target);
        if (!std::isfinite(final_loss)) {
            throw NtiError(i, config.inner_steps,
                           "NTI step " + std::to_string(i) + ": non-finite final loss");
        }
        if (config.inner_steps == 0) {
            initial_loss = final_loss;
        }
        schedule.initial_loss.push_back(initial_loss);
        schedule.final_loss.push_back(final_loss);
        schedule.embeddings.push_back(embedding);
        result.trajectory.records.push_back({t, z, normalized_norm(v)});
        check_latent(next, i);
        z = std::move(next);
    }
    const Latent v_end = guided_velocity(field, z, grid.points[n], cond, schedule.embeddings.back(),
                                         config.guidance);
    result.trajectory.records.push_back({grid.points[n], z, normalized_norm(v_end)});
    result.reconstruction = std::move(z);
    return result;
}

}  // namespace flowinv
