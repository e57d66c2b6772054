#include "flowinv/sampler.hpp"

#include <cmath>

#include "flowinv/errors.hpp"
#include "flowinv/nti.hpp"

namespace flowinv {

void GuidanceConfig::validate() const {
    if (steps == 0) {
        throw ConfigError("guidance config needs at least one step");
    }
    if (!std::isfinite(guidance)) {
        throw ConfigError("guidance scale must be finite");
    }
}

Vector Trajectory::velocity_norms() const {
    Vector out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.velocity_norm);
    }
    return out;
}

Latent guided_velocity(const VelocityField& field, const Latent& z, double t, const Condition& cond,
                       std::span<const double> uncond_embedding, double guidance) {
    const Latent v_u = eval_velocity(field, z, t, uncond_embedding);
    const Latent v_c = eval_velocity(field, z, t, cond);
    Latent out(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        out[k] = v_u[k] + guidance * (v_c[k] - v_u[k]);
    }
    return out;
}

Latent euler_step(const Latent& z, double t, double t_next, const Latent& v) {
    if (z.size() != v.size()) {
        throw ShapeError("euler step: latent and velocity dimensions differ");
    }
    const double dt = t_next - t;
    Latent out(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        out[k] = z[k] + dt * v[k];
    }
    return out;
}

double normalized_norm(const Latent& v) noexcept {
    return v.size() == 0 ? 0.0 : l2_norm(v.span()) / std::sqrt(static_cast<double>(v.size()));
}

void check_latent(const Latent& z, std::size_t step) {
    for (double x : z.values) {
        if (!std::isfinite(x) || std::abs(x) > kExplosionThreshold) {
            throw LatentExplosion(step, "latent explosion at step " + std::to_string(step));
        }
    }
}

namespace {

template <typename UncondAt>
Trajectory integrate(const VelocityField& field, const Latent& start, const Condition& cond,
                     const TimeGrid& grid, double guidance, UncondAt&& uncond_at) {
    if (start.size() != field.dims().latent_dim) {
        throw ShapeError("start latent has dimension " + std::to_string(start.size()) +
                         ", field expects " + std::to_string(field.dims().latent_dim));
    }
    check_latent(start, 0);
    const std::size_t n = grid.steps();
    Trajectory traj;
    traj.direction = grid.direction;
    traj.records.reserve(n + 1);
    Latent z = start;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.points[i];
        const Latent v = guided_velocity(field, z, t, cond, uncond_at(i), guidance);
        traj.records.push_back({t, z, normalized_norm(v)});
        z = euler_step(z, t, grid.points[i + 1], v);
        check_latent(z, i);
    }
    const double t_end = grid.points[n];
    const Latent v_end = guided_velocity(field, z, t_end, cond, uncond_at(n - 1), guidance);
    traj.records.push_back({t_end, std::move(z), normalized_norm(v_end)});
    return traj;
}

}  // namespace

Trajectory invert(const VelocityField& field, const Latent& z0, const Condition& cond,
                  const GuidanceConfig& cfg) {
    cfg.validate();
    const auto null_row = field.embedding_row(kEmptyToken);
    const TimeGrid grid = TimeGrid::uniform(cfg.steps, Direction::Forward);
    return integrate(field, z0, cond, grid, cfg.guidance, [&](std::size_t) { return null_row; });
}

Trajectory sample(const VelocityField& field, const Latent& z1, const Condition& cond,
                  const GuidanceConfig& cfg, const NullSchedule* schedule) {
    cfg.validate();
    const TimeGrid grid = TimeGrid::uniform(cfg.steps, Direction::Backward);
    if (schedule != nullptr) {
        if (schedule->embeddings.size() != cfg.steps) {
            throw ShapeError("null schedule has " + std::to_string(schedule->embeddings.size()) +
                             " entries, sampling grid has " + std::to_string(cfg.steps) + " steps");
        }
        return integrate(field, z1, cond, grid, cfg.guidance, [&](std::size_t i) {
            return std::span<const double>(schedule->embeddings[i]);
        });
    }
    const auto null_row = field.embedding_row(kEmptyToken);
    return integrate(field, z1, cond, grid, cfg.guidance, [&](std::size_t) { return null_row; });
}

}  // namespace flowinv
