#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowinv/core.hpp"

namespace flowinv {

struct NullSchedule;

struct GuidanceConfig {
    double guidance = 5.0;
    std::size_t steps = 50;

    void validate() const;
};

// Any coordinate beyond this magnitude aborts integration.
inline constexpr double kExplosionThreshold = 1e6;

struct TrajectoryRecord {
    double t = 0.0;
    Latent z;
    // Guided velocity at (z, t), L2 norm divided by sqrt(d).
    double velocity_norm = 0.0;
};

// Records 0..N of an Euler integration. Record i < N carries the velocity
// used for step i; the terminal record carries the velocity evaluated at
// the terminal point.
struct Trajectory {
    Direction direction = Direction::Forward;
    std::vector<TrajectoryRecord> records;

    std::size_t steps() const noexcept { return records.empty() ? 0 : records.size() - 1; }
    const Latent& initial() const { return records.front().z; }
    const Latent& final_latent() const { return records.back().z; }
    Vector velocity_norms() const;
};

// v_u + w * (v_c - v_u), with the unconditional branch evaluated on
// `uncond_embedding`. Exactly two network evaluations.
Latent guided_velocity(const VelocityField& field, const Latent& z, double t, const Condition& cond,
                       std::span<const double> uncond_embedding, double guidance);

// z + (t_next - t) * v. The signed step covers both directions.
Latent euler_step(const Latent& z, double t, double t_next, const Latent& v);

double normalized_norm(const Latent& v) noexcept;

// Euler integration 0 -> 1 with guided velocity; unconditional branch uses
// the table's Empty row.
Trajectory invert(const VelocityField& field, const Latent& z0, const Condition& cond,
                  const GuidanceConfig& cfg);

// Euler integration 1 -> 0. When `schedule` is given, step i uses its i-th
// embedding for the unconditional branch and its length must equal N.
Trajectory sample(const VelocityField& field, const Latent& z1, const Condition& cond,
                  const GuidanceConfig& cfg, const NullSchedule* schedule = nullptr);

// Throws LatentExplosion when `z` is non-finite or exceeds the threshold.
void check_latent(const Latent& z, std::size_t step);

}  // namespace flowinv
