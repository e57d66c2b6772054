#pragma once

#include <cstddef>
#include <vector>

#include "flowinv/core.hpp"
#include "flowinv/sampler.hpp"

namespace flowinv {

struct NTIConfig {
    std::size_t inner_steps = 10;
    double lr = 1e-4;
    double guidance = 5.0;
    // Start each step from the previous step's optimized embedding instead
    // of the table's Empty row.
    bool warm_start = false;

    void validate() const;
};

// Per-timestep unconditional embeddings, in sampling order (t: 1 -> 0).
struct NullSchedule {
    std::vector<Vector> embeddings;
    Vector initial_loss;  // step loss before the inner loop
    Vector final_loss;    // step loss with the optimized embedding

    std::size_t steps() const noexcept { return embeddings.size(); }
};

struct NtiResult {
    NullSchedule schedule;
    Latent reconstruction;
    Trajectory trajectory;
};

// Null-text optimization against a forward (inversion) reference.
//
// Sampling starts at the reference's final latent. At each step the
// unconditional embedding starts from the table's Empty row (or from the
// previous step's result with `warm_start`) and is refined by
// `inner_steps` Adam updates, with fresh optimizer state, on the squared
// step loss against the reference latent at the next time.
// The step is then taken with the optimized embedding, so the returned
// trajectory equals sample(field, z1, cond, cfg, &schedule).
NtiResult nti_optimize(const VelocityField& field, const Trajectory& reference,
                       const Condition& cond, const NTIConfig& config);

}  // namespace flowinv
