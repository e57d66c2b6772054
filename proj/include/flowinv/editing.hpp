#pragma once

#include <cstdint>
#include <optional>

#include "flowinv/core.hpp"
#include "flowinv/dataset.hpp"
#include "flowinv/nti.hpp"
#include "flowinv/sampler.hpp"

namespace flowinv {

struct EditRequest {
    Latent source;
    TokenId edit_token = kEmptyToken;
    bool use_nti = true;
    GuidanceConfig guidance;
    NTIConfig nti;
    std::uint64_t seed = 0;
};

struct EditResult {
    Latent edited;
    Latent reconstruction;
    Trajectory inversion;
    Trajectory edit_trajectory;
    Trajectory reconstruction_trajectory;
    std::optional<NullSchedule> schedule;

    double reconstruction_l1 = 0.0;
    double edit_l1 = 0.0;  // edited vs source
    std::size_t source_mode = 0;
    // Mode the edit token was trained on; empty for OOD tokens.
    std::optional<std::size_t> target_mode;
    std::size_t edited_mode = 0;
    // Distance between edit output and source after projecting out the
    // source-to-target mode offset.
    double structure_distance = 0.0;
    // Edited output landed on neither the source's nor the target's mode.
    bool implausible = false;
};

// Inversion with Empty, optional null-text optimization with Empty in the
// conditional slot, then resampling with the edit token in the
// conditional slot and the (optimized) null embedding in the
// unconditional one. Token 0 degenerates to reconstruction.
EditResult edit(const VelocityField& field, const DatasetSpec& spec, const EditRequest& request);

// Distance between a and b restricted to the orthogonal complement of
// `direction` (plain distance when direction is zero).
double orthogonal_distance(const Latent& a, const Latent& b, const Vector& direction);

}  // namespace flowinv
