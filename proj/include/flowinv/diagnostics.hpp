#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowinv/core.hpp"
#include "flowinv/sampler.hpp"

namespace flowinv {

// Mean of (1 - cos) over all ordered pairs i != j.
double avg_pairwise_cosine_distance(std::span<const Vector> vectors);

// Mean cosine distances at or below this are treated as zero; identical
// vectors still give a few ulps of 1 - cos.
inline constexpr double kDegenerateDistance = 1e-12;

struct DiversityReport {
    std::string anchor;
    double delta_vis = 0.0;
    double delta_txt = 0.0;
    std::optional<double> ratio;  // absent when delta_txt is zero
    bool degenerate_prompts = false;
    std::size_t n = 0;
};

DiversityReport diversity_ratio(std::span<const Vector> vis, std::span<const Vector> txt,
                                std::string anchor = {});

// Mean absolute coordinate difference.
double l1_reconstruction(const Latent& x_hat, const Latent& x_ref);

struct NormGroupStats {
    double mean = 0.0;
    double median = 0.0;
    double max = 0.0;
    std::size_t trajectories = 0;
};

using NormTraceStats = std::map<ConditionKind, NormGroupStats>;

// Statistics of the per-step normalized velocity norms pooled over every
// trajectory of each group.
NormTraceStats norm_trace_stats(const std::map<ConditionKind, std::vector<Trajectory>>& groups);

// Fixed seeded linear map latent -> 16 dims followed by L2 normalization.
class VisualProjection {
public:
    VisualProjection(std::size_t latent_dim, std::uint64_t seed, std::size_t out_dim = 16);

    Vector operator()(const Latent& x) const;

private:
    std::size_t in_;
    std::size_t out_;
    Vector matrix_;
};

Vector normalized(std::span<const double> v);

}  // namespace flowinv
