#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowinv/editing.hpp"
#include "flowinv/sampler.hpp"

namespace flowinv {

// Shortest-unambiguous "%.17g" rendering; "nan" / "inf" for non-finite.
std::string format_double(double x);

struct NamedTrajectory {
    std::string run_id;
    const Trajectory* trajectory = nullptr;
};

// CSV columns: run_id,direction,step,t,velocity_norm
void write_trajectory_csv(const std::vector<NamedTrajectory>& runs, const std::filesystem::path& path);

// Sidecar latent dump: {"runs": [{"run_id", "direction", "latents": [[...], ...]}]}
// where latents[step] is the latent of that record.
nlohmann::json latent_dump(const std::vector<NamedTrajectory>& runs);

nlohmann::json edit_result_json(const EditRequest& request, const EditResult& result);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace flowinv
