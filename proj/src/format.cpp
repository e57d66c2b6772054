#include "flowinv/format.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowinv/errors.hpp"

namespace flowinv {

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_trajectory_csv(const std::vector<NamedTrajectory>& runs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "run_id,direction,step,t,velocity_norm\n";
    for (const auto& run : runs) {
        const auto& recs = run.trajectory->records;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            out << run.run_id << ',' << to_string(run.trajectory->direction) << ',' << i << ','
                << format_double(recs[i].t) << ',' << format_double(recs[i].velocity_norm) << '\n';
        }
    }
}

nlohmann::json latent_dump(const std::vector<NamedTrajectory>& runs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& run : runs) {
        nlohmann::json latents = nlohmann::json::array();
        for (const auto& r : run.trajectory->records) {
            latents.push_back(r.z.values);
        }
        arr.push_back({{"run_id", run.run_id},
                       {"direction", to_string(run.trajectory->direction)},
                       {"latents", std::move(latents)}});
    }
    return {{"runs", std::move(arr)}};
}

nlohmann::json edit_result_json(const EditRequest& request, const EditResult& result) {
    nlohmann::json req = {{"source", request.source.values},
                          {"edit_token", request.edit_token},
                          {"use_nti", request.use_nti},
                          {"guidance", request.guidance.guidance},
                          {"steps", request.guidance.steps},
                          {"nti_inner_steps", request.nti.inner_steps},
                          {"nti_lr", request.nti.lr},
                          {"seed", request.seed}};
    nlohmann::json res = {{"edited", result.edited.values},
                          {"reconstruction", result.reconstruction.values},
                          {"noise_latent", result.inversion.final_latent().values},
                          {"reconstruction_l1", result.reconstruction_l1},
                          {"edit_l1", result.edit_l1},
                          {"source_mode", result.source_mode},
                          {"edited_mode", result.edited_mode},
                          {"structure_distance", result.structure_distance},
                          {"implausible", result.implausible}};
    res["target_mode"] = result.target_mode ? nlohmann::json(*result.target_mode) : nlohmann::json(nullptr);
    res["retargeted"] = result.target_mode && result.edited_mode == *result.target_mode;
    return {{"request", std::move(req)}, {"result", std::move(res)}};
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

}  // namespace flowinv
