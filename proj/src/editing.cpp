#include "flowinv/editing.hpp"

#include <cmath>

#include "flowinv/diagnostics.hpp"
#include "flowinv/errors.hpp"

namespace flowinv {

double orthogonal_distance(const Latent& a, const Latent& b, const Vector& direction) {
    Vector diff(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        diff[k] = a[k] - b[k];
    }
    const double dn = l2_norm(direction);
    if (dn > 0.0) {
        double proj = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            proj += diff[k] * direction[k] / dn;
        }
        for (std::size_t k = 0; k < a.size(); ++k) {
            diff[k] -= proj * direction[k] / dn;
        }
    }
    return l2_norm(diff);
}

namespace {

template <typename F>
auto with_stage(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const LatentExplosion& e) {
        throw LatentExplosion(e.step(), std::string(stage) + ": " + e.what());
    }
}

}  // namespace

EditResult edit(const VelocityField& field, const DatasetSpec& spec, const EditRequest& request) {
    if (!all_finite(request.source.span())) {
        throw NumericError("edit source latent is not finite");
    }
    const Condition empty = embed_condition(field, kEmptyToken);
    const TokenRegistry registry = spec.registry();
    const Condition target = embed_condition(field, request.edit_token, &registry);

    EditResult r;
    r.inversion = with_stage("inversion", [&] { return invert(field, request.source, empty, request.guidance); });
    const Latent& z1 = r.inversion.final_latent();

    const NullSchedule* schedule = nullptr;
    if (request.use_nti) {
        NTIConfig nti = request.nti;
        nti.guidance = request.guidance.guidance;
        NtiResult opt = with_stage("null-text optimization",
                                   [&] { return nti_optimize(field, r.inversion, empty, nti); });
        r.schedule = std::move(opt.schedule);
        r.reconstruction_trajectory = std::move(opt.trajectory);
        schedule = &*r.schedule;
    } else {
        r.reconstruction_trajectory = with_stage(
            "reconstruction", [&] { return sample(field, z1, empty, request.guidance); });
    }
    r.reconstruction = r.reconstruction_trajectory.final_latent();
    r.edit_trajectory = with_stage(
        "edit sampling", [&] { return sample(field, z1, target, request.guidance, schedule); });
    r.edited = r.edit_trajectory.final_latent();

    r.reconstruction_l1 = l1_reconstruction(r.reconstruction, request.source);
    r.edit_l1 = l1_reconstruction(r.edited, request.source);
    r.source_mode = spec.nearest_mode(request.source);
    r.edited_mode = spec.nearest_mode(r.edited);
    if (request.edit_token == kEmptyToken) {
        r.target_mode = r.source_mode;
    } else if (registry.kind_of(request.edit_token) != ConditionKind::Ood) {
        r.target_mode = spec.global_mode_index(request.edit_token);
    }
    Vector offset(request.source.size(), 0.0);
    if (r.target_mode) {
        const auto modes = spec.all_modes();
        for (std::size_t k = 0; k < offset.size(); ++k) {
            offset[k] = modes[*r.target_mode].mean[k] - modes[r.source_mode].mean[k];
        }
    }
    r.structure_distance = orthogonal_distance(r.edited, request.source, offset);
    r.implausible = r.edited_mode != r.source_mode && r.edited_mode != r.target_mode;
    return r;
}

}  // namespace flowinv
