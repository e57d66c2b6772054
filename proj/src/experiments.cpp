#include "flowinv/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "flowinv/errors.hpp"
#include "flowinv/format.hpp"

namespace flowinv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

}  // namespace

MeanStd finite_mean_std(const Vector& values) {
    MeanStd r;
    double acc = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) {
            acc += v;
            ++r.count;
        }
    }
    if (r.count == 0) {
        r.mean = kNaN;
        r.std = kNaN;
        return r;
    }
    r.mean = acc / static_cast<double>(r.count);
    if (r.count > 1) {
        double ss = 0.0;
        for (double v : values) {
            if (std::isfinite(v)) {
                ss += (v - r.mean) * (v - r.mean);
            }
        }
        r.std = std::sqrt(ss / static_cast<double>(r.count - 1));
    }
    return r;
}

TrialSource draw_trial_source(const DatasetSpec& spec, Rng& rng, bool diverse_only) {
    std::vector<TokenId> pool;
    for (const auto& a : spec.anchors) {
        if (!diverse_only || !a.sink) {
            pool.insert(pool.end(), a.tokens.begin(), a.tokens.end());
        }
    }
    if (pool.empty()) {
        throw ConfigError("no anchor tokens to draw trial sources from");
    }
    TrialSource s;
    s.token = pool[rng.below(pool.size())];
    s.x0 = sample_mode(spec.mode_for_token(s.token), rng);
    return s;
}

std::vector<DiversityReport> run_sink_experiment(const Checkpoint& ckpt,
                                                 const std::vector<std::string>& anchors,
                                                 std::size_t samples_per_token, std::uint64_t seed,
                                                 const GuidanceConfig& guidance) {
    const auto& spec = ckpt.dataset;
    const auto& field = ckpt.field;
    if (samples_per_token == 0) {
        throw ConfigError("sink experiment needs at least one sample per token");
    }
    const VisualProjection phi_vis(spec.latent_dim, seed);
    const Rng root(seed);
    std::vector<DiversityReport> reports;
    for (std::size_t ai = 0; ai < spec.anchors.size(); ++ai) {
        const auto& a = spec.anchors[ai];
        if (!anchors.empty() && std::find(anchors.begin(), anchors.end(), a.name) == anchors.end()) {
            continue;
        }
        if (a.tokens.size() < 2) {
            throw MetricError("anchor '" + a.name + "' has fewer than 2 tokens");
        }
        std::vector<Vector> vis;
        std::vector<Vector> txt;
        for (TokenId token : a.tokens) {
            const Condition c = embed_condition(field, token);
            const Vector phi_txt = normalized(c.embedding);
            for (std::size_t s = 0; s < samples_per_token; ++s) {
                Rng rng = root.split(token).split(s);
                Latent z1(spec.latent_dim);
                for (double& x : z1.values) {
                    x = rng.normal();
                }
                const Trajectory traj = sample(field, z1, c, guidance);
                vis.push_back(phi_vis(traj.final_latent()));
                txt.push_back(phi_txt);
            }
        }
        reports.push_back(diversity_ratio(vis, txt, a.name));
    }
    if (!anchors.empty() && reports.size() != anchors.size()) {
        throw ConfigError("sink experiment: unknown anchor name requested");
    }
    return reports;
}

namespace {

Condition condition_for_kind(const VelocityField& field, const DatasetSpec& spec, ConditionKind kind,
                             TokenId true_token, std::size_t trial) {
    Condition c;
    switch (kind) {
        case ConditionKind::Empty:
            return embed_condition(field, kEmptyToken);
        case ConditionKind::True:
            c = embed_condition(field, true_token);
            break;
        case ConditionKind::Approximate:
            c = embed_condition(field, approximate_token(spec, true_token));
            break;
        case ConditionKind::Ood:
            if (spec.ood_tokens.empty()) {
                throw ConfigError("dataset has no OOD tokens");
            }
            c = embed_condition(field, spec.ood_tokens[trial % spec.ood_tokens.size()]);
            break;
        case ConditionKind::Raw:
            throw ConfigError("raw conditions are not a prompt type");
    }
    c.kind = kind;
    return c;
}

}  // namespace

PromptTypeTable run_prompt_type_experiment(const Checkpoint& ckpt, std::size_t trials,
                                           std::uint64_t seed, const GuidanceConfig& guidance,
                                           const std::vector<ConditionKind>& kinds) {
    const auto& spec = ckpt.dataset;
    const auto& field = ckpt.field;
    PromptTypeTable table;
    if (trials == 0) {
        return table;
    }
    guidance.validate();
    const std::size_t records = guidance.steps + 1;
    for (ConditionKind k : kinds) {
        KindSummary s;
        s.kind = k;
        s.trials = trials;
        s.norm_trace.assign(records, 0.0);
        table.rows.push_back(std::move(s));
    }
    const Rng root(seed);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng = root.split(trial);
        const TrialSource src = draw_trial_source(spec, rng);
        for (auto& row : table.rows) {
            const Condition c = condition_for_kind(field, spec, row.kind, src.token, trial);
            try {
                const Trajectory inv = invert(field, src.x0, c, guidance);
                const Trajectory rec = sample(field, inv.final_latent(), c, guidance);
                row.l1_per_trial.push_back(l1_reconstruction(rec.final_latent(), src.x0));
                double trial_norm = 0.0;
                for (std::size_t i = 0; i < records; ++i) {
                    row.norm_trace[i] += inv.records[i].velocity_norm;
                    trial_norm += inv.records[i].velocity_norm;
                }
                row.norm_per_trial.push_back(trial_norm / static_cast<double>(records));
            } catch (const LatentExplosion&) {
                ++row.failures;
                row.l1_per_trial.push_back(kNaN);
                row.norm_per_trial.push_back(kNaN);
            }
        }
    }
    for (auto& row : table.rows) {
        const auto l1 = finite_mean_std(row.l1_per_trial);
        row.l1_mean = l1.mean;
        row.l1_std = l1.std;
        row.fail_rate = static_cast<double>(row.failures) / static_cast<double>(trials);
        row.norm_mean = finite_mean_std(row.norm_per_trial).mean;
        const std::size_t ok = trials - row.failures;
        for (double& x : row.norm_trace) {
            x = ok == 0 ? kNaN : x / static_cast<double>(ok);
        }
    }
    return table;
}

ReconTable run_reconstruction_table(const Checkpoint& ckpt, std::size_t trials, std::uint64_t seed,
                                    const GuidanceConfig& guidance, const NTIConfig& nti) {
    const auto& spec = ckpt.dataset;
    const auto& field = ckpt.field;
    ReconTable table;
    for (const char* name : {"euler_approx", "nti_approx", "euler_empty", "nti_empty"}) {
        ReconRow row;
        row.config = name;
        row.trials = trials;
        table.rows.push_back(std::move(row));
    }
    NTIConfig nti_cfg = nti;
    nti_cfg.guidance = guidance.guidance;
    const Condition empty = embed_condition(field, kEmptyToken);
    const Rng root(seed);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng = root.split(trial);
        const TrialSource src = draw_trial_source(spec, rng);
        Condition approx = embed_condition(field, approximate_token(spec, src.token));
        approx.kind = ConditionKind::Approximate;

        auto run_pair = [&](const Condition& c, ReconRow& euler_row, ReconRow& nti_row) {
            Trajectory inv;
            try {
                inv = invert(field, src.x0, c, guidance);
            } catch (const LatentExplosion&) {
                for (ReconRow* row : {&euler_row, &nti_row}) {
                    ++row->failures;
                    row->l1_per_trial.push_back(kNaN);
                }
                return;
            }
            try {
                const Trajectory rec = sample(field, inv.final_latent(), c, guidance);
                euler_row.l1_per_trial.push_back(l1_reconstruction(rec.final_latent(), src.x0));
            } catch (const LatentExplosion&) {
                ++euler_row.failures;
                euler_row.l1_per_trial.push_back(kNaN);
            }
            try {
                const NtiResult opt = nti_optimize(field, inv, c, nti_cfg);
                nti_row.l1_per_trial.push_back(l1_reconstruction(opt.reconstruction, src.x0));
            } catch (const LatentExplosion&) {
                ++nti_row.failures;
                nti_row.l1_per_trial.push_back(kNaN);
            }
        };
        run_pair(approx, table.rows[0], table.rows[1]);
        run_pair(empty, table.rows[2], table.rows[3]);
    }
    for (auto& row : table.rows) {
        const auto l1 = finite_mean_std(row.l1_per_trial);
        row.l1_mean = trials == 0 ? kNaN : l1.mean;
        row.l1_std = trials == 0 ? kNaN : l1.std;
        row.fail_rate = trials == 0 ? 0.0 : static_cast<double>(row.failures) / static_cast<double>(trials);
    }
    return table;
}

void write_sink_csv(const std::vector<DiversityReport>& reports, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "anchor,delta_vis,delta_txt,R,n\n";
    for (const auto& r : reports) {
        out << r.anchor << ',' << format_double(r.delta_vis) << ',' << format_double(r.delta_txt) << ','
            << (r.ratio ? format_double(*r.ratio) : std::string()) << ',' << r.n << '\n';
    }
}

void write_prompt_type_csv(const PromptTypeTable& table, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "kind,l1_mean,l1_std,fail_rate,norm_mean\n";
    for (const auto& r : table.rows) {
        out << to_string(r.kind) << ',' << format_double(r.l1_mean) << ',' << format_double(r.l1_std)
            << ',' << format_double(r.fail_rate) << ',' << format_double(r.norm_mean) << '\n';
    }
}

void write_prompt_type_norms_csv(const PromptTypeTable& table, std::size_t steps,
                                 const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "kind,step,t,norm_mean\n";
    for (const auto& r : table.rows) {
        for (std::size_t i = 0; i < r.norm_trace.size(); ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(steps);
            out << to_string(r.kind) << ',' << i << ',' << format_double(t) << ','
                << format_double(r.norm_trace[i]) << '\n';
        }
    }
}

void write_recon_csv(const ReconTable& table, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "config,l1_mean,l1_std,fail_rate\n";
    for (const auto& r : table.rows) {
        out << r.config << ',' << format_double(r.l1_mean) << ',' << format_double(r.l1_std) << ','
            << format_double(r.fail_rate) << '\n';
    }
}

}  // namespace flowinv
