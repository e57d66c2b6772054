#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowinv/diagnostics.hpp"
#include "flowinv/nti.hpp"
#include "flowinv/sampler.hpp"
#include "flowinv/training.hpp"

namespace flowinv {

// One generated sample per (token, repeat) from seeded noise under the
// token's condition; samples go through VisualProjection, tokens through
// their normalized embedding. `anchors` empty means every anchor.
std::vector<DiversityReport> run_sink_experiment(const Checkpoint& ckpt,
                                                 const std::vector<std::string>& anchors,
                                                 std::size_t samples_per_token, std::uint64_t seed,
                                                 const GuidanceConfig& guidance = {});

struct KindSummary {
    ConditionKind kind = ConditionKind::Empty;
    std::size_t trials = 0;
    std::size_t failures = 0;
    double l1_mean = 0.0;
    double l1_std = 0.0;
    double fail_rate = 0.0;
    double norm_mean = 0.0;
    Vector norm_trace;       // mean normalized inversion velocity norm per record
    Vector l1_per_trial;     // NaN for failed trials
    Vector norm_per_trial;   // mean trace norm per trial, NaN for failed trials
};

struct PromptTypeTable {
    std::vector<KindSummary> rows;
};

inline const std::vector<ConditionKind> kDefaultPromptKinds = {
    ConditionKind::True, ConditionKind::Approximate, ConditionKind::Empty};

// Per trial: draw a source from a known mode, invert and resample under
// each requested condition kind, record L1 and the inversion norm trace.
// Latent explosions count as failed trials.
PromptTypeTable run_prompt_type_experiment(const Checkpoint& ckpt, std::size_t trials,
                                           std::uint64_t seed, const GuidanceConfig& guidance = {},
                                           const std::vector<ConditionKind>& kinds = kDefaultPromptKinds);

struct ReconRow {
    std::string config;
    std::size_t trials = 0;
    std::size_t failures = 0;
    double l1_mean = 0.0;
    double l1_std = 0.0;
    double fail_rate = 0.0;
    Vector l1_per_trial;
};

struct ReconTable {
    std::vector<ReconRow> rows;  // euler_approx, nti_approx, euler_empty, nti_empty
};

ReconTable run_reconstruction_table(const Checkpoint& ckpt, std::size_t trials, std::uint64_t seed,
                                    const GuidanceConfig& guidance = {}, const NTIConfig& nti = {});

struct TrialSource {
    TokenId token = kEmptyToken;
    Latent x0;
};

// Token drawn uniformly from the anchors (diverse anchors only when
// `diverse_only`), latent drawn from its mode.
TrialSource draw_trial_source(const DatasetSpec& spec, Rng& rng, bool diverse_only = false);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::size_t count = 0;
};

// Mean and sample standard deviation of the finite entries.
MeanStd finite_mean_std(const Vector& values);

void write_sink_csv(const std::vector<DiversityReport>& reports, const std::filesystem::path& path);
void write_prompt_type_csv(const PromptTypeTable& table, const std::filesystem::path& path);
void write_prompt_type_norms_csv(const PromptTypeTable& table, std::size_t steps,
                                 const std::filesystem::path& path);
void write_recon_csv(const ReconTable& table, const std::filesystem::path& path);

}  // namespace flowinv
