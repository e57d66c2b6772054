#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "flowinv/core.hpp"
#include "flowinv/dataset.hpp"

namespace flowinv {

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t iterations = 20000;
    double lr = 1e-3;
    // Final learning rate as a fraction of `lr`; cosine decay in between.
    double lr_floor = 0.05;
    std::uint64_t seed = 0;
    FieldDims dims;
    // Worker threads for minibatch gradients. Results do not depend on it.
    std::size_t threads = 1;

    bool operator==(const TrainConfig&) const = default;

    void validate() const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    VelocityField field;
    DatasetSpec dataset;
    TrainConfig config;
    std::uint32_t version = kCheckpointVersion;

    bool operator==(const Checkpoint&) const = default;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> loss_curve;  // minibatch loss per iteration
};

// (1 - t) x0 + t x1
Latent flow_path(const Latent& x0, const Latent& x1, double t);

// mean((v(x_t, t, c) - (x1 - x0))^2) with x_t = (1 - t) x0 + t x1.
double flow_matching_loss(const VelocityField& field, const Latent& x0, const Latent& x1, double t,
                          const Condition& condition);

// Expected loss of the zero network on `spec`: E|x1 - x0|^2 / d.
double zero_network_loss(const DatasetSpec& spec);

// Seeded minibatch Adam on the flow matching loss. Deterministic for a
// fixed seed regardless of `config.threads`.
TrainResult train(const DatasetSpec& spec, const TrainConfig& config);

// Mean of the last `window` loss curve entries.
double tail_mean(const std::vector<double>& curve, std::size_t window);

void write_loss_csv(const std::vector<double>& curve, const std::filesystem::path& path);

}  // namespace flowinv
