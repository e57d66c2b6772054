#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "flowinv/core.hpp"
#include "flowinv/dataset.hpp"
#include "flowinv/rng.hpp"
#include "flowinv/training.hpp"

namespace flowinv::testing {

inline VelocityField with_parameters(const VelocityField& f, const Vector& params) {
    return VelocityField(f.dims(), params);
}

// v(z, t, c) == c_out for every input: zero final layer with bias c_out.
inline VelocityField constant_field(const Vector& c_out, std::size_t vocab = 4) {
    FieldDims dims;
    dims.latent_dim = c_out.size();
    dims.vocab_size = vocab;
    const VelocityField base = init_field(dims, 17, {.zero_final_layer = true});
    Vector p(base.parameters().begin(), base.parameters().end());
    const auto& last = base.layers().back();
    for (std::size_t k = 0; k < c_out.size(); ++k) {
        p[last.bias_offset + k] = c_out[k];
    }
    return VelocityField(dims, p);
}

// Velocity depends on the conditioning embedding only: first-layer
// weights on the z and t columns are zeroed.
inline VelocityField embedding_only_field(std::uint64_t seed, std::size_t vocab = 4) {
    FieldDims dims;
    dims.vocab_size = vocab;
    const VelocityField base = init_field(dims, seed);
    Vector p(base.parameters().begin(), base.parameters().end());
    const auto& first = base.layers().front();
    for (std::size_t o = 0; o < first.out; ++o) {
        for (std::size_t i = 0; i <= dims.latent_dim; ++i) {
            p[first.weight_offset + o * first.in + i] = 0.0;
        }
    }
    return VelocityField(dims, p);
}

inline Latent random_latent(Rng& rng, std::size_t d, double scale = 1.0) {
    Latent z(d);
    for (double& x : z.values) {
        x = scale * rng.normal();
    }
    return z;
}

inline Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    Vector v(n);
    for (double& x : v) {
        x = scale * rng.normal();
    }
    return v;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

// Small trained model shared by the model-level tests of one process.
inline const Checkpoint& small_trained_checkpoint() {
    static const Checkpoint ckpt = [] {
        const DatasetSpec spec = default_dataset_spec(1);
        TrainConfig cfg;
        cfg.seed = 1;
        cfg.iterations = 4000;
        cfg.dims.vocab_size = spec.vocab_size();
        return train(spec, cfg).checkpoint;
    }();
    return ckpt;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("flowinv_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace flowinv::testing
