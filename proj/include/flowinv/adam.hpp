#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "flowinv/core.hpp"

namespace flowinv {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamState() = default;
    AdamState(std::size_t size, AdamConfig cfg) : m(size, 0.0), v(size, 0.0), config(cfg) {}

    Vector m;
    Vector v;
    std::uint64_t step = 0;
    AdamConfig config;
};

// In-place bias-corrected Adam update of `target`.
void adam_step(AdamState& state, std::span<double> target, std::span<const double> grad);

}  // namespace flowinv
