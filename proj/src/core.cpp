#include "flowinv/core.hpp"

#include <algorithm>
#include <cmath>

#include "flowinv/errors.hpp"
#include "flowinv/rng.hpp"

namespace flowinv {

const char* to_string(Direction d) noexcept {
    return d == Direction::Forward ? "forward" : "backward";
}

TimeGrid TimeGrid::uniform(std::size_t steps, Direction direction) {
    if (steps == 0) {
        throw ConfigError("time grid needs at least one step");
    }
    TimeGrid grid;
    grid.direction = direction;
    grid.points.resize(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
        grid.points[i] = static_cast<double>(i) / static_cast<double>(steps);
    }
    grid.points.back() = 1.0;
    if (direction == Direction::Backward) {
        std::reverse(grid.points.begin(), grid.points.end());
    }
    return grid;
}

void TimeGrid::validate() const {
    if (points.size() < 2) {
        throw ConfigError("time grid needs at least one step");
    }
    const bool fwd = direction == Direction::Forward;
    if (points.front() != (fwd ? 0.0 : 1.0) || points.back() != (fwd ? 1.0 : 0.0)) {
        throw ConfigError("time grid endpoints must be exactly 0 and 1");
    }
    for (std::size_t i = 1; i < points.size(); ++i) {
        const bool ok = fwd ? points[i] > points[i - 1] : points[i] < points[i - 1];
        if (!ok) {
            throw ConfigError("time grid is not strictly monotone at index " + std::to_string(i));
        }
    }
}

const char* to_string(ConditionKind k) noexcept {
    switch (k) {
        case ConditionKind::Empty: return "empty";
        case ConditionKind::True: return "true";
        case ConditionKind::Approximate: return "approximate";
        case ConditionKind::Ood: return "ood";
        case ConditionKind::Raw: return "raw";
    }
    return "unknown";
}

ConditionKind condition_kind_from_string(const std::string& s) {
    for (auto k : {ConditionKind::Empty, ConditionKind::True, ConditionKind::Approximate,
                   ConditionKind::Ood, ConditionKind::Raw}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown condition kind '" + s + "'");
}

Condition raw_condition(Vector embedding) {
    if (!all_finite(embedding)) {
        throw NumericError("raw condition embedding has non-finite entries");
    }
    return Condition{kRawToken, std::move(embedding), ConditionKind::Raw};
}

ConditionKind TokenRegistry::kind_of(TokenId token) const {
    if (token == kEmptyToken) {
        return ConditionKind::Empty;
    }
    if (token < kinds.size()) {
        return kinds[token];
    }
    return ConditionKind::True;
}

void validate_dims(const FieldDims& dims) {
    if (dims.latent_dim == 0 || dims.embed_dim == 0 || dims.vocab_size == 0) {
        throw ConfigError("field dimensions must be positive");
    }
    for (std::size_t w : dims.hidden) {
        if (w == 0) {
            throw ConfigError("hidden widths must be positive");
        }
    }
}

std::vector<LayerShape> layer_layout(const FieldDims& dims, std::size_t* total_parameters) {
    std::vector<LayerShape> layers;
    std::size_t offset = 0;
    std::size_t in = dims.input_dim();
    auto push = [&](std::size_t out) {
        LayerShape s;
        s.in = in;
        s.out = out;
        s.weight_offset = offset;
        offset += in * out;
        s.bias_offset = offset;
        offset += out;
        layers.push_back(s);
        in = out;
    };
    for (std::size_t w : dims.hidden) {
        push(w);
    }
    push(dims.latent_dim);
    if (total_parameters != nullptr) {
        *total_parameters = offset + dims.vocab_size * dims.embed_dim;
    }
    return layers;
}

VelocityField::VelocityField(FieldDims dims, Vector parameters)
    : dims_(std::move(dims)), params_(std::move(parameters)) {
    validate_dims(dims_);
    std::size_t total = 0;
    layers_ = layer_layout(dims_, &total);
    if (params_.size() != total) {
        throw ShapeError("parameter buffer has " + std::to_string(params_.size()) +
                         " values, layout needs " + std::to_string(total));
    }
    embedding_offset_ = total - dims_.vocab_size * dims_.embed_dim;
    if (!all_finite(params_)) {
        throw NumericError("velocity field parameters contain non-finite values");
    }
}

std::span<const double> VelocityField::weight(std::size_t layer) const {
    const auto& s = layers_.at(layer);
    return std::span<const double>(params_).subspan(s.weight_offset, s.in * s.out);
}

std::span<const double> VelocityField::bias(std::size_t layer) const {
    const auto& s = layers_.at(layer);
    return std::span<const double>(params_).subspan(s.bias_offset, s.out);
}

std::span<const double> VelocityField::embedding_row(TokenId token) const {
    if (token >= dims_.vocab_size) {
        throw RangeError("token " + std::to_string(token) + " outside vocabulary [0, " +
                         std::to_string(dims_.vocab_size) + ")");
    }
    return std::span<const double>(params_).subspan(embedding_offset_ + token * dims_.embed_dim,
                                                    dims_.embed_dim);
}

VelocityField init_field(const FieldDims& dims, std::uint64_t seed, InitOptions options) {
    validate_dims(dims);
    std::size_t total = 0;
    const auto layers = layer_layout(dims, &total);
    Vector params(total, 0.0);
    const Rng root(seed);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& s = layers[l];
        if (options.zero_final_layer && l + 1 == layers.size()) {
            continue;
        }
        Rng rng = root.split(l + 1);
        const double scale = 1.0 / std::sqrt(static_cast<double>(s.in));
        for (std::size_t i = 0; i < s.in * s.out; ++i) {
            params[s.weight_offset + i] = scale * (2.0 * rng.uniform() - 1.0);
        }
    }
    Rng emb = root.split(0xE1B);
    const std::size_t emb_offset = total - dims.vocab_size * dims.embed_dim;
    for (std::size_t i = emb_offset; i < total; ++i) {
        params[i] = emb.normal();
    }
    return VelocityField(dims, std::move(params));
}

Condition embed_condition(const VelocityField& field, TokenId token, const TokenRegistry* registry) {
    const auto row = field.embedding_row(token);
    Condition c;
    c.token = token;
    c.embedding.assign(row.begin(), row.end());
    if (token == kEmptyToken) {
        c.kind = ConditionKind::Empty;
    } else {
        c.kind = registry != nullptr ? registry->kind_of(token) : ConditionKind::True;
    }
    return c;
}

void forward(const VelocityField& field, std::span<const double> z, double t,
             std::span<const double> embedding, ForwardTrace& trace) {
    const auto& dims = field.dims();
    if (z.size() != dims.latent_dim) {
        throw ShapeError("latent has dimension " + std::to_string(z.size()) + ", field expects " +
                         std::to_string(dims.latent_dim));
    }
    if (embedding.size() != dims.embed_dim) {
        throw ShapeError("embedding has dimension " + std::to_string(embedding.size()) +
                         ", field expects " + std::to_string(dims.embed_dim));
    }
    if (!(t >= 0.0 && t <= 1.0)) {
        throw RangeError("time " + std::to_string(t) + " outside [0, 1]");
    }

    trace.input.resize(dims.input_dim());
    std::copy(z.begin(), z.end(), trace.input.begin());
    trace.input[dims.latent_dim] = t;
    std::copy(embedding.begin(), embedding.end(), trace.input.begin() + dims.latent_dim + 1);

    const auto& layers = field.layers();
    const auto params = field.parameters();
    trace.hidden.resize(layers.size() - 1);
    const Vector* in = &trace.input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& s = layers[l];
        const bool last = l + 1 == layers.size();
        Vector& out = last ? trace.output : trace.hidden[l];
        out.resize(s.out);
        for (std::size_t o = 0; o < s.out; ++o) {
            const double* row = params.data() + s.weight_offset + o * s.in;
            double acc = params[s.bias_offset + o];
            for (std::size_t i = 0; i < s.in; ++i) {
                acc += row[i] * (*in)[i];
            }
            out[o] = last ? acc : std::tanh(acc);
        }
        in = &out;
    }
}

Latent eval_velocity(const VelocityField& field, const Latent& z, double t,
                     std::span<const double> embedding) {
    ForwardTrace trace;
    forward(field, z.span(), t, embedding, trace);
    return Latent(std::move(trace.output));
}

Latent eval_velocity(const VelocityField& field, const Latent& z, double t, const Condition& c) {
    return eval_velocity(field, z, t, std::span<const double>(c.embedding));
}

double l2_norm(std::span<const double> v) noexcept {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace flowinv
