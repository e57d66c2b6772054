#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flowinv {

using Vector = std::vector<double>;
using TokenId = std::uint32_t;

inline constexpr TokenId kEmptyToken = 0;
// Token value carried by Raw conditions, which bypass the embedding table.
inline constexpr TokenId kRawToken = 0xffffffffu;

// A point in the model's state space.
struct Latent {
    Vector values;

    Latent() = default;
    explicit Latent(std::size_t dim, double fill = 0.0) : values(dim, fill) {}
    explicit Latent(Vector v) : values(std::move(v)) {}

    std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::span<const double> span() const noexcept { return values; }

    bool operator==(const Latent&) const = default;
};

enum class Direction { Forward, Backward };

const char* to_string(Direction d) noexcept;

// Forward grids run 0 -> 1 (inversion), backward grids run 1 -> 0 (sampling).
struct TimeGrid {
    Vector points;
    Direction direction = Direction::Forward;

    // Uniform grid with `steps` intervals. The backward grid is the exact
    // reverse of the forward grid, so the two are mirror-symmetric bitwise.
    static TimeGrid uniform(std::size_t steps, Direction direction);

    std::size_t steps() const noexcept { return points.empty() ? 0 : points.size() - 1; }

    // Throws ConfigError when the grid violates its invariants.
    void validate() const;
};

enum class ConditionKind { Empty, True, Approximate, Ood, Raw };

const char* to_string(ConditionKind k) noexcept;
ConditionKind condition_kind_from_string(const std::string& s);

struct Condition {
    TokenId token = kEmptyToken;
    Vector embedding;
    ConditionKind kind = ConditionKind::Empty;
};

// A Raw condition carries an explicit embedding and no table lookup.
Condition raw_condition(Vector embedding);

// Maps token ids to their kind. Tokens not listed default to True.
struct TokenRegistry {
    std::vector<ConditionKind> kinds;

    ConditionKind kind_of(TokenId token) const;
};

struct FieldDims {
    std::size_t latent_dim = 8;
    std::size_t embed_dim = 16;
    std::size_t vocab_size = 39;
    std::vector<std::size_t> hidden = {64, 64};

    std::size_t input_dim() const noexcept { return latent_dim + 1 + embed_dim; }

    bool operator==(const FieldDims&) const = default;
};

// Offsets into the flat parameter buffer. Weights are row-major (out x in).
struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

// Conditional velocity network v(z, t, c): an MLP over the concatenation
// [z, t, embedding] with tanh hidden layers and a linear output layer,
// plus a vocab_size x embed_dim embedding table. All parameters live in
// one flat buffer: layers in order (weights then bias), then the table.
class VelocityField {
public:
    VelocityField() = default;
    VelocityField(FieldDims dims, Vector parameters);

    const FieldDims& dims() const noexcept { return dims_; }
    const std::vector<LayerShape>& layers() const noexcept { return layers_; }
    std::string activation() const { return "tanh"; }

    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }

    std::span<const double> weight(std::size_t layer) const;
    std::span<const double> bias(std::size_t layer) const;

    std::size_t embedding_offset() const noexcept { return embedding_offset_; }
    std::span<const double> embedding_row(TokenId token) const;

    bool operator==(const VelocityField& other) const {
        return dims_ == other.dims_ && params_ == other.params_;
    }

private:
    FieldDims dims_;
    std::vector<LayerShape> layers_;
    std::size_t embedding_offset_ = 0;
    Vector params_;
};

// Layer layout and total parameter count for `dims`.
std::vector<LayerShape> layer_layout(const FieldDims& dims, std::size_t* total_parameters = nullptr);

void validate_dims(const FieldDims& dims);

struct InitOptions {
    bool zero_final_layer = false;
};

// Seeded scaled-uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero
// biases, standard-normal embedding rows.
VelocityField init_field(const FieldDims& dims, std::uint64_t seed, InitOptions options = {});

Condition embed_condition(const VelocityField& field, TokenId token,
                          const TokenRegistry* registry = nullptr);

// Activations recorded by a forward pass, reused by the backward pass.
struct ForwardTrace {
    Vector input;
    std::vector<Vector> hidden;  // post-activation, one per hidden layer
    Vector output;
};

void forward(const VelocityField& field, std::span<const double> z, double t,
             std::span<const double> embedding, ForwardTrace& trace);

Latent eval_velocity(const VelocityField& field, const Latent& z, double t, const Condition& c);
Latent eval_velocity(const VelocityField& field, const Latent& z, double t,
                     std::span<const double> embedding);

double l2_norm(std::span<const double> v) noexcept;
bool all_finite(std::span<const double> v) noexcept;

}  // namespace flowinv
