#include "flowinv/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <thread>

#include "flowinv/adam.hpp"
#include "flowinv/autodiff.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/rng.hpp"

namespace flowinv {

namespace {
// Samples per leaf of the gradient reduction tree.
constexpr std::size_t kChunk = 8;
}  // namespace

void TrainConfig::validate() const {
    if (batch_size == 0) {
        throw ConfigError("batch size must be positive");
    }
    if (!std::isfinite(lr) || !(lr > 0.0)) {
        throw ConfigError("learning rate must be positive and finite");
    }
    if (!(lr_floor >= 0.0 && lr_floor <= 1.0)) {
        throw ConfigError("lr_floor must lie in [0, 1]");
    }
    if (threads == 0) {
        throw ConfigError("thread count must be positive");
    }
    validate_dims(dims);
}

Latent flow_path(const Latent& x0, const Latent& x1, double t) {
    if (x0.size() != x1.size()) {
        throw ShapeError("x0 and x1 dimensions differ");
    }
    Latent xt(x0.size());
    for (std::size_t k = 0; k < xt.size(); ++k) {
        xt[k] = (1.0 - t) * x0[k] + t * x1[k];
    }
    return xt;
}

double flow_matching_loss(const VelocityField& field, const Latent& x0, const Latent& x1, double t,
                          const Condition& condition) {
    const Latent xt = flow_path(x0, x1, t);
    const Latent v = eval_velocity(field, xt, t, condition);
    double acc = 0.0;
    for (std::size_t k = 0; k < xt.size(); ++k) {
        const double r = v[k] - (x1[k] - x0[k]);
        acc += r * r;
    }
    return acc / static_cast<double>(xt.size());
}

double zero_network_loss(const DatasetSpec& spec) {
    // E|x1|^2 = d; E|x0|^2 averages |mean|^2 + d*stddev^2 over tokens.
    const auto d = static_cast<double>(spec.latent_dim);
    double data = 0.0;
    std::size_t count = 0;
    for (const auto& a : spec.anchors) {
        for (std::size_t m : a.mode_of_token) {
            const auto& mode = a.modes[m];
            data += l2_norm(mode.mean) * l2_norm(mode.mean) + d * mode.stddev * mode.stddev;
            ++count;
        }
    }
    return (d + data / static_cast<double>(count)) / d;
}

namespace {

struct ChunkResult {
    Vector grad;
    double loss = 0.0;
};

// Gradient of the summed per-sample loss over samples [begin, end).
void chunk_gradient(const VelocityField& field, const DatasetSpec& spec, const Rng& iter_rng,
                    std::size_t begin, std::size_t end, double scale, ChunkResult& out) {
    const auto& dims = field.dims();
    const std::size_t d = dims.latent_dim;
    out.grad.assign(field.parameter_count(), 0.0);
    out.loss = 0.0;
    ForwardTrace trace;
    Vector grad_out(d);
    Vector input_grad(dims.input_dim());
    Latent xt(d);
    for (std::size_t s = begin; s < end; ++s) {
        Rng rng = iter_rng.split(s);
        const TrainingPair p = sample_pair(spec, rng);
        const double t = rng.uniform();
        for (std::size_t k = 0; k < d; ++k) {
            xt[k] = (1.0 - t) * p.x0[k] + t * p.x1[k];
        }
        forward(field, xt.span(), t, field.embedding_row(p.token), trace);
        double loss = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double r = trace.output[k] - (p.x1[k] - p.x0[k]);
            loss += r * r;
            grad_out[k] = 2.0 * r * scale;
        }
        out.loss += loss / static_cast<double>(d);
        backward(field, trace, grad_out, out.grad, input_grad);
        const std::size_t row = field.embedding_offset() + p.token * dims.embed_dim;
        for (std::size_t k = 0; k < dims.embed_dim; ++k) {
            out.grad[row + k] += input_grad[d + 1 + k];
        }
    }
}

// Pairwise tree reduction in fixed order; result lands in chunks[0].
void tree_reduce(std::vector<ChunkResult>& chunks) {
    for (std::size_t stride = 1; stride < chunks.size(); stride *= 2) {
        for (std::size_t i = 0; i + stride < chunks.size(); i += 2 * stride) {
            auto& dst = chunks[i];
            const auto& src = chunks[i + stride];
            for (std::size_t k = 0; k < dst.grad.size(); ++k) {
                dst.grad[k] += src.grad[k];
            }
            dst.loss += src.loss;
        }
    }
}

}  // namespace

TrainResult train(const DatasetSpec& spec, const TrainConfig& config) {
    spec.validate();
    config.validate();
    if (config.dims.latent_dim != spec.latent_dim) {
        throw ConfigError("field latent dimension differs from dataset dimension");
    }
    if (config.dims.vocab_size < spec.vocab_size()) {
        throw ConfigError("field vocabulary smaller than dataset vocabulary");
    }

    const Rng root(config.seed);
    TrainResult result;
    result.checkpoint.dataset = spec;
    result.checkpoint.config = config;
    result.checkpoint.field = init_field(config.dims, root.split(1).next_u64());
    VelocityField& field = result.checkpoint.field;
    result.loss_curve.reserve(config.iterations);

    const Rng data_root = root.split(2);
    AdamState adam(field.parameter_count(), AdamConfig{config.lr, 0.9, 0.999, 1e-8});
    const std::size_t n_chunks = (config.batch_size + kChunk - 1) / kChunk;
    std::vector<ChunkResult> chunks(n_chunks);
    const double scale = 1.0 / (static_cast<double>(spec.latent_dim) *
                                static_cast<double>(config.batch_size));
    const std::size_t workers = std::min(config.threads, n_chunks);

    for (std::size_t it = 0; it < config.iterations; ++it) {
        const Rng iter_rng = data_root.split(it);
        auto run_chunks = [&](std::size_t worker) {
            for (std::size_t c = worker; c < n_chunks; c += workers) {
                const std::size_t begin = c * kChunk;
                const std::size_t end = std::min(begin + kChunk, config.batch_size);
                chunk_gradient(field, spec, iter_rng, begin, end, scale, chunks[c]);
            }
        };
        if (workers > 1) {
            std::vector<std::jthread> pool;
            for (std::size_t w = 1; w < workers; ++w) {
                pool.emplace_back(run_chunks, w);
            }
            run_chunks(0);
        } else {
            run_chunks(0);
        }
        tree_reduce(chunks);
        const double loss = chunks[0].loss / static_cast<double>(config.batch_size);
        if (!std::isfinite(loss) || !all_finite(chunks[0].grad)) {
            throw TrainingError(it, "training diverged at iteration " + std::to_string(it));
        }
        result.loss_curve.push_back(loss);

        const double progress =
            static_cast<double>(it) / static_cast<double>(std::max<std::size_t>(config.iterations, 1));
        const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        adam.config.lr = config.lr * (config.lr_floor + (1.0 - config.lr_floor) * cosine);
        adam_step(adam, field.parameters(), chunks[0].grad);
    }
    return result;
}

double tail_mean(const std::vector<double>& curve, std::size_t window) {
    if (curve.empty()) {
        return 0.0;
    }
    const std::size_t n = std::min(window, curve.size());
    double acc = 0.0;
    for (std::size_t i = curve.size() - n; i < curve.size(); ++i) {
        acc += curve[i];
    }
    return acc / static_cast<double>(n);
}

void write_loss_csv(const std::vector<double>& curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.precision(17);
    out << "iteration,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        out << i << ',' << curve[i] << '\n';
    }
}

}  // namespace flowinv
