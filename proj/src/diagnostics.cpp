#include "flowinv/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "flowinv/errors.hpp"
#include "flowinv/rng.hpp"

namespace flowinv {

double avg_pairwise_cosine_distance(std::span<const Vector> vectors) {
    const std::size_t n = vectors.size();
    if (n < 2) {
        throw MetricError("pairwise cosine distance needs at least 2 vectors");
    }
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (vectors[i].size() != vectors[0].size()) {
            throw ShapeError("pairwise cosine distance: vectors differ in length");
        }
        norms[i] = l2_norm(vectors[i]);
        if (norms[i] == 0.0) {
            throw MetricError("pairwise cosine distance: vector " + std::to_string(i) + " has zero norm");
        }
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < vectors[i].size(); ++k) {
                dot += vectors[i][k] * vectors[j][k];
            }
            const double cos = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
            acc += 2.0 * (1.0 - cos);  // (i, j) and (j, i)
        }
    }
    return acc / static_cast<double>(n * (n - 1));
}

DiversityReport diversity_ratio(std::span<const Vector> vis, std::span<const Vector> txt,
                                std::string anchor) {
    if (vis.size() != txt.size()) {
        throw ShapeError("diversity ratio: " + std::to_string(vis.size()) + " visual vs " +
                         std::to_string(txt.size()) + " text embeddings");
    }
    DiversityReport r;
    r.anchor = std::move(anchor);
    r.n = vis.size();
    r.delta_vis = avg_pairwise_cosine_distance(vis);
    r.delta_txt = avg_pairwise_cosine_distance(txt);
    if (r.delta_txt > kDegenerateDistance) {
        r.ratio = r.delta_vis / r.delta_txt;
    } else {
        r.degenerate_prompts = true;
    }
    return r;
}

double l1_reconstruction(const Latent& x_hat, const Latent& x_ref) {
    if (x_hat.size() != x_ref.size() || x_hat.size() == 0) {
        throw ShapeError("l1 reconstruction: latent dimensions differ");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < x_hat.size(); ++k) {
        acc += std::abs(x_hat[k] - x_ref[k]);
    }
    return acc / static_cast<double>(x_hat.size());
}

NormTraceStats norm_trace_stats(const std::map<ConditionKind, std::vector<Trajectory>>& groups) {
    NormTraceStats stats;
    for (const auto& [kind, trajs] : groups) {
        if (trajs.empty()) {
            throw MetricError(std::string("norm statistics: group '") + to_string(kind) + "' is empty");
        }
        Vector pooled;
        for (const auto& t : trajs) {
            for (const auto& r : t.records) {
                pooled.push_back(r.velocity_norm);
            }
        }
        if (pooled.empty()) {
            throw MetricError(std::string("norm statistics: group '") + to_string(kind) + "' has no records");
        }
        NormGroupStats s;
        s.trajectories = trajs.size();
        double acc = 0.0;
        for (double x : pooled) {
            acc += x;
        }
        s.mean = acc / static_cast<double>(pooled.size());
        s.max = *std::max_element(pooled.begin(), pooled.end());
        std::sort(pooled.begin(), pooled.end());
        const std::size_t m = pooled.size() / 2;
        s.median = pooled.size() % 2 == 1 ? pooled[m] : 0.5 * (pooled[m - 1] + pooled[m]);
        stats[kind] = s;
    }
    return stats;
}

VisualProjection::VisualProjection(std::size_t latent_dim, std::uint64_t seed, std::size_t out_dim)
    : in_(latent_dim), out_(out_dim), matrix_(latent_dim * out_dim) {
    Rng rng = Rng(seed).split(0x7715);
    const double scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
    for (double& x : matrix_) {
        x = scale * rng.normal();
    }
}

Vector VisualProjection::operator()(const Latent& x) const {
    if (x.size() != in_) {
        throw ShapeError("visual projection: latent dimension mismatch");
    }
    Vector y(out_, 0.0);
    for (std::size_t o = 0; o < out_; ++o) {
        for (std::size_t i = 0; i < in_; ++i) {
            y[o] += matrix_[o * in_ + i] * x[i];
        }
    }
    return normalized(y);
}

Vector normalized(std::span<const double> v) {
    const double n = l2_norm(v);
    if (n == 0.0) {
        throw MetricError("cannot normalize a zero vector");
    }
    Vector out(v.begin(), v.end());
    for (double& x : out) {
        x /= n;
    }
    return out;
}

}  // namespace flowinv
