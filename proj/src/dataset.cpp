#include "flowinv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "flowinv/errors.hpp"

namespace flowinv {

void DatasetSpec::validate() const {
    if (latent_dim == 0) {
        throw ConfigError("dataset latent dimension must be positive");
    }
    if (!(p_uncond >= 0.0 && p_uncond <= 1.0)) {
        throw ConfigError("p_uncond must lie in [0, 1]");
    }
    if (anchors.empty()) {
        throw ConfigError("dataset needs at least one anchor");
    }
    std::set<TokenId> seen;
    for (const auto& a : anchors) {
        if (a.tokens.size() != a.mode_of_token.size()) {
            throw ConfigError("anchor '" + a.name + "': token and mode maps differ in length");
        }
        for (TokenId t : a.tokens) {
            if (t == kEmptyToken) {
                throw ConfigError("anchor '" + a.name + "' uses reserved token 0");
            }
            if (!seen.insert(t).second) {
                throw ConfigError("token " + std::to_string(t) + " assigned twice");
            }
        }
        for (std::size_t m : a.mode_of_token) {
            if (m >= a.modes.size()) {
                throw ConfigError("anchor '" + a.name + "' maps a token to a missing mode");
            }
        }
        for (const auto& m : a.modes) {
            if (m.mean.size() != latent_dim || !all_finite(m.mean) || !(m.stddev >= 0.0)) {
                throw ConfigError("anchor '" + a.name + "' has an invalid mode");
            }
        }
        const std::set<std::size_t> distinct(a.mode_of_token.begin(), a.mode_of_token.end());
        if (a.tokens.size() < 4) {
            throw ConfigError("anchor '" + a.name + "' needs at least 4 tokens");
        }
        if (a.sink && distinct.size() != 1) {
            throw ConfigError("sink anchor '" + a.name + "' must map all tokens to one mode");
        }
        if (!a.sink && distinct.size() < 4) {
            throw ConfigError("diverse anchor '" + a.name + "' needs at least 4 distinct modes");
        }
    }
    for (TokenId t : ood_tokens) {
        if (t == kEmptyToken || seen.count(t) != 0) {
            throw ConfigError("OOD token " + std::to_string(t) + " collides with a trained token");
        }
    }
}

std::size_t DatasetSpec::vocab_size() const {
    TokenId hi = 0;
    for (const auto& a : anchors) {
        for (TokenId t : a.tokens) {
            hi = std::max(hi, t);
        }
    }
    for (TokenId t : ood_tokens) {
        hi = std::max(hi, t);
    }
    return static_cast<std::size_t>(hi) + 1;
}

std::vector<TokenId> DatasetSpec::trained_tokens() const {
    std::vector<TokenId> out;
    for (const auto& a : anchors) {
        out.insert(out.end(), a.tokens.begin(), a.tokens.end());
    }
    return out;
}

std::size_t DatasetSpec::anchor_of(TokenId token) const {
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const auto& toks = anchors[i].tokens;
        if (std::find(toks.begin(), toks.end(), token) != toks.end()) {
            return i;
        }
    }
    throw RangeError("token " + std::to_string(token) + " belongs to no anchor");
}

const Mode& DatasetSpec::mode_for_token(TokenId token) const {
    const auto& a = anchors[anchor_of(token)];
    const auto pos = static_cast<std::size_t>(
        std::find(a.tokens.begin(), a.tokens.end(), token) - a.tokens.begin());
    return a.modes[a.mode_of_token[pos]];
}

std::vector<Mode> DatasetSpec::all_modes() const {
    std::vector<Mode> out;
    for (const auto& a : anchors) {
        out.insert(out.end(), a.modes.begin(), a.modes.end());
    }
    return out;
}

std::size_t DatasetSpec::global_mode_index(TokenId token) const {
    const std::size_t ai = anchor_of(token);
    std::size_t base = 0;
    for (std::size_t i = 0; i < ai; ++i) {
        base += anchors[i].modes.size();
    }
    const auto& a = anchors[ai];
    const auto pos = static_cast<std::size_t>(
        std::find(a.tokens.begin(), a.tokens.end(), token) - a.tokens.begin());
    return base + a.mode_of_token[pos];
}

std::size_t DatasetSpec::nearest_mode(const Latent& x) const {
    const auto modes = all_modes();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < modes.size(); ++m) {
        double d = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double r = x[k] - modes[m].mean[k];
            d += r * r;
        }
        if (d < best_d) {
            best_d = d;
            best = m;
        }
    }
    return best;
}

TokenRegistry DatasetSpec::registry() const {
    TokenRegistry reg;
    reg.kinds.assign(vocab_size(), ConditionKind::True);
    reg.kinds[kEmptyToken] = ConditionKind::Empty;
    for (TokenId t : ood_tokens) {
        reg.kinds[t] = ConditionKind::Ood;
    }
    return reg;
}

DatasetSpec default_dataset_spec(std::uint64_t seed, const DefaultDatasetOptions& opts) {
    DatasetSpec spec;
    spec.latent_dim = opts.latent_dim;
    spec.p_uncond = opts.p_uncond;
    spec.seed = seed;

    const Rng root(seed);
    Rng sphere = root.split(0x5EED);
    auto point_on_sphere = [&]() {
        Vector v(opts.latent_dim);
        double norm = 0.0;
        while (norm == 0.0) {
            for (double& x : v) {
                x = sphere.normal();
            }
            norm = l2_norm(v);
        }
        for (double& x : v) {
            x *= opts.radius / norm;
        }
        return Mode{v, opts.stddev};
    };

    TokenId next = 1;
    auto make_anchor = [&](const std::string& name, bool sink) {
        Anchor a;
        a.name = name;
        a.sink = sink;
        const std::size_t n_modes = sink ? 1 : opts.tokens_per_anchor;
        for (std::size_t m = 0; m < n_modes; ++m) {
            a.modes.push_back(point_on_sphere());
        }
        for (std::size_t k = 0; k < opts.tokens_per_anchor; ++k) {
            a.tokens.push_back(next++);
            a.mode_of_token.push_back(sink ? 0 : k);
        }
        return a;
    };
    for (std::size_t i = 0; i < opts.diverse_anchors; ++i) {
        spec.anchors.push_back(make_anchor("diverse_" + std::string(1, static_cast<char>('a' + i)), false));
    }
    for (std::size_t i = 0; i < opts.sink_anchors; ++i) {
        spec.anchors.push_back(make_anchor("sink_" + std::string(1, static_cast<char>('a' + i)), true));
    }
    for (std::size_t i = 0; i < opts.ood_tokens; ++i) {
        spec.ood_tokens.push_back(next++);
    }
    spec.validate();
    return spec;
}

TokenId approximate_token(const DatasetSpec& spec, TokenId token) {
    const std::size_t ai = spec.anchor_of(token);
    const auto& a = spec.anchors[ai];
    const auto pos = static_cast<std::size_t>(
        std::find(a.tokens.begin(), a.tokens.end(), token) - a.tokens.begin());
    if (!a.sink) {
        for (std::size_t step = 1; step < a.tokens.size(); ++step) {
            const std::size_t j = (pos + step) % a.tokens.size();
            if (a.mode_of_token[j] != a.mode_of_token[pos]) {
                return a.tokens[j];
            }
        }
        throw ConfigError("anchor '" + a.name + "' has no token with a different mode");
    }
    if (spec.anchors.size() < 2) {
        throw ConfigError("sink approximation needs a second anchor");
    }
    const auto& other = spec.anchors[(ai + 1) % spec.anchors.size()];
    return other.tokens[pos % other.tokens.size()];
}

Latent sample_mode(const Mode& mode, Rng& rng) {
    Latent x(mode.mean.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = mode.mean[k] + mode.stddev * rng.normal();
    }
    return x;
}

TrainingPair sample_pair(const DatasetSpec& spec, Rng& rng) {
    std::size_t total = 0;
    for (const auto& a : spec.anchors) {
        total += a.tokens.size();
    }
    std::size_t pick = rng.below(total);
    TrainingPair p;
    for (const auto& a : spec.anchors) {
        if (pick < a.tokens.size()) {
            p.token = a.tokens[pick];
            p.x0 = sample_mode(a.modes[a.mode_of_token[pick]], rng);
            break;
        }
        pick -= a.tokens.size();
    }
    p.x1 = Latent(spec.latent_dim);
    for (double& x : p.x1.values) {
        x = rng.normal();
    }
    if (rng.uniform() < spec.p_uncond) {
        p.token = kEmptyToken;
    }
    return p;
}

}  // namespace flowinv
