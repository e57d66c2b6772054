#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flowinv/core.hpp"
#include "flowinv/rng.hpp"

namespace flowinv {

struct Mode {
    Vector mean;
    double stddev = 0.25;

    bool operator==(const Mode&) const = default;
};

// A semantic anchor: a group of condition tokens. Token k of the anchor
// maps to modes[mode_of_token[k]]. Sink anchors send every token to a
// single shared mode.
struct Anchor {
    std::string name;
    bool sink = false;
    std::vector<TokenId> tokens;
    std::vector<std::size_t> mode_of_token;
    std::vector<Mode> modes;

    bool operator==(const Anchor&) const = default;
};

struct DatasetSpec {
    std::size_t latent_dim = 8;
    std::vector<Anchor> anchors;
    std::vector<TokenId> ood_tokens;
    double p_uncond = 0.15;
    std::uint64_t seed = 0;

    bool operator==(const DatasetSpec&) const = default;

    // Throws ConfigError on any violated invariant.
    void validate() const;

    // Smallest vocabulary that covers every anchor and OOD token.
    std::size_t vocab_size() const;

    std::vector<TokenId> trained_tokens() const;

    // Anchor index owning `token`; throws RangeError for unassigned tokens.
    std::size_t anchor_of(TokenId token) const;

    const Mode& mode_for_token(TokenId token) const;

    // Modes of all anchors concatenated in anchor order.
    std::vector<Mode> all_modes() const;
    std::size_t global_mode_index(TokenId token) const;

    // Nearest mode mean (Euclidean) among all_modes().
    std::size_t nearest_mode(const Latent& x) const;

    TokenRegistry registry() const;
};

struct DefaultDatasetOptions {
    std::size_t latent_dim = 8;
    std::size_t diverse_anchors = 2;
    std::size_t sink_anchors = 2;
    std::size_t tokens_per_anchor = 8;
    std::size_t ood_tokens = 6;
    double radius = 3.0;
    double stddev = 0.25;
    double p_uncond = 0.15;
};

// Diverse anchors get one mode per token, sink anchors one shared mode.
// Mode means lie on a seeded sphere. Tokens are numbered from 1 in anchor
// order; OOD tokens follow.
DatasetSpec default_dataset_spec(std::uint64_t seed, const DefaultDatasetOptions& opts = {});

// The near-but-wrong conditioning for `token`: in a diverse anchor, the
// next token of the same anchor whose mode differs; in a sink anchor, the
// same-position token of the next anchor.
TokenId approximate_token(const DatasetSpec& spec, TokenId token);

// Draw from a token's mode.
Latent sample_mode(const Mode& mode, Rng& rng);

struct TrainingPair {
    Latent x0;
    TokenId token = kEmptyToken;
    Latent x1;
};

// x0 from the data mode of a uniformly drawn anchor token, x1 standard
// normal. With probability p_uncond the token is replaced by Empty.
TrainingPair sample_pair(const DatasetSpec& spec, Rng& rng);

}  // namespace flowinv
