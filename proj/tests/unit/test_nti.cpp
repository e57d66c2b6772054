#include "doctest.h"

#include "flowinv/dataset.hpp"
#include "flowinv/diagnostics.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/nti.hpp"
#include "test_support.hpp"

using namespace flowinv;
using namespace flowinv::testing;

TEST_CASE("NTI is a fixpoint when Empty already reproduces the reference") {
    // With an embedding-only field the inversion and the reconstruction
    // follow the same constant velocity, so every step loss starts at zero.
    const auto f = embedding_only_field(11);
    Rng rng(3);
    const Latent z0 = random_latent(rng, 8);
    const GuidanceConfig cfg{5.0, 20};
    const auto cond = embed_condition(f, 0);
    const auto fwd = invert(f, z0, cond, cfg);
    const auto r = nti_optimize(f, fwd, cond, NTIConfig{});
    const auto row = f.embedding_row(0);
    for (std::size_t i = 0; i < r.schedule.steps(); ++i) {
        CHECK(max_abs_diff(r.schedule.embeddings[i], Vector(row.begin(), row.end())) < 1e-10);
        CHECK(r.schedule.initial_loss[i] < 1e-24);
    }
    CHECK(l1_reconstruction(r.reconstruction, z0) < 1e-12);
}

TEST_CASE("zero inner steps reproduces plain sampling") {
    FieldDims dims;
    const auto f = init_field(dims, 5);
    Rng rng(1);
    const Latent z0 = random_latent(rng, 8);
    const GuidanceConfig cfg{5.0, 10};
    const auto cond = embed_condition(f, 2);
    const auto fwd = invert(f, z0, cond, cfg);
    NTIConfig nc;
    nc.inner_steps = 0;
    const auto r = nti_optimize(f, fwd, cond, nc);
    const auto plain = sample(f, fwd.final_latent(), cond, cfg);
    CHECK(r.reconstruction == plain.final_latent());
    CHECK(r.schedule.initial_loss == r.schedule.final_loss);
}

TEST_CASE("schedule shape and consistency with sample") {
    FieldDims dims;
    const auto f = init_field(dims, 6);
    Rng rng(2);
    for (std::size_t n : {1u, 3u, 17u}) {
        const GuidanceConfig cfg{5.0, n};
        const Latent z0 = random_latent(rng, 8);
        const auto cond = embed_condition(f, 1);
        const auto fwd = invert(f, z0, cond, cfg);
        NTIConfig nc;
        nc.lr = 1e-2;
        const auto r = nti_optimize(f, fwd, cond, nc);
        CHECK(r.schedule.steps() == n);
        CHECK(r.schedule.initial_loss.size() == n);
        CHECK(r.schedule.final_loss.size() == n);
        for (const auto& e : r.schedule.embeddings) {
            CHECK(e.size() == dims.embed_dim);
        }
        const auto replay = sample(f, fwd.final_latent(), cond, cfg, &r.schedule);
        CHECK(replay.final_latent() == r.reconstruction);
        REQUIRE(replay.records.size() == r.trajectory.records.size());
        for (std::size_t i = 0; i < replay.records.size(); ++i) {
            CHECK(replay.records[i].z == r.trajectory.records[i].z);
        }
    }
}

TEST_CASE("NTI improves approximate-prompt reconstruction on a trained model") {
    const auto& ckpt = small_trained_checkpoint();
    const auto& spec = ckpt.dataset;
    const auto& f = ckpt.field;
    const GuidanceConfig cfg;
    Rng rng(77);
    std::size_t improved = 0;
    const std::size_t trials = 6;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const TokenId token = spec.anchors[0].tokens[trial];
        const Latent x0 = sample_mode(spec.mode_for_token(token), rng);
        const auto cond = embed_condition(f, approximate_token(spec, token));
        const auto fwd = invert(f, x0, cond, cfg);
        const auto plain = sample(f, fwd.final_latent(), cond, cfg);
        const auto r = nti_optimize(f, fwd, cond, NTIConfig{});
        for (std::size_t i = 0; i < r.schedule.steps(); ++i) {
            CHECK(r.schedule.final_loss[i] <= r.schedule.initial_loss[i] * (1.0 + 1e-9));
        }
        if (l1_reconstruction(r.reconstruction, x0) <= l1_reconstruction(plain.final_latent(), x0)) {
            ++improved;
        }
    }
    CHECK(improved >= trials - 1);
}

TEST_CASE("warm start keeps the previous embedding") {
    FieldDims dims;
    const auto f = init_field(dims, 8);
    Rng rng(4);
    const GuidanceConfig cfg{5.0, 6};
    const auto cond = embed_condition(f, 1);
    const auto fwd = invert(f, random_latent(rng, 8), cond, cfg);
    NTIConfig nc;
    nc.lr = 1e-2;
    nc.warm_start = true;
    const auto warm = nti_optimize(f, fwd, cond, nc);
    nc.warm_start = false;
    const auto cold = nti_optimize(f, fwd, cond, nc);
    CHECK(warm.schedule.embeddings[0] == cold.schedule.embeddings[0]);
    CHECK(warm.schedule.embeddings[1] != cold.schedule.embeddings[1]);
}

TEST_CASE("NTI input validation") {
    FieldDims dims;
    const auto f = init_field(dims, 8);
    const auto cond = embed_condition(f, 1);
    const auto fwd = invert(f, Latent(8, 0.5), cond, GuidanceConfig{5.0, 4});
    NTIConfig bad;
    bad.lr = -1.0;
    CHECK_THROWS_AS(nti_optimize(f, fwd, cond, bad), ConfigError);
    const auto bwd = sample(f, Latent(8, 0.5), cond, GuidanceConfig{5.0, 4});
    CHECK_THROWS(nti_optimize(f, bwd, cond, NTIConfig{}));
    NTIConfig nan_guidance;
    nan_guidance.guidance = std::nan("");
    CHECK_THROWS(nti_optimize(f, fwd, cond, nan_guidance));
}
