#include "doctest.h"

#include <cmath>

#include "flowinv/core.hpp"
#include "flowinv/errors.hpp"
#include "test_support.hpp"

using namespace flowinv;
using namespace flowinv::testing;

TEST_CASE("time grid endpoints and direction") {
    for (std::size_t n : {1u, 7u, 50u}) {
        const auto fwd = TimeGrid::uniform(n, Direction::Forward);
        const auto bwd = TimeGrid::uniform(n, Direction::Backward);
        CHECK(fwd.steps() == n);
        CHECK(fwd.points.front() == 0.0);
        CHECK(fwd.points.back() == 1.0);
        CHECK(bwd.points.front() == 1.0);
        CHECK(bwd.points.back() == 0.0);
        fwd.validate();
        bwd.validate();
        for (std::size_t i = 0; i <= n; ++i) {
            CHECK(bwd.points[i] == fwd.points[n - i]);
        }
    }
    CHECK_THROWS_AS(TimeGrid::uniform(0, Direction::Forward), ConfigError);
    TimeGrid bad{{0.0, 0.6, 0.5, 1.0}, Direction::Forward};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("embed_condition returns table rows") {
    FieldDims dims;
    dims.vocab_size = 10;
    const auto field = init_field(dims, 5);

    const auto empty = embed_condition(field, 0);
    CHECK(empty.kind == ConditionKind::Empty);
    CHECK(empty.token == 0);

    const auto c3 = embed_condition(field, 3);
    const auto row = field.embedding_row(3);
    REQUIRE(c3.embedding.size() == dims.embed_dim);
    for (std::size_t k = 0; k < dims.embed_dim; ++k) {
        CHECK(c3.embedding[k] == row[k]);
    }
    CHECK(c3.kind == ConditionKind::True);

    CHECK_THROWS_AS(embed_condition(field, 10), RangeError);

    TokenRegistry reg;
    reg.kinds.assign(10, ConditionKind::True);
    reg.kinds[7] = ConditionKind::Ood;
    CHECK(embed_condition(field, 7, &reg).kind == ConditionKind::Ood);
    CHECK(embed_condition(field, 0, &reg).kind == ConditionKind::Empty);
}

TEST_CASE("raw conditions bypass the table") {
    const auto c = raw_condition({1.0, 2.0});
    CHECK(c.kind == ConditionKind::Raw);
    CHECK(c.token == kRawToken);
    CHECK_THROWS_AS(raw_condition({NAN}), NumericError);
}

TEST_CASE("init_field is seeded and has the expected parameter count") {
    FieldDims dims;  // d=8, d_c=16, V=39, widths {64, 64}
    const auto a = init_field(dims, 42);
    const auto b = init_field(dims, 42);
    const auto c = init_field(dims, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    const std::size_t expected = (8 + 1 + 16) * 64 + 64 + 64 * 64 + 64 + 64 * 8 + 8 + 39 * 16;
    CHECK(a.parameter_count() == expected);
    CHECK(a.parameter_count() == 6968);

    // biases start at zero
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        for (double v : a.bias(l)) {
            CHECK(v == 0.0);
        }
    }

    FieldDims bad = dims;
    bad.latent_dim = 0;
    CHECK_THROWS_AS(init_field(bad, 1), ConfigError);
    bad = dims;
    bad.hidden = {64, 0};
    CHECK_THROWS_AS(init_field(bad, 1), ConfigError);
}

TEST_CASE("zero final layer gives zero velocity everywhere") {
    FieldDims dims;
    const auto field = init_field(dims, 9, {.zero_final_layer = true});
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const Latent z = random_latent(rng, dims.latent_dim, 3.0);
        const auto v = eval_velocity(field, z, rng.uniform(), embed_condition(field, i % 5));
        for (double x : v.values) {
            CHECK(x == 0.0);
        }
    }
}

TEST_CASE("one hidden unit forward pass matches hand computation") {
    FieldDims dims;
    dims.latent_dim = 1;
    dims.embed_dim = 1;
    dims.vocab_size = 2;
    dims.hidden = {1};
    // layer0: w = (0.5, -1, 2), b = 0.1; layer1: w = 1.5, b = -0.2; table rows 0 and 0.25
    const VelocityField field(dims, {0.5, -1.0, 2.0, 0.1, 1.5, -0.2, 0.0, 0.25});
    const auto v = eval_velocity(field, Latent(Vector{0.4}), 0.3, embed_condition(field, 1));
    // pre-activation 0.5*0.4 - 0.3 + 2*0.25 + 0.1 = 0.5
    CHECK(v[0] == doctest::Approx(1.5 * std::tanh(0.5) - 0.2).epsilon(1e-15));
    CHECK(v[0] == doctest::Approx(0.49317573589001457).epsilon(1e-15));
}

TEST_CASE("eval_velocity is deterministic and validates shapes") {
    FieldDims dims;
    const auto field = init_field(dims, 1);
    Rng rng(8);
    const Latent z = random_latent(rng, dims.latent_dim);
    const auto c = embed_condition(field, 4);
    const auto v1 = eval_velocity(field, z, 0.37, c);
    const auto v2 = eval_velocity(field, z, 0.37, c);
    CHECK(v1 == v2);

    CHECK_THROWS_AS(eval_velocity(field, Latent(3), 0.5, c), ShapeError);
    CHECK_THROWS_AS(eval_velocity(field, z, 0.5, Vector(3, 0.0)), ShapeError);
    CHECK_THROWS_AS(eval_velocity(field, z, 1.5, c), RangeError);
}

TEST_CASE("velocity is smooth: finite differences are finite and consistent") {
    FieldDims dims;
    const auto field = init_field(dims, 12);
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Latent z = random_latent(rng, dims.latent_dim);
        const Latent dir = random_latent(rng, dims.latent_dim);
        const auto c = embed_condition(field, 2);
        const double t = 0.2 + 0.6 * rng.uniform();
        auto at = [&](double s) {
            Latent p = z;
            for (std::size_t k = 0; k < p.size(); ++k) {
                p[k] += s * dir[k];
            }
            return eval_velocity(field, p, t, c);
        };
        const auto coarse_p = at(1e-3), coarse_m = at(-1e-3);
        const auto fine_p = at(1e-5), fine_m = at(-1e-5);
        for (std::size_t k = 0; k < dims.latent_dim; ++k) {
            const double coarse = (coarse_p[k] - coarse_m[k]) / 2e-3;
            const double fine = (fine_p[k] - fine_m[k]) / 2e-5;
            CHECK(std::isfinite(fine));
            CHECK(fine == doctest::Approx(coarse).epsilon(1e-4).scale(1.0));
        }
    }
}

TEST_CASE("parameter buffer size is validated") {
    FieldDims dims;
    CHECK_THROWS_AS(VelocityField(dims, Vector(10, 0.0)), ShapeError);
}
