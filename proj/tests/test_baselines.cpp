#include "fixtures.hpp"

#include "ktemper/baselines.hpp"
#include "ktemper/diagnostics.hpp"
#include "ktemper/error.hpp"
#include "ktemper/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace ktemper;
using namespace fixtures;
namespace bl = ktemper::baselines;

namespace {

Matrix random_simplex_rows(RandomStream& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix mu(rows, cols);
    for (Eigen::Index t = 0; t < rows; ++t) {
        for (Eigen::Index u = 0; u < cols; ++u) mu(t, u) = -std::log(1.0 - rng.uniform());
        mu.row(t) /= mu.row(t).sum();
    }
    return mu;
}

// Threshold tau with sum max(v - tau, 0) = 1, by bisection in long double.
Vector bisection_projection(const Vector& v) {
    long double lo = static_cast<long double>(v.minCoeff()) - 1.0L;
    long double hi = static_cast<long double>(v.maxCoeff());
    for (int it = 0; it < 200; ++it) {
        const long double mid = 0.5L * (lo + hi);
        long double s = 0.0L;
        for (Eigen::Index i = 0; i < v.size(); ++i) s += std::max(static_cast<long double>(v[i]) - mid, 0.0L);
        (s > 1.0L ? lo : hi) = mid;
    }
    const long double tau = 0.5L * (lo + hi);
    Vector w(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        w[i] = static_cast<double>(std::max(static_cast<long double>(v[i]) - tau, 0.0L));
    return w;
}

}  // namespace

TEST_CASE("one-hot relaxation equals the discrete cost") {
    const auto m = seeded(4, 4, 3, 11);
    for (const auto& steps : all_sequences(m)) {
        const ControlSequence u(steps);
        const double relaxed = bl::relaxed_cost(m, bl::one_hot(m, u));
        CHECK(std::abs(relaxed - static_cast<double>(explicit_cost(m, u))) <= 1e-12);
        CHECK(bl::round_to_sequence(m, bl::one_hot(m, u)) == u);
    }
}

TEST_CASE("identical actions make the weights irrelevant") {
    const Matrix a = seeded(3, 1, 1, 4).dynamics(0);
    const KoopmanModel m(labels(3), {a, a, a}, row({1.0, -0.5, 0.25}), col({0.3, 0.2, -0.1}), 4);
    RandomStream rng(1, 0);
    const double reference = bl::relaxed_cost(m, bl::centroid(m));
    for (int k = 0; k < 20; ++k) {
        const bl::RelaxedControls mu{random_simplex_rows(rng, 4, 3)};
        CHECK(std::abs(bl::relaxed_cost(m, mu) - reference) <= 1e-12);
        const Matrix g = bl::relaxed_gradient(m, mu);
        for (Eigen::Index t = 0; t < 4; ++t) CHECK(g.row(t).maxCoeff() - g.row(t).minCoeff() <= 1e-12);
    }
}

TEST_CASE("single step gradient is c A(u) psi") {
    const auto m = seeded(5, 1, 4, 2);
    const Matrix g = bl::relaxed_gradient(m, bl::centroid(m));
    for (std::size_t u = 0; u < 4; ++u) {
        const double expected = m.cost_row() * m.dynamics(u) * m.initial_state();
        CHECK(std::abs(g(0, static_cast<Eigen::Index>(u)) - expected) <= 1e-12);
    }
}

TEST_CASE("gradient matches central differences") {
    const auto m = seeded(5, 6, 3, 21);
    RandomStream rng(3, 0);
    const double h = 1e-6;
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        const Matrix mu = random_simplex_rows(rng, 6, 3);
        const Matrix g = bl::relaxed_gradient(m, {mu});
        for (Eigen::Index t = 0; t < 6; ++t) {
            for (Eigen::Index u = 0; u < 3; ++u) {
                Matrix plus = mu;
                Matrix minus = mu;
                plus(t, u) += h;
                minus(t, u) -= h;
                const double fd = (bl::mixed_cost(m, plus) - bl::mixed_cost(m, minus)) / (2.0 * h);
                worst = std::max(worst, std::abs(fd - g(t, u)));
            }
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("relaxed cost is bounded below by the best vertex") {
    const auto m = seeded(4, 5, 3, 6);
    const double j_star = diagnostics::brute_force_min(m).j_star;
    RandomStream rng(9, 0);
    for (int k = 0; k < 200; ++k) CHECK(bl::relaxed_cost(m, {random_simplex_rows(rng, 5, 3)}) >= j_star - 1e-12);
}

TEST_CASE("relaxed control validation") {
    const auto m = seeded(3, 2, 2, 1);
    CHECK_THROWS_AS(bl::validate(m, {Matrix::Constant(2, 2, 0.4)}), InputError);
    CHECK_THROWS_AS(bl::validate(m, {Matrix::Constant(3, 2, 0.5)}), InputError);
    Matrix neg(2, 2);
    neg << 1.5, -0.5, 0.5, 0.5;
    CHECK_THROWS_AS(bl::validate(m, {neg}), InputError);
    CHECK_NOTHROW(bl::validate(m, bl::centroid(m)));

    const auto masked = scalar_model({1.0, 2.0, 3.0}, 2, KoopmanModel::ActionMask{{0, 1}, {2}});
    const auto c = bl::centroid(masked);
    CHECK(c.mu(0, 0) == doctest::Approx(0.5));
    CHECK(c.mu(0, 2) == 0.0);
    CHECK(c.mu(1, 2) == 1.0);
    Matrix bad = c.mu;
    bad(1, 0) = 0.5;
    bad(1, 2) = 0.5;
    CHECK_THROWS_AS(bl::validate(masked, {bad}), InputError);
}

TEST_CASE("simplex projection closed forms") {
    const Vector inside = col({0.2, 0.3, 0.5});
    CHECK((bl::project_simplex(inside) - inside).cwiseAbs().maxCoeff() <= 1e-15);
    const Vector p = bl::project_simplex(col({0.8, 0.6}));
    CHECK(std::abs(p[0] - 0.6) <= 1e-15);
    CHECK(std::abs(p[1] - 0.4) <= 1e-15);
    const Vector flat = bl::project_simplex(Vector::Constant(5, 7.0));
    CHECK((flat.array() - 0.2).abs().maxCoeff() <= 1e-15);
    const Vector far = bl::project_simplex(col({10.0, -10.0, 0.0}));
    CHECK(far == col({1.0, 0.0, 0.0}));
}

TEST_CASE("simplex projection against a bisection oracle") {
    RandomStream rng(17, 0);
    double worst = 0.0;
    double worst_sum = 0.0;
    double lipschitz_excess = 0.0;
    double idempotence = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto n = static_cast<Eigen::Index>(2 + rng.index(9));
        Vector v(n);
        Vector w(n);
        const double scale = 0.1 + 5.0 * rng.uniform();
        for (Eigen::Index i = 0; i < n; ++i) {
            v[i] = scale * rng.normal();
            w[i] = scale * rng.normal();
        }
        const Vector pv = bl::project_simplex(v);
        const Vector pw = bl::project_simplex(w);
        worst = std::max(worst, (pv - bisection_projection(v)).cwiseAbs().maxCoeff());
        worst_sum = std::max(worst_sum, std::abs(pv.sum() - 1.0));
        CHECK(pv.minCoeff() >= 0.0);
        lipschitz_excess = std::max(lipschitz_excess, (pv - pw).norm() - (v - w).norm());
        idempotence = std::max(idempotence, (bl::project_simplex(pv) - pv).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-10);
    CHECK(worst_sum <= 1e-15 * 4);
    CHECK(lipschitz_excess <= 1e-12);
    CHECK(idempotence <= 1e-15);
}

TEST_CASE("gradient solve") {
    SUBCASE("single action") {
        const auto m = scalar_model({0.9}, 4);
        const auto r = bl::gradient_solve(m, {.iterations = 5});
        CHECK(r.rounded == ControlSequence({0, 0, 0, 0}));
        CHECK(std::abs(r.rounded_cost - std::pow(0.9, 4)) <= 1e-15);
    }
    SUBCASE("improves and never beats the optimum after rounding") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto m = seeded(4, 8, 3, seed);
            const double j_star = diagnostics::brute_force_min(m).j_star;
            const auto r = bl::gradient_solve(m, {.iterations = 150, .seed = seed});
            CHECK(r.relaxed <= r.relaxed_history.front() + 1e-15);
            CHECK(r.relaxed_history.size() == 151);
            CHECK(r.rounded_history.size() == 151);
            CHECK(r.rounded_cost >= j_star - 1e-12);
            CHECK(std::abs(r.rounded_cost - cost(m, r.rounded)) <= 1e-12);
            CHECK(r.relaxed >= j_star - 1e-12);
            CHECK_NOTHROW(bl::validate(m, r.mu));
        }
    }
    SUBCASE("reproducible with jitter") {
        const auto m = seeded(4, 6, 3, 2);
        const bl::GradientConfig cfg{.iterations = 40, .seed = 5, .init_jitter = 0.1};
        const auto a = bl::gradient_solve(m, cfg);
        const auto b = bl::gradient_solve(m, cfg);
        CHECK(a.relaxed_history == b.relaxed_history);
        CHECK(a.rounded == b.rounded);
    }
    SUBCASE("bad configuration") {
        const auto m = seeded(3, 2, 2, 1);
        CHECK_THROWS_AS(bl::gradient_solve(m, {.eta = 0.0}), ConfigError);
        CHECK_THROWS_AS(bl::gradient_solve(m, {.eta = -1.0}), ConfigError);
        CHECK_THROWS_AS(bl::gradient_solve(m, {.beta1 = 1.0}), ConfigError);
    }
}

TEST_CASE("genetic solve") {
    SUBCASE("single action") {
        const auto m = scalar_model({0.5}, 3);
        const auto r = bl::genetic_solve(m, {.population = 4, .generations = 3});
        CHECK(r.best == ControlSequence({0, 0, 0}));
        CHECK(r.best_cost == 0.125);
    }
    SUBCASE("history is non-increasing and bounded by the optimum") {
        const auto m = seeded(4, 8, 3, 3);
        const double j_star = diagnostics::brute_force_min(m).j_star;
        const auto r = bl::genetic_solve(m, {.generations = 60, .seed = 4});
        REQUIRE(r.history.size() == 61);
        REQUIRE(r.generation_best.size() == 61);
        for (std::size_t g = 1; g < r.history.size(); ++g) {
            CHECK(r.history[g] <= r.history[g - 1]);
            CHECK(r.history[g] <= r.generation_best[g]);
        }
        CHECK(r.best_cost == r.history.back());
        CHECK(r.best_cost >= j_star - 1e-12);
        CHECK(std::abs(r.best_cost - cost(m, r.best)) <= 1e-12);
    }
    SUBCASE("zero generations evaluates only the initial population") {
        const auto m = seeded(4, 5, 3, 3);
        const auto r = bl::genetic_solve(m, {.generations = 0, .seed = 1});
        CHECK(r.history.size() == 1);
        CHECK(r.best_cost == r.generation_best.front());
    }
    SUBCASE("reproducible and thread invariant") {
        const auto m = seeded(5, 10, 4, 8);
        const auto a = bl::genetic_solve(m, {.generations = 30, .seed = 9, .threads = 1});
        const auto b = bl::genetic_solve(m, {.generations = 30, .seed = 9, .threads = 1});
        const auto c = bl::genetic_solve(m, {.generations = 30, .seed = 9, .threads = 4});
        CHECK(a.history == b.history);
        CHECK(a.best == b.best);
        CHECK(a.history == c.history);
        CHECK(a.generation_best == c.generation_best);
        CHECK(a.best == c.best);
    }
    SUBCASE("masked actions are never proposed") {
        const auto m = scalar_model({1.0, 0.5, 2.0}, 3, KoopmanModel::ActionMask{{0, 2}, {1}, {0, 1, 2}});
        const auto r = bl::genetic_solve(m, {.population = 10, .generations = 20, .seed = 2});
        CHECK_NOTHROW(m.validate(r.best));
        CHECK(r.best_cost == 0.25);
    }
    SUBCASE("configuration validation") {
        CHECK_THROWS_AS((bl::GAConfig{.population = 1}).validate(), ConfigError);
        CHECK_THROWS_AS((bl::GAConfig{.selection_mu = 0}).validate(), ConfigError);
        CHECK_THROWS_AS((bl::GAConfig{.population = 4, .selection_mu = 5}).validate(), ConfigError);
        CHECK_THROWS_AS((bl::GAConfig{.mutation_rate = 1.5}).validate(), ConfigError);
        CHECK_THROWS_AS((bl::GAConfig{.gene_mutation_prob = -0.1}).validate(), ConfigError);
        CHECK_THROWS_AS((bl::GAConfig{.threads = 0}).validate(), ConfigError);
        CHECK_NOTHROW(bl::GAConfig{}.validate());
    }
}
