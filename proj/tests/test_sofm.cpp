#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fzr/sofm.hpp"
#include "oracle.hpp"

using namespace fzr;

namespace {

Dataset points(const std::vector<std::vector<double>>& xs) {
    Dataset d(xs.front().size(), 1);
    for (const auto& x : xs) d.add(x, 0);
    return d;
}

SofmSchedule flat(double alpha, std::size_t epochs, double radius) {
    SofmSchedule s;
    s.alpha0 = alpha;
    s.sigma0 = 1.0;
    s.radius0 = radius;
    s.epochs = epochs;
    s.alpha_decay = 0.5;
    s.sigma_decay = 0.5;
    return s;
}

}  // namespace

TEST_CASE("winner is the nearest node, lowest index on ties") {
    SofmGrid g{2, {{0, 0}, {1, 1}, {0, 0}, {3, 3}}};
    const std::vector<double> x{0.1, 0.0};
    CHECK(find_winner(g, x) == 0);
    const std::vector<double> mid{0.5, 0.5};
    CHECK(find_winner(g, mid) == 0);
    const std::vector<double> far{2.6, 2.6};
    CHECK(find_winner(g, far) == 3);
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS(find_winner(g, bad), std::invalid_argument);
}

TEST_CASE("winner agrees with brute force on random grids") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        SofmGrid g{3, {}};
        for (int i = 0; i < 6; ++i) g.weights.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        CHECK(find_winner(g, x) == oracle::nearest(g.weights, x));
    }
}

TEST_CASE("neighborhood strength follows the decay schedule") {
    SofmSchedule s;
    s.alpha0 = 0.5;
    s.sigma0 = 2.0;
    s.alpha_decay = 0.9;
    s.sigma_decay = 0.8;
    CHECK(neighborhood_strength(0, 3, 3, s) == doctest::Approx(0.5));
    CHECK(neighborhood_strength(0, 3, 5, s) == doctest::Approx(0.5 * std::exp(-1.0)));
    CHECK(neighborhood_strength(0, 5, 3, s) == neighborhood_strength(0, 3, 5, s));
    const double a2 = 0.5 * 0.81, s2 = 2.0 * 0.64;
    CHECK(neighborhood_strength(2, 0, 1, s) == doctest::Approx(a2 * std::exp(-1.0 / (s2 * s2))));
}

TEST_CASE("radius shrinks linearly to zero at two thirds of the run") {
    SofmSchedule s;
    s.radius0 = 4.0;
    s.epochs = 30;
    CHECK(s.radius(0) == 4.0);
    CHECK(s.radius(10) == doctest::Approx(2.0));
    CHECK(s.radius(20) == 0.0);
    CHECK(s.radius(29) == 0.0);
}

TEST_CASE("schedule validation") {
    SofmSchedule s;
    CHECK_NOTHROW(s.validate());
    s.alpha0 = 1.5;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = {};
    s.epochs = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = {};
    s.sigma_decay = 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("default schedule") {
    const auto s = SofmSchedule::defaults_for(6, 500);
    CHECK(s.epochs >= 50);
    CHECK(s.epochs * 500 >= 600);
    CHECK(s.sigma0 == 3.0);
    CHECK(s.alpha(s.epochs) == doctest::Approx(0.005));
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("zero learning rate leaves the grid unchanged") {
    const Dataset d = points({{0, 0}, {1, 2}, {5, 5}});
    const SofmGrid g{2, {{0.5, 0.5}, {3, 3}, {4, 1}}};
    Rng rng(3);
    CHECK(train_sofm(g, d, flat(0.0, 5, 2.0), rng).weights == g.weights);
}

TEST_CASE("full-rate single step lands the winner on the sample") {
    const Dataset d = points({{2.0, -1.0}});
    const SofmGrid g{2, {{0, 0}, {1, 1}, {9, 9}}};
    Rng rng(3);
    SUBCASE("winner only") {
        const auto out = winner_only_refine(g, d, flat(1.0, 1, 5.0), rng);
        CHECK(out.weights[0] == std::vector<double>{2.0, -1.0});
        CHECK(out.weights[1] == g.weights[1]);
        CHECK(out.weights[2] == g.weights[2]);
    }
    SUBCASE("neighbours move by exp(-d^2/sigma^2)") {
        const auto out = train_sofm(g, d, flat(1.0, 1, 1.0), rng);
        CHECK(out.weights[0] == std::vector<double>{2.0, -1.0});
        const double h = std::exp(-1.0);
        CHECK(out.weights[1][0] == doctest::Approx(1.0 + h * (2.0 - 1.0)));
        CHECK(out.weights[1][1] == doctest::Approx(1.0 + h * (-1.0 - 1.0)));
        CHECK(out.weights[2] == g.weights[2]);
    }
}

TEST_CASE("single node follows the sequential update rule") {
    const Dataset d = points({{1, 0}, {3, 2}, {-1, 5}, {0, 0}, {2, 2}});
    const SofmGrid g{2, {{10, 10}}};
    const auto s = flat(0.3, 4, 0.0);
    Rng rng(11);
    const auto out = train_sofm(g, d, s, rng);

    Rng replay(11);
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<oracle::real> w{10, 10};
    for (std::size_t t = 0; t < s.epochs; ++t) {
        replay.shuffle(order);
        const oracle::real a = 0.3L * std::pow(0.5L, static_cast<oracle::real>(t));
        for (std::size_t i : order)
            for (std::size_t k = 0; k < 2; ++k) w[k] += a * (d.features(i)[k] - w[k]);
    }
    CHECK(out.weights[0][0] == doctest::Approx(static_cast<double>(w[0])).epsilon(1e-12));
    CHECK(out.weights[0][1] == doctest::Approx(static_cast<double>(w[1])).epsilon(1e-12));
}

TEST_CASE("two separated clusters get one node each") {
    Rng gen(5);
    Dataset d(2, 1);
    for (int i = 0; i < 100; ++i) {
        const double off = i % 2 ? 10.0 : -10.0;
        const std::vector<double> x{off + gen.uniform(-1, 1), off + gen.uniform(-1, 1)};
        d.add(x, 0);
    }
    Rng rng(9);
    auto g = init_sofm(2, d, rng);
    g = train_sofm(std::move(g), d, SofmSchedule::defaults_for(2, d.size()), rng);
    const std::vector<double> lo{-10, -10}, hi{10, 10};
    const std::size_t a = find_winner(g, lo), b = find_winner(g, hi);
    CHECK(a != b);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(std::abs(g.weights[a][k] + 10.0) < 1.0);
        CHECK(std::abs(g.weights[b][k] - 10.0) < 1.0);
    }
}

TEST_CASE("training is deterministic for a seed") {
    const Dataset d = points({{0, 1}, {2, 3}, {4, 1}, {1, 1}, {3, 0}});
    auto run = [&](std::uint64_t seed) {
        Rng rng(seed);
        auto g = init_sofm(3, d, rng);
        return train_sofm(std::move(g), d, SofmSchedule::defaults_for(3, d.size()), rng).weights;
    };
    CHECK(run(4) == run(4));
    CHECK(run(4) != run(5));
}

TEST_CASE("initial weights lie inside the data box") {
    const Dataset d = points({{0, 10}, {2, 30}, {1, 20}});
    Rng rng(1);
    const auto g = init_sofm(5, d, rng);
    CHECK(g.size() == 5);
    for (const auto& w : g.weights) {
        CHECK((w[0] >= 0 && w[0] <= 2));
        CHECK((w[1] >= 10 && w[1] <= 30));
    }
    CHECK_THROWS_AS(init_sofm(0, d, rng), std::invalid_argument);
}
