#include "fzr/sofm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace fzr {

double SofmSchedule::alpha(std::size_t epoch) const {
    return alpha0 * std::pow(alpha_decay, static_cast<double>(epoch));
}

double SofmSchedule::sigma(std::size_t epoch) const {
    return sigma0 * std::pow(sigma_decay, static_cast<double>(epoch));
}

double SofmSchedule::radius(std::size_t epoch) const {
    const double cutoff = std::max(1.0, 2.0 * static_cast<double>(epochs) / 3.0);
    const double r = radius0 * (1.0 - static_cast<double>(epoch) / cutoff);
    return std::max(0.0, r);
}

void SofmSchedule::validate() const {
    if (!(alpha0 >= 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("sofm alpha0 must lie in [0, 1]");
    if (!(sigma0 > 0.0)) throw std::invalid_argument("sofm sigma0 must be positive");
    if (!(radius0 >= 0.0)) throw std::invalid_argument("sofm radius0 must be non-negative");
    if (epochs == 0) throw std::invalid_argument("sofm epochs must be positive");
    if (!(alpha_decay > 0.0 && alpha_decay < 1.0) || !(sigma_decay > 0.0 && sigma_decay < 1.0))
        throw std::invalid_argument("sofm decay factors must lie in (0, 1)");
}

SofmSchedule SofmSchedule::defaults_for(std::size_t nodes, std::size_t samples) {
    SofmSchedule s;
    const double m = static_cast<double>(std::max<std::size_t>(nodes, 1));
    s.alpha0 = 0.5;
    s.sigma0 = m / 2.0;
    s.radius0 = m / 2.0;
    const std::size_t n = std::max<std::size_t>(samples, 1);
    s.epochs = std::max<std::size_t>(50, (100 * std::max<std::size_t>(nodes, 1) + n - 1) / n);
    s.alpha_decay = std::pow(0.01, 1.0 / static_cast<double>(s.epochs));
    s.sigma_decay = s.alpha_decay;
    return s;
}

SofmGrid init_sofm(std::size_t nodes, const Dataset& d, Rng& rng) {
    if (nodes == 0) throw std::invalid_argument("sofm needs at least one node");
    if (d.empty()) throw std::invalid_argument("sofm initialization needs a non-empty dataset");
    const auto box = feature_ranges(d);
    SofmGrid g{d.p(), {}};
    g.weights.assign(nodes, std::vector<double>(d.p()));
    for (auto& w : g.weights)
        for (std::size_t k = 0; k < d.p(); ++k) w[k] = rng.uniform(box[k].min, box[k].max);
    return g;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

SofmGrid run_epochs(SofmGrid g, const Dataset& d, const SofmSchedule& s, Rng& rng, bool winner_only) {
    s.validate();
    if (d.p() != g.p) throw std::invalid_argument("sofm grid and dataset disagree on feature count");
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const long long m = static_cast<long long>(g.size());

    for (std::size_t t = 0; t < s.epochs; ++t) {
        rng.shuffle(order);
        const double radius = winner_only ? 0.0 : s.radius(t);
        const long long reach = static_cast<long long>(std::floor(radius));
        for (std::size_t idx : order) {
            auto x = d.features(idx);
            const long long r = static_cast<long long>(find_winner(g, x));
            const long long lo = std::max(0LL, r - reach);
            const long long hi = std::min(m - 1, r + reach);
            for (long long i = lo; i <= hi; ++i) {
                const double h = neighborhood_strength(t, static_cast<std::size_t>(r), static_cast<std::size_t>(i), s);
                auto& w = g.weights[static_cast<std::size_t>(i)];
                for (std::size_t k = 0; k < g.p; ++k) w[k] += h * (x[k] - w[k]);
            }
        }
    }
    return g;
}

}  // namespace

std::size_t find_nearest(std::span<const std::vector<double>> centers, std::span<const double> x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centers.size(); ++i) {
        const double dist = squared_distance(centers[i], x);
        if (dist < best_d) {
            best_d = dist;
            best = i;
        }
    }
    return best;
}

std::size_t find_winner(const SofmGrid& g, std::span<const double> x) {
    if (x.size() != g.p) throw std::invalid_argument("input length does not match grid dimension");
    return find_nearest(g.weights, x);
}

double neighborhood_strength(std::size_t epoch, std::size_t winner, std::size_t node, const SofmSchedule& s) {
    const double dist = static_cast<double>(winner > node ? winner - node : node - winner);
    const double sigma = s.sigma(epoch);
    return s.alpha(epoch) * std::exp(-(dist * dist) / (sigma * sigma));
}

SofmGrid train_sofm(SofmGrid g, const Dataset& d, const SofmSchedule& s, Rng& rng) {
    return run_epochs(std::move(g), d, s, rng, false);
}

SofmGrid winner_only_refine(SofmGrid g, const Dataset& d, const SofmSchedule& s, Rng& rng) {
    return run_epochs(std::move(g), d, s, rng, true);
}

}  // namespace fzr
