#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fzr/dataset.hpp"
#include "fzr/rng.hpp"

namespace fzr {

// One-dimensional chain of weight vectors; grid distance between nodes is |r - i|.
struct SofmGrid {
    std::size_t p = 0;
    std::vector<std::vector<double>> weights;

    std::size_t size() const { return weights.size(); }
};

// Learning rate and lateral width decay geometrically per epoch; the update
// radius shrinks linearly and reaches zero after two thirds of the epochs.
struct SofmSchedule {
    double alpha0 = 0.5;
    double sigma0 = 1.0;
    double radius0 = 1.0;
    std::size_t epochs = 50;
    double alpha_decay = 0.9;
    double sigma_decay = 0.9;

    double alpha(std::size_t epoch) const;
    double sigma(std::size_t epoch) const;
    double radius(std::size_t epoch) const;

    void validate() const;

    // alpha0 = 0.5, sigma0 = radius0 = m/2, at least 100*m presentations,
    // alpha and sigma shrink to 1% of their initial value over the run.
    static SofmSchedule defaults_for(std::size_t nodes, std::size_t samples);
};

SofmGrid init_sofm(std::size_t nodes, const Dataset& d, Rng& rng);

// Nearest node by Euclidean distance, lowest index on ties.
std::size_t find_winner(const SofmGrid& g, std::span<const double> x);
std::size_t find_nearest(std::span<const std::vector<double>> centers, std::span<const double> x);

double neighborhood_strength(std::size_t epoch, std::size_t winner, std::size_t node, const SofmSchedule& s);

// Unsupervised: labels are never read.
SofmGrid train_sofm(SofmGrid g, const Dataset& d, const SofmSchedule& s, Rng& rng);

// train_sofm with the neighborhood radius forced to zero.
SofmGrid winner_only_refine(SofmGrid g, const Dataset& d, const SofmSchedule& s, Rng& rng);

}  // namespace fzr
