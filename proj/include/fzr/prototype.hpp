#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "fzr/dataset.hpp"
#include "fzr/rng.hpp"
#include "fzr/sofm.hpp"

namespace fzr {

class PrototypeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// counts(i, j): number of class-j samples whose nearest prototype is i.
struct WinCountMatrix {
    std::size_t rows = 0;
    std::size_t classes = 0;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> assignment;  // nearest prototype per sample

    std::size_t& at(std::size_t i, std::size_t j) { return counts[i * classes + j]; }
    std::size_t at(std::size_t i, std::size_t j) const { return counts[i * classes + j]; }
    std::size_t support(std::size_t i) const;
    std::size_t total() const;
};

struct LabeledPrototype {
    std::vector<double> center;
    std::size_t label = 0;
    std::size_t support = 0;
    double purity = 0.0;
};

struct RefineConfig {
    std::size_t min_support = 2;
    double purity_threshold = 0.5;
    std::size_t max_rounds = 10;
    double merge_distance_factor = 0.5;
    // A class left without prototypes gets one at its class mean instead of an error.
    bool reseed_missing_classes = true;

    void validate() const;

    // min_support = max(2, n / (10 c)); other fields keep their defaults.
    static RefineConfig defaults_for(std::size_t samples, std::size_t classes);
};

struct PrototypeSet {
    std::vector<LabeledPrototype> prototypes;
    std::size_t rounds = 0;
    // False when max_rounds ran out before every prototype met both criteria.
    bool converged = true;
};

WinCountMatrix compute_win_counts(std::span<const std::vector<double>> centers, const Dataset& d);

// Majority-class labels; prototypes that win no sample are dropped.
std::vector<LabeledPrototype> label_prototypes(const WinCountMatrix& counts,
                                               std::span<const std::vector<double>> centers);

// Repeated rounds of delete-weak / split-impure / merge-redundant, each
// followed by a winner-only pass and relabeling, until nothing changes.
PrototypeSet refine_prototypes(std::vector<LabeledPrototype> prototypes, const Dataset& d,
                               const RefineConfig& cfg, const SofmSchedule& s, Rng& rng);

// SOFM with one node per class, labeling, then refinement.
PrototypeSet generate_prototypes(const Dataset& train, const RefineConfig& cfg, const SofmSchedule& s,
                                 Rng& rng);

std::vector<std::vector<double>> centers_of(std::span<const LabeledPrototype> prototypes);

}  // namespace fzr
