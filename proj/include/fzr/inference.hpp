#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "fzr/dataset.hpp"
#include "fzr/rulebase.hpp"

namespace fzr {

// Memberships are raised to large negative powers; below this they are floored.
inline constexpr double kMembershipFloor = 1e-30;

inline constexpr std::size_t kOutlier = std::numeric_limits<std::size_t>::max();

// Power mean of order q: ((sum v^q) / n)^(1/q). Evaluated relative to the
// extreme value the mean is pulled toward, so v^q never overflows.
double soft_match(std::span<const double> values, double q);

// Per-clause memberships of x, floored at kMembershipFloor.
void memberships(const FuzzyRule& rule, std::span<const double> x, std::vector<double>& out);

double firing_product(const FuzzyRule& rule, std::span<const double> x);
double firing_softmin(const FuzzyRule& rule, std::span<const double> x);
double firing_min(const FuzzyRule& rule, std::span<const double> x);
double firing(const FuzzyRule& rule, std::span<const double> x, TNorm tnorm);

// One firing strength per rule, in rule order.
std::vector<double> firing_strengths(const RuleBase& rb, std::span<const double> x);

struct ClassificationResult {
    std::size_t predicted = kOutlier;
    std::size_t rule_id = 0;
    double winning_firing = 0.0;
    double runner_up_firing = 0.0;

    bool outlier() const { return predicted == kOutlier; }
};

// Class of the strongest rule (lowest id on ties); outlier below the firing threshold.
ClassificationResult classify(const RuleBase& rb, std::span<const double> x);

std::vector<ClassificationResult> classify_batch(const RuleBase& rb, const Dataset& d);

}  // namespace fzr
