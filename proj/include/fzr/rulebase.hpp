#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fzr/dataset.hpp"
#include "fzr/prototype.hpp"

namespace fzr {

class RuleBaseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TNorm { Product, Softmin, Min };

std::string_view to_string(TNorm t);
TNorm parse_tnorm(std::string_view name);

inline constexpr double kDefaultQ = -10.0;
inline constexpr double kDefaultFiringThreshold = 0.01;
inline constexpr int kRuleBaseVersion = 1;

// "x_k is CLOSE TO center" as a Gaussian exp(-(x - center)^2 / sigma^2).
struct FuzzyClause {
    double center = 0.0;
    double sigma = 1.0;

    friend bool operator==(const FuzzyClause&, const FuzzyClause&) = default;
};

struct FuzzyRule {
    std::size_t id = 0;
    std::size_t label = 0;
    std::vector<FuzzyClause> clauses;
    double q = kDefaultQ;

    friend bool operator==(const FuzzyRule&, const FuzzyRule&) = default;
};

struct RuleBase {
    std::vector<FuzzyRule> rules;
    std::size_t p = 0;
    std::size_t c = 0;
    TNorm tnorm = TNorm::Product;
    double firing_threshold = kDefaultFiringThreshold;
    double k_w = 0.0;
    // Lower bound on every spread, per feature.
    std::vector<double> sigma_floor;
    std::vector<std::int64_t> raw_labels;
    std::vector<std::string> class_names;
    std::string provenance;

    // Throws RuleBaseError naming the first violated invariant.
    void validate() const;

    friend bool operator==(const RuleBase&, const RuleBase&) = default;
};

struct RuleGenConfig {
    double k_w = 5.0;
    // Floor for spreads as a fraction of each feature's data range.
    double sigma_floor_fraction = 1e-3;
    // sqrt(sum / |X_i|) instead of sqrt(sum) / |X_i|.
    bool rms_spread = false;
    double q = kDefaultQ;
    TNorm tnorm = TNorm::Product;
    double firing_threshold = kDefaultFiringThreshold;

    void validate() const;
};

double gaussian_membership(double x, const FuzzyClause& clause);

std::vector<double> sigma_floor_for(const Dataset& d, double fraction);

// Spread vector per prototype from the training samples nearest to it:
// k_w * sqrt(sum_k (x_kj - v_ij)^2) / |X_i|, floored per feature.
std::vector<std::vector<double>> init_sigmas(std::span<const LabeledPrototype> prototypes, const Dataset& train,
                                             const RuleGenConfig& cfg);

RuleBase rules_from_prototypes(std::span<const LabeledPrototype> prototypes, const Dataset& train,
                               const RuleGenConfig& cfg);

std::string rulebase_to_json(const RuleBase& rb);
RuleBase rulebase_from_json(std::string_view text);

void save_rulebase(const RuleBase& rb, const std::filesystem::path& path);
RuleBase load_rulebase(const std::filesystem::path& path);

}  // namespace fzr
