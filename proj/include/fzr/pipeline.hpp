#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fzr/dataset.hpp"
#include "fzr/eval.hpp"
#include "fzr/prototype.hpp"
#include "fzr/rulebase.hpp"
#include "fzr/sofm.hpp"
#include "fzr/tuning.hpp"

namespace fzr {

// Every tunable of a run. Unset optionals resolve from the training data.
struct RunConfig {
    std::uint64_t seed = 1;

    // rule generation
    double k_w = 5.0;
    double sigma_floor_fraction = 1e-3;
    bool rms_spread = false;
    double q = kDefaultQ;
    double firing_threshold = kDefaultFiringThreshold;
    TNorm tnorm = TNorm::Product;

    // tuning
    std::optional<double> eta_m;
    std::optional<double> eta_s;
    double eta_scale = 0.1;
    double eta_q = 500.0;
    double eps_reduce = 0.1;
    std::size_t maxiter = 200;
    bool qtune_sign_corrected = false;

    // prototype generation
    std::optional<std::size_t> min_support;
    double purity_threshold = 0.5;
    double merge_distance_factor = 0.5;
    std::size_t max_rounds = 10;
    std::optional<std::size_t> sofm_epochs;
    double sofm_alpha0 = 0.5;

    // data
    std::vector<std::size_t> features;
    std::vector<std::size_t> train_counts;

    void validate() const;

    // Flat key/value view with data-dependent defaults left as "auto".
    std::map<std::string, std::string> entries() const;
    std::string to_json() const;
};

Dataset apply_feature_selection(const Dataset& d, const RunConfig& cfg);

SofmSchedule resolve_schedule(const RunConfig& cfg, std::size_t nodes, std::size_t samples);
RefineConfig resolve_refine(const RunConfig& cfg, const Dataset& train);
RuleGenConfig resolve_rulegen(const RunConfig& cfg);
// Unless eta_m or eta_s is set, both are eta_scale times each feature's squared range.
// An explicit rate applies uniformly; the unset one becomes 0.
TuningConfig resolve_tuning(const RunConfig& cfg, const Dataset& train, TNorm tnorm);

PrototypeSet build_prototypes(const Dataset& train, const RunConfig& cfg);
RuleBase build_rulebase(const Dataset& train, const RunConfig& cfg);

// Re-indexes d's classes to the rulebase's raw-label mapping; a raw label
// the rulebase does not know is an error.
Dataset align_labels(const Dataset& d, const RuleBase& rb);

ConfusionMatrix evaluate_rulebase(const RuleBase& rb, const Dataset& d);

namespace satimage {

inline const std::vector<std::size_t> kTrainCounts{104, 68, 108, 47, 58, 115};
// The four spectral values of the central pixel of each 3x3 neighbourhood.
inline const std::vector<std::size_t> kCenterPixelBands{16, 17, 18, 19};
inline const std::vector<std::string> kClassNames{"red soil",   "cotton crop",
                                                  "grey soil",  "damp grey soil",
                                                  "soil with vegetation stubble", "very damp grey soil"};

// Center-pixel bands, the standard per-class training counts, RMS spreads,
// purity 0.8, eta_scale 0.03 and the descent sign for exponent tuning.
RunConfig default_config();

}  // namespace satimage

struct StageResult {
    double train_error = 0.0;
    double test_error = 0.0;
    double E = 0.0;
};

struct QTuneRun {
    double initial_q = 0.0;
    bool context_tuned = false;
    StageResult before;
    StageResult after;
    std::size_t misclassified_test_before = 0;
    std::size_t misclassified_test_after = 0;
    TuningTrace trace;
    RuleBase rulebase;
    // Rules that were R_c or R_-c for at least one training sample.
    std::vector<char> fired;
};

struct BenchResult {
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t rule_count = 0;
    bool prototypes_converged = true;
    RuleBase initial;
    RuleBase product;
    RuleBase softmin;
    StageResult initial_product;
    StageResult initial_softmin;
    StageResult tuned_product;
    StageResult tuned_softmin;
    TuningTrace product_trace;
    TuningTrace softmin_trace;
    ConfusionMatrix product_test_cm;
    ConfusionMatrix softmin_test_cm;
    std::vector<QTuneRun> qtune_runs;
};

struct BenchOptions {
    bool run_qtune = true;
    std::vector<double> qtune_starts{-10.0, 1.0, 5.0};
};

// Partition, prototypes, rules, context tuning under product and softmin,
// then exponent tuning from context-tuned and untuned softmin rules.
BenchResult run_bench(const Dataset& full, const RunConfig& cfg, const BenchOptions& opts = {});

std::string render_bench(const BenchResult& r);

std::vector<char> rules_fired(const RuleBase& rb, const Dataset& d);

}  // namespace fzr
