#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "fzr/dataset.hpp"
#include "fzr/rulebase.hpp"

namespace fzr {

struct TuningConfig {
    double eta_m = 1.0;
    double eta_s = 1.0;
    double eta_q = 500.0;
    // Per-feature multipliers of eta_m and eta_s; empty means 1 for every feature.
    std::vector<double> feature_scale;
    // Learning rates are multiplied by (1 - eps_reduce) on every rollback.
    double eps_reduce = 0.1;
    std::size_t maxiter = 200;
    TNorm tnorm = TNorm::Product;
    // Descent sign for the wrong-class exponent instead of the default "+".
    bool qtune_sign_corrected = false;
    double q_min = 0.1;
    // Stop once accepted E improved by less than stall_tolerance over stall_window epochs.
    double stall_tolerance = 1e-9;
    std::size_t stall_window = 10;

    void validate() const;
};

struct TraceRecord {
    std::size_t iteration = 0;
    double error = 0.0;
    std::size_t misclassified = 0;
    double eta_m = 0.0;
    double eta_s = 0.0;
    double eta_q = 0.0;
    bool rolled_back = false;
};

struct TuningTrace {
    std::vector<TraceRecord> records;

    // Records of iterations whose rulebase was kept (iteration 0 included).
    std::vector<TraceRecord> accepted() const;
};

void write_trace(const TuningTrace& trace, std::ostream& out);

// Indices (positions in rb.rules) of the strongest same-class rule and the
// strongest other-class rule for a labelled sample, lowest id on ties.
struct CPair {
    std::size_t rule_c = 0;
    std::size_t rule_notc = 0;
    double alpha_c = 0.0;
    double alpha_notc = 0.0;
};

CPair find_cpair(const RuleBase& rb, std::span<const double> x, std::size_t label);

// sum over samples of (1 - alpha_c + alpha_notc)^2
double error_E(const RuleBase& rb, const Dataset& d);

// Outliers count as misclassified.
std::size_t misclassification_count(const RuleBase& rb, const Dataset& d);

// One online update of the centers and spreads of R_c and R_-c.
void step_product(RuleBase& rb, std::span<const double> x, std::size_t label, const TuningConfig& cfg);
void step_softmin(RuleBase& rb, std::span<const double> x, std::size_t label, const TuningConfig& cfg);

// One online update of the exponents q_c and q_-c.
void step_q(RuleBase& rb, std::span<const double> x, std::size_t label, const TuningConfig& cfg);

struct TuningResult {
    RuleBase rulebase;
    TuningTrace trace;
};

// Epochs of online steps; an epoch that raises E or M is undone and the
// learning rates shrink.
TuningResult context_tune(RuleBase rb, const Dataset& train, const TuningConfig& cfg);

// Same loop over the per-rule exponents only; rollback on E alone.
TuningResult q_tune(RuleBase rb, const Dataset& train, const TuningConfig& cfg);

}  // namespace fzr
