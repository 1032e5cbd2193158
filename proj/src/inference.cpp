#include "fzr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace fzr {

double soft_match(std::span<const double> values, double q) {
    if (values.empty()) throw std::invalid_argument("soft_match of an empty set");
    if (q == 0.0 || !std::isfinite(q)) throw std::invalid_argument("soft_match needs a finite non-zero q");
    double lo = values[0], hi = values[0];
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(fmt::format("soft_match needs positive values, got {}", v));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double n = static_cast<double>(values.size());
    if (q == 1.0) {
        double sum = 0.0;
        for (double v : values) sum += v;
        return sum / n;
    }
    // Scale by the value the mean is pulled toward: every ratio^q lies in (0, 1].
    const double ref = q < 0.0 ? lo : hi;
    double sum = 0.0;
    for (double v : values) sum += std::pow(v / ref, q);
    const double r = ref * std::pow(sum / n, 1.0 / q);
    return std::clamp(r, lo, hi);
}

void memberships(const FuzzyRule& rule, std::span<const double> x, std::vector<double>& out) {
    out.resize(rule.clauses.size());
    for (std::size_t k = 0; k < rule.clauses.size(); ++k)
        out[k] = std::max(gaussian_membership(x[k], rule.clauses[k]), kMembershipFloor);
}

double firing_product(const FuzzyRule& rule, std::span<const double> x) {
    double a = 1.0;
    for (std::size_t k = 0; k < rule.clauses.size(); ++k) a *= gaussian_membership(x[k], rule.clauses[k]);
    return a;
}

double firing_softmin(const FuzzyRule& rule, std::span<const double> x) {
    thread_local std::vector<double> mu;
    memberships(rule, x, mu);
    return soft_match(mu, rule.q);
}

double firing_min(const FuzzyRule& rule, std::span<const double> x) {
    double a = 1.0;
    for (std::size_t k = 0; k < rule.clauses.size(); ++k)
        a = std::min(a, std::max(gaussian_membership(x[k], rule.clauses[k]), kMembershipFloor));
    return a;
}

double firing(const FuzzyRule& rule, std::span<const double> x, TNorm tnorm) {
    switch (tnorm) {
        case TNorm::Product: return firing_product(rule, x);
        case TNorm::Softmin: return firing_softmin(rule, x);
        case TNorm::Min: return firing_min(rule, x);
    }
    return firing_product(rule, x);
}

std::vector<double> firing_strengths(const RuleBase& rb, std::span<const double> x) {
    if (x.size() != rb.p)
        throw std::invalid_argument(fmt::format("input has {} features, rulebase expects {}", x.size(), rb.p));
    std::vector<double> out(rb.rules.size());
    for (std::size_t r = 0; r < rb.rules.size(); ++r) out[r] = firing(rb.rules[r], x, rb.tnorm);
    return out;
}

ClassificationResult classify(const RuleBase& rb, std::span<const double> x) {
    if (x.size() != rb.p)
        throw std::invalid_argument(fmt::format("input has {} features, rulebase expects {}", x.size(), rb.p));
    ClassificationResult res;
    std::size_t best = rb.rules.size();
    double best_a = -1.0, second_a = 0.0;
    for (std::size_t r = 0; r < rb.rules.size(); ++r) {
        const double a = firing(rb.rules[r], x, rb.tnorm);
        if (best == rb.rules.size() || a > best_a || (a == best_a && rb.rules[r].id < rb.rules[best].id)) {
            if (best != rb.rules.size()) second_a = std::max(second_a, best_a);
            best = r;
            best_a = a;
        } else {
            second_a = std::max(second_a, a);
        }
    }
    if (best == rb.rules.size()) return res;
    res.rule_id = rb.rules[best].id;
    res.winning_firing = best_a;
    res.runner_up_firing = second_a;
    res.predicted = best_a < rb.firing_threshold ? kOutlier : rb.rules[best].label;
    return res;
}

std::vector<ClassificationResult> classify_batch(const RuleBase& rb, const Dataset& d) {
    if (d.p() != rb.p)
        throw std::invalid_argument(fmt::format("dataset has {} features, rulebase expects {}", d.p(), rb.p));
    std::vector<ClassificationResult> out;
    out.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out.push_back(classify(rb, d.features(i)));
    return out;
}

}  // namespace fzr
