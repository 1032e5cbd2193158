#include "fzr/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "fzr/inference.hpp"

namespace fzr {

void TuningConfig::validate() const {
    if (!(eta_m >= 0.0) || !(eta_s >= 0.0) || !(eta_q >= 0.0))
        throw std::invalid_argument("learning rates must be non-negative");
    if (!(eps_reduce > 0.0 && eps_reduce < 1.0)) throw std::invalid_argument("eps_reduce must lie in (0, 1)");
    if (maxiter == 0) throw std::invalid_argument("maxiter must be positive");
    if (!(q_min > 0.0)) throw std::invalid_argument("q_min must be positive");
    for (double s : feature_scale)
        if (!(s >= 0.0)) throw std::invalid_argument("feature learning-rate scales must be non-negative");
}

std::vector<TraceRecord> TuningTrace::accepted() const {
    std::vector<TraceRecord> out;
    for (const auto& r : records)
        if (!r.rolled_back) out.push_back(r);
    return out;
}

void write_trace(const TuningTrace& trace, std::ostream& out) {
    out << "iteration,E,M,eta_m,eta_s,eta_q,rolled_back\n";
    for (const auto& r : trace.records)
        out << fmt::format("{},{},{},{},{},{},{}\n", r.iteration, r.error, r.misclassified, r.eta_m, r.eta_s, r.eta_q,
                           r.rolled_back ? 1 : 0);
}

CPair find_cpair(const RuleBase& rb, std::span<const double> x, std::size_t label) {
    if (x.size() != rb.p) throw std::invalid_argument("input length does not match rulebase");
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    CPair cp{none, none, -1.0, -1.0};
    for (std::size_t r = 0; r < rb.rules.size(); ++r) {
        const auto& rule = rb.rules[r];
        const double a = firing(rule, x, rb.tnorm);
        std::size_t& slot = rule.label == label ? cp.rule_c : cp.rule_notc;
        double& best = rule.label == label ? cp.alpha_c : cp.alpha_notc;
        if (slot == none || a > best || (a == best && rule.id < rb.rules[slot].id)) {
            slot = r;
            best = a;
        }
    }
    if (cp.rule_c == none) throw std::invalid_argument(fmt::format("class {} has no rule", label));
    if (cp.rule_notc == none) throw std::invalid_argument("no rule from another class exists");
    return cp;
}

double error_E(const RuleBase& rb, const Dataset& d) {
    double e = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto cp = find_cpair(rb, d.features(i), d.label(i));
        const double t = 1.0 - cp.alpha_c + cp.alpha_notc;
        e += t * t;
    }
    return e;
}

std::size_t misclassification_count(const RuleBase& rb, const Dataset& d) {
    std::size_t m = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (classify(rb, d.features(i)).predicted != d.label(i)) ++m;
    return m;
}

namespace {

// mu_k^q / sum_j mu_j^q, scaled so that no power overflows.
void softmin_weights(std::span<const double> mu, double q, std::vector<double>& w) {
    double ref = mu[0];
    for (double m : mu) ref = q < 0.0 ? std::min(ref, m) : std::max(ref, m);
    w.resize(mu.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        w[k] = std::pow(mu[k] / ref, q);
        sum += w[k];
    }
    for (double& v : w) v /= sum;
}

void clamp_sigma(FuzzyRule& rule, std::span<const double> floor) {
    for (std::size_t k = 0; k < rule.clauses.size(); ++k)
        rule.clauses[k].sigma = std::max(rule.clauses[k].sigma, floor[k]);
}

// sign = +1 pulls the rule toward x and widens it, -1 pushes it away and narrows it.
void move_rule(FuzzyRule& rule, std::span<const double> x, double sign, double gain, std::span<const double> weight,
               const TuningConfig& cfg) {
    if (!cfg.feature_scale.empty() && cfg.feature_scale.size() != rule.clauses.size())
        throw std::invalid_argument("one learning-rate scale per feature expected");
    for (std::size_t k = 0; k < rule.clauses.size(); ++k) {
        auto& cl = rule.clauses[k];
        const double diff = x[k] - cl.center;
        const double s2 = cl.sigma * cl.sigma;
        const double w = weight.empty() ? 1.0 : weight[k];
        const double scale = cfg.feature_scale.empty() ? 1.0 : cfg.feature_scale[k];
        const double dv = scale * cfg.eta_m * gain * w * diff / s2;
        const double ds = scale * cfg.eta_s * gain * w * diff * diff / (s2 * cl.sigma);
        cl.center += sign * dv;
        cl.sigma += sign * ds;
    }
}

double step_away_from_zero(double old_q, double new_q, double q_min) {
    if (std::abs(new_q) >= q_min) return new_q;
    return new_q < old_q ? -q_min : q_min;
}

}  // namespace

void step_product(RuleBase& rb, std::span<const double> x, std::size_t label, const TuningConfig& cfg) {
    if (rb.tnorm != TNorm::Product) throw std::invalid_argument("step_product needs a product rulebase");
    const auto cp = find_cpair(rb, x, label);
    const double e = 1.0 - cp.alpha_c + cp.alpha_notc;
    auto& rc = rb.rules[cp.rule_c];
    auto& rn = rb.rules[cp.rule_notc];
    move_rule(rc, x, +1.0, e * cp.alpha_c, {}, cfg);
    move_rule(rn, x, -1.0, e * cp.alpha_notc, {}, cfg);
    clamp_sigma(rc, rb.sigma_floor);
    clamp_sigma(rn, rb.sigma_floor);
}

void step_softmin(RuleBase& rb, std::span<const double> x, std::size_t label, const TuningConfig& cfg) {
    if (rb.tnorm != TNorm::Softmin) throw std::invalid_argument("step_softmin needs a softmin rulebase");
    const auto cp = find_cpair(rb, x, label);
    const double e = 1.0 - cp.alpha_c + cp.alpha_notc;
    auto& rc = rb.rules[cp.rule_c];
    auto& rn = rb.rules[cp.rule_notc];

    std::vector<double> mu, wc, wn;
    memberships(rc, x, mu);
    softmin_weights(mu, rc.q, wc);
    memberships(rn, x, mu);
    softmin_weights(mu, rn.q, wn);

    move_rule(rc, x, +1.0, e * cp.alpha_c, wc, cfg);
    move_rule(rn, x, -1.0, e * cp.alpha_notc, wn, cfg);
    clamp_sigma(rc, rb.sigma_floor);
    clamp_sigma(rn, rb.sigma_floor);
}

void step_q(RuleBase& rb, std::span<const double> x, std::size_t label, const TuningConfig& cfg) {
    if (rb.tnorm != TNorm::Softmin) throw std::invalid_argument("step_q needs a softmin rulebase");
    const auto cp = find_cpair(rb, x, label);
    const double e = 1.0 - cp.alpha_c + cp.alpha_notc;

    // eta_q * e * (alpha / q) * (sum mu^q ln mu / sum mu^q - ln alpha)
    auto delta = [&](const FuzzyRule& rule, double alpha) {
        std::vector<double> mu, w;
        memberships(rule, x, mu);
        softmin_weights(mu, rule.q, w);
        double weighted_log = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) weighted_log += w[k] * std::log(mu[k]);
        return cfg.eta_q * e * (alpha / rule.q) * (weighted_log - std::log(alpha));
    };

    auto& rc = rb.rules[cp.rule_c];
    auto& rn = rb.rules[cp.rule_notc];
    const double dc = delta(rc, cp.alpha_c);
    const double dn = delta(rn, cp.alpha_notc);
    rc.q = step_away_from_zero(rc.q, rc.q + dc, cfg.q_min);
    const double sign = cfg.qtune_sign_corrected ? -1.0 : 1.0;
    rn.q = step_away_from_zero(rn.q, rn.q + sign * dn, cfg.q_min);
}

namespace {

struct Evaluation {
    double error;
    std::size_t misclassified;
};

Evaluation evaluate(const RuleBase& rb, const Dataset& d) { return {error_E(rb, d), misclassification_count(rb, d)}; }

bool stalled(const std::vector<double>& accepted_errors, const TuningConfig& cfg) {
    if (cfg.stall_window == 0 || accepted_errors.size() <= cfg.stall_window) return false;
    const double then = accepted_errors[accepted_errors.size() - 1 - cfg.stall_window];
    return then - accepted_errors.back() < cfg.stall_tolerance;
}

}  // namespace

TuningResult context_tune(RuleBase rb, const Dataset& train, const TuningConfig& cfg) {
    cfg.validate();
    if (cfg.tnorm == TNorm::Min) throw std::invalid_argument("context tuning needs product or softmin conjunction");
    if (!train.labeled()) throw std::invalid_argument("context tuning needs labeled data");
    if (train.p() != rb.p) throw std::invalid_argument("training data and rulebase disagree on feature count");
    if (!cfg.feature_scale.empty() && cfg.feature_scale.size() != rb.p)
        throw std::invalid_argument("one learning-rate scale per feature expected");
    rb.validate();
    rb.tnorm = cfg.tnorm;

    TuningConfig live = cfg;
    TuningResult out;
    auto prev = evaluate(rb, train);
    out.trace.records.push_back({0, prev.error, prev.misclassified, live.eta_m, live.eta_s, live.eta_q, false});
    std::vector<double> accepted{prev.error};
    if (prev.misclassified == 0 || prev.error == 0.0 || train.empty()) {
        out.rulebase = std::move(rb);
        return out;
    }

    for (std::size_t t = 1; t <= cfg.maxiter; ++t) {
        RuleBase snapshot = rb;
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (cfg.tnorm == TNorm::Product)
                step_product(rb, train.features(i), train.label(i), live);
            else
                step_softmin(rb, train.features(i), train.label(i), live);
        }
        const auto cur = evaluate(rb, train);
        const bool rolled = cur.misclassified > prev.misclassified || cur.error > prev.error;
        out.trace.records.push_back({t, cur.error, cur.misclassified, live.eta_m, live.eta_s, live.eta_q, rolled});
        if (rolled) {
            live.eta_m *= 1.0 - cfg.eps_reduce;
            live.eta_s *= 1.0 - cfg.eps_reduce;
            rb = std::move(snapshot);
            continue;
        }
        prev = cur;
        accepted.push_back(cur.error);
        if (cur.misclassified == 0 || cur.error == 0.0) break;
        if (stalled(accepted, cfg)) break;
    }
    out.rulebase = std::move(rb);
    return out;
}

TuningResult q_tune(RuleBase rb, const Dataset& train, const TuningConfig& cfg) {
    cfg.validate();
    if (!train.labeled()) throw std::invalid_argument("q tuning needs labeled data");
    if (train.p() != rb.p) throw std::invalid_argument("training data and rulebase disagree on feature count");
    rb.validate();
    rb.tnorm = TNorm::Softmin;
    for (auto& r : rb.rules)
        if (std::abs(r.q) < cfg.q_min) r.q = r.q < 0.0 ? -cfg.q_min : cfg.q_min;

    TuningConfig live = cfg;
    TuningResult out;
    auto prev = evaluate(rb, train);
    out.trace.records.push_back({0, prev.error, prev.misclassified, live.eta_m, live.eta_s, live.eta_q, false});
    std::vector<double> accepted{prev.error};
    if (train.empty()) {
        out.rulebase = std::move(rb);
        return out;
    }

    for (std::size_t t = 1; t <= cfg.maxiter; ++t) {
        RuleBase snapshot = rb;
        for (std::size_t i = 0; i < train.size(); ++i) step_q(rb, train.features(i), train.label(i), live);
        const auto cur = evaluate(rb, train);
        const bool rolled = cur.error > prev.error;
        out.trace.records.push_back({t, cur.error, cur.misclassified, live.eta_m, live.eta_s, live.eta_q, rolled});
        if (rolled) {
            live.eta_q *= 1.0 - cfg.eps_reduce;
            rb = std::move(snapshot);
            continue;
        }
        prev = cur;
        accepted.push_back(cur.error);
        if (stalled(accepted, cfg)) break;
    }
    out.rulebase = std::move(rb);
    return out;
}

}  // namespace fzr
