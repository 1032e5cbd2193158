#include "fzr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "fzr/inference.hpp"

namespace fzr {

void RunConfig::validate() const {
    if (!(k_w > 0.0)) throw std::invalid_argument("--kw must be positive");
    if (!(sigma_floor_fraction > 0.0)) throw std::invalid_argument("sigma floor fraction must be positive");
    if (q == 0.0) throw std::invalid_argument("--q must be non-zero");
    if (!(firing_threshold >= 0.0 && firing_threshold < 1.0))
        throw std::invalid_argument("--firing-threshold must lie in [0, 1)");
    if (eta_m && !(*eta_m >= 0.0)) throw std::invalid_argument("--eta-m must be non-negative");
    if (eta_s && !(*eta_s >= 0.0)) throw std::invalid_argument("--eta-s must be non-negative");
    if (!(eta_scale >= 0.0)) throw std::invalid_argument("--eta-scale must be non-negative");
    if (!(eta_q >= 0.0)) throw std::invalid_argument("--eta-q must be non-negative");
    if (!(eps_reduce > 0.0 && eps_reduce < 1.0)) throw std::invalid_argument("--eps-reduce must lie in (0, 1)");
    if (maxiter == 0) throw std::invalid_argument("--maxiter must be positive");
    if (min_support && *min_support == 0) throw std::invalid_argument("--min-support must be at least 1");
    if (!(purity_threshold > 0.0 && purity_threshold <= 1.0))
        throw std::invalid_argument("--purity must lie in (0, 1]");
    if (!(merge_distance_factor >= 0.0)) throw std::invalid_argument("--merge-factor must be non-negative");
    if (sofm_epochs && *sofm_epochs == 0) throw std::invalid_argument("--sofm-epochs must be positive");
    if (!(sofm_alpha0 >= 0.0 && sofm_alpha0 <= 1.0)) throw std::invalid_argument("--sofm-alpha must lie in [0, 1]");
}

std::map<std::string, std::string> RunConfig::entries() const {
    auto opt = [](const auto& v) { return v ? fmt::format("{}", *v) : std::string("auto"); };
    auto list = [](const std::vector<std::size_t>& v) {
        return v.empty() ? std::string("all") : fmt::format("{}", fmt::join(v, ","));
    };
    std::map<std::string, std::string> m;
    m["seed"] = fmt::format("{}", seed);
    m["kw"] = fmt::format("{}", k_w);
    m["sigma_floor_fraction"] = fmt::format("{}", sigma_floor_fraction);
    m["spread"] = rms_spread ? "rms" : "printed";
    m["q"] = fmt::format("{}", q);
    m["firing_threshold"] = fmt::format("{}", firing_threshold);
    m["tnorm"] = std::string(to_string(tnorm));
    m["eta_m"] = opt(eta_m);
    m["eta_s"] = opt(eta_s);
    m["eta_scale"] = fmt::format("{}", eta_scale);
    m["eta_q"] = fmt::format("{}", eta_q);
    m["eps_reduce"] = fmt::format("{}", eps_reduce);
    m["maxiter"] = fmt::format("{}", maxiter);
    m["qtune_sign"] = qtune_sign_corrected ? "corrected" : "printed";
    m["min_support"] = opt(min_support);
    m["purity_threshold"] = fmt::format("{}", purity_threshold);
    m["merge_distance_factor"] = fmt::format("{}", merge_distance_factor);
    m["max_rounds"] = fmt::format("{}", max_rounds);
    m["sofm_epochs"] = opt(sofm_epochs);
    m["sofm_alpha0"] = fmt::format("{}", sofm_alpha0);
    m["features"] = list(features);
    m["train_counts"] = list(train_counts);
    return m;
}

std::string RunConfig::to_json() const {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : entries()) j[k] = v;
    return j.dump();
}

Dataset apply_feature_selection(const Dataset& d, const RunConfig& cfg) {
    if (cfg.features.empty()) return d;
    return select_features(d, cfg.features);
}

SofmSchedule resolve_schedule(const RunConfig& cfg, std::size_t nodes, std::size_t samples) {
    SofmSchedule s = SofmSchedule::defaults_for(nodes, samples);
    s.alpha0 = cfg.sofm_alpha0;
    if (cfg.sofm_epochs) {
        s.epochs = *cfg.sofm_epochs;
        s.alpha_decay = std::pow(0.01, 1.0 / static_cast<double>(s.epochs));
        s.sigma_decay = s.alpha_decay;
    }
    return s;
}

RefineConfig resolve_refine(const RunConfig& cfg, const Dataset& train) {
    RefineConfig r = RefineConfig::defaults_for(train.size(), train.c());
    if (cfg.min_support) r.min_support = *cfg.min_support;
    r.purity_threshold = cfg.purity_threshold;
    r.merge_distance_factor = cfg.merge_distance_factor;
    r.max_rounds = cfg.max_rounds;
    return r;
}

RuleGenConfig resolve_rulegen(const RunConfig& cfg) {
    RuleGenConfig g;
    g.k_w = cfg.k_w;
    g.sigma_floor_fraction = cfg.sigma_floor_fraction;
    g.rms_spread = cfg.rms_spread;
    g.q = cfg.q;
    g.tnorm = cfg.tnorm;
    g.firing_threshold = cfg.firing_threshold;
    return g;
}

TuningConfig resolve_tuning(const RunConfig& cfg, const Dataset& train, TNorm tnorm) {
    TuningConfig t;
    if (cfg.eta_m || cfg.eta_s) {
        t.eta_m = cfg.eta_m.value_or(0.0);
        t.eta_s = cfg.eta_s.value_or(0.0);
    } else {
        t.eta_m = t.eta_s = cfg.eta_scale;
        for (const auto& r : feature_ranges(train)) t.feature_scale.push_back(r.width() * r.width());
    }
    t.eta_q = cfg.eta_q;
    t.eps_reduce = cfg.eps_reduce;
    t.maxiter = cfg.maxiter;
    t.tnorm = tnorm;
    t.qtune_sign_corrected = cfg.qtune_sign_corrected;
    return t;
}

PrototypeSet build_prototypes(const Dataset& train, const RunConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto schedule = resolve_schedule(cfg, train.c(), train.size());
    return generate_prototypes(train, resolve_refine(cfg, train), schedule, rng);
}

RuleBase build_rulebase(const Dataset& train, const RunConfig& cfg) {
    const auto protos = build_prototypes(train, cfg);
    return rules_from_prototypes(protos.prototypes, train, resolve_rulegen(cfg));
}

Dataset align_labels(const Dataset& d, const RuleBase& rb) {
    if (!d.labeled() || rb.raw_labels.empty() || d.raw_labels() == rb.raw_labels) return d;
    std::vector<std::size_t> map(d.c());
    for (std::size_t j = 0; j < d.c(); ++j) {
        const auto raw = d.raw_labels().empty() ? static_cast<std::int64_t>(j) : d.raw_labels()[j];
        const auto it = std::find(rb.raw_labels.begin(), rb.raw_labels.end(), raw);
        if (it == rb.raw_labels.end()) throw DataError(fmt::format("label {} is unknown to the rulebase", raw));
        map[j] = static_cast<std::size_t>(it - rb.raw_labels.begin());
    }
    Dataset out(d.p(), rb.c);
    out.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out.add(d.features(i), map[d.label(i)]);
    out.set_raw_labels(rb.raw_labels);
    if (!rb.class_names.empty()) out.set_class_names(rb.class_names);
    if (d.layout()) out.set_layout(*d.layout());
    return out;
}

ConfusionMatrix evaluate_rulebase(const RuleBase& rb, const Dataset& d) {
    const auto results = classify_batch(rb, d);
    return confusion_matrix(results, d.labels(), rb.c);
}

namespace satimage {

RunConfig default_config() {
    RunConfig cfg;
    cfg.features = kCenterPixelBands;
    cfg.train_counts = kTrainCounts;
    cfg.rms_spread = true;
    cfg.purity_threshold = 0.8;
    cfg.eta_scale = 0.03;
    cfg.qtune_sign_corrected = true;
    return cfg;
}

}  // namespace satimage

std::vector<char> rules_fired(const RuleBase& rb, const Dataset& d) {
    std::vector<char> fired(rb.rules.size(), 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto cp = find_cpair(rb, d.features(i), d.label(i));
        fired[cp.rule_c] = 1;
        fired[cp.rule_notc] = 1;
    }
    return fired;
}

namespace {

StageResult stage(const RuleBase& rb, const Dataset& train, const Dataset& test) {
    return {error_rate(evaluate_rulebase(rb, train)), error_rate(evaluate_rulebase(rb, test)), error_E(rb, train)};
}

QTuneRun run_qtune(const RuleBase& start, double q0, bool context_tuned, const Dataset& train, const Dataset& test,
                   const RunConfig& cfg) {
    QTuneRun run;
    run.initial_q = q0;
    run.context_tuned = context_tuned;
    RuleBase rb = start;
    rb.tnorm = TNorm::Softmin;
    for (auto& r : rb.rules) r.q = q0;
    run.before = stage(rb, train, test);
    run.misclassified_test_before = misclassification_count(rb, test);
    auto tuned = q_tune(rb, train, resolve_tuning(cfg, train, TNorm::Softmin));
    run.rulebase = std::move(tuned.rulebase);
    run.trace = std::move(tuned.trace);
    run.after = stage(run.rulebase, train, test);
    run.misclassified_test_after = misclassification_count(run.rulebase, test);
    run.fired = rules_fired(run.rulebase, train);
    for (std::size_t r = 0; r < run.rulebase.rules.size(); ++r)
        if (run.rulebase.rules[r].q != q0) run.fired[r] = 1;
    return run;
}

}  // namespace

BenchResult run_bench(const Dataset& full, const RunConfig& cfg, const BenchOptions& opts) {
    cfg.validate();
    const Dataset data = apply_feature_selection(full, cfg);
    std::vector<std::size_t> counts = cfg.train_counts;
    if (counts.empty()) throw std::invalid_argument("bench needs per-class training counts");
    const auto part = stratified_partition(data, {counts, cfg.seed});

    BenchResult r;
    r.train_size = part.train.size();
    r.test_size = part.test.size();
    const auto protos = build_prototypes(part.train, cfg);
    r.prototypes_converged = protos.converged;
    RuleGenConfig gen = resolve_rulegen(cfg);
    gen.tnorm = TNorm::Product;
    r.initial = rules_from_prototypes(protos.prototypes, part.train, gen);
    r.rule_count = r.initial.rules.size();

    RuleBase initial_soft = r.initial;
    initial_soft.tnorm = TNorm::Softmin;
    r.initial_product = stage(r.initial, part.train, part.test);
    r.initial_softmin = stage(initial_soft, part.train, part.test);

    auto prod = context_tune(r.initial, part.train, resolve_tuning(cfg, part.train, TNorm::Product));
    r.product = std::move(prod.rulebase);
    r.product_trace = std::move(prod.trace);
    r.tuned_product = stage(r.product, part.train, part.test);
    r.product_test_cm = evaluate_rulebase(r.product, part.test);

    auto soft = context_tune(r.initial, part.train, resolve_tuning(cfg, part.train, TNorm::Softmin));
    r.softmin = std::move(soft.rulebase);
    r.softmin_trace = std::move(soft.trace);
    r.tuned_softmin = stage(r.softmin, part.train, part.test);
    r.softmin_test_cm = evaluate_rulebase(r.softmin, part.test);

    if (opts.run_qtune) {
        for (double q0 : opts.qtune_starts) r.qtune_runs.push_back(run_qtune(r.softmin, q0, true, part.train, part.test, cfg));
        for (double q0 : opts.qtune_starts) r.qtune_runs.push_back(run_qtune(r.initial, q0, false, part.train, part.test, cfg));
    }
    return r;
}

std::string render_bench(const BenchResult& r) {
    std::string s;
    s += fmt::format("train samples: {}\ntest samples: {}\nrules: {}\nprototype refinement converged: {}\n", r.train_size,
                     r.test_size, r.rule_count, r.prototypes_converged ? "yes" : "no");
    s += "\nstage                 train_err%  test_err%   E\n";
    auto row = [&](const char* name, const StageResult& st) {
        s += fmt::format("{:<21} {:>9.2f}  {:>9.2f}  {:>9.3f}\n", name, st.train_error, st.test_error, st.E);
    };
    row("initial product", r.initial_product);
    row("initial softmin", r.initial_softmin);
    row("tuned product", r.tuned_product);
    row("tuned softmin", r.tuned_softmin);
    if (!r.qtune_runs.empty()) {
        s += "\nexponent tuning      q0      E_init    E_final   train%_init train%_final test_miss_init test_miss_final q<0/fired\n";
        for (const auto& q : r.qtune_runs) {
            std::size_t fired = 0, negative = 0;
            for (std::size_t i = 0; i < q.fired.size(); ++i) {
                if (!q.fired[i]) continue;
                ++fired;
                if (q.rulebase.rules[i].q < 0.0) ++negative;
            }
            s += fmt::format("{:<16} {:>7.1f} {:>9.3f} {:>9.3f} {:>11.2f} {:>12.2f} {:>7} ({:5.2f}%) {:>7} ({:5.2f}%) {:>4}/{}\n",
                             q.context_tuned ? "context-tuned" : "untuned", q.initial_q, q.before.E, q.after.E,
                             q.before.train_error, q.after.train_error, q.misclassified_test_before,
                             q.before.test_error, q.misclassified_test_after, q.after.test_error, negative, fired);
        }
    }
    return s;
}

}  // namespace fzr
