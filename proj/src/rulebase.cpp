#include "fzr/rulebase.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace fzr {

using json = nlohmann::ordered_json;

std::string_view to_string(TNorm t) {
    switch (t) {
        case TNorm::Product: return "product";
        case TNorm::Softmin: return "softmin";
        case TNorm::Min: return "min";
    }
    return "product";
}

TNorm parse_tnorm(std::string_view name) {
    if (name == "product") return TNorm::Product;
    if (name == "softmin") return TNorm::Softmin;
    if (name == "min") return TNorm::Min;
    throw RuleBaseError(fmt::format("unknown t-norm '{}' (expected product, softmin or min)", name));
}

void RuleBase::validate() const {
    if (p == 0) throw RuleBaseError("rulebase has no features");
    if (c == 0) throw RuleBaseError("rulebase has no classes");
    if (rules.empty()) throw RuleBaseError("rulebase has no rules");
    if (!(firing_threshold >= 0.0 && firing_threshold < 1.0))
        throw RuleBaseError(fmt::format("firing threshold {} outside [0, 1)", firing_threshold));
    if (sigma_floor.size() != p)
        throw RuleBaseError(fmt::format("sigma floor has {} entries, expected {}", sigma_floor.size(), p));
    for (double f : sigma_floor)
        if (!(f > 0.0) || !std::isfinite(f)) throw RuleBaseError("sigma floor entries must be positive");
    if (!raw_labels.empty() && raw_labels.size() != c) throw RuleBaseError("raw label map does not match class count");
    if (!class_names.empty() && class_names.size() != c) throw RuleBaseError("class names do not match class count");

    std::set<std::size_t> ids;
    std::vector<char> covered(c, 0);
    for (const auto& r : rules) {
        if (!ids.insert(r.id).second) throw RuleBaseError(fmt::format("duplicate rule id {}", r.id));
        if (r.label >= c) throw RuleBaseError(fmt::format("rule {} has class {} outside 0..{}", r.id, r.label, c - 1));
        if (r.clauses.size() != p)
            throw RuleBaseError(fmt::format("rule {} has {} clauses, expected {}", r.id, r.clauses.size(), p));
        if (r.q == 0.0 || !std::isfinite(r.q)) throw RuleBaseError(fmt::format("rule {} has invalid q {}", r.id, r.q));
        for (std::size_t k = 0; k < p; ++k) {
            const auto& cl = r.clauses[k];
            if (!std::isfinite(cl.center)) throw RuleBaseError(fmt::format("rule {} clause {} center is not finite", r.id, k));
            if (!(cl.sigma > 0.0) || !std::isfinite(cl.sigma))
                throw RuleBaseError(fmt::format("rule {} clause {} has non-positive spread {}", r.id, k, cl.sigma));
        }
        covered[r.label] = 1;
    }
    for (std::size_t j = 0; j < c; ++j) {
        if (covered[j]) continue;
        std::string name = class_names.empty() ? fmt::format("{}", j) : class_names[j];
        if (!raw_labels.empty()) name += fmt::format(" (raw label {})", raw_labels[j]);
        throw RuleBaseError(fmt::format("class {} has no rule", name));
    }
}

void RuleGenConfig::validate() const {
    if (!(k_w > 0.0)) throw RuleBaseError("k_w must be positive");
    if (!(sigma_floor_fraction > 0.0)) throw RuleBaseError("sigma floor fraction must be positive");
    if (q == 0.0) throw RuleBaseError("q must be non-zero");
    if (!(firing_threshold >= 0.0 && firing_threshold < 1.0)) throw RuleBaseError("firing threshold outside [0, 1)");
}

double gaussian_membership(double x, const FuzzyClause& clause) {
    const double d = (x - clause.center) / clause.sigma;
    return std::exp(-d * d);
}

std::vector<double> sigma_floor_for(const Dataset& d, double fraction) {
    const auto ranges = feature_ranges(d);
    std::vector<double> floor(d.p());
    for (std::size_t k = 0; k < d.p(); ++k) {
        const double w = ranges[k].width();
        floor[k] = w > 0.0 ? fraction * w : fraction;
    }
    return floor;
}

std::vector<std::vector<double>> init_sigmas(std::span<const LabeledPrototype> prototypes, const Dataset& train,
                                             const RuleGenConfig& cfg) {
    cfg.validate();
    const auto centers = centers_of(prototypes);
    const auto counts = compute_win_counts(centers, train);
    const auto floor = sigma_floor_for(train, cfg.sigma_floor_fraction);
    const std::size_t p = train.p();

    std::vector<std::vector<double>> sums(prototypes.size(), std::vector<double>(p, 0.0));
    for (std::size_t s = 0; s < train.size(); ++s) {
        const std::size_t i = counts.assignment[s];
        auto x = train.features(s);
        for (std::size_t k = 0; k < p; ++k) {
            const double diff = x[k] - centers[i][k];
            sums[i][k] += diff * diff;
        }
    }
    std::vector<std::vector<double>> out(prototypes.size(), std::vector<double>(p, 0.0));
    for (std::size_t i = 0; i < prototypes.size(); ++i) {
        const double n = static_cast<double>(counts.support(i));
        for (std::size_t k = 0; k < p; ++k) {
            double sigma = 0.0;
            if (n > 0.0) sigma = cfg.rms_spread ? std::sqrt(sums[i][k] / n) : std::sqrt(sums[i][k]) / n;
            out[i][k] = std::max(cfg.k_w * sigma, floor[k]);
        }
    }
    return out;
}

RuleBase rules_from_prototypes(std::span<const LabeledPrototype> prototypes, const Dataset& train,
                               const RuleGenConfig& cfg) {
    if (prototypes.empty()) throw RuleBaseError("no prototypes to convert into rules");
    const auto sigmas = init_sigmas(prototypes, train, cfg);
    RuleBase rb;
    rb.p = train.p();
    rb.c = train.c();
    rb.tnorm = cfg.tnorm;
    rb.firing_threshold = cfg.firing_threshold;
    rb.k_w = cfg.k_w;
    rb.sigma_floor = sigma_floor_for(train, cfg.sigma_floor_fraction);
    rb.raw_labels = train.raw_labels();
    rb.class_names = train.class_names();
    rb.provenance = cfg.rms_spread ? "sofm-prototypes/rms-spread" : "sofm-prototypes";
    for (std::size_t i = 0; i < prototypes.size(); ++i) {
        FuzzyRule r;
        r.id = i;
        r.label = prototypes[i].label;
        r.q = cfg.q;
        r.clauses.resize(rb.p);
        for (std::size_t k = 0; k < rb.p; ++k) r.clauses[k] = {prototypes[i].center[k], sigmas[i][k]};
        rb.rules.push_back(std::move(r));
    }
    rb.validate();
    return rb;
}

std::string rulebase_to_json(const RuleBase& rb) {
    json doc;
    doc["version"] = kRuleBaseVersion;
    doc["p"] = rb.p;
    doc["c"] = rb.c;
    doc["tnorm"] = std::string(to_string(rb.tnorm));
    doc["firing_threshold"] = rb.firing_threshold;
    doc["k_w"] = rb.k_w;
    doc["sigma_floor"] = rb.sigma_floor;
    doc["raw_labels"] = rb.raw_labels;
    doc["class_names"] = rb.class_names;
    doc["provenance"] = rb.provenance;
    json rules = json::array();
    for (const auto& r : rb.rules) {
        json jr;
        jr["id"] = r.id;
        jr["class"] = r.label;
        jr["q"] = r.q;
        json clauses = json::array();
        for (const auto& cl : r.clauses) clauses.push_back({{"center", cl.center}, {"sigma", cl.sigma}});
        jr["clauses"] = std::move(clauses);
        rules.push_back(std::move(jr));
    }
    doc["rules"] = std::move(rules);
    return doc.dump(2) + "\n";
}

RuleBase rulebase_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw RuleBaseError(fmt::format("malformed rulebase file: {}", e.what()));
    }
    RuleBase rb;
    try {
        const int version = doc.at("version").get<int>();
        if (version != kRuleBaseVersion)
            throw RuleBaseError(fmt::format("rulebase version {} is not supported (expected {})", version,
                                            kRuleBaseVersion));
        rb.p = doc.at("p").get<std::size_t>();
        rb.c = doc.at("c").get<std::size_t>();
        rb.tnorm = parse_tnorm(doc.at("tnorm").get<std::string>());
        rb.firing_threshold = doc.at("firing_threshold").get<double>();
        rb.k_w = doc.at("k_w").get<double>();
        rb.sigma_floor = doc.at("sigma_floor").get<std::vector<double>>();
        if (doc.contains("raw_labels")) rb.raw_labels = doc["raw_labels"].get<std::vector<std::int64_t>>();
        if (doc.contains("class_names")) rb.class_names = doc["class_names"].get<std::vector<std::string>>();
        if (doc.contains("provenance")) rb.provenance = doc["provenance"].get<std::string>();
        for (const auto& jr : doc.at("rules")) {
            FuzzyRule r;
            r.id = jr.at("id").get<std::size_t>();
            r.label = jr.at("class").get<std::size_t>();
            r.q = jr.at("q").get<double>();
            for (const auto& jc : jr.at("clauses"))
                r.clauses.push_back({jc.at("center").get<double>(), jc.at("sigma").get<double>()});
            rb.rules.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw RuleBaseError(fmt::format("malformed rulebase file: {}", e.what()));
    }
    rb.validate();
    return rb;
}

void save_rulebase(const RuleBase& rb, const std::filesystem::path& path) {
    rb.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuleBaseError(fmt::format("cannot write rulebase '{}'", path.string()));
    out << rulebase_to_json(rb);
    if (!out) throw RuleBaseError(fmt::format("failed writing rulebase '{}'", path.string()));
}

RuleBase load_rulebase(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuleBaseError(fmt::format("cannot open rulebase '{}'", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return rulebase_from_json(buf.str());
    } catch (const RuleBaseError& e) {
        throw RuleBaseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

}  // namespace fzr
