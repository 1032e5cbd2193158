#include "fzr/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <fmt/format.h>

namespace fzr {

std::size_t WinCountMatrix::support(std::size_t i) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < classes; ++j) s += at(i, j);
    return s;
}

std::size_t WinCountMatrix::total() const {
    std::size_t s = 0;
    for (std::size_t v : counts) s += v;
    return s;
}

void RefineConfig::validate() const {
    if (min_support < 1) throw std::invalid_argument("min_support must be at least 1");
    if (!(purity_threshold > 0.0 && purity_threshold <= 1.0))
        throw std::invalid_argument("purity_threshold must lie in (0, 1]");
    if (!(merge_distance_factor >= 0.0)) throw std::invalid_argument("merge_distance_factor must be >= 0");
}

RefineConfig RefineConfig::defaults_for(std::size_t samples, std::size_t classes) {
    RefineConfig cfg;
    const std::size_t c = std::max<std::size_t>(classes, 1);
    cfg.min_support = std::max<std::size_t>(2, samples / (10 * c));
    return cfg;
}

std::vector<std::vector<double>> centers_of(std::span<const LabeledPrototype> prototypes) {
    std::vector<std::vector<double>> out;
    out.reserve(prototypes.size());
    for (const auto& p : prototypes) out.push_back(p.center);
    return out;
}

WinCountMatrix compute_win_counts(std::span<const std::vector<double>> centers, const Dataset& d) {
    if (centers.empty()) throw PrototypeError("win counts need at least one prototype");
    if (!d.labeled()) throw PrototypeError("win counts need a labeled dataset");
    WinCountMatrix m;
    m.rows = centers.size();
    m.classes = d.c();
    m.counts.assign(m.rows * m.classes, 0);
    m.assignment.resize(d.size());
    for (std::size_t s = 0; s < d.size(); ++s) {
        const std::size_t i = find_nearest(centers, d.features(s));
        m.assignment[s] = i;
        ++m.at(i, d.label(s));
    }
    return m;
}

std::vector<LabeledPrototype> label_prototypes(const WinCountMatrix& counts,
                                               std::span<const std::vector<double>> centers) {
    if (counts.rows != centers.size()) throw PrototypeError("win-count rows do not match prototype count");
    std::vector<LabeledPrototype> out;
    for (std::size_t i = 0; i < counts.rows; ++i) {
        const std::size_t w = counts.support(i);
        if (w == 0) continue;
        std::size_t best = 0;
        for (std::size_t j = 1; j < counts.classes; ++j)
            if (counts.at(i, j) > counts.at(i, best)) best = j;
        out.push_back({centers[i], best, w, static_cast<double>(counts.at(i, best)) / static_cast<double>(w)});
    }
    if (out.empty()) throw PrototypeError("every prototype was rejected (no prototype wins any sample)");
    return out;
}

namespace {

struct ClusterStats {
    std::vector<std::vector<double>> class_means;  // [class][feature], per prototype
    double rms_spread = 0.0;
};

std::vector<ClusterStats> cluster_stats(const std::vector<std::vector<double>>& centers,
                                        const WinCountMatrix& counts, const Dataset& d) {
    const std::size_t p = d.p();
    std::vector<ClusterStats> stats(centers.size());
    std::vector<double> sq(centers.size(), 0.0);
    for (auto& s : stats) s.class_means.assign(d.c(), std::vector<double>(p, 0.0));
    for (std::size_t s = 0; s < d.size(); ++s) {
        const std::size_t i = counts.assignment[s];
        auto x = d.features(s);
        auto& mean = stats[i].class_means[d.label(s)];
        for (std::size_t k = 0; k < p; ++k) {
            mean[k] += x[k];
            const double diff = x[k] - centers[i][k];
            sq[i] += diff * diff;
        }
    }
    for (std::size_t i = 0; i < centers.size(); ++i) {
        for (std::size_t j = 0; j < d.c(); ++j) {
            const std::size_t n = counts.at(i, j);
            if (n == 0) continue;
            for (double& v : stats[i].class_means[j]) v /= static_cast<double>(n);
        }
        const std::size_t w = counts.support(i);
        stats[i].rms_spread = w ? std::sqrt(sq[i] / static_cast<double>(w)) : 0.0;
    }
    return stats;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

std::vector<LabeledPrototype> with_counts(const std::vector<LabeledPrototype>& protos, const WinCountMatrix& counts) {
    std::vector<LabeledPrototype> out = protos;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].support = counts.support(i);
        out[i].purity = out[i].support
                            ? static_cast<double>(counts.at(i, out[i].label)) / static_cast<double>(out[i].support)
                            : 0.0;
    }
    return out;
}

std::vector<double> class_mean(const Dataset& d, std::size_t label) {
    std::vector<double> mean(d.p(), 0.0);
    std::size_t n = 0;
    for (std::size_t s = 0; s < d.size(); ++s) {
        if (d.label(s) != label) continue;
        const auto x = d.features(s);
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += x[k];
        ++n;
    }
    for (double& v : mean) v /= static_cast<double>(n);
    return mean;
}

std::vector<std::size_t> missing_classes(const std::vector<LabeledPrototype>& protos, const Dataset& d) {
    std::vector<char> covered(d.c(), 0);
    for (const auto& p : protos) covered[p.label] = 1;
    const auto hist = class_histogram(d);
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < d.c(); ++j)
        if (hist[j] > 0 && !covered[j]) out.push_back(j);
    return out;
}

void reseed(std::vector<LabeledPrototype>& protos, const Dataset& d) {
    for (std::size_t j : missing_classes(protos, d)) protos.push_back({class_mean(d, j), j, 0, 0.0});
}

struct MergePair {
    double dist;
    std::size_t a;
    std::size_t b;
};

}  // namespace

PrototypeSet refine_prototypes(std::vector<LabeledPrototype> prototypes, const Dataset& d, const RefineConfig& cfg,
                               const SofmSchedule& s, Rng& rng) {
    cfg.validate();
    if (prototypes.empty()) throw PrototypeError("refinement needs at least one prototype");

    PrototypeSet result;
    result.converged = false;
    for (std::size_t round = 0; round <= cfg.max_rounds; ++round) {
        if (cfg.reseed_missing_classes) reseed(prototypes, d);
        const auto centers = centers_of(prototypes);
        const auto counts = compute_win_counts(centers, d);
        prototypes = with_counts(prototypes, counts);
        const auto stats = cluster_stats(centers, counts, d);
        const std::size_t n = prototypes.size();

        std::vector<char> weak(n, 0), impure(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            weak[i] = prototypes[i].support < cfg.min_support;
            impure[i] = !weak[i] && prototypes[i].purity < cfg.purity_threshold;
        }

        std::vector<MergePair> pairs;
        for (std::size_t a = 0; a < n; ++a) {
            if (weak[a] || impure[a]) continue;
            for (std::size_t b = a + 1; b < n; ++b) {
                if (weak[b] || impure[b] || prototypes[a].label != prototypes[b].label) continue;
                const double dist = distance(prototypes[a].center, prototypes[b].center);
                const double spread = 0.5 * (stats[a].rms_spread + stats[b].rms_spread);
                if (dist < cfg.merge_distance_factor * spread) pairs.push_back({dist, a, b});
            }
        }

        // A split is only possible when some class reaches min_support inside the cluster.
        std::vector<std::vector<std::size_t>> split_classes(n);
        bool any_split = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (!impure[i]) continue;
            for (std::size_t j = 0; j < d.c(); ++j)
                if (counts.at(i, j) >= cfg.min_support) split_classes[i].push_back(j);
            any_split = any_split || split_classes[i].size() > 1;
        }
        const bool any_weak = std::find(weak.begin(), weak.end(), 1) != weak.end();

        result.rounds = round;
        if (!any_weak && !any_split && pairs.empty()) {
            result.converged = std::find(impure.begin(), impure.end(), 1) == impure.end();
            break;
        }
        if (round == cfg.max_rounds) break;

        std::vector<LabeledPrototype> next;
        std::vector<char> merged(n, 0);
        std::sort(pairs.begin(), pairs.end(), [](const MergePair& x, const MergePair& y) {
            return std::tie(x.dist, x.a, x.b) < std::tie(y.dist, y.a, y.b);
        });
        for (const auto& pr : pairs) {
            if (merged[pr.a] || merged[pr.b]) continue;
            merged[pr.a] = merged[pr.b] = 1;
            const auto& A = prototypes[pr.a];
            const auto& B = prototypes[pr.b];
            const double wa = static_cast<double>(A.support), wb = static_cast<double>(B.support);
            LabeledPrototype m{A.center, A.label, A.support + B.support, 0.0};
            for (std::size_t k = 0; k < m.center.size(); ++k)
                m.center[k] = (wa * A.center[k] + wb * B.center[k]) / (wa + wb);
            next.push_back(std::move(m));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (weak[i] || merged[i]) continue;
            if (impure[i] && split_classes[i].size() > 1) {
                for (std::size_t j : split_classes[i])
                    next.push_back({stats[i].class_means[j], j, counts.at(i, j), 1.0});
                continue;
            }
            next.push_back(prototypes[i]);
        }
        if (next.empty()) throw PrototypeError("refinement deleted every prototype");

        SofmGrid grid{d.p(), centers_of(next)};
        grid = winner_only_refine(std::move(grid), d, s, rng);
        const auto relabel_counts = compute_win_counts(grid.weights, d);
        prototypes = label_prototypes(relabel_counts, grid.weights);
    }

    if (cfg.reseed_missing_classes) reseed(prototypes, d);
    const auto final_counts = compute_win_counts(centers_of(prototypes), d);
    prototypes = with_counts(prototypes, final_counts);
    const auto missing = missing_classes(prototypes, d);
    if (!missing.empty()) {
        const std::size_t j = missing.front();
        std::string name = d.class_names().empty() ? fmt::format("{}", j) : d.class_names()[j];
        if (!d.raw_labels().empty()) name += fmt::format(" (raw label {})", d.raw_labels()[j]);
        throw PrototypeError(fmt::format("prototype refinement left class {} without a prototype", name));
    }
    result.prototypes = std::move(prototypes);
    return result;
}

PrototypeSet generate_prototypes(const Dataset& train, const RefineConfig& cfg, const SofmSchedule& s, Rng& rng) {
    if (!train.labeled() || train.empty()) throw PrototypeError("prototype generation needs labeled training data");
    const auto hist = class_histogram(train);
    for (std::size_t j = 0; j < hist.size(); ++j)
        if (hist[j] == 0) throw PrototypeError(fmt::format("training data has no sample of class {}", j));

    SofmGrid grid = init_sofm(train.c(), train, rng);
    grid = train_sofm(std::move(grid), train, s, rng);
    const auto counts = compute_win_counts(grid.weights, train);
    auto labeled = label_prototypes(counts, grid.weights);
    return refine_prototypes(std::move(labeled), train, cfg, s, rng);
}

}  // namespace fzr
