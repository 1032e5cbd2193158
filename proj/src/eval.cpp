#include "fzr/eval.hpp"

#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace fzr {

std::size_t ConfusionMatrix::total_outliers() const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < classes; ++t) s += outliers(t);
    return s;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j <= classes; ++j) s += at(truth, j);
    return s;
}

std::size_t ConfusionMatrix::correct() const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < classes; ++t) s += at(t, t);
    return s;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t s = 0;
    for (std::size_t v : counts) s += v;
    return s;
}

ConfusionMatrix confusion_matrix(std::span<const ClassificationResult> results, std::span<const std::size_t> labels,
                                 std::size_t classes) {
    if (results.size() != labels.size())
        throw std::invalid_argument(
            fmt::format("{} predictions for {} ground-truth labels", results.size(), labels.size()));
    ConfusionMatrix cm;
    cm.classes = classes;
    cm.counts.assign(classes * (classes + 1), 0);
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (labels[i] >= classes) throw std::invalid_argument(fmt::format("label {} out of range", labels[i]));
        const std::size_t col = results[i].outlier() ? classes : results[i].predicted;
        if (col > classes) throw std::invalid_argument(fmt::format("prediction {} out of range", col));
        ++cm.counts[labels[i] * (classes + 1) + col];
    }
    return cm;
}

double error_rate(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) throw std::invalid_argument("error rate of an empty confusion matrix");
    return 100.0 * static_cast<double>(total - cm.correct()) / static_cast<double>(total);
}

std::vector<double> per_class_accuracy(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.classes, 0.0);
    for (std::size_t t = 0; t < cm.classes; ++t) {
        const std::size_t n = cm.row_sum(t);
        if (n) out[t] = 100.0 * static_cast<double>(cm.at(t, t)) / static_cast<double>(n);
    }
    return out;
}

void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out) {
    out << "truth";
    for (std::size_t j = 0; j < cm.classes; ++j) out << ",pred_" << j;
    out << ",outlier\n";
    for (std::size_t t = 0; t < cm.classes; ++t) {
        out << t;
        for (std::size_t j = 0; j <= cm.classes; ++j) out << ',' << cm.at(t, j);
        out << '\n';
    }
}

namespace {

void render_split(std::string& s, const char* name, const ConfusionMatrix& cm) {
    s += fmt::format("{}.samples: {}\n", name, cm.total());
    s += fmt::format("{}.error_percent: {:.6f}\n", name, error_rate(cm));
    s += fmt::format("{}.misclassified: {}\n", name, cm.total() - cm.correct());
    s += fmt::format("{}.outliers: {}\n", name, cm.total_outliers());
    s += fmt::format("{}.class_accuracy:", name);
    for (double a : per_class_accuracy(cm)) s += fmt::format(" {:.6f}", a);
    s += '\n';
}

}  // namespace

std::string render_report(const ReportInputs& in) {
    if (!in.rulebase) throw std::invalid_argument("report needs a rulebase");
    const RuleBase& rb = *in.rulebase;
    std::string s = "fuzzy rule classifier report\n";
    s += fmt::format("rules: {}\n", rb.rules.size());
    s += fmt::format("features: {}\n", rb.p);
    s += fmt::format("classes: {}\n", rb.c);
    s += fmt::format("tnorm: {}\n", to_string(rb.tnorm));
    s += fmt::format("k_w: {:.6f}\n", rb.k_w);
    s += fmt::format("firing_threshold: {:.6f}\n", rb.firing_threshold);
    for (const auto& [key, value] : in.config) s += fmt::format("config.{}: {}\n", key, value);
    if (in.train) render_split(s, "train", *in.train);
    if (in.test) render_split(s, "test", *in.test);

    s += "\nrules as (center, spread) per clause:\n";
    for (const auto& r : rb.rules) {
        s += fmt::format("rule {} class {}", r.id, r.label);
        if (!rb.raw_labels.empty()) s += fmt::format(" [label {}]", rb.raw_labels[r.label]);
        s += fmt::format(" q {:.4f}:", r.q);
        for (const auto& cl : r.clauses) s += fmt::format(" ({:.3f}, {:.3f})", cl.center, cl.sigma);
        s += '\n';
    }
    return s;
}

ReportSummary parse_report(const std::string& text) {
    ReportSummary out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto colon = line.find(": ");
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        const std::string value = line.substr(colon + 2);
        if (key == "rules")
            out.rule_count = std::stoul(value);
        else if (key == "tnorm")
            out.tnorm = value;
        else if (key == "k_w")
            out.k_w = std::stod(value);
        else if (key == "train.error_percent")
            out.train_error = std::stod(value);
        else if (key == "test.error_percent")
            out.test_error = std::stod(value);
        else if (key == "train.outliers")
            out.train_outliers = std::stoul(value);
        else if (key == "test.outliers")
            out.test_outliers = std::stoul(value);
        else if (key == "test.class_accuracy") {
            std::istringstream vs(value);
            double v;
            while (vs >> v) out.test_class_accuracy.push_back(v);
        }
    }
    return out;
}

}  // namespace fzr
