#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fzr/inference.hpp"
#include "fzr/rulebase.hpp"

namespace fzr {

// Rows are true classes, columns predicted classes plus a trailing outlier column.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;

    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * (classes + 1) + predicted]; }
    std::size_t outliers(std::size_t truth) const { return at(truth, classes); }
    std::size_t total_outliers() const;
    std::size_t row_sum(std::size_t truth) const;
    std::size_t correct() const;
    std::size_t total() const;
};

ConfusionMatrix confusion_matrix(std::span<const ClassificationResult> results, std::span<const std::size_t> labels,
                                 std::size_t classes);

// 100 * (off-diagonal + outlier mass) / total
double error_rate(const ConfusionMatrix& cm);

// Percent correct per true class; classes with no samples report 0.
std::vector<double> per_class_accuracy(const ConfusionMatrix& cm);

void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out);

struct ReportInputs {
    const RuleBase* rulebase = nullptr;
    std::optional<ConfusionMatrix> train;
    std::optional<ConfusionMatrix> test;
    // Echoed verbatim, in key order.
    std::map<std::string, std::string> config;
};

std::string render_report(const ReportInputs& in);

// Numbers recovered from a rendered report.
struct ReportSummary {
    std::optional<double> train_error;
    std::optional<double> test_error;
    std::optional<std::size_t> train_outliers;
    std::optional<std::size_t> test_outliers;
    std::size_t rule_count = 0;
    std::string tnorm;
    double k_w = 0.0;
    std::vector<double> test_class_accuracy;
};

ReportSummary parse_report(const std::string& text);

}  // namespace fzr
