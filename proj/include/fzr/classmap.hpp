#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fzr/inference.hpp"
#include "fzr/rulebase.hpp"

namespace fzr {

inline constexpr std::uint8_t kOutlierGray = 0;

// Class k of c maps to round(255 * (k + 1) / c); 0 is reserved for outliers.
std::uint8_t class_gray_level(std::size_t cls, std::size_t classes);

// Binary PGM (P5, maxval 255), one pixel per result in row-major order.
std::vector<std::uint8_t> encode_class_map(std::span<const ClassificationResult> results, std::size_t width,
                                           std::size_t height, std::size_t classes);

void write_class_map(const std::filesystem::path& path, std::span<const ClassificationResult> results,
                     std::size_t width, std::size_t height, std::size_t classes);

// "gray class raw_label name" per line, outlier first.
std::string class_map_legend(const RuleBase& rb);

}  // namespace fzr
