#include "fzr/classmap.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace fzr {

std::uint8_t class_gray_level(std::size_t cls, std::size_t classes) {
    if (cls == kOutlier) return kOutlierGray;
    if (cls >= classes) throw std::invalid_argument(fmt::format("class {} out of range", cls));
    const double level = 255.0 * static_cast<double>(cls + 1) / static_cast<double>(classes);
    return static_cast<std::uint8_t>(std::lround(level));
}

std::vector<std::uint8_t> encode_class_map(std::span<const ClassificationResult> results, std::size_t width,
                                           std::size_t height, std::size_t classes) {
    if (width == 0 || height == 0) throw std::invalid_argument("map dimensions must be positive");
    if (width * height != results.size())
        throw std::invalid_argument(
            fmt::format("map {}x{} needs {} pixels, got {} results", width, height, width * height, results.size()));
    const std::string header = fmt::format("P5\n{} {}\n255\n", width, height);
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + results.size());
    for (const auto& r : results) out.push_back(class_gray_level(r.predicted, classes));
    return out;
}

void write_class_map(const std::filesystem::path& path, std::span<const ClassificationResult> results,
                     std::size_t width, std::size_t height, std::size_t classes) {
    const auto bytes = encode_class_map(results, width, height, classes);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write map '{}'", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string class_map_legend(const RuleBase& rb) {
    std::string s = fmt::format("{} outlier - -\n", kOutlierGray);
    for (std::size_t j = 0; j < rb.c; ++j) {
        const std::string raw = rb.raw_labels.empty() ? "-" : fmt::format("{}", rb.raw_labels[j]);
        const std::string name = rb.class_names.empty() ? "-" : rb.class_names[j];
        s += fmt::format("{} {} {} {}\n", class_gray_level(j, rb.c), j, raw, name);
    }
    return s;
}

}  // namespace fzr
