#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fzr {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LabeledSample {
    std::vector<double> features;
    std::size_t label = 0;
};

struct ImageLayout {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t band_count = 0;
};

struct FeatureRange {
    double min = 0.0;
    double max = 0.0;
    double width() const { return max - min; }
};

// Row-major feature matrix with contiguous class indices {0..c-1}.
// raw_labels()[j] is the label value class j had in the source file.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t p, std::size_t c, bool labeled = true);

    static Dataset from_samples(std::span<const LabeledSample> samples, std::size_t p, std::size_t c);

    void add(std::span<const double> features, std::size_t label);
    void add_unlabeled(std::span<const double> features);
    void reserve(std::size_t n);

    std::size_t size() const { return labeled_ ? labels_.size() : (p_ ? values_.size() / p_ : 0); }
    bool empty() const { return size() == 0; }
    std::size_t p() const { return p_; }
    std::size_t c() const { return c_; }
    bool labeled() const { return labeled_; }

    std::span<const double> features(std::size_t i) const {
        return {values_.data() + i * p_, p_};
    }
    std::size_t label(std::size_t i) const { return labels_[i]; }
    const std::vector<std::size_t>& labels() const { return labels_; }
    const std::vector<double>& values() const { return values_; }

    const std::vector<std::int64_t>& raw_labels() const { return raw_labels_; }
    void set_raw_labels(std::vector<std::int64_t> raw);
    const std::vector<std::string>& class_names() const { return class_names_; }
    void set_class_names(std::vector<std::string> names);
    const std::optional<ImageLayout>& layout() const { return layout_; }
    void set_layout(const ImageLayout& layout);

    // Empty copy sharing p, c, label mapping and class names.
    Dataset empty_like() const;

private:
    std::size_t p_ = 0;
    std::size_t c_ = 0;
    bool labeled_ = true;
    std::vector<double> values_;
    std::vector<std::size_t> labels_;
    std::vector<std::int64_t> raw_labels_;
    std::vector<std::string> class_names_;
    std::optional<ImageLayout> layout_;
};

enum class Delimiter { Auto, Comma, Whitespace };

struct LoadOptions {
    Delimiter delimiter = Delimiter::Auto;
    // Defaults to the last column.
    std::optional<std::size_t> label_column;
    bool labeled = true;
};

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

// Same parser over an in-memory buffer; `source` names it in error messages.
Dataset parse_dataset(const std::string& text, const LoadOptions& options = {},
                      const std::string& source = "<memory>");

void save_dataset(const Dataset& d, const std::filesystem::path& path);

Dataset select_features(const Dataset& d, std::span<const std::size_t> columns);

struct PartitionSpec {
    std::vector<std::size_t> per_class_train_counts;
    std::uint64_t seed = 0;
};

struct Partition {
    Dataset train;
    Dataset test;
};

// Draws exactly per_class_train_counts[j] class-j samples without replacement;
// both sides keep the source order.
Partition stratified_partition(const Dataset& d, const PartitionSpec& spec);

std::vector<std::size_t> class_histogram(const Dataset& d);

std::vector<FeatureRange> feature_ranges(const Dataset& d);

enum class PlaneFormat { Binary8, Text };

struct ImagePlanes {
    std::vector<std::filesystem::path> bands;
    std::optional<std::filesystem::path> labels;
    std::size_t width = 0;
    std::size_t height = 0;
    PlaneFormat format = PlaneFormat::Binary8;
};

// Assembles one sample per pixel, row-major, one feature per band.
Dataset load_image_dataset(const ImagePlanes& planes);

}  // namespace fzr
