#include "fzr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace fzr {

Dataset::Dataset(std::size_t p, std::size_t c, bool labeled) : p_(p), c_(c), labeled_(labeled) {}

Dataset Dataset::from_samples(std::span<const LabeledSample> samples, std::size_t p, std::size_t c) {
    Dataset d(p, c);
    d.reserve(samples.size());
    for (const auto& s : samples) d.add(s.features, s.label);
    return d;
}

void Dataset::add(std::span<const double> features, std::size_t label) {
    if (!labeled_) throw DataError("cannot add a labeled sample to an unlabeled dataset");
    if (features.size() != p_)
        throw DataError(fmt::format("sample has {} features, dataset expects {}", features.size(), p_));
    if (label >= c_) throw DataError(fmt::format("label {} out of range for {} classes", label, c_));
    for (double v : features)
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    values_.insert(values_.end(), features.begin(), features.end());
    labels_.push_back(label);
}

void Dataset::add_unlabeled(std::span<const double> features) {
    if (labeled_) throw DataError("labeled dataset requires a label");
    if (features.size() != p_)
        throw DataError(fmt::format("sample has {} features, dataset expects {}", features.size(), p_));
    for (double v : features)
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    values_.insert(values_.end(), features.begin(), features.end());
}

void Dataset::reserve(std::size_t n) {
    values_.reserve(n * p_);
    if (labeled_) labels_.reserve(n);
}

void Dataset::set_raw_labels(std::vector<std::int64_t> raw) {
    if (!raw.empty() && raw.size() != c_)
        throw DataError(fmt::format("raw label map has {} entries, expected {}", raw.size(), c_));
    raw_labels_ = std::move(raw);
}

void Dataset::set_class_names(std::vector<std::string> names) {
    if (!names.empty() && names.size() != c_)
        throw DataError(fmt::format("{} class names given for {} classes", names.size(), c_));
    class_names_ = std::move(names);
}

void Dataset::set_layout(const ImageLayout& layout) {
    if (layout.width == 0 || layout.height == 0 || layout.band_count == 0)
        throw DataError("image layout dimensions must be positive");
    if (layout.width * layout.height != size())
        throw DataError(fmt::format("image layout {}x{} does not match {} samples", layout.width,
                                    layout.height, size()));
    layout_ = layout;
}

Dataset Dataset::empty_like() const {
    Dataset d(p_, c_, labeled_);
    d.raw_labels_ = raw_labels_;
    d.class_names_ = class_names_;
    return d;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, bool comma) {
    std::vector<std::string_view> out;
    auto is_space = [](char ch) { return ch == ' ' || ch == '\t' || ch == '\r'; };
    if (comma) {
        std::size_t start = 0;
        while (true) {
            std::size_t pos = line.find(',', start);
            std::string_view field = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
            while (!field.empty() && is_space(field.front())) field.remove_prefix(1);
            while (!field.empty() && is_space(field.back())) field.remove_suffix(1);
            out.push_back(field);
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
    } else {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && is_space(line[i])) ++i;
            if (i >= line.size()) break;
            std::size_t j = i;
            while (j < line.size() && !is_space(line[j])) ++j;
            out.push_back(line.substr(i, j - i));
            i = j;
        }
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, std::int64_t& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool blank_or_comment(std::string_view line) {
    for (char ch : line) {
        if (ch == '#') return true;
        if (ch != ' ' && ch != '\t' && ch != '\r') return false;
    }
    return true;
}

}  // namespace

Dataset parse_dataset(const std::string& text, const LoadOptions& options, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    std::optional<bool> comma;
    if (options.delimiter == Delimiter::Comma) comma = true;
    if (options.delimiter == Delimiter::Whitespace) comma = false;

    std::size_t columns = 0;
    std::size_t label_col = 0;
    std::vector<double> values;
    std::vector<std::int64_t> raw;
    std::vector<double> feats;

    while (std::getline(in, line)) {
        ++row;
        if (blank_or_comment(line)) continue;
        if (!comma) comma = line.find(',') != std::string::npos;
        auto fields = split_fields(line, *comma);
        if (columns == 0) {
            columns = fields.size();
            if (options.labeled && columns < 2)
                throw DataError(fmt::format("{}: row {}: need at least one feature and a label column",
                                            source, row));
            label_col = options.label_column.value_or(columns - 1);
            if (options.labeled && label_col >= columns)
                throw DataError(fmt::format("{}: label column {} out of range ({} columns)", source,
                                            label_col, columns));
        } else if (fields.size() != columns) {
            throw DataError(fmt::format("{}: row {}: expected {} columns, found {}", source, row, columns,
                                        fields.size()));
        }
        feats.clear();
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (options.labeled && k == label_col) {
                std::int64_t lab = 0;
                if (!parse_int(fields[k], lab))
                    throw DataError(fmt::format("{}: row {}: label '{}' is not an integer", source, row,
                                                fields[k]));
                raw.push_back(lab);
                continue;
            }
            double v = 0.0;
            if (!parse_double(fields[k], v))
                throw DataError(fmt::format("{}: row {}: column {}: '{}' is not a finite number", source,
                                            row, k, fields[k]));
            feats.push_back(v);
        }
        values.insert(values.end(), feats.begin(), feats.end());
    }
    if (columns == 0) throw DataError(fmt::format("{}: no data rows", source));

    const std::size_t p = options.labeled ? columns - 1 : columns;
    const std::size_t n = values.size() / p;
    if (!options.labeled) {
        Dataset d(p, 0, false);
        d.reserve(n);
        for (std::size_t i = 0; i < n; ++i) d.add_unlabeled({values.data() + i * p, p});
        return d;
    }

    std::vector<std::int64_t> distinct = raw;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::map<std::int64_t, std::size_t> index;
    for (std::size_t j = 0; j < distinct.size(); ++j) index[distinct[j]] = j;

    Dataset d(p, distinct.size());
    d.reserve(n);
    for (std::size_t i = 0; i < n; ++i) d.add({values.data() + i * p, p}, index.at(raw[i]));
    d.set_raw_labels(std::move(distinct));
    return d;
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open dataset '{}'", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), options, path.string());
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    std::string line;
    for (std::size_t i = 0; i < d.size(); ++i) {
        line.clear();
        for (double v : d.features(i)) {
            line += fmt::format("{}", v);
            line += ' ';
        }
        if (d.labeled()) {
            const std::size_t lab = d.label(i);
            if (d.raw_labels().empty())
                line += fmt::format("{}", lab);
            else
                line += fmt::format("{}", d.raw_labels()[lab]);
        } else if (!line.empty()) {
            line.pop_back();
        }
        out << line << '\n';
    }
}

Dataset select_features(const Dataset& d, std::span<const std::size_t> columns) {
    if (columns.empty()) throw DataError("feature selection is empty");
    std::vector<std::size_t> seen(columns.begin(), columns.end());
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
        throw DataError("feature selection repeats a column");
    for (std::size_t col : columns)
        if (col >= d.p())
            throw DataError(fmt::format("feature column {} out of range (p = {})", col, d.p()));

    Dataset out(columns.size(), d.c(), d.labeled());
    out.set_raw_labels(d.raw_labels());
    out.set_class_names(d.class_names());
    out.reserve(d.size());
    std::vector<double> row(columns.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto src = d.features(i);
        for (std::size_t k = 0; k < columns.size(); ++k) row[k] = src[columns[k]];
        if (d.labeled())
            out.add(row, d.label(i));
        else
            out.add_unlabeled(row);
    }
    if (d.layout()) {
        ImageLayout layout = *d.layout();
        layout.band_count = columns.size();
        out.set_layout(layout);
    }
    return out;
}

Partition stratified_partition(const Dataset& d, const PartitionSpec& spec) {
    if (!d.labeled()) throw DataError("partitioning requires a labeled dataset");
    if (spec.per_class_train_counts.size() != d.c())
        throw DataError(fmt::format("partition gives {} class counts, dataset has {} classes",
                                    spec.per_class_train_counts.size(), d.c()));
    std::vector<std::vector<std::size_t>> by_class(d.c());
    for (std::size_t i = 0; i < d.size(); ++i) by_class[d.label(i)].push_back(i);

    std::mt19937_64 rng(spec.seed);
    std::vector<char> in_train(d.size(), 0);
    for (std::size_t j = 0; j < d.c(); ++j) {
        const std::size_t want = spec.per_class_train_counts[j];
        auto& idx = by_class[j];
        if (want > idx.size()) {
            std::string name = d.class_names().empty() ? fmt::format("{}", j) : d.class_names()[j];
            if (!d.raw_labels().empty()) name += fmt::format(" (raw label {})", d.raw_labels()[j]);
            throw DataError(fmt::format("class {} has {} samples, {} requested for training", name,
                                        idx.size(), want));
        }
        // Partial Fisher-Yates: the first `want` slots become a uniform draw.
        for (std::size_t k = 0; k < want; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
            std::swap(idx[k], idx[pick(rng)]);
            in_train[idx[k]] = 1;
        }
    }

    Partition part{d.empty_like(), d.empty_like()};
    for (std::size_t i = 0; i < d.size(); ++i) (in_train[i] ? part.train : part.test).add(d.features(i), d.label(i));
    return part;
}

std::vector<std::size_t> class_histogram(const Dataset& d) {
    std::vector<std::size_t> counts(d.c(), 0);
    if (!d.labeled()) return counts;
    for (std::size_t lab : d.labels()) ++counts[lab];
    return counts;
}

std::vector<FeatureRange> feature_ranges(const Dataset& d) {
    std::vector<FeatureRange> out(d.p());
    if (d.empty()) return out;
    for (std::size_t k = 0; k < d.p(); ++k) out[k] = {d.features(0)[k], d.features(0)[k]};
    for (std::size_t i = 1; i < d.size(); ++i) {
        auto row = d.features(i);
        for (std::size_t k = 0; k < d.p(); ++k) {
            out[k].min = std::min(out[k].min, row[k]);
            out[k].max = std::max(out[k].max, row[k]);
        }
    }
    return out;
}

namespace {

std::vector<double> read_plane(const std::filesystem::path& path, PlaneFormat format, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open image plane '{}'", path.string()));
    std::vector<double> out;
    out.reserve(expected);
    if (format == PlaneFormat::Binary8) {
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (bytes.size() != expected)
            throw DataError(fmt::format("plane '{}' has {} bytes, expected {}", path.string(), bytes.size(),
                                        expected));
        for (char b : bytes) out.push_back(static_cast<double>(static_cast<unsigned char>(b)));
    } else {
        std::string token;
        while (in >> token) {
            double v = 0.0;
            if (!parse_double(token, v))
                throw DataError(fmt::format("plane '{}': value {} ('{}') is not a number", path.string(),
                                            out.size() + 1, token));
            out.push_back(v);
        }
        if (out.size() != expected)
            throw DataError(fmt::format("plane '{}' has {} values, expected {}", path.string(), out.size(),
                                        expected));
    }
    return out;
}

}  // namespace

Dataset load_image_dataset(const ImagePlanes& planes) {
    if (planes.bands.empty()) throw DataError("image input needs at least one band plane");
    if (planes.width == 0 || planes.height == 0) throw DataError("image dimensions must be positive");
    const std::size_t n = planes.width * planes.height;
    const std::size_t p = planes.bands.size();

    std::vector<std::vector<double>> bands;
    bands.reserve(p);
    for (const auto& path : planes.bands) bands.push_back(read_plane(path, planes.format, n));

    std::vector<double> row(p);
    Dataset d;
    if (planes.labels) {
        auto label_plane = read_plane(*planes.labels, planes.format, n);
        std::vector<std::int64_t> raw(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = label_plane[i];
            if (v != std::floor(v)) throw DataError(fmt::format("label plane pixel {} is not an integer", i));
            raw[i] = static_cast<std::int64_t>(v);
        }
        std::vector<std::int64_t> distinct = raw;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        d = Dataset(p, distinct.size());
        d.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < p; ++k) row[k] = bands[k][i];
            auto it = std::lower_bound(distinct.begin(), distinct.end(), raw[i]);
            d.add(row, static_cast<std::size_t>(it - distinct.begin()));
        }
        d.set_raw_labels(std::move(distinct));
    } else {
        d = Dataset(p, 0, false);
        d.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < p; ++k) row[k] = bands[k][i];
            d.add_unlabeled(row);
        }
    }
    d.set_layout({planes.width, planes.height, p});
    return d;
}

}  // namespace fzr
