#include "arml/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <string_view>

namespace arml {

Dataset::Dataset(Matrix features, std::vector<int> labels, std::vector<double> label_values)
    : features_(std::move(features)), labels_(std::move(labels)), label_values_(std::move(label_values)) {
    if (features_.rows() < 1 || features_.cols() < 1) {
        throw std::invalid_argument("dataset must have at least one instance and one feature");
    }
    if (static_cast<Index>(labels_.size()) != features_.rows()) {
        throw std::invalid_argument("label count does not match instance count");
    }
    if (label_values_.empty()) throw std::invalid_argument("dataset needs at least one class");
    if (!std::is_sorted(label_values_.begin(), label_values_.end()) ||
        std::adjacent_find(label_values_.begin(), label_values_.end()) != label_values_.end()) {
        throw std::invalid_argument("label values must be strictly ascending");
    }
    const int classes = static_cast<int>(label_values_.size());
    for (int y : labels_) {
        if (y < 0 || y >= classes) throw std::invalid_argument(fmt::format("class id {} outside [0, {})", y, classes));
    }
}

std::vector<Index> Dataset::class_counts() const {
    std::vector<Index> counts(label_values_.size(), 0);
    for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

namespace {

bool parse_double(std::string_view token, double &value) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    if (token.empty()) return false;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    return ec == std::errc() && ptr == token.data() + token.size();
}

bool parse_index(std::string_view token, Index &value) {
    long long parsed = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), parsed);
    if (ec != std::errc() || ptr != token.data() + token.size()) return false;
    value = static_cast<Index>(parsed);
    return true;
}

struct SparseRow {
    double label;
    std::vector<std::pair<Index, double>> entries;  // 0-based
};

}  // namespace

Dataset parse_libsvm(std::istream &in, const ParseOptions &options) {
    std::vector<SparseRow> rows;
    Index max_index = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);

        std::vector<std::string_view> tokens;
        std::size_t pos = 0;
        while (pos < view.size()) {
            while (pos < view.size() && std::isspace(static_cast<unsigned char>(view[pos]))) ++pos;
            std::size_t end = pos;
            while (end < view.size() && !std::isspace(static_cast<unsigned char>(view[end]))) ++end;
            if (end > pos) tokens.push_back(view.substr(pos, end - pos));
            pos = end;
        }
        if (tokens.empty()) continue;

        SparseRow row;
        if (!parse_double(tokens.front(), row.label)) {
            throw parse_error(fmt::format("non-numeric label '{}'", tokens.front()), line_no);
        }
        Index previous = 0;
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            const auto colon = tokens[t].find(':');
            if (colon == std::string_view::npos) {
                throw parse_error(fmt::format("expected <index>:<value>, got '{}'", tokens[t]), line_no);
            }
            Index index = 0;
            double value = 0.0;
            if (!parse_index(tokens[t].substr(0, colon), index) || index < 1) {
                throw parse_error(fmt::format("invalid feature index in '{}'", tokens[t]), line_no);
            }
            if (!parse_double(tokens[t].substr(colon + 1), value)) {
                throw parse_error(fmt::format("non-numeric feature value in '{}'", tokens[t]), line_no);
            }
            if (index <= previous) {
                throw parse_error(fmt::format("feature index {} not strictly increasing", index), line_no);
            }
            previous = index;
            row.entries.emplace_back(index - 1, value);
        }
        max_index = std::max(max_index, previous);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw parse_error("no instances in input", 0);

    Index dim = max_index;
    if (options.dim_hint) dim = std::max(dim, *options.dim_hint);
    if (dim < 1) throw parse_error("no features in input", 0);

    std::vector<double> label_values;
    if (options.label_values) {
        label_values = *options.label_values;
    } else {
        label_values.reserve(rows.size());
        for (const auto &row : rows) label_values.push_back(row.label);
        std::sort(label_values.begin(), label_values.end());
        label_values.erase(std::unique(label_values.begin(), label_values.end()), label_values.end());
    }

    Matrix features = Matrix::Zero(static_cast<Index>(rows.size()), dim);
    std::vector<int> labels(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto it = std::lower_bound(label_values.begin(), label_values.end(), rows[r].label);
        if (it == label_values.end() || *it != rows[r].label) {
            throw parse_error(fmt::format("label {} not in the label mapping", rows[r].label), 0);
        }
        labels[r] = static_cast<int>(it - label_values.begin());
        for (const auto &[index, value] : rows[r].entries) features(static_cast<Index>(r), index) = value;
    }
    return Dataset(std::move(features), std::move(labels), std::move(label_values));
}

Dataset read_libsvm(const std::filesystem::path &path, const ParseOptions &options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return parse_libsvm(in, options);
    } catch (const parse_error &e) {
        throw parse_error(path.string() + ": " + e.what(), e.line());
    }
}

void write_libsvm(std::ostream &out, const Dataset &data) {
    const auto &x = data.features();
    std::string line;
    for (Index i = 0; i < data.size(); ++i) {
        line = fmt::format("{:.17g}", data.label_values()[static_cast<std::size_t>(data.label(i))]);
        for (Index d = 0; d < data.dim(); ++d) {
            if (x(i, d) != 0.0) line += fmt::format(" {}:{:.17g}", d + 1, x(i, d));
        }
        line += '\n';
        out << line;
    }
}

void write_libsvm(const std::filesystem::path &path, const Dataset &data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_libsvm(out, data);
}

Dataset sample_subset(const Dataset &data, Index n, std::uint64_t seed) {
    if (n < 1 || n > data.size()) {
        throw std::invalid_argument(fmt::format("cannot sample {} of {} instances", n, data.size()));
    }
    std::vector<Index> all(static_cast<std::size_t>(data.size()));
    std::iota(all.begin(), all.end(), Index{0});
    std::vector<Index> picked;
    picked.reserve(static_cast<std::size_t>(n));
    std::mt19937_64 rng(seed);
    // Selection sampling over a forward range keeps the original order.
    std::sample(all.begin(), all.end(), std::back_inserter(picked), n, rng);

    Matrix features(n, data.dim());
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r) {
        features.row(r) = data.features().row(picked[static_cast<std::size_t>(r)]);
        labels[static_cast<std::size_t>(r)] = data.label(picked[static_cast<std::size_t>(r)]);
    }
    return Dataset(std::move(features), std::move(labels), data.label_values());
}

MinMaxScaler::MinMaxScaler(double lower, double upper) : lower_(lower), upper_(upper) {
    if (!(upper > lower)) throw std::invalid_argument("scaler range must satisfy lower < upper");
}

void MinMaxScaler::fit(const Dataset &data) {
    min_ = data.features().colwise().minCoeff().transpose();
    max_ = data.features().colwise().maxCoeff().transpose();
}

Dataset MinMaxScaler::transform(const Dataset &data) const {
    if (min_.size() == 0) throw std::logic_error("scaler used before fit");
    if (data.dim() != min_.size()) throw std::invalid_argument("scaler dimension mismatch");
    Matrix x = data.features();
    for (Index d = 0; d < x.cols(); ++d) {
        const double span = max_(d) - min_(d);
        if (span > 0.0) {
            x.col(d) = ((x.col(d).array() - min_(d)) * ((upper_ - lower_) / span) + lower_).matrix();
        } else {
            x.col(d).setConstant(lower_);
        }
    }
    return Dataset(std::move(x), data.labels(), data.label_values());
}

}  // namespace arml
