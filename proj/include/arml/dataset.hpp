#ifndef ARML_DATASET_HPP
#define ARML_DATASET_HPP

#include "arml/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace arml {

/**
 * Labeled instances in a dense N x D feature matrix.
 *
 * Labels are contiguous class ids in [0, C). The original label value of class id
 * `c` is `label_values()[c]`; ids are assigned by ascending original value.
 * Immutable after construction.
 */
class Dataset {
public:
    /// Throws std::invalid_argument when N or D is zero, sizes disagree, a label is
    /// outside [0, label_values.size()), or label_values is not strictly ascending.
    Dataset(Matrix features, std::vector<int> labels, std::vector<double> label_values);

    [[nodiscard]] Index size() const noexcept { return features_.rows(); }
    [[nodiscard]] Index dim() const noexcept { return features_.cols(); }
    [[nodiscard]] int num_classes() const noexcept { return static_cast<int>(label_values_.size()); }

    [[nodiscard]] const Matrix &features() const noexcept { return features_; }
    [[nodiscard]] Vector instance(Index i) const { return features_.row(i).transpose(); }
    [[nodiscard]] int label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<int> &labels() const noexcept { return labels_; }
    [[nodiscard]] const std::vector<double> &label_values() const noexcept { return label_values_; }

    /// Number of instances per class id.
    [[nodiscard]] std::vector<Index> class_counts() const;

private:
    Matrix features_;
    std::vector<int> labels_;
    std::vector<double> label_values_;
};

struct ParseOptions {
    /// Feature dimension used when larger than the maximum index seen.
    std::optional<Index> dim_hint;
    /// Fixed label mapping (e.g. a training set's `label_values()`); when set, every
    /// label must be one of these values and absent classes are allowed.
    std::optional<std::vector<double>> label_values;
};

/// Parses LIBSVM text (`<label> <idx>:<val> ...`, 1-based strictly increasing
/// indices, `#` comments). Throws parse_error with the offending line.
Dataset parse_libsvm(std::istream &in, const ParseOptions &options = {});
Dataset read_libsvm(const std::filesystem::path &path, const ParseOptions &options = {});

/// Writes LIBSVM text, omitting zero features, with round-trip precision.
void write_libsvm(std::ostream &out, const Dataset &data);
void write_libsvm(const std::filesystem::path &path, const Dataset &data);

/// n instances drawn uniformly without replacement, kept in original order.
/// Deterministic given `seed`. Throws std::invalid_argument when n > N or n == 0.
Dataset sample_subset(const Dataset &data, Index n, std::uint64_t seed);

/// Per-feature affine map onto [lower, upper] fitted on one dataset and applied to
/// others. Constant features map to `lower`.
class MinMaxScaler {
public:
    MinMaxScaler(double lower, double upper);

    void fit(const Dataset &data);
    [[nodiscard]] Dataset transform(const Dataset &data) const;

    [[nodiscard]] const Vector &data_min() const noexcept { return min_; }
    [[nodiscard]] const Vector &data_max() const noexcept { return max_; }

private:
    double lower_;
    double upper_;
    Vector min_;
    Vector max_;
};

}  // namespace arml

#endif  // ARML_DATASET_HPP
