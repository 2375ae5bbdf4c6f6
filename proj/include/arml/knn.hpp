#ifndef ARML_KNN_HPP
#define ARML_KNN_HPP

#include "arml/dataset.hpp"
#include "arml/metric.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace arml {

/**
 * Mahalanobis K-NN classifier over a training set.
 *
 * Neighbor search is exact brute force. Distance ties go to the smaller training
 * index; vote ties go to the smallest class id. The model caches the projected
 * training data X G^T (for distances) and X M (for certification bounds).
 */
class KnnModel {
public:
    /// Throws std::invalid_argument unless K is odd, 1 <= K <= N, and the metric
    /// dimension matches the data.
    KnnModel(std::shared_ptr<const Dataset> train, MetricFactor metric, int k);
    KnnModel(const Dataset &train, MetricFactor metric, int k);

    [[nodiscard]] const Dataset &train() const noexcept { return *train_; }
    [[nodiscard]] std::shared_ptr<const Dataset> train_ptr() const noexcept { return train_; }
    [[nodiscard]] const MetricFactor &metric() const noexcept { return metric_; }
    [[nodiscard]] int k() const noexcept { return k_; }

    /// Rows are G x_i.
    [[nodiscard]] const Matrix &projected() const noexcept { return projected_; }
    /// Rows are M x_i.
    [[nodiscard]] const Matrix &transformed() const noexcept { return transformed_; }

    /// d_M(x, x_i) for every training instance.
    [[nodiscard]] Vector distances(const VectorRef &x) const;

    /// Majority label of the K nearest training instances, optionally skipping one.
    [[nodiscard]] int predict(const VectorRef &x, std::optional<Index> exclude = std::nullopt) const;
    [[nodiscard]] int predict_from_distances(const Vector &distances, std::optional<Index> exclude = std::nullopt) const;

    /// Indices of the `count` nearest training instances in ascending (distance, index) order.
    [[nodiscard]] std::vector<Index> nearest(const Vector &distances, Index count,
                                             std::optional<Index> exclude = std::nullopt) const;

private:
    std::shared_ptr<const Dataset> train_;
    MetricFactor metric_;
    int k_;
    Matrix projected_;
    Matrix transformed_;
};

/// Fraction of `test` misclassified. With `leave_one_out`, `test` must be the
/// training set itself and each instance is excluded from its own neighbor search.
double clean_error(const KnnModel &model, const Dataset &test, bool leave_one_out, int threads = 1);

}  // namespace arml

#endif  // ARML_KNN_HPP
