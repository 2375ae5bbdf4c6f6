#ifndef ARML_METRIC_HPP
#define ARML_METRIC_HPP

#include "arml/types.hpp"

#include <filesystem>
#include <iosfwd>

namespace arml {

/**
 * Mahalanobis metric parameterized by a factor G (r x D) with M = G^T G.
 *
 * M is computed once at construction, so it is exactly symmetric and positive
 * semi-definite up to rounding. A rectangular G gives a rank-r metric.
 */
class MetricFactor {
public:
    explicit MetricFactor(Matrix factor);

    /// G = I, the Euclidean baseline.
    static MetricFactor identity(Index dim);

    [[nodiscard]] const Matrix &factor() const noexcept { return factor_; }
    [[nodiscard]] const Matrix &matrix() const noexcept { return matrix_; }
    [[nodiscard]] Index dim() const noexcept { return factor_.cols(); }
    [[nodiscard]] Index rank() const noexcept { return factor_.rows(); }

private:
    Matrix factor_;
    Matrix matrix_;
};

/// d_M(x, x') = (x - x')^T M (x - x'), the squared form, clamped at 0.
/// Throws std::invalid_argument on a dimension mismatch.
double mahalanobis_distance(const MetricFactor &metric, const VectorRef &x, const VectorRef &x_prime);

/// Metric file: a header line `r D`, then r rows of D values (row-major G) at
/// 17 significant digits.
void save_metric(std::ostream &out, const MetricFactor &metric);
void save_metric(const std::filesystem::path &path, const MetricFactor &metric);
MetricFactor load_metric(std::istream &in);
MetricFactor load_metric(const std::filesystem::path &path);

}  // namespace arml

#endif  // ARML_METRIC_HPP
