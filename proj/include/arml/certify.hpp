#ifndef ARML_CERTIFY_HPP
#define ARML_CERTIFY_HPP

#include "arml/knn.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace arml {

/// Below this value of ||M (x+ - x-)|| a triplet is treated as degenerate (value 0).
inline constexpr double kTripletDenominatorGuard = 1e-12;

/**
 * Signed minimal-perturbation value of the triplet problem
 *
 *     (d_M(x, x-) - d_M(x, x+)) / (2 ||M (x+ - x-)||).
 *
 * Its positive part is the smallest ||delta|| making x + delta at least as close to
 * x- as to x+. Returns 0 for a degenerate triplet (x+ == x- under M).
 */
double triplet_epsilon(const VectorRef &x_plus, const VectorRef &x_minus, const VectorRef &x,
                       const MetricFactor &metric);

/**
 * Lower bound on the minimal adversarial perturbation of the K-NN model at (x, y):
 * the k-th smallest over differently labeled j of the k-th largest over same-labeled
 * i of triplet_epsilon(x_i, x_j, x), with k = (K + 1) / 2. The result is signed.
 *
 * When fewer than k same-class instances exist, the k-th largest falls back to the
 * smallest available value. Throws std::invalid_argument when there are fewer than
 * k different-class instances or no same-class instance.
 */
double knn_lower_bound(const KnnModel &model, const VectorRef &x, int y,
                       std::optional<Index> exclude = std::nullopt);

enum class CertifyMode { theorem1, exact1nn };
enum class CurveKind { certified, empirical };

struct CertificationResult {
    std::vector<double> lower_bound;  ///< per instance, >= 0; 0 when misclassified
    std::vector<bool> is_exact;       ///< true when produced by the exact 1-NN solver
};

struct RobustErrorCurve {
    std::vector<double> radii;
    std::vector<double> errors;
    CurveKind kind = CurveKind::certified;
};

/// Per-instance certified radii for every test instance. `exact1nn` requires K = 1.
CertificationResult certify(const KnnModel &model, const Dataset &test, CertifyMode mode, int threads = 1);

/// errors[t] = fraction of radii-values `values[n] <= radii[t]`. Radii must be
/// ascending and non-negative.
RobustErrorCurve robust_error_curve(std::span<const double> values, std::span<const double> radii, CurveKind kind);

RobustErrorCurve certified_curve(const KnnModel &model, const Dataset &test, std::span<const double> radii,
                                 CertifyMode mode, int threads = 1);

/// CSV `radius,robust_error`. When given, `radius_labels` are printed verbatim in
/// place of the numeric radii; errors use 6 decimals.
void write_curve_csv(std::ostream &out, const RobustErrorCurve &curve,
                     std::span<const std::string> radius_labels = {});

}  // namespace arml

#endif  // ARML_CERTIFY_HPP
