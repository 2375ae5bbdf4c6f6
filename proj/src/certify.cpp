#include "arml/certify.hpp"

#include "arml/exact_1nn.hpp"
#include "arml/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>

namespace arml {

double triplet_epsilon(const VectorRef &x_plus, const VectorRef &x_minus, const VectorRef &x,
                       const MetricFactor &metric) {
    const Index dim = metric.dim();
    if (x_plus.size() != dim || x_minus.size() != dim || x.size() != dim) {
        throw std::invalid_argument("triplet dimension mismatch");
    }
    const double denominator = (metric.matrix() * (x_plus - x_minus)).norm();
    if (denominator < kTripletDenominatorGuard) return 0.0;
    const double numerator = mahalanobis_distance(metric, x, x_minus) - mahalanobis_distance(metric, x, x_plus);
    return numerator / (2.0 * denominator);
}

double knn_lower_bound(const KnnModel &model, const VectorRef &x, int y, std::optional<Index> exclude) {
    const Dataset &train = model.train();
    const Index k = (model.k() + 1) / 2;
    const Vector distances = model.distances(x);

    std::vector<Index> same, diff;
    for (Index i = 0; i < train.size(); ++i) {
        if (exclude && *exclude == i) continue;
        (train.label(i) == y ? same : diff).push_back(i);
    }
    if (same.empty()) throw std::invalid_argument("no same-class instance for the lower bound");
    if (static_cast<Index>(diff.size()) < k) {
        throw std::invalid_argument(fmt::format("need {} different-class instances, have {}", k, diff.size()));
    }
    const Index top = std::min<Index>(k, static_cast<Index>(same.size()));

    auto closer = [&](Index a, Index b) {
        return distances(a) < distances(b) || (distances(a) == distances(b) && a < b);
    };
    // Nearby candidates produce the small per-j values, nearby i the large triplet values.
    std::sort(diff.begin(), diff.end(), closer);
    std::sort(same.begin(), same.end(), closer);

    const Matrix &w = model.transformed();
    auto epsilon = [&](Index i, Index j) {
        const double denominator = (w.row(i) - w.row(j)).norm();
        if (denominator < kTripletDenominatorGuard) return 0.0;
        return (distances(j) - distances(i)) / (2.0 * denominator);
    };

    // k smallest per-j values seen so far (max-heap); its top is the running k-th min.
    std::priority_queue<double> smallest;
    std::vector<double> largest;  // min-heap of the `top` largest values for one j
    largest.reserve(static_cast<std::size_t>(top));
    for (Index j : diff) {
        const double threshold =
            static_cast<Index>(smallest.size()) < k ? std::numeric_limits<double>::infinity() : smallest.top();
        largest.clear();
        Index at_or_above = 0;
        bool pruned = false;
        for (Index i : same) {
            const double value = epsilon(i, j);
            // Once `top` values reach the threshold, this j cannot lower the k-th min.
            if (value >= threshold && ++at_or_above >= top) {
                pruned = true;
                break;
            }
            if (static_cast<Index>(largest.size()) < top) {
                largest.push_back(value);
                std::push_heap(largest.begin(), largest.end(), std::greater<>());
            } else if (value > largest.front()) {
                std::pop_heap(largest.begin(), largest.end(), std::greater<>());
                largest.back() = value;
                std::push_heap(largest.begin(), largest.end(), std::greater<>());
            }
        }
        if (pruned) continue;
        const double kth_max = largest.front();
        if (static_cast<Index>(smallest.size()) < k) {
            smallest.push(kth_max);
        } else if (kth_max < smallest.top()) {
            smallest.pop();
            smallest.push(kth_max);
        }
    }
    return smallest.top();
}

CertificationResult certify(const KnnModel &model, const Dataset &test, CertifyMode mode, int threads) {
    if (mode == CertifyMode::exact1nn && model.k() != 1) {
        throw std::invalid_argument("exact certification requires K = 1");
    }
    if (test.size() == 0) throw std::invalid_argument("empty test set");
    const auto n = static_cast<std::size_t>(test.size());
    std::vector<double> bounds(n, 0.0);
    std::vector<char> exact(n, 0);
    parallel_for(test.size(), threads, [&](Index t) {
        const Vector x = test.instance(t);
        const int y = test.label(t);
        const auto slot = static_cast<std::size_t>(t);
        if (mode == CertifyMode::exact1nn) {
            const ExactResult r = exact_minimal_perturbation(model, x, y);
            bounds[slot] = r.epsilon;
            exact[slot] = r.converged;
            return;
        }
        if (model.predict(x) != y) return;
        bounds[slot] = std::max(0.0, knn_lower_bound(model, x, y));
    });
    CertificationResult result;
    result.lower_bound = std::move(bounds);
    result.is_exact.assign(exact.begin(), exact.end());
    return result;
}

RobustErrorCurve robust_error_curve(std::span<const double> values, std::span<const double> radii, CurveKind kind) {
    if (values.empty()) throw std::invalid_argument("no per-instance values for the curve");
    for (std::size_t t = 0; t < radii.size(); ++t) {
        if (!(radii[t] >= 0.0)) throw std::invalid_argument("radii must be non-negative");
        if (t > 0 && radii[t] < radii[t - 1]) throw std::invalid_argument("radii must be ascending");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    RobustErrorCurve curve;
    curve.kind = kind;
    curve.radii.assign(radii.begin(), radii.end());
    curve.errors.reserve(radii.size());
    for (double radius : radii) {
        const auto count = std::upper_bound(sorted.begin(), sorted.end(), radius) - sorted.begin();
        curve.errors.push_back(static_cast<double>(count) / static_cast<double>(sorted.size()));
    }
    return curve;
}

RobustErrorCurve certified_curve(const KnnModel &model, const Dataset &test, std::span<const double> radii,
                                 CertifyMode mode, int threads) {
    const CertificationResult result = certify(model, test, mode, threads);
    return robust_error_curve(result.lower_bound, radii, CurveKind::certified);
}

void write_curve_csv(std::ostream &out, const RobustErrorCurve &curve, std::span<const std::string> radius_labels) {
    if (!radius_labels.empty() && radius_labels.size() != curve.radii.size()) {
        throw std::invalid_argument("radius label count does not match the curve");
    }
    out << "radius,robust_error\n";
    for (std::size_t t = 0; t < curve.radii.size(); ++t) {
        const std::string radius = radius_labels.empty() ? fmt::format("{}", curve.radii[t]) : radius_labels[t];
        out << fmt::format("{},{:.6f}\n", radius, curve.errors[t]);
    }
}

}  // namespace arml
