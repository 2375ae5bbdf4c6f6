#ifndef ARML_EXACT_1NN_HPP
#define ARML_EXACT_1NN_HPP

#include "arml/knn.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace arml {

struct QpResult {
    Vector solution;        ///< lambda >= 0
    double value = 0.0;     ///< 1/2 lambda^T P lambda + q^T lambda
    Index iterations = 0;
    bool converged = false;
    bool unbounded = false;  ///< a coordinate with P_ii = 0 and q_i < 0 was held at 0
};

/// Default stopping tolerance on the largest coordinate step.
inline double gcd_default_tolerance(const Vector &q) {
    return 1e-9 * (1.0 + (q.size() > 0 ? q.cwiseAbs().maxCoeff() : 0.0));
}

namespace detail {

/**
 * Greedy coordinate descent for min_{x >= 0} 1/2 x^T P x + q^T x where P is only
 * accessed through its diagonal and `add_column(i, scale, g)`, which performs
 * g += scale * P.col(i).
 */
template <class AddColumn>
QpResult gcd_qp_impl(const Vector &diagonal, const Vector &q, AddColumn &&add_column, Index max_iterations,
                     double tolerance) {
    const Index s = q.size();
    QpResult result;
    result.solution = Vector::Zero(s);
    Vector &x = result.solution;
    Vector g = q;
    for (Index i = 0; i < s; ++i) {
        if (diagonal(i) <= 0.0 && q(i) < 0.0) result.unbounded = true;
    }
    for (Index t = 0; t < max_iterations; ++t) {
        Index best = -1;
        double best_step = 0.0;
        for (Index i = 0; i < s; ++i) {
            if (diagonal(i) <= 0.0) continue;
            const double step = std::max(x(i) - g(i) / diagonal(i), 0.0) - x(i);
            if (std::abs(step) > std::abs(best_step)) {
                best_step = step;
                best = i;
            }
        }
        if (best < 0 || std::abs(best_step) < tolerance) {
            result.converged = true;
            result.iterations = t;
            break;
        }
        x(best) += best_step;
        add_column(best, best_step, g);
        result.iterations = t + 1;
    }
    result.value = 0.5 * x.dot(g + q);
    return result;
}

}  // namespace detail

/**
 * Greedy coordinate descent on min_{lambda >= 0} 1/2 lambda^T P lambda + q^T lambda.
 * Each iteration moves the coordinate with the largest projected Newton step and
 * stops after `max_iterations` or once every step is below `tolerance`.
 * Coordinates with P_ii = 0 stay at 0; if such a coordinate has q_i < 0 the
 * problem is unbounded and `unbounded` is set.
 */
QpResult gcd_qp(const Matrix &P, const Vector &q, Index max_iterations, double tolerance);

struct Perturbation {
    double norm = std::numeric_limits<double>::infinity();
    Vector delta;
    double dual_value = 0.0;  ///< optimal dual objective (minimization form); -dual_value <= norm^2
    bool converged = true;
    Index iterations = 0;
};

struct HalfspaceOptions {
    Index max_iterations = 0;  ///< 0 selects 20 * s * D
    double tolerance = 0.0;    ///< 0 selects gcd_default_tolerance
};

/**
 * Minimum-norm delta with A delta <= b, through its dual with P = 1/2 A A^T, q = b
 * and the primal recovery delta = -1/2 A^T lambda, after scaling every row to unit
 * length. Rows with ||a_i|| < 1e-12 are dropped. When the solver hits its iteration cap, `norm` is the dual lower bound
 * sqrt(max(0, -dual_value)) and `converged` is false.
 */
Perturbation min_norm_perturbation(const Matrix &A, const Vector &b, const HalfspaceOptions &options = {});

/**
 * Smallest perturbation making x at least as close (under d_M) to training instance
 * j as to every training instance labeled y (skipping `exclude`).
 */
Perturbation inner_minimal_perturbation(const KnnModel &model, const VectorRef &x, int y, Index j,
                                        std::optional<Index> exclude = std::nullopt);
Perturbation inner_minimal_perturbation(const Dataset &train, const MetricFactor &metric, const VectorRef &x,
                                        int y, Index j, std::optional<Index> exclude = std::nullopt);

struct ExactOptions {
    bool screening = true;
};

struct ExactResult {
    double epsilon = 0.0;
    Vector delta;
    Index candidate = -1;   ///< training index of the adversarial nearest neighbor; -1 if misclassified
    Index qp_solved = 0;    ///< inner problems solved after screening
    bool converged = true;  ///< false if any inner solve hit its iteration cap
};

/**
 * Exact minimal adversarial perturbation of the Mahalanobis 1-NN classifier at
 * (x, y), ignoring the model's K. Candidates are visited in ascending d_M order;
 * an inner problem is solved only when its triplet screening bound is below the
 * incumbent. Returns epsilon = 0 and a zero delta when x is already misclassified.
 */
ExactResult exact_minimal_perturbation(const KnnModel &model, const VectorRef &x, int y,
                                       std::optional<Index> exclude = std::nullopt, const ExactOptions &options = {});
ExactResult exact_minimal_perturbation(const Dataset &train, const MetricFactor &metric, const VectorRef &x, int y,
                                       std::optional<Index> exclude = std::nullopt, const ExactOptions &options = {});

}  // namespace arml

#endif  // ARML_EXACT_1NN_HPP
