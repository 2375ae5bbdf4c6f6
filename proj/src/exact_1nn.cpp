#include "arml/exact_1nn.hpp"

#include "arml/certify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <vector>

namespace arml {

QpResult gcd_qp(const Matrix &P, const Vector &q, Index max_iterations, double tolerance) {
    if (P.rows() != P.cols() || P.rows() != q.size()) {
        throw std::invalid_argument(fmt::format("QP shape mismatch: P is {}x{}, q has {}", P.rows(), P.cols(), q.size()));
    }
    if (tolerance <= 0.0) throw std::invalid_argument("QP tolerance must be positive");
    const Vector diagonal = P.diagonal();
    for (Index i = 0; i < diagonal.size(); ++i) {
        if (diagonal(i) < 0.0) throw std::invalid_argument("QP matrix has a negative diagonal entry");
    }
    return detail::gcd_qp_impl(
        diagonal, q, [&](Index i, double scale, Vector &g) { g.noalias() += scale * P.col(i); }, max_iterations,
        tolerance);
}

Perturbation min_norm_perturbation(const Matrix &A, const Vector &b, const HalfspaceOptions &options) {
    if (A.rows() != b.size()) throw std::invalid_argument("constraint matrix and bound sizes differ");
    const Index dim = A.cols();

    std::vector<Index> kept;
    kept.reserve(static_cast<std::size_t>(A.rows()));
    for (Index i = 0; i < A.rows(); ++i) {
        if (A.row(i).norm() >= kTripletDenominatorGuard) kept.push_back(i);
    }
    const Index s = static_cast<Index>(kept.size());
    Matrix rows(s, dim);
    Vector q(s);
    // Unit-norm rows: an equivalent system whose dual is invariant to rescaling A and b.
    for (Index r = 0; r < s; ++r) {
        const Index i = kept[static_cast<std::size_t>(r)];
        const double length = A.row(i).norm();
        rows.row(r) = A.row(i) / length;
        q(r) = b(i) / length;
    }

    Perturbation out;
    out.delta = Vector::Zero(dim);
    if (s == 0) {
        out.norm = 0.0;
        return out;
    }
    const Vector diagonal = 0.5 * rows.rowwise().squaredNorm();
    const Index cap = options.max_iterations > 0 ? options.max_iterations : 20 * s * std::max<Index>(dim, 1);
    const double tol = options.tolerance > 0.0 ? options.tolerance : gcd_default_tolerance(q);

    // Column i of P = 1/2 A A^T is 1/2 A a_i.
    auto add_column = [&](Index i, double scale, Vector &g) {
        g.noalias() += (0.5 * scale) * (rows * rows.row(i).transpose());
    };
    const QpResult qp = detail::gcd_qp_impl(diagonal, q, add_column, cap, tol);

    out.delta = -0.5 * (rows.transpose() * qp.solution);
    out.dual_value = qp.value;
    out.iterations = qp.iterations;
    out.converged = qp.converged;
    out.norm = qp.converged ? out.delta.norm() : std::sqrt(std::max(0.0, -qp.value));
    return out;
}

namespace {

struct Split {
    std::vector<Index> same;
    std::vector<Index> diff;
};

Split split_by_label(const Dataset &train, int y, std::optional<Index> exclude) {
    Split split;
    for (Index i = 0; i < train.size(); ++i) {
        if (exclude && *exclude == i) continue;
        (train.label(i) == y ? split.same : split.diff).push_back(i);
    }
    return split;
}

Perturbation solve_candidate(const KnnModel &model, const Vector &distances, const std::vector<Index> &same, Index j) {
    const Matrix &w = model.transformed();
    const Index s = static_cast<Index>(same.size());
    Matrix a(s, w.cols());
    Vector b(s);
    for (Index r = 0; r < s; ++r) {
        const Index i = same[static_cast<std::size_t>(r)];
        a.row(r) = w.row(i) - w.row(j);
        b(r) = 0.5 * (distances(i) - distances(j));
    }
    return min_norm_perturbation(a, b);
}

}  // namespace

Perturbation inner_minimal_perturbation(const KnnModel &model, const VectorRef &x, int y, Index j,
                                        std::optional<Index> exclude) {
    const Dataset &train = model.train();
    if (j < 0 || j >= train.size()) throw std::invalid_argument("candidate index out of range");
    if (train.label(j) == y) throw std::invalid_argument("candidate must be labeled differently from y");
    if (exclude && *exclude == j) throw std::invalid_argument("candidate is the excluded instance");
    const Split split = split_by_label(train, y, exclude);
    if (split.same.empty()) throw std::invalid_argument("no same-class instance to compare against");
    return solve_candidate(model, model.distances(x), split.same, j);
}

Perturbation inner_minimal_perturbation(const Dataset &train, const MetricFactor &metric, const VectorRef &x, int y,
                                        Index j, std::optional<Index> exclude) {
    return inner_minimal_perturbation(KnnModel(train, metric, 1), x, y, j, exclude);
}

ExactResult exact_minimal_perturbation(const KnnModel &model, const VectorRef &x, int y, std::optional<Index> exclude,
                                       const ExactOptions &options) {
    const Dataset &train = model.train();
    Split split = split_by_label(train, y, exclude);
    if (split.same.empty()) throw std::invalid_argument("no training instance shares the label");
    if (split.diff.empty()) throw std::invalid_argument("no training instance with a different label");

    const Vector distances = model.distances(x);
    ExactResult result;
    result.delta = Vector::Zero(train.dim());

    auto closer = [&](Index a, Index b) {
        return distances(a) < distances(b) || (distances(a) == distances(b) && a < b);
    };
    const Index nearest = *std::min_element(split.same.begin(), split.same.end(), closer);
    const Index nearest_other = *std::min_element(split.diff.begin(), split.diff.end(), closer);
    if (closer(nearest_other, nearest)) {
        result.candidate = -1;
        return result;  // already misclassified
    }

    std::sort(split.diff.begin(), split.diff.end(), closer);
    std::sort(split.same.begin(), split.same.end(), closer);

    const Matrix &w = model.transformed();
    double incumbent = std::numeric_limits<double>::infinity();
    for (Index j : split.diff) {
        if (options.screening) {
            // Largest triplet bound over same-class i; nearest i tend to dominate.
            double bound = 0.0;
            for (Index i : split.same) {
                const double denominator = (w.row(i) - w.row(j)).norm();
                if (denominator >= kTripletDenominatorGuard) {
                    bound = std::max(bound, (distances(j) - distances(i)) / (2.0 * denominator));
                }
                if (bound >= incumbent) break;
            }
            if (bound >= incumbent) continue;
        }
        Perturbation inner = solve_candidate(model, distances, split.same, j);
        ++result.qp_solved;
        result.converged = result.converged && inner.converged;
        if (inner.norm < incumbent) {
            incumbent = inner.norm;
            result.epsilon = inner.norm;
            result.delta = std::move(inner.delta);
            result.candidate = j;
        }
    }
    return result;
}

ExactResult exact_minimal_perturbation(const Dataset &train, const MetricFactor &metric, const VectorRef &x, int y,
                                       std::optional<Index> exclude, const ExactOptions &options) {
    return exact_minimal_perturbation(KnnModel(train, metric, 1), x, y, exclude, options);
}

}  // namespace arml
