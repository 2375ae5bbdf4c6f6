// Independent reference computations used to check the library.
#ifndef ARML_TESTS_ORACLES_HPP
#define ARML_TESTS_ORACLES_HPP

#include "arml/dataset.hpp"
#include "arml/exact_1nn.hpp"
#include "arml/metric.hpp"
#include "arml/trainer.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using arml::Index;
using arml::Matrix;
using arml::Vector;

/// Accelerated projected gradient with restarts on min_{x >= 0} 1/2 x'Px + q'x.
inline double projected_gradient_qp(const Matrix &P, const Vector &q, Vector *solution = nullptr,
                                    int max_iterations = 2'000'000) {
    const Index s = q.size();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(P, Eigen::EigenvaluesOnly);
    const double lipschitz = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    Vector x = Vector::Zero(s), y = x, prev = x;
    double momentum = 1.0;
    auto value = [&](const Vector &v) { return 0.5 * v.dot(P * v) + q.dot(v); };
    double best = value(x);
    for (int t = 0; t < max_iterations; ++t) {
        const Vector grad = P * y + q;
        x = (y - grad / lipschitz).cwiseMax(0.0);
        const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        const double v = value(x);
        if (v > best) {
            // restart the momentum when the objective goes up
            momentum = 1.0;
            y = x;
        } else {
            y = x + ((momentum - 1.0) / next) * (x - prev);
            momentum = next;
        }
        best = std::min(best, v);
        // projected gradient norm at x
        const Vector g = P * x + q;
        double kkt = 0.0;
        for (Index i = 0; i < s; ++i) kkt = std::max(kkt, std::abs(x(i) > 0.0 ? g(i) : std::min(g(i), 0.0)));
        prev = x;
        if (kkt < 1e-13 * (1.0 + q.cwiseAbs().maxCoeff())) break;
    }
    if (solution) *solution = x;
    return value(x);
}

/// Smallest t >= 0 with t u feasible for A d <= b, or +inf.
inline double ray_entry(const Matrix &A, const Vector &b, double theta) {
    const double u0 = std::cos(theta), u1 = std::sin(theta);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < A.rows(); ++i) {
        const double slope = A(i, 0) * u0 + A(i, 1) * u1;
        if (std::abs(slope) < 1e-15) {
            if (b(i) < 0.0) return std::numeric_limits<double>::infinity();
            continue;
        }
        const double t = b(i) / slope;
        if (slope > 0.0) {
            hi = std::min(hi, t);
        } else {
            lo = std::max(lo, t);
        }
    }
    return lo <= hi ? lo : std::numeric_limits<double>::infinity();
}

/// Minimum of ||d|| over {d in R^2 : A d <= b}, by scanning rays from the origin
/// and repeatedly zooming in around the best direction. Every value it reports is
/// attained by a feasible point, so it never undercuts the true minimum.
inline double ray_scan_min_norm(const Matrix &A, const Vector &b, int rays = 20'000) {
    double best = std::numeric_limits<double>::infinity();
    double best_theta = 0.0;
    double spacing = 2.0 * M_PI / rays;
    for (int r = 0; r < rays; ++r) {
        const double theta = spacing * r;
        const double t = ray_entry(A, b, theta);
        if (t < best) {
            best = t;
            best_theta = theta;
        }
    }
    if (!std::isfinite(best)) return best;
    for (int level = 0; level < 8; ++level) {
        const double centre = best_theta;
        const double width = 2.0 * spacing;
        spacing = 2.0 * width / 2000.0;
        for (int r = 0; r <= 2000; ++r) {
            const double theta = centre - width + spacing * r;
            const double t = ray_entry(A, b, theta);
            if (t < best) {
                best = t;
                best_theta = theta;
            }
        }
    }
    return best;
}

/// Rows M(x_i - x_j) and bounds 1/2 (d(x, x_i) - d(x, x_j)) of the constraints
/// d(x + d, x_j) <= d(x + d, x_i), written directly from the quadratic forms.
inline void bisector_constraint(const Matrix &M, const Vector &x, const Vector &xi, const Vector &xj,
                                Eigen::Ref<Vector> row, double &bound) {
    row = M * (xi - xj);
    const double di = (x - xi).dot(M * (x - xi));
    const double dj = (x - xj).dot(M * (x - xj));
    bound = 0.5 * (di - dj);
}

/// Signed triplet value recomputed from M.
inline double triplet(const Matrix &M, const Vector &xp, const Vector &xm, const Vector &x) {
    const double denominator = (M * (xp - xm)).norm();
    if (denominator < 1e-12) return 0.0;
    const double dm = (x - xm).dot(M * (x - xm));
    const double dp = (x - xp).dot(M * (x - xp));
    return (dm - dp) / (2.0 * denominator);
}

/// k-th min over other-class j of k-th max over same-class i, by full sorting.
inline double naive_kth_bound(const arml::Dataset &train, const Matrix &M, const Vector &x, int y, int K) {
    const std::size_t k = static_cast<std::size_t>((K + 1) / 2);
    std::vector<double> per_j;
    for (Index j = 0; j < train.size(); ++j) {
        if (train.label(j) == y) continue;
        std::vector<double> values;
        for (Index i = 0; i < train.size(); ++i) {
            if (train.label(i) == y) values.push_back(triplet(M, train.instance(i), train.instance(j), x));
        }
        std::sort(values.begin(), values.end(), std::greater<>());
        per_j.push_back(values[std::min(k, values.size()) - 1]);
    }
    std::sort(per_j.begin(), per_j.end());
    return per_j[k - 1];
}

/// Dual lower bound sqrt(-dual) of min ||d|| s.t. A d <= b; never above the true value.
inline double certified_subproblem(const Matrix &A, const Vector &b) {
    if (A.rows() == 0) return 0.0;
    arml::HalfspaceOptions options;
    options.max_iterations = 200'000;
    const arml::Perturbation p = arml::min_norm_perturbation(A, b, options);
    return std::sqrt(std::max(0.0, -p.dual_value));
}

/// Minimal adversarial perturbation of binary K-NN by enumerating every pair (I, J)
/// with |J| = k other-class and |I| = k - 1 same-class instances.
inline double enumerate_knn_perturbation(const arml::Dataset &train, const Matrix &M, const Vector &x, int y,
                                         int K) {
    const int k = (K + 1) / 2;
    std::vector<Index> same, diff;
    for (Index i = 0; i < train.size(); ++i) (train.label(i) == y ? same : diff).push_back(i);

    auto subsets = [](const std::vector<Index> &pool, int size) {
        std::vector<std::vector<Index>> out;
        if (size > static_cast<int>(pool.size())) return out;
        std::vector<bool> mask(pool.size(), false);
        std::fill(mask.begin(), mask.begin() + size, true);
        do {
            std::vector<Index> pick;
            for (std::size_t t = 0; t < pool.size(); ++t) {
                if (mask[t]) pick.push_back(pool[t]);
            }
            out.push_back(pick);
        } while (std::prev_permutation(mask.begin(), mask.end()));
        return out;
    };

    double best = std::numeric_limits<double>::infinity();
    const int same_pick = std::min<int>(k - 1, static_cast<int>(same.size()));
    for (const auto &J : subsets(diff, k)) {
        for (const auto &I : subsets(same, same_pick)) {
            std::vector<Index> rest;
            for (Index i : same) {
                if (std::find(I.begin(), I.end(), i) == I.end()) rest.push_back(i);
            }
            Matrix A(static_cast<Index>(J.size() * rest.size()), train.dim());
            Vector b(A.rows());
            Index r = 0;
            for (Index j : J) {
                for (Index i : rest) {
                    bisector_constraint(M, x, train.instance(i), train.instance(j), A.row(r).transpose(), b(r));
                    ++r;
                }
            }
            best = std::min(best, certified_subproblem(A, b));
        }
    }
    return best;
}

/// Mean loss of the given triplets, written from the definitions.
inline double reference_loss(const arml::Dataset &data, const Matrix &G, arml::LossKind loss,
                             const std::vector<arml::Triplet> &triplets) {
    const Matrix M = G.transpose() * G;
    double total = 0.0;
    for (const auto &t : triplets) {
        const Vector x = data.instance(t.anchor), xp = data.instance(t.plus), xm = data.instance(t.minus);
        if ((M * (xp - xm)).norm() < 1e-12) continue;
        total += arml::loss_value(loss, triplet(M, xp, xm, x));
    }
    return total / static_cast<double>(data.size());
}

/// Central finite differences of reference_loss with respect to every entry of G.
inline Matrix finite_difference_gradient(const arml::Dataset &data, const Matrix &G, arml::LossKind loss,
                                         const std::vector<arml::Triplet> &triplets, double h = 1e-5) {
    Matrix grad(G.rows(), G.cols());
    Matrix probe = G;
    for (Index r = 0; r < G.rows(); ++r) {
        for (Index c = 0; c < G.cols(); ++c) {
            probe(r, c) = G(r, c) + h;
            const double up = reference_loss(data, probe, loss, triplets);
            probe(r, c) = G(r, c) - h;
            const double down = reference_loss(data, probe, loss, triplets);
            probe(r, c) = G(r, c);
            grad(r, c) = (up - down) / (2.0 * h);
        }
    }
    return grad;
}

/// Majority vote of the K nearest instances under M with index tie-breaking.
inline int naive_predict(const arml::Dataset &train, const Matrix &M, const Vector &x, int K) {
    std::vector<std::pair<double, Index>> order;
    for (Index i = 0; i < train.size(); ++i) {
        const Vector v = x - train.instance(i);
        order.push_back({v.dot(M * v), i});
    }
    std::sort(order.begin(), order.end());
    std::vector<int> votes(static_cast<std::size_t>(train.num_classes()), 0);
    for (int t = 0; t < K; ++t) ++votes[static_cast<std::size_t>(train.label(order[static_cast<std::size_t>(t)].second))];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

/// Random labeled data with every class present.
inline arml::Dataset random_dataset(std::mt19937_64 &rng, Index n, Index dim, int classes) {
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> label(0, classes - 1);
    Matrix x(n, dim);
    for (Index i = 0; i < n; ++i) {
        for (Index d = 0; d < dim; ++d) x(i, d) = normal(rng);
    }
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i < classes ? static_cast<int>(i) : label(rng);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<double> values(static_cast<std::size_t>(classes));
    std::iota(values.begin(), values.end(), 0.0);
    return arml::Dataset(std::move(x), std::move(labels), std::move(values));
}

/// Random factor G (rows x dim) with standard normal entries.
inline Matrix random_factor(std::mt19937_64 &rng, Index rows, Index dim) {
    std::normal_distribution<double> normal;
    Matrix g(rows, dim);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < dim; ++c) g(r, c) = normal(rng);
    }
    return g;
}

inline Vector random_vector(std::mt19937_64 &rng, Index dim) {
    std::normal_distribution<double> normal;
    Vector v(dim);
    for (Index d = 0; d < dim; ++d) v(d) = normal(rng);
    return v;
}

}  // namespace oracle

#endif  // ARML_TESTS_ORACLES_HPP
