#include "arml/certify.hpp"
#include "arml/exact_1nn.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace arml;

namespace {

Vector vec(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

Dataset planar(const std::vector<Vector> &a, const std::vector<Vector> &b) {
    Matrix x(static_cast<Index>(a.size() + b.size()), 2);
    std::vector<int> labels;
    Index r = 0;
    for (const auto &p : a) {
        x.row(r++) = p.transpose();
        labels.push_back(0);
    }
    for (const auto &p : b) {
        x.row(r++) = p.transpose();
        labels.push_back(1);
    }
    return Dataset(x, labels, {0.0, 1.0});
}

// min over other-class j of the ray-scanned inner problem, 2-D only.
double scanned_exact(const Dataset &train, const Matrix &M, const Vector &x, int y) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < train.size(); ++j) {
        if (train.label(j) == y) continue;
        std::vector<Index> same;
        for (Index i = 0; i < train.size(); ++i) {
            if (train.label(i) == y) same.push_back(i);
        }
        Matrix A(static_cast<Index>(same.size()), 2);
        Vector b(A.rows());
        for (Index r = 0; r < A.rows(); ++r) {
            oracle::bisector_constraint(M, x, train.instance(same[static_cast<std::size_t>(r)]), train.instance(j),
                                        A.row(r).transpose(), b(r));
        }
        best = std::min(best, oracle::ray_scan_min_norm(A, b));
    }
    return best;
}

}  // namespace

TEST_SUITE("exact_1nn") {

TEST_CASE("coordinate descent on small problems") {
    Matrix P(2, 2);
    P << 2, 0, 0, 2;
    Vector q(2);
    q << -2, 1;
    const QpResult r = gcd_qp(P, q, 1000, gcd_default_tolerance(q));
    CHECK(r.converged);
    CHECK(r.solution(0) == doctest::Approx(1.0));
    CHECK(r.solution(1) == 0.0);
    CHECK(r.value == doctest::Approx(-1.0));

    // grid over lambda >= 0
    double grid_best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 300; ++a) {
        for (int b = 0; b <= 300; ++b) {
            Vector l(2);
            l << a * 0.01, b * 0.01;
            grid_best = std::min(grid_best, 0.5 * l.dot(P * l) + q.dot(l));
        }
    }
    CHECK(r.value == doctest::Approx(grid_best).epsilon(1e-9));

    Vector positive(2);
    positive << 0.5, 3;
    const QpResult zero = gcd_qp(P, positive, 1000, 1e-9);
    CHECK(zero.solution.isZero());
    CHECK(zero.value == 0.0);
    CHECK(zero.iterations == 0);
}

TEST_CASE("coordinate descent matches projected gradient on random problems") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const Index s = 1 + trial % 8;
        const Matrix B = oracle::random_factor(rng, s, s + 2);
        const Matrix P = B * B.transpose();
        const Vector q = oracle::random_vector(rng, s);
        const QpResult r = gcd_qp(P, q, 1'000'000, gcd_default_tolerance(q));
        REQUIRE(r.converged);
        CHECK((r.solution.array() >= 0.0).all());
        const double reference = oracle::projected_gradient_qp(P, q);
        CHECK(std::abs(r.value - reference) <= 1e-6 * std::max(std::abs(reference), 1e-12));
    }
}

TEST_CASE("zero diagonal coordinates") {
    Matrix P = Matrix::Zero(2, 2);
    P(0, 0) = 1.0;
    Vector q(2);
    q << -1, -1;
    const QpResult r = gcd_qp(P, q, 100, 1e-9);
    CHECK(r.unbounded);
    CHECK(r.solution(1) == 0.0);
    q(1) = 1.0;
    CHECK_FALSE(gcd_qp(P, q, 100, 1e-9).unbounded);
}

TEST_CASE("invalid QP inputs") {
    CHECK_THROWS_AS(gcd_qp(Matrix::Identity(2, 2), Vector::Zero(3), 10, 1e-9), std::invalid_argument);
    CHECK_THROWS_AS(gcd_qp(Matrix::Identity(2, 2), Vector::Zero(2), 10, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gcd_qp(-Matrix::Identity(2, 2), Vector::Zero(2), 10, 1e-9), std::invalid_argument);
}

TEST_CASE("inner problem examples") {
    const MetricFactor id = MetricFactor::identity(2);
    SUBCASE("single constraint") {
        const Dataset d = planar({vec(0, 0)}, {vec(2, 0)});
        const Perturbation p = inner_minimal_perturbation(d, id, vec(0, 0), 0, 1);
        CHECK(p.norm == doctest::Approx(1.0));
        CHECK(p.delta(0) == doctest::Approx(1.0));
        CHECK(p.delta(1) == doctest::Approx(0.0));
    }
    SUBCASE("already closer to the candidate") {
        const Dataset d = planar({vec(5, 0)}, {vec(1, 0)});
        const Perturbation p = inner_minimal_perturbation(d, id, vec(0, 0), 0, 1);
        CHECK(p.norm == 0.0);
        CHECK(p.delta.isZero());
    }
    SUBCASE("two constraints") {
        const Dataset d = planar({vec(0, 0), vec(0, 2)}, {vec(2, 2)});
        const Perturbation p = inner_minimal_perturbation(d, id, vec(0, 0), 0, 2);
        Matrix A(2, 2);
        Vector b(2);
        for (Index r = 0; r < 2; ++r) {
            oracle::bisector_constraint(Matrix::Identity(2, 2), vec(0, 0), d.instance(r), d.instance(2),
                                        A.row(r).transpose(), b(r));
        }
        // Primal minimum through the dual solved by projected gradient.
        Vector lambda;
        oracle::projected_gradient_qp(0.5 * A * A.transpose(), b, &lambda);
        const double reference = (0.5 * A.transpose() * lambda).norm();
        CHECK(p.norm == doctest::Approx(reference).epsilon(1e-6));
        CHECK(p.norm == doctest::Approx(oracle::ray_scan_min_norm(A, b)).epsilon(1e-6));
    }
    SUBCASE("candidate must be of another class") {
        const Dataset d = planar({vec(0, 0)}, {vec(2, 0)});
        CHECK_THROWS_AS(inner_minimal_perturbation(d, id, vec(0, 0), 0, 0), std::invalid_argument);
    }
}

TEST_CASE("min-norm halfspace intersection") {
    Matrix A(2, 2);
    A << -1, 0, 0, -1;
    Vector b(2);
    b << -3, -4;  // x >= 3 and y >= 4
    const Perturbation p = min_norm_perturbation(A, b);
    CHECK(p.converged);
    CHECK(p.norm == doctest::Approx(5.0));
    CHECK(p.delta(0) == doctest::Approx(3.0));
    CHECK(p.delta(1) == doctest::Approx(4.0));

    Matrix zero = Matrix::Zero(1, 2);
    Vector one(1);
    one << 1.0;
    CHECK(min_norm_perturbation(zero, one).norm == 0.0);
}

TEST_CASE("exact perturbation examples") {
    const MetricFactor id = MetricFactor::identity(2);
    const Dataset d = planar({vec(0, 0)}, {vec(2, 0), vec(0, 4)});
    const ExactResult r = exact_minimal_perturbation(d, id, vec(0, 0), 0);
    CHECK(r.epsilon == doctest::Approx(1.0));
    CHECK(r.delta(0) == doctest::Approx(1.0));
    CHECK(r.delta(1) == doctest::Approx(0.0));
    CHECK(r.candidate == 1);

    const ExactResult wrong = exact_minimal_perturbation(d, id, vec(1.9, 0), 0);
    CHECK(wrong.epsilon == 0.0);
    CHECK(wrong.candidate == -1);
}

TEST_CASE("exact values agree with ray scanning in two dimensions") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const Dataset d = oracle::random_dataset(rng, 4 + trial % 8, 2, 2);
        const MetricFactor m(oracle::random_factor(rng, 2, 2));
        const Vector x = oracle::random_vector(rng, 2);
        const int y = trial % 2;
        const ExactResult r = exact_minimal_perturbation(d, m, x, y);
        if (r.candidate < 0) continue;
        const double scanned = scanned_exact(d, m.matrix(), x, y);
        if (r.converged) {
            CHECK(r.epsilon == doctest::Approx(scanned).epsilon(1e-6));
        } else {
            // a capped solve reports its dual bound, which must stay below the minimum
            CHECK(r.epsilon <= scanned * (1.0 + 1e-9));
            CHECK(r.epsilon == doctest::Approx(scanned).epsilon(1e-4));
        }
    }
}

TEST_CASE("screening, feasibility, duality and scale invariance on random instances") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 200; ++trial) {
        const Index dim = 1 + trial % 5;
        const Dataset d = oracle::random_dataset(rng, 5 + trial % 25, dim, 2 + trial % 2);
        const Matrix g = oracle::random_factor(rng, 1 + trial % dim, dim);
        const MetricFactor m(g), m3(std::sqrt(3.0) * g);
        const Vector x = oracle::random_vector(rng, dim);
        const int y = trial % d.num_classes();

        ExactOptions off;
        off.screening = false;
        const KnnModel model(d, m, 1);
        const ExactResult on = exact_minimal_perturbation(model, x, y);
        const ExactResult full = exact_minimal_perturbation(model, x, y, std::nullopt, off);
        CHECK(std::abs(on.epsilon - full.epsilon) <= 1e-8);
        CHECK(on.qp_solved <= full.qp_solved);

        const ExactResult scaled = exact_minimal_perturbation(d, m3, x, y);
        CHECK(std::abs(on.epsilon - scaled.epsilon) <= 1e-8);

        CHECK(knn_lower_bound(model, x, y) <= on.epsilon + 1e-8);

        if (on.candidate < 0) continue;
        CHECK(on.delta.norm() == doctest::Approx(on.epsilon));
        const Vector moved = x + on.delta;
        const double to_candidate = mahalanobis_distance(m, moved, d.instance(on.candidate));
        for (Index i = 0; i < d.size(); ++i) {
            if (d.label(i) == y) CHECK(to_candidate <= mahalanobis_distance(m, moved, d.instance(i)) + 1e-7);
        }
        const Perturbation inner = inner_minimal_perturbation(model, x, y, on.candidate);
        if (inner.converged) {
            const double primal = inner.delta.squaredNorm();
            CHECK(std::abs(primal + inner.dual_value) <= 1e-7 * std::max(1.0, primal));
        }
    }
}

TEST_CASE("duplicate training points") {
    const Dataset d = planar({vec(0, 0), vec(0, 0)}, {vec(2, 0), vec(2, 0)});
    const ExactResult r = exact_minimal_perturbation(d, MetricFactor::identity(2), vec(0, 0), 0);
    CHECK(r.epsilon == doctest::Approx(1.0));
    CHECK(r.converged);
}

TEST_CASE("leave-one-out exclusion") {
    const Dataset d = planar({vec(0, 0), vec(-1, 0)}, {vec(2, 0)});
    const MetricFactor id = MetricFactor::identity(2);
    // Excluding instance 0, x = (0,0) is nearest to (-1,0); the boundary with (2,0) is at x = 0.5.
    CHECK(exact_minimal_perturbation(d, id, vec(0, 0), 0, Index{0}).epsilon == doctest::Approx(0.5));
}

}
