#include "arml/attack.hpp"

#include "arml/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace arml {

namespace {

class Oracle {
public:
    Oracle(const KnnModel &model, int y) : model_(model), y_(y) {}
    bool adversarial(const Vector &point) const { return model_.predict(point) != y_; }

private:
    const KnnModel &model_;
    int y_;
};

// Largest adversarial point on the segment from x (classified y) to `outside`.
Vector bisect(const Oracle &oracle, const Vector &x, const Vector &outside, double tolerance) {
    const double length = (outside - x).norm();
    double lo = 0.0, hi = 1.0;
    while ((hi - lo) * length > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (oracle.adversarial(x + mid * (outside - x))) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return x + hi * (outside - x);
}

}  // namespace

AttackResult boundary_attack(const KnnModel &model, const VectorRef &x_ref, int y, std::uint64_t seed,
                             const AttackOptions &options) {
    const Dataset &train = model.train();
    if (x_ref.size() != train.dim()) throw std::invalid_argument("attack input dimension mismatch");
    const Vector x = x_ref;
    const Oracle oracle(model, y);

    AttackResult result;
    if (oracle.adversarial(x)) {
        result.upper_bound = 0.0;
        result.adversarial = x;
        return result;
    }

    Index init = -1;
    double init_distance = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < train.size(); ++i) {
        const double d = (train.features().row(i).transpose() - x).squaredNorm();
        if (d < init_distance && oracle.adversarial(train.instance(i))) {
            init_distance = d;
            init = i;
        }
    }
    if (init < 0) return result;

    Vector current = bisect(oracle, x, train.instance(init), options.boundary_tolerance);
    double distance = (current - x).norm();
    result.upper_bound = distance;
    result.adversarial = current;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    double sigma = options.orthogonal_scale;
    double mu = options.approach_scale;
    int orthogonal_hits = 0, approach_hits = 0, trials = 0, approach_trials = 0;
    const Index dim = x.size();
    Vector eta(dim);

    for (int step = 0; step < options.steps && distance > 0.0; ++step) {
        const Vector direction = (current - x) / distance;
        for (Index d = 0; d < dim; ++d) eta(d) = normal(rng);
        eta -= eta.dot(direction) * direction;
        const double eta_norm = eta.norm();
        if (eta_norm > 0.0) eta *= sigma * distance / eta_norm;

        Vector sphere = current + eta;
        sphere = x + (sphere - x) * (distance / (sphere - x).norm());
        ++trials;
        if (oracle.adversarial(sphere)) {
            ++orthogonal_hits;
            ++approach_trials;
            const Vector closer = sphere + mu * (x - sphere);
            if (oracle.adversarial(closer)) {
                ++approach_hits;
                current = closer;
            } else {
                current = sphere;
            }
            distance = (current - x).norm();
            if (distance < result.upper_bound) {
                result.upper_bound = distance;
                result.adversarial = current;
            }
        }

        if (trials == 10) {
            sigma *= orthogonal_hits > 5 ? 1.1 : 0.9;
            trials = orthogonal_hits = 0;
        }
        if (approach_trials == 10) {
            mu *= approach_hits > 5 ? 1.1 : 0.9;
            mu = std::min(mu, 0.5);
            approach_trials = approach_hits = 0;
        }
    }
    return result;
}

std::vector<AttackResult> attack_all(const KnnModel &model, const Dataset &test, std::uint64_t seed,
                                     const AttackOptions &options, int threads) {
    std::vector<AttackResult> results(static_cast<std::size_t>(test.size()));
    parallel_for(test.size(), threads, [&](Index t) {
        std::seed_seq sequence{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                               static_cast<std::uint32_t>(t)};
        std::uint64_t instance_seed = 0;
        std::uint32_t words[2];
        sequence.generate(words, words + 2);
        instance_seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
        results[static_cast<std::size_t>(t)] =
            boundary_attack(model, test.instance(t), test.label(t), instance_seed, options);
    });
    return results;
}

RobustErrorCurve empirical_curve(const KnnModel &model, const Dataset &test, std::span<const double> radii,
                                 std::uint64_t seed, const AttackOptions &options, int threads) {
    if (test.size() == 0) throw std::invalid_argument("empty test set");
    const std::vector<AttackResult> results = attack_all(model, test, seed, options, threads);
    std::vector<double> bounds;
    bounds.reserve(results.size());
    for (const AttackResult &r : results) bounds.push_back(r.upper_bound);
    return robust_error_curve(bounds, radii, CurveKind::empirical);
}

}  // namespace arml
