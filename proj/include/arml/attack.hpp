#ifndef ARML_ATTACK_HPP
#define ARML_ATTACK_HPP

#include "arml/certify.hpp"
#include "arml/knn.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace arml {

struct AttackResult {
    double upper_bound = std::numeric_limits<double>::infinity();  ///< ||adversarial - x||
    Vector adversarial;  ///< misclassified point; empty when none was found
};

struct AttackOptions {
    int steps = 1000;
    double orthogonal_scale = 0.1;  ///< relative to the current distance
    double approach_scale = 0.01;   ///< fraction of the distance removed per step
    double boundary_tolerance = 1e-6;
};

/**
 * Hard-label boundary attack. Starts from the nearest training instance the model
 * assigns a label other than y, bisects toward x until within the boundary
 * tolerance, then alternates random orthogonal moves on the sphere around x with
 * steps toward x, keeping only misclassified points. Both step sizes adapt on the
 * rolling success rate.
 *
 * Returns upper_bound 0 when x is already misclassified and +inf when no training
 * instance is classified differently.
 */
AttackResult boundary_attack(const KnnModel &model, const VectorRef &x, int y, std::uint64_t seed,
                             const AttackOptions &options = {});

/// Attacks every test instance; instance t uses a generator seeded from (seed, t).
std::vector<AttackResult> attack_all(const KnnModel &model, const Dataset &test, std::uint64_t seed,
                                     const AttackOptions &options = {}, int threads = 1);

RobustErrorCurve empirical_curve(const KnnModel &model, const Dataset &test, std::span<const double> radii,
                                 std::uint64_t seed, const AttackOptions &options = {}, int threads = 1);

}  // namespace arml

#endif  // ARML_ATTACK_HPP
