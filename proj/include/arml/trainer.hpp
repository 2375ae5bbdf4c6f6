#ifndef ARML_TRAINER_HPP
#define ARML_TRAINER_HPP

#include "arml/dataset.hpp"
#include "arml/metric.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace arml {

/// Monotonically non-increasing surrogate applied to the signed triplet margin.
enum class LossKind { negative, hinge, exponential, logistic };

/// `sampled` draws one same-class and one other-class neighbor per instance;
/// `exact_kth` uses the exact k-th min / k-th max triplet of the K-NN bound.
enum class Objective { sampled, exact_kth };

LossKind parse_loss(std::string_view name);
std::string_view to_string(LossKind kind);
Objective parse_objective(std::string_view name);
std::string_view to_string(Objective objective);

double loss_value(LossKind kind, double epsilon);
double loss_derivative(LossKind kind, double epsilon);

struct TrainConfig {
    LossKind loss = LossKind::negative;
    int epochs = 1000;
    Index neighborhood = 10;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    Objective objective = Objective::sampled;
    int k = 1;             ///< K of the exact_kth objective
    Index factor_rows = 0;  ///< rows of G; 0 means D
    int threads = 1;
};

/// One training term: anchor instance, same-class instance, other-class instance.
struct Triplet {
    Index anchor;
    Index plus;
    Index minus;
};

/// Per-instance nearest same-class (excluding the instance) and other-class
/// neighbors under d_M, ascending by (distance, index), truncated to `neighborhood`.
struct NeighborLists {
    std::vector<std::vector<Index>> same;
    std::vector<std::vector<Index>> diff;
};

NeighborLists neighbor_lists(const Dataset &data, const MetricFactor &metric, Index neighborhood, int threads = 1);

/// Uniform draw of one same-class and one other-class neighbor of instance i.
/// Returns nullopt when either list is empty.
std::optional<Triplet> randnear_pair(const NeighborLists &lists, Index i, std::mt19937_64 &rng);
std::optional<Triplet> randnear_pair(const Dataset &data, const MetricFactor &metric, Index i, Index neighborhood,
                                     std::mt19937_64 &rng);

/// Draws one triplet per instance in index order; skipped instances are counted.
std::vector<Triplet> sample_triplets(const NeighborLists &lists, std::mt19937_64 &rng, Index *skipped = nullptr);

/// Triplets selected by the exact k-th max over same-class i (i != t) and k-th min
/// over other-class j, one per instance t, with k = (K + 1) / 2.
std::vector<Triplet> exact_kth_triplets(const Dataset &data, const MetricFactor &metric, int k_neighbors,
                                        int threads = 1, Index *skipped = nullptr);

struct ObjectiveValue {
    double loss = 0.0;
    Matrix gradient;              ///< d loss / d G
    Index first_nonfinite = -1;   ///< anchor of the first non-finite term, or -1
};

/**
 * Mean loss (over all N instances) of the signed triplet margins under M = G^T G
 * and its exact gradient with respect to G, treating the triplet indices as fixed.
 * Degenerate triplets contribute neither loss nor gradient.
 */
ObjectiveValue objective_and_gradient(const Dataset &data, const Matrix &factor, LossKind loss,
                                      std::span<const Triplet> triplets, int threads = 1);

/// Adam with bias correction, applied element-wise to a matrix parameter.
class Adam {
public:
    Adam(Index rows, Index cols, double lr, double beta1, double beta2, double eps);
    void step(Matrix &parameter, const Matrix &gradient);
    [[nodiscard]] int steps() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    Matrix m_, v_;
};

struct EpochReport {
    int epoch;        ///< 1-based
    double loss;      ///< objective before this epoch's update
    Index skipped;    ///< instances without a usable triplet
};

/**
 * Robust metric learning: G starts at the (truncated) identity; every epoch
 * refreshes neighbor triplets under the current metric, evaluates the full-batch
 * objective and takes one Adam step. Throws std::runtime_error on a non-finite
 * loss or gradient.
 */
MetricFactor train(const Dataset &data, const TrainConfig &config,
                   const std::function<void(const EpochReport &)> &observer = {});

}  // namespace arml

#endif  // ARML_TRAINER_HPP
