#include "arml/trainer.hpp"

#include "arml/certify.hpp"
#include "arml/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace arml {

LossKind parse_loss(std::string_view name) {
    if (name == "negative") return LossKind::negative;
    if (name == "hinge") return LossKind::hinge;
    if (name == "exponential") return LossKind::exponential;
    if (name == "logistic") return LossKind::logistic;
    throw std::invalid_argument(fmt::format("unknown loss '{}'", name));
}

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::negative: return "negative";
        case LossKind::hinge: return "hinge";
        case LossKind::exponential: return "exponential";
        case LossKind::logistic: return "logistic";
    }
    return "unknown";
}

Objective parse_objective(std::string_view name) {
    if (name == "sampled") return Objective::sampled;
    if (name == "exact-kth" || name == "exact_kth") return Objective::exact_kth;
    throw std::invalid_argument(fmt::format("unknown objective '{}'", name));
}

std::string_view to_string(Objective objective) {
    return objective == Objective::sampled ? "sampled" : "exact-kth";
}

double loss_value(LossKind kind, double epsilon) {
    switch (kind) {
        case LossKind::negative: return -epsilon;
        case LossKind::hinge: return std::max(1.0 - epsilon, 0.0);
        case LossKind::exponential: return std::exp(-epsilon);
        case LossKind::logistic:
            // log(1 + e^-eps) without overflow for large negative eps.
            return epsilon >= 0.0 ? std::log1p(std::exp(-epsilon)) : -epsilon + std::log1p(std::exp(epsilon));
    }
    return 0.0;
}

double loss_derivative(LossKind kind, double epsilon) {
    switch (kind) {
        case LossKind::negative: return -1.0;
        case LossKind::hinge: return epsilon < 1.0 ? -1.0 : 0.0;
        case LossKind::exponential: return -std::exp(-epsilon);
        case LossKind::logistic: {
            if (epsilon >= 0.0) {
                const double e = std::exp(-epsilon);
                return -e / (1.0 + e);
            }
            return -1.0 / (1.0 + std::exp(epsilon));
        }
    }
    return 0.0;
}

NeighborLists neighbor_lists(const Dataset &data, const MetricFactor &metric, Index neighborhood, int threads) {
    if (neighborhood < 1) throw std::invalid_argument("neighborhood must be at least 1");
    if (metric.dim() != data.dim()) throw std::invalid_argument("metric dimension mismatch");
    const Index n = data.size();
    const Matrix z = data.features() * metric.factor().transpose();
    const Vector norms = z.rowwise().squaredNorm();

    NeighborLists lists;
    lists.same.resize(static_cast<std::size_t>(n));
    lists.diff.resize(static_cast<std::size_t>(n));

    constexpr Index block = 256;
    const Index blocks = (n + block - 1) / block;
    parallel_for(blocks, threads, [&](Index b) {
        const Index begin = b * block;
        const Index rows = std::min(block, n - begin);
        const Matrix inner = z.middleRows(begin, rows) * z.transpose();
        std::vector<Index> same, diff;
        Vector dist(n);
        for (Index r = 0; r < rows; ++r) {
            const Index i = begin + r;
            dist = (norms.array() + norms(i) - 2.0 * inner.row(r).transpose().array()).matrix();
            same.clear();
            diff.clear();
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                (data.label(j) == data.label(i) ? same : diff).push_back(j);
            }
            auto closer = [&](Index a, Index c) { return dist(a) < dist(c) || (dist(a) == dist(c) && a < c); };
            auto take = [&](std::vector<Index> &pool, std::vector<Index> &out) {
                const auto count = static_cast<std::ptrdiff_t>(std::min<std::size_t>(pool.size(), neighborhood));
                std::partial_sort(pool.begin(), pool.begin() + count, pool.end(), closer);
                out.assign(pool.begin(), pool.begin() + count);
            };
            take(same, lists.same[static_cast<std::size_t>(i)]);
            take(diff, lists.diff[static_cast<std::size_t>(i)]);
        }
    });
    return lists;
}

std::optional<Triplet> randnear_pair(const NeighborLists &lists, Index i, std::mt19937_64 &rng) {
    const auto &same = lists.same.at(static_cast<std::size_t>(i));
    const auto &diff = lists.diff.at(static_cast<std::size_t>(i));
    if (same.empty() || diff.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick_same(0, same.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_diff(0, diff.size() - 1);
    const Index plus = same[pick_same(rng)];
    const Index minus = diff[pick_diff(rng)];
    return Triplet{i, plus, minus};
}

std::optional<Triplet> randnear_pair(const Dataset &data, const MetricFactor &metric, Index i, Index neighborhood,
                                     std::mt19937_64 &rng) {
    if (i < 0 || i >= data.size()) throw std::invalid_argument("instance index out of range");
    const Vector z = metric.factor() * data.instance(i);
    const Vector dist = ((data.features() * metric.factor().transpose()).rowwise() - z.transpose())
                            .rowwise()
                            .squaredNorm();
    std::vector<Index> same, diff;
    for (Index j = 0; j < data.size(); ++j) {
        if (j == i) continue;
        (data.label(j) == data.label(i) ? same : diff).push_back(j);
    }
    auto closer = [&](Index a, Index c) { return dist(a) < dist(c) || (dist(a) == dist(c) && a < c); };
    NeighborLists lists;
    lists.same.resize(static_cast<std::size_t>(data.size()));
    lists.diff.resize(static_cast<std::size_t>(data.size()));
    for (auto [pool, out] : {std::pair{&same, &lists.same[static_cast<std::size_t>(i)]},
                             std::pair{&diff, &lists.diff[static_cast<std::size_t>(i)]}}) {
        const auto count = static_cast<std::ptrdiff_t>(std::min<std::size_t>(pool->size(), neighborhood));
        std::partial_sort(pool->begin(), pool->begin() + count, pool->end(), closer);
        out->assign(pool->begin(), pool->begin() + count);
    }
    return randnear_pair(lists, i, rng);
}

std::vector<Triplet> sample_triplets(const NeighborLists &lists, std::mt19937_64 &rng, Index *skipped) {
    std::vector<Triplet> triplets;
    triplets.reserve(lists.same.size());
    Index missing = 0;
    for (std::size_t i = 0; i < lists.same.size(); ++i) {
        if (auto t = randnear_pair(lists, static_cast<Index>(i), rng)) {
            triplets.push_back(*t);
        } else {
            ++missing;
        }
    }
    if (skipped) *skipped = missing;
    return triplets;
}

std::vector<Triplet> exact_kth_triplets(const Dataset &data, const MetricFactor &metric, int k_neighbors, int threads,
                                        Index *skipped) {
    if (k_neighbors < 1 || k_neighbors % 2 == 0) throw std::invalid_argument("K must be a positive odd number");
    const Index k = (k_neighbors + 1) / 2;
    const Index n = data.size();
    const Matrix z = data.features() * metric.factor().transpose();
    const Matrix w = data.features() * metric.matrix();

    std::vector<std::optional<Triplet>> chosen(static_cast<std::size_t>(n));
    parallel_for(n, threads, [&](Index t) {
        const Vector dist = (z.rowwise() - z.row(t)).rowwise().squaredNorm();
        std::vector<Index> same, diff;
        for (Index j = 0; j < n; ++j) {
            if (j == t) continue;
            (data.label(j) == data.label(t) ? same : diff).push_back(j);
        }
        if (same.empty() || static_cast<Index>(diff.size()) < k) return;
        const Index top = std::min<Index>(k, static_cast<Index>(same.size()));

        std::vector<std::pair<double, Index>> per_i(same.size());
        std::vector<std::pair<double, std::pair<Index, Index>>> per_j;
        per_j.reserve(diff.size());
        for (Index j : diff) {
            for (std::size_t s = 0; s < same.size(); ++s) {
                const Index i = same[s];
                const double denominator = (w.row(i) - w.row(j)).norm();
                const double value =
                    denominator < kTripletDenominatorGuard ? 0.0 : (dist(j) - dist(i)) / (2.0 * denominator);
                per_i[s] = {value, i};
            }
            // k-th largest, ties resolved toward the smaller index.
            std::nth_element(per_i.begin(), per_i.begin() + (top - 1), per_i.end(), [](const auto &a, const auto &b) {
                return a.first > b.first || (a.first == b.first && a.second < b.second);
            });
            per_j.push_back({per_i[static_cast<std::size_t>(top - 1)].first,
                             {per_i[static_cast<std::size_t>(top - 1)].second, j}});
        }
        std::nth_element(per_j.begin(), per_j.begin() + (k - 1), per_j.end(), [](const auto &a, const auto &b) {
            return a.first < b.first || (a.first == b.first && a.second.second < b.second.second);
        });
        const auto &pick = per_j[static_cast<std::size_t>(k - 1)].second;
        chosen[static_cast<std::size_t>(t)] = Triplet{t, pick.first, pick.second};
    });

    std::vector<Triplet> triplets;
    Index missing = 0;
    for (const auto &c : chosen) {
        if (c) {
            triplets.push_back(*c);
        } else {
            ++missing;
        }
    }
    if (skipped) *skipped = missing;
    return triplets;
}

ObjectiveValue objective_and_gradient(const Dataset &data, const Matrix &factor, LossKind loss,
                                      std::span<const Triplet> triplets, int threads) {
    if (factor.cols() != data.dim()) throw std::invalid_argument("factor column count must equal D");
    const Index dim = data.dim();
    const Index count = static_cast<Index>(triplets.size());
    const double scale = 1.0 / static_cast<double>(data.size());
    const Matrix &x = data.features();

    // d eps / dG = G S with S = sum of weighted outer products; S = left * right^T.
    Matrix left = Matrix::Zero(dim, 4 * count);
    Matrix right = Matrix::Zero(dim, 4 * count);
    std::vector<double> terms(static_cast<std::size_t>(count), 0.0);

    parallel_for(count, threads, [&](Index n) {
        const Triplet &t = triplets[static_cast<std::size_t>(n)];
        const Vector anchor = x.row(t.anchor).transpose();
        const Vector v_plus = anchor - x.row(t.plus).transpose();
        const Vector v_minus = anchor - x.row(t.minus).transpose();
        const Vector u = x.row(t.plus).transpose() - x.row(t.minus).transpose();

        const double d_plus = (factor * v_plus).squaredNorm();
        const double d_minus = (factor * v_minus).squaredNorm();
        const Vector m = factor.transpose() * (factor * u);
        const double f = m.squaredNorm();
        const double root = std::sqrt(f);
        if (root < kTripletDenominatorGuard) return;

        const double epsilon = (d_minus - d_plus) / (2.0 * root);
        terms[static_cast<std::size_t>(n)] = loss_value(loss, epsilon);
        const double c = scale * loss_derivative(loss, epsilon);
        const double a = c / root;
        const double b = -c * epsilon / f;
        const Index col = 4 * n;
        left.col(col) = a * v_minus;
        right.col(col) = v_minus;
        left.col(col + 1) = -a * v_plus;
        right.col(col + 1) = v_plus;
        left.col(col + 2) = b * u;
        right.col(col + 2) = m;
        left.col(col + 3) = b * m;
        right.col(col + 3) = u;
    });

    ObjectiveValue out;
    for (Index n = 0; n < count; ++n) {
        const double term = terms[static_cast<std::size_t>(n)];
        if (!std::isfinite(term) && out.first_nonfinite < 0) out.first_nonfinite = triplets[static_cast<std::size_t>(n)].anchor;
        out.loss += term;
    }
    out.loss *= scale;
    out.gradient = (factor * left) * right.transpose();
    return out;
}

Adam::Adam(Index rows, Index cols, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("Adam betas must lie in (0, 1)");
    }
}

void Adam::step(Matrix &parameter, const Matrix &gradient) {
    if (gradient.rows() != m_.rows() || gradient.cols() != m_.cols() || parameter.rows() != m_.rows() ||
        parameter.cols() != m_.cols()) {
        throw std::invalid_argument("Adam shape mismatch");
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * gradient;
    v_ = beta2_ * v_ + (1.0 - beta2_) * gradient.cwiseAbs2();
    const double correction1 = 1.0 - std::pow(beta1_, t_);
    const double correction2 = 1.0 - std::pow(beta2_, t_);
    parameter.array() -= lr_ * (m_.array() / correction1) / ((v_.array() / correction2).sqrt() + eps_);
}

MetricFactor train(const Dataset &data, const TrainConfig &config,
                   const std::function<void(const EpochReport &)> &observer) {
    const Index dim = data.dim();
    const Index rows = config.factor_rows > 0 ? config.factor_rows : dim;
    if (rows > dim) throw std::invalid_argument(fmt::format("factor rows {} exceed dimension {}", rows, dim));
    if (config.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (config.neighborhood < 1) throw std::invalid_argument("neighborhood must be at least 1");

    Matrix factor = Matrix::Identity(rows, dim);
    Adam adam(rows, dim, config.lr, config.beta1, config.beta2, config.adam_eps);
    std::mt19937_64 rng(config.seed);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const MetricFactor current(factor);
        Index skipped = 0;
        std::vector<Triplet> triplets;
        if (config.objective == Objective::sampled) {
            const NeighborLists lists = neighbor_lists(data, current, config.neighborhood, config.threads);
            triplets = sample_triplets(lists, rng, &skipped);
        } else {
            triplets = exact_kth_triplets(data, current, config.k, config.threads, &skipped);
        }
        const ObjectiveValue objective = objective_and_gradient(data, factor, config.loss, triplets, config.threads);
        if (objective.first_nonfinite >= 0) {
            throw std::runtime_error(
                fmt::format("non-finite loss at epoch {} (instance {})", epoch, objective.first_nonfinite));
        }
        if (!std::isfinite(objective.loss) || !objective.gradient.allFinite()) {
            throw std::runtime_error(fmt::format("non-finite loss or gradient at epoch {}", epoch));
        }
        if (observer) observer(EpochReport{epoch, objective.loss, skipped});
        adam.step(factor, objective.gradient);
    }
    return MetricFactor(std::move(factor));
}

}  // namespace arml
