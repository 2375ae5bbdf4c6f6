#include "arml/knn.hpp"

#include "arml/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

namespace arml {

KnnModel::KnnModel(std::shared_ptr<const Dataset> train, MetricFactor metric, int k)
    : train_(std::move(train)), metric_(std::move(metric)), k_(k) {
    if (!train_) throw std::invalid_argument("null training set");
    if (k_ < 1 || k_ % 2 == 0) throw std::invalid_argument(fmt::format("K must be a positive odd number, got {}", k_));
    if (k_ > train_->size()) {
        throw std::invalid_argument(fmt::format("K = {} exceeds the {} training instances", k_, train_->size()));
    }
    if (metric_.dim() != train_->dim()) {
        throw std::invalid_argument(
            fmt::format("metric dimension {} does not match data dimension {}", metric_.dim(), train_->dim()));
    }
    projected_ = train_->features() * metric_.factor().transpose();
    transformed_ = train_->features() * metric_.matrix();
}

KnnModel::KnnModel(const Dataset &train, MetricFactor metric, int k)
    : KnnModel(std::make_shared<const Dataset>(train), std::move(metric), k) {}

Vector KnnModel::distances(const VectorRef &x) const {
    if (x.size() != train_->dim()) {
        throw std::invalid_argument(fmt::format("query dimension {} != {}", x.size(), train_->dim()));
    }
    const Vector z = metric_.factor() * x;
    return (projected_.rowwise() - z.transpose()).rowwise().squaredNorm();
}

std::vector<Index> KnnModel::nearest(const Vector &distances, Index count, std::optional<Index> exclude) const {
    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(distances.size()));
    for (Index i = 0; i < distances.size(); ++i) {
        if (exclude && *exclude == i) continue;
        order.push_back(i);
    }
    if (count > static_cast<Index>(order.size())) {
        throw std::invalid_argument(
            fmt::format("requested {} neighbors but only {} instances are available", count, order.size()));
    }
    auto closer = [&](Index a, Index b) {
        return distances(a) < distances(b) || (distances(a) == distances(b) && a < b);
    };
    const auto middle = order.begin() + count;
    std::partial_sort(order.begin(), middle, order.end(), closer);
    order.resize(static_cast<std::size_t>(count));
    return order;
}

int KnnModel::predict_from_distances(const Vector &distances, std::optional<Index> exclude) const {
    const auto neighbors = nearest(distances, k_, exclude);
    std::vector<int> votes(static_cast<std::size_t>(train_->num_classes()), 0);
    for (Index i : neighbors) ++votes[static_cast<std::size_t>(train_->label(i))];
    // max_element returns the first maximum, i.e. the smallest tied class id.
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

int KnnModel::predict(const VectorRef &x, std::optional<Index> exclude) const {
    return predict_from_distances(distances(x), exclude);
}

double clean_error(const KnnModel &model, const Dataset &test, bool leave_one_out, int threads) {
    if (test.size() == 0) throw std::invalid_argument("empty test set");
    if (leave_one_out && &test != &model.train() && test.size() != model.train().size()) {
        throw std::invalid_argument("leave-one-out evaluation requires the training set as test set");
    }
    std::vector<char> wrong(static_cast<std::size_t>(test.size()), 0);
    parallel_for(test.size(), threads, [&](Index i) {
        const auto exclude = leave_one_out ? std::optional<Index>(i) : std::nullopt;
        wrong[static_cast<std::size_t>(i)] = model.predict(test.instance(i), exclude) != test.label(i);
    });
    return static_cast<double>(std::accumulate(wrong.begin(), wrong.end(), Index{0})) /
           static_cast<double>(test.size());
}

}  // namespace arml
