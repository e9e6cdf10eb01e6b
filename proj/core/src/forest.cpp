#include "calibr/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "calibr/parallel.hpp"
#include "calibr/rng.hpp"

namespace calibr {

namespace {

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double child_cost = 0.0;  // lower is better
};

// Weighted child cost after a candidate split. For binary labels the Gini sum
// is n_l*2*p_l*(1-p_l) + n_r*2*p_r*(1-p_r); the variance criterion is the
// same without the factor 2.
double child_cost(double sum, double count, double total_sum, double total_count,
                  bool gini) {
    double rsum = total_sum - sum;
    double rcount = total_count - count;
    double sse_l = sum - sum * sum / count;
    double sse_r = rsum - rsum * rsum / rcount;
    double cost = sse_l + sse_r;
    return gini ? 2.0 * cost : cost;
}

class TreeBuilder {
public:
    TreeBuilder(const TabularDataset& data, const ForestConfig& config, Rng& rng)
        : data_(data), config_(config), rng_(rng) {}

    Tree build() {
        const std::size_t n = data_.n_rows;
        Tree tree;
        tree.in_bag.assign(n, 0);
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = rng_.below(n);
            rows[i] = r;
            tree.in_bag[r] = 1;
        }
        nodes_.clear();
        degenerate_root_ = false;
        int root = grow(rows, 0, rows.size());
        (void)root;
        tree.nodes = std::move(nodes_);
        return tree;
    }

    bool degenerate_root() const { return degenerate_root_; }

private:
    int grow(std::vector<std::size_t>& rows, std::size_t lo, std::size_t hi) {
        const std::size_t count = hi - lo;
        double label_sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) label_sum += data_.labels[rows[i]];
        const double mean = label_sum / static_cast<double>(count);

        const bool pure = label_sum == 0.0 || label_sum == static_cast<double>(count);
        const std::size_t min_split = 2 * static_cast<std::size_t>(config_.nodesize);
        if (pure || count < min_split) return make_leaf(mean);

        SplitChoice best = best_split(rows, lo, hi, label_sum);
        if (!best.found) {
            if (lo == 0 && hi == rows.size()) degenerate_root_ = true;
            return make_leaf(mean);
        }

        // partition rows in place, stable to keep tree layout deterministic
        std::vector<std::size_t> left, right;
        left.reserve(count);
        right.reserve(count);
        for (std::size_t i = lo; i < hi; ++i) {
            if (data_.feature(rows[i], best.feature) <= best.threshold) {
                left.push_back(rows[i]);
            } else {
                right.push_back(rows[i]);
            }
        }
        std::copy(left.begin(), left.end(), rows.begin() + lo);
        std::copy(right.begin(), right.end(), rows.begin() + lo + left.size());

        int node = static_cast<int>(nodes_.size());
        nodes_.push_back({best.feature, best.threshold, -1, -1, mean});
        int l = grow(rows, lo, lo + left.size());
        int r = grow(rows, lo + left.size(), hi);
        nodes_[node].left = l;
        nodes_[node].right = r;
        return node;
    }

    int make_leaf(double mean) {
        nodes_.push_back({-1, 0.0, -1, -1, mean});
        return static_cast<int>(nodes_.size() - 1);
    }

    SplitChoice best_split(const std::vector<std::size_t>& rows, std::size_t lo,
                           std::size_t hi, double label_sum) {
        const std::size_t count = hi - lo;
        const bool gini = config_.kind == ForestKind::Classifier;
        const auto nodesize = static_cast<std::size_t>(config_.nodesize);

        // mtry features without replacement
        candidates_.resize(data_.n_features);
        std::iota(candidates_.begin(), candidates_.end(), 0);
        for (int t = 0; t < config_.mtry; ++t) {
            std::size_t pick = t + rng_.below(candidates_.size() - t);
            std::swap(candidates_[t], candidates_[pick]);
        }

        SplitChoice best;
        for (int t = 0; t < config_.mtry; ++t) {
            const int f = static_cast<int>(candidates_[t]);
            pairs_.clear();
            for (std::size_t i = lo; i < hi; ++i) {
                pairs_.emplace_back(data_.feature(rows[i], f), data_.labels[rows[i]]);
            }
            std::sort(pairs_.begin(), pairs_.end());

            double prefix = 0.0;
            for (std::size_t i = 1; i < count; ++i) {
                prefix += pairs_[i - 1].second;
                if (pairs_[i].first == pairs_[i - 1].first) continue;
                if (i < nodesize || count - i < nodesize) continue;
                double cost = child_cost(prefix, static_cast<double>(i), label_sum,
                                         static_cast<double>(count), gini);
                if (!best.found || cost < best.child_cost) {
                    best.found = true;
                    best.feature = f;
                    best.threshold = 0.5 * (pairs_[i - 1].first + pairs_[i].first);
                    best.child_cost = cost;
                }
            }
        }
        return best;
    }

    const TabularDataset& data_;
    const ForestConfig& config_;
    Rng& rng_;
    std::vector<TreeNode> nodes_;
    std::vector<std::size_t> candidates_;
    std::vector<std::pair<double, int>> pairs_;
    bool degenerate_root_ = false;
};

double tree_vote(const Tree& tree, std::span<const double> x, ForestKind kind) {
    double leaf = tree.leaf_value(x);
    if (kind == ForestKind::Classifier) return leaf >= 0.5 ? 1.0 : 0.0;
    return leaf;
}

}  // namespace

std::string to_string(ForestKind kind) {
    return kind == ForestKind::Classifier ? "classifier" : "regressor";
}

void ForestConfig::validate(std::size_t n_features) const {
    if (ntree < 1) throw std::invalid_argument("forest: ntree must be >= 1");
    if (nodesize < 1) throw std::invalid_argument("forest: nodesize must be >= 1");
    if (mtry < 1 || static_cast<std::size_t>(mtry) > n_features) {
        throw std::invalid_argument("forest: mtry must be in [1, n_features]");
    }
}

double Tree::leaf_value(std::span<const double> x) const {
    const TreeNode* node = &nodes[0];
    while (!node->is_leaf()) {
        node = x[node->feature] <= node->threshold ? &nodes[node->left]
                                                   : &nodes[node->right];
    }
    return node->value;
}

Forest train(const TabularDataset& dataset, const ForestConfig& config) {
    config.validate(dataset.n_features);
    if (dataset.n_rows < 2 * static_cast<std::size_t>(config.nodesize)) {
        throw std::invalid_argument("forest: need at least 2*nodesize rows");
    }
    for (int d : dataset.labels) {
        if (d != 0 && d != 1) throw std::invalid_argument("forest: non-binary label");
    }

    Forest forest;
    forest.config = config;
    forest.n_features = dataset.n_features;
    forest.n_train_rows = dataset.n_rows;
    forest.trees.resize(config.ntree);

    std::vector<std::uint8_t> degenerate(config.ntree, 0);
    parallel_for(static_cast<std::size_t>(config.ntree), [&](std::size_t m) {
        Rng rng(replication_seed(config.seed, m));
        TreeBuilder builder(dataset, config, rng);
        forest.trees[m] = builder.build();
        degenerate[m] = builder.degenerate_root() ? 1 : 0;
    });
    for (auto flag : degenerate) forest.degenerate_trees += flag;
    return forest;
}

double predict_score(const Forest& forest, std::span<const double> x) {
    double sum = 0.0;
    for (const auto& tree : forest.trees) {
        sum += tree_vote(tree, x, forest.config.kind);
    }
    return sum / static_cast<double>(forest.trees.size());
}

std::vector<double> predict_scores(const Forest& forest, const TabularDataset& dataset) {
    if (dataset.n_features != forest.n_features) {
        throw std::invalid_argument("predict: feature count mismatch");
    }
    std::vector<double> out(dataset.n_rows);
    parallel_for(dataset.n_rows, [&](std::size_t r) {
        out[r] = predict_score(forest, dataset.row(r));
    });
    return out;
}

OobCriterion oob_criterion(const Forest& forest, const TabularDataset& dataset) {
    if (dataset.n_rows != forest.n_train_rows) {
        throw std::invalid_argument("oob: dataset is not the training table");
    }
    OobCriterion result;
    double error_sum = 0.0;
    for (std::size_t r = 0; r < dataset.n_rows; ++r) {
        double sum = 0.0;
        std::size_t used = 0;
        for (const auto& tree : forest.trees) {
            if (tree.in_bag[r]) continue;
            sum += tree_vote(tree, dataset.row(r), forest.config.kind);
            ++used;
        }
        if (used == 0) {
            ++result.skipped;
            continue;
        }
        double pred = sum / static_cast<double>(used);
        ++result.evaluated;
        if (forest.config.kind == ForestKind::Classifier) {
            int cls = pred >= 0.5 ? 1 : 0;
            error_sum += cls != dataset.labels[r] ? 1.0 : 0.0;
        } else {
            double diff = pred - static_cast<double>(dataset.labels[r]);
            error_sum += diff * diff;
        }
    }
    if (result.evaluated == 0) {
        throw std::runtime_error("oob: no row was ever out-of-bag; grow more trees");
    }
    result.value = error_sum / static_cast<double>(result.evaluated);
    return result;
}

GridResult grid_search(const TabularDataset& dataset,
                       const std::vector<ForestConfig>& grid) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    GridResult result;
    result.entries.reserve(grid.size());
    for (const auto& config : grid) {
        Forest forest = train(dataset, config);
        result.entries.push_back({config, oob_criterion(forest, dataset).value});
    }
    auto key = [](const GridResult::Entry& e) {
        return std::make_tuple(e.criterion, e.config.ntree, e.config.mtry,
                               e.config.nodesize);
    };
    for (std::size_t i = 1; i < result.entries.size(); ++i) {
        if (key(result.entries[i]) < key(result.entries[result.best_index])) {
            result.best_index = i;
        }
    }
    return result;
}

}  // namespace calibr
