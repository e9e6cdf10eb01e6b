#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "calibr/data.hpp"

namespace calibr {

enum class ForestKind { Classifier, Regressor };

std::string to_string(ForestKind kind);

struct ForestConfig {
    ForestKind kind = ForestKind::Regressor;
    int ntree = 100;
    int mtry = 1;
    int nodesize = 5;  // minimum terminal-node size
    std::uint64_t seed = 0;

    void validate(std::size_t n_features) const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf: mean of training labels

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;     // nodes[0] is the root
    std::vector<std::uint8_t> in_bag;  // per training row

    double leaf_value(std::span<const double> x) const;
};

struct Forest {
    ForestConfig config;
    std::size_t n_features = 0;
    std::size_t n_train_rows = 0;
    int degenerate_trees = 0;  // trees with no valid split at the root
    std::vector<Tree> trees;
};

// Bagged CART. Splits minimize Gini impurity (classifier) or child variance
// (regressor) over midpoints of sorted distinct values of mtry sampled
// features; both children must keep at least nodesize rows. Tree m draws from
// seed + m, so training is order-independent across trees.
Forest train(const TabularDataset& dataset, const ForestConfig& config);

// Classifier: mean of per-tree majority votes (leaf mean >= 0.5 votes 1).
// Regressor: mean of per-tree leaf means.
double predict_score(const Forest& forest, std::span<const double> x);

std::vector<double> predict_scores(const Forest& forest, const TabularDataset& dataset);

struct OobCriterion {
    double value = 0.0;        // error rate at tau = 0.5, or MSE
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // rows in-bag for every tree
};

OobCriterion oob_criterion(const Forest& forest, const TabularDataset& dataset);

struct GridResult {
    struct Entry {
        ForestConfig config;
        double criterion;
    };
    std::vector<Entry> entries;  // input order
    std::size_t best_index = 0;
};

// Argmin of the OOB criterion; ties go to the smallest
// (ntree, mtry, nodesize) lexicographically.
GridResult grid_search(const TabularDataset& dataset,
                       const std::vector<ForestConfig>& grid);

}  // namespace calibr
