#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "calibr/forest.hpp"
#include "calibr/harness.hpp"
#include "calibr/rng.hpp"

using namespace calibr;

namespace {

TabularDataset make_dataset(const std::vector<std::vector<double>>& rows,
                            const std::vector<int>& labels) {
    TabularDataset ds;
    ds.n_rows = rows.size();
    ds.n_features = rows.empty() ? 0 : rows[0].size();
    for (std::size_t c = 0; c < ds.n_features; ++c) {
        ds.feature_names.push_back("f" + std::to_string(c));
    }
    for (const auto& r : rows) {
        ds.features.insert(ds.features.end(), r.begin(), r.end());
    }
    ds.labels = labels;
    return ds;
}

TabularDataset learnable_dataset(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        double x0 = rng.uniform01();
        double x1 = rng.uniform01();
        rows.push_back({x0, x1});
        labels.push_back(x0 > 0.5 ? 1 : 0);
    }
    return make_dataset(rows, labels);
}

// Single-node tree with a fixed leaf value.
Tree leaf_tree(double value, std::size_t n_rows) {
    Tree t;
    t.nodes.push_back({-1, 0.0, -1, -1, value});
    t.in_bag.assign(n_rows, 1);
    return t;
}

// Exhaustive CART oracle: all features, all midpoints, same stopping rule.
struct OracleNode {
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0;
    int left = -1, right = -1;
};

struct Oracle {
    const TabularDataset& data;
    int nodesize;
    bool gini;
    std::vector<OracleNode> nodes;

    int grow(std::vector<std::size_t> rows) {
        double sum = 0.0;
        for (auto r : rows) sum += data.labels[r];
        double mean = sum / static_cast<double>(rows.size());
        bool pure = sum == 0.0 || sum == static_cast<double>(rows.size());
        if (pure || rows.size() < 2 * static_cast<std::size_t>(nodesize)) {
            nodes.push_back({-1, 0.0, mean, -1, -1});
            return static_cast<int>(nodes.size() - 1);
        }
        int best_f = -1;
        double best_t = 0.0, best_cost = 0.0;
        bool found = false;
        for (std::size_t f = 0; f < data.n_features; ++f) {
            std::vector<std::pair<double, int>> vals;
            for (auto r : rows) vals.emplace_back(data.feature(r, f), data.labels[r]);
            std::sort(vals.begin(), vals.end());
            double prefix = 0.0;
            for (std::size_t i = 1; i < vals.size(); ++i) {
                prefix += vals[i - 1].second;
                if (vals[i].first == vals[i - 1].first) continue;
                if (i < static_cast<std::size_t>(nodesize) ||
                    vals.size() - i < static_cast<std::size_t>(nodesize)) {
                    continue;
                }
                double nl = static_cast<double>(i);
                double nr = static_cast<double>(vals.size() - i);
                double sl = prefix, sr = sum - prefix;
                double cost = (sl - sl * sl / nl) + (sr - sr * sr / nr);
                if (gini) cost *= 2.0;
                if (!found || cost < best_cost) {
                    found = true;
                    best_f = static_cast<int>(f);
                    best_t = 0.5 * (vals[i - 1].first + vals[i].first);
                    best_cost = cost;
                }
            }
        }
        if (!found) {
            nodes.push_back({-1, 0.0, mean, -1, -1});
            return static_cast<int>(nodes.size() - 1);
        }
        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (data.feature(r, best_f) <= best_t ? left : right).push_back(r);
        }
        int id = static_cast<int>(nodes.size());
        nodes.push_back({best_f, best_t, mean, -1, -1});
        int l = grow(left);
        int r = grow(right);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }
};

}  // namespace

TEST_CASE("all-zero labels give constant-zero forests") {
    Rng rng(1);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 30; ++i) rows.push_back({rng.uniform01(), rng.uniform01()});
    auto ds = make_dataset(rows, std::vector<int>(30, 0));

    ForestConfig config{ForestKind::Classifier, 10, 2, 5, 3};
    Forest forest = train(ds, config);
    for (const auto& t : forest.trees) {
        REQUIRE(t.nodes.size() == 1);
        CHECK(t.nodes[0].value == 0.0);
    }
    CHECK(predict_score(forest, rows[0]) == 0.0);
    CHECK(oob_criterion(forest, ds).value == 0.0);
}

TEST_CASE("single tree with nodesize 1 memorizes in-bag rows") {
    auto ds = learnable_dataset(40, 9);
    for (ForestKind kind : {ForestKind::Classifier, ForestKind::Regressor}) {
        ForestConfig config{kind, 1, 2, 1, 77};
        Forest forest = train(ds, config);
        const Tree& tree = forest.trees[0];
        for (std::size_t r = 0; r < ds.n_rows; ++r) {
            if (!tree.in_bag[r]) continue;
            CHECK(predict_score(forest, ds.row(r)) == static_cast<double>(ds.labels[r]));
        }
    }
}

TEST_CASE("tree structure matches the exhaustive-split oracle") {
    Rng rng(4242);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) {
        double x0 = rng.uniform01(), x1 = rng.uniform01();
        rows.push_back({x0, x1});
        labels.push_back(rng.bernoulli(sigmoid(6.0 * (x0 - 0.5))) ? 1 : 0);
    }
    auto ds = make_dataset(rows, labels);

    ForestConfig config{ForestKind::Classifier, 1, 2, 2, 11};
    Forest forest = train(ds, config);
    const Tree& tree = forest.trees[0];

    // replay the documented bootstrap derivation for tree 0
    Rng replay(replication_seed(config.seed, 0));
    std::vector<std::size_t> sample;
    for (std::size_t i = 0; i < ds.n_rows; ++i) sample.push_back(replay.below(ds.n_rows));

    Oracle oracle{ds, config.nodesize, true, {}};
    oracle.grow(sample);

    REQUIRE(tree.nodes.size() == oracle.nodes.size());
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        CHECK(tree.nodes[i].feature == oracle.nodes[i].feature);
        if (tree.nodes[i].feature >= 0) {
            CHECK(tree.nodes[i].threshold == oracle.nodes[i].threshold);
            CHECK(tree.nodes[i].left == oracle.nodes[i].left);
            CHECK(tree.nodes[i].right == oracle.nodes[i].right);
        } else {
            CHECK(tree.nodes[i].value == oracle.nodes[i].value);
        }
    }
}

TEST_CASE("score aggregation semantics") {
    Forest votes;
    votes.config.kind = ForestKind::Classifier;
    votes.n_features = 1;
    votes.trees = {leaf_tree(0.9, 1), leaf_tree(0.8, 1), leaf_tree(0.6, 1)};
    std::vector<double> x = {0.0};
    CHECK(predict_score(votes, x) == 1.0);  // every tree votes 1

    Forest reg;
    reg.config.kind = ForestKind::Regressor;
    reg.n_features = 1;
    reg.trees = {leaf_tree(0.2, 1), leaf_tree(0.6, 1)};
    CHECK(predict_score(reg, x) == doctest::Approx(0.4).epsilon(1e-15));

    // a leaf with label mean 0.4: the classifier votes 0, the regressor keeps 0.4
    Forest cls;
    cls.config.kind = ForestKind::Classifier;
    cls.n_features = 1;
    cls.trees = {leaf_tree(0.4, 1)};
    CHECK(predict_score(cls, x) == 0.0);
    Forest reg1;
    reg1.config.kind = ForestKind::Regressor;
    reg1.n_features = 1;
    reg1.trees = {leaf_tree(0.4, 1)};
    CHECK(predict_score(reg1, x) == 0.4);

    // exact tie votes positive
    Forest tie;
    tie.config.kind = ForestKind::Classifier;
    tie.n_features = 1;
    tie.trees = {leaf_tree(0.5, 1)};
    CHECK(predict_score(tie, x) == 1.0);
}

TEST_CASE("oob criterion uses only out-of-bag trees") {
    auto ds = learnable_dataset(60, 15);
    ForestConfig config{ForestKind::Regressor, 1, 2, 5, 21};
    Forest forest = train(ds, config);
    const Tree& tree = forest.trees[0];

    double sse = 0.0;
    std::size_t used = 0;
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        if (tree.in_bag[r]) continue;
        double diff = tree.leaf_value(ds.row(r)) - static_cast<double>(ds.labels[r]);
        sse += diff * diff;
        ++used;
    }
    REQUIRE(used > 0);
    OobCriterion oob = oob_criterion(forest, ds);
    CHECK(oob.evaluated == used);
    CHECK(oob.skipped == ds.n_rows - used);
    CHECK(oob.value == doctest::Approx(sse / static_cast<double>(used)).epsilon(1e-15));
}

TEST_CASE("learnable data drives the oob criterion near zero") {
    auto ds = learnable_dataset(300, 33);
    ForestConfig config{ForestKind::Classifier, 60, 2, 5, 5};
    Forest forest = train(ds, config);
    CHECK(oob_criterion(forest, ds).value < 0.1);
}

TEST_CASE("oob fails when no row is ever out of bag") {
    auto ds = make_dataset({{0.5, 0.1}, {0.5, 0.9}}, {0, 0});
    ForestConfig config{ForestKind::Regressor, 1, 1, 1, 2};
    Forest forest = train(ds, config);
    bool all_in_bag = std::all_of(forest.trees[0].in_bag.begin(),
                                  forest.trees[0].in_bag.end(),
                                  [](std::uint8_t b) { return b == 1; });
    if (all_in_bag) {
        CHECK_THROWS_AS(oob_criterion(forest, ds), std::runtime_error);
    } else {
        CHECK_NOTHROW(oob_criterion(forest, ds));
    }
}

TEST_CASE("degenerate dataset yields single-leaf trees") {
    // constant features: no split can separate anything
    std::vector<std::vector<double>> rows(12, std::vector<double>{1.0, 1.0});
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) labels.push_back(i % 2);
    auto ds = make_dataset(rows, labels);
    ForestConfig config{ForestKind::Classifier, 5, 2, 2, 7};
    Forest forest = train(ds, config);
    CHECK(forest.degenerate_trees == 5);
    for (const auto& t : forest.trees) CHECK(t.nodes.size() == 1);
}

TEST_CASE("grid search picks the argmin with lexicographic tie-break") {
    // all-zero labels: every config scores 0, ties resolve to the smallest
    Rng rng(2);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 40; ++i) rows.push_back({rng.uniform01(), rng.uniform01()});
    auto ds = make_dataset(rows, std::vector<int>(40, 0));

    std::vector<ForestConfig> grid = {
        {ForestKind::Regressor, 20, 2, 5, 1},
        {ForestKind::Regressor, 10, 2, 5, 1},
        {ForestKind::Regressor, 10, 1, 5, 1},
    };
    GridResult result = grid_search(ds, grid);
    REQUIRE(result.entries.size() == 3);
    CHECK(result.entries[result.best_index].config.ntree == 10);
    CHECK(result.entries[result.best_index].config.mtry == 1);

    GridResult single = grid_search(ds, {grid[0]});
    CHECK(single.best_index == 0);

    CHECK_THROWS_AS(grid_search(ds, {}), std::invalid_argument);
}

TEST_CASE("training and prediction are deterministic") {
    auto ds = learnable_dataset(120, 300);
    ForestConfig config{ForestKind::Regressor, 30, 2, 5, 1234};
    Forest a = train(ds, config);
    Forest b = train(ds, config);
    auto pa = predict_scores(a, ds);
    auto pb = predict_scores(b, ds);
    CHECK(pa == pb);
    for (double v : pa) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    GridResult g1 = grid_search(ds, {config, {ForestKind::Regressor, 10, 1, 15, 1234}});
    GridResult g2 = grid_search(ds, {config, {ForestKind::Regressor, 10, 1, 15, 1234}});
    CHECK(g1.best_index == g2.best_index);
    for (std::size_t i = 0; i < g1.entries.size(); ++i) {
        CHECK(g1.entries[i].criterion == g2.entries[i].criterion);
    }
}

TEST_CASE("config validation") {
    auto ds = learnable_dataset(20, 8);
    CHECK_THROWS_AS(train(ds, {ForestKind::Classifier, 0, 2, 5, 1}), std::invalid_argument);
    CHECK_THROWS_AS(train(ds, {ForestKind::Classifier, 5, 3, 5, 1}), std::invalid_argument);
    CHECK_THROWS_AS(train(ds, {ForestKind::Classifier, 5, 2, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(train(ds, {ForestKind::Classifier, 5, 2, 11, 1}), std::invalid_argument);
}
