#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "calibr/dgp.hpp"
#include "calibr/metrics.hpp"
#include "test_util.hpp"

using namespace calibr;

namespace {

// O(n^2) pair-counting oracle with half credit for ties.
double auc_pairs_oracle(const LabeledScores& data) {
    double wins = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] != 1) continue;
        ++n_pos;
        for (std::size_t j = 0; j < data.size(); ++j) {
            if (data.labels[j] != 0) continue;
            if (data.scores[i] > data.scores[j]) wins += 1.0;
            else if (data.scores[i] == data.scores[j]) wins += 0.5;
        }
    }
    for (int d : data.labels) n_neg += d == 0 ? 1 : 0;
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

TEST_CASE("brier trivials") {
    auto perfect = LabeledScores::validated({1.0, 0.0, 1.0}, {1, 0, 1});
    CHECK(brier(perfect) == 0.0);
    auto half = LabeledScores::validated({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
    CHECK(brier(half) == 0.25);
    CHECK_THROWS_AS(brier(LabeledScores{}), std::invalid_argument);
}

TEST_CASE("true_mse trivials and oracle") {
    auto data = LabeledScores::validated({0.3, 0.5, 0.7}, {0, 1, 1}, {0.3, 0.5, 0.7});
    CHECK(true_mse(data, data.true_p) == 0.0);

    std::vector<double> shifted = {0.4, 0.6, 0.8};
    CHECK(true_mse(data, shifted) == doctest::Approx(0.01).epsilon(1e-14));

    // alpha = 3 distortion against a long-double recomputation
    DgpConfig config;
    config.n = 2000;
    config.seed = 99;
    auto samples = generate(config);
    auto p_u = distort(samples, {DistortionKind::Alpha, 3.0});
    auto labeled = LabeledScores::validated(p_u, outcomes(samples),
                                            true_probabilities(samples));
    long double acc = 0.0L;
    for (const auto& s : samples) {
        long double d = static_cast<long double>(s.p_true) -
                        static_cast<long double>(std::pow(s.p_true, 3.0));
        acc += d * d;
    }
    double oracle = static_cast<double>(acc / static_cast<long double>(config.n));
    CHECK(true_mse(labeled, p_u) == doctest::Approx(oracle).epsilon(1e-12));

    LabeledScores no_truth = LabeledScores::validated({0.5}, {1});
    CHECK_THROWS_AS(true_mse(no_truth, std::vector<double>{0.5}), std::invalid_argument);
}

TEST_CASE("ece pathologies and hand-enumerated fixture") {
    auto confident = LabeledScores::validated(std::vector<double>(5, 1.0),
                                              std::vector<int>(5, 1));
    CHECK(ece(confident, 1, 0.5) == 0.0);

    // every prediction is correct but confidence is 0: ECE saturates at 1
    auto zeros = LabeledScores::validated(std::vector<double>(5, 0.0),
                                          std::vector<int>(5, 0));
    CHECK(ece(zeros, 1, 0.5) == 1.0);

    // two quantile bins of four rows each:
    //  low bin: conf 0.25, predictions 0, labels (0,1,0,0) -> acc 0.75, gap 0.5
    //  high bin: conf 0.75, predictions 1, labels (1,0,1,1) -> acc 0.75, gap 0
    auto fixture = LabeledScores::validated({0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9},
                                            {0, 1, 0, 0, 1, 0, 1, 1});
    CHECK(ece(fixture, 2, 0.5) == doctest::Approx(0.25).epsilon(1e-15));

    CHECK_THROWS_AS(ece(zeros, 6, 0.5), std::invalid_argument);  // more bins than rows
}

TEST_CASE("quantile calibration curve") {
    std::vector<double> scores(10, 0.3);
    std::vector<int> labels = {1, 0, 0, 1, 0, 0, 0, 1, 0, 0};
    auto curve = quantile_calibration_curve(LabeledScores::validated(scores, labels), 1);
    REQUIRE(curve.bins.size() == 1);
    CHECK(curve.bins[0].mean_score == doctest::Approx(0.3));
    CHECK(curve.bins[0].mean_outcome == doctest::Approx(0.3));
    CHECK(curve.bins[0].count == 10);

    auto separated = LabeledScores::validated({0.01, 0.02, 0.98, 0.99}, {0, 0, 1, 1});
    auto curve2 = quantile_calibration_curve(separated, 2);
    REQUIRE(curve2.bins.size() == 2);
    CHECK(curve2.bins.front().mean_outcome == 0.0);
    CHECK(curve2.bins.back().mean_outcome == 1.0);

    // B = n with distinct scores: every bin is a raw (score, label) point
    auto fine = LabeledScores::validated({0.1, 0.4, 0.6, 0.9}, {0, 1, 0, 1});
    auto curve3 = quantile_calibration_curve(fine, 4);
    REQUIRE(curve3.bins.size() == 4);
    for (std::size_t b = 0; b < 4; ++b) {
        CHECK(curve3.bins[b].count == 1);
    }
    CHECK(curve3.bins[0].mean_score == 0.1);
    CHECK(curve3.bins[3].mean_outcome == 1.0);

    // massed scores merge bins
    auto massed = LabeledScores::validated({0.5, 0.5, 0.5, 0.5, 0.9, 0.95},
                                           {0, 1, 0, 1, 1, 1});
    auto curve4 = quantile_calibration_curve(massed, 3);
    CHECK(curve4.bins.size() < 3);
    std::size_t total = 0;
    for (const auto& b : curve4.bins) total += b.count;
    CHECK(total == 6);
}

TEST_CASE("lcs trivials") {
    // identical scores collapse the grid to one point sitting on the bisector
    std::vector<double> s(10, 0.5);
    std::vector<int> d = {1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    CHECK(lcs(LabeledScores::validated(s, d)) == 0.0);

    // scores at the two ends, curve exact there, zero density elsewhere
    std::vector<double> s2;
    std::vector<int> d2;
    for (int i = 0; i < 5; ++i) {
        s2.push_back(0.0);
        d2.push_back(0);
        s2.push_back(1.0);
        d2.push_back(1);
    }
    LocRegConfig half;
    half.neighbor_fraction = 0.5;
    CHECK(lcs(LabeledScores::validated(s2, d2), half) == 0.0);

    CHECK_THROWS_AS(lcs(LabeledScores::validated({0.5}, {1})), std::invalid_argument);
}

TEST_CASE("bisector gap is the analytic weighted sum") {
    std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> values;
    for (double g : grid) values.push_back(g + 0.1);
    std::vector<double> weights(grid.size(), 0.2);
    CHECK(bisector_gap(grid, values, weights) == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("lcs weights form a distribution over the grid") {
    Rng rng(31);
    auto data = testutil::random_scores(500, rng);
    LocalFit curve = smoothed_calibration_curve(data.scores, data.labels, {});
    auto w = nearest_grid_weights(data.scores, curve.eval_points);
    double sum = 0.0;
    for (double v : w) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    double score = lcs(data);
    CHECK(score >= 0.0);
    CHECK(score <= 1.0);
}

TEST_CASE("classification report") {
    auto exact = LabeledScores::validated({1.0, 0.0, 1.0, 0.0}, {1, 0, 1, 0});
    auto rep = classification_report(exact, 0.5);
    CHECK(rep.accuracy == 1.0);
    CHECK(rep.sensitivity == 1.0);
    CHECK(rep.specificity == 1.0);

    auto all_pos = LabeledScores::validated({0.9, 0.8, 0.7}, {1, 1, 1});
    auto rep2 = classification_report(all_pos, 0.5);
    CHECK(rep2.sensitivity == 1.0);
    CHECK(std::isnan(rep2.specificity));

    // six-point fixture, confusion matrix enumerated by hand:
    // predictions (1,1,0,0,1,0) vs labels (1,0,1,0,1,0)
    auto six = LabeledScores::validated({0.9, 0.8, 0.4, 0.3, 0.7, 0.1}, {1, 0, 1, 0, 1, 0});
    auto rep3 = classification_report(six, 0.5);
    CHECK(rep3.tp == 2);
    CHECK(rep3.fp == 1);
    CHECK(rep3.fn == 1);
    CHECK(rep3.tn == 2);
    CHECK(rep3.accuracy == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
    CHECK(rep3.sensitivity == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(rep3.specificity == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(classification_report(six, 1.5), std::invalid_argument);
}

TEST_CASE("auc basics") {
    auto perfect = LabeledScores::validated({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1});
    CHECK(auc(perfect) == 1.0);

    auto ties = LabeledScores::validated(std::vector<double>(6, 0.4), {0, 1, 0, 1, 0, 1});
    CHECK(auc(ties) == 0.5);

    auto ten = LabeledScores::validated(
        {0.1, 0.9, 0.3, 0.3, 0.5, 0.8, 0.2, 0.5, 0.7, 0.4},
        {0, 1, 0, 1, 1, 1, 0, 0, 1, 0});
    CHECK(auc(ten) == auc_pairs_oracle(ten));

    CHECK_THROWS_AS(auc(LabeledScores::validated({0.5, 0.6}, {1, 1})),
                    std::invalid_argument);
}

TEST_CASE("auc equals the pair-counting oracle on random fixtures with ties") {
    Rng rng(77);
    int checked = 0;
    for (int rep = 0; rep < 100; ++rep) {
        auto data = testutil::random_scores(5 + rng.below(60), rng, /*discrete=*/true);
        bool has_pos = std::count(data.labels.begin(), data.labels.end(), 1) > 0;
        bool has_neg = std::count(data.labels.begin(), data.labels.end(), 0) > 0;
        if (!has_pos || !has_neg) continue;
        CHECK(auc(data) == auc_pairs_oracle(data));
        ++checked;
    }
    CHECK(checked > 80);
}

TEST_CASE("auc is bit-invariant under strictly monotone transforms") {
    DgpConfig config;
    config.n = 1000;
    config.seed = 13;
    auto samples = generate(config);
    auto labels = outcomes(samples);
    auto base = LabeledScores::validated(true_probabilities(samples), labels);
    double reference = auc(base);
    for (DistortionSpec spec : {DistortionSpec{DistortionKind::Alpha, 3.0},
                                DistortionSpec{DistortionKind::Alpha, 1.0 / 3.0},
                                DistortionSpec{DistortionKind::Gamma, 3.0},
                                DistortionSpec{DistortionKind::Gamma, 1.0 / 3.0}}) {
        auto data = LabeledScores::validated(distort(samples, spec), labels);
        CHECK(auc(data) == reference);
    }
}

TEST_CASE("bootstrap band") {
    // constant data: every resample gives the same curve
    auto constant = LabeledScores::validated(std::vector<double>(20, 0.4),
                                             std::vector<int>(20, 0));
    auto flat = [](const LabeledScores& d) {
        double mean = 0.0;
        for (int v : d.labels) mean += v;
        mean /= static_cast<double>(d.size());
        return std::vector<double>{mean, mean};
    };
    Band band = bootstrap_band(constant, flat, 50, 0.95, 4);
    CHECK(band.lo == band.hi);
    CHECK(band.lo[0] == 0.0);

    CHECK_THROWS_AS(bootstrap_band(constant, flat, 1, 0.95, 4), std::invalid_argument);
    CHECK_THROWS_AS(bootstrap_band(constant, flat, 10, 1.5, 4), std::invalid_argument);

    // the 95% band should cover the point estimate at nearly all grid points
    DgpConfig config;
    config.n = 600;
    config.seed = 55;
    auto samples = generate(config);
    auto data = LabeledScores::validated(true_probabilities(samples), outcomes(samples));
    LocalFit reference = smoothed_calibration_curve(data.scores, data.labels, {});
    std::vector<double> grid = reference.eval_points;
    auto estimator = [&grid](const LabeledScores& d) {
        LocalFit f = smoothed_calibration_curve(d.scores, d.labels, {});
        return predict(f, grid);
    };
    Band b = bootstrap_band(data, estimator, 200, 0.95, 77);
    std::size_t covered = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (reference.eval_values[g] >= b.lo[g] && reference.eval_values[g] <= b.hi[g]) {
            ++covered;
        }
    }
    CHECK(static_cast<double>(covered) >= 0.9 * static_cast<double>(grid.size()));
}

TEST_CASE("metrics are permutation invariant") {
    Rng rng(41);
    auto data = testutil::random_scores(200, rng);
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    auto shuffled = data.subset(perm);

    CHECK(brier(data) == doctest::Approx(brier(shuffled)).epsilon(1e-14));
    CHECK(ece(data, 10, 0.5) == doctest::Approx(ece(shuffled, 10, 0.5)).epsilon(1e-14));
    CHECK(auc(data) == doctest::Approx(auc(shuffled)).epsilon(1e-14));
    CHECK(lcs(data) == doctest::Approx(lcs(shuffled)).epsilon(1e-12));
}

TEST_CASE("validation rejects malformed rows") {
    CHECK_THROWS_AS(LabeledScores::validated({1.2}, {1}), std::invalid_argument);
    CHECK_THROWS_AS(LabeledScores::validated({0.5}, {2}), std::invalid_argument);
    CHECK_THROWS_AS(LabeledScores::validated({0.5}, {1}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(LabeledScores::validated({0.5, 0.6}, {1}), std::invalid_argument);
}
