#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "calibr/locreg.hpp"

namespace calibr {

// Scores with outcomes; true_p is only populated for synthetic data. All
// fields are validated once in `validated`, after which scores are in [0,1],
// labels in {0,1} and true_p (when present) in (0,1).
struct LabeledScores {
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<double> true_p;  // empty when unknown

    static LabeledScores validated(std::vector<double> scores, std::vector<int> labels,
                                   std::vector<double> true_p = {});

    std::size_t size() const { return scores.size(); }
    bool has_true_p() const { return !true_p.empty(); }
    LabeledScores subset(std::span<const std::size_t> rows) const;
    LabeledScores with_scores(std::vector<double> new_scores) const;
};

// Quantile-binned reliability curve. Bins with tied score values are merged,
// so bins.size() may be smaller than the requested count.
struct BinnedCurve {
    struct Bin {
        double mean_score;    // conf(b)
        double mean_outcome;  // observed event frequency
        double accuracy;      // share of correct class predictions at tau
        std::size_t count;
    };
    std::vector<Bin> bins;
    std::size_t requested_bins = 0;
    double tau = 0.5;
};

struct ClassificationReport {
    double tau;
    std::size_t tp, fp, tn, fn;
    double accuracy;
    double sensitivity;  // NaN when no positives
    double specificity;  // NaN when no negatives
};

struct Band {
    std::vector<double> lo, hi;
};

double brier(const LabeledScores& data);

// Mean squared error of candidate scores against the known generating
// probabilities.
double true_mse(const LabeledScores& data, std::span<const double> candidate);

BinnedCurve quantile_calibration_curve(const LabeledScores& data, std::size_t bins,
                                       double tau = 0.5);

double ece(const LabeledScores& data, std::size_t bins = 10, double tau = 0.5);

// Density-weighted squared gap between a curve and the bisector.
double bisector_gap(std::span<const double> eval_points,
                    std::span<const double> eval_values,
                    std::span<const double> weights);

// Share of observed scores whose nearest grid point is each eval point.
std::vector<double> nearest_grid_weights(std::span<const double> scores,
                                         std::span<const double> eval_points);

// Local Calibration Score: degree-0 smoothed curve vs the bisector, weighted
// by the score density on the evaluation grid.
double lcs(const LabeledScores& data, const LocRegConfig& config = {});

ClassificationReport classification_report(const LabeledScores& data, double tau);

// Rank-sum AUC with midrank tie handling; equals pairwise counting exactly.
double auc(const LabeledScores& data);

// Percentile bootstrap band around a per-grid-point estimator.
using CurveEstimator = std::function<std::vector<double>(const LabeledScores&)>;
Band bootstrap_band(const LabeledScores& data, const CurveEstimator& estimator,
                    int n_boot, double level, std::uint64_t seed);

// Type-7 (linear interpolation) sample quantile; copies and sorts.
double quantile(std::vector<double> values, double p);

}  // namespace calibr
