#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calibr/dgp.hpp"
#include "calibr/forest.hpp"
#include "calibr/locreg.hpp"
#include "calibr/metrics.hpp"

namespace calibr {

struct Scenario {
    DistortionSpec spec;
    std::string label;  // e.g. "alpha=1/3"
};

// alpha and gamma each over {1/3, 1, 3}.
std::vector<Scenario> default_scenarios();

struct StudyRow {
    int replication;
    std::string scenario;
    std::string method;
    std::string split;  // full | calibration | test
    std::string metric;
    double value;
};

struct StudyTable {
    std::vector<StudyRow> rows;

    std::string to_csv() const;
    void append(StudyTable other);
};

struct MetricSettings {
    LocRegConfig curve;
    std::size_t ece_bins = 10;
    double tau = 0.5;
};

// Throws on unknown names or unsatisfiable preconditions; the study runners
// record those failures as NaN rows instead of aborting.
double compute_metric(const std::string& name, const LabeledScores& data,
                      const MetricSettings& settings);

extern const std::vector<std::string> kRecalibrationMethods;  // the six maps
extern const std::vector<std::string> kDefaultMetrics;

struct StudyConfig {
    DgpConfig dgp;  // per-replication seed is derived from base_seed
    int replications = 50;
    std::vector<Scenario> scenarios = default_scenarios();
    std::vector<std::string> methods = kRecalibrationMethods;
    std::vector<std::string> metrics = kDefaultMetrics;
    std::uint64_t base_seed = 0;
    double calibration_fraction = 0.5;
    MetricSettings settings;
    int threads = 0;
};

// Metrics of the distorted and of the true scores on each replicated sample
// (split = "full", methods "uncalibrated" and "true_prob").
StudyTable run_distortion_study(const StudyConfig& config);

// Fit each recalibrator on the calibration half, evaluate everything on both
// halves. Rows hold raw metric values; use recalibration_deltas for the
// method-minus-uncalibrated view.
StudyTable run_recalibration_study(const StudyConfig& config);

StudyTable recalibration_deltas(const StudyTable& table);

// Mean smoothed calibration curve across the replications of one scenario,
// with a percentile envelope, on a fixed grid over [0, 1]. Uses the same
// per-cell seeds as run_distortion_study, so the band matches the table rows.
struct CurveBand {
    std::vector<double> grid, mean, lo, hi;
};
CurveBand distortion_curve_band(const StudyConfig& config, std::size_t scenario_index,
                                int grid_size = 101, double level = 0.95);

struct RfStudyConfig {
    std::vector<int> ntree_grid = {50, 100};
    std::vector<int> mtry_grid = {2, 5};  // clamped to the feature count
    std::vector<int> nodesize_grid = {5, 15};
    int n_splits = 20;
    std::uint64_t base_seed = 0;
    double train_fraction = 0.5;
    int smote_rate = 200;
    int smote_k = 5;
    std::vector<std::string> methods = kRecalibrationMethods;
    std::vector<std::string> metrics = {"auc", "lcs"};
    MetricSettings settings;
    int threads = 0;
};

struct RfStudyResult {
    StudyTable table;
    GridResult regressor_grid;
    GridResult classifier_grid;
};

// Train/held split, SMOTE on the training half only, OOB grid search per
// forest kind, then n_splits calibration/test splits of the held-out scores.
// Scenario "<kind>" rows carry the recalibration comparison for the best
// config; scenario "<kind>_grid" rows trace every config for the
// calibration-vs-AUC view.
RfStudyResult run_rf_study(const TabularDataset& dataset, const RfStudyConfig& config);

std::string forest_config_label(const ForestConfig& config);

LabeledScores to_labeled_scores(const std::vector<SyntheticSample>& samples,
                                std::vector<double> scores);

// Features x1..x4 plus the outcome as "label".
TabularDataset to_dataset(const std::vector<SyntheticSample>& samples);

}  // namespace calibr
