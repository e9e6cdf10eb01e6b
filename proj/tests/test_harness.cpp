#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "calibr/harness.hpp"

using namespace calibr;

namespace {

StudyConfig small_config() {
    StudyConfig config;
    config.dgp.n = 200;
    config.replications = 3;
    config.scenarios = {{{DistortionKind::Alpha, 1.0}, "alpha=1"},
                        {{DistortionKind::Alpha, 3.0}, "alpha=3"}};
    config.metrics = {"mse", "lcs", "auc"};
    config.base_seed = 42;
    config.threads = 2;
    return config;
}

}  // namespace

TEST_CASE("distortion study basics") {
    StudyConfig config = small_config();
    StudyTable table = run_distortion_study(config);

    // 2 scenarios x 3 replications x 2 methods x 3 metrics
    CHECK(table.rows.size() == 2 * 3 * 2 * 3);

    std::map<std::pair<int, std::string>, double> auc_uncal, auc_true;
    for (const auto& r : table.rows) {
        CHECK(r.split == "full");
        if (r.scenario == "alpha=1" && r.metric == "mse") {
            CHECK(r.value == 0.0);  // identity distortion
        }
        if (r.metric == "auc") {
            if (r.method == "uncalibrated") auc_uncal[{r.replication, r.scenario}] = r.value;
            if (r.method == "true_prob") auc_true[{r.replication, r.scenario}] = r.value;
        }
    }
    REQUIRE(auc_uncal.size() == 6);
    for (const auto& [key, value] : auc_uncal) {
        CHECK(value == auc_true.at(key));  // monotone distortions keep AUC bit-equal
    }
}

TEST_CASE("distortion study is deterministic and replication independent") {
    StudyConfig config = small_config();
    StudyTable a = run_distortion_study(config);
    config.threads = 1;
    StudyTable b = run_distortion_study(config);
    CHECK(a.to_csv() == b.to_csv());

    // dropping the last replication leaves earlier rows untouched
    config.replications = 2;
    StudyTable shorter = run_distortion_study(config);
    std::map<std::string, double> full_rows;
    for (const auto& r : a.rows) {
        full_rows[std::to_string(r.replication) + r.scenario + r.method + r.metric] =
            r.value;
    }
    for (const auto& r : shorter.rows) {
        auto key = std::to_string(r.replication) + r.scenario + r.method + r.metric;
        REQUIRE(full_rows.count(key) == 1);
        bool both_nan = std::isnan(full_rows[key]) && std::isnan(r.value);
        CHECK((both_nan || full_rows[key] == r.value));
    }
}

TEST_CASE("recalibration study covers the requested factorial") {
    StudyConfig config;
    config.dgp.n = 300;
    config.replications = 2;
    config.scenarios = {{{DistortionKind::Gamma, 3.0}, "gamma=3"}};
    config.methods = {"platt", "isotonic"};
    config.metrics = {"mse", "lcs"};
    config.base_seed = 7;
    StudyTable table = run_recalibration_study(config);

    // (methods + uncalibrated + true_prob) x splits, per scenario/replication
    CHECK(table.rows.size() == 1 * 2 * (2 + 2) * 2 * 2);

    std::set<std::string> seen;
    for (const auto& r : table.rows) {
        CHECK((r.split == "calibration" || r.split == "test"));
        seen.insert(r.method + '|' + r.split + '|' + r.metric + '|' +
                    std::to_string(r.replication));
    }
    CHECK(seen.size() == table.rows.size());  // no duplicate cells

    StudyTable again = run_recalibration_study(config);
    CHECK(table.to_csv() == again.to_csv());
}

TEST_CASE("recalibration deltas subtract the uncalibrated baseline") {
    StudyConfig config;
    config.dgp.n = 300;
    config.replications = 1;
    config.scenarios = {{{DistortionKind::Gamma, 3.0}, "gamma=3"}};
    config.methods = {"platt"};
    config.metrics = {"mse"};
    config.base_seed = 3;
    StudyTable table = run_recalibration_study(config);
    StudyTable deltas = recalibration_deltas(table);

    REQUIRE(deltas.rows.size() == 2);  // platt on two splits
    for (const auto& d : deltas.rows) {
        CHECK(d.method == "platt");
        double raw = 0.0, base = 0.0;
        for (const auto& r : table.rows) {
            if (r.split != d.split || r.metric != d.metric) continue;
            if (r.method == "platt") raw = r.value;
            if (r.method == "uncalibrated") base = r.value;
        }
        CHECK(d.value == doctest::Approx(raw - base).epsilon(1e-15));
    }
}

TEST_CASE("study csv format") {
    StudyTable t;
    t.rows.push_back({1, "alpha=1", "platt", "test", "lcs", 0.5});
    t.rows.push_back({2, "gamma=3", "uncalibrated", "full", "auc",
                      std::numeric_limits<double>::quiet_NaN()});
    std::string csv = t.to_csv();
    CHECK(csv == "replication,scenario,method,split,metric,value\n"
                 "1,alpha=1,platt,test,lcs,0.5\n"
                 "2,gamma=3,uncalibrated,full,auc,nan\n");
}

TEST_CASE("rf study emits the full grid trace and is deterministic") {
    DgpConfig dgp;
    dgp.n = 240;
    dgp.seed = 50;
    auto samples = generate(dgp);
    TabularDataset ds = to_dataset(samples);

    RfStudyConfig config;
    config.ntree_grid = {5};
    config.mtry_grid = {2, 9};  // 9 clamps to 4 features
    config.nodesize_grid = {5};
    config.n_splits = 2;
    config.base_seed = 19;
    config.methods = {"platt"};
    config.metrics = {"auc", "lcs"};
    RfStudyResult result = run_rf_study(ds, config);

    CHECK(result.regressor_grid.entries.size() == 2);
    CHECK(result.classifier_grid.entries.size() == 2);
    for (const auto& e : result.regressor_grid.entries) {
        CHECK(e.config.mtry <= 4);
    }

    // every config appears exactly once per replication, half and metric
    std::map<std::string, int> trace_counts;
    for (const auto& r : result.table.rows) {
        if (r.scenario == "regressor_grid" || r.scenario == "classifier_grid") {
            trace_counts[r.scenario + '|' + r.method + '|' + std::to_string(r.replication) +
                         '|' + r.split + '|' + r.metric]++;
        }
    }
    CHECK(trace_counts.size() == 2 * 2 * 2 * 2 * 2);
    for (const auto& [key, count] : trace_counts) CHECK(count == 1);

    // recalibration rows exist for the tuned config
    int recalib_rows = 0;
    for (const auto& r : result.table.rows) {
        if (r.scenario == "regressor" || r.scenario == "classifier") ++recalib_rows;
    }
    CHECK(recalib_rows == 2 * 2 * (1 + 1) * 2 * 2);

    RfStudyResult again = run_rf_study(ds, config);
    CHECK(result.table.to_csv() == again.table.to_csv());
}

TEST_CASE("compute_metric rejects unknown names") {
    auto data = LabeledScores::validated({0.2, 0.8}, {0, 1});
    MetricSettings settings;
    CHECK_THROWS_AS(compute_metric("wat", data, settings), std::invalid_argument);
    StudyConfig config;
    config.metrics = {"wat"};
    CHECK_THROWS_AS(run_distortion_study(config), std::invalid_argument);
}
