#include "calibr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "calibr/io.hpp"
#include "calibr/parallel.hpp"
#include "calibr/recalib.hpp"
#include "calibr/rng.hpp"

namespace calibr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate_metric_names(const std::vector<std::string>& metrics) {
    static const std::set<std::string> known = {
        "mse", "brier", "ece", "lcs", "auc", "accuracy", "sensitivity", "specificity"};
    for (const auto& m : metrics) {
        if (!known.count(m)) throw std::invalid_argument("unknown metric: " + m);
    }
}

double metric_or_nan(const std::string& name, const LabeledScores& data,
                     const MetricSettings& settings) {
    try {
        return compute_metric(name, data, settings);
    } catch (const std::exception&) {
        return kNaN;  // failed cells stay in the table
    }
}

void emit_metrics(StudyTable& table, int replication, const std::string& scenario,
                  const std::string& method, const std::string& split,
                  const std::vector<std::string>& metrics, const LabeledScores& data,
                  const MetricSettings& settings) {
    for (const auto& m : metrics) {
        table.rows.push_back(
            {replication, scenario, method, split, m, metric_or_nan(m, data, settings)});
    }
}

void emit_nan_metrics(StudyTable& table, int replication, const std::string& scenario,
                      const std::string& method, const std::string& split,
                      const std::vector<std::string>& metrics) {
    for (const auto& m : metrics) {
        table.rows.push_back({replication, scenario, method, split, m, kNaN});
    }
}

}  // namespace

const std::vector<std::string> kRecalibrationMethods = {
    "platt", "isotonic", "beta", "local0", "local1", "local2"};

const std::vector<std::string> kDefaultMetrics = {
    "mse", "brier", "ece", "lcs", "auc", "accuracy", "sensitivity", "specificity"};

std::vector<Scenario> default_scenarios() {
    std::vector<Scenario> out;
    const std::vector<std::pair<double, std::string>> values = {
        {1.0 / 3.0, "1/3"}, {1.0, "1"}, {3.0, "3"}};
    for (const auto& [v, name] : values) {
        out.push_back({{DistortionKind::Alpha, v}, "alpha=" + name});
    }
    for (const auto& [v, name] : values) {
        out.push_back({{DistortionKind::Gamma, v}, "gamma=" + name});
    }
    return out;
}

std::string StudyTable::to_csv() const {
    std::ostringstream os;
    os << "replication,scenario,method,split,metric,value\n";
    for (const auto& r : rows) {
        os << r.replication << ',' << r.scenario << ',' << r.method << ',' << r.split
           << ',' << r.metric << ',' << format_double(r.value) << '\n';
    }
    return os.str();
}

void StudyTable::append(StudyTable other) {
    rows.insert(rows.end(), std::make_move_iterator(other.rows.begin()),
                std::make_move_iterator(other.rows.end()));
}

double compute_metric(const std::string& name, const LabeledScores& data,
                      const MetricSettings& settings) {
    if (name == "mse") return true_mse(data, data.scores);
    if (name == "brier") return brier(data);
    if (name == "ece") return ece(data, settings.ece_bins, settings.tau);
    if (name == "lcs") return lcs(data, settings.curve);
    if (name == "auc") return auc(data);
    if (name == "accuracy") return classification_report(data, settings.tau).accuracy;
    if (name == "sensitivity") return classification_report(data, settings.tau).sensitivity;
    if (name == "specificity") return classification_report(data, settings.tau).specificity;
    throw std::invalid_argument("unknown metric: " + name);
}

LabeledScores to_labeled_scores(const std::vector<SyntheticSample>& samples,
                                std::vector<double> scores) {
    return LabeledScores::validated(std::move(scores), outcomes(samples),
                                    true_probabilities(samples));
}

TabularDataset to_dataset(const std::vector<SyntheticSample>& samples) {
    TabularDataset ds;
    ds.feature_names = {"x1", "x2", "x3", "x4"};
    ds.label_name = "label";
    ds.n_features = 4;
    ds.n_rows = samples.size();
    ds.features.reserve(samples.size() * 4);
    ds.labels.reserve(samples.size());
    for (const auto& s : samples) {
        ds.features.insert(ds.features.end(), {s.x1, s.x2, s.x3, s.x4});
        ds.labels.push_back(s.d);
    }
    return ds;
}

StudyTable run_distortion_study(const StudyConfig& config) {
    if (config.replications < 1) throw std::invalid_argument("study: replications >= 1");
    validate_metric_names(config.metrics);
    config.dgp.validate();
    for (const auto& s : config.scenarios) s.spec.validate();

    const std::size_t cells = config.scenarios.size() *
                              static_cast<std::size_t>(config.replications);
    std::vector<StudyTable> buckets(cells);

    parallel_for(cells, [&](std::size_t idx) {
        const std::size_t s = idx / config.replications;
        const int r = static_cast<int>(idx % config.replications);
        const Scenario& scenario = config.scenarios[s];
        // seeds depend on the replication index only, never on the count
        const std::uint64_t rep_seed = replication_seed(config.base_seed, r);

        DgpConfig dgp_config = config.dgp;
        dgp_config.seed = derive_stream(rep_seed, 2 * s);
        auto samples = generate(dgp_config);
        auto p_u = distort(samples, scenario.spec);

        StudyTable& t = buckets[idx];
        emit_metrics(t, r + 1, scenario.label, "uncalibrated", "full", config.metrics,
                     to_labeled_scores(samples, std::move(p_u)), config.settings);
        emit_metrics(t, r + 1, scenario.label, "true_prob", "full", config.metrics,
                     to_labeled_scores(samples, true_probabilities(samples)),
                     config.settings);
    }, config.threads);

    StudyTable out;
    for (auto& b : buckets) out.append(std::move(b));
    return out;
}

StudyTable run_recalibration_study(const StudyConfig& config) {
    if (config.replications < 1) throw std::invalid_argument("study: replications >= 1");
    if (!(config.calibration_fraction > 0.0 && config.calibration_fraction < 1.0)) {
        throw std::invalid_argument("study: calibration_fraction in (0,1)");
    }
    validate_metric_names(config.metrics);
    config.dgp.validate();
    for (const auto& s : config.scenarios) s.spec.validate();

    const std::size_t cells = config.scenarios.size() *
                              static_cast<std::size_t>(config.replications);
    std::vector<StudyTable> buckets(cells);

    parallel_for(cells, [&](std::size_t idx) {
        const std::size_t s = idx / config.replications;
        const int r = static_cast<int>(idx % config.replications);
        const Scenario& scenario = config.scenarios[s];
        const std::uint64_t rep_seed = replication_seed(config.base_seed, r);

        DgpConfig dgp_config = config.dgp;
        dgp_config.seed = derive_stream(rep_seed, 2 * s);
        auto samples = generate(dgp_config);
        auto p_u = distort(samples, scenario.spec);
        LabeledScores full = to_labeled_scores(samples, std::move(p_u));

        const double cf = config.calibration_fraction;
        auto halves = partition(full.size(), std::vector<double>{cf, 1.0 - cf},
                                derive_stream(rep_seed, 2 * s + 1));
        const LabeledScores cal = full.subset(halves[0]);
        const LabeledScores tst = full.subset(halves[1]);

        StudyTable& t = buckets[idx];
        auto emit_both = [&](const std::string& method, const LabeledScores& c,
                             const LabeledScores& e) {
            emit_metrics(t, r + 1, scenario.label, method, "calibration", config.metrics,
                         c, config.settings);
            emit_metrics(t, r + 1, scenario.label, method, "test", config.metrics, e,
                         config.settings);
        };

        emit_both("true_prob", cal.with_scores(cal.true_p), tst.with_scores(tst.true_p));
        emit_both("uncalibrated", cal, tst);

        for (const auto& method : config.methods) {
            try {
                Recalibrator rc = fit_recalibrator(method, cal);
                emit_both(method, cal.with_scores(calibr::apply(rc, cal.scores)),
                          tst.with_scores(calibr::apply(rc, tst.scores)));
            } catch (const std::exception&) {
                emit_nan_metrics(t, r + 1, scenario.label, method, "calibration",
                                 config.metrics);
                emit_nan_metrics(t, r + 1, scenario.label, method, "test", config.metrics);
            }
        }
    }, config.threads);

    StudyTable out;
    for (auto& b : buckets) out.append(std::move(b));
    return out;
}

StudyTable recalibration_deltas(const StudyTable& table) {
    // key: replication | scenario | split | metric
    std::map<std::string, double> baseline;
    auto key = [](const StudyRow& r) {
        return std::to_string(r.replication) + '|' + r.scenario + '|' + r.split + '|' +
               r.metric;
    };
    for (const auto& r : table.rows) {
        if (r.method == "uncalibrated") baseline[key(r)] = r.value;
    }
    StudyTable out;
    for (const auto& r : table.rows) {
        if (r.method == "uncalibrated" || r.method == "true_prob") continue;
        auto it = baseline.find(key(r));
        double delta = it == baseline.end() ? kNaN : r.value - it->second;
        out.rows.push_back({r.replication, r.scenario, r.method, r.split, r.metric, delta});
    }
    return out;
}

CurveBand distortion_curve_band(const StudyConfig& config, std::size_t scenario_index,
                                int grid_size, double level) {
    if (scenario_index >= config.scenarios.size()) {
        throw std::invalid_argument("curve band: scenario index out of range");
    }
    if (grid_size < 2) throw std::invalid_argument("curve band: grid_size >= 2");
    const Scenario& scenario = config.scenarios[scenario_index];
    scenario.spec.validate();

    CurveBand band;
    band.grid.resize(grid_size);
    for (int i = 0; i < grid_size; ++i) {
        band.grid[i] = static_cast<double>(i) / (grid_size - 1);
    }

    const int reps = config.replications;
    std::vector<std::vector<double>> curves(reps);
    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
        DgpConfig dgp_config = config.dgp;
        dgp_config.seed =
            derive_stream(replication_seed(config.base_seed, r), 2 * scenario_index);
        auto samples = generate(dgp_config);
        auto p_u = distort(samples, scenario.spec);
        LocalFit curve = smoothed_calibration_curve(p_u, outcomes(samples),
                                                    config.settings.curve);
        curves[r] = predict(curve, band.grid);
    }, config.threads);

    const double alpha = (1.0 - level) / 2.0;
    band.mean.resize(grid_size);
    band.lo.resize(grid_size);
    band.hi.resize(grid_size);
    std::vector<double> column(reps);
    for (int g = 0; g < grid_size; ++g) {
        double sum = 0.0;
        for (int r = 0; r < reps; ++r) {
            column[r] = curves[r][g];
            sum += column[r];
        }
        band.mean[g] = sum / static_cast<double>(reps);
        band.lo[g] = quantile(column, alpha);
        band.hi[g] = quantile(column, 1.0 - alpha);
    }
    return band;
}

std::string forest_config_label(const ForestConfig& config) {
    return "ntree=" + std::to_string(config.ntree) + ";mtry=" + std::to_string(config.mtry) +
           ";nodesize=" + std::to_string(config.nodesize);
}

RfStudyResult run_rf_study(const TabularDataset& dataset, const RfStudyConfig& config) {
    if (config.n_splits < 1) throw std::invalid_argument("rf study: n_splits >= 1");
    if (config.ntree_grid.empty() || config.mtry_grid.empty() ||
        config.nodesize_grid.empty()) {
        throw std::invalid_argument("rf study: empty hyperparameter grid");
    }
    validate_metric_names(config.metrics);

    const double tf = config.train_fraction;
    if (!(tf > 0.0 && tf < 1.0)) throw std::invalid_argument("rf study: train_fraction in (0,1)");

    auto halves = partition(dataset.n_rows, std::vector<double>{tf, 1.0 - tf},
                            derive_stream(config.base_seed, 0));
    TabularDataset train_part = subset_rows(dataset, halves[0]);
    TabularDataset held_part = subset_rows(dataset, halves[1]);

    // Rebalancing is confined to the training half; held-out rows stay raw.
    TabularDataset train_bal = smote(train_part, config.smote_rate, config.smote_k,
                                     derive_stream(config.base_seed, 1));

    // mtry values beyond the feature count are clamped, then deduplicated.
    std::vector<int> mtry_values;
    for (int m : config.mtry_grid) {
        int v = std::clamp<int>(m, 1, static_cast<int>(dataset.n_features));
        if (std::find(mtry_values.begin(), mtry_values.end(), v) == mtry_values.end()) {
            mtry_values.push_back(v);
        }
    }

    RfStudyResult result;
    struct ConfigRun {
        ForestConfig config;
        std::vector<double> held_scores;
        double criterion;
    };
    std::map<std::string, std::vector<ConfigRun>> runs;  // by kind label

    for (ForestKind kind : {ForestKind::Regressor, ForestKind::Classifier}) {
        std::vector<ForestConfig> grid;
        for (int ntree : config.ntree_grid) {
            for (int mtry : mtry_values) {
                for (int nodesize : config.nodesize_grid) {
                    grid.push_back({kind, ntree, mtry, nodesize,
                                    derive_stream(config.base_seed, 2)});
                }
            }
        }
        auto& kind_runs = runs[to_string(kind)];
        kind_runs.reserve(grid.size());
        // sequential over configs; training parallelizes across trees already
        for (const auto& cfg : grid) {
            Forest forest = train(train_bal, cfg);
            kind_runs.push_back({cfg, predict_scores(forest, held_part),
                                 oob_criterion(forest, train_bal).value});
        }

        GridResult& gr = kind == ForestKind::Regressor ? result.regressor_grid
                                                       : result.classifier_grid;
        for (const auto& run : kind_runs) gr.entries.push_back({run.config, run.criterion});
        auto key = [](const GridResult::Entry& e) {
            return std::make_tuple(e.criterion, e.config.ntree, e.config.mtry,
                                   e.config.nodesize);
        };
        for (std::size_t i = 1; i < gr.entries.size(); ++i) {
            if (key(gr.entries[i]) < key(gr.entries[gr.best_index])) gr.best_index = i;
        }
    }

    const std::size_t n_held = held_part.n_rows;
    std::vector<StudyTable> buckets(config.n_splits);
    parallel_for(static_cast<std::size_t>(config.n_splits), [&](std::size_t j) {
        auto split_halves = partition(n_held, std::vector<double>{0.5, 0.5},
                                      derive_stream(config.base_seed, 100 + j));
        StudyTable& t = buckets[j];
        const int rep = static_cast<int>(j) + 1;

        for (ForestKind kind : {ForestKind::Regressor, ForestKind::Classifier}) {
            const std::string kind_label = to_string(kind);
            const auto& kind_runs = runs.at(kind_label);
            const GridResult& gr = kind == ForestKind::Regressor ? result.regressor_grid
                                                                 : result.classifier_grid;

            // full hyperparameter trace, one point per config and half
            for (const auto& run : kind_runs) {
                LabeledScores held_scores = LabeledScores::validated(
                    run.held_scores, held_part.labels);
                emit_metrics(t, rep, kind_label + "_grid", forest_config_label(run.config),
                             "calibration", config.metrics,
                             held_scores.subset(split_halves[0]), config.settings);
                emit_metrics(t, rep, kind_label + "_grid", forest_config_label(run.config),
                             "test", config.metrics, held_scores.subset(split_halves[1]),
                             config.settings);
            }

            // recalibration comparison for the tuned config
            const auto& best = kind_runs[gr.best_index];
            LabeledScores held_scores =
                LabeledScores::validated(best.held_scores, held_part.labels);
            LabeledScores cal = held_scores.subset(split_halves[0]);
            LabeledScores tst = held_scores.subset(split_halves[1]);
            emit_metrics(t, rep, kind_label, "uncalibrated", "calibration", config.metrics,
                         cal, config.settings);
            emit_metrics(t, rep, kind_label, "uncalibrated", "test", config.metrics, tst,
                         config.settings);
            for (const auto& method : config.methods) {
                try {
                    Recalibrator rc = fit_recalibrator(method, cal);
                    emit_metrics(t, rep, kind_label, method, "calibration", config.metrics,
                                 cal.with_scores(calibr::apply(rc, cal.scores)), config.settings);
                    emit_metrics(t, rep, kind_label, method, "test", config.metrics,
                                 tst.with_scores(calibr::apply(rc, tst.scores)), config.settings);
                } catch (const std::exception&) {
                    emit_nan_metrics(t, rep, kind_label, method, "calibration",
                                     config.metrics);
                    emit_nan_metrics(t, rep, kind_label, method, "test", config.metrics);
                }
            }
        }
    }, config.threads);

    for (auto& b : buckets) result.table.append(std::move(b));
    return result;
}

}  // namespace calibr
