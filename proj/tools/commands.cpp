#include "commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "calibr/data.hpp"
#include "calibr/dgp.hpp"
#include "calibr/harness.hpp"
#include "calibr/io.hpp"
#include "calibr/metrics.hpp"
#include "calibr/recalib.hpp"
#include "calibr/rng.hpp"
#include "calibr/svg.hpp"

namespace calibr::cli {

namespace {

using KV = std::vector<std::pair<std::string, std::string>>;

void write_sidecar(const std::string& out_path, const std::string& command, KV entries) {
    entries.insert(entries.begin(), {"command", command});
    write_kv(out_path + ".config", entries);
}

// Accepts both the bare score schema (score,label[,true_p]) and the simulate
// output (p_u as score, d as label, p_true as true_p).
LabeledScores read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
    auto header = split_line(line);

    auto find_col = [&](std::initializer_list<const char*> names) -> int {
        for (const char* n : names) {
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (header[i] == n) return static_cast<int>(i);
            }
        }
        return -1;
    };
    int score_col = find_col({"score", "p_u"});
    int label_col = find_col({"label", "d"});
    int true_col = find_col({"true_p", "p_true"});
    if (score_col < 0 || label_col < 0) {
        throw std::invalid_argument(path + ": need score,label columns (or p_u,d)");
    }

    std::vector<double> scores, true_p;
    std::vector<int> labels;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw std::invalid_argument(path + ": row " + std::to_string(lineno) +
                                        ": wrong cell count");
        }
        auto cell = [&](int c) -> double {
            auto v = try_parse_double(cells[c]);
            if (!v || std::isnan(*v)) {
                throw std::invalid_argument(path + ": row " + std::to_string(lineno) +
                                            ": bad value '" + cells[c] + "'");
            }
            return *v;
        };
        scores.push_back(cell(score_col));
        double d = cell(label_col);
        if (d != 0.0 && d != 1.0) {
            throw std::invalid_argument(path + ": row " + std::to_string(lineno) +
                                        ": non-binary label");
        }
        labels.push_back(static_cast<int>(d));
        if (true_col >= 0) true_p.push_back(cell(true_col));
    }
    return LabeledScores::validated(std::move(scores), std::move(labels),
                                    std::move(true_p));
}

std::string list_to_string(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& tok : split_line(text)) {
        out.push_back(static_cast<int>(parse_double(tok)));
    }
    return out;
}

std::vector<std::string> parse_name_list(const std::string& text) {
    std::vector<std::string> out;
    for (auto& tok : split_line(text)) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
    std::size_t n = 2000;
    double noise_sd = 0.5;
    std::vector<double> coeffs = {0.1, 0.05, 0.2, -0.05};
    std::optional<double> alpha, gamma;
    std::uint64_t seed = 0;
    std::string out;
};

int run_simulate(const SimulateOpts& opt) {
    if (opt.alpha && opt.gamma) {
        throw std::invalid_argument("choose either --alpha or --gamma, not both");
    }
    DgpConfig config;
    config.n = opt.n;
    config.a1 = opt.coeffs[0];
    config.a2 = opt.coeffs[1];
    config.a3 = opt.coeffs[2];
    config.a4 = opt.coeffs[3];
    config.noise_sd = opt.noise_sd;
    config.seed = opt.seed;

    DistortionSpec spec;
    if (opt.alpha) spec = {DistortionKind::Alpha, *opt.alpha};
    if (opt.gamma) spec = {DistortionKind::Gamma, *opt.gamma};

    auto samples = generate(config);
    auto p_u = distort(samples, spec);

    std::ostringstream os;
    os << "x1,x2,x3,x4,eta,p_true,p_u,d\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        os << format_double(s.x1) << ',' << format_double(s.x2) << ','
           << format_double(s.x3) << ',' << format_double(s.x4) << ','
           << format_double(s.eta) << ',' << format_double(s.p_true) << ','
           << format_double(p_u[i]) << ',' << s.d << '\n';
    }
    write_file(opt.out, os.str());

    KV kv = {{"n", std::to_string(opt.n)},
             {"a1", format_double(config.a1)},
             {"a2", format_double(config.a2)},
             {"a3", format_double(config.a3)},
             {"a4", format_double(config.a4)},
             {"noise_sd", format_double(config.noise_sd)},
             {"seed", std::to_string(opt.seed)},
             {"out", opt.out}};
    if (opt.alpha) kv.push_back({"alpha", format_double(*opt.alpha)});
    if (opt.gamma) kv.push_back({"gamma", format_double(*opt.gamma)});
    write_sidecar(opt.out, "simulate", kv);
    return 0;
}

// ---------------------------------------------------------------------------
// metrics

struct MetricsOpts {
    std::string in, out;
    std::size_t bins = 10;
    double tau = 0.5;
    double neighbor_fraction = 0.7;
    int grid_size = 101;
};

int run_metrics(const MetricsOpts& opt) {
    LabeledScores data = read_scores_csv(opt.in);
    MetricSettings settings;
    settings.curve.neighbor_fraction = opt.neighbor_fraction;
    settings.curve.grid_size = opt.grid_size;
    settings.ece_bins = opt.bins;
    settings.tau = opt.tau;

    std::vector<std::string> names = {"brier", "ece", "lcs", "auc",
                                      "accuracy", "sensitivity", "specificity"};
    if (data.has_true_p()) names.insert(names.begin(), "mse");

    std::ostringstream os;
    os << "metric,value\n";
    for (const auto& name : names) {
        double value;
        try {
            value = compute_metric(name, data, settings);
        } catch (const std::exception&) {
            value = std::numeric_limits<double>::quiet_NaN();
        }
        os << name << ',' << format_double(value) << '\n';
    }
    write_file(opt.out, os.str());

    write_sidecar(opt.out, "metrics",
                  {{"in", opt.in},
                   {"out", opt.out},
                   {"bins", std::to_string(opt.bins)},
                   {"tau", format_double(opt.tau)},
                   {"neighbor_fraction", format_double(opt.neighbor_fraction)},
                   {"grid_size", std::to_string(opt.grid_size)}});
    return 0;
}

// ---------------------------------------------------------------------------
// curve

struct CurveOpts {
    std::string in, out;
    std::string kind = "smoothed";  // smoothed | quantile
    std::size_t bins = 10;
    double neighbor_fraction = 0.7;
    int grid_size = 101;
    bool band = false;
    int n_boot = 200;
    double level = 0.95;
    std::optional<std::uint64_t> seed;
};

int run_curve(const CurveOpts& opt) {
    LabeledScores data = read_scores_csv(opt.in);
    std::ostringstream os;

    if (opt.kind == "quantile") {
        BinnedCurve curve = quantile_calibration_curve(data, opt.bins);
        os << "grid,estimate\n";
        for (const auto& b : curve.bins) {
            os << format_double(b.mean_score) << ',' << format_double(b.mean_outcome)
               << '\n';
        }
    } else if (opt.kind == "smoothed") {
        LocRegConfig config;
        config.neighbor_fraction = opt.neighbor_fraction;
        config.grid_size = opt.grid_size;
        LocalFit curve = smoothed_calibration_curve(data.scores, data.labels, config);
        if (opt.band) {
            if (!opt.seed) throw std::invalid_argument("--band needs --seed");
            std::vector<double> grid = curve.eval_points;
            auto estimator = [&](const LabeledScores& d) {
                LocRegConfig c = config;
                return predict(smoothed_calibration_curve(d.scores, d.labels, c), grid);
            };
            Band band = bootstrap_band(data, estimator, opt.n_boot, opt.level, *opt.seed);
            os << "grid,estimate,lo,hi\n";
            for (std::size_t i = 0; i < grid.size(); ++i) {
                os << format_double(grid[i]) << ',' << format_double(curve.eval_values[i])
                   << ',' << format_double(band.lo[i]) << ',' << format_double(band.hi[i])
                   << '\n';
            }
        } else {
            os << "grid,estimate\n";
            for (std::size_t i = 0; i < curve.eval_points.size(); ++i) {
                os << format_double(curve.eval_points[i]) << ','
                   << format_double(curve.eval_values[i]) << '\n';
            }
        }
    } else {
        throw std::invalid_argument("unknown curve kind: " + opt.kind);
    }
    write_file(opt.out, os.str());

    KV kv = {{"in", opt.in},
             {"out", opt.out},
             {"kind", opt.kind},
             {"bins", std::to_string(opt.bins)},
             {"neighbor_fraction", format_double(opt.neighbor_fraction)},
             {"grid_size", std::to_string(opt.grid_size)},
             {"band", opt.band ? "1" : "0"}};
    if (opt.band) {
        kv.push_back({"n_boot", std::to_string(opt.n_boot)});
        kv.push_back({"level", format_double(opt.level)});
        kv.push_back({"seed", std::to_string(*opt.seed)});
    }
    write_sidecar(opt.out, "curve", kv);
    return 0;
}

// ---------------------------------------------------------------------------
// recalibrate

struct RecalibrateOpts {
    std::string method;
    std::string in;          // calibration set
    std::string apply_to;    // defaults to in
    std::string out;
    std::string params_out;  // defaults to out + ".params"
    double neighbor_fraction = 0.7;
    int grid_size = 101;
};

KV recalibrator_params(const Recalibrator& r) {
    KV kv = {{"method", r.method}};
    auto join_doubles = [](const std::vector<double>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ',';
            out += format_double(v[i]);
        }
        return out;
    };
    if (const auto* p = std::get_if<PlattMap>(&r.map)) {
        kv.push_back({"a", format_double(p->a)});
        kv.push_back({"b", format_double(p->b)});
    } else if (const auto* iso = std::get_if<IsotonicMap>(&r.map)) {
        kv.push_back({"knot_scores", join_doubles(iso->knot_scores)});
        kv.push_back({"knot_values", join_doubles(iso->knot_values)});
    } else if (const auto* beta = std::get_if<BetaMap>(&r.map)) {
        kv.push_back({"a", format_double(beta->a)});
        kv.push_back({"b", format_double(beta->b)});
        kv.push_back({"c", format_double(beta->c)});
        kv.push_back({"increasing", beta->increasing ? "1" : "0"});
    } else {
        const auto& local = std::get<LocalMap>(r.map);
        kv.push_back({"degree", std::to_string(local.degree)});
        kv.push_back({"eval_points", join_doubles(local.fit.eval_points)});
        kv.push_back({"eval_values", join_doubles(local.fit.eval_values)});
    }
    return kv;
}

int run_recalibrate(const RecalibrateOpts& opt) {
    LabeledScores calibration = read_scores_csv(opt.in);
    std::string apply_path = opt.apply_to.empty() ? opt.in : opt.apply_to;
    LabeledScores target = read_scores_csv(apply_path);

    // local methods honor the curve flags; parametric maps ignore them
    Recalibrator recalibrator = [&] {
        if (opt.method.rfind("local", 0) == 0 && opt.method.size() == 6) {
            int degree = opt.method.back() - '0';
            LocRegConfig config;
            config.neighbor_fraction = opt.neighbor_fraction;
            config.grid_size = opt.grid_size;
            return fit_local(calibration, degree, config);
        }
        return fit_recalibrator(opt.method, calibration);
    }();

    std::vector<double> recalibrated = calibr::apply(recalibrator, target.scores);
    std::ostringstream os;
    os << "score,recalibrated,label\n";
    for (std::size_t i = 0; i < target.size(); ++i) {
        os << format_double(target.scores[i]) << ',' << format_double(recalibrated[i])
           << ',' << target.labels[i] << '\n';
    }
    write_file(opt.out, os.str());

    std::string params_path = opt.params_out.empty() ? opt.out + ".params" : opt.params_out;
    write_kv(params_path, recalibrator_params(recalibrator));

    if (const auto* beta = std::get_if<BetaMap>(&recalibrator.map)) {
        if (!beta->increasing) {
            std::cerr << "warning: beta fit is not monotone (a or b negative)\n";
        }
    }

    write_sidecar(opt.out, "recalibrate",
                  {{"method", opt.method},
                   {"in", opt.in},
                   {"apply_to", apply_path},
                   {"out", opt.out},
                   {"params_out", params_path},
                   {"neighbor_fraction", format_double(opt.neighbor_fraction)},
                   {"grid_size", std::to_string(opt.grid_size)}});
    return 0;
}

// ---------------------------------------------------------------------------
// rf

struct RfTrainOpts {
    std::string in, predict_path, scores_out;
    std::string label_column = "label";
    std::string kind = "regressor";
    int ntree = 100;
    int mtry = 0;  // 0: floor(sqrt(features)), at least 1
    int nodesize = 5;
    std::uint64_t seed = 0;
};

ForestKind parse_kind(const std::string& name) {
    if (name == "classifier") return ForestKind::Classifier;
    if (name == "regressor") return ForestKind::Regressor;
    throw std::invalid_argument("unknown forest kind: " + name);
}

int run_rf_train(const RfTrainOpts& opt) {
    TabularDataset train_data = load_table(opt.in, opt.label_column);
    ForestConfig config;
    config.kind = parse_kind(opt.kind);
    config.ntree = opt.ntree;
    config.mtry = opt.mtry > 0
                      ? opt.mtry
                      : std::max(1, static_cast<int>(std::sqrt(
                                        static_cast<double>(train_data.n_features))));
    config.nodesize = opt.nodesize;
    config.seed = opt.seed;

    Forest forest = train(train_data, config);
    if (forest.degenerate_trees > 0) {
        std::cerr << "warning: " << forest.degenerate_trees
                  << " trees had no valid split at the root\n";
    }
    OobCriterion oob = oob_criterion(forest, train_data);
    std::cout << "oob_criterion=" << format_double(oob.value)
              << " evaluated=" << oob.evaluated << " skipped=" << oob.skipped << '\n';

    TabularDataset target = opt.predict_path.empty()
                                ? train_data
                                : load_table(opt.predict_path, opt.label_column);
    std::vector<double> scores = predict_scores(forest, target);

    std::ostringstream os;
    os << "score,label\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        os << format_double(scores[i]) << ',' << target.labels[i] << '\n';
    }
    write_file(opt.scores_out, os.str());

    write_sidecar(opt.scores_out, "rf train",
                  {{"in", opt.in},
                   {"predict", opt.predict_path.empty() ? opt.in : opt.predict_path},
                   {"label_column", opt.label_column},
                   {"kind", opt.kind},
                   {"ntree", std::to_string(config.ntree)},
                   {"mtry", std::to_string(config.mtry)},
                   {"nodesize", std::to_string(config.nodesize)},
                   {"seed", std::to_string(opt.seed)},
                   {"oob_criterion", format_double(oob.value)},
                   {"scores_out", opt.scores_out}});
    return 0;
}

struct RfGridOpts {
    std::string in, out;
    std::string label_column = "label";
    std::string kind = "regressor";
    std::vector<int> ntree_grid = {50, 100};
    std::vector<int> mtry_grid = {2, 5};
    std::vector<int> nodesize_grid = {5, 15};
    std::uint64_t seed = 0;
};

int run_rf_grid(const RfGridOpts& opt) {
    TabularDataset data = load_table(opt.in, opt.label_column);
    ForestKind kind = parse_kind(opt.kind);

    std::vector<ForestConfig> grid;
    for (int ntree : opt.ntree_grid) {
        for (int mtry : opt.mtry_grid) {
            for (int nodesize : opt.nodesize_grid) {
                grid.push_back({kind, ntree, mtry, nodesize, opt.seed});
            }
        }
    }
    GridResult result = grid_search(data, grid);

    std::ostringstream os;
    os << "ntree,mtry,nodesize,criterion\n";
    for (const auto& e : result.entries) {
        os << e.config.ntree << ',' << e.config.mtry << ',' << e.config.nodesize << ','
           << format_double(e.criterion) << '\n';
    }
    write_file(opt.out, os.str());

    const auto& best = result.entries[result.best_index].config;
    std::cout << "best " << forest_config_label(best) << " criterion="
              << format_double(result.entries[result.best_index].criterion) << '\n';

    write_sidecar(opt.out, "rf grid",
                  {{"in", opt.in},
                   {"label_column", opt.label_column},
                   {"kind", opt.kind},
                   {"ntree_grid", list_to_string(opt.ntree_grid)},
                   {"mtry_grid", list_to_string(opt.mtry_grid)},
                   {"nodesize_grid", list_to_string(opt.nodesize_grid)},
                   {"seed", std::to_string(opt.seed)},
                   {"best", forest_config_label(best)},
                   {"out", opt.out}});
    return 0;
}

// ---------------------------------------------------------------------------
// study

struct StudyOpts {
    std::string kind;  // distortion | recalibration | rf
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool paper_scale = false;
    std::string plots_dir;
    std::string fig5_out;
    std::string data_path;
    std::string label_column = "label";
    int width = 800, height = 600;
    int threads = 0;
    std::optional<int> replications_flag;
    std::optional<std::size_t> n_flag;
};

std::vector<Scenario> scenarios_from_config(const std::map<std::string, std::string>& kv) {
    std::vector<Scenario> out;
    auto add = [&](DistortionKind kind, const std::string& prefix, const std::string& spec) {
        for (const auto& tok : parse_name_list(spec)) {
            out.push_back({{kind, parse_double(tok)}, prefix + "=" + tok});
        }
    };
    add(DistortionKind::Alpha, "alpha",
        kv.count("alphas") ? kv.at("alphas") : "1/3,1,3");
    add(DistortionKind::Gamma, "gamma",
        kv.count("gammas") ? kv.at("gammas") : "1/3,1,3");
    return out;
}

void write_summary_csv(const StudyTable& table, const std::string& path) {
    // group rows, keep insertion order for determinism
    std::vector<std::string> keys;
    std::map<std::string, std::vector<double>> groups;
    for (const auto& r : table.rows) {
        std::string key = r.scenario + ',' + r.method + ',' + r.split + ',' + r.metric;
        if (!groups.count(key)) keys.push_back(key);
        if (std::isfinite(r.value)) groups[key].push_back(r.value);
        else groups[key];  // keep the group even if all values are NaN
    }
    std::ostringstream os;
    os << "scenario,method,split,metric,count,mean,median,q25,q75\n";
    for (const auto& key : keys) {
        const auto& values = groups[key];
        os << key << ',' << values.size() << ',';
        if (values.empty()) {
            os << "nan,nan,nan,nan\n";
            continue;
        }
        double sum = 0.0;
        for (double v : values) sum += v;
        os << format_double(sum / static_cast<double>(values.size())) << ','
           << format_double(quantile(values, 0.5)) << ','
           << format_double(quantile(values, 0.25)) << ','
           << format_double(quantile(values, 0.75)) << '\n';
    }
    write_file(path, os.str());
}

void write_study_boxplots(const StudyTable& table, const std::string& dir,
                          const svg::Geometry& geometry) {
    // one SVG per (metric, split): uncalibrated and recalibrated side by side
    std::vector<std::string> combos;
    std::map<std::string, std::map<std::string, std::vector<double>>> data;
    for (const auto& r : table.rows) {
        if (!std::isfinite(r.value)) continue;
        std::string combo = r.metric + '_' + r.split;
        if (!data.count(combo)) combos.push_back(combo);
        data[combo][r.scenario + '|' + r.method].push_back(r.value);
    }
    for (const auto& combo : combos) {
        std::vector<svg::BoxGroup> groups;
        for (const auto& [label, values] : data[combo]) {
            groups.push_back({label, values});
        }
        svg::write_boxplot(dir + "/" + combo + ".svg", combo, groups, geometry);
    }
}

int run_study(const StudyOpts& opt) {
    std::map<std::string, std::string> kv;
    if (!opt.config_path.empty()) kv = read_kv(opt.config_path);

    auto kv_double = [&](const char* key, double fallback) {
        return kv.count(key) ? parse_double(kv.at(key)) : fallback;
    };
    auto kv_int = [&](const char* key, int fallback) {
        return kv.count(key) ? static_cast<int>(parse_double(kv.at(key))) : fallback;
    };

    MetricSettings settings;
    settings.curve.neighbor_fraction = kv_double("neighbor_fraction", 0.7);
    settings.curve.grid_size = kv_int("grid_size", 101);
    settings.ece_bins = static_cast<std::size_t>(kv_int("ece_bins", 10));
    settings.tau = kv_double("tau", 0.5);

    KV sidecar = {{"kind", opt.kind},
                  {"seed", std::to_string(opt.seed)},
                  {"out", opt.out},
                  {"paper_scale", opt.paper_scale ? "1" : "0"}};
    if (!opt.config_path.empty()) sidecar.push_back({"config", opt.config_path});

    StudyTable table;
    if (opt.kind == "distortion" || opt.kind == "recalibration") {
        StudyConfig config;
        config.dgp.n = opt.n_flag.value_or(static_cast<std::size_t>(kv_int("n", 2000)));
        config.dgp.noise_sd = kv_double("noise_sd", 0.5);
        config.replications = opt.replications_flag.value_or(
            kv_int("replications", opt.paper_scale ? 200 : 50));
        if (opt.paper_scale && !opt.replications_flag && !kv.count("replications")) {
            config.replications = 200;
        }
        config.scenarios = scenarios_from_config(kv);
        if (kv.count("methods")) config.methods = parse_name_list(kv.at("methods"));
        if (kv.count("metrics")) config.metrics = parse_name_list(kv.at("metrics"));
        config.base_seed = opt.seed;
        config.calibration_fraction = kv_double("calibration_fraction", 0.5);
        config.settings = settings;
        config.threads = opt.threads > 0 ? opt.threads : kv_int("threads", 0);

        table = opt.kind == "distortion" ? run_distortion_study(config)
                                         : run_recalibration_study(config);

        if (opt.kind == "recalibration" && !opt.fig5_out.empty()) {
            write_file(opt.fig5_out, recalibration_deltas(table).to_csv());
            sidecar.push_back({"fig5_out", opt.fig5_out});
        }
        if (!opt.plots_dir.empty() && opt.kind == "distortion") {
            std::filesystem::create_directories(opt.plots_dir);
            svg::Geometry geometry{opt.width, opt.height};
            for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
                CurveBand band = distortion_curve_band(config, s,
                                                       settings.curve.grid_size);
                svg::write_band_chart(
                    opt.plots_dir + "/curve_" + config.scenarios[s].label + ".svg",
                    "calibration curve: " + config.scenarios[s].label, band.grid,
                    band.mean, band.lo, band.hi, geometry);
            }
        }
        sidecar.push_back({"n", std::to_string(config.dgp.n)});
        sidecar.push_back({"replications", std::to_string(config.replications)});
    } else if (opt.kind == "rf") {
        std::string data_path = !opt.data_path.empty()
                                    ? opt.data_path
                                    : (kv.count("data") ? kv.at("data") : "");
        TabularDataset dataset;
        if (data_path.empty()) {
            // synthetic fallback: the four-feature generator
            DgpConfig dgp;
            dgp.n = opt.n_flag.value_or(static_cast<std::size_t>(kv_int("n", 2000)));
            dgp.seed = derive_stream(opt.seed, 9000);
            dataset = to_dataset(generate(dgp));
            sidecar.push_back({"data", "synthetic"});
            sidecar.push_back({"n", std::to_string(dgp.n)});
        } else {
            dataset = load_table(data_path, opt.label_column);
            sidecar.push_back({"data", data_path});
            sidecar.push_back({"label_column", opt.label_column});
        }

        RfStudyConfig config;
        config.base_seed = opt.seed;
        config.settings = settings;
        config.threads = opt.threads > 0 ? opt.threads : kv_int("threads", 0);
        config.n_splits = opt.replications_flag.value_or(
            kv_int("rf_splits", opt.paper_scale ? 200 : 20));
        config.smote_rate = kv_int("smote_rate", 200);
        config.smote_k = kv_int("smote_k", 5);
        config.train_fraction = kv_double("train_fraction", 0.5);
        if (opt.paper_scale) {
            config.ntree_grid = {100, 300, 500};
            config.mtry_grid.clear();
            for (int m = 1; m <= 12; ++m) config.mtry_grid.push_back(m);
            config.nodesize_grid = {5, 10, 15, 20};
        }
        if (kv.count("ntree_grid")) config.ntree_grid = parse_int_list(kv.at("ntree_grid"));
        if (kv.count("mtry_grid")) config.mtry_grid = parse_int_list(kv.at("mtry_grid"));
        if (kv.count("nodesize_grid")) {
            config.nodesize_grid = parse_int_list(kv.at("nodesize_grid"));
        }
        if (kv.count("methods")) config.methods = parse_name_list(kv.at("methods"));
        if (kv.count("metrics")) config.metrics = parse_name_list(kv.at("metrics"));

        RfStudyResult result = run_rf_study(dataset, config);
        table = std::move(result.table);

        auto grid_csv = [&](const GridResult& grid) {
            std::ostringstream os;
            os << "ntree,mtry,nodesize,criterion\n";
            for (const auto& e : grid.entries) {
                os << e.config.ntree << ',' << e.config.mtry << ',' << e.config.nodesize
                   << ',' << format_double(e.criterion) << '\n';
            }
            return os.str();
        };
        write_file(opt.out + ".regressor_grid.csv", grid_csv(result.regressor_grid));
        write_file(opt.out + ".classifier_grid.csv", grid_csv(result.classifier_grid));
        sidecar.push_back(
            {"best_regressor",
             forest_config_label(
                 result.regressor_grid.entries[result.regressor_grid.best_index].config)});
        sidecar.push_back(
            {"best_classifier",
             forest_config_label(
                 result.classifier_grid.entries[result.classifier_grid.best_index].config)});
        sidecar.push_back({"rf_splits", std::to_string(config.n_splits)});
    } else {
        throw std::invalid_argument("unknown study kind: " + opt.kind);
    }

    write_file(opt.out, table.to_csv());
    if (!opt.plots_dir.empty()) {
        std::filesystem::create_directories(opt.plots_dir);
        write_summary_csv(table, opt.plots_dir + "/summary.csv");
        write_study_boxplots(table, opt.plots_dir, {opt.width, opt.height});
        sidecar.push_back({"plots", opt.plots_dir});
    }
    write_sidecar(opt.out, "study " + opt.kind, sidecar);
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"calibration measurement and recalibration toolkit"};
    app.require_subcommand(1);

    SimulateOpts sim;
    auto* simulate_cmd =
        app.add_subcommand("simulate", "generate synthetic scores with known truth");
    simulate_cmd->add_option("--n", sim.n, "sample size")->capture_default_str();
    simulate_cmd->add_option("--noise-sd", sim.noise_sd, "noise standard deviation")
        ->capture_default_str();
    simulate_cmd->add_option("--coeffs", sim.coeffs, "a1 a2 a3 a4")->expected(4);
    double alpha_value = 0.0, gamma_value = 0.0;
    auto* alpha_opt = simulate_cmd->add_option("--alpha", alpha_value,
                                               "latent probability exponent");
    auto* gamma_opt = simulate_cmd->add_option("--gamma", gamma_value,
                                               "linear predictor scale");
    simulate_cmd->add_option("--seed", sim.seed, "rng seed")->required();
    simulate_cmd->add_option("--out", sim.out, "output csv")->required();

    MetricsOpts met;
    auto* metrics_cmd = app.add_subcommand("metrics", "calibration and fit metrics");
    metrics_cmd->add_option("--in", met.in, "score csv")->required();
    metrics_cmd->add_option("--out", met.out, "metric csv")->required();
    metrics_cmd->add_option("--bins", met.bins, "quantile bins for ece")
        ->capture_default_str();
    metrics_cmd->add_option("--tau", met.tau, "classification threshold")
        ->capture_default_str();
    metrics_cmd->add_option("--neighbor-fraction", met.neighbor_fraction,
                            "lcs smoothing span")->capture_default_str();
    metrics_cmd->add_option("--grid-size", met.grid_size, "lcs grid points")
        ->capture_default_str();

    CurveOpts cur;
    auto* curve_cmd = app.add_subcommand("curve", "calibration curve export");
    curve_cmd->add_option("--in", cur.in, "score csv")->required();
    curve_cmd->add_option("--out", cur.out, "curve csv")->required();
    curve_cmd->add_option("--kind", cur.kind, "smoothed or quantile")
        ->capture_default_str();
    curve_cmd->add_option("--bins", cur.bins, "bins for the quantile curve")
        ->capture_default_str();
    curve_cmd->add_option("--neighbor-fraction", cur.neighbor_fraction, "smoothing span")
        ->capture_default_str();
    curve_cmd->add_option("--grid-size", cur.grid_size, "evaluation grid points")
        ->capture_default_str();
    curve_cmd->add_flag("--band", cur.band, "add a bootstrap percentile band");
    curve_cmd->add_option("--n-boot", cur.n_boot, "bootstrap resamples")
        ->capture_default_str();
    curve_cmd->add_option("--level", cur.level, "band level")->capture_default_str();
    std::uint64_t curve_seed = 0;
    auto* curve_seed_opt = curve_cmd->add_option("--seed", curve_seed, "rng seed");

    RecalibrateOpts rec;
    auto* recal_cmd = app.add_subcommand("recalibrate", "fit and apply a score map");
    recal_cmd
        ->add_option("--method", rec.method,
                     "platt | isotonic | beta | local0 | local1 | local2")
        ->required();
    recal_cmd->add_option("--in", rec.in, "calibration-set csv")->required();
    recal_cmd->add_option("--apply-to", rec.apply_to, "test-set csv (default: --in)");
    recal_cmd->add_option("--out", rec.out, "recalibrated csv")->required();
    recal_cmd->add_option("--params-out", rec.params_out, "fitted parameter file");
    recal_cmd->add_option("--neighbor-fraction", rec.neighbor_fraction,
                          "span for local methods")->capture_default_str();
    recal_cmd->add_option("--grid-size", rec.grid_size, "grid for local methods")
        ->capture_default_str();

    auto* rf_cmd = app.add_subcommand("rf", "random forest scores");
    rf_cmd->require_subcommand(1);

    RfTrainOpts rft;
    auto* rf_train_cmd = rf_cmd->add_subcommand("train", "train one forest");
    rf_train_cmd->add_option("--in", rft.in, "training csv")->required();
    rf_train_cmd->add_option("--predict", rft.predict_path,
                             "rows to score (default: --in)");
    rf_train_cmd->add_option("--scores-out", rft.scores_out, "scores csv")->required();
    rf_train_cmd->add_option("--label-column", rft.label_column, "label column name")
        ->capture_default_str();
    rf_train_cmd->add_option("--kind", rft.kind, "classifier or regressor")
        ->capture_default_str();
    rf_train_cmd->add_option("--ntree", rft.ntree, "number of trees")
        ->capture_default_str();
    rf_train_cmd->add_option("--mtry", rft.mtry, "features per split (0 = sqrt)")
        ->capture_default_str();
    rf_train_cmd->add_option("--nodesize", rft.nodesize, "minimum terminal size")
        ->capture_default_str();
    rf_train_cmd->add_option("--seed", rft.seed, "rng seed")->required();

    RfGridOpts rfg;
    auto* rf_grid_cmd = rf_cmd->add_subcommand("grid", "out-of-bag grid search");
    rf_grid_cmd->add_option("--in", rfg.in, "training csv")->required();
    rf_grid_cmd->add_option("--out", rfg.out, "grid result csv")->required();
    rf_grid_cmd->add_option("--label-column", rfg.label_column, "label column name")
        ->capture_default_str();
    rf_grid_cmd->add_option("--kind", rfg.kind, "classifier or regressor")
        ->capture_default_str();
    rf_grid_cmd->add_option("--ntree-grid", rfg.ntree_grid, "ntree values")
        ->delimiter(',');
    rf_grid_cmd->add_option("--mtry-grid", rfg.mtry_grid, "mtry values")->delimiter(',');
    rf_grid_cmd->add_option("--nodesize-grid", rfg.nodesize_grid, "nodesize values")
        ->delimiter(',');
    rf_grid_cmd->add_option("--seed", rfg.seed, "rng seed")->required();

    StudyOpts stu;
    auto* study_cmd = app.add_subcommand("study", "replication studies");
    study_cmd->add_option("--kind", stu.kind, "distortion | recalibration | rf")
        ->required();
    study_cmd->add_option("--config", stu.config_path, "key=value study config");
    study_cmd->add_option("--out", stu.out, "long-format study csv")->required();
    study_cmd->add_option("--seed", stu.seed, "base seed")->required();
    study_cmd->add_flag("--paper-scale", stu.paper_scale,
                        "200 replications and the full forest grid");
    study_cmd->add_option("--plots", stu.plots_dir, "directory for svg plots");
    study_cmd->add_option("--fig5-out", stu.fig5_out,
                          "delta table csv (recalibration study)");
    study_cmd->add_option("--data", stu.data_path, "table for the rf study");
    study_cmd->add_option("--label-column", stu.label_column, "label column name")
        ->capture_default_str();
    study_cmd->add_option("--width", stu.width, "svg width")->capture_default_str();
    study_cmd->add_option("--height", stu.height, "svg height")->capture_default_str();
    study_cmd->add_option("--threads", stu.threads, "worker threads (0 = auto)");
    int reps_flag = 0;
    auto* reps_opt = study_cmd->add_option("--replications", reps_flag,
                                           "replications / rf splits");
    std::uint64_t n_flag = 0;
    auto* n_opt = study_cmd->add_option("--n", n_flag, "sample size per replication");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*alpha_opt) sim.alpha = alpha_value;
        if (*gamma_opt) sim.gamma = gamma_value;
        if (*curve_seed_opt) cur.seed = curve_seed;
        if (*reps_opt) stu.replications_flag = reps_flag;
        if (*n_opt) stu.n_flag = static_cast<std::size_t>(n_flag);

        if (simulate_cmd->parsed()) return run_simulate(sim);
        if (metrics_cmd->parsed()) return run_metrics(met);
        if (curve_cmd->parsed()) return run_curve(cur);
        if (recal_cmd->parsed()) return run_recalibrate(rec);
        if (rf_cmd->parsed()) {
            if (rf_train_cmd->parsed()) return run_rf_train(rft);
            if (rf_grid_cmd->parsed()) return run_rf_grid(rfg);
        }
        if (study_cmd->parsed()) return run_study(stu);
        throw std::invalid_argument("no subcommand selected");
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace calibr::cli
