#include "calibr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "calibr/rng.hpp"

namespace calibr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Type-7 quantile (linear interpolation) on a sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return kNaN;
    if (sorted.size() == 1) return sorted[0];
    double h = p * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo >= sorted.size() - 1) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

LabeledScores LabeledScores::validated(std::vector<double> scores, std::vector<int> labels,
                                       std::vector<double> true_p) {
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("scores and labels sizes differ");
    }
    if (!true_p.empty() && true_p.size() != scores.size()) {
        throw std::invalid_argument("true_p size differs from scores");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
            throw std::invalid_argument("score out of [0,1] at row " + std::to_string(i));
        }
        if (labels[i] != 0 && labels[i] != 1) {
            throw std::invalid_argument("non-binary label at row " + std::to_string(i));
        }
        if (!true_p.empty() && !(true_p[i] > 0.0 && true_p[i] < 1.0)) {
            throw std::invalid_argument("true_p outside (0,1) at row " + std::to_string(i));
        }
    }
    LabeledScores out;
    out.scores = std::move(scores);
    out.labels = std::move(labels);
    out.true_p = std::move(true_p);
    return out;
}

LabeledScores LabeledScores::subset(std::span<const std::size_t> rows) const {
    LabeledScores out;
    out.scores.reserve(rows.size());
    out.labels.reserve(rows.size());
    if (has_true_p()) out.true_p.reserve(rows.size());
    for (std::size_t r : rows) {
        out.scores.push_back(scores.at(r));
        out.labels.push_back(labels.at(r));
        if (has_true_p()) out.true_p.push_back(true_p[r]);
    }
    return out;
}

LabeledScores LabeledScores::with_scores(std::vector<double> new_scores) const {
    if (new_scores.size() != size()) {
        throw std::invalid_argument("replacement scores size differs");
    }
    LabeledScores out = *this;
    out.scores = std::move(new_scores);
    return out;
}

double brier(const LabeledScores& data) {
    if (data.size() == 0) throw std::invalid_argument("brier: empty data");
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double d = data.scores[i] - static_cast<double>(data.labels[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(data.size());
}

double true_mse(const LabeledScores& data, std::span<const double> candidate) {
    if (!data.has_true_p()) throw std::invalid_argument("true_mse: true_p missing");
    if (candidate.size() != data.size()) {
        throw std::invalid_argument("true_mse: candidate size differs");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double d = data.true_p[i] - candidate[i];
        sum += d * d;
    }
    return sum / static_cast<double>(data.size());
}

BinnedCurve quantile_calibration_curve(const LabeledScores& data, std::size_t bins,
                                       double tau) {
    const std::size_t n = data.size();
    if (bins < 1) throw std::invalid_argument("quantile curve: bins must be >= 1");
    if (n < bins) throw std::invalid_argument("quantile curve: more bins than rows");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.scores[a] < data.scores[b];
    });

    // Equal-count bins by rank; runs of tied scores stay in the bin of their
    // first member, which merges duplicate quantile edges.
    std::vector<std::size_t> bin_of(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (r > 0 && data.scores[order[r]] == data.scores[order[r - 1]]) {
            bin_of[r] = bin_of[r - 1];
        } else {
            bin_of[r] = r * bins / n;
        }
    }

    BinnedCurve curve;
    curve.requested_bins = bins;
    curve.tau = tau;
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start;
        while (end < n && bin_of[end] == bin_of[start]) ++end;
        double score_sum = 0.0, outcome_sum = 0.0, correct = 0.0;
        for (std::size_t r = start; r < end; ++r) {
            std::size_t i = order[r];
            score_sum += data.scores[i];
            outcome_sum += data.labels[i];
            int predicted = data.scores[i] >= tau ? 1 : 0;
            correct += predicted == data.labels[i] ? 1.0 : 0.0;
        }
        double count = static_cast<double>(end - start);
        curve.bins.push_back({score_sum / count, outcome_sum / count, correct / count,
                              end - start});
        start = end;
    }
    return curve;
}

double ece(const LabeledScores& data, std::size_t bins, double tau) {
    BinnedCurve curve = quantile_calibration_curve(data, bins, tau);
    double total = 0.0;
    for (const auto& b : curve.bins) {
        double w = static_cast<double>(b.count) / static_cast<double>(data.size());
        total += w * std::abs(b.accuracy - b.mean_score);
    }
    return total;
}

double bisector_gap(std::span<const double> eval_points,
                    std::span<const double> eval_values,
                    std::span<const double> weights) {
    if (eval_points.size() != eval_values.size() || eval_points.size() != weights.size()) {
        throw std::invalid_argument("bisector_gap: size mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < eval_points.size(); ++i) {
        double d = eval_values[i] - eval_points[i];
        total += weights[i] * d * d;
    }
    return total;
}

std::vector<double> nearest_grid_weights(std::span<const double> scores,
                                         std::span<const double> eval_points) {
    if (eval_points.empty()) throw std::invalid_argument("weights: empty grid");
    std::vector<double> w(eval_points.size(), 0.0);
    for (double s : scores) {
        // nearest grid point by absolute distance; lower index wins ties
        std::size_t hi = static_cast<std::size_t>(
            std::lower_bound(eval_points.begin(), eval_points.end(), s) -
            eval_points.begin());
        std::size_t best;
        if (hi == 0) {
            best = 0;
        } else if (hi == eval_points.size()) {
            best = eval_points.size() - 1;
        } else {
            best = (s - eval_points[hi - 1] <= eval_points[hi] - s) ? hi - 1 : hi;
        }
        w[best] += 1.0;
    }
    const double n = static_cast<double>(scores.size());
    for (double& v : w) v /= n;
    return w;
}

double lcs(const LabeledScores& data, const LocRegConfig& config) {
    if (data.size() < 2) throw std::invalid_argument("lcs: need at least 2 rows");
    LocalFit curve = smoothed_calibration_curve(data.scores, data.labels, config);
    std::vector<double> w = nearest_grid_weights(data.scores, curve.eval_points);
    return bisector_gap(curve.eval_points, curve.eval_values, w);
}

ClassificationReport classification_report(const LabeledScores& data, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("classification_report: tau outside [0,1]");
    }
    ClassificationReport rep{tau, 0, 0, 0, 0, 0.0, kNaN, kNaN};
    for (std::size_t i = 0; i < data.size(); ++i) {
        int predicted = data.scores[i] >= tau ? 1 : 0;
        if (predicted == 1 && data.labels[i] == 1) ++rep.tp;
        else if (predicted == 1 && data.labels[i] == 0) ++rep.fp;
        else if (predicted == 0 && data.labels[i] == 0) ++rep.tn;
        else ++rep.fn;
    }
    const std::size_t n = data.size();
    rep.accuracy = n > 0 ? static_cast<double>(rep.tp + rep.tn) / static_cast<double>(n) : kNaN;
    if (rep.tp + rep.fn > 0) {
        rep.sensitivity = static_cast<double>(rep.tp) / static_cast<double>(rep.tp + rep.fn);
    }
    if (rep.tn + rep.fp > 0) {
        rep.specificity = static_cast<double>(rep.tn) / static_cast<double>(rep.tn + rep.fp);
    }
    return rep;
}

double auc(const LabeledScores& data) {
    const std::size_t n = data.size();
    std::size_t n_pos = 0;
    for (int d : data.labels) n_pos += static_cast<std::size_t>(d);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: single-class data");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.scores[a] < data.scores[b];
    });

    // Midranks per tie group; the positive rank sum is accumulated in original
    // row order so that monotone score transforms leave the result bit-equal.
    std::vector<double> rank(n);
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start;
        while (end < n && data.scores[order[end]] == data.scores[order[start]]) ++end;
        double mid = 0.5 * static_cast<double>(start + 1 + end);  // mean of ranks start+1..end
        for (std::size_t r = start; r < end; ++r) rank[order[r]] = mid;
        start = end;
    }
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (data.labels[i] == 1) rank_sum += rank[i];
    }
    double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0,1]");
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

Band bootstrap_band(const LabeledScores& data, const CurveEstimator& estimator,
                    int n_boot, double level, std::uint64_t seed) {
    if (n_boot < 2) throw std::invalid_argument("bootstrap_band: n_boot must be >= 2");
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("bootstrap_band: level outside (0,1)");
    }
    if (data.size() == 0) throw std::invalid_argument("bootstrap_band: empty data");

    std::vector<std::vector<double>> draws;  // n_boot x grid
    draws.reserve(n_boot);
    std::size_t grid = 0;
    for (int b = 0; b < n_boot; ++b) {
        Rng rng(derive_stream(seed, static_cast<std::uint64_t>(b)));
        std::vector<std::size_t> rows(data.size());
        for (auto& r : rows) r = rng.below(data.size());
        std::vector<double> est = estimator(data.subset(rows));
        if (b == 0) {
            grid = est.size();
        } else if (est.size() != grid) {
            throw std::runtime_error("bootstrap_band: estimator grid size changed");
        }
        draws.push_back(std::move(est));
    }

    Band band;
    band.lo.resize(grid);
    band.hi.resize(grid);
    const double alpha = (1.0 - level) / 2.0;
    std::vector<double> column(n_boot);
    for (std::size_t g = 0; g < grid; ++g) {
        for (int b = 0; b < n_boot; ++b) column[b] = draws[b][g];
        std::sort(column.begin(), column.end());
        band.lo[g] = quantile_sorted(column, alpha);
        band.hi[g] = quantile_sorted(column, 1.0 - alpha);
    }
    return band;
}

}  // namespace calibr
