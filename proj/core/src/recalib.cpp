#include "calibr/recalib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "calibr/dgp.hpp"

namespace calibr {

namespace {

constexpr double kGradientTol = 1e-8;
constexpr int kMaxIterations = 100;
constexpr double kScoreClip = 1e-6;  // keeps log transforms finite

// log(1 + e^z) without overflow.
double softplus(double z) {
    if (z > 35.0) return z;
    if (z < -35.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

double log_likelihood(const std::vector<double>& z, const std::vector<int>& d) {
    double ll = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        ll += static_cast<double>(d[i]) * z[i] - softplus(z[i]);
    }
    return ll;
}

// Cholesky solve of the (small, SPD) Newton system; returns false when the
// Hessian is not positive definite.
bool solve_spd(std::vector<double> a, std::vector<double> b, std::size_t p,
               std::vector<double>& out) {
    for (std::size_t j = 0; j < p; ++j) {
        double diag = a[j * p + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * p + k] * a[j * p + k];
        if (!(diag > 1e-12)) return false;
        double l = std::sqrt(diag);
        a[j * p + j] = l;
        for (std::size_t i = j + 1; i < p; ++i) {
            double v = a[i * p + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * p + k] * a[j * p + k];
            a[i * p + j] = v / l;
        }
    }
    // forward then backward substitution
    for (std::size_t i = 0; i < p; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= a[i * p + k] * b[k];
        b[i] = v / a[i * p + i];
    }
    out.assign(p, 0.0);
    for (std::size_t i = p; i-- > 0;) {
        double v = b[i];
        for (std::size_t k = i + 1; k < p; ++k) v -= a[k * p + i] * out[k];
        out[i] = v / a[i * p + i];
    }
    return true;
}

double clip_score(double s) {
    return std::clamp(s, kScoreClip, 1.0 - kScoreClip);
}

}  // namespace

LogisticFit fit_logistic(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    if (features.size() != n) throw std::invalid_argument("logistic: row count mismatch");
    const std::size_t f = n > 0 ? features[0].size() : 0;
    if (n <= f) throw std::invalid_argument("logistic: need more rows than features");
    std::size_t positives = 0;
    for (int d : labels) {
        if (d != 0 && d != 1) throw std::invalid_argument("logistic: non-binary label");
        positives += static_cast<std::size_t>(d);
    }
    if (positives == 0 || positives == n) {
        throw std::invalid_argument("logistic: both classes required");
    }

    const std::size_t p = f + 1;  // intercept first
    std::vector<double> x(n * p);
    for (std::size_t i = 0; i < n; ++i) {
        if (features[i].size() != f) throw std::invalid_argument("logistic: ragged features");
        x[i * p] = 1.0;
        for (std::size_t j = 0; j < f; ++j) {
            double v = features[i][j];
            if (!std::isfinite(v)) throw std::invalid_argument("logistic: non-finite feature");
            x[i * p + 1 + j] = v;
        }
    }

    LogisticFit fit;
    fit.coefficients.assign(p, 0.0);
    std::vector<double> z(n), prob(n), grad(p), hess(p * p), step;
    auto linear = [&](const std::vector<double>& beta) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < p; ++j) v += x[i * p + j] * beta[j];
            z[i] = v;
        }
    };
    linear(fit.coefficients);
    double ll = log_likelihood(z, labels);

    for (int iter = 1; iter <= kMaxIterations; ++iter) {
        fit.iterations = iter;
        for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(z[i]);

        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double r = static_cast<double>(labels[i]) - prob[i];
            double w = prob[i] * (1.0 - prob[i]);
            for (std::size_t j = 0; j < p; ++j) {
                grad[j] += x[i * p + j] * r;
                for (std::size_t k = j; k < p; ++k) {
                    hess[j * p + k] += w * x[i * p + j] * x[i * p + k];
                }
            }
        }
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = 0; k < j; ++k) hess[j * p + k] = hess[k * p + j];
        }

        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        if (gmax < kGradientTol) {
            fit.converged = true;
            break;
        }

        if (!solve_spd(hess, grad, p, step)) {
            // Singular information matrix: separation or collinearity.
            break;
        }

        // Step halving keeps the likelihood non-decreasing.
        double scale = 1.0;
        bool improved = false;
        std::vector<double> candidate(p);
        for (int half = 0; half < 30; ++half) {
            for (std::size_t j = 0; j < p; ++j) {
                candidate[j] = fit.coefficients[j] + scale * step[j];
            }
            linear(candidate);
            double cll = log_likelihood(z, labels);
            if (cll >= ll - 1e-12) {
                fit.coefficients = candidate;
                ll = cll;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;
        linear(fit.coefficients);
    }

    linear(fit.coefficients);
    fit.log_likelihood = log_likelihood(z, labels);
    // Runaway coefficients mean the likelihood has no finite maximizer
    // (complete separation); report the iterate but do not call it converged.
    for (double c : fit.coefficients) {
        if (std::abs(c) > 500.0) {
            fit.converged = false;
            break;
        }
    }
    return fit;
}

std::vector<double> pava(std::span<const double> values) {
    // Pooled blocks kept on a stack; merging repairs ordering violations.
    struct Block {
        double sum;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(values.size());
    for (double v : values) {
        blocks.push_back({v, 1});
        while (blocks.size() > 1) {
            auto& prev = blocks[blocks.size() - 2];
            auto& last = blocks.back();
            if (prev.sum * static_cast<double>(last.count) <=
                last.sum * static_cast<double>(prev.count)) {
                break;  // means already non-decreasing
            }
            prev.sum += last.sum;
            prev.count += last.count;
            blocks.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& b : blocks) {
        double mean = b.sum / static_cast<double>(b.count);
        out.insert(out.end(), b.count, mean);
    }
    return out;
}

Recalibrator fit_platt(const LabeledScores& data) {
    std::vector<std::vector<double>> feats(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) feats[i] = {data.scores[i]};
    LogisticFit lf = fit_logistic(feats, data.labels);
    PlattMap map{lf.coefficients[1], lf.coefficients[0]};
    return Recalibrator{"platt", map};
}

Recalibrator fit_isotonic(const LabeledScores& data) {
    const std::size_t n = data.size();
    if (n < 1) throw std::invalid_argument("isotonic: empty data");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.scores[a] < data.scores[b];
    });
    std::vector<double> sorted_labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        sorted_labels[r] = static_cast<double>(data.labels[order[r]]);
    }
    std::vector<double> fitted = pava(sorted_labels);

    IsotonicMap map;
    for (std::size_t r = 0; r < n; ++r) {
        double score = data.scores[order[r]];
        if (r > 0 && fitted[r] == fitted[r - 1]) continue;  // same plateau
        if (!map.knot_scores.empty() && map.knot_scores.back() == score) {
            map.knot_values.back() = fitted[r];  // tied scores keep the last value
            continue;
        }
        map.knot_scores.push_back(score);
        map.knot_values.push_back(fitted[r]);
    }
    return Recalibrator{"isotonic", map};
}

Recalibrator fit_beta(const LabeledScores& data) {
    std::vector<std::vector<double>> feats(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        double s = clip_score(data.scores[i]);
        feats[i] = {std::log(s), -std::log1p(-s)};
    }
    LogisticFit lf = fit_logistic(feats, data.labels);
    BetaMap map;
    map.c = lf.coefficients[0];
    map.a = lf.coefficients[1];
    map.b = lf.coefficients[2];
    map.increasing = map.a >= 0.0 && map.b >= 0.0;
    return Recalibrator{"beta", map};
}

Recalibrator fit_local(const LabeledScores& data, int degree) {
    return fit_local(data, degree, LocRegConfig{});
}

Recalibrator fit_local(const LabeledScores& data, int degree, LocRegConfig config) {
    if (degree < 0 || degree > 2) throw std::invalid_argument("local: degree must be 0, 1 or 2");
    config.degree = degree;
    std::vector<double> y(data.labels.begin(), data.labels.end());
    LocalMap map{fit(data.scores, y, config), degree};
    return Recalibrator{"local" + std::to_string(degree), std::move(map)};
}

Recalibrator fit_recalibrator(const std::string& method, const LabeledScores& data) {
    if (method == "platt") return fit_platt(data);
    if (method == "isotonic") return fit_isotonic(data);
    if (method == "beta") return fit_beta(data);
    if (method == "local0") return fit_local(data, 0);
    if (method == "local1") return fit_local(data, 1);
    if (method == "local2") return fit_local(data, 2);
    throw std::invalid_argument("unknown recalibration method: " + method);
}

double apply_one(const Recalibrator& r, double score) {
    if (std::isnan(score)) throw std::invalid_argument("recalibrate: NaN score");
    double value = 0.0;
    if (const auto* platt = std::get_if<PlattMap>(&r.map)) {
        value = sigmoid(platt->a * score + platt->b);
    } else if (const auto* iso = std::get_if<IsotonicMap>(&r.map)) {
        const auto& ks = iso->knot_scores;
        // right-continuous step: last knot at or below the query
        auto it = std::upper_bound(ks.begin(), ks.end(), score);
        std::size_t idx = it == ks.begin() ? 0 : static_cast<std::size_t>(it - ks.begin()) - 1;
        value = iso->knot_values[idx];
    } else if (const auto* beta = std::get_if<BetaMap>(&r.map)) {
        double s = clip_score(score);
        value = sigmoid(beta->a * std::log(s) - beta->b * std::log1p(-s) + beta->c);
    } else {
        const auto& local = std::get<LocalMap>(r.map);
        value = predict_one(local.fit, score);
    }
    return std::clamp(value, 0.0, 1.0);
}

std::vector<double> apply(const Recalibrator& r, std::span<const double> scores) {
    std::vector<double> out;
    out.reserve(scores.size());
    for (double s : scores) out.push_back(apply_one(r, s));
    return out;
}

}  // namespace calibr
