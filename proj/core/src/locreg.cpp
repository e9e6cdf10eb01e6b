#include "calibr/locreg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace calibr {

namespace {

constexpr double kRidgeJitter = 1e-8;

// Gaussian elimination with partial pivoting for the (degree+1)-sized normal
// equations. Returns false when a pivot collapses, in which case the caller
// retries with a ridge term.
bool solve_dense(std::vector<double> a, std::vector<double> b, int n,
                 std::vector<double>& out) {
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i * n + i]));
    const double tol = std::max(scale, 1.0) * 1e-13;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        }
        if (std::abs(a[pivot * n + col]) <= tol) return false;
        if (pivot != col) {
            for (int c = col; c < n; ++c) std::swap(a[pivot * n + c], a[col * n + c]);
            std::swap(b[pivot], b[col]);
        }
        for (int r = col + 1; r < n; ++r) {
            double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    out.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * out[c];
        out[r] = s / a[r * n + r];
    }
    return true;
}

// Weighted polynomial value at the window center. The design is centered at
// the evaluation point and scaled by the window radius, so the fitted value is
// just the constant coefficient.
double local_value(std::span<const double> x, std::span<const double> y,
                   std::size_t lo, std::size_t hi, double center, int degree) {
    const std::size_t k = hi - lo;
    double dmax = 0.0;
    for (std::size_t j = lo; j < hi; ++j) {
        dmax = std::max(dmax, std::abs(x[j] - center));
    }

    std::vector<double> w(k);
    double wsum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double u = dmax > 0.0 ? std::abs(x[lo + j] - center) / dmax : 0.0;
        w[j] = tricube(std::min(u, 1.0));
        wsum += w[j];
    }
    if (wsum <= 1e-300) {
        // Every selected point sits on the window boundary; fall back to the
        // plain neighborhood average.
        std::fill(w.begin(), w.end(), 1.0);
        wsum = static_cast<double>(k);
    }

    if (degree == 0) {
        double num = 0.0;
        for (std::size_t j = 0; j < k; ++j) num += w[j] * y[lo + j];
        return num / wsum;
    }

    const int p = degree + 1;
    const double scale = dmax > 0.0 ? dmax : 1.0;
    std::vector<double> a(static_cast<std::size_t>(p) * p, 0.0), b(p, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double t = (x[lo + j] - center) / scale;
        double phi[3] = {1.0, t, t * t};
        for (int r = 0; r < p; ++r) {
            for (int c = 0; c < p; ++c) a[r * p + c] += w[j] * phi[r] * phi[c];
            b[r] += w[j] * phi[r] * y[lo + j];
        }
    }

    std::vector<double> beta;
    if (!solve_dense(a, b, p, beta)) {
        // Rank-deficient neighborhood (e.g. all x equal): ridge keeps the fit
        // alive instead of aborting a study.
        for (int r = 0; r < p; ++r) a[r * p + r] += kRidgeJitter;
        if (!solve_dense(a, b, p, beta)) {
            double num = 0.0;
            for (std::size_t j = 0; j < k; ++j) num += w[j] * y[lo + j];
            return num / wsum;
        }
    }
    return beta[0];
}

}  // namespace

void LocRegConfig::validate() const {
    if (degree < 0 || degree > 2) throw std::invalid_argument("locreg: degree must be 0, 1 or 2");
    if (!(neighbor_fraction > 0.0) || neighbor_fraction > 1.0) {
        throw std::invalid_argument("locreg: neighbor_fraction must be in (0, 1]");
    }
    if (grid_size < 2) throw std::invalid_argument("locreg: grid_size must be >= 2");
}

LocalFit fit(std::span<const double> x, std::span<const double> y,
             const LocRegConfig& config) {
    config.validate();
    if (x.size() != y.size()) throw std::invalid_argument("locreg: x and y sizes differ");
    if (x.empty()) throw std::invalid_argument("locreg: empty input");
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(config.degree) + 1) {
        throw std::invalid_argument("locreg: need at least degree+1 points");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw std::invalid_argument("locreg: non-finite input at row " + std::to_string(i));
        }
    }

    LocalFit out;
    out.config = config;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    out.train_x.resize(n);
    out.train_y.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        out.train_x[r] = x[order[r]];
        out.train_y[r] = y[order[r]];
    }

    const double xmin = out.train_x.front();
    const double xmax = out.train_x.back();

    if (xmin == xmax) {
        // Degenerate support: a single evaluation point carries the fit.
        out.eval_points = {xmin};
        out.eval_values = {local_value(out.train_x, out.train_y, 0, n, xmin, config.degree)};
        return out;
    }

    const int N = config.grid_size;
    out.eval_points.resize(N);
    for (int i = 0; i < N; ++i) {
        out.eval_points[i] = xmin + (xmax - xmin) * static_cast<double>(i) / (N - 1);
    }
    out.eval_points.back() = xmax;
    // Tiny ranges can collapse adjacent grid points; keep the grid strictly
    // increasing.
    out.eval_points.erase(
        std::unique(out.eval_points.begin(), out.eval_points.end()),
        out.eval_points.end());
    out.eval_values.resize(out.eval_points.size());

    std::size_t k = static_cast<std::size_t>(
        std::ceil(config.neighbor_fraction * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, static_cast<std::size_t>(config.degree) + 1, n);

    // Nearest neighbors of each grid point form a contiguous window in the
    // sorted x; grow it pointwise, preferring the left point on distance ties.
    for (std::size_t i = 0; i < out.eval_points.size(); ++i) {
        const double l = out.eval_points[i];
        std::size_t pos = static_cast<std::size_t>(
            std::lower_bound(out.train_x.begin(), out.train_x.end(), l) -
            out.train_x.begin());
        std::size_t lo = pos, hi = pos;
        while (hi - lo < k) {
            if (lo == 0) {
                ++hi;
            } else if (hi == n) {
                --lo;
            } else {
                double dl = l - out.train_x[lo - 1];
                double dr = out.train_x[hi] - l;
                if (dl <= dr) --lo; else ++hi;
            }
        }
        out.eval_values[i] = local_value(out.train_x, out.train_y, lo, hi, l, config.degree);
    }
    return out;
}

double predict_one(const LocalFit& fit, double query) {
    if (std::isnan(query)) throw std::invalid_argument("locreg: NaN query");
    const auto& xs = fit.eval_points;
    const auto& ys = fit.eval_values;
    if (xs.empty()) throw std::invalid_argument("locreg: empty fit");
    if (query <= xs.front()) return ys.front();
    if (query >= xs.back()) return ys.back();
    std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(xs.begin(), xs.end(), query) - xs.begin());
    std::size_t lo = hi - 1;
    double t = (query - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

std::vector<double> predict(const LocalFit& fit, std::span<const double> queries) {
    std::vector<double> out;
    out.reserve(queries.size());
    for (double q : queries) out.push_back(predict_one(fit, q));
    return out;
}

LocalFit smoothed_calibration_curve(std::span<const double> scores,
                                    std::span<const int> labels,
                                    const LocRegConfig& config) {
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("calibration curve: scores and labels sizes differ");
    }
    LocRegConfig curve_config = config;
    curve_config.degree = 0;  // local mean of observed events
    std::vector<double> y(labels.begin(), labels.end());
    return fit(scores, y, curve_config);
}

}  // namespace calibr
