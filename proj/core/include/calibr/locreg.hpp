#pragma once

#include <span>
#include <vector>

namespace calibr {

struct LocRegConfig {
    int degree = 0;                  // 0, 1 or 2
    double neighbor_fraction = 0.7;  // share of training points per neighborhood
    int grid_size = 101;             // evaluation points across the observed range

    void validate() const;
};

// A fitted local polynomial regression, evaluated on a fixed grid. Queries in
// between grid points are linearly interpolated, queries outside clamp to the
// end values. When all training x coincide the grid collapses to that single
// point.
struct LocalFit {
    LocRegConfig config;
    std::vector<double> train_x;  // sorted ascending
    std::vector<double> train_y;  // reordered alongside train_x
    std::vector<double> eval_points;
    std::vector<double> eval_values;
};

// Tricube weight on normalized distance u in [0, 1].
inline double tricube(double u) {
    double t = 1.0 - u * u * u;
    return t * t * t;
}

LocalFit fit(std::span<const double> x, std::span<const double> y,
             const LocRegConfig& config);

double predict_one(const LocalFit& fit, double query);
std::vector<double> predict(const LocalFit& fit, std::span<const double> queries);

// Degree-0 fit of outcomes on scores over the observed score range. Values are
// local event frequencies, so they live in [0, 1] by construction.
LocalFit smoothed_calibration_curve(std::span<const double> scores,
                                    std::span<const int> labels,
                                    const LocRegConfig& config);

}  // namespace calibr
