#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "calibr/locreg.hpp"
#include "calibr/metrics.hpp"

namespace calibr {

struct LogisticFit {
    std::vector<double> coefficients;  // intercept first
    bool converged = false;
    int iterations = 0;
    double log_likelihood = 0.0;
};

// Newton/IRLS maximum likelihood with step halving. `features` holds one row
// per observation, without an intercept column. Complete separation shows up
// as converged = false with the last iterate returned.
LogisticFit fit_logistic(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels);

struct PlattMap {
    double a = 0.0, b = 0.0;  // g(s) = sigmoid(a*s + b)
};

struct IsotonicMap {
    std::vector<double> knot_scores;  // ascending, deduplicated
    std::vector<double> knot_values;  // non-decreasing
};

struct BetaMap {
    double a = 0.0, b = 0.0, c = 0.0;  // g(s) = 1 / (1 + exp(-c) (1-s)^b / s^a)
    bool increasing = true;            // false flags a non-monotone fit
};

struct LocalMap {
    LocalFit fit;
    int degree = 0;
};

struct Recalibrator {
    std::string method;  // platt | isotonic | beta | local0 | local1 | local2
    std::variant<PlattMap, IsotonicMap, BetaMap, LocalMap> map;
};

Recalibrator fit_platt(const LabeledScores& data);
Recalibrator fit_isotonic(const LabeledScores& data);
Recalibrator fit_beta(const LabeledScores& data);
Recalibrator fit_local(const LabeledScores& data, int degree);
Recalibrator fit_local(const LabeledScores& data, int degree, LocRegConfig config);

// Dispatch by method name, degree encoded as local0/local1/local2.
Recalibrator fit_recalibrator(const std::string& method, const LabeledScores& data);

double apply_one(const Recalibrator& r, double score);
std::vector<double> apply(const Recalibrator& r, std::span<const double> scores);

// Non-decreasing least-squares fit (pool-adjacent-violators).
std::vector<double> pava(std::span<const double> values);

}  // namespace calibr
