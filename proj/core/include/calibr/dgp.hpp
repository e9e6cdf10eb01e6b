#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace calibr {

// Overflow-safe logistic function.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    double z = std::exp(x);
    return z / (1.0 + z);
}

struct DgpConfig {
    std::size_t n = 2000;
    double a1 = 0.1;
    double a2 = 0.05;
    double a3 = 0.2;
    double a4 = -0.05;
    double noise_sd = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticSample {
    double x1, x2, x3, x4;
    double eta;     // linear predictor, noise included
    double p_true;  // sigmoid(eta)
    int d;          // Bernoulli(p_true) outcome
};

enum class DistortionKind { None, Alpha, Gamma };

// Alpha raises the latent probability to a power; Gamma rescales the whole
// linear predictor. value = 1 is the identity for both.
struct DistortionSpec {
    DistortionKind kind = DistortionKind::None;
    double value = 1.0;

    void validate() const;
};

// Draw order per sample is x1..x4, noise, outcome, so streams are stable.
std::vector<SyntheticSample> generate(const DgpConfig& config);

std::vector<double> distort(const std::vector<SyntheticSample>& samples,
                            const DistortionSpec& spec);

std::vector<double> true_probabilities(const std::vector<SyntheticSample>& samples);
std::vector<int> outcomes(const std::vector<SyntheticSample>& samples);

}  // namespace calibr
