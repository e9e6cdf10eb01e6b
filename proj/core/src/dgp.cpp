#include "calibr/dgp.hpp"

#include <stdexcept>

#include "calibr/rng.hpp"

namespace calibr {

void DgpConfig::validate() const {
    if (n < 1) throw std::invalid_argument("dgp: n must be >= 1");
    if (!(noise_sd > 0.0)) throw std::invalid_argument("dgp: noise_sd must be > 0");
}

void DistortionSpec::validate() const {
    if (kind != DistortionKind::None && !(value > 0.0)) {
        throw std::invalid_argument("distortion: value must be > 0");
    }
}

std::vector<SyntheticSample> generate(const DgpConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::vector<SyntheticSample> samples;
    samples.reserve(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        SyntheticSample s;
        s.x1 = rng.uniform01();
        s.x2 = rng.uniform01();
        s.x3 = rng.uniform01();
        s.x4 = rng.uniform01();
        double eps = rng.normal(0.0, config.noise_sd);
        s.eta = config.a1 * s.x1 + config.a2 * s.x2 + config.a3 * s.x3 -
                config.a4 * s.x4 + eps;
        s.p_true = sigmoid(s.eta);
        s.d = rng.bernoulli(s.p_true) ? 1 : 0;
        samples.push_back(s);
    }
    return samples;
}

std::vector<double> distort(const std::vector<SyntheticSample>& samples,
                            const DistortionSpec& spec) {
    spec.validate();
    std::vector<double> out;
    out.reserve(samples.size());
    // value = 1 must return p_true bit-for-bit.
    if (spec.kind == DistortionKind::None || spec.value == 1.0) {
        for (const auto& s : samples) out.push_back(s.p_true);
        return out;
    }
    if (spec.kind == DistortionKind::Alpha) {
        for (const auto& s : samples) out.push_back(std::pow(s.p_true, spec.value));
    } else {
        for (const auto& s : samples) out.push_back(sigmoid(spec.value * s.eta));
    }
    return out;
}

std::vector<double> true_probabilities(const std::vector<SyntheticSample>& samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.p_true);
    return out;
}

std::vector<int> outcomes(const std::vector<SyntheticSample>& samples) {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.d);
    return out;
}

}  // namespace calibr
