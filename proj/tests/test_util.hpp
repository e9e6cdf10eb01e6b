#pragma once

#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <string>
#include <vector>

#include "calibr/metrics.hpp"
#include "calibr/rng.hpp"

namespace testutil {

// Scratch directory removed when the fixture goes out of scope.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("calibr_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline calibr::LabeledScores random_scores(std::size_t n, calibr::Rng& rng,
                                           bool discrete = false) {
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = discrete ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform01();
        labels[i] = rng.bernoulli(scores[i]) ? 1 : 0;
    }
    return calibr::LabeledScores::validated(std::move(scores), std::move(labels));
}

}  // namespace testutil
