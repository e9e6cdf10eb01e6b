#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace calibr {

// Rectangular numeric table with one binary label column, row-major.
struct TabularDataset {
    std::vector<std::string> feature_names;
    std::string label_name = "label";
    std::vector<double> features;  // n_rows x n_features
    std::vector<int> labels;
    std::size_t n_rows = 0;
    std::size_t n_features = 0;

    double feature(std::size_t row, std::size_t col) const {
        return features[row * n_features + col];
    }
    std::span<const double> row(std::size_t r) const {
        return {features.data() + r * n_features, n_features};
    }
};

// Comma-separated, UTF-8, header row required. Any non-numeric cell or
// non-binary label fails the load with the offending row number.
TabularDataset load_table(const std::string& path, const std::string& label_column);

void save_table(const TabularDataset& dataset, const std::string& path);

TabularDataset subset_rows(const TabularDataset& dataset,
                           std::span<const std::size_t> rows);

// Uniform random partition; sizes follow the fractions by largest remainder.
// Each part is returned sorted.
std::vector<std::vector<std::size_t>> partition(std::size_t n_rows,
                                                std::span<const double> fractions,
                                                std::uint64_t seed);

struct Split {
    std::vector<std::size_t> train, calibration, test;
    std::array<double, 3> fractions;
    std::uint64_t seed;
};

Split split(std::size_t n_rows, const std::array<double, 3>& fractions,
            std::uint64_t seed);

// Minority oversampling: rate_percent/100 synthetic rows per minority row,
// interpolated towards one of its k nearest minority neighbors with an
// independent uniform fraction per feature. Original rows are untouched.
TabularDataset smote(const TabularDataset& dataset, int rate_percent, int k,
                     std::uint64_t seed);

}  // namespace calibr
