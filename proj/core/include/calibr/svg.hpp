#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace calibr::svg {

// Fixed plot geometry: margins 60 px left/bottom, 20 px right, 40 px top for
// the title; axes are drawn over the data range padded by 5%. All coordinates
// are emitted with two decimals, so identical inputs give identical files.
struct Geometry {
    int width = 800;
    int height = 600;
};

struct BoxGroup {
    std::string label;
    std::vector<double> values;
};

// Tukey boxplots per group: quartile box, median line, whiskers at the most
// extreme points within 1.5 IQR, outliers as circles.
std::string boxplot(const std::string& title, std::span<const BoxGroup> groups,
                    const Geometry& geometry = {});

// Line with an optional shaded band and the bisector for reference.
std::string band_chart(const std::string& title, std::span<const double> grid,
                       std::span<const double> center, std::span<const double> lo,
                       std::span<const double> hi, const Geometry& geometry = {},
                       bool bisector = true);

void write_boxplot(const std::string& path, const std::string& title,
                   std::span<const BoxGroup> groups, const Geometry& geometry = {});

void write_band_chart(const std::string& path, const std::string& title,
                      std::span<const double> grid, std::span<const double> center,
                      std::span<const double> lo, std::span<const double> hi,
                      const Geometry& geometry = {}, bool bisector = true);

}  // namespace calibr::svg
