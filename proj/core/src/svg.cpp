#include "calibr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "calibr/io.hpp"

namespace calibr::svg {

namespace {

constexpr int kMarginLeft = 60;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 60;

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct Scale {
    double lo, hi;
    double pix_lo, pix_hi;
    double operator()(double v) const {
        if (hi == lo) return 0.5 * (pix_lo + pix_hi);
        return pix_lo + (v - lo) / (hi - lo) * (pix_hi - pix_lo);
    }
};

double quantile_sorted(const std::vector<double>& s, double p) {
    if (s.empty()) return 0.0;
    double h = p * static_cast<double>(s.size() - 1);
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo >= s.size() - 1) return s.back();
    return s[lo] + (h - lo) * (s[lo + 1] - s[lo]);
}

void open_svg(std::ostringstream& os, const std::string& title, const Geometry& g) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << g.width
       << "\" height=\"" << g.height << "\" viewBox=\"0 0 " << g.width << ' '
       << g.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << g.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
}

void axis_labels(std::ostringstream& os, const Geometry& g, const Scale& y) {
    for (int t = 0; t <= 4; ++t) {
        double v = y.lo + (y.hi - y.lo) * t / 4.0;
        double yy = y(v);
        os << "<line x1=\"" << kMarginLeft - 4 << "\" y1=\"" << px(yy) << "\" x2=\""
           << g.width - kMarginRight << "\" y2=\"" << px(yy)
           << "\" stroke=\"#dddddd\"/>\n";
        os << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << px(yy + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
           << format_double(std::round(v * 1e4) / 1e4) << "</text>\n";
    }
}

}  // namespace

std::string boxplot(const std::string& title, std::span<const BoxGroup> groups,
                    const Geometry& g) {
    if (groups.empty()) throw std::invalid_argument("boxplot: no groups");
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& grp : groups) {
        for (double v : grp.values) {
            if (!std::isfinite(v)) continue;
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (first) lo = 0.0, hi = 1.0;
    double pad = (hi - lo) * 0.05;
    if (pad == 0.0) pad = std::max(std::abs(hi), 1.0) * 0.05;
    Scale y{lo - pad, hi + pad, static_cast<double>(g.height - kMarginBottom),
            static_cast<double>(kMarginTop)};

    std::ostringstream os;
    open_svg(os, title, g);
    axis_labels(os, g, y);

    const double span_x = g.width - kMarginLeft - kMarginRight;
    const double slot = span_x / static_cast<double>(groups.size());
    const double box_w = std::min(slot * 0.6, 80.0);

    for (std::size_t i = 0; i < groups.size(); ++i) {
        std::vector<double> v;
        for (double x : groups[i].values) {
            if (std::isfinite(x)) v.push_back(x);
        }
        double cx = kMarginLeft + slot * (static_cast<double>(i) + 0.5);
        os << "<text x=\"" << px(cx) << "\" y=\"" << g.height - kMarginBottom + 20
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << groups[i].label << "</text>\n";
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        double q1 = quantile_sorted(v, 0.25);
        double q2 = quantile_sorted(v, 0.5);
        double q3 = quantile_sorted(v, 0.75);
        double iqr = q3 - q1;
        double w_lo = q1, w_hi = q3;
        for (double x : v) {
            if (x >= q1 - 1.5 * iqr) {
                w_lo = x;
                break;
            }
        }
        for (auto it = v.rbegin(); it != v.rend(); ++it) {
            if (*it <= q3 + 1.5 * iqr) {
                w_hi = *it;
                break;
            }
        }
        double x0 = cx - box_w / 2, x1 = cx + box_w / 2;
        os << "<line x1=\"" << px(cx) << "\" y1=\"" << px(y(w_lo)) << "\" x2=\"" << px(cx)
           << "\" y2=\"" << px(y(q1)) << "\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << px(cx) << "\" y1=\"" << px(y(q3)) << "\" x2=\"" << px(cx)
           << "\" y2=\"" << px(y(w_hi)) << "\" stroke=\"black\"/>\n";
        os << "<rect x=\"" << px(x0) << "\" y=\"" << px(y(q3)) << "\" width=\""
           << px(box_w) << "\" height=\"" << px(y(q1) - y(q3))
           << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << px(x0) << "\" y1=\"" << px(y(q2)) << "\" x2=\"" << px(x1)
           << "\" y2=\"" << px(y(q2)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        for (double x : v) {
            if (x < q1 - 1.5 * iqr || x > q3 + 1.5 * iqr) {
                os << "<circle cx=\"" << px(cx) << "\" cy=\"" << px(y(x))
                   << "\" r=\"2\" fill=\"none\" stroke=\"black\"/>\n";
            }
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string band_chart(const std::string& title, std::span<const double> grid,
                       std::span<const double> center, std::span<const double> lo,
                       std::span<const double> hi, const Geometry& g, bool bisector) {
    if (grid.size() != center.size()) throw std::invalid_argument("band_chart: size mismatch");
    const bool has_band = !lo.empty();
    if (has_band && (lo.size() != grid.size() || hi.size() != grid.size())) {
        throw std::invalid_argument("band_chart: band size mismatch");
    }
    if (grid.empty()) throw std::invalid_argument("band_chart: empty grid");

    double ymin = center[0], ymax = center[0];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        ymin = std::min(ymin, has_band ? lo[i] : center[i]);
        ymax = std::max(ymax, has_band ? hi[i] : center[i]);
    }
    if (bisector) {
        ymin = std::min(ymin, grid.front());
        ymax = std::max(ymax, grid.back());
    }
    double pad = (ymax - ymin) * 0.05;
    if (pad == 0.0) pad = 0.05;

    Scale x{grid.front(), grid.back(), static_cast<double>(kMarginLeft),
            static_cast<double>(g.width - kMarginRight)};
    Scale y{ymin - pad, ymax + pad, static_cast<double>(g.height - kMarginBottom),
            static_cast<double>(kMarginTop)};

    std::ostringstream os;
    open_svg(os, title, g);
    axis_labels(os, g, y);

    if (has_band) {
        os << "<path d=\"M";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            os << ' ' << px(x(grid[i])) << ' ' << px(y(lo[i]));
        }
        for (std::size_t i = grid.size(); i-- > 0;) {
            os << ' ' << px(x(grid[i])) << ' ' << px(y(hi[i]));
        }
        os << " Z\" fill=\"#c6dbef\" stroke=\"none\" opacity=\"0.8\"/>\n";
    }
    if (bisector) {
        os << "<line x1=\"" << px(x(grid.front())) << "\" y1=\"" << px(y(grid.front()))
           << "\" x2=\"" << px(x(grid.back())) << "\" y2=\"" << px(y(grid.back()))
           << "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        os << px(x(grid[i])) << ',' << px(y(center[i])) << ' ';
    }
    os << "\"/>\n</svg>\n";
    return os.str();
}

void write_boxplot(const std::string& path, const std::string& title,
                   std::span<const BoxGroup> groups, const Geometry& geometry) {
    write_file(path, boxplot(title, groups, geometry));
}

void write_band_chart(const std::string& path, const std::string& title,
                      std::span<const double> grid, std::span<const double> center,
                      std::span<const double> lo, std::span<const double> hi,
                      const Geometry& geometry, bool bisector) {
    write_file(path, band_chart(title, grid, center, lo, hi, geometry, bisector));
}

}  // namespace calibr::svg
