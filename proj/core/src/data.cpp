#include "calibr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "calibr/io.hpp"
#include "calibr/rng.hpp"

namespace calibr {

TabularDataset load_table(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
    std::vector<std::string> header = split_line(line);

    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) {
            label_idx = i;
            break;
        }
    }
    if (label_idx == header.size()) {
        throw std::invalid_argument(path + ": label column '" + label_column + "' not found");
    }

    TabularDataset ds;
    ds.label_name = label_column;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i != label_idx) ds.feature_names.push_back(header[i]);
    }
    ds.n_features = ds.feature_names.size();

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw std::invalid_argument(path + ": row " + std::to_string(lineno) +
                                        " has " + std::to_string(cells.size()) +
                                        " cells, expected " + std::to_string(header.size()));
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            auto value = try_parse_double(cells[i]);
            if (!value || std::isnan(*value)) {
                throw std::invalid_argument(path + ": row " + std::to_string(lineno) +
                                            ": non-numeric value '" + cells[i] + "'");
            }
            if (i == label_idx) {
                if (*value != 0.0 && *value != 1.0) {
                    throw std::invalid_argument(path + ": row " + std::to_string(lineno) +
                                                ": non-binary label '" + cells[i] + "'");
                }
                ds.labels.push_back(static_cast<int>(*value));
            } else {
                ds.features.push_back(*value);
            }
        }
        ++ds.n_rows;
    }
    return ds;
}

void save_table(const TabularDataset& dataset, const std::string& path) {
    std::ostringstream os;
    for (std::size_t c = 0; c < dataset.n_features; ++c) {
        os << dataset.feature_names[c] << ',';
    }
    os << dataset.label_name << '\n';
    for (std::size_t r = 0; r < dataset.n_rows; ++r) {
        for (std::size_t c = 0; c < dataset.n_features; ++c) {
            os << format_double(dataset.feature(r, c)) << ',';
        }
        os << dataset.labels[r] << '\n';
    }
    write_file(path, os.str());
}

TabularDataset subset_rows(const TabularDataset& dataset,
                           std::span<const std::size_t> rows) {
    TabularDataset out;
    out.feature_names = dataset.feature_names;
    out.label_name = dataset.label_name;
    out.n_features = dataset.n_features;
    out.n_rows = rows.size();
    out.features.reserve(rows.size() * dataset.n_features);
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= dataset.n_rows) throw std::invalid_argument("subset: row out of range");
        auto row = dataset.row(r);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.labels.push_back(dataset.labels[r]);
    }
    return out;
}

std::vector<std::vector<std::size_t>> partition(std::size_t n_rows,
                                                std::span<const double> fractions,
                                                std::uint64_t seed) {
    if (fractions.empty()) throw std::invalid_argument("partition: no fractions");
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw std::invalid_argument("partition: fractions must be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("partition: fractions must sum to 1");
    }

    // Largest-remainder sizing; remainder ties go to the earlier part.
    const std::size_t parts = fractions.size();
    std::vector<std::size_t> sizes(parts);
    std::vector<std::pair<double, std::size_t>> remainders(parts);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < parts; ++i) {
        double target = fractions[i] * static_cast<double>(n_rows);
        sizes[i] = static_cast<std::size_t>(target);
        remainders[i] = {target - static_cast<double>(sizes[i]), i};
        assigned += sizes[i];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n_rows; ++i) {
        ++sizes[remainders[i % parts].second];
        ++assigned;
    }

    std::vector<std::size_t> order(n_rows);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    std::vector<std::vector<std::size_t>> out(parts);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < parts; ++i) {
        out[i].assign(order.begin() + cursor, order.begin() + cursor + sizes[i]);
        std::sort(out[i].begin(), out[i].end());
        cursor += sizes[i];
    }
    return out;
}

Split split(std::size_t n_rows, const std::array<double, 3>& fractions,
            std::uint64_t seed) {
    auto parts = partition(n_rows, fractions, seed);
    Split s;
    s.train = std::move(parts[0]);
    s.calibration = std::move(parts[1]);
    s.test = std::move(parts[2]);
    s.fractions = fractions;
    s.seed = seed;
    return s;
}

TabularDataset smote(const TabularDataset& dataset, int rate_percent, int k,
                     std::uint64_t seed) {
    if (rate_percent <= 0 || rate_percent % 100 != 0) {
        throw std::invalid_argument("smote: rate must be a positive multiple of 100");
    }
    if (k < 1) throw std::invalid_argument("smote: k must be >= 1");

    std::size_t positives = 0;
    for (int d : dataset.labels) positives += static_cast<std::size_t>(d);
    // Equal counts: treat the positive class as the minority.
    const int minority_label = positives <= dataset.n_rows - positives ? 1 : 0;

    std::vector<std::size_t> minority;
    for (std::size_t r = 0; r < dataset.n_rows; ++r) {
        if (dataset.labels[r] == minority_label) minority.push_back(r);
    }
    if (minority.size() < static_cast<std::size_t>(k) + 1) {
        throw std::invalid_argument("smote: minority class smaller than k+1");
    }

    // k nearest minority neighbors per minority row, ties by row order.
    const std::size_t m = minority.size();
    std::vector<std::vector<std::size_t>> neighbors(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(m - 1);
        auto a = dataset.row(minority[i]);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            auto b = dataset.row(minority[j]);
            double d2 = 0.0;
            for (std::size_t c = 0; c < dataset.n_features; ++c) {
                double diff = a[c] - b[c];
                d2 += diff * diff;
            }
            dist.emplace_back(d2, j);
        }
        std::stable_sort(dist.begin(), dist.end(),
                         [](const auto& x, const auto& y) { return x.first < y.first; });
        neighbors[i].reserve(k);
        for (int t = 0; t < k; ++t) neighbors[i].push_back(dist[t].second);
    }

    TabularDataset out = dataset;
    const int per_row = rate_percent / 100;
    Rng rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        auto base = dataset.row(minority[i]);
        for (int t = 0; t < per_row; ++t) {
            std::size_t nbr = neighbors[i][rng.below(neighbors[i].size())];
            auto other = dataset.row(minority[nbr]);
            for (std::size_t c = 0; c < dataset.n_features; ++c) {
                double gap = rng.uniform01();
                out.features.push_back(base[c] + gap * (other[c] - base[c]));
            }
            out.labels.push_back(minority_label);
            ++out.n_rows;
        }
    }
    return out;
}

}  // namespace calibr
