#include "calibr/io.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace calibr {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::optional<double> try_parse_double(std::string_view token) {
    // trim ascii whitespace
    size_t b = token.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return std::nullopt;
    size_t e = token.find_last_not_of(" \t\r\n");
    token = token.substr(b, e - b + 1);

    if (token == "nan" || token == "NaN" || token == "NA") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    size_t slash = token.find('/');
    if (slash != std::string_view::npos) {
        auto num = try_parse_double(token.substr(0, slash));
        auto den = try_parse_double(token.substr(slash + 1));
        if (!num || !den || *den == 0.0) return std::nullopt;
        return *num / *den;
    }
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value;
}

double parse_double(std::string_view token) {
    auto v = try_parse_double(token);
    if (!v) {
        throw std::invalid_argument("not a number: '" + std::string(token) + "'");
    }
    return *v;
}

std::vector<std::string> split_line(std::string_view line, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
        out.back().pop_back();
    }
    return out;
}

std::string join(std::span<const std::string> parts, char sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

void write_kv(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ostringstream os;
    for (const auto& [k, v] : entries) {
        os << k << '=' << v << '\n';
    }
    write_file(path, os.str());
}

std::map<std::string, std::string> read_kv(const std::string& path) {
    std::map<std::string, std::string> out;
    std::istringstream is(read_file(path));
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        }
        std::string key = line.substr(b, eq - b);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::string value = line.substr(eq + 1);
        size_t vb = value.find_first_not_of(" \t");
        value = vb == std::string::npos ? "" : value.substr(vb);
        out[key] = value;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace calibr
