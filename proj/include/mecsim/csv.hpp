#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecsim {

// RFC 4180 CSV writer: header row, CRLF line endings, quoting only when a
// cell needs it. Numbers are formatted with shortest-round-trip to_chars so
// identical runs produce identical bytes.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : os_(path, std::ios::binary) {
        if (!os_) throw std::runtime_error("cannot open output file: " + path);
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << escape(cells[i]);
        }
        os_ << "\r\n";
    }

    static std::string num(double v) {
        if (std::isnan(v)) return "nan";
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, r.ptr);
    }

    static std::string num(int v) { return std::to_string(v); }
    static std::string num(long long v) { return std::to_string(v); }
    static std::string num(std::uint64_t v) { return std::to_string(v); }

private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
        return out;
    }

    std::ofstream os_;
};

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;  // 95% t-interval half width
    int n = 0;
};

// Two-sided 95% Student-t critical values, df = 1..30; 1.96 beyond.
inline double t_critical_95(int df) {
    static const double table[30] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                     2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                     2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                     2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
    if (df < 1) return 0.0;
    return df <= 30 ? table[df - 1] : 1.96;
}

inline MeanCi mean_ci95(const std::vector<double>& xs) {
    MeanCi r;
    r.n = static_cast<int>(xs.size());
    if (r.n == 0) return r;
    for (double x : xs) r.mean += x;
    r.mean /= r.n;
    if (r.n < 2) return r;
    double var = 0.0;
    for (double x : xs) var += (x - r.mean) * (x - r.mean);
    var /= (r.n - 1);
    r.half_width = t_critical_95(r.n - 1) * std::sqrt(var / r.n);
    return r;
}

} // namespace mecsim
