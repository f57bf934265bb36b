#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rwi/common.hpp"

namespace rwi::cli {

// Flat key-value experiment description (UTF-8, `key = value`, `#` comments).
// Round-trips losslessly: doubles are printed with 17 significant digits.
struct ExperimentConfig {
    std::string experiment;  // phase-sweep | coupling-pipeline | bound-check | tabulate-potential
    int d = 3;
    int32_t N = 0;
    double gamma = 0;
    double chi = 0;
    std::vector<double> u_grid;    // single u = one-element grid
    std::vector<double> eps_grid;  // epsilon_N values (pipeline)
    double beta = 0;
    long replicas = 100;
    uint64_t master_seed = 1;
    double kill_radius = 0;  // 0 = default max(5N, N^{1.2})
    double calib_c = 1.0;
    double calib_C = 1.0;
    std::string out_path;

    double kill_radius_or_default() const;
    void validate() const;

    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    std::string to_text() const;
};

// Minimal RFC-4180 CSV: fields quoted only when they contain a comma, quote
// or newline; rows end with \r\n.
class CsvWriter {
public:
    void header(const std::vector<std::string>& cols) { row_of_strings(cols); }
    void row_of_strings(const std::vector<std::string>& fields);
    const std::string& str() const { return buf_; }

    static std::string format(double v);
    static std::string format(long v) { return std::to_string(v); }

private:
    std::string buf_;
};

std::string json_escape(const std::string& s);

// Deterministic insertion-ordered JSON report writer (no external types in
// the interface; experiments assemble reports key by key).
class Report {
public:
    void put(const std::string& key, const std::string& v) { items_.push_back({key, "\"" + json_escape(v) + "\""}); }
    void put(const std::string& key, double v);
    void put(const std::string& key, long v) { items_.push_back({key, std::to_string(v)}); }
    void put(const std::string& key, int v) { items_.push_back({key, std::to_string(v)}); }
    void put(const std::string& key, uint64_t v) { items_.push_back({key, std::to_string(v)}); }
    void put(const std::string& key, bool v) { items_.push_back({key, v ? "true" : "false"}); }
    void put_raw(const std::string& key, const std::string& raw) { items_.push_back({key, raw}); }

    std::string str() const;

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

void write_file(const std::string& path, const std::string& content);

}  // namespace rwi::cli
