#include "rwi/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace rwi::cli {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt17(v[i]);
    }
    return out;
}

}  // namespace

double ExperimentConfig::kill_radius_or_default() const {
    if (kill_radius > 0) return kill_radius;
    return std::max(5.0 * N, std::pow(static_cast<double>(N), 1.2));
}

void ExperimentConfig::validate() const {
    if (experiment.empty()) throw ConfigError("config: experiment name missing");
    if (experiment != "phase-sweep" && experiment != "coupling-pipeline" &&
        experiment != "bound-check" && experiment != "tabulate-potential")
        throw ConfigError("config: unknown experiment '" + experiment + "'");
    if (replicas <= 0) throw ConfigError("config: replicas must be positive");
    for (size_t i = 1; i < u_grid.size(); ++i)
        if (u_grid[i] < u_grid[i - 1]) throw ConfigError("config: u grid must ascend");
    for (double u : u_grid)
        if (u < 0) throw ConfigError("config: u must be nonnegative");
    for (double e : eps_grid)
        if (e < 0) throw ConfigError("config: epsilon must be nonnegative");
    if (beta < 0) throw ConfigError("config: beta must be nonnegative");
    if (experiment != "bound-check") {
        if (N < 2) throw ConfigError("config: N required");
        if (d < 3) throw ConfigError("config: d must be >= 3");
    }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "experiment") c.experiment = val;
            else if (key == "d") c.d = std::stoi(val);
            else if (key == "N") c.N = std::stoi(val);
            else if (key == "gamma") c.gamma = std::stod(val);
            else if (key == "chi") c.chi = std::stod(val);
            else if (key == "u" || key == "u_grid") c.u_grid = parse_list(val);
            else if (key == "epsilon" || key == "eps_grid") c.eps_grid = parse_list(val);
            else if (key == "beta") c.beta = std::stod(val);
            else if (key == "replicas") c.replicas = std::stol(val);
            else if (key == "seed" || key == "master_seed") c.master_seed = std::stoull(val);
            else if (key == "kill_radius") c.kill_radius = std::stod(val);
            else if (key == "calib_c") c.calib_c = std::stod(val);
            else if (key == "calib_C") c.calib_C = std::stod(val);
            else if (key == "out") c.out_path = val;
            else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    out += "experiment = " + experiment + "\n";
    out += "d = " + std::to_string(d) + "\n";
    out += "N = " + std::to_string(N) + "\n";
    out += "gamma = " + fmt17(gamma) + "\n";
    out += "chi = " + fmt17(chi) + "\n";
    out += "u_grid = " + format_list(u_grid) + "\n";
    out += "eps_grid = " + format_list(eps_grid) + "\n";
    out += "beta = " + fmt17(beta) + "\n";
    out += "replicas = " + std::to_string(replicas) + "\n";
    out += "master_seed = " + std::to_string(master_seed) + "\n";
    out += "kill_radius = " + fmt17(kill_radius) + "\n";
    out += "calib_c = " + fmt17(calib_c) + "\n";
    out += "calib_C = " + fmt17(calib_C) + "\n";
    if (!out_path.empty()) out += "out = " + out_path + "\n";
    return out;
}

void CsvWriter::row_of_strings(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) buf_ += ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            buf_ += '"';
            for (char c : f) {
                if (c == '"') buf_ += '"';
                buf_ += c;
            }
            buf_ += '"';
        } else {
            buf_ += f;
        }
    }
    buf_ += "\r\n";
}

std::string CsvWriter::format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

void Report::put(const std::string& key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    items_.push_back({key, buf});
}

std::string Report::str() const {
    std::string out = "{\n";
    for (size_t i = 0; i < items_.size(); ++i) {
        out += "  \"" + json_escape(items_[i].first) + "\": " + items_[i].second;
        if (i + 1 < items_.size()) out += ",";
        out += "\n";
    }
    out += "}\n";
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << content;
}

}  // namespace rwi::cli
