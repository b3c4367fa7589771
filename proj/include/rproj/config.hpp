#pragma once

// Experiment configuration: flat `key = value` lines, `#` comments, lists
// separated by commas.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rproj/csv.hpp"
#include "rproj/error.hpp"

namespace rproj {

struct Cell {
    int d = 0;
    int k = 0;
    bool operator==(const Cell&) const = default;
};

enum class KRule { fixed, sqrt_log, log };

struct DatasetSpec {
    std::string kind = "sphere"; // sphere | gaussian | clustered | file
    std::optional<int> n;        // fixed size; otherwise ceil(n_factor * d)
    double n_factor = 10.0;
    double sigma = 1.0;
    double separation = 3.0;
    std::uint64_t seed = 1;
    std::string path;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    std::vector<Cell> grid;
    int frames_per_cell = 100;
    int gaussian_m = 4096;
    int gaussian_reps = 8;
    std::vector<double> eps_list;
    std::optional<double> c_const;
    std::uint64_t master_seed = 0;
    std::string out_dir = ".";
    int threads = 0;
    bool timing = false;
    bool annealed = true;

    // stein-check
    int stein_d = 10;
    int stein_k = 2;
    std::vector<double> stein_eps = {0.2, 0.1, 0.05, 0.025};
    std::int64_t stein_trials = 1000000;
    std::int64_t q_trials = 1000000;
};

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

template <class T>
T parse_integer(const std::string& key, const std::string& v) {
    T out{};
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(!v.empty() && res.ec == std::errc() && res.ptr == v.data() + v.size(), ErrorKind::config,
            "config: " + key + ": not an integer: '" + v + "'");
    return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(!v.empty() && res.ec == std::errc() && res.ptr == v.data() + v.size() && std::isfinite(out),
            ErrorKind::config, "config: " + key + ": not a number: '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    fail(ErrorKind::config, "config: " + key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_reals(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) {
        out.push_back(parse_real(key, item));
    }
    return out;
}

} // namespace detail

inline ConfigMap parse_config_text(const std::string& text, const std::string& origin = "config") {
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string body = detail::trim(line);
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        detail::require(eq != std::string::npos, ErrorKind::config,
                        origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        detail::require(!key.empty(), ErrorKind::config, origin + ":" + std::to_string(line_no) + ": empty key");
        detail::require(!out.count(key), ErrorKind::config,
                        origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        out[key] = value;
    }
    return out;
}

inline ConfigMap read_config_file(const std::string& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorKind::config, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

/// k for dimension d under a growth rule: ceil(c sqrt(log d)) or ceil(c log d).
inline int k_for(KRule rule, double c, int d) {
    const double ld = std::log(static_cast<double>(d));
    const double raw = (rule == KRule::sqrt_log) ? c * std::sqrt(ld) : c * ld;
    return static_cast<int>(std::ceil(raw));
}

/// Builds and validates a configuration. Unknown keys are rejected so typos
/// never pass silently.
inline ExperimentConfig make_config(const ConfigMap& map) {
    static const std::set<std::string> known = {
        "dataset",       "dataset_path",  "n",           "n_factor",      "dataset_sigma", "separation",
        "dataset_seed",  "grid",          "d_list",      "k",             "k_rule",        "k_const",
        "frames_per_cell", "gaussian_m",  "gaussian_reps", "eps_list",    "c_const",       "master_seed",
        "out_dir",       "threads",       "timing",      "annealed",      "stein_d",       "stein_k",
        "stein_eps",     "stein_trials",  "q_trials"};
    for (const auto& [key, value] : map) {
        detail::require(known.count(key) > 0, ErrorKind::config, "config: unknown key '" + key + "'");
    }
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto it = map.find(key);
        if (it == map.end()) {
            return std::nullopt;
        }
        return it->second;
    };

    ExperimentConfig c;
    if (auto v = get("dataset")) {
        c.dataset.kind = *v;
    }
    detail::require(c.dataset.kind == "sphere" || c.dataset.kind == "gaussian" || c.dataset.kind == "clustered" ||
                        c.dataset.kind == "file",
                    ErrorKind::config, "config: dataset must be sphere, gaussian, clustered or file");
    if (auto v = get("dataset_path")) {
        c.dataset.path = *v;
    }
    detail::require(c.dataset.kind != "file" || !c.dataset.path.empty(), ErrorKind::config,
                    "config: dataset = file needs dataset_path");
    if (auto v = get("n")) {
        c.dataset.n = detail::parse_integer<int>("n", *v);
        detail::require(*c.dataset.n >= 1, ErrorKind::config, "config: n must be >= 1");
    }
    if (auto v = get("n_factor")) {
        c.dataset.n_factor = detail::parse_real("n_factor", *v);
        detail::require(c.dataset.n_factor > 0.0, ErrorKind::config, "config: n_factor must be positive");
    }
    if (auto v = get("dataset_sigma")) {
        c.dataset.sigma = detail::parse_real("dataset_sigma", *v);
        detail::require(c.dataset.sigma > 0.0, ErrorKind::config, "config: dataset_sigma must be positive");
    }
    if (auto v = get("separation")) {
        c.dataset.separation = detail::parse_real("separation", *v);
        detail::require(c.dataset.separation > 0.0, ErrorKind::config, "config: separation must be positive");
    }
    if (auto v = get("dataset_seed")) {
        c.dataset.seed = detail::parse_integer<std::uint64_t>("dataset_seed", *v);
    }

    // Grid: explicit "d x k" pairs, or d_list with a fixed k or a growth rule.
    if (auto v = get("grid")) {
        detail::require(!get("d_list"), ErrorKind::config, "config: give either grid or d_list, not both");
        for (const auto& item : detail::split_list(*v)) {
            const auto x = item.find('x');
            detail::require(x != std::string::npos, ErrorKind::config,
                            "config: grid entries look like 64x2, got '" + item + "'");
            Cell cell;
            cell.d = detail::parse_integer<int>("grid", detail::trim(item.substr(0, x)));
            cell.k = detail::parse_integer<int>("grid", detail::trim(item.substr(x + 1)));
            c.grid.push_back(cell);
        }
    } else if (auto v = get("d_list")) {
        KRule rule = KRule::fixed;
        if (auto r = get("k_rule")) {
            if (*r == "sqrt_log") {
                rule = KRule::sqrt_log;
            } else if (*r == "log") {
                rule = KRule::log;
            } else {
                detail::require(*r == "fixed", ErrorKind::config, "config: k_rule must be fixed, sqrt_log or log");
            }
        }
        int fixed_k = 0;
        double kc = 0.0;
        if (rule == KRule::fixed) {
            auto kv = get("k");
            detail::require(kv.has_value(), ErrorKind::config, "config: d_list needs k or a k_rule");
            fixed_k = detail::parse_integer<int>("k", *kv);
        } else {
            auto kv = get("k_const");
            detail::require(kv.has_value(), ErrorKind::config, "config: k_rule needs k_const");
            kc = detail::parse_real("k_const", *kv);
            detail::require(kc > 0.0, ErrorKind::config, "config: k_const must be positive");
        }
        for (const auto& item : detail::split_list(*v)) {
            Cell cell;
            cell.d = detail::parse_integer<int>("d_list", item);
            detail::require(cell.d >= 1, ErrorKind::config, "config: every d must be >= 1");
            cell.k = (rule == KRule::fixed) ? fixed_k : k_for(rule, kc, cell.d);
            c.grid.push_back(cell);
        }
    }
    for (const auto& cell : c.grid) {
        detail::require(cell.k >= 1 && cell.k <= cell.d, ErrorKind::config,
                        "config: grid cell d=" + std::to_string(cell.d) + " k=" + std::to_string(cell.k) +
                            " violates 1 <= k <= d");
    }

    if (auto v = get("frames_per_cell")) {
        c.frames_per_cell = detail::parse_integer<int>("frames_per_cell", *v);
    }
    detail::require(c.frames_per_cell >= 1, ErrorKind::config, "config: frames_per_cell must be >= 1");
    if (auto v = get("gaussian_m")) {
        c.gaussian_m = detail::parse_integer<int>("gaussian_m", *v);
    }
    detail::require(c.gaussian_m >= 1, ErrorKind::config, "config: gaussian_m must be >= 1");
    if (auto v = get("gaussian_reps")) {
        c.gaussian_reps = detail::parse_integer<int>("gaussian_reps", *v);
    }
    detail::require(c.gaussian_reps >= 1, ErrorKind::config, "config: gaussian_reps must be >= 1");
    if (auto v = get("eps_list")) {
        c.eps_list = detail::parse_reals("eps_list", *v);
        for (double e : c.eps_list) {
            detail::require(e > 0.0, ErrorKind::config, "config: eps_list entries must be positive");
        }
    }
    if (auto v = get("c_const")) {
        c.c_const = detail::parse_real("c_const", *v);
        detail::require(*c.c_const > 1.0, ErrorKind::config, "config: c_const must exceed 1");
    }
    if (auto v = get("master_seed")) {
        c.master_seed = detail::parse_integer<std::uint64_t>("master_seed", *v);
    }
    if (auto v = get("out_dir")) {
        c.out_dir = *v;
    }
    if (auto v = get("threads")) {
        c.threads = detail::parse_integer<int>("threads", *v);
        detail::require(c.threads >= 0, ErrorKind::config, "config: threads must be >= 0");
    }
    if (auto v = get("timing")) {
        c.timing = detail::parse_bool("timing", *v);
    }
    if (auto v = get("annealed")) {
        c.annealed = detail::parse_bool("annealed", *v);
    }
    if (auto v = get("stein_d")) {
        c.stein_d = detail::parse_integer<int>("stein_d", *v);
    }
    if (auto v = get("stein_k")) {
        c.stein_k = detail::parse_integer<int>("stein_k", *v);
    }
    detail::require(c.stein_d >= 2 && c.stein_k >= 1 && c.stein_k <= c.stein_d, ErrorKind::config,
                    "config: need 1 <= stein_k <= stein_d and stein_d >= 2");
    if (auto v = get("stein_eps")) {
        c.stein_eps = detail::parse_reals("stein_eps", *v);
        for (double e : c.stein_eps) {
            detail::require(e > 0.0 && e < 1.0, ErrorKind::config, "config: stein_eps entries must lie in (0,1)");
        }
    }
    if (auto v = get("stein_trials")) {
        c.stein_trials = detail::parse_integer<std::int64_t>("stein_trials", *v);
    }
    if (auto v = get("q_trials")) {
        c.q_trials = detail::parse_integer<std::int64_t>("q_trials", *v);
    }
    detail::require(c.stein_trials >= 1 && c.q_trials >= 1, ErrorKind::config,
                    "config: stein_trials and q_trials must be >= 1");
    return c;
}

inline std::string format_grid(const std::vector<Cell>& grid) {
    std::string out;
    for (const auto& cell : grid) {
        if (!out.empty()) {
            out += ",";
        }
        out += std::to_string(cell.d) + "x" + std::to_string(cell.k);
    }
    return out;
}

} // namespace rproj
