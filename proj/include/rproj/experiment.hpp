#pragma once

// Experiment orchestration: concentration sweeps over (d, k) grids, the
// annealed Wasserstein check and the exchangeable-pair report, plus their
// CSV / JSON outputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "rproj/config.hpp"
#include "rproj/csv.hpp"
#include "rproj/data.hpp"
#include "rproj/error.hpp"
#include "rproj/metrics.hpp"
#include "rproj/parallel.hpp"
#include "rproj/rng.hpp"
#include "rproj/stein.hpp"
#include "rproj/stiefel.hpp"
#include "rproj/theory.hpp"

namespace rproj {

struct ConcentrationRecord {
    int d = 0;
    int k = 0;
    int frame_index = 0;
    std::uint64_t frame_seed = 0;
    double bl_est = 0.0;
    double bl_stderr = 0.0;
    double w1_est = 0.0;
    std::int64_t runtime_ms = 0;
    bool operator==(const ConcentrationRecord&) const = default;
};

inline constexpr const char* kRecordsHeader = "d,k,frame_index,frame_seed,bl_est,bl_stderr,w1_est,runtime_ms";

/// Seed of frame i in cell (d, k).
inline std::uint64_t frame_seed(std::uint64_t master, int d, int k, int i) {
    return derive_seed(master, {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(i)});
}

namespace detail {

inline constexpr std::uint64_t kReferenceTag = 0xffffffffffffff01ULL;
inline constexpr std::uint64_t kNoiseTag = 0xffffffffffffff02ULL;
inline constexpr std::uint64_t kSteinFrameTag = 0xffffffffffffff03ULL;
inline constexpr std::uint64_t kSteinPairTag = 0xffffffffffffff04ULL;
inline constexpr std::uint64_t kSteinQTag = 0xffffffffffffff05ULL;
inline constexpr std::uint64_t kSteinFTag = 0xffffffffffffff06ULL;

inline std::uint64_t cell_seed(std::uint64_t master, const Cell& c, std::uint64_t tag) {
    return derive_seed(master, {static_cast<std::uint64_t>(c.d), static_cast<std::uint64_t>(c.k), tag});
}

} // namespace detail

/// Gaussian reference samples are shared by all frames of a cell, so the
/// spread across frames reflects the frames and not the references.
inline std::uint64_t reference_seed_for_cell(std::uint64_t master, const Cell& c) {
    return detail::cell_seed(master, c, detail::kReferenceTag);
}

inline int dataset_size(const DatasetSpec& spec, int d) {
    if (spec.n) {
        return *spec.n;
    }
    return static_cast<int>(std::ceil(spec.n_factor * d));
}

inline PointCloud make_dataset(const DatasetSpec& spec, int d) {
    if (spec.kind == "file") {
        PointCloud cloud = load_cloud(spec.path);
        detail::require(cloud.dim() == d, ErrorKind::config,
                        "config: dataset file has d=" + std::to_string(cloud.dim()) + " but the grid asks for d=" +
                            std::to_string(d));
        return cloud;
    }
    const int n = dataset_size(spec, d);
    const std::uint64_t seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(d)});
    if (spec.kind == "sphere") {
        return gen_sphere(n, d, spec.sigma, seed);
    }
    if (spec.kind == "gaussian") {
        return gen_gaussian(n, d, seed);
    }
    return gen_clustered(n, d, spec.separation, seed);
}

struct CellContext {
    Cell cell;
    PointCloud cloud;
    CloudStats stats;
};

inline std::vector<CellContext> prepare_cells(const ExperimentConfig& cfg) {
    detail::require(!cfg.grid.empty(), ErrorKind::config, "config: the grid is empty");
    std::vector<CellContext> out;
    out.reserve(cfg.grid.size());
    for (const auto& cell : cfg.grid) {
        detail::require(cell.k >= 1 && cell.k <= cell.d, ErrorKind::config,
                        "config: grid cell violates 1 <= k <= d");
        PointCloud cloud = make_dataset(cfg.dataset, cell.d);
        const CloudStats st = compute_stats(cloud);
        out.push_back(CellContext{cell, std::move(cloud), st});
    }
    return out;
}

inline GaussianDistanceOptions distance_options(const ExperimentConfig& cfg) {
    GaussianDistanceOptions opt;
    opt.m = cfg.gaussian_m;
    opt.reps = cfg.gaussian_reps;
    opt.exact_1d = true;
    return opt;
}

inline ConcentrationRecord concentration_record(const ExperimentConfig& cfg, const CellContext& ctx, int i) {
    const auto start = std::chrono::steady_clock::now();
    ConcentrationRecord r;
    r.d = ctx.cell.d;
    r.k = ctx.cell.k;
    r.frame_index = i;
    r.frame_seed = frame_seed(cfg.master_seed, r.d, r.k, i);
    const Frame theta = sample_haar_frame(r.d, r.k, r.frame_seed);
    const EmpiricalMeasure mu = project(ctx.cloud, theta);
    const auto opt = distance_options(cfg);
    const std::uint64_t ref = reference_seed_for_cell(cfg.master_seed, ctx.cell);
    const auto bl = dist_to_gaussian(mu, ctx.stats.sigma, DistanceKind::bl, opt, ref);
    const auto w1 = dist_to_gaussian(mu, ctx.stats.sigma, DistanceKind::w1, opt, ref);
    r.bl_est = bl.value;
    r.bl_stderr = bl.std_error.value_or(std::numeric_limits<double>::quiet_NaN());
    r.w1_est = w1.value;
    if (cfg.timing) {
        r.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                           .count();
    }
    return r;
}

/// Linear-interpolation quantile of sorted data, q in [0, 1].
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
    detail::require(!sorted.empty(), ErrorKind::invalid_input, "quantile of empty sample");
    const double pos = q * (sorted.size() - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

struct AnnealedResult {
    double w1 = 0.0;
    double bound = 0.0;
    double noise_floor = 0.0;
    int pooled_size = 0;
    int used_size = 0;
    bool within() const { return w1 <= bound + 2.0 * noise_floor; }
};

inline nlohmann::json to_json(const AnnealedResult& a) {
    return {{"w1", a.w1},
            {"bound", a.bound},
            {"noise_floor", a.noise_floor},
            {"pooled_size", a.pooled_size},
            {"used_size", a.used_size},
            {"within_bound_plus_2_noise", a.within()}};
}

/// Wasserstein distance from the frame-averaged projected law to sigma Z.
///
/// k = 1 pools all n*T projections and uses the exact 1-D distance. For k >= 2
/// the pool is thinned to gaussian_m evenly spaced points before the LP. The
/// noise floor is the same estimator applied to a Gaussian sample of the
/// size actually used.
inline AnnealedResult run_annealed_cell(const ExperimentConfig& cfg, const CellContext& ctx, int threads) {
    const int d = ctx.cell.d;
    const int k = ctx.cell.k;
    const int n = ctx.cloud.size();
    const int frames = cfg.frames_per_cell;
    detail::require(frames >= 1, ErrorKind::config, "config: frames_per_cell must be >= 1");
    Eigen::MatrixXd pooled(static_cast<Eigen::Index>(n) * frames, k);
    parallel_for(static_cast<std::size_t>(frames), threads, [&](std::size_t i) {
        const Frame theta = sample_haar_frame(d, k, frame_seed(cfg.master_seed, d, k, static_cast<int>(i)));
        pooled.middleRows(static_cast<Eigen::Index>(i) * n, n) = ctx.cloud.points() * theta.rows().transpose();
    });

    AnnealedResult out;
    out.pooled_size = static_cast<int>(pooled.rows());
    BoundInputs in;
    in.d = d;
    in.k = k;
    in.sigma = ctx.stats.sigma;
    in.a_stat = ctx.stats.a_stat;
    in.b_stat = ctx.stats.b_stat;
    out.bound = mean_w1_bound(in);

    const std::uint64_t noise_seed = detail::cell_seed(cfg.master_seed, ctx.cell, detail::kNoiseTag);
    const double sigma = ctx.stats.sigma;
    if (k == 1) {
        out.used_size = out.pooled_size;
        out.w1 = w1_exact_1d(EmpiricalMeasure::uniform(std::move(pooled)), sigma).value;
        out.noise_floor = w1_exact_1d(gaussian_sample(1, sigma, out.used_size, noise_seed), sigma).value;
        return out;
    }
    const Eigen::Index total = pooled.rows();
    const Eigen::Index used = std::min<Eigen::Index>(cfg.gaussian_m, total);
    Eigen::MatrixXd thin(used, k);
    for (Eigen::Index j = 0; j < used; ++j) {
        thin.row(j) = pooled.row(j * total / used);
    }
    out.used_size = static_cast<int>(used);
    const auto opt = distance_options(cfg);
    const std::uint64_t ref = reference_seed_for_cell(cfg.master_seed, ctx.cell);
    out.w1 = dist_to_gaussian(EmpiricalMeasure::uniform(std::move(thin)), sigma, DistanceKind::w1, opt, ref).value;
    out.noise_floor =
        dist_to_gaussian(gaussian_sample(k, sigma, out.used_size, noise_seed), sigma, DistanceKind::w1, opt, ref).value;
    return out;
}

struct CellSummary {
    Cell cell;
    CloudStats stats;
    double mean_bl = 0.0;
    double median_bl = 0.0;
    double iqr_bl = 0.0;
    double std_bl = 0.0;
    nlohmann::json tails = nlohmann::json::array();
    std::optional<AnnealedResult> annealed;
};

inline CellSummary summarize_cell(const ExperimentConfig& cfg, const CellContext& ctx,
                                  const std::vector<ConcentrationRecord>& recs) {
    CellSummary s;
    s.cell = ctx.cell;
    s.stats = ctx.stats;
    std::vector<double> v;
    v.reserve(recs.size());
    for (const auto& r : recs) {
        v.push_back(r.bl_est);
    }
    const double t = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    s.mean_bl = sum / t;
    double ss = 0.0;
    for (double x : v) {
        ss += (x - s.mean_bl) * (x - s.mean_bl);
    }
    s.std_bl = v.size() > 1 ? std::sqrt(ss / (t - 1.0)) : 0.0;
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    s.median_bl = sorted_quantile(sorted, 0.5);
    s.iqr_bl = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);

    for (double eps : cfg.eps_list) {
        std::int64_t above = 0;
        for (double x : v) {
            above += (x - s.mean_bl > eps);
        }
        BoundInputs in;
        in.d = ctx.cell.d;
        in.k = ctx.cell.k;
        in.sigma = ctx.stats.sigma;
        in.a_stat = ctx.stats.a_stat;
        in.b_stat = ctx.stats.b_stat;
        in.c_const = cfg.c_const;
        in.eps = eps;
        nlohmann::json tail = {{"eps", eps}, {"empirical", static_cast<double>(above) / t}};
        try {
            const double b = conc_tail(in);
            tail["conc_bound"] = b;
            tail["conc_is_vacuous"] = b >= 1.0;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::out_of_regime) {
                throw;
            }
            tail["conc_bound"] = nullptr;
            tail["conc_out_of_regime"] = e.what();
        }
        if (cfg.c_const && in.d >= 2) {
            try {
                const double b = combined_tail(in);
                tail["combined_bound"] = b;
                tail["combined_is_vacuous"] = b >= 1.0;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::out_of_regime) {
                    throw;
                }
                tail["combined_bound"] = nullptr;
                tail["combined_out_of_regime"] = e.what();
            }
        } else {
            tail["combined_bound"] = nullptr;
        }
        s.tails.push_back(tail);
    }
    return s;
}

inline nlohmann::json to_json(const CellSummary& s) {
    nlohmann::json j = {{"d", s.cell.d},
                        {"k", s.cell.k},
                        {"n", s.stats.n},
                        {"sigma", s.stats.sigma},
                        {"A", s.stats.a_stat},
                        {"B", s.stats.b_stat},
                        {"mean_bl", s.mean_bl},
                        {"median_bl", s.median_bl},
                        {"iqr_bl", s.iqr_bl},
                        {"std_bl", s.std_bl},
                        {"tails", s.tails}};
    j["annealed"] = s.annealed ? to_json(*s.annealed) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json config_metadata(const ExperimentConfig& cfg) {
    nlohmann::json ds = {{"kind", cfg.dataset.kind}, {"seed", cfg.dataset.seed}};
    if (cfg.dataset.kind == "file") {
        ds["path"] = cfg.dataset.path;
    } else {
        ds["n_rule"] = cfg.dataset.n ? "fixed n = " + std::to_string(*cfg.dataset.n)
                                     : "n = ceil(" + csv::format_double(cfg.dataset.n_factor) + " * d)";
        ds["sigma"] = cfg.dataset.sigma;
        if (cfg.dataset.kind == "clustered") {
            ds["separation"] = cfg.dataset.separation;
        }
    }
    return {{"master_seed", cfg.master_seed},
            {"dataset", ds},
            {"grid", format_grid(cfg.grid)},
            {"frames_per_cell", cfg.frames_per_cell},
            {"gaussian_m", cfg.gaussian_m},
            {"gaussian_reps", cfg.gaussian_reps},
            {"eps_list", cfg.eps_list},
            {"c_const", cfg.c_const ? nlohmann::json(*cfg.c_const) : nlohmann::json(nullptr)},
            {"timing", cfg.timing},
            {"frame_seed_rule", "derive_seed(master_seed, {d, k, frame_index})"}};
}

struct ConcentrationResult {
    std::vector<ConcentrationRecord> records;
    std::vector<CellSummary> cells;
    nlohmann::json summary;
};

/// Work is spread over (cell, frame) items; records and reductions follow the
/// canonical (d, k, frame_index) order whatever the scheduling.
inline ConcentrationResult run_concentration(const ExperimentConfig& cfg, int threads) {
    const auto contexts = prepare_cells(cfg);
    const int frames = cfg.frames_per_cell;
    const std::size_t total = contexts.size() * static_cast<std::size_t>(frames);
    ConcentrationResult out;
    out.records.resize(total);
    parallel_for(total, threads, [&](std::size_t item) {
        const auto& ctx = contexts[item / frames];
        out.records[item] = concentration_record(cfg, ctx, static_cast<int>(item % frames));
    });

    out.cells.resize(contexts.size());
    for (std::size_t c = 0; c < contexts.size(); ++c) {
        const std::vector<ConcentrationRecord> recs(out.records.begin() + c * frames,
                                                    out.records.begin() + (c + 1) * frames);
        out.cells[c] = summarize_cell(cfg, contexts[c], recs);
        if (cfg.annealed) {
            out.cells[c].annealed = run_annealed_cell(cfg, contexts[c], threads);
        }
    }
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& s : out.cells) {
        cells.push_back(to_json(s));
    }
    out.summary = {{"metadata", config_metadata(cfg)}, {"cells", cells}};
    return out;
}

inline nlohmann::json run_annealed(const ExperimentConfig& cfg, int threads) {
    const auto contexts = prepare_cells(cfg);
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& ctx : contexts) {
        const AnnealedResult a = run_annealed_cell(cfg, ctx, threads);
        cells.push_back({{"d", ctx.cell.d},
                         {"k", ctx.cell.k},
                         {"n", ctx.stats.n},
                         {"sigma", ctx.stats.sigma},
                         {"A", ctx.stats.a_stat},
                         {"B", ctx.stats.b_stat},
                         {"annealed", to_json(a)}});
    }
    return {{"metadata", config_metadata(cfg)}, {"cells", cells}};
}

/// Pair moments over the configured amplitudes for one data vector and frame,
/// the remainder-ratio table, the F-matrix check and, for stein_d <= 12, the
/// Q moment identities.
inline nlohmann::json run_stein_check(const ExperimentConfig& cfg, int threads) {
    detail::require(!cfg.stein_eps.empty(), ErrorKind::config, "config: stein_eps is empty");
    const int d = cfg.stein_d;
    const int k = cfg.stein_k;
    const PointCloud cloud = make_dataset(cfg.dataset, d);
    const Eigen::VectorXd x = cloud.points().row(0).transpose();
    const Frame theta = sample_haar_frame(d, k, derive_seed(cfg.master_seed, {detail::kSteinFrameTag}));
    const auto reports = estimate_pair_moments_grid(x, theta, cfg.stein_eps, cfg.stein_trials,
                                                    derive_seed(cfg.master_seed, {detail::kSteinPairTag}), threads);
    const auto ratios = drift_remainder_ratios(reports);

    nlohmann::json pairs = nlohmann::json::array();
    nlohmann::json table = nlohmann::json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        pairs.push_back(to_json(reports[i]));
        nlohmann::json row = {{"eps", reports[i].eps}, {"remainder_over_eps4", ratios[i]}};
        row["ratio_to_previous"] = i == 0 ? nlohmann::json(nullptr) : nlohmann::json(ratios[i] / ratios[i - 1]);
        table.push_back(row);
    }
    const auto fb = f_bound_check(cloud, k, 1000, derive_seed(cfg.master_seed, {detail::kSteinFTag}));
    nlohmann::json out = {{"metadata", config_metadata(cfg)},
                          {"d", d},
                          {"k", k},
                          {"x_norm", x.norm()},
                          {"pair_moments", pairs},
                          {"remainder_table", table},
                          {"f_bound_check",
                           {{"empirical_mean", fb.empirical_mean},
                            {"std_error", fb.std_error},
                            {"bound", fb.bound},
                            {"samples", fb.samples},
                            {"holds", fb.holds()}}}};
    if (d <= 12 && d >= 3) {
        out["q_moment_check"] =
            to_json(q_moment_check(d, cfg.q_trials, derive_seed(cfg.master_seed, {detail::kSteinQTag}), threads));
    }
    return out;
}

inline std::string records_to_csv(const std::vector<ConcentrationRecord>& records) {
    std::ostringstream out;
    out << kRecordsHeader << '\n';
    for (const auto& r : records) {
        out << r.d << ',' << r.k << ',' << r.frame_index << ',' << r.frame_seed << ',' << csv::format_double(r.bl_est)
            << ',' << csv::format_double(r.bl_stderr) << ',' << csv::format_double(r.w1_est) << ',' << r.runtime_ms
            << '\n';
    }
    return out.str();
}

inline void write_records(const std::vector<ConcentrationRecord>& records, const std::string& path) {
    csv::write_text(path, records_to_csv(records));
}

inline std::vector<ConcentrationRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorKind::invalid_input, "cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    detail::require(line == kRecordsHeader, ErrorKind::parse, path + ": unexpected records header");
    std::vector<ConcentrationRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) {
            f.push_back(detail::trim(item));
        }
        detail::require(f.size() == 8, ErrorKind::parse, path + ": line " + std::to_string(line_no) + ": expected 8 fields");
        ConcentrationRecord r;
        r.d = detail::parse_integer<int>("d", f[0]);
        r.k = detail::parse_integer<int>("k", f[1]);
        r.frame_index = detail::parse_integer<int>("frame_index", f[2]);
        r.frame_seed = detail::parse_integer<std::uint64_t>("frame_seed", f[3]);
        r.bl_est = csv::parse_double(f[4], line_no);
        r.bl_stderr = csv::parse_double(f[5], line_no);
        r.w1_est = csv::parse_double(f[6], line_no);
        r.runtime_ms = detail::parse_integer<std::int64_t>("runtime_ms", f[7]);
        out.push_back(r);
    }
    return out;
}

inline void write_summary(const nlohmann::json& summary, const std::string& path) {
    csv::write_text(path, summary.dump(2) + "\n");
}

} // namespace rproj
