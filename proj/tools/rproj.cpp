// Command-line front end: dataset generation, statistics, projection,
// distances, bound reports and the experiment drivers.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "rproj/config.hpp"
#include "rproj/data.hpp"
#include "rproj/error.hpp"
#include "rproj/experiment.hpp"
#include "rproj/metrics.hpp"
#include "rproj/stein.hpp"
#include "rproj/stiefel.hpp"
#include "rproj/theory.hpp"

namespace {

using rproj::ErrorKind;
using rproj::detail::require;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
};

std::string out_dir(const Globals& g, const std::string& fallback = ".") {
    const std::string dir = g.out.value_or(fallback);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

rproj::ExperimentConfig load_experiment(const Globals& g) {
    require(!g.config.empty(), ErrorKind::config, "this command needs --config <path>");
    auto cfg = rproj::make_config(rproj::read_config_file(g.config));
    if (g.seed) {
        cfg.master_seed = *g.seed;
    }
    if (g.out) {
        cfg.out_dir = *g.out;
    }
    if (g.threads) {
        cfg.threads = *g.threads;
    }
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random projections: Haar frames, distances to Gaussian, bounds and experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "Experiment config file (key = value lines)");
    app.add_option("--seed", g.seed, "Master seed (overrides the config)");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic point cloud CSV");
    std::string gen_kind = "sphere";
    int gen_n = 1000;
    int gen_d = 100;
    double gen_sigma = 1.0;
    double gen_sep = 3.0;
    std::string gen_file = "cloud.csv";
    gen->add_option("--kind", gen_kind, "sphere | gaussian | clustered")
        ->check(CLI::IsMember({"sphere", "gaussian", "clustered"}));
    gen->add_option("-n", gen_n, "Number of points");
    gen->add_option("-d", gen_d, "Dimension");
    gen->add_option("--sigma", gen_sigma, "Scale for the sphere generator");
    gen->add_option("--separation", gen_sep, "Cluster separation for the clustered generator");
    gen->add_option("--file", gen_file, "Output file name inside --out");

    // stats
    auto* stats = app.add_subcommand("stats", "Print sigma, A, B of a cloud and optional condition fractions");
    std::string stats_cloud;
    std::optional<double> stats_eps;
    stats->add_option("cloud", stats_cloud, "Cloud CSV")->required();
    stats->add_option("--eps", stats_eps, "Level for the length / inner-product condition fractions");

    // project
    auto* proj = app.add_subcommand("project", "Project a cloud onto a frame and write the measure CSV");
    std::string proj_cloud;
    std::string proj_frame;
    int proj_k = 1;
    std::string proj_file = "projection.csv";
    proj->add_option("cloud", proj_cloud, "Cloud CSV")->required();
    proj->add_option("--frame", proj_frame, "Frame CSV (k rows); a Haar frame is drawn from --seed otherwise");
    proj->add_option("-k", proj_k, "Frame size when drawing a Haar frame");
    proj->add_option("--file", proj_file, "Output file name inside --out");

    // distance
    auto* dist = app.add_subcommand("distance", "Distance between measures or from a measure to sigma Z");
    std::string dist_mu;
    std::string dist_nu;
    std::optional<double> dist_sigma;
    std::string dist_kind = "w1";
    int dist_m = 4096;
    int dist_reps = 8;
    dist->add_option("mu", dist_mu, "Measure CSV (k coordinates then weight)")->required();
    dist->add_option("--nu", dist_nu, "Second measure CSV");
    dist->add_option("--gaussian", dist_sigma, "Compare with N(0, sigma^2 I) instead of --nu");
    dist->add_option("--kind", dist_kind, "w1 | bl")->check(CLI::IsMember({"w1", "bl"}));
    dist->add_option("-m", dist_m, "Gaussian reference sample size");
    dist->add_option("--reps", dist_reps, "Number of Gaussian reference samples");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "Evaluate the theoretical bounds as a JSON report");
    rproj::BoundInputs bin;
    bin.d = 100;
    bin.k = 1;
    bin.sigma = 1.0;
    bin.b_stat = 1.0;
    bin.eps = 1.0;
    std::string bounds_cloud;
    std::optional<int> sm_m;
    double sm_radius = 1.0;
    double sm_norm = 1.0;
    double sm_lip = 1.0;
    std::string chain_stage;
    std::optional<double> chain_r;
    std::optional<double> chain_t;
    std::optional<int> chain_m;
    bounds->add_option("-d", bin.d, "Ambient dimension");
    bounds->add_option("-k", bin.k, "Projection dimension");
    bounds->add_option("--sigma", bin.sigma, "sigma");
    bounds->add_option("--A", bin.a_stat, "A statistic");
    bounds->add_option("--B", bin.b_stat, "B statistic");
    bounds->add_option("--C", bin.c_const, "The constant C > 1 (no default)");
    bounds->add_option("--eps", bin.eps, "Tail threshold / covering scale");
    bounds->add_option("--cloud", bounds_cloud, "Take d, sigma, A, B from a cloud CSV");
    bounds->add_option("--smooth-m", sm_m, "Smoothness order m: adds covering, Lipschitz and smooth-class bounds");
    bounds->add_option("--radius", sm_radius, "Ball radius R for the smooth class");
    bounds->add_option("--class-radius", sm_norm, "Class radius M");
    bounds->add_option("--lip", sm_lip, "Lipschitz constant L");
    bounds->add_option("--chain", chain_stage, "Also evaluate one bound-chain stage")
        ->check(CLI::IsMember({"finalX", "simpler1", "simpler2", "simplest"}));
    bounds->add_option("--R", chain_r, "Chain parameter R");
    bounds->add_option("--t", chain_t, "Chain parameter t");
    bounds->add_option("--m", chain_m, "Chain parameter m");

    // cover
    auto* cover = app.add_subcommand("cover", "Covering-number bound and its Dudley entropy integral");
    rproj::SmoothnessClassSpec cspec;
    double cover_eps = 1.0;
    std::string cover_norm = "c1";
    std::optional<double> cover_diam;
    double cover_c = 1.0;
    cover->add_option("--dim", cspec.dim, "Dimension of the ball B_R");
    cover->add_option("--smooth-m", cspec.m, "Smoothness order m >= 2");
    cover->add_option("--radius", cspec.radius, "Ball radius R");
    cover->add_option("--eps", cover_eps, "Scale in (0, 2)");
    cover->add_option("--norm", cover_norm, "sup | c1")->check(CLI::IsMember({"sup", "c1"}));
    cover->add_option("--dudley", cover_diam, "Also integrate sqrt(log N) from 0 to this diameter (< 2)");
    cover->add_option("--dudley-c", cover_c, "Constant in front of the entropy integral");

    auto* stein = app.add_subcommand("stein-check", "Exchangeable-pair moment report (config driven)");
    auto* conc = app.add_subcommand("concentration", "Concentration sweep: records.csv and summary.json");
    auto* ann = app.add_subcommand("annealed", "Annealed Wasserstein check: annealed.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            const std::uint64_t seed = g.seed.value_or(1);
            rproj::PointCloud cloud = gen_kind == "sphere"     ? rproj::gen_sphere(gen_n, gen_d, gen_sigma, seed)
                                      : gen_kind == "gaussian" ? rproj::gen_gaussian(gen_n, gen_d, seed)
                                                               : rproj::gen_clustered(gen_n, gen_d, gen_sep, seed);
            const std::string path = join(out_dir(g), gen_file);
            rproj::save_cloud(cloud, path);
            print({{"file", path}, {"n", cloud.size()}, {"d", cloud.dim()}, {"seed", seed}});
        } else if (stats->parsed()) {
            const auto cloud = rproj::load_cloud(stats_cloud);
            const auto s = rproj::compute_stats(cloud);
            nlohmann::json j = {{"n", s.n}, {"d", s.d}, {"sigma", s.sigma}, {"A", s.a_stat}, {"B", s.b_stat}};
            if (stats_eps) {
                const auto f = rproj::df_condition_fractions(cloud, *stats_eps);
                j["eps"] = *stats_eps;
                j["f_len"] = f.f_len;
                j["f_inner"] = f.f_inner;
            }
            print(j);
        } else if (proj->parsed()) {
            const auto cloud = rproj::load_cloud(proj_cloud);
            const rproj::Frame theta = proj_frame.empty()
                                           ? rproj::sample_haar_frame(cloud.dim(), proj_k, g.seed.value_or(1))
                                           : rproj::load_frame(proj_frame);
            const auto mu = rproj::project(cloud, theta);
            const std::string path = join(out_dir(g), proj_file);
            rproj::save_measure(mu, path);
            print({{"file", path}, {"n", mu.size()}, {"k", mu.dim()}});
        } else if (dist->parsed()) {
            const auto mu = rproj::load_measure(dist_mu);
            const auto kind = dist_kind == "w1" ? rproj::DistanceKind::w1 : rproj::DistanceKind::bl;
            require(dist_nu.empty() != !dist_sigma.has_value(), ErrorKind::config,
                    "distance: give exactly one of --nu or --gaussian");
            rproj::DistanceEstimate e;
            if (dist_sigma) {
                rproj::GaussianDistanceOptions opt;
                opt.m = dist_m;
                opt.reps = dist_reps;
                e = rproj::dist_to_gaussian(mu, *dist_sigma, kind, opt, g.seed.value_or(1));
            } else {
                const auto nu = rproj::load_measure(dist_nu);
                e = kind == rproj::DistanceKind::w1 ? rproj::w1_discrete(mu, nu) : rproj::bl_discrete(mu, nu);
            }
            print(rproj::to_json(e));
        } else if (bounds->parsed()) {
            if (!bounds_cloud.empty()) {
                const auto s = rproj::compute_stats(rproj::load_cloud(bounds_cloud));
                bin.d = s.d;
                bin.sigma = s.sigma;
                bin.a_stat = s.a_stat;
                bin.b_stat = s.b_stat;
            }
            std::optional<rproj::SmoothnessClassSpec> spec;
            if (sm_m) {
                spec = rproj::SmoothnessClassSpec{*sm_m, bin.k, sm_radius, sm_norm, sm_lip};
            }
            auto report = rproj::bound_report(bin, spec);
            if (!chain_stage.empty()) {
                const rproj::ChainStage stage = chain_stage == "finalX"     ? rproj::ChainStage::finalX
                                                : chain_stage == "simpler1" ? rproj::ChainStage::simpler1
                                                : chain_stage == "simpler2" ? rproj::ChainStage::simpler2
                                                                            : rproj::ChainStage::simplest;
                require(bin.c_const.has_value(), ErrorKind::config, "bounds: --chain needs --C");
                const auto r = rproj::bl_bound_chain(bin.b_stat, bin.d, bin.k, *bin.c_const, stage,
                                                     rproj::ChainParams{chain_r, chain_t, chain_m});
                report["chain"] = {{"stage", chain_stage}, {"value", r.value}, {"R", r.radius}, {"t", r.t},
                                   {"m", r.m}};
            }
            print(report);
        } else if (cover->parsed()) {
            const auto norm = cover_norm == "sup" ? rproj::CoverNorm::sup : rproj::CoverNorm::c1;
            nlohmann::json j = {{"dim", cspec.dim},
                                {"m", cspec.m},
                                {"radius", cspec.radius},
                                {"norm", cover_norm},
                                {"eps", cover_eps},
                                {"log_cover", rproj::covering_log_bound(cspec, cover_eps, norm)}};
            if (cover_diam) {
                require(*cover_diam > 0.0 && *cover_diam < 2.0, ErrorKind::out_of_regime,
                        "cover: the Dudley diameter must lie in (0, 2)");
                j["dudley"] = rproj::dudley_bound(
                    [&](double e) { return rproj::covering_log_bound(cspec, e, norm); }, *cover_diam, cover_c);
            }
            print(j);
        } else if (stein->parsed()) {
            const auto cfg = load_experiment(g);
            const auto report = rproj::run_stein_check(cfg, g.threads.value_or(cfg.threads));
            const std::string path = join(cfg.out_dir, "stein_check.json");
            rproj::write_summary(report, path);
            print(report);
        } else if (conc->parsed()) {
            const auto cfg = load_experiment(g);
            const auto res = rproj::run_concentration(cfg, g.threads.value_or(cfg.threads));
            rproj::write_records(res.records, join(cfg.out_dir, "records.csv"));
            rproj::write_summary(res.summary, join(cfg.out_dir, "summary.json"));
            std::cout << "wrote " << res.records.size() << " records to " << join(cfg.out_dir, "records.csv")
                      << " and " << join(cfg.out_dir, "summary.json") << '\n';
        } else if (ann->parsed()) {
            const auto cfg = load_experiment(g);
            const auto report = rproj::run_annealed(cfg, g.threads.value_or(cfg.threads));
            rproj::write_summary(report, join(cfg.out_dir, "annealed.json"));
            print(report);
        }
    } catch (const rproj::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return rproj::exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
