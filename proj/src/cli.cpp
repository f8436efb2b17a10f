#include "levyband/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "levyband/band_solver.hpp"
#include "levyband/exit_analysis.hpp"
#include "levyband/json_io.hpp"
#include "levyband/scale_functions.hpp"
#include "levyband/simulator.hpp"

namespace levyband::cli {

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Common {
    std::string config;
    std::string out;
};

struct PolicyArgs {
    std::string policy;
    std::vector<double> bands;
};

struct SimArgs {
    std::uint64_t seed = 42;
    double dt = 1e-3;
    double horizon = 0.0;  // 0: command default
    std::int64_t paths = 0;
    int threads = 0;
    bool bridge = true;
};

void add_policy(CLI::App* cmd, PolicyArgs& p) {
    auto* pol = cmd->add_option("--policy", p.policy, "Solution or band JSON with a, alpha, beta, b");
    auto* bnd = cmd->add_option("--bands", p.bands, "Bands as a,alpha,beta,b")->delimiter(',')->expected(4);
    pol->excludes(bnd);
}

void add_sim(CLI::App* cmd, SimArgs& s) {
    cmd->add_option("--seed", s.seed, "Random seed");
    cmd->add_option("--dt", s.dt, "Time step")->check(CLI::PositiveNumber);
    cmd->add_option("--horizon", s.horizon, "Simulated time per path")->check(CLI::NonNegativeNumber);
    cmd->add_option("--paths", s.paths, "Number of paths")->check(CLI::NonNegativeNumber);
    cmd->add_option("--threads", s.threads, "Worker threads (capped by LEVYBAND_THREADS)");
    cmd->add_flag("!--no-bridge", s.bridge, "Disable the Brownian-bridge crossing correction");
}

SimConfig make_sim(const SimArgs& s, double default_horizon, std::int64_t default_paths) {
    SimConfig cfg;
    cfg.seed = s.seed;
    cfg.dt = s.dt;
    cfg.horizon = s.horizon > 0 ? s.horizon : default_horizon;
    cfg.paths = s.paths > 0 ? s.paths : default_paths;
    cfg.threads = s.threads;
    cfg.bridge_correction = s.bridge;
    return cfg;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

BandPolicy resolve_bands(const PolicyArgs& p) {
    if (!p.policy.empty()) return load_solution(p.policy).bands;
    if (p.bands.size() == 4) return {p.bands[0], p.bands[1], p.bands[2], p.bands[3]};
    throw Error(ErrorKind::ConfigError, "one of --policy or --bands is required");
}

CandidateValueFunction load_candidate(const ModelConfig& cfg, const std::string& policy) {
    const SolutionFile sol = load_solution(policy);
    return CandidateValueFunction::from_L(cfg.model, cfg.costs, sol.bands, sol.L);
}

// ---------------------------------------------------------------------------

int cmd_solve(const Common& c, const std::vector<double>& init) {
    const ModelConfig cfg = load_model_config(c.config);
    std::optional<SevenVector> start;
    if (!init.empty()) {
        if (init.size() != 7) throw Error(ErrorKind::ConfigError, "--init expects 7 values");
        start = SevenVector{};
        std::copy(init.begin(), init.end(), start->begin());
    }
    const SolveResult result = solve_bands(cfg.model, cfg.costs, start);
    emit(c.out, solution_to_json(result).dump(2) + "\n");
    if (!result.certified()) {
        std::cerr << "solve: " << to_string(result.status);
        if (!result.diagnostics.message.empty()) std::cerr << " (" << result.diagnostics.message << ")";
        std::cerr << "\n";
        return kFailure;
    }
    return kOk;
}

int cmd_verify(const Common& c, const std::string& policy) {
    const ModelConfig cfg = load_model_config(c.config);
    const auto cand = load_candidate(cfg, policy);
    const VerificationReport report = verify_conditions(cand);
    emit(c.out, report_to_json(report).dump(2) + "\n");
    return report.all_passed() ? kOk : kFailure;
}

int cmd_value(const Common& c, const std::string& policy, std::optional<double> lo, std::optional<double> hi,
              int points) {
    const ModelConfig cfg = load_model_config(c.config);
    const auto cand = load_candidate(cfg, policy);
    const auto& p = cand.bands();
    const double x_lo = lo.value_or(p.a - 2.0);
    const double x_hi = hi.value_or(p.b + 2.0);
    std::ostringstream os;
    os << "x,h,Mh,residual\n";
    for (int i = 0; i < points; ++i) {
        const double x = points == 1 ? x_lo : x_lo + (x_hi - x_lo) * i / (points - 1);
        const bool kink = x == p.a || x == p.b;
        os << fmt(x) << ',' << fmt(cand.h(x)) << ',' << fmt(apply_M(cand, x)) << ','
           << (kink ? std::string("nan") : fmt(qvi_residual(cand, x))) << '\n';
    }
    emit(c.out, os.str());
    return kOk;
}

int cmd_scale(const Common& c, double q, double xmax, int points) {
    const ModelConfig cfg = load_model_config(c.config);
    const ExpMixture basis = build_scale_basis(cfg.model, q);
    std::ostringstream os;
    os << "x,W,Z\n";
    for (int i = 0; i < points; ++i) {
        const double x = points == 1 ? 0.0 : xmax * i / (points - 1);
        const auto v = eval_scale(basis, x);
        os << fmt(x) << ',' << fmt(v.W) << ',' << fmt(v.Z) << '\n';
    }
    emit(c.out, os.str());
    return kOk;
}

int cmd_stationary(const Common& c, const PolicyArgs& pa, int points) {
    const ModelConfig cfg = load_model_config(c.config);
    const StationaryLaw law(cfg.model, resolve_bands(pa));
    const auto& p = law.bands();
    std::ostringstream os;
    os << "y,density,cdf\n";
    for (int i = 0; i < points; ++i) {
        const double y = points == 1 ? p.a : p.a + (p.b - p.a) * i / (points - 1);
        os << fmt(y) << ',' << fmt(law.density(y)) << ',' << fmt(law.cdf(y)) << '\n';
    }
    emit(c.out, os.str());
    std::cerr << "normalizer," << fmt(law.normalizer()) << "\n";
    return kOk;
}

int cmd_transient(const Common& c, const PolicyArgs& pa, const TransientQuery& query, bool mc_check,
                  const SimArgs& sa) {
    const ModelConfig cfg = load_model_config(c.config);
    const BandPolicy bands = resolve_bands(pa);
    const double analytic = transient_distribution(cfg.model, bands, query);
    nlohmann::json j{{"q", query.q}, {"x", query.x}, {"lo", query.interval.lo}, {"hi", query.interval.hi},
                     {"analytic", analytic}};
    if (mc_check) {
        const auto mc = estimate_transient_mc(cfg.model, bands, query, make_sim(sa, 1.0, 100000));
        j["mc"] = mc.p_hat;
        j["stderr"] = mc.std_error;
        j["paths"] = mc.n;
        j["z"] = mc.std_error > 0 ? (mc.p_hat - analytic) / mc.std_error : 0.0;
    }
    emit(c.out, j.dump(2) + "\n");
    return kOk;
}

int cmd_simulate(const Common& c, const PolicyArgs& pa, double x0, const SimArgs& sa, const std::string& paths_csv) {
    const ModelConfig cfg = load_model_config(c.config);
    const BandPolicy bands = resolve_bands(pa);
    SimConfig sim = make_sim(sa, certified_horizon(cfg.model, bands, 1e-4), 10000);
    const auto est = estimate_value(cfg.model, cfg.costs, bands, x0, sim);
    nlohmann::json j{{"x0", x0},
                     {"mean", est.mean},
                     {"stderr", est.std_error},
                     {"paths", est.n},
                     {"horizon", est.horizon},
                     {"truncation_bound", est.truncation_bound},
                     {"dt", sim.dt},
                     {"seed", sim.seed}};
    emit(c.out, j.dump(2) + "\n");
    if (!paths_csv.empty()) {
        std::ostringstream os;
        os << "path,discounted_cost,running_cost,interventions\n";
        for (std::int64_t i = 0; i < sim.paths; ++i) {
            const auto rec = simulate_path(cfg.model, cfg.costs, bands, x0, sim,
                                           CounterRng::path_key(sim.seed, static_cast<std::uint64_t>(i)));
            os << i << ',' << fmt(rec.discounted_cost) << ',' << fmt(rec.running_cost) << ','
               << rec.intervention_times.size() << '\n';
        }
        write_text_file(paths_csv, os.str());
    }
    return kOk;
}

int cmd_occupation(const Common& c, const PolicyArgs& pa, int bins, const SimArgs& sa) {
    const ModelConfig cfg = load_model_config(c.config);
    const BandPolicy bands = resolve_bands(pa);
    const auto hist = empirical_occupation(cfg.model, bands, make_sim(sa, 1000.0, 1), bins);
    const auto cdf = hist.cdf();
    std::ostringstream os;
    os << "bin_lo,bin_hi,mass,cdf\n";
    for (std::size_t i = 0; i < hist.mass.size(); ++i) {
        os << fmt(hist.lo + hist.bin_width() * i) << ',' << fmt(hist.lo + hist.bin_width() * (i + 1)) << ','
           << fmt(hist.mass[i]) << ',' << fmt(cdf[i]) << '\n';
    }
    emit(c.out, os.str());
    if (!hist.warning.empty()) std::cerr << "warning: " << hist.warning << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// crosscheck

struct Pair {
    std::string name;
    double analytic;
    double mc;
    double std_error;
};

nlohmann::json pair_json(const Pair& p, bool& all_ok) {
    double z = 0.0;
    if (p.std_error > 0) {
        z = (p.mc - p.analytic) / p.std_error;
    } else if (std::abs(p.mc - p.analytic) > 1e-9 * (1.0 + std::abs(p.analytic))) {
        z = std::copysign(std::numeric_limits<double>::infinity(), p.mc - p.analytic);
    }
    const bool ok = std::abs(z) <= 3.0;
    all_ok = all_ok && ok;
    return {{"name", p.name}, {"analytic", p.analytic}, {"mc", p.mc},
            {"stderr", p.std_error}, {"z", std::isfinite(z) ? nlohmann::json(z) : nlohmann::json("inf")},
            {"passed", ok}};
}

int cmd_crosscheck(const Common& c, const PolicyArgs& pa, const SimArgs& sa) {
    const ModelConfig cfg = load_model_config(c.config);
    const auto& m = cfg.model;
    bool all_ok = true;
    nlohmann::json checks = nlohmann::json::array();
    nlohmann::json out;
    out["seed"] = sa.seed;
    out["model"] = model_config_to_json(cfg);

    // Laplace exponent against exact increments.
    {
        SimConfig sim = make_sim(sa, 1.0, 20000);
        for (double s : {-0.25 * m.jump_scale, 0.25 * m.jump_scale}) {
            std::vector<double> v(static_cast<std::size_t>(sim.paths));
            for (std::int64_t i = 0; i < sim.paths; ++i) {
                CounterRng rng = CounterRng::for_path(sim.seed ^ 0x5151u, static_cast<std::uint64_t>(i));
                v[static_cast<std::size_t>(i)] = std::exp(s * sample_increment(m, 1.0, rng));
            }
            const double mean = pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            const double se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
            checks.push_back(pair_json({"laplace_exponent_s=" + fmt(s), std::exp(laplace_exponent(s, m)), mean, se},
                                       all_ok));
        }
    }

    std::optional<CandidateValueFunction> cand;
    BandPolicy bands;
    if (!pa.policy.empty() || !pa.bands.empty()) {
        bands = resolve_bands(pa);
        if (!pa.policy.empty()) {
            const SolutionFile sol = load_solution(pa.policy);
            if (sol.report && m.sigma > 0) cand = CandidateValueFunction::from_L(m, cfg.costs, sol.bands, sol.L);
        }
    } else {
        const SolveResult res = solve_bands(m, cfg.costs);
        out["solve_status"] = std::string(to_string(res.status));
        if (!res.cand) throw Error(ErrorKind::RootFindingFailure, "crosscheck: no band policy available");
        cand = res.cand;
        bands = res.cand->bands();
        if (!res.certified()) all_ok = false;
    }
    bands.require_ordered();
    out["bands"] = {bands.a, bands.alpha, bands.beta, bands.b};
    const double x0 = (m.target > bands.a && m.target < bands.b) ? m.target : bands.alpha;
    out["x0"] = x0;

    if (cand) {
        SimConfig sim = make_sim(sa, certified_horizon(m, bands, 1e-3), 2000);
        const auto est = estimate_value(m, cfg.costs, bands, x0, sim);
        checks.push_back(pair_json({"value_h(x0)", cand->h(x0), est.mean, est.std_error}, all_ok));
    }
    {
        const double mid = 0.5 * (bands.alpha + bands.beta);
        const TransientQuery q{1.0, x0, {bands.a, mid}};
        const auto est = estimate_transient_mc(m, bands, q, make_sim(sa, 1.0, 4000));
        checks.push_back(pair_json({"transient_q=1", transient_distribution(m, bands, q), est.p_hat, est.std_error},
                                   all_ok));
        const TransientQuery full{1.0, x0, {bands.a, bands.b}};
        checks.push_back(pair_json({"transient_full_band", transient_distribution(m, bands, full), 1.0, 0.0}, all_ok));
    }
    {
        const ExpMixture basis0 = build_scale_basis(m, 0.0);
        const auto est = estimate_exit_time_mc(m, bands, x0, make_sim(sa, 1e3, 4000));
        checks.push_back(pair_json({"expected_exit_time", expected_exit_time(basis0, x0, bands), est.mean, est.std_error},
                                   all_ok));
    }
    {
        const StationaryLaw law(m, bands);
        constexpr int kBins = 200;
        const auto hist = empirical_occupation(m, bands, make_sim(sa, 2000.0, 1), kBins);
        const auto cdf = hist.cdf();
        double ks = 0.0;
        for (int i = 0; i < kBins; ++i) {
            ks = std::max(ks, std::abs(cdf[static_cast<std::size_t>(i)] - law.cdf(hist.lo + hist.bin_width() * (i + 1))));
        }
        const bool ok = ks <= 0.05;
        all_ok = all_ok && ok;
        checks.push_back({{"name", "stationary_ks"}, {"ks", ks}, {"tolerance", 0.05}, {"cycles", hist.cycles},
                          {"passed", ok}});
    }
    out["checks"] = checks;
    out["all_passed"] = all_ok;
    emit(c.out, out.dump(2) + "\n");
    return all_ok ? kOk : kFailure;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Impulse control bands for spectrally positive Levy cash processes"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* cmd, bool need_config = true) {
        auto* opt = cmd->add_option("--config", common.config, "Model JSON");
        if (need_config) opt->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", common.out, "Output file (default stdout)");
    };

    auto* solve = app.add_subcommand("solve", "Solve for the optimal bands and certify them");
    add_common(solve);
    std::vector<double> init;
    solve->add_option("--init", init, "Start a,alpha,beta,b,L1,L2,L3")->delimiter(',')->expected(7);

    auto* verify = app.add_subcommand("verify", "Re-verify a solution file");
    add_common(verify);
    std::string verify_policy;
    verify->add_option("--policy", verify_policy, "Solution JSON")->required()->check(CLI::ExistingFile);

    auto* value = app.add_subcommand("value", "Value function, Mh and QVI residual on a grid (CSV)");
    add_common(value);
    std::string value_policy;
    std::optional<double> value_lo, value_hi;
    int value_points = 201;
    value->add_option("--policy", value_policy, "Solution JSON")->required()->check(CLI::ExistingFile);
    value->add_option("--lo", value_lo, "Grid start (default a - 2)");
    value->add_option("--hi", value_hi, "Grid end (default b + 2)");
    value->add_option("--points", value_points, "Grid points")->check(CLI::PositiveNumber);

    auto* scale = app.add_subcommand("scale", "Scale functions W and Z on a grid (CSV)");
    add_common(scale);
    double scale_q = 0.0, scale_xmax = 5.0;
    int scale_points = 101;
    scale->add_option("--q", scale_q, "Killing rate q >= 0")->check(CLI::NonNegativeNumber);
    scale->add_option("--xmax", scale_xmax, "Grid end")->check(CLI::NonNegativeNumber);
    scale->add_option("--points", scale_points, "Grid points")->check(CLI::PositiveNumber);

    auto* stationary = app.add_subcommand("stationary", "Stationary density and CDF over [a, b] (CSV)");
    add_common(stationary);
    PolicyArgs stat_policy;
    int stat_points = 201;
    add_policy(stationary, stat_policy);
    stationary->add_option("--points", stat_points, "Grid points")->check(CLI::PositiveNumber);

    auto* transient = app.add_subcommand("transient", "P_x[X(e_q) in (lo, hi)]");
    add_common(transient);
    PolicyArgs tr_policy;
    SimArgs tr_sim;
    TransientQuery query;
    bool mc_check = false;
    add_policy(transient, tr_policy);
    add_sim(transient, tr_sim);
    transient->add_option("--q", query.q, "Rate of the exponential time")->required()->check(CLI::PositiveNumber);
    transient->add_option("--x", query.x, "Start point")->required();
    transient->add_option("--lo", query.interval.lo, "Interval start")->required();
    transient->add_option("--hi", query.interval.hi, "Interval end")->required();
    transient->add_flag("--mc-check", mc_check, "Also estimate by simulation");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo cost of a band policy (JSON)");
    add_common(simulate);
    PolicyArgs sim_policy;
    SimArgs sim_args;
    double sim_x0 = 0.0;
    std::string paths_csv;
    add_policy(simulate, sim_policy);
    add_sim(simulate, sim_args);
    simulate->add_option("--x0", sim_x0, "Start point")->required();
    simulate->add_option("--paths-csv", paths_csv, "Per-path CSV output");

    auto* occupation = app.add_subcommand("occupation", "Empirical occupation histogram (CSV)");
    add_common(occupation);
    PolicyArgs occ_policy;
    SimArgs occ_sim;
    int occ_bins = 100;
    add_policy(occupation, occ_policy);
    add_sim(occupation, occ_sim);
    occupation->add_option("--bins", occ_bins, "Histogram bins")->check(CLI::PositiveNumber);

    auto* crosscheck = app.add_subcommand("crosscheck", "Analytic versus Monte Carlo report (JSON)");
    add_common(crosscheck);
    PolicyArgs cc_policy;
    SimArgs cc_sim;
    add_policy(crosscheck, cc_policy);
    add_sim(crosscheck, cc_sim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*solve) return cmd_solve(common, init);
        if (*verify) return cmd_verify(common, verify_policy);
        if (*value) return cmd_value(common, value_policy, value_lo, value_hi, value_points);
        if (*scale) return cmd_scale(common, scale_q, scale_xmax, scale_points);
        if (*stationary) return cmd_stationary(common, stat_policy, stat_points);
        if (*transient) return cmd_transient(common, tr_policy, query, mc_check, tr_sim);
        if (*simulate) return cmd_simulate(common, sim_policy, sim_x0, sim_args, paths_csv);
        if (*occupation) return cmd_occupation(common, occ_policy, occ_bins, occ_sim);
        if (*crosscheck) return cmd_crosscheck(common, cc_policy, cc_sim);
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return (e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::OrderingViolation) ? kUsage : kFailure;
    }
    return kUsage;
}

}  // namespace levyband::cli
