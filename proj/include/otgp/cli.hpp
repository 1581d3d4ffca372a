// Command implementations behind the command-line tool: dataset simulation,
// single-model fitting, the multi-method benchmark, and band-certificate
// emission. Kept out of main() so the commands are directly testable.
#pragma once

#include "otgp/bounds.hpp"
#include "otgp/hyperopt.hpp"
#include "otgp/io.hpp"
#include "otgp/metrics.hpp"
#include "otgp/scenarios.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace otgp {

enum class Method { reg, agg, wgp, swgp, pwa, pcpwa, uigp, kme, mmd };

inline const std::vector<std::pair<std::string, Method>>& method_table()
{
    static const std::vector<std::pair<std::string, Method>> table = {
        {"reg", Method::reg},     {"agg", Method::agg},   {"wgp", Method::wgp},
        {"swgp", Method::swgp},   {"pwa", Method::pwa},   {"pcpwa", Method::pcpwa},
        {"uigp", Method::uigp},   {"kme", Method::kme},   {"mmd", Method::mmd}};
    return table;
}

inline std::string valid_method_tags()
{
    std::string tags;
    for (const auto& [tag, m] : method_table())
        tags += tags.empty() ? tag : ", " + tag;
    return tags;
}

inline Method method_from_tag(const std::string& tag)
{
    for (const auto& [name, m] : method_table())
        if (name == tag)
            return m;
    throw std::invalid_argument("unknown method '" + tag + "'; valid methods: " +
                                valid_method_tags());
}

inline std::string method_tag(Method m)
{
    for (const auto& [name, method] : method_table())
        if (method == m)
            return name;
    return "?";
}

inline KernelFamily method_family(Method m)
{
    switch (m) {
    case Method::reg:
    case Method::agg: return KernelFamily::RBF;
    case Method::wgp: return KernelFamily::WGP;
    case Method::swgp: return KernelFamily::SWGP;
    case Method::pwa: return KernelFamily::PWA;
    case Method::pcpwa: return KernelFamily::PCPWA;
    case Method::uigp: return KernelFamily::UIGP;
    case Method::kme: return KernelFamily::KME;
    case Method::mmd: return KernelFamily::MMD;
    }
    throw std::invalid_argument("unknown method");
}

struct CommonOptions {
    std::uint64_t seed = 0;
    double alpha = 0.1;
    std::filesystem::path out_dir = ".";
    ConfigFile config;
};

namespace detail {

inline std::string sanitize(std::string s)
{
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
            c = '_';
    return s;
}

inline long config_long(const ConfigFile& cfg, const std::string& section,
                        const std::string& key, long fallback)
{
    if (const std::string* v = cfg.lookup(section, key))
        return std::stol(*v);
    return fallback;
}

inline double config_double(const ConfigFile& cfg, const std::string& section,
                            const std::string& key, double fallback)
{
    if (const std::string* v = cfg.lookup(section, key))
        return std::stod(*v);
    return fallback;
}

} // namespace detail

inline ScenarioConfig make_scenario_config(const std::string& scenario, std::uint64_t seed,
                                           const ConfigFile& config)
{
    ScenarioConfig cfg = default_config(scenario, seed);
    auto get_long = [&](const char* key, int fallback) {
        return static_cast<int>(detail::config_long(config, "", key, fallback));
    };
    auto get = [&](const char* key, double fallback) {
        return detail::config_double(config, "", key, fallback);
    };
    cfg.n_train = get_long("n_train", cfg.n_train);
    cfg.n_test = get_long("n_test", cfg.n_test);
    cfg.samples_per_cloud = get_long("samples_per_cloud", cfg.samples_per_cloud);
    cfg.output_noise_sd = get("output_noise_sd", cfg.output_noise_sd);
    cfg.eiv_noise_base = get("eiv_noise_base", cfg.eiv_noise_base);
    cfg.eiv_noise_slope = get("eiv_noise_slope", cfg.eiv_noise_slope);
    cfg.eiv_alternative_target =
        detail::config_long(config, "", "eiv_alternative_target",
                            cfg.eiv_alternative_target ? 1 : 0) != 0;
    cfg.var_mu_lo = get("var_mu_lo", cfg.var_mu_lo);
    cfg.var_mu_hi = get("var_mu_hi", cfg.var_mu_hi);
    cfg.var_sigma_lo = get("var_sigma_lo", cfg.var_sigma_lo);
    cfg.var_sigma_hi = get("var_sigma_hi", cfg.var_sigma_hi);
    cfg.skew_m_lo = get("skew_m_lo", cfg.skew_m_lo);
    cfg.skew_m_hi = get("skew_m_hi", cfg.skew_m_hi);
    cfg.skew_s_lo = get("skew_s_lo", cfg.skew_s_lo);
    cfg.skew_s_hi = get("skew_s_hi", cfg.skew_s_hi);
    cfg.mean2d_var_lo = get("mean2d_var_lo", cfg.mean2d_var_lo);
    cfg.mean2d_var_hi = get("mean2d_var_hi", cfg.mean2d_var_hi);
    cfg.aniso_par_base = get("aniso_par_base", cfg.aniso_par_base);
    cfg.aniso_par_slope = get("aniso_par_slope", cfg.aniso_par_slope);
    cfg.aniso_perp_sd = get("aniso_perp_sd", cfg.aniso_perp_sd);
    cfg.aniso_rotation_deg = get("aniso_rotation_deg", cfg.aniso_rotation_deg);
    cfg.ackley_noise_sd = get("ackley_noise_sd", cfg.ackley_noise_sd);
    return cfg;
}

/// Resolves the optimizer settings for one method from the config file.
/// `known_noise` carries the generative output-noise variance when the caller
/// simulated the data itself; the benchmark fixes sigma_*^2 there by default
/// (noise_policy = optimize overrides), while fits on external data optimize
/// it jointly.
inline OptimizerConfig make_optimizer_config(Method method, std::uint64_t seed,
                                             const ConfigFile& config,
                                             std::optional<double> known_noise = std::nullopt)
{
    const std::string tag = method_tag(method);
    OptimizerConfig opt;
    opt.seed = seed;
    opt.slice_seed = seed;
    opt.restarts = static_cast<int>(detail::config_long(config, tag, "restarts", 5));
    opt.max_iterations =
        static_cast<int>(detail::config_long(config, tag, "max_iterations", 200));
    opt.slice_count = static_cast<int>(detail::config_long(config, tag, "slice_count", 20));
    const double default_p = 1.0;
    opt.transport_p = detail::config_double(config, tag, "p", default_p);

    opt.fixed_noise_variance = known_noise;
    if (const std::string* v = config.lookup(tag, "noise_variance"))
        opt.fixed_noise_variance = std::stod(*v);
    if (const std::string* policy = config.lookup(tag, "noise_policy")) {
        if (*policy == "optimize")
            opt.fixed_noise_variance.reset();
        else if (*policy != "fixed")
            throw std::invalid_argument("noise_policy must be 'optimize' or 'fixed'");
    }
    return opt;
}

inline Eigen::VectorXd responses(const Dataset& ds)
{
    Eigen::VectorXd y(static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = ds.groups[i].y;
    return y;
}

inline std::vector<Cloud> clouds_of(const Dataset& ds)
{
    std::vector<Cloud> clouds;
    clouds.reserve(ds.size());
    for (const DatasetGroup& g : ds.groups)
        clouds.push_back(g.cloud);
    return clouds;
}

/// Representation each method consumes: empirical means for the point-GP
/// baselines, moment summaries for UIGP, the raw clouds otherwise.
inline std::vector<MeasureInput> method_inputs(Method method, const Dataset& ds)
{
    std::vector<MeasureInput> inputs;
    inputs.reserve(ds.size());
    for (const DatasetGroup& g : ds.groups) {
        switch (method) {
        case Method::reg:
        case Method::agg:
            inputs.emplace_back(Eigen::VectorXd(gaussian_summary(g.cloud).mean));
            break;
        case Method::uigp:
            inputs.emplace_back(gaussian_summary(g.cloud));
            break;
        default:
            inputs.emplace_back(g.cloud);
            break;
        }
    }
    return inputs;
}

struct FittedMethod {
    Method method = Method::reg;
    FitResult fit_result;
    std::optional<GPModel> model; // absent for the aggregated baseline
    double fit_seconds = 0.0;
};

/// Optimizes hyperparameters and fits one method on a training dataset. The
/// aggregated baseline tunes its point kernel on the empirical means and
/// defers per-replicate fitting to prediction time.
inline FittedMethod fit_method(Method method, const Dataset& train, std::uint64_t seed,
                               const ConfigFile& config,
                               std::optional<double> known_noise = std::nullopt)
{
    const auto t0 = std::chrono::steady_clock::now();
    FittedMethod fitted;
    fitted.method = method;

    OptimizerConfig opt = make_optimizer_config(method, seed, config, known_noise);
    const Eigen::VectorXd y = responses(train);

    if (method == Method::pcpwa) {
        const std::vector<Cloud> clouds = clouds_of(train);
        const long m = detail::config_long(config, "pcpwa", "pca_components", 0);
        const int components =
            (m > 0) ? static_cast<int>(std::min<long>(m, train.dim)) : train.dim;
        opt.basis = pca_directions(clouds, components);
    }

    const Method tuning_method = (method == Method::agg) ? Method::reg : method;
    const std::vector<MeasureInput> inputs = method_inputs(tuning_method, train);
    fitted.fit_result = optimize_hyperparams(inputs, y, method_family(tuning_method), opt);
    if (method != Method::agg)
        fitted.model =
            fit(inputs, y, fitted.fit_result.spec, fitted.fit_result.noise_variance);

    fitted.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return fitted;
}

inline std::vector<PredictiveSummary> predict_method(const FittedMethod& fitted,
                                                     const Dataset& train, const Dataset& test,
                                                     AggVariance agg_rule = AggVariance::within_only)
{
    if (fitted.method == Method::agg) {
        const std::vector<Cloud> train_clouds = clouds_of(train);
        const std::vector<Cloud> test_clouds = clouds_of(test);
        return aggregated_fit_predict(train_clouds, responses(train), fitted.fit_result.spec,
                                      fitted.fit_result.noise_variance, test_clouds, agg_rule);
    }
    return predict(*fitted.model, method_inputs(fitted.method, test));
}

// simulate -----------------------------------------------------------------

struct SimulateOptions : CommonOptions {
    std::string scenario;
};

inline int cmd_simulate(const SimulateOptions& opts)
{
    const ScenarioConfig cfg = make_scenario_config(opts.scenario, opts.seed, opts.config);
    const Dataset train = generate_scenario(cfg, Split::train);
    const Dataset test = generate_scenario(cfg, Split::test);

    const std::string stem =
        detail::sanitize(opts.scenario) + "_seed" + std::to_string(opts.seed);
    write_dataset_csv(opts.out_dir / (stem + "_train.csv"), train);
    write_dataset_csv(opts.out_dir / (stem + "_test.csv"), test);
    write_latents_csv(opts.out_dir / (stem + "_latents.csv"), train, test);
    return 0;
}

// fit ------------------------------------------------------------------

struct FitOptions : CommonOptions {
    std::filesystem::path train_csv;
    std::string method;
    std::filesystem::path out_path; // defaults to <out_dir>/model_<method>.txt
};

inline KeyValueRecord model_summary_record(const FittedMethod& fitted, const Dataset& train)
{
    const KernelSpec& spec = fitted.fit_result.spec;
    KeyValueRecord record;
    record.emplace_back("method", method_tag(fitted.method));
    record.emplace_back("family", family_name(spec.family));
    record.emplace_back("n_train", std::to_string(train.size()));
    record.emplace_back("dim", std::to_string(train.dim));
    record.emplace_back("p", fmt_g17(spec.p));
    record.emplace_back("amplitude", fmt_g17(spec.amplitude));
    for (std::size_t s = 0; s < spec.scales.size(); ++s)
        record.emplace_back("scale_" + std::to_string(s + 1), fmt_g17(spec.scales[s]));
    record.emplace_back("base_lengthscale", fmt_g17(spec.base_lengthscale));
    if (spec.family == KernelFamily::SWGP) {
        record.emplace_back("slice_count", std::to_string(spec.slice_count));
        record.emplace_back("slice_seed", std::to_string(spec.slice_seed));
    }
    record.emplace_back("noise_variance", fmt_g17(fitted.fit_result.noise_variance));
    record.emplace_back("log_marginal_likelihood",
                        fmt_g17(fitted.fit_result.log_marginal_likelihood));
    if (fitted.model) {
        record.emplace_back("jitter", fmt_g17(fitted.model->jitter));
        record.emplace_back("jitter_escalations",
                            std::to_string(fitted.model->jitter_escalations));
    }
    record.emplace_back("fit_seconds", fmt_g17(fitted.fit_seconds));
    return record;
}

inline int cmd_fit(const FitOptions& opts)
{
    const Method method = method_from_tag(opts.method);
    const Dataset train = read_dataset_csv(opts.train_csv);
    const FittedMethod fitted = fit_method(method, train, opts.seed, opts.config);

    const std::filesystem::path out =
        opts.out_path.empty() ? opts.out_dir / ("model_" + opts.method + ".txt") : opts.out_path;
    write_kv(out, model_summary_record(fitted, train));
    return 0;
}

// benchmark ------------------------------------------------------------

struct BenchmarkOptions : CommonOptions {
    std::vector<std::string> scenarios;
    std::vector<std::string> methods;
    int n_seeds = 1; // seeds seed, seed+1, ..., seed+n_seeds-1
};

struct BenchmarkRow {
    std::string scenario;
    std::string method;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    double fit_seconds = 0.0;
    bool failed = false;
    std::string error;
};

namespace detail {

inline void write_prediction_csv(const std::filesystem::path& path, const Dataset& test,
                                 std::span<const PredictiveSummary> preds, double alpha,
                                 bool include_noise)
{
    const double z = two_sided_z(alpha);
    std::ofstream out = open_out(path);
    out << "group_id,y,f_true,mean,sd,predictive_sd,lower,upper\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
        const DatasetGroup& g = test.groups[i];
        const PredictiveSummary& s = preds[i];
        const double sd = include_noise ? s.predictive_sd() : s.sd();
        out << g.group_id << ',' << fmt_g17(g.y) << ',' << fmt_g17(g.f_true) << ','
            << fmt_g17(s.mean) << ',' << fmt_g17(s.sd()) << ',' << fmt_g17(s.predictive_sd())
            << ',' << fmt_g17(s.mean - z * sd) << ',' << fmt_g17(s.mean + z * sd) << "\n";
    }
}

inline int benchmark_threads(std::size_t n_cells)
{
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("OTGP_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1)
            threads = static_cast<unsigned>(parsed);
    }
    return static_cast<int>(std::min<std::size_t>(threads, n_cells));
}

} // namespace detail

/// Runs every (scenario, method, seed) cell: simulate, fit, predict, score.
/// Cells are independent and may run concurrently; rows are written in
/// canonical order so concurrency never changes output bytes. A failing
/// method is recorded (NaN metrics in results.csv, tag in failures.csv)
/// instead of aborting the suite.
inline int cmd_benchmark(const BenchmarkOptions& opts)
{
    if (opts.scenarios.empty() || opts.methods.empty() || opts.n_seeds < 1)
        throw std::invalid_argument("benchmark: need at least one scenario, method and seed");
    for (const std::string& scenario : opts.scenarios)
        default_config(scenario, 0); // validates the names up front
    std::vector<Method> methods;
    for (const std::string& tag : opts.methods)
        methods.push_back(method_from_tag(tag));

    struct Cell {
        std::string scenario;
        Method method;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const std::string& scenario : opts.scenarios)
        for (std::size_t m = 0; m < methods.size(); ++m)
            for (int s = 0; s < opts.n_seeds; ++s)
                cells.push_back({scenario, methods[m], opts.seed + static_cast<std::uint64_t>(s)});

    std::vector<BenchmarkRow> rows(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
            const Cell& cell = cells[i];
            BenchmarkRow& row = rows[i];
            row.scenario = cell.scenario;
            row.method = method_tag(cell.method);
            row.seed = cell.seed;
            try {
                const ScenarioConfig cfg =
                    make_scenario_config(cell.scenario, cell.seed, opts.config);
                const Dataset train = generate_scenario(cfg, Split::train);
                const Dataset test = generate_scenario(cfg, Split::test);
                const FittedMethod fitted =
                    fit_method(cell.method, train, cell.seed, opts.config);
                AggVariance agg_rule = AggVariance::within_only;
                if (const std::string* v = opts.config.lookup("agg", "variance_rule")) {
                    if (*v == "total")
                        agg_rule = AggVariance::law_of_total;
                    else if (*v != "within")
                        throw std::invalid_argument("agg variance_rule must be 'total' or 'within'");
                }
                const auto preds = predict_method(fitted, train, test, agg_rule);

                // Scored intervals are the latent bands z * sigma_N; set
                // interval_noise = include to score noise-inclusive ones.
                bool include_noise = false;
                if (const std::string* v = opts.config.lookup("", "interval_noise")) {
                    if (*v == "include")
                        include_noise = true;
                    else if (*v != "exclude")
                        throw std::invalid_argument("interval_noise must be 'include' or 'exclude'");
                }

                std::vector<double> truths(test.size());
                for (std::size_t t = 0; t < test.size(); ++t)
                    truths[t] = test.groups[t].y;
                row.metrics = score(preds, truths, opts.alpha, include_noise);
                row.fit_seconds = fitted.fit_seconds;

                const std::string stem = "predictions_" + detail::sanitize(cell.scenario) + "_" +
                                         row.method + "_seed" + std::to_string(cell.seed);
                detail::write_prediction_csv(opts.out_dir / (stem + ".csv"), test, preds,
                                             opts.alpha, include_noise);
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
        }
    };

    const int n_threads = detail::benchmark_threads(cells.size());
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool)
        t.join();

    std::ofstream results = detail::open_out(opts.out_dir / "results.csv");
    results << "scenario,method,seed,rmse,coverage,crps,fit_seconds\n";
    std::ofstream failures = detail::open_out(opts.out_dir / "failures.csv");
    failures << "scenario,method,seed,error\n";
    for (const BenchmarkRow& row : rows) {
        if (row.failed) {
            results << row.scenario << ',' << row.method << ',' << row.seed
                    << ",nan,nan,nan," << fmt_g17(row.fit_seconds) << "\n";
            std::string tag = row.error;
            for (char& c : tag)
                if (c == ',' || c == '\n')
                    c = ';';
            failures << row.scenario << ',' << row.method << ',' << row.seed << ',' << tag << "\n";
        } else {
            results << row.scenario << ',' << row.method << ',' << row.seed << ','
                    << fmt_g17(row.metrics.rmse) << ',' << fmt_g17(row.metrics.coverage) << ','
                    << fmt_g17(row.metrics.mean_crps) << ',' << fmt_g17(row.fit_seconds) << "\n";
        }
    }

    // Seed-aggregated summary: mean over successful seeds per (scenario, method).
    std::ofstream summary = detail::open_out(opts.out_dir / "summary.csv");
    summary << "scenario,method,n_seeds,rmse,coverage,crps,fit_seconds\n";
    for (const std::string& scenario : opts.scenarios) {
        for (const Method method : methods) {
            const std::string tag = method_tag(method);
            double rmse_acc = 0.0, cov_acc = 0.0, crps_acc = 0.0, time_acc = 0.0;
            int n_ok = 0;
            for (const BenchmarkRow& row : rows) {
                if (row.scenario != scenario || row.method != tag || row.failed)
                    continue;
                rmse_acc += row.metrics.rmse;
                cov_acc += row.metrics.coverage;
                crps_acc += row.metrics.mean_crps;
                time_acc += row.fit_seconds;
                ++n_ok;
            }
            summary << scenario << ',' << tag << ',' << n_ok;
            if (n_ok > 0) {
                const double n = n_ok;
                summary << ',' << fmt_g17(rmse_acc / n) << ',' << fmt_g17(cov_acc / n) << ','
                        << fmt_g17(crps_acc / n) << ',' << fmt_g17(time_acc / n) << "\n";
            } else {
                summary << ",nan,nan,nan,nan\n";
            }
        }
    }
    return 0;
}

// certify --------------------------------------------------------------

struct CertifyOptions : CommonOptions {
    std::filesystem::path train_csv;
    std::filesystem::path test_csv;
    double support_lo = 0.0;
    double support_hi = 1.0;
    double lipschitz = 1.0;
    double tau = 0.1;
    double delta = 0.05;
    double l_f = 0.0;
};

/// Fits a p = 1 WGP on 1D cloud data, builds the tau-net certificate and
/// evaluates the conservative-interval condition at every test input.
inline int cmd_certify(const CertifyOptions& opts)
{
    const Dataset train = read_dataset_csv(opts.train_csv);
    const Dataset test = read_dataset_csv(opts.test_csv);
    if (train.dim != 1 || test.dim != 1)
        throw std::invalid_argument(
            "certify: unsupported case, the band theory covers 1D measures only");

    OptimizerConfig opt = make_optimizer_config(Method::wgp, opts.seed, opts.config);
    if (opt.transport_p != 1.0)
        throw std::invalid_argument("certify: unsupported case, the band theory requires p = 1");

    const std::vector<MeasureInput> inputs = method_inputs(Method::wgp, train);
    const FitResult fr = optimize_hyperparams(inputs, responses(train), KernelFamily::WGP, opt);
    const GPModel model = fit(inputs, responses(train), fr.spec, fr.noise_variance);

    const MeasureClassSpec cls{opts.support_lo, opts.support_hi, opts.lipschitz, 0.0, 0.0};
    const QuantileNet net = quantile_net(cls, opts.tau);
    const double l_k = kernel_lipschitz_w1(model.spec);
    const double l_nu = posterior_mean_lipschitz(model, l_k);
    const double omega = sigma_modulus(model, l_k, opts.tau);
    BandCertificate cert = band(opts.tau, opts.delta, net.size, opts.l_f, l_nu, omega);
    cert.l_k = l_k;

    write_certificate(opts.out_dir / "certificate.txt", cert);

    const auto preds = predict(model, method_inputs(Method::wgp, test));
    const double z = two_sided_z(opts.alpha);
    std::ofstream verdicts = detail::open_out(opts.out_dir / "verdicts.csv");
    verdicts << "group_id,sigma_n,conservative,margin\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
        const ConservativeVerdict v = conservative_condition(z, cert, preds[i].sd());
        verdicts << test.groups[i].group_id << ',' << fmt_g17(preds[i].sd()) << ','
                 << (v.conservative ? 1 : 0) << ',' << fmt_g17(v.margin) << "\n";
    }
    return 0;
}

} // namespace otgp
