#include "gjf/estimate.hpp"
#include "gjf/filter.hpp"
#include "gjf/harness.hpp"
#include "gjf/io.hpp"
#include "gjf/likelihood.hpp"
#include "gjf/model.hpp"
#include "gjf/simulate.hpp"
#include "gjf/statdist.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

using namespace gjf;

struct FilterOpts {
    std::string scale = "sbar";
    int K = 2;
    int window = 0;
    double eps0 = 1e-4;
    double cstar = 1.0;
    bool cap_scaled = false;
    double delta0 = 0.2;
    double delta1 = 4.0 / 9.0;
    double B = 1.0;
};

void add_filter_opts(CLI::App* cmd, FilterOpts& f) {
    cmd->add_option("--scale", f.scale, "scale estimate: sbar|identity")
        ->check(CLI::IsMember({"sbar", "identity"}));
    cmd->add_option("--K", f.K, "min-of-previous window for the initial scale");
    cmd->add_option("--window", f.window, "initial scale half-window (0: ceil(sqrt(n)))");
    cmd->add_option("--eps0", f.eps0, "eigenvalue floor for the initial scale");
    cmd->add_option("--cstar", f.cstar, "truncation cap constant C*");
    cmd->add_flag("--cap-scaled", f.cap_scaled, "cap on scale-adjusted norms");
    cmd->add_option("--delta0", f.delta0, "moving cap exponent offset");
    cmd->add_option("--delta1", f.delta1, "moving threshold exponent");
    cmd->add_option("--B", f.B, "moving threshold constant B");
}

ScaleEstimate build_scale(const SamplePath& path, const ModelSpec& spec,
                          const FilterOpts& f) {
    if (f.scale == "identity") return identity_scale(path, spec, 0);
    return initial_scale(path, spec, 0, f.K, f.window, f.eps0);
}

int run_simulate(const OuJumpParams& params, const std::string& out) {
    const SamplePath path = simulate_ou_jump(params);
    write_csv(out, path);
    std::cout << "wrote " << out << " (n=" << path.n() << ")\n";
    return 0;
}

int run_detect(const std::string& filter, double alpha, double rho,
               const FilterOpts& f, const std::string& in, const std::string& out) {
    const SamplePath path = read_csv(in);
    const ModelSpec spec = scalar_sigma_model(1e-6, 1e6);
    FilterResult result;
    if (filter == "global") {
        CapRule cap{f.cstar, -0.25, f.cap_scaled, true};
        result = global_filter_set(path, spec, 0, build_scale(path, spec, f), alpha, cap);
    } else if (filter == "moving") {
        CapRule cap{f.cstar, -0.25 - f.delta0, f.cap_scaled, true};
        result = moving_filter_set(path, spec, 0, build_scale(path, spec, f), f.B, f.delta1, cap);
    } else {
        result = local_filter_set(path, rho);
    }

    std::vector<std::uint8_t> kept_mask(static_cast<size_t>(path.n()), 0);
    for (int j : result.kept) kept_mask[static_cast<size_t>(j)] = 1;
    std::ostringstream csv;
    csv << "j,kept,scaled_norm,cap,truth\n";
    for (int j = 0; j < path.n(); ++j) {
        csv << (j + 1) << "," << int(kept_mask[static_cast<size_t>(j)]) << ","
            << format_double(result.scaled_norms[static_cast<size_t>(j)]) << ","
            << int(result.cap[static_cast<size_t>(j)]) << ",";
        if (path.has_truth()) csv << int(path.jump_truth[static_cast<size_t>(j)]);
        csv << "\n";
    }
    write_text_file(out, csv.str());
    if (path.has_truth()) {
        const DetectionMetrics metrics = detection_metrics(result, path.jump_truth);
        std::cout << "kept " << result.kept.size() << "/" << path.n()
                  << "  fn=" << metrics.fn_ratio << "  fp=" << metrics.fp_ratio << "\n";
    } else {
        std::cout << "kept " << result.kept.size() << "/" << path.n() << "\n";
    }
    return 0;
}

int run_estimate(const std::string& method, double alpha, double beta, int kappa,
                 double rho, double eta, double box_lo, double box_hi,
                 const std::string& qn_mode, const FilterOpts& f,
                 const std::string& in, const std::string& out) {
    const SamplePath path = read_csv(in);
    const ModelSpec spec = scalar_sigma_model(box_lo, box_hi);
    const Box box = spec.theta_box;

    auto fixed_surface = [&]() {
        const ScaleEstimate scale = build_scale(path, spec, f);
        CapRule cap{f.cstar, -0.25, f.cap_scaled, true};
        const FilterResult filt = global_filter_set(path, spec, 0, scale, alpha, cap);
        return fixed_alpha_loglik(path, spec, {filt},
                                  {TruncationConstants::make(alpha, spec.block_dim(0))});
    };
    auto moving_surface = [&]() {
        const ScaleEstimate scale = build_scale(path, spec, f);
        CapRule cap{f.cstar, -0.25 - f.delta0, f.cap_scaled, true};
        const FilterResult filt = moving_filter_set(path, spec, 0, scale, f.B, f.delta1, cap);
        const double pn = static_cast<double>(filt.s_n) / path.n();
        const double qn =
            qn_mode == "chi2" ? truncation_factor(filt.alpha, spec.block_dim(0)) : 1.0;
        return moving_loglik(path, spec, {filt}, {pn}, {qn});
    };

    EstimateReport report;
    if (method == "qmle-alpha") {
        report = qmle(fixed_surface(), box);
    } else if (method == "qbe-alpha-beta") {
        report = qbe(fixed_surface(), box, nullptr, beta);
    } else if (method == "qmle-moving") {
        report = qmle(moving_surface(), box);
    } else if (method == "qbe-moving") {
        report = qbe(moving_surface(), box);
    } else if (method == "onestep-m" || method == "onestep-b") {
        const LikelihoodSurface target = moving_surface();
        const LikelihoodSurface initial_surface = fixed_surface();
        const EstimateReport initial = method == "onestep-m"
                                           ? qmle(initial_surface, box)
                                           : qbe(initial_surface, box, nullptr, beta);
        report = one_step(initial, target, kappa, box);
    } else {  // local
        report = qmle(local_loglik(path, rho, eta), box);
    }
    report.echo.delta0 = f.delta0;
    report.echo.delta1 = f.delta1;
    report.echo.B = f.B;

    const std::string json = report_to_json(report);
    if (out.empty()) {
        std::cout << json << "\n";
    } else {
        write_text_file(out, json);
        std::cout << "theta_hat = " << report.theta_hat.transpose() << "  ("
                  << estimator_kind_name(report.kind) << ") -> " << out << "\n";
    }
    return 0;
}

int run_mc(const std::string& experiment, const std::string& config,
           const std::string& out_dir, int replicates, long seed, int threads) {
    ExperimentConfig cfg;
    if (!config.empty()) cfg = ExperimentConfig::from_file(config);
    if (replicates > 0) cfg.replicates = replicates;
    if (seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(seed);
    if (threads > 0) cfg.threads = threads;

    if (experiment == "table1") {
        const DetectionSummary summary = run_detection_table(cfg, out_dir);
        std::cout << "alpha    mean_fn%   mean_fp%\n";
        for (size_t i = 0; i < summary.alphas.size(); ++i)
            std::cout << summary.alphas[i] << "  " << 100.0 * summary.mean_fn[i] << "  "
                      << 100.0 * summary.mean_fp[i] << "\n";
    } else if (experiment == "alpha-sweep") {
        const SweepSummary summary = run_alpha_sweep(cfg, out_dir);
        for (const auto& line : summary.lines)
            std::cout << line.estimator << " alpha=" << line.tuning << " mean=" << line.mean
                      << " sd=" << line.sd << "\n";
    } else if (experiment == "compare") {
        const SweepSummary summary = run_method_comparison(cfg, out_dir);
        for (const auto& line : summary.lines)
            std::cout << line.estimator << " tuning=" << line.tuning << " mean=" << line.mean
                      << " |bias|=" << line.mean_abs_bias << "\n";
    } else {  // rate
        const RateSummary summary = run_rate_check(cfg, out_dir);
        for (const auto& line : summary.lines)
            std::cout << line.variant << " n=" << line.n << " rmse=" << line.rmse << "\n";
        std::cout << "slope jump_free = " << summary.slope_jump_free << "\n";
        std::cout << "slope with_jumps = " << summary.slope_with_jumps << "\n";
    }
    std::cout << "outputs in " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"global jump filters and quasi-likelihood volatility estimation"};
    app.require_subcommand(1);

    // simulate
    OuJumpParams params;
    std::string model_name = "ou-jump";
    std::string sim_out = "path.csv";
    long sim_seed = 1;
    auto* sim = app.add_subcommand("simulate", "simulate a jump-diffusion sample path");
    sim->add_option("--model", model_name, "model name")->check(CLI::IsMember({"ou-jump"}));
    sim->add_option("--eta", params.eta, "mean reversion rate");
    sim->add_option("--sigma", params.sigma, "diffusion scale");
    sim->add_option("--lambda", params.lambda, "jump intensity");
    sim->add_option("--eps", params.eps, "variance of the Gaussian jump marks");
    sim->add_option("--x0", params.x0, "initial value");
    sim->add_option("--n", params.n, "number of steps");
    sim->add_option("--T", params.T, "time horizon");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--out", sim_out, "output CSV")->required();

    // detect
    std::string det_filter = "global", det_in, det_out = "flags.csv";
    double det_alpha = 0.05, det_rho = 0.5;
    FilterOpts det_f;
    auto* det = app.add_subcommand("detect", "flag jump increments with a filter");
    det->add_option("--filter", det_filter, "global|moving|local")
        ->check(CLI::IsMember({"global", "moving", "local"}));
    det->add_option("--alpha", det_alpha, "global filter level");
    det->add_option("--rho", det_rho, "local threshold exponent");
    add_filter_opts(det, det_f);
    det->add_option("--in", det_in, "input CSV")->required();
    det->add_option("--out", det_out, "output CSV");

    // estimate
    std::string est_method = "qmle-alpha", est_in, est_out, est_qn = "one";
    double est_alpha = 0.05, est_beta = 0.45, est_rho = 0.5, est_eta = 0.1;
    double est_lo = 0.02, est_hi = 0.2;
    int est_kappa = 4;
    FilterOpts est_f;
    auto* est = app.add_subcommand("estimate", "estimate the volatility parameter");
    est->add_option("--method", est_method, "estimator")
        ->check(CLI::IsMember({"qmle-alpha", "qbe-alpha-beta", "qmle-moving", "qbe-moving",
                               "onestep-m", "onestep-b", "local"}));
    est->add_option("--alpha", est_alpha, "filter level");
    est->add_option("--beta", est_beta, "annealing index");
    est->add_option("--kappa", est_kappa, "one-step order (3 or 4)");
    est->add_option("--rho", est_rho, "local threshold exponent");
    est->add_option("--eta", est_eta, "drift rate for the local comparator");
    est->add_option("--box-lo", est_lo, "parameter box lower edge");
    est->add_option("--box-hi", est_hi, "parameter box upper edge");
    est->add_option("--qn-mode", est_qn, "moving qn: one|chi2")
        ->check(CLI::IsMember({"one", "chi2"}));
    add_filter_opts(est, est_f);
    est->add_option("--in", est_in, "input CSV")->required();
    est->add_option("--out", est_out, "output JSON (stdout when omitted)");

    // mc
    std::string mc_experiment = "table1", mc_config, mc_out = "mc-out";
    int mc_replicates = 0, mc_threads = 0;
    long mc_seed = -1;
    auto* mc = app.add_subcommand("mc", "Monte Carlo experiment runner");
    mc->add_option("--experiment", mc_experiment, "table1|alpha-sweep|compare|rate")
        ->check(CLI::IsMember({"table1", "alpha-sweep", "compare", "rate"}))
        ->required();
    mc->add_option("--config", mc_config, "flat key = value config file");
    mc->add_option("--out", mc_out, "output directory")->required();
    mc->add_option("--replicates", mc_replicates, "override replicate count");
    mc->add_option("--seed", mc_seed, "override base seed");
    mc->add_option("--threads", mc_threads, "override worker count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            params.seed = static_cast<std::uint64_t>(sim_seed);
            return run_simulate(params, sim_out);
        }
        if (det->parsed()) return run_detect(det_filter, det_alpha, det_rho, det_f, det_in, det_out);
        if (est->parsed())
            return run_estimate(est_method, est_alpha, est_beta, est_kappa, est_rho, est_eta,
                                est_lo, est_hi, est_qn, est_f, est_in, est_out);
        if (mc->parsed())
            return run_mc(mc_experiment, mc_config, mc_out, mc_replicates, mc_seed, mc_threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
