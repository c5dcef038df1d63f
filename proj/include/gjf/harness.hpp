#pragma once

#include "gjf/estimate.hpp"
#include "gjf/simulate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gjf {

// Monte Carlo experiment configuration; file form is a flat key = value
// document with the same field names (see README).
struct ExperimentConfig {
    OuJumpParams model{};
    int replicates = 500;
    std::vector<double> alpha_grid;  // empty: per-experiment default
    std::vector<double> rho_grid;
    std::vector<int> n_grid{250, 500, 1000, 2000, 4000};

    double box_lo = 0.02;
    double box_hi = 0.2;
    double beta = 0.45;
    int kappa = 4;

    int K = 2;
    int window = 0;  // 0: ceil(sqrt(n))
    double eps0 = 1e-4;
    double cstar = 1.0;
    bool cap_scaled = false;
    double delta0 = 0.2;
    double delta1 = 4.0 / 9.0;
    double B = 1.0;

    std::string qn_mode = "one";          // moving surface of the sweeps: "one" | "chi2"
    std::string scale_mode = "sbar";      // "sbar" | "identity"
    std::string rate_qn_mode = "chi2";    // rate experiment
    std::string rate_scale_mode = "identity";
    double rate_lambda = 2.0;

    std::uint64_t base_seed = 12345;
    int threads = 0;  // 0: hardware concurrency

    static ExperimentConfig from_file(const std::string& file);

    void validate() const;

    std::vector<double> detection_alphas() const;  // default: Table-1 grid
    std::vector<double> sweep_alphas() const;      // default: 8 points on [0.01, 0.3]
    std::vector<double> comparison_rhos() const;   // default: {1/3, 0.4, 0.45, 0.5}
};

struct SweepRow {
    std::string estimator;
    double tuning = 0.0;  // alpha, rho, or n depending on experiment
    int replicate = 0;
    double theta_hat = 0.0;
    double stderr_ = 0.0;
    double fn_ratio = 0.0;
    double fp_ratio = 0.0;
    int kept = 0;
    double wall_ms = 0.0;
    std::string status = "ok";
};

struct DetectionSummary {
    std::vector<double> alphas;
    std::vector<double> mean_fn, sd_fn, mean_fp, sd_fp;
};

struct SweepSummary {
    struct Line {
        std::string estimator;
        double tuning = 0.0;
        double mean = 0.0;
        double sd = 0.0;
        double mean_abs_bias = 0.0;
        double mean_stderr = 0.0;
        int ok_count = 0;
        int fallback_count = 0;
    };
    std::vector<Line> lines;
    std::vector<SweepRow> rows;

    const Line* find(const std::string& estimator, double tuning) const;
    std::vector<double> means_over_tuning(const std::string& estimator) const;
};

struct RateSummary {
    struct Line {
        std::string variant;  // "jump_free" | "with_jumps"
        int n = 0;
        double rmse = 0.0;
    };
    std::vector<Line> lines;
    double slope_jump_free = 0.0;
    double slope_with_jumps = 0.0;
    std::vector<SweepRow> rows;
};

// Table-1 style detection accuracy of the global filter over the alpha grid.
DetectionSummary run_detection_table(const ExperimentConfig& cfg,
                                     const std::string& out_dir);

// Fixed-alpha QMLE and its one-step correction against the moving surface,
// over the alpha grid.
SweepSummary run_alpha_sweep(const ExperimentConfig& cfg,
                             const std::string& out_dir);

// Local QMLE over the rho grid (eta fixed at truth) joined with the one-step
// global estimator over the alpha grid.
SweepSummary run_method_comparison(const ExperimentConfig& cfg,
                                   const std::string& out_dir);

// RMSE of the moving-threshold QMLE over the n grid, jump-free and with
// jumps; reports the fitted slope of log RMSE on log n.
RateSummary run_rate_check(const ExperimentConfig& cfg,
                           const std::string& out_dir);

// Scalar estimation model S(x, theta) = theta^2 with box [lo, hi].
ModelSpec scalar_sigma_model(double lo, double hi);

}  // namespace gjf
