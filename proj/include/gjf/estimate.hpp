#pragma once

#include "gjf/likelihood.hpp"
#include "gjf/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace gjf {

enum class EstimatorKind {
    qmle_fixed_alpha,
    qbe_fixed_alpha_beta,
    qmle_moving,
    qbe_moving,
    one_step_from_qmle,
    one_step_from_qbe,
    local_qmle,
};

const char* estimator_kind_name(EstimatorKind kind);

struct EstimateReport {
    Vector theta_hat;
    EstimatorKind kind = EstimatorKind::qmle_fixed_alpha;
    Vector stderr_;      // finite iff gamma_n is positive definite
    Matrix gamma_n;      // -n^{-1} hess of the unannealed surface at theta_hat
    bool stderr_ok = false;

    struct Diagnostics {
        int iterations = 0;
        int evals = 0;
        bool converged = false;
        bool non_identifiable = false;
        bool boundary = false;
        bool fallback_used = false;
        double hess_cond = 0.0;
        std::vector<int> filter_sizes;
    } diag;

    struct Echo {
        double alpha = -1.0;
        double beta = -1.0;
        double rho = -1.0;
        int kappa = 0;
        double delta0 = -1.0;
        double delta1 = -1.0;
        double B = -1.0;
    } echo;
};

std::string report_to_json(const EstimateReport& report);

struct OptimOptions {
    double tol = 1e-8;
    int max_iter = 200;
    int starts = 8;
    int grid = 64;
    std::uint64_t seed = 0;
};

// Maximize the surface over the box. p = 1 uses a coarse scan, golden-section
// refinement and a Newton polish; p >= 2 uses multi-start projected BFGS.
EstimateReport qmle(const LikelihoodSurface& surface, const Box& box,
                    const OptimOptions& opts = OptimOptions{});

struct QuadOptions {
    double rel_tol = 1e-6;
    int max_depth = 48;
    int gh_order = 12;
};

using PriorFn = std::function<double(const Vector&)>;

// Posterior mean under exp(H) with the given prior (uniform when absent).
// Fixed-alpha surfaces are annealed with the supplied beta first; moving
// surfaces use H_n directly and reject a beta argument.
EstimateReport qbe(const LikelihoodSurface& surface, const Box& box,
                   const PriorFn& prior = nullptr,
                   std::optional<double> beta = std::nullopt,
                   const QuadOptions& qopts = QuadOptions{},
                   const OptimOptions& opts = OptimOptions{});

// theta0 + A_1 (+ A_2 when kappa = 4) against the target surface; falls back
// to the box center (flagged) when the Hessian is singular or the corrected
// value leaves the box.
EstimateReport one_step(const EstimateReport& initial,
                        const LikelihoodSurface& target, int kappa,
                        const Box& box);

struct ObservedInformation {
    Matrix gamma_n;
    Vector stderr_;
    bool ok = false;
};

ObservedInformation observed_information(const LikelihoodSurface& surface,
                                         const Vector& theta_hat);

}  // namespace gjf
