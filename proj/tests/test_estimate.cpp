#include "gjf/estimate.hpp"

#include "gjf/harness.hpp"
#include "gjf/simulate.hpp"
#include "gjf/statdist.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gjf;

TEST_SUITE_BEGIN("estimate");

namespace {

// Hand-built surface -(c/2)(theta - center)^2 with exact derivatives.
LikelihoodSurface quadratic_surface(double center, double curvature, int n = 100) {
    LikelihoodSurface surface;
    surface.meta.kind = FilterKind::fixed_alpha;
    surface.meta.n = n;
    surface.meta.h = 1.0 / n;
    surface.meta.p = 1;
    surface.eval = [=](const Vector& th) {
        const double d = th[0] - center;
        return -0.5 * curvature * d * d;
    };
    surface.grad = [=](const Vector& th) {
        return Vector::Constant(1, -curvature * (th[0] - center));
    };
    surface.hess = [=](const Vector&) { return Matrix::Constant(1, 1, -curvature); };
    surface.third = [](const Vector&) { return Tensor3(1); };
    return surface;
}

LikelihoodSurface plain_scalar_surface(const SamplePath& path, const ModelSpec& spec) {
    FilterResult filt;
    filt.kind = FilterKind::fixed_alpha;
    filt.scaled_norms.assign(static_cast<size_t>(path.n()), 0.0);
    filt.cap.assign(static_cast<size_t>(path.n()), 1);
    for (int j = 0; j < path.n(); ++j) filt.kept.push_back(j);
    return fixed_alpha_loglik(path, spec, {filt}, {TruncationConstants::make(0.0, 1)});
}

struct MovingFit {
    LikelihoodSurface surface;
    double qmle_value = 0.0;
};

MovingFit moving_fit(const SamplePath& path, const ModelSpec& spec, const Box& box,
                     const std::string& qn_mode) {
    const auto scale = initial_scale(path, spec, 0);
    const auto filt = moving_filter_set(path, spec, 0, scale, 1.0, 4.0 / 9.0,
                                        CapRule{1.0, -0.45, false, true});
    const double pn = static_cast<double>(filt.s_n) / path.n();
    const double qn = qn_mode == "chi2" ? truncation_factor(filt.alpha, 1) : 1.0;
    MovingFit fit{moving_loglik(path, spec, {filt}, {pn}, {qn}), 0.0};
    fit.qmle_value = qmle(fit.surface, box).theta_hat[0];
    return fit;
}

}  // namespace

TEST_CASE("qmle finds the maximum of a quadratic test surface") {
    const auto surface = quadratic_surface(0.3, 50.0);
    const auto report = qmle(surface, Box::scalar(0.0, 1.0));
    CHECK(report.theta_hat[0] == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(report.diag.converged);
    CHECK_FALSE(report.diag.boundary);
}

TEST_CASE("qmle matches the closed form of the scalar model") {
    OuJumpParams params;
    params.lambda = 0.0;
    params.n = 1000;
    params.seed = 301;
    const SamplePath path = simulate_ou_jump(params);
    const ModelSpec spec = scalar_sigma_model(0.02, 0.5);
    const auto surface = plain_scalar_surface(path, spec);

    const IncrementView view = increments(path);
    double ss = 0.0;
    for (int j = 0; j < path.n(); ++j) ss += view.dy(j, 0) * view.dy(j, 0) / path.h;
    const double closed = std::sqrt(ss / path.n());

    const auto report = qmle(surface, spec.theta_box);
    CHECK(report.theta_hat[0] == doctest::Approx(closed).epsilon(1e-8));

    // observed information: gamma = 2 / theta_hat^2
    CHECK(report.gamma_n(0, 0) ==
          doctest::Approx(2.0 / (closed * closed)).epsilon(1e-8));
    CHECK(report.stderr_ok);
    CHECK(report.stderr_[0] ==
          doctest::Approx(closed / std::sqrt(2.0 * path.n())).epsilon(1e-8));
}

TEST_CASE("jump-free qmle is unbiased at the simulation truth") {
    const ModelSpec spec = scalar_sigma_model(0.02, 0.5);
    const int reps = 300;
    double total = 0.0;
    for (int r = 0; r < reps; ++r) {
        OuJumpParams params;
        params.lambda = 0.0;
        params.n = 1000;
        params.seed = replicate_seed(888, static_cast<std::uint64_t>(r));
        const SamplePath path = simulate_ou_jump(params);
        total += qmle(plain_scalar_surface(path, spec), spec.theta_box).theta_hat[0];
    }
    CHECK(std::abs(total / reps - 0.1) <= 0.002);
}

TEST_CASE("observed information on a quadratic surface") {
    const int n = 400;
    const auto surface = quadratic_surface(0.5, static_cast<double>(n), n);  // hess = -n
    const auto info = observed_information(surface, Vector::Constant(1, 0.5));
    CHECK(info.ok);
    CHECK(info.gamma_n(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(info.stderr_[0] == doctest::Approx(1.0 / std::sqrt(n)).epsilon(1e-12));

    // non-concave point: stderr unavailable
    const auto bad = observed_information(quadratic_surface(0.5, -3.0, n),
                                          Vector::Constant(1, 0.5));
    CHECK_FALSE(bad.ok);
}

TEST_CASE("annealing does not move the qmle") {
    OuJumpParams params;
    params.lambda = 20.0;
    params.n = 500;
    params.seed = 99;
    const SamplePath path = simulate_ou_jump(params);
    const ModelSpec spec = scalar_sigma_model(0.02, 0.5);
    const auto surface = plain_scalar_surface(path, spec);
    const double base = qmle(surface, spec.theta_box).theta_hat[0];
    for (double beta : {0.2, 0.45}) {
        const double annealed =
            qmle(annealed_loglik(surface, beta), spec.theta_box).theta_hat[0];
        CHECK(annealed == doctest::Approx(base).epsilon(1e-6));
    }
}

TEST_CASE("qbe") {
    SUBCASE("symmetric quadratic posterior mean is the center") {
        const auto surface = quadratic_surface(0.4, 4000.0);
        const auto report = qbe(surface, Box::scalar(0.0, 1.0), nullptr, 0.45);
        CHECK(report.theta_hat[0] == doctest::Approx(0.4).epsilon(1e-6));
        CHECK(report.kind == EstimatorKind::qbe_fixed_alpha_beta);
    }
    SUBCASE("matches a dense trapezoid oracle") {
        OuJumpParams params;
        params.lambda = 0.0;
        params.n = 400;
        params.seed = 17;
        const SamplePath path = simulate_ou_jump(params);
        const ModelSpec spec = scalar_sigma_model(0.02, 0.5);
        const auto surface = plain_scalar_surface(path, spec);
        const double beta = 0.45;
        const auto report = qbe(surface, spec.theta_box, nullptr, beta);

        const auto annealed = annealed_loglik(surface, beta);
        const double peak = annealed.eval(qmle(annealed, spec.theta_box).theta_hat);
        const int grid = 100000;
        double mass = 0.0, moment = 0.0;
        const double lo = spec.theta_box.lo[0], hi = spec.theta_box.hi[0];
        for (int i = 0; i <= grid; ++i) {
            const double t = lo + (hi - lo) * i / grid;
            const double w = std::exp(annealed.eval(Vector::Constant(1, t)) - peak);
            const double trap = (i == 0 || i == grid) ? 0.5 : 1.0;
            mass += trap * w;
            moment += trap * w * t;
        }
        CHECK(report.theta_hat[0] == doctest::Approx(moment / mass).epsilon(1e-6));
    }
    SUBCASE("posterior concentrates toward the qmle as beta grows") {
        OuJumpParams params;
        params.lambda = 20.0;
        params.n = 1000;
        params.seed = 404;
        const SamplePath path = simulate_ou_jump(params);
        const ModelSpec spec = scalar_sigma_model(0.02, 0.5);
        const auto scale = initial_scale(path, spec, 0);
        const auto filt = global_filter_set(path, spec, 0, scale, 0.05,
                                            CapRule{1.0, -0.25, false, true});
        const auto surface = fixed_alpha_loglik(path, spec, {filt},
                                                {TruncationConstants::make(0.05, 1)});
        const double mode = qmle(surface, spec.theta_box).theta_hat[0];
        double prev = std::numeric_limits<double>::infinity();
        for (double beta : {0.2, 0.3, 0.4, 0.45}) {
            const double posterior = qbe(surface, spec.theta_box, nullptr, beta).theta_hat[0];
            const double gap = std::abs(posterior - mode);
            CHECK(gap <= prev + 1e-9);
            prev = gap;
        }
    }
    SUBCASE("tensor quadrature recovers a two-parameter center") {
        LikelihoodSurface surface;
        surface.meta.kind = FilterKind::moving;
        surface.meta.n = 200;
        surface.meta.p = 2;
        Vector center(2);
        center << 0.3, 0.7;
        surface.eval = [center](const Vector& th) {
            return -2000.0 * (th - center).squaredNorm();
        };
        surface.grad = [center](const Vector& th) {
            return Vector(-4000.0 * (th - center));
        };
        surface.hess = [](const Vector&) {
            return Matrix(-4000.0 * Matrix::Identity(2, 2));
        };
        surface.third = [](const Vector&) { return Tensor3(2); };
        Box box;
        box.lo = Vector::Zero(2);
        box.hi = Vector::Ones(2);
        const auto report = qbe(surface, box);
        CHECK(report.theta_hat[0] == doctest::Approx(0.3).epsilon(1e-5));
        CHECK(report.theta_hat[1] == doctest::Approx(0.7).epsilon(1e-5));
    }
    SUBCASE("laplace route recovers a three-parameter center") {
        LikelihoodSurface surface;
        surface.meta.kind = FilterKind::moving;
        surface.meta.n = 200;
        surface.meta.p = 3;
        Vector center(3);
        center << 0.3, 0.5, 0.7;
        surface.eval = [center](const Vector& th) {
            return -3000.0 * (th - center).squaredNorm();
        };
        surface.grad = [center](const Vector& th) {
            return Vector(-6000.0 * (th - center));
        };
        surface.hess = [](const Vector&) {
            return Matrix(-6000.0 * Matrix::Identity(3, 3));
        };
        surface.third = [](const Vector&) { return Tensor3(3); };
        Box box;
        box.lo = Vector::Zero(3);
        box.hi = Vector::Ones(3);
        const auto report = qbe(surface, box);
        for (int i = 0; i < 3; ++i)
            CHECK(report.theta_hat[i] == doctest::Approx(center[i]).epsilon(1e-4));
    }
    SUBCASE("mass at the box corner raises the boundary flag") {
        const auto surface = quadratic_surface(5.0, 4000.0);  // max far right of the box
        const auto report = qbe(surface, Box::scalar(0.0, 1.0), nullptr, 0.45);
        CHECK(report.diag.boundary);
        CHECK(report.theta_hat[0] > 0.95);
    }
    SUBCASE("prior stays inside the box and beta rules are enforced") {
        const auto surface = quadratic_surface(0.9, 30.0);
        const Box box = Box::scalar(0.0, 1.0);
        const auto report =
            qbe(surface, box, [](const Vector&) { return 2.0; }, 0.3);
        CHECK(report.theta_hat[0] >= box.lo[0]);
        CHECK(report.theta_hat[0] <= box.hi[0]);

        LikelihoodSurface moving = quadratic_surface(0.5, 30.0);
        moving.meta.kind = FilterKind::moving;
        CHECK_THROWS_AS(qbe(moving, box, nullptr, 0.3), std::invalid_argument);
        CHECK_NOTHROW(qbe(moving, box));
        LikelihoodSurface fixed = quadratic_surface(0.5, 30.0);
        CHECK_THROWS_AS(qbe(fixed, box), std::invalid_argument);  // beta required
    }
}

TEST_CASE("one step") {
    SUBCASE("exact on quadratics, with and without the third-order term") {
        const auto target = quadratic_surface(0.62, 500.0);
        const Box box = Box::scalar(0.0, 1.0);
        EstimateReport initial;
        initial.kind = EstimatorKind::qmle_fixed_alpha;
        initial.theta_hat = Vector::Constant(1, 0.2);
        const auto k3 = one_step(initial, target, 3, box);
        CHECK(k3.theta_hat[0] == doctest::Approx(0.62).epsilon(1e-12));
        CHECK_FALSE(k3.diag.fallback_used);
        const auto k4 = one_step(initial, target, 4, box);
        CHECK(k4.theta_hat[0] == doctest::Approx(k3.theta_hat[0]).epsilon(1e-14));
        CHECK_THROWS_AS(one_step(initial, target, 5, box), std::invalid_argument);
    }
    SUBCASE("singular hessian falls back to the box center") {
        LikelihoodSurface flat = quadratic_surface(0.5, 0.0);  // hess = 0
        EstimateReport initial;
        initial.kind = EstimatorKind::qmle_fixed_alpha;
        initial.theta_hat = Vector::Constant(1, 0.2);
        const Box box = Box::scalar(0.0, 1.0);
        const auto report = one_step(initial, flat, 3, box);
        CHECK(report.diag.fallback_used);
        CHECK(report.theta_hat[0] == 0.5);
    }
    SUBCASE("correction leaving the box falls back") {
        // the target's maximum sits far outside the box
        LikelihoodSurface outside = quadratic_surface(5.0, 20.0);
        EstimateReport initial;
        initial.kind = EstimatorKind::qbe_fixed_alpha_beta;
        initial.theta_hat = Vector::Constant(1, 0.9);
        const Box box = Box::scalar(0.0, 1.0);
        const auto report = one_step(initial, outside, 3, box);
        CHECK(report.diag.fallback_used);
        CHECK(report.kind == EstimatorKind::one_step_from_qbe);
        CHECK(report.theta_hat[0] == 0.5);
    }
    SUBCASE("idempotent at the target's own maximum") {
        OuJumpParams params;
        params.lambda = 20.0;
        params.n = 1000;
        params.seed = 73;
        const SamplePath path = simulate_ou_jump(params);
        const ModelSpec spec = scalar_sigma_model(0.02, 0.2);
        const MovingFit fit = moving_fit(path, spec, spec.theta_box, "one");
        EstimateReport own = qmle(fit.surface, spec.theta_box);
        const auto moved = one_step(own, fit.surface, 4, spec.theta_box);
        CHECK(std::abs(moved.theta_hat[0] - own.theta_hat[0]) <= 1e-6);
    }
    SUBCASE("beats the raw fixed-alpha estimator in RMSE at large n") {
        const ModelSpec spec = scalar_sigma_model(0.02, 0.2);
        const Box box = spec.theta_box;
        const int reps = 120;
        double se_raw = 0.0, se_one = 0.0;
        for (int r = 0; r < reps; ++r) {
            OuJumpParams params;
            params.n = 4000;
            params.lambda = 20.0;
            params.seed = replicate_seed(123, static_cast<std::uint64_t>(r));
            const SamplePath path = simulate_ou_jump(params);
            const auto scale = initial_scale(path, spec, 0);
            const auto filt = global_filter_set(path, spec, 0, scale, 0.2,
                                                CapRule{1.0, -0.25, false, true});
            const auto surface = fixed_alpha_loglik(path, spec, {filt},
                                                    {TruncationConstants::make(0.2, 1)});
            const auto raw = qmle(surface, box);
            const auto mfilt = moving_filter_set(path, spec, 0, scale, 1.0, 4.0 / 9.0,
                                                 CapRule{1.0, -0.45, false, true});
            const double pn = static_cast<double>(mfilt.s_n) / path.n();
            const auto msurf = moving_loglik(path, spec, {mfilt}, {pn},
                                             {truncation_factor(mfilt.alpha, 1)});
            const auto one = one_step(raw, msurf, 4, box);
            se_raw += (raw.theta_hat[0] - 0.1) * (raw.theta_hat[0] - 0.1);
            se_one += (one.theta_hat[0] - 0.1) * (one.theta_hat[0] - 0.1);
        }
        CHECK(se_one < se_raw);
    }
    SUBCASE("moves the conservative estimate toward the efficient one") {
        const ModelSpec spec = scalar_sigma_model(0.02, 0.2);
        const Box box = spec.theta_box;
        const int reps = 150;
        int improved = 0;
        for (int r = 0; r < reps; ++r) {
            OuJumpParams params;
            params.lambda = 20.0;
            params.n = 1000;
            params.seed = replicate_seed(4242, static_cast<std::uint64_t>(r));
            const SamplePath path = simulate_ou_jump(params);
            const auto scale = initial_scale(path, spec, 0);
            const auto filt = global_filter_set(path, spec, 0, scale, 0.1,
                                                CapRule{1.0, -0.25, false, true});
            const auto surface = fixed_alpha_loglik(path, spec, {filt},
                                                    {TruncationConstants::make(0.1, 1)});
            const auto raw = qmle(surface, box);
            const MovingFit fit = moving_fit(path, spec, box, "one");
            const auto corrected = one_step(raw, fit.surface, 4, box);
            if (std::abs(corrected.theta_hat[0] - fit.qmle_value) <
                std::abs(raw.theta_hat[0] - fit.qmle_value))
                ++improved;
        }
        CHECK(improved >= static_cast<int>(0.9 * reps));
    }
}

TEST_CASE("translation equivariance of qmle and qbe") {
    const double shift = 0.75;
    OuJumpParams params;
    params.lambda = 0.0;
    params.n = 300;
    params.seed = 515;
    const SamplePath path = simulate_ou_jump(params);

    const ModelSpec base = scalar_sigma_model(0.02, 0.5);
    ModelSpec shifted = base;
    shifted.theta_box = Box::scalar(0.02 + shift, 0.5 + shift);
    shifted.s = [shift](int, const Vector&, const Vector& th) {
        const double t = th[0] - shift;
        return Matrix::Constant(1, 1, t * t);
    };
    shifted.ds = [shift](int, const Vector&, const Vector& th, int) {
        return Matrix::Constant(1, 1, 2.0 * (th[0] - shift));
    };
    shifted.d2s = [](int, const Vector&, const Vector&, int, int) {
        return Matrix::Constant(1, 1, 2.0);
    };
    shifted.d3s = [](int, const Vector&, const Vector&, int, int, int) {
        return Matrix::Constant(1, 1, 0.0);
    };

    const auto s1 = plain_scalar_surface(path, base);
    const auto s2 = plain_scalar_surface(path, shifted);
    const auto r1 = qmle(s1, base.theta_box);
    const auto r2 = qmle(s2, shifted.theta_box);
    CHECK(r2.theta_hat[0] == doctest::Approx(r1.theta_hat[0] + shift).epsilon(1e-8));

    const auto b1 = qbe(s1, base.theta_box, nullptr, 0.45);
    const auto b2 = qbe(s2, shifted.theta_box, nullptr, 0.45);
    CHECK(b2.theta_hat[0] == doctest::Approx(b1.theta_hat[0] + shift).epsilon(1e-5));
}

TEST_CASE("degenerate and pathological surfaces") {
    SUBCASE("flat surface raises the non-identifiability flag") {
        LikelihoodSurface flat = quadratic_surface(0.5, 0.0);
        const auto report = qmle(flat, Box::scalar(0.0, 1.0));
        CHECK(report.diag.non_identifiable);
    }
    SUBCASE("nowhere evaluable surface throws") {
        LikelihoodSurface broken = quadratic_surface(0.5, 10.0);
        broken.eval = [](const Vector& th) -> double {
            throw EvalError(0, 0, th);
        };
        CHECK_THROWS_AS(qmle(broken, Box::scalar(0.0, 1.0)), std::runtime_error);
    }
    SUBCASE("degenerate local surface maximizes at the lower edge, flagged") {
        const auto path = oracles::path_from_increments({0.0, 5.0}, 0.001);
        const auto surface = local_loglik(path, 0.5, 0.0);  // -log(sigma)
        const auto report = qmle(surface, Box::scalar(0.05, 0.3));
        CHECK(report.theta_hat[0] == doctest::Approx(0.05).epsilon(1e-9));
        CHECK(report.diag.boundary);
        CHECK_FALSE(report.stderr_ok);
    }
}

TEST_CASE("multivariate qmle on the two-parameter model") {
    const ModelSpec spec = oracles::exp_model(true);
    Vector truth(2);
    truth << -1.2, 0.6;
    const SamplePath path =
        simulate_generic(spec, truth, Vector::Zero(1), nullptr, nullptr, 4000, 1.0, 99);
    FilterResult filt;
    filt.kind = FilterKind::fixed_alpha;
    filt.scaled_norms.assign(static_cast<size_t>(path.n()), 0.0);
    filt.cap.assign(static_cast<size_t>(path.n()), 1);
    for (int j = 0; j < path.n(); ++j) filt.kept.push_back(j);
    const auto surface =
        fixed_alpha_loglik(path, spec, {filt}, {TruncationConstants::make(0.0, 1)});
    OptimOptions opts;
    opts.seed = 7;
    const auto report = qmle(surface, spec.theta_box, opts);
    CHECK(report.diag.converged);
    CHECK(std::abs(report.theta_hat[0] - truth[0]) < 0.15);
    CHECK(std::abs(report.theta_hat[1] - truth[1]) < 0.25);
    const Vector g = surface.grad(report.theta_hat);
    CHECK(g.lpNorm<Eigen::Infinity>() <=
          1e-6 * (1.0 + std::abs(surface.eval(report.theta_hat))));
}

TEST_SUITE_END();
