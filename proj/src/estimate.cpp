#include "gjf/estimate.hpp"

#include <json.hpp>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gjf {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}  // namespace

const char* estimator_kind_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::qmle_fixed_alpha: return "qmle_fixed_alpha";
        case EstimatorKind::qbe_fixed_alpha_beta: return "qbe_fixed_alpha_beta";
        case EstimatorKind::qmle_moving: return "qmle_moving";
        case EstimatorKind::qbe_moving: return "qbe_moving";
        case EstimatorKind::one_step_from_qmle: return "one_step_from_qmle";
        case EstimatorKind::one_step_from_qbe: return "one_step_from_qbe";
        case EstimatorKind::local_qmle: return "local_qmle";
    }
    return "?";
}

ObservedInformation observed_information(const LikelihoodSurface& surface,
                                         const Vector& theta_hat) {
    const int n = surface.meta.n;
    const int p = surface.meta.p;
    ObservedInformation info;
    Matrix H = surface.hess(theta_hat) / surface.meta.scale_factor;
    info.gamma_n = -H / static_cast<double>(n);
    info.gamma_n = 0.5 * (info.gamma_n + info.gamma_n.transpose().eval());
    info.stderr_ = Vector::Constant(p, kNan);

    Eigen::LLT<Matrix> llt(info.gamma_n);
    if (llt.info() == Eigen::Success) {
        const Matrix inv = llt.solve(Matrix::Identity(p, p));
        bool finite = true;
        Vector se(p);
        for (int i = 0; i < p; ++i) {
            const double v = inv(i, i);
            if (!(v > 0.0) || !std::isfinite(v)) finite = false;
            se[i] = std::sqrt(v / n);
        }
        if (finite) {
            info.stderr_ = se;
            info.ok = true;
        }
    }
    return info;
}

namespace {

EstimatorKind qmle_kind_for(const SurfaceMeta& meta) {
    switch (meta.kind) {
        case FilterKind::fixed_alpha: return EstimatorKind::qmle_fixed_alpha;
        case FilterKind::moving: return EstimatorKind::qmle_moving;
        case FilterKind::local: return EstimatorKind::local_qmle;
    }
    return EstimatorKind::qmle_fixed_alpha;
}

void fill_echo(EstimateReport& report, const SurfaceMeta& meta) {
    if (!meta.consts.empty()) report.echo.alpha = meta.consts.front().alpha;
    if (meta.annealed) report.echo.beta = meta.beta;
    if (meta.kind == FilterKind::local) report.echo.rho = meta.rho;
}

struct SafeSurface {
    const LikelihoodSurface& surface;
    mutable int evals = 0;
    mutable int failures = 0;

    double value(const Vector& theta) const {
        ++evals;
        try {
            return surface.eval(theta);
        } catch (const EvalError&) {
            ++failures;
            return kNegInf;
        }
    }
};

bool at_lower(const Box& box, const Vector& th, int i) {
    return th[i] <= box.lo[i] + 1e-12 * std::max(1.0, std::abs(box.lo[i]));
}
bool at_upper(const Box& box, const Vector& th, int i) {
    return th[i] >= box.hi[i] - 1e-12 * std::max(1.0, std::abs(box.hi[i]));
}

Vector projected_gradient(const Box& box, const Vector& th, const Vector& g) {
    Vector pg = g;
    for (int i = 0; i < th.size(); ++i) {
        if (at_lower(box, th, i) && g[i] < 0.0) pg[i] = 0.0;
        if (at_upper(box, th, i) && g[i] > 0.0) pg[i] = 0.0;
    }
    return pg;
}

// One-dimensional maximization: coarse scan, golden-section refinement on the
// bracketing interval, then a safeguarded Newton polish.
void maximize_1d(const SafeSurface& f, const LikelihoodSurface& surface,
                 const Box& box, const OptimOptions& opts, EstimateReport& report) {
    const double lo = box.lo[0], hi = box.hi[0];
    const int grid = std::max(opts.grid, 8);
    double best_x = kNan, best_f = kNegInf;
    for (int i = 0; i < grid; ++i) {
        const double x = lo + (hi - lo) * (i + 0.5) / grid;
        const double v = f.value(Vector::Constant(1, x));
        if (v > best_f) {
            best_f = v;
            best_x = x;
        }
    }
    if (!std::isfinite(best_f))
        throw std::runtime_error("qmle: surface not evaluable anywhere in the box");

    double a = std::max(lo, best_x - 1.5 * (hi - lo) / grid);
    double b = std::min(hi, best_x + 1.5 * (hi - lo) / grid);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f.value(Vector::Constant(1, x1));
    double f2 = f.value(Vector::Constant(1, x2));
    int iters = 0;
    while (b - a > 1e-13 * std::max(1.0, std::abs(b)) && iters < 200) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f.value(Vector::Constant(1, x2));
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f.value(Vector::Constant(1, x1));
        }
        ++iters;
    }
    double x = 0.5 * (a + b);
    double fx = f.value(Vector::Constant(1, x));
    if (best_f > fx) {
        x = best_x;
        fx = best_f;
    }

    // Newton polish while the curvature cooperates.
    for (int it = 0; it < 40; ++it) {
        Vector th = Vector::Constant(1, x);
        double g, H;
        try {
            g = surface.grad(th)[0];
            H = surface.hess(th)(0, 0);
        } catch (const EvalError&) {
            break;
        }
        const double pg = projected_gradient(box, th, Vector::Constant(1, g))[0];
        if (std::abs(pg) <= opts.tol * (1.0 + std::abs(fx))) break;
        if (!(H < 0.0)) break;
        double next = std::clamp(x - g / H, lo, hi);
        const double fn = f.value(Vector::Constant(1, next));
        if (!(fn >= fx)) break;
        x = next;
        fx = fn;
        ++iters;
    }

    report.theta_hat = Vector::Constant(1, x);
    report.diag.iterations = iters;
    Vector g;
    try {
        g = surface.grad(report.theta_hat);
    } catch (const EvalError&) {
        g = Vector::Constant(1, kNan);
    }
    const Vector pg = projected_gradient(box, report.theta_hat, g);
    report.diag.converged =
        std::isfinite(pg[0]) && std::abs(pg[0]) <= 100.0 * opts.tol * (1.0 + std::abs(fx));
}

// Multi-start projected BFGS for p >= 2.
void maximize_nd(const SafeSurface& f, const LikelihoodSurface& surface,
                 const Box& box, const OptimOptions& opts, EstimateReport& report) {
    const int p = box.dim();
    std::mt19937_64 rng(opts.seed + 0x5bf03635ULL);
    std::vector<Vector> starts;
    starts.push_back(box.center());
    const int extra = std::max(opts.starts - 1, 0);
    // Latin hypercube: one stratum per start and dimension.
    std::vector<std::vector<int>> strata(static_cast<size_t>(p));
    for (int d = 0; d < p; ++d) {
        auto& s = strata[static_cast<size_t>(d)];
        s.resize(static_cast<size_t>(extra));
        for (int i = 0; i < extra; ++i) s[static_cast<size_t>(i)] = i;
        std::shuffle(s.begin(), s.end(), rng);
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < extra; ++i) {
        Vector th(p);
        for (int d = 0; d < p; ++d) {
            const double u = (strata[static_cast<size_t>(d)][static_cast<size_t>(i)] + unif(rng)) / extra;
            th[d] = box.lo[d] + u * (box.hi[d] - box.lo[d]);
        }
        starts.push_back(th);
    }

    Vector best_th;
    double best_f = kNegInf;
    bool any_converged = false;
    int total_iters = 0;
    for (const Vector& start : starts) {
        Vector th = start;
        double fx = f.value(th);
        if (!std::isfinite(fx)) continue;
        Matrix Binv = Matrix::Identity(p, p);
        Vector g;
        try {
            g = surface.grad(th);
        } catch (const EvalError&) {
            continue;
        }
        bool converged = false;
        for (int it = 0; it < opts.max_iter; ++it) {
            ++total_iters;
            const Vector pg = projected_gradient(box, th, g);
            if (pg.lpNorm<Eigen::Infinity>() <= opts.tol * (1.0 + std::abs(fx))) {
                converged = true;
                break;
            }
            Vector d = Binv * g;
            if (d.dot(g) <= 0.0) {
                Binv = Matrix::Identity(p, p);
                d = g;
            }
            double step = 1.0;
            Vector th_new;
            double f_new = kNegInf;
            bool improved = false;
            for (int ls = 0; ls < 40; ++ls) {
                th_new = box.project(th + step * d);
                f_new = f.value(th_new);
                if (f_new > fx + 1e-4 * step * d.dot(g) && std::isfinite(f_new)) {
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!improved) break;
            Vector g_new;
            try {
                g_new = surface.grad(th_new);
            } catch (const EvalError&) {
                th = th_new;
                fx = f_new;
                break;
            }
            const Vector s = th_new - th;
            const Vector y = -(g_new - g);  // BFGS on the negated objective
            const double ys = y.dot(s);
            if (ys > 1e-12) {
                const Matrix I = Matrix::Identity(p, p);
                const Matrix V = I - (s * y.transpose()) / ys;
                Binv = V * Binv * V.transpose() + (s * s.transpose()) / ys;
            }
            th = th_new;
            fx = f_new;
            g = g_new;
        }
        if (fx > best_f) {
            best_f = fx;
            best_th = th;
            any_converged = converged;
        }
    }
    if (!std::isfinite(best_f) || best_th.size() == 0)
        throw std::runtime_error("qmle: surface not evaluable anywhere in the box");
    report.theta_hat = best_th;
    report.diag.iterations = total_iters;
    report.diag.converged = any_converged;
}

}  // namespace

EstimateReport qmle(const LikelihoodSurface& surface, const Box& box,
                    const OptimOptions& opts) {
    box.validate();
    if (box.dim() != surface.meta.p)
        throw std::invalid_argument("qmle: box dimension mismatch");

    EstimateReport report;
    report.kind = qmle_kind_for(surface.meta);
    fill_echo(report, surface.meta);
    report.diag.filter_sizes = surface.meta.kept_sizes;

    SafeSurface f{surface};
    if (box.dim() == 1)
        maximize_1d(f, surface, box, opts, report);
    else
        maximize_nd(f, surface, box, opts, report);
    report.diag.evals = f.evals;

    // Flatness probe: a surface with no usable gradient signal anywhere.
    {
        const double fx = f.value(report.theta_hat);
        const double fc = f.value(box.center());
        const double fl = f.value(box.lo + 0.25 * box.width());
        const double fh = box.dim() == 1
                              ? f.value(box.lo + 0.75 * box.width())
                              : f.value(box.hi - 0.25 * box.width());
        const double spread = std::max({fx, fc, fl, fh}) - std::min({fx, fc, fl, fh});
        if (std::isfinite(spread) && spread <= 1e-13 * (1.0 + std::abs(fx)))
            report.diag.non_identifiable = true;
    }

    for (int i = 0; i < box.dim(); ++i)
        if (at_lower(box, report.theta_hat, i) || at_upper(box, report.theta_hat, i))
            report.diag.boundary = true;

    const ObservedInformation info = observed_information(surface, report.theta_hat);
    report.gamma_n = info.gamma_n;
    report.stderr_ = info.stderr_;
    report.stderr_ok = info.ok && !report.diag.boundary;
    return report;
}

namespace {

using VecFn = std::function<Vector(double)>;

Vector simpson(double a, double b, const Vector& fa, const Vector& fm, const Vector& fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

void adaptive_simpson(const VecFn& f, double a, double b, const Vector& fa,
                      const Vector& fm, const Vector& fb, const Vector& whole,
                      double tol, int depth, int min_depth, Vector& out) {
    const double m = 0.5 * (a + b);
    const Vector fl = f(0.5 * (a + m));
    const Vector fr = f(0.5 * (m + b));
    const Vector left = simpson(a, m, fa, fl, fm);
    const Vector right = simpson(m, b, fm, fr, fb);
    const Vector diff = left + right - whole;
    if (depth >= min_depth &&
        (diff.lpNorm<Eigen::Infinity>() <= 15.0 * tol || depth >= 48)) {
        out += left + right + diff / 15.0;
        return;
    }
    adaptive_simpson(f, a, m, fa, fl, fm, left, 0.5 * tol, depth + 1, min_depth, out);
    adaptive_simpson(f, m, b, fm, fr, fb, right, 0.5 * tol, depth + 1, min_depth, out);
}

Vector integrate_segment(const VecFn& f, double a, double b, double tol, int min_depth) {
    const Vector fa = f(a);
    const Vector fm = f(0.5 * (a + b));
    const Vector fb = f(b);
    const Vector whole = simpson(a, b, fa, fm, fb);
    Vector out = Vector::Zero(fa.size());
    adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 0, min_depth, out);
    return out;
}

// Segment boundaries packed around the mode so the peak cannot be missed.
std::vector<double> peak_segments(double lo, double hi, double mode, double sd) {
    std::vector<double> cuts{lo, hi};
    const double widths[] = {1.0, 2.0, 3.0, 5.0, 8.0, 13.0};
    for (double w : widths) {
        cuts.push_back(mode - w * sd);
        cuts.push_back(mode + w * sd);
    }
    cuts.push_back(mode);
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> out;
    for (double c : cuts) {
        const double cc = std::clamp(c, lo, hi);
        if (out.empty() || cc > out.back() + 1e-15 * std::max(1.0, std::abs(hi)))
            out.push_back(cc);
    }
    if (out.size() < 2) out = {lo, hi};
    return out;
}

const double kGhNodes12[12] = {
    -3.889724897869782, -3.020637025120890, -2.279507080501060, -1.597682635152605,
    -0.947788391240164, -0.314240376254359, 0.314240376254359, 0.947788391240164,
    1.597682635152605, 2.279507080501060, 3.020637025120890, 3.889724897869782};
const double kGhLogWeights12[12] = {
    // log of the Gauss-Hermite weights for n = 12
    -15.140314156012836, -9.364227598091833, -5.545397479020347, -2.964078858470962,
    -1.345181937363911, -0.561881689693596, -0.561881689693596, -1.345181937363911,
    -2.964078858470962, -5.545397479020347, -9.364227598091833, -15.140314156012836};

}  // namespace

EstimateReport qbe(const LikelihoodSurface& surface, const Box& box,
                   const PriorFn& prior, std::optional<double> beta,
                   const QuadOptions& qopts, const OptimOptions& opts) {
    box.validate();
    const int p = surface.meta.p;
    if (box.dim() != p) throw std::invalid_argument("qbe: box dimension mismatch");
    if (surface.meta.kind == FilterKind::local)
        throw std::invalid_argument("qbe: not defined for the local comparator");

    LikelihoodSurface working;
    EstimatorKind kind;
    if (surface.meta.kind == FilterKind::fixed_alpha) {
        if (!beta) throw std::invalid_argument("qbe: fixed-alpha variant requires beta");
        working = annealed_loglik(surface, *beta);
        kind = EstimatorKind::qbe_fixed_alpha_beta;
    } else {
        if (beta) throw std::invalid_argument("qbe: moving variant does not take beta");
        working = surface;
        kind = EstimatorKind::qbe_moving;
    }

    const EstimateReport mode = qmle(working, box, opts);
    const double fmax = working.eval(mode.theta_hat);

    SafeSurface wf{working};
    auto weight = [&](const Vector& th) {
        const double v = wf.value(th);
        if (!std::isfinite(v)) return 0.0;
        const double pr = prior ? prior(th) : 1.0;
        return std::exp(v - fmax) * pr;
    };

    EstimateReport report;
    report.kind = kind;
    fill_echo(report, surface.meta);
    if (beta) report.echo.beta = *beta;
    report.diag.filter_sizes = surface.meta.kept_sizes;

    Vector mean(p);
    if (p == 1) {
        double sd = 0.25 * (box.hi[0] - box.lo[0]);
        try {
            const double H = working.hess(mode.theta_hat)(0, 0);
            if (H < 0.0) sd = std::min(sd, 1.0 / std::sqrt(-H));
        } catch (const EvalError&) {
        }
        const auto cuts = peak_segments(box.lo[0], box.hi[0], mode.theta_hat[0], sd);
        const VecFn f = [&](double x) {
            const double w = weight(Vector::Constant(1, x));
            Vector v(2);
            v << w, x * w;
            return v;
        };
        Vector total = Vector::Zero(2);
        // coarse pass to size the absolute tolerance
        for (size_t i = 0; i + 1 < cuts.size(); ++i)
            total += integrate_segment(f, cuts[i], cuts[i + 1], 1e-4, 2);
        const double tol = std::max(total[0], 1e-300) * qopts.rel_tol / cuts.size();
        total.setZero();
        for (size_t i = 0; i + 1 < cuts.size(); ++i)
            total += integrate_segment(f, cuts[i], cuts[i + 1], tol, 3);
        if (!(total[0] > 0.0))
            throw std::runtime_error("qbe: posterior mass vanished");
        mean[0] = total[1] / total[0];
    } else if (p == 2) {
        Matrix cov = Matrix::Identity(2, 2);
        try {
            const Matrix H = working.hess(mode.theta_hat);
            Eigen::LLT<Matrix> llt(Matrix(-H));
            if (llt.info() == Eigen::Success)
                cov = llt.solve(Matrix::Identity(2, 2));
        } catch (const EvalError&) {
        }
        const double sd0 = std::min(std::sqrt(std::abs(cov(0, 0))), 0.25 * (box.hi[0] - box.lo[0]));
        const double sd1 = std::min(std::sqrt(std::abs(cov(1, 1))), 0.25 * (box.hi[1] - box.lo[1]));
        const auto cuts0 = peak_segments(box.lo[0], box.hi[0], mode.theta_hat[0], sd0);
        const auto cuts1 = peak_segments(box.lo[1], box.hi[1], mode.theta_hat[1], sd1);
        const VecFn inner_of = [&](double x0) {
            const VecFn f1 = [&](double x1) {
                Vector th(2);
                th << x0, x1;
                const double w = weight(th);
                Vector v(3);
                v << w, x0 * w, x1 * w;
                return v;
            };
            Vector acc = Vector::Zero(3);
            for (size_t i = 0; i + 1 < cuts1.size(); ++i)
                acc += integrate_segment(f1, cuts1[i], cuts1[i + 1], 1e-9, 2);
            return acc;
        };
        Vector total = Vector::Zero(3);
        for (size_t i = 0; i + 1 < cuts0.size(); ++i)
            total += integrate_segment(inner_of, cuts0[i], cuts0[i + 1], 1e-9, 2);
        if (!(total[0] > 0.0))
            throw std::runtime_error("qbe: posterior mass vanished");
        mean[0] = total[1] / total[0];
        mean[1] = total[2] / total[0];
    } else {
        // Gauss-Hermite around the mode with the Laplace covariance.
        Matrix H;
        try {
            H = working.hess(mode.theta_hat);
        } catch (const EvalError&) {
            H = -Matrix::Identity(p, p);
        }
        Eigen::LLT<Matrix> llt(Matrix(-H));
        Matrix L = Matrix::Identity(p, p);
        if (llt.info() == Eigen::Success) {
            L = Matrix(llt.matrixL()).inverse().transpose();  // chol of (-H)^{-1}
        }
        std::vector<int> idx(static_cast<size_t>(p), 0);
        double mass = 0.0;
        Vector moment = Vector::Zero(p);
        while (true) {
            Vector z(p);
            double logw = 0.0;
            for (int d = 0; d < p; ++d) {
                const int i = idx[static_cast<size_t>(d)];
                z[d] = kGhNodes12[i];
                logw += kGhLogWeights12[i] + z[d] * z[d];
            }
            const Vector th = box.project(mode.theta_hat + std::sqrt(2.0) * (L * z));
            const double w = weight(th) * std::exp(logw);
            mass += w;
            moment += w * th;
            int d = 0;
            for (; d < p; ++d) {
                if (++idx[static_cast<size_t>(d)] < 12) break;
                idx[static_cast<size_t>(d)] = 0;
            }
            if (d == p) break;
        }
        if (!(mass > 0.0)) throw std::runtime_error("qbe: posterior mass vanished");
        mean = moment / mass;
    }

    report.theta_hat = box.project(mean);
    report.diag.evals = wf.evals;
    report.diag.converged = mode.diag.converged;
    report.diag.boundary = mode.diag.boundary;

    const ObservedInformation info = observed_information(surface, report.theta_hat);
    report.gamma_n = info.gamma_n;
    report.stderr_ = info.stderr_;
    report.stderr_ok = info.ok;
    return report;
}

EstimateReport one_step(const EstimateReport& initial, const LikelihoodSurface& target,
                        int kappa, const Box& box) {
    if (kappa != 3 && kappa != 4)
        throw std::invalid_argument("one_step: kappa must be 3 or 4");
    box.validate();
    const int p = target.meta.p;
    if (initial.theta_hat.size() != p)
        throw std::invalid_argument("one_step: initial estimate dimension mismatch");

    EstimateReport report;
    report.kind = (initial.kind == EstimatorKind::qbe_fixed_alpha_beta ||
                   initial.kind == EstimatorKind::qbe_moving)
                      ? EstimatorKind::one_step_from_qbe
                      : EstimatorKind::one_step_from_qmle;
    report.echo = initial.echo;
    report.echo.kappa = kappa;
    report.diag.filter_sizes = target.meta.kept_sizes;

    const Vector theta0 = initial.theta_hat;
    bool ok = box.contains(theta0, 1e-12);
    Vector corrected = theta0;
    if (ok) {
        try {
            const Vector g = target.grad(theta0);
            const Matrix H = target.hess(theta0);
            Eigen::JacobiSVD<Matrix> svd(H);
            const double smin = svd.singularValues().minCoeff();
            const double smax = svd.singularValues().maxCoeff();
            report.diag.hess_cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
            if (!(smin > 0.0) || report.diag.hess_cond > 1e14) {
                ok = false;
            } else {
                Eigen::FullPivLU<Matrix> lu(H);
                const Vector a1 = -lu.solve(g);
                corrected = theta0 + a1;
                if (kappa == 4) {
                    const Tensor3 t3 = target.third(theta0);
                    Vector contracted(p);
                    for (int a = 0; a < p; ++a) {
                        double s = 0.0;
                        for (int b = 0; b < p; ++b)
                            for (int c = 0; c < p; ++c) s += t3(a, b, c) * a1[b] * a1[c];
                        contracted[a] = s;
                    }
                    corrected += -0.5 * lu.solve(contracted);
                }
                if (!box.contains(corrected, 0.0)) ok = false;
            }
        } catch (const EvalError&) {
            ok = false;
        }
    }

    if (ok) {
        report.theta_hat = corrected;
    } else {
        report.theta_hat = box.center();
        report.diag.fallback_used = true;
    }
    report.diag.converged = ok;

    const ObservedInformation info = observed_information(target, report.theta_hat);
    report.gamma_n = info.gamma_n;
    report.stderr_ = info.stderr_;
    report.stderr_ok = info.ok && !report.diag.fallback_used;
    return report;
}

std::string report_to_json(const EstimateReport& report) {
    nlohmann::json j;
    j["kind"] = estimator_kind_name(report.kind);
    j["theta_hat"] = std::vector<double>(report.theta_hat.data(),
                                         report.theta_hat.data() + report.theta_hat.size());
    if (report.stderr_ok) {
        j["stderr"] = std::vector<double>(report.stderr_.data(),
                                          report.stderr_.data() + report.stderr_.size());
    } else {
        j["stderr"] = nullptr;
    }
    std::vector<std::vector<double>> gamma;
    for (int r = 0; r < report.gamma_n.rows(); ++r) {
        std::vector<double> row;
        for (int c = 0; c < report.gamma_n.cols(); ++c) row.push_back(report.gamma_n(r, c));
        gamma.push_back(std::move(row));
    }
    j["gamma_n"] = gamma;
    j["diagnostics"] = {{"iterations", report.diag.iterations},
                        {"evals", report.diag.evals},
                        {"converged", report.diag.converged},
                        {"non_identifiable", report.diag.non_identifiable},
                        {"boundary", report.diag.boundary},
                        {"fallback_used", report.diag.fallback_used},
                        {"hess_cond", report.diag.hess_cond},
                        {"filter_sizes", report.diag.filter_sizes}};
    nlohmann::json echo;
    if (report.echo.alpha >= 0.0) echo["alpha"] = report.echo.alpha;
    if (report.echo.beta >= 0.0) echo["beta"] = report.echo.beta;
    if (report.echo.rho >= 0.0) echo["rho"] = report.echo.rho;
    if (report.echo.kappa > 0) echo["kappa"] = report.echo.kappa;
    if (report.echo.delta0 >= 0.0) echo["delta0"] = report.echo.delta0;
    if (report.echo.delta1 >= 0.0) echo["delta1"] = report.echo.delta1;
    if (report.echo.B >= 0.0) echo["B"] = report.echo.B;
    j["config"] = echo;
    return j.dump(2);
}

}  // namespace gjf
