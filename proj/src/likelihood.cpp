#include "gjf/likelihood.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <memory>
#include <sstream>

namespace gjf {

EvalError::EvalError(int k, int j, Vector th)
    : std::runtime_error([&] {
          std::ostringstream msg;
          msg << "S not positive definite at block " << (k + 1) << ", increment "
              << (j + 1) << ", theta = [";
          for (int i = 0; i < th.size(); ++i) msg << (i ? ", " : "") << th[i];
          msg << "]";
          return msg.str();
      }()),
      block(k),
      increment(j),
      theta(std::move(th)) {}

std::string SurfaceMeta::kind_name() const {
    std::string base = filter_kind_name(kind);
    if (annealed) base += "-annealed";
    return base;
}

namespace {

struct QuadItem {
    int x_row = 0;
    Matrix M;
    double kappa = 1.0;
};

struct BlockData {
    double wq = 0.0;  // 1 / (q h)
    double wp = 0.0;  // 1 / p
    std::vector<QuadItem> items;  // x-dependent path
    Matrix m_sum;                 // aggregated sum of M kappa (x-independent path)
    double count = 0.0;           // #kept, weights the log det term
    int first_kept = 0;
};

struct SurfData {
    ModelSpec spec;
    Matrix x;
    std::vector<BlockData> blocks;
    int n = 0;
    double h = 0.0;
};

// S^{-1}, log det S and the premultiplied derivative blocks P = S^{-1} dS
// up to the requested order, at one (block, x, theta).
struct BlockDerivs {
    Matrix W;
    double logdet = 0.0;
    std::vector<Matrix> P1, P2, P3;
};

bool make_block_derivs(const ModelSpec& spec, int k, const Vector& x,
                       const Vector& theta, int order, BlockDerivs& out) {
    const Matrix S = spec.s_of(k, x, theta);
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) return false;
    const int mk = static_cast<int>(S.rows());
    out.W = llt.solve(Matrix::Identity(mk, mk));
    const Matrix L = llt.matrixL();
    out.logdet = 0.0;
    for (int i = 0; i < mk; ++i) out.logdet += 2.0 * std::log(L(i, i));

    const int p = spec.p;
    if (order >= 1) {
        out.P1.resize(static_cast<size_t>(p));
        for (int a = 0; a < p; ++a) out.P1[static_cast<size_t>(a)] = out.W * spec.ds_of(k, x, theta, a);
    }
    if (order >= 2) {
        out.P2.resize(static_cast<size_t>(p) * p);
        for (int a = 0; a < p; ++a)
            for (int b = a; b < p; ++b) {
                Matrix pab = out.W * spec.d2s_of(k, x, theta, a, b);
                out.P2[static_cast<size_t>(a) * p + b] = pab;
                out.P2[static_cast<size_t>(b) * p + a] = std::move(pab);
            }
    }
    if (order >= 3) {
        out.P3.resize(static_cast<size_t>(p) * p * p);
        for (int a = 0; a < p; ++a)
            for (int b = a; b < p; ++b)
                for (int c = b; c < p; ++c) {
                    Matrix pabc = out.W * spec.d3s_of(k, x, theta, a, b, c);
                    const int idx[3] = {a, b, c};
                    int perm[3] = {0, 1, 2};
                    std::sort(perm, perm + 3);
                    do {
                        out.P3[(static_cast<size_t>(idx[perm[0]]) * p + idx[perm[1]]) * p +
                               idx[perm[2]]] = pabc;
                    } while (std::next_permutation(perm, perm + 3));
                }
    }
    return true;
}

double tr(const Matrix& a) { return a.trace(); }
double tr(const Matrix& a, const Matrix& b) { return (a * b).trace(); }
double tr(const Matrix& a, const Matrix& b, const Matrix& c) { return (a * b * c).trace(); }
double tr(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d) {
    return (a * b * c * d).trace();
}

struct Accum {
    int order = 0;
    double val = 0.0;
    Vector g;
    Matrix H;
    Tensor3 T3;

    Accum(int p, int ord) : order(ord) {
        if (order >= 1) g = Vector::Zero(p);
        if (order >= 2) H = Matrix::Zero(p, p);
        if (order >= 3) T3 = Tensor3(p);
    }
};

// Adds w * derivatives of tr(S^{-1} M) at the prepared block state.
void add_quad(const BlockDerivs& bd, const Matrix& M, double w, int p, Accum& acc) {
    const Matrix T = bd.W * M;
    acc.val += w * tr(T);
    if (acc.order < 1) return;
    for (int a = 0; a < p; ++a) acc.g[a] += -w * tr(bd.P1[static_cast<size_t>(a)], T);
    if (acc.order < 2) return;
    auto P = [&](int a) -> const Matrix& { return bd.P1[static_cast<size_t>(a)]; };
    auto Pab = [&](int a, int b) -> const Matrix& { return bd.P2[static_cast<size_t>(a) * p + b]; };
    for (int a = 0; a < p; ++a)
        for (int b = a; b < p; ++b) {
            const double v = w * (tr(P(a), P(b), T) + tr(P(b), P(a), T) - tr(Pab(a, b), T));
            acc.H(a, b) += v;
            if (a != b) acc.H(b, a) += v;
        }
    if (acc.order < 3) return;
    auto Pabc = [&](int a, int b, int c) -> const Matrix& {
        return bd.P3[(static_cast<size_t>(a) * p + b) * p + c];
    };
    for (int a = 0; a < p; ++a)
        for (int b = a; b < p; ++b)
            for (int c = b; c < p; ++c) {
                double v = -tr(P(c), P(a), P(b), T) - tr(P(a), P(c), P(b), T) -
                           tr(P(a), P(b), P(c), T) - tr(P(c), P(b), P(a), T) -
                           tr(P(b), P(c), P(a), T) - tr(P(b), P(a), P(c), T);
                v += tr(Pab(a, c), P(b), T) + tr(P(a), Pab(b, c), T) +
                     tr(Pab(b, c), P(a), T) + tr(P(b), Pab(a, c), T);
                v += tr(P(c), Pab(a, b), T) + tr(Pab(a, b), P(c), T);
                v -= tr(Pabc(a, b, c), T);
                v *= w;
                // accumulate each distinct symmetric entry once
                const int idx[3] = {a, b, c};
                int perm[3] = {0, 1, 2};
                int seen[6][3];
                int nseen = 0;
                do {
                    int e0 = idx[perm[0]], e1 = idx[perm[1]], e2 = idx[perm[2]];
                    bool dup = false;
                    for (int s = 0; s < nseen; ++s)
                        if (seen[s][0] == e0 && seen[s][1] == e1 && seen[s][2] == e2) dup = true;
                    if (!dup) {
                        seen[nseen][0] = e0;
                        seen[nseen][1] = e1;
                        seen[nseen][2] = e2;
                        ++nseen;
                        acc.T3(e0, e1, e2) += v;
                    }
                } while (std::next_permutation(perm, perm + 3));
            }
}

// Adds w * derivatives of log det S.
void add_logdet(const BlockDerivs& bd, double w, int p, Accum& acc) {
    acc.val += w * bd.logdet;
    if (acc.order < 1) return;
    auto P = [&](int a) -> const Matrix& { return bd.P1[static_cast<size_t>(a)]; };
    auto Pab = [&](int a, int b) -> const Matrix& { return bd.P2[static_cast<size_t>(a) * p + b]; };
    for (int a = 0; a < p; ++a) acc.g[a] += w * tr(P(a));
    if (acc.order < 2) return;
    for (int a = 0; a < p; ++a)
        for (int b = a; b < p; ++b) {
            const double v = w * (tr(Pab(a, b)) - tr(P(a), P(b)));
            acc.H(a, b) += v;
            if (a != b) acc.H(b, a) += v;
        }
    if (acc.order < 3) return;
    auto Pabc = [&](int a, int b, int c) -> const Matrix& {
        return bd.P3[(static_cast<size_t>(a) * p + b) * p + c];
    };
    for (int a = 0; a < p; ++a)
        for (int b = a; b < p; ++b)
            for (int c = b; c < p; ++c) {
                double v = tr(Pabc(a, b, c)) - tr(P(c), Pab(a, b)) - tr(Pab(a, c), P(b)) -
                           tr(P(a), Pab(b, c)) + tr(P(c), P(a), P(b)) + tr(P(a), P(c), P(b));
                v *= w;
                const int idx[3] = {a, b, c};
                int perm[3] = {0, 1, 2};
                int seen[6][3];
                int nseen = 0;
                do {
                    int e0 = idx[perm[0]], e1 = idx[perm[1]], e2 = idx[perm[2]];
                    bool dup = false;
                    for (int s = 0; s < nseen; ++s)
                        if (seen[s][0] == e0 && seen[s][1] == e1 && seen[s][2] == e2) dup = true;
                    if (!dup) {
                        seen[nseen][0] = e0;
                        seen[nseen][1] = e1;
                        seen[nseen][2] = e2;
                        ++nseen;
                        acc.T3(e0, e1, e2) += v;
                    }
                } while (std::next_permutation(perm, perm + 3));
            }
}

Accum compute_field(const SurfData& data, const Vector& theta, int order) {
    const int p = data.spec.p;
    Accum acc(p, order);
    for (size_t k = 0; k < data.blocks.size(); ++k) {
        const BlockData& blk = data.blocks[k];
        if (!data.spec.x_dependent) {
            BlockDerivs bd;
            const Vector x0 = data.x.row(0).transpose();
            if (!make_block_derivs(data.spec, static_cast<int>(k), x0, theta, order, bd))
                throw EvalError(static_cast<int>(k), blk.first_kept, theta);
            add_quad(bd, blk.m_sum, blk.wq, p, acc);
            add_logdet(bd, blk.wp * blk.count, p, acc);
        } else {
            for (const QuadItem& item : blk.items) {
                BlockDerivs bd;
                const Vector xr = data.x.row(item.x_row).transpose();
                if (!make_block_derivs(data.spec, static_cast<int>(k), xr, theta, order, bd))
                    throw EvalError(static_cast<int>(k), item.x_row, theta);
                if (item.kappa != 0.0) add_quad(bd, item.M, blk.wq * item.kappa, p, acc);
                add_logdet(bd, blk.wp, p, acc);
            }
        }
    }
    // H_n = -1/2 of the accumulated penalty
    acc.val *= -0.5;
    if (order >= 1) acc.g *= -0.5;
    if (order >= 2) acc.H *= -0.5;
    if (order >= 3)
        for (double& v : acc.T3.v) v *= -0.5;
    return acc;
}

LikelihoodSurface make_surface(std::shared_ptr<const SurfData> data, SurfaceMeta meta) {
    LikelihoodSurface surface;
    surface.meta = std::move(meta);
    surface.eval = [data](const Vector& theta) {
        return compute_field(*data, theta, 0).val;
    };
    surface.grad = [data](const Vector& theta) {
        return compute_field(*data, theta, 1).g;
    };
    surface.hess = [data](const Vector& theta) {
        return compute_field(*data, theta, 2).H;
    };
    surface.third = [data](const Vector& theta) {
        return compute_field(*data, theta, 3).T3;
    };
    return surface;
}

std::shared_ptr<SurfData> build_data(const SamplePath& path, const ModelSpec& spec,
                                     const std::vector<FilterResult>& filters,
                                     const std::vector<double>& wq,
                                     const std::vector<double>& wp) {
    path.validate();
    spec.validate();
    auto data = std::make_shared<SurfData>();
    data->spec = spec;
    data->x = path.x;
    data->n = path.n();
    data->h = path.h;
    const IncrementView view = increments(path);

    for (int k = 0; k < spec.n_blocks(); ++k) {
        const FilterResult& filt = filters[static_cast<size_t>(k)];
        if (filt.n() != data->n)
            throw std::invalid_argument("loglik: filter length mismatch");
        BlockData blk;
        blk.wq = wq[static_cast<size_t>(k)];
        blk.wp = wp[static_cast<size_t>(k)];
        const int off = spec.block_offset(k);
        const int mk = spec.block_dim(k);
        blk.m_sum = Matrix::Zero(mk, mk);
        blk.count = static_cast<double>(filt.kept.size());
        blk.first_kept = filt.kept.empty() ? 0 : filt.kept.front();
        blk.items.reserve(filt.kept.size());
        for (int j : filt.kept) {
            QuadItem item;
            item.x_row = j;  // X_{t_{j-1}} for 1-based increment j+1
            const Vector dyj = view.dy.row(j).segment(off, mk).transpose();
            item.M = dyj * dyj.transpose();
            item.kappa = filt.cap[static_cast<size_t>(j)] ? 1.0 : 0.0;
            blk.m_sum += item.kappa * item.M;
            blk.items.push_back(std::move(item));
        }
        if (!spec.x_dependent) blk.items.clear();
        data->blocks.push_back(std::move(blk));
    }
    return data;
}

}  // namespace

LikelihoodSurface fixed_alpha_loglik(const SamplePath& path, const ModelSpec& spec,
                                     const std::vector<FilterResult>& filters,
                                     const std::vector<TruncationConstants>& consts) {
    if (filters.size() != static_cast<size_t>(spec.n_blocks()) ||
        consts.size() != filters.size())
        throw std::invalid_argument("fixed_alpha_loglik: need one filter and one constant set per block");
    std::vector<double> wq, wp;
    for (int k = 0; k < spec.n_blocks(); ++k) {
        const FilterResult& filt = filters[static_cast<size_t>(k)];
        const TruncationConstants& tc = consts[static_cast<size_t>(k)];
        if (filt.kind != FilterKind::fixed_alpha)
            throw std::invalid_argument("fixed_alpha_loglik: filter kind mismatch");
        if (std::abs(filt.alpha - tc.alpha) > 1e-12 || tc.m != spec.block_dim(k))
            throw std::invalid_argument("fixed_alpha_loglik: constants inconsistent with filter");
        wq.push_back(1.0 / (tc.q * path.h));
        wp.push_back(1.0 / tc.p);
    }
    auto data = build_data(path, spec, filters, wq, wp);

    SurfaceMeta meta;
    meta.kind = FilterKind::fixed_alpha;
    meta.n = path.n();
    meta.h = path.h;
    meta.p = spec.p;
    meta.consts = consts;
    for (const auto& f : filters) meta.kept_sizes.push_back(static_cast<int>(f.kept.size()));
    return make_surface(std::move(data), std::move(meta));
}

LikelihoodSurface annealed_loglik(const LikelihoodSurface& surface, double beta) {
    if (!(beta > 0.0 && beta <= 0.5))
        throw std::invalid_argument("annealed_loglik: beta must be in (0, 1/2]");
    const double factor = std::pow(static_cast<double>(surface.meta.n), -1.0 + 2.0 * beta);

    LikelihoodSurface out;
    out.meta = surface.meta;
    out.meta.annealed = true;
    out.meta.beta = beta;
    out.meta.scale_factor = surface.meta.scale_factor * factor;
    auto base_eval = surface.eval;
    auto base_grad = surface.grad;
    auto base_hess = surface.hess;
    auto base_third = surface.third;
    out.eval = [base_eval, factor](const Vector& th) { return factor * base_eval(th); };
    out.grad = [base_grad, factor](const Vector& th) { return Vector(factor * base_grad(th)); };
    out.hess = [base_hess, factor](const Vector& th) { return Matrix(factor * base_hess(th)); };
    out.third = [base_third, factor](const Vector& th) {
        Tensor3 t = base_third(th);
        for (double& v : t.v) v *= factor;
        return t;
    };
    return out;
}

LikelihoodSurface moving_loglik(const SamplePath& path, const ModelSpec& spec,
                                const std::vector<FilterResult>& filters,
                                const std::vector<double>& pn,
                                const std::vector<double>& qn) {
    if (filters.size() != static_cast<size_t>(spec.n_blocks()) ||
        pn.size() != filters.size() || qn.size() != filters.size())
        throw std::invalid_argument("moving_loglik: need filter, pn, qn per block");
    std::vector<double> wq, wp;
    for (int k = 0; k < spec.n_blocks(); ++k) {
        if (filters[static_cast<size_t>(k)].kind != FilterKind::moving)
            throw std::invalid_argument("moving_loglik: filter kind mismatch");
        if (!(pn[static_cast<size_t>(k)] > 0.0) || !(qn[static_cast<size_t>(k)] > 0.0))
            throw std::invalid_argument("moving_loglik: pn and qn must be positive");
        wq.push_back(1.0 / (qn[static_cast<size_t>(k)] * path.h));
        wp.push_back(1.0 / pn[static_cast<size_t>(k)]);
    }
    auto data = build_data(path, spec, filters, wq, wp);

    SurfaceMeta meta;
    meta.kind = FilterKind::moving;
    meta.n = path.n();
    meta.h = path.h;
    meta.p = spec.p;
    meta.pn = pn;
    meta.qn = qn;
    for (const auto& f : filters) meta.kept_sizes.push_back(static_cast<int>(f.kept.size()));
    return make_surface(std::move(data), std::move(meta));
}

LikelihoodSurface local_loglik(const SamplePath& path, double rho, double eta) {
    path.validate();
    if (path.dim_y() != 1)
        throw std::invalid_argument("local_loglik: scalar model required");
    const FilterResult filt = local_filter_set(path, rho);
    if (filt.kept.empty())
        throw std::runtime_error("local_loglik: no increments survive the filter");

    const int n = path.n();
    const double h = path.h;
    double ss = 0.0;  // sum over kept of h^{-1} Xbar^2
    for (int j : filt.kept) {
        const double xbar = path.y(j + 1, 0) - path.y(j, 0) + eta * path.y(j, 0) * h;
        ss += xbar * xbar / h;
    }
    const double m = static_cast<double>(filt.kept.size());

    SurfaceMeta meta;
    meta.kind = FilterKind::local;
    meta.n = n;
    meta.h = h;
    meta.p = 1;
    meta.rho = rho;
    meta.kept_sizes = {static_cast<int>(filt.kept.size())};

    LikelihoodSurface surface;
    surface.meta = std::move(meta);
    surface.eval = [ss, m](const Vector& th) {
        const double s = th[0];
        return -0.5 * ss / (s * s) - 0.5 * m * std::log(s * s);
    };
    surface.grad = [ss, m](const Vector& th) {
        const double s = th[0];
        Vector g(1);
        g[0] = ss / (s * s * s) - m / s;
        return g;
    };
    surface.hess = [ss, m](const Vector& th) {
        const double s = th[0];
        Matrix H(1, 1);
        H(0, 0) = -3.0 * ss / (s * s * s * s) + m / (s * s);
        return H;
    };
    surface.third = [ss, m](const Vector& th) {
        const double s = th[0];
        Tensor3 t(1);
        t(0, 0, 0) = 12.0 * ss / std::pow(s, 5) - 2.0 * m / (s * s * s);
        return t;
    };
    return surface;
}

}  // namespace gjf
