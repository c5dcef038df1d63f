#pragma once

#include "gjf/filter.hpp"
#include "gjf/model.hpp"
#include "gjf/statdist.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gjf {

struct Tensor3 {
    int p = 0;
    std::vector<double> v;

    Tensor3() = default;
    explicit Tensor3(int dim) : p(dim), v(static_cast<size_t>(dim) * dim * dim, 0.0) {}
    double& operator()(int a, int b, int c) {
        return v[(static_cast<size_t>(a) * p + b) * p + c];
    }
    double operator()(int a, int b, int c) const {
        return v[(static_cast<size_t>(a) * p + b) * p + c];
    }
};

struct SurfaceMeta {
    FilterKind kind = FilterKind::fixed_alpha;
    bool annealed = false;
    double scale_factor = 1.0;  // multiplier applied on top of the base field
    int n = 0;
    double h = 0.0;
    int p = 1;
    std::vector<int> kept_sizes;
    std::vector<TruncationConstants> consts;  // fixed-alpha surfaces
    std::vector<double> pn, qn;               // moving surfaces
    double beta = 0.0;
    double rho = 0.0;

    std::string kind_name() const;
};

// Quasi-log-likelihood with theta-derivatives up to order 3. The callables
// are pure and safe to invoke concurrently.
struct LikelihoodSurface {
    std::function<double(const Vector&)> eval;
    std::function<Vector(const Vector&)> grad;
    std::function<Matrix(const Vector&)> hess;
    std::function<Tensor3(const Vector&)> third;
    SurfaceMeta meta;
};

// Raised when S^{(k)}(x_{j-1}, theta) is not positive definite during an
// evaluation; carries the block, the 0-based increment and theta.
struct EvalError : std::runtime_error {
    int block;
    int increment;
    Vector theta;
    EvalError(int k, int j, Vector th);
};

// H_n(theta; alpha): per kept increment, q^{-1} h^{-1} S^{-1}[(dY)^{x2}] K_{n,j}
// plus p^{-1} log det S, summed over blocks, times -1/2.
LikelihoodSurface fixed_alpha_loglik(const SamplePath& path, const ModelSpec& spec,
                                     const std::vector<FilterResult>& filters,
                                     const std::vector<TruncationConstants>& consts);

// n^{-1+2 beta} H_n: pointwise rescaling of value and derivatives.
LikelihoodSurface annealed_loglik(const LikelihoodSurface& surface, double beta);

// Moving-threshold H_n over the order-statistic kept sets, with the freely
// chosen factors pn, qn (one entry per block).
LikelihoodSurface moving_loglik(const SamplePath& path, const ModelSpec& spec,
                                const std::vector<FilterResult>& filters,
                                const std::vector<double>& pn,
                                const std::vector<double>& qn);

// Local-threshold comparator for the scalar model: l_n(sigma) over increments
// with |dX| <= h^rho, drift-compensated with the supplied eta.
LikelihoodSurface local_loglik(const SamplePath& path, double rho, double eta);

}  // namespace gjf
