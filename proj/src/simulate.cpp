#include "gjf/simulate.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace gjf {

std::uint64_t splitmix64(std::uint64_t state) {
    std::uint64_t z = state + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t replicate) {
    return splitmix64(splitmix64(base) ^ (replicate + 1) * 0x9e3779b97f4a7c15ULL);
}

void OuJumpParams::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("OuJumpParams: sigma must be positive");
    if (lambda < 0.0) throw std::invalid_argument("OuJumpParams: lambda must be nonnegative");
    if (eps < 0.0) throw std::invalid_argument("OuJumpParams: eps must be nonnegative");
    if (n < 2) throw std::invalid_argument("OuJumpParams: n must be >= 2");
    if (!(T > 0.0)) throw std::invalid_argument("OuJumpParams: T must be positive");
}

SamplePath simulate_ou_jump(const OuJumpParams& params) {
    params.validate();
    const int n = params.n;
    const double h = params.T / n;
    const double sqh = std::sqrt(h);

    std::mt19937_64 rng(splitmix64(params.seed));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::poisson_distribution<int> poisson(params.lambda * h);

    SamplePath path;
    path.t0 = 0.0;
    path.h = h;
    path.y = Matrix(n + 1, 1);
    path.jump_truth.assign(static_cast<size_t>(n), 0);
    path.y(0, 0) = params.x0;

    for (int j = 1; j <= n; ++j) {
        const double prev = path.y(j - 1, 0);
        const double z = gauss(rng);
        double dj = 0.0;
        const int events = params.lambda > 0.0 ? poisson(rng) : 0;
        if (events > 0) {
            // sum of `events` iid N(0, eps) marks
            dj = std::sqrt(static_cast<double>(events) * params.eps) * gauss(rng);
            path.jump_truth[static_cast<size_t>(j - 1)] = 1;
        }
        path.y(j, 0) = prev - params.eta * prev * h + params.sigma * sqh * z + dj;
    }
    path.x = path.y;
    return path;
}

SamplePath simulate_generic(const ModelSpec& spec, const Vector& theta,
                            const Vector& x0, const DriftFn& drift,
                            const JumpFn& jumps, int n, double T,
                            std::uint64_t seed) {
    spec.validate();
    if (n < 2) throw std::invalid_argument("simulate_generic: n must be >= 2");
    if (!(T > 0.0)) throw std::invalid_argument("simulate_generic: T must be positive");
    if (x0.size() != spec.m)
        throw std::invalid_argument("simulate_generic: x0 must have dim m");

    const double h = T / n;
    const double sqh = std::sqrt(h);
    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> gauss(0.0, 1.0);

    SamplePath path;
    path.t0 = 0.0;
    path.h = h;
    path.y = Matrix(n + 1, spec.m);
    path.jump_truth.assign(static_cast<size_t>(n), 0);
    path.y.row(0) = x0.transpose();

    for (int j = 1; j <= n; ++j) {
        const Vector prev = path.y.row(j - 1).transpose();
        Vector next = prev;
        if (drift) next += drift(prev) * h;

        for (int k = 0; k < spec.n_blocks(); ++k) {
            const int off = spec.block_offset(k);
            const int mk = spec.block_dim(k);
            Matrix root;
            if (spec.sigma) {
                root = spec.sigma(k, prev, theta);
            } else {
                Eigen::LLT<Matrix> llt(spec.s(k, prev, theta));
                if (llt.info() != Eigen::Success)
                    throw std::runtime_error(
                        "simulate_generic: S lost positive definiteness at step " +
                        std::to_string(j) + ", block " + std::to_string(k + 1));
                root = llt.matrixL();
            }
            Vector z(mk);
            for (int i = 0; i < mk; ++i) z[i] = gauss(rng);
            next.segment(off, mk) += root * z * sqh;
        }

        if (jumps) {
            if (auto mark = jumps(rng, h)) {
                if (mark->size() != spec.m)
                    throw std::runtime_error("simulate_generic: jump mark has wrong dim");
                next += *mark;
                path.jump_truth[static_cast<size_t>(j - 1)] = 1;
            }
        }
        path.y.row(j) = next.transpose();
    }
    path.x = path.y;
    return path;
}

}  // namespace gjf
