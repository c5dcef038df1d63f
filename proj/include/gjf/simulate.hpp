#pragma once

#include "gjf/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

namespace gjf {

// Ornstein-Uhlenbeck with compound Poisson jumps:
//   dX_t = -eta X_t dt + sigma dW_t + dJ_t,  J_t = sum_{i<=N_t} xi_i,
// N Poisson with intensity lambda, marks xi_i ~ N(0, eps).
// eps is the variance of the Gaussian jump marks.
struct OuJumpParams {
    double eta = 0.1;
    double sigma = 0.1;
    double lambda = 20.0;
    double eps = 0.05;
    double x0 = 1.0;
    int n = 1000;
    double T = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

// Euler-Maruyama on the observation grid t_j = j T / n; deterministic given
// the seed, with jump_truth[j] = true iff >= 1 Poisson event fell in step j.
SamplePath simulate_ou_jump(const OuJumpParams& params);

using DriftFn = std::function<Vector(const Vector&)>;
// Returns the summed jump marks for one step of length h, or nullopt if the
// step contains no jump event.
using JumpFn = std::function<std::optional<Vector>(std::mt19937_64&, double)>;

// Generic block-diagonal Euler scheme with user drift and jump process.
// Throws if S(x, theta) loses positive definiteness along the path.
SamplePath simulate_generic(const ModelSpec& spec, const Vector& theta,
                            const Vector& x0, const DriftFn& drift,
                            const JumpFn& jumps, int n, double T,
                            std::uint64_t seed);

std::uint64_t splitmix64(std::uint64_t state);

// Seed for replicate r of a run with the given base seed; streams for
// distinct replicates are independent so parallel order does not matter.
std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t replicate);

}  // namespace gjf
