#pragma once

#include "gjf/model.hpp"

#include <cstdint>
#include <vector>

namespace gjf {

enum class FilterKind { fixed_alpha, moving, local };

const char* filter_kind_name(FilterKind kind);

// Per-increment scale matrices S-bar for one block (j = 1..n), with the
// eigenvalue floor eps0/2 applied.
struct ScaleEstimate {
    int block = 0;
    double eps0 = 0.0;
    std::vector<Matrix> sbar;
};

// Truncation indicator K_{n,j}: 1{|dY_j| < cstar * n^exponent} on raw block
// norms, or the same test on scale-adjusted norms when scaled = true.
struct CapRule {
    double cstar = 1.0;
    double exponent = -0.25;
    bool scaled = false;
    bool enabled = true;
};

struct FilterResult {
    FilterKind kind = FilterKind::fixed_alpha;
    int block = 0;
    double alpha = 0.0;  // fixed mode: alpha; moving mode: alpha_n = 1 - s_n/n
    double rho = 0.0;    // local mode only
    int s_n = 0;         // moving mode only
    std::vector<int> kept;                  // 0-based increment indices, ascending
    std::vector<double> scaled_norms;       // length n
    std::vector<std::uint8_t> cap;          // length n

    int n() const { return static_cast<int>(scaled_norms.size()); }
};

// Moving-average initial scale estimator: window sums of (dY)^{x2} gated by
// the min-of-previous-(K-1) test, divided by h * max(1, count); increments
// outside 1..n read as zero. window = 0 selects ceil(sqrt(n)).
ScaleEstimate initial_scale(const SamplePath& path, const ModelSpec& spec,
                            int block, int K = 2, int window = 0,
                            double eps0 = 1e-4);

ScaleEstimate identity_scale(const SamplePath& path, const ModelSpec& spec,
                             int block);

// |sbar_j^{-1/2} dY_j| for every increment of one block.
std::vector<double> scaled_norms(const SamplePath& path, const ModelSpec& spec,
                                 int block, const ScaleEstimate& scale);

std::vector<std::uint8_t> truncation_cap(const SamplePath& path,
                                         const ModelSpec& spec, int block,
                                         const CapRule& rule,
                                         const std::vector<double>* norms = nullptr);

// Keep j iff at least alpha*n other increments have strictly larger scaled
// norm. O(n log n); ties resolved by the strict inequality itself.
FilterResult global_filter_set(const SamplePath& path, const ModelSpec& spec,
                               int block, const ScaleEstimate& scale,
                               double alpha, const CapRule& cap = CapRule{});

// Keep j iff V_j < V_(s_n), s_n = n - B * floor(n^delta1). Throws when the
// schedule yields s_n < 1.
FilterResult moving_filter_set(const SamplePath& path, const ModelSpec& spec,
                               int block, const ScaleEstimate& scale, double B,
                               double delta1, const CapRule& cap = CapRule{});

// Shimizu-Yoshida comparator: keep j iff |dY_j| <= h^rho (full vector norm).
FilterResult local_filter_set(const SamplePath& path, double rho);

struct DetectionMetrics {
    double fn_ratio = 0.0;  // true-jump increments the filter kept
    double fp_ratio = 0.0;  // clean increments the filter flagged
};

DetectionMetrics detection_metrics(const FilterResult& result,
                                   const std::vector<std::uint8_t>& truth);

}  // namespace gjf
