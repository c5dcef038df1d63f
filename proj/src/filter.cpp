#include "gjf/filter.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gjf {

const char* filter_kind_name(FilterKind kind) {
    switch (kind) {
        case FilterKind::fixed_alpha: return "fixed-alpha";
        case FilterKind::moving: return "moving";
        case FilterKind::local: return "local";
    }
    return "?";
}

namespace {

Matrix block_increments(const SamplePath& path, const ModelSpec& spec, int block) {
    const IncrementView view = increments(path);
    return view.dy.middleCols(spec.block_offset(block), spec.block_dim(block));
}

double min_eigenvalue(const Matrix& m) {
    if (m.rows() == 1) return m(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

ScaleEstimate initial_scale(const SamplePath& path, const ModelSpec& spec,
                            int block, int K, int window, double eps0) {
    if (K < 2) throw std::invalid_argument("initial_scale: K must be >= 2");
    if (!(eps0 > 0.0)) throw std::invalid_argument("initial_scale: eps0 must be positive");
    const int n = path.n();
    if (window <= 0) window = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));

    const Matrix dy = block_increments(path, spec, block);
    const int mk = static_cast<int>(dy.cols());

    // Increment norms on the extended index range; out-of-range reads 0.
    auto norm_at = [&](int l) -> double {
        return (l >= 1 && l <= n) ? dy.row(l - 1).norm() : 0.0;
    };

    // Gate indicators over l in [1-window, n+window]; out-of-range increments
    // read 0, so their gate is vacuously true.
    const int lo = 1 - window;
    const int len = n + 2 * window;
    std::vector<std::uint8_t> gate(static_cast<size_t>(len), 0);
    for (int t = 0; t < len; ++t) {
        const int l = lo + t;
        double prior_min = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= K - 1; ++i) prior_min = std::min(prior_min, norm_at(l - i));
        gate[static_cast<size_t>(t)] = prior_min >= norm_at(l) ? 1 : 0;
    }

    ScaleEstimate scale;
    scale.block = block;
    scale.eps0 = eps0;
    scale.sbar.reserve(static_cast<size_t>(n));
    const double floor_val = 0.5 * eps0;
    for (int j = 1; j <= n; ++j) {
        Matrix num = Matrix::Zero(mk, mk);
        double cnt = 0.0;
        for (int l = j - window; l <= j + window; ++l) {
            if (!gate[static_cast<size_t>(l - lo)]) continue;
            cnt += 1.0;
            if (l >= 1 && l <= n) num += dy.row(l - 1).transpose() * dy.row(l - 1);
        }
        Matrix shat = num / (path.h * std::max(1.0, cnt));
        shat = 0.5 * (shat + shat.transpose().eval());
        if (min_eigenvalue(shat) > floor_val) {
            scale.sbar.push_back(std::move(shat));
        } else {
            scale.sbar.push_back(floor_val * Matrix::Identity(mk, mk));
        }
    }
    return scale;
}

ScaleEstimate identity_scale(const SamplePath& path, const ModelSpec& spec, int block) {
    const int n = path.n();
    const int mk = spec.block_dim(block);
    ScaleEstimate scale;
    scale.block = block;
    scale.eps0 = 0.0;
    scale.sbar.assign(static_cast<size_t>(n), Matrix::Identity(mk, mk));
    return scale;
}

std::vector<double> scaled_norms(const SamplePath& path, const ModelSpec& spec,
                                 int block, const ScaleEstimate& scale) {
    const int n = path.n();
    if (static_cast<int>(scale.sbar.size()) != n)
        throw std::invalid_argument("scaled_norms: scale length mismatch");
    const Matrix dy = block_increments(path, spec, block);
    std::vector<double> norms(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        Eigen::LLT<Matrix> llt(scale.sbar[static_cast<size_t>(j)]);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("scaled_norms: scale matrix not positive definite");
        // |S^{-1/2} v| = |L^{-1} v| for S = L L^T
        const Vector w = llt.matrixL().solve(dy.row(j).transpose());
        norms[static_cast<size_t>(j)] = w.norm();
    }
    return norms;
}

std::vector<std::uint8_t> truncation_cap(const SamplePath& path, const ModelSpec& spec,
                                         int block, const CapRule& rule,
                                         const std::vector<double>* norms) {
    const int n = path.n();
    std::vector<std::uint8_t> cap(static_cast<size_t>(n), 1);
    if (!rule.enabled) return cap;
    if (!(rule.cstar > 0.0)) throw std::invalid_argument("truncation_cap: cstar must be positive");
    const double threshold = rule.cstar * std::pow(static_cast<double>(n), rule.exponent);
    if (rule.scaled) {
        if (norms == nullptr || static_cast<int>(norms->size()) != n)
            throw std::invalid_argument("truncation_cap: scaled rule needs norms");
        for (int j = 0; j < n; ++j)
            cap[static_cast<size_t>(j)] = (*norms)[static_cast<size_t>(j)] < threshold ? 1 : 0;
    } else {
        const Matrix dy = block_increments(path, spec, block);
        for (int j = 0; j < n; ++j)
            cap[static_cast<size_t>(j)] = dy.row(j).norm() < threshold ? 1 : 0;
    }
    return cap;
}

FilterResult global_filter_set(const SamplePath& path, const ModelSpec& spec,
                               int block, const ScaleEstimate& scale,
                               double alpha, const CapRule& cap) {
    if (alpha < 0.0 || alpha >= 1.0)
        throw std::invalid_argument("global_filter_set: alpha must be in [0,1)");
    const int n = path.n();

    FilterResult result;
    result.kind = FilterKind::fixed_alpha;
    result.block = block;
    result.alpha = alpha;
    result.scaled_norms = scaled_norms(path, spec, block, scale);
    result.cap = truncation_cap(path, spec, block, cap, &result.scaled_norms);

    std::vector<double> sorted(result.scaled_norms);
    std::sort(sorted.begin(), sorted.end());
    const double need = alpha * n - 1e-9;
    result.kept.reserve(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(),
                                         result.scaled_norms[static_cast<size_t>(j)]);
        const int strictly_larger = static_cast<int>(sorted.end() - it);
        if (static_cast<double>(strictly_larger) >= need) result.kept.push_back(j);
    }
    return result;
}

FilterResult moving_filter_set(const SamplePath& path, const ModelSpec& spec,
                               int block, const ScaleEstimate& scale, double B,
                               double delta1, const CapRule& cap) {
    if (!(B > 0.0)) throw std::invalid_argument("moving_filter_set: B must be positive");
    if (!(delta1 > 0.0 && delta1 < 0.5))
        throw std::invalid_argument("moving_filter_set: delta1 must be in (0,1/2)");
    const int n = path.n();
    const double chunk = std::floor(std::pow(static_cast<double>(n), delta1) + 1e-12);
    const int s_n = n - static_cast<int>(std::llround(B * chunk));
    if (s_n < 1)
        throw std::invalid_argument("moving_filter_set: s_n < 1, n too small for B and delta1");

    FilterResult result;
    result.kind = FilterKind::moving;
    result.block = block;
    result.s_n = s_n;
    result.alpha = 1.0 - static_cast<double>(s_n) / n;
    result.scaled_norms = scaled_norms(path, spec, block, scale);
    result.cap = truncation_cap(path, spec, block, cap, &result.scaled_norms);

    std::vector<double> sorted(result.scaled_norms);
    std::nth_element(sorted.begin(), sorted.begin() + (s_n - 1), sorted.end());
    const double order_stat = sorted[static_cast<size_t>(s_n - 1)];
    result.kept.reserve(static_cast<size_t>(s_n));
    for (int j = 0; j < n; ++j)
        if (result.scaled_norms[static_cast<size_t>(j)] < order_stat) result.kept.push_back(j);
    return result;
}

FilterResult local_filter_set(const SamplePath& path, double rho) {
    if (!(rho > 0.0 && rho <= 0.5))
        throw std::invalid_argument("local_filter_set: rho must be in (0, 1/2]");
    const int n = path.n();
    const IncrementView view = increments(path);
    const double threshold = std::pow(path.h, rho);

    FilterResult result;
    result.kind = FilterKind::local;
    result.block = 0;
    result.rho = rho;
    result.scaled_norms.resize(static_cast<size_t>(n));
    result.cap.assign(static_cast<size_t>(n), 1);
    for (int j = 0; j < n; ++j) {
        const double norm = view.dy.row(j).norm();
        result.scaled_norms[static_cast<size_t>(j)] = norm;
        if (norm <= threshold) result.kept.push_back(j);
    }
    return result;
}

DetectionMetrics detection_metrics(const FilterResult& result,
                                   const std::vector<std::uint8_t>& truth) {
    const int n = result.n();
    if (static_cast<int>(truth.size()) != n)
        throw std::invalid_argument("detection_metrics: truth length mismatch");

    std::vector<std::uint8_t> kept_mask(static_cast<size_t>(n), 0);
    for (int j : result.kept) kept_mask[static_cast<size_t>(j)] = 1;

    int jumps = 0, missed = 0, clean = 0, flagged_clean = 0;
    for (int j = 0; j < n; ++j) {
        if (truth[static_cast<size_t>(j)]) {
            ++jumps;
            if (kept_mask[static_cast<size_t>(j)]) ++missed;
        } else {
            ++clean;
            if (!kept_mask[static_cast<size_t>(j)]) ++flagged_clean;
        }
    }
    DetectionMetrics metrics;
    metrics.fn_ratio = jumps > 0 ? static_cast<double>(missed) / jumps : 0.0;
    metrics.fp_ratio = clean > 0 ? static_cast<double>(flagged_clean) / clean : 0.0;
    return metrics;
}

}  // namespace gjf
