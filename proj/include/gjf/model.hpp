#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gjf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Axis-aligned parameter box with nonempty interior.
struct Box {
    Vector lo;
    Vector hi;

    static Box scalar(double l, double u);

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const Vector& v, double tol = 0.0) const;
    Vector center() const { return 0.5 * (lo + hi); }
    Vector width() const { return hi - lo; }
    Vector project(const Vector& v) const;
    void validate() const;
};

// Equidistant discrete observations of (X, Y), with optional per-increment
// jump ground truth from a simulator. x may alias y when X = Y.
struct SamplePath {
    double t0 = 0.0;
    double h = 0.0;
    Matrix y;                         // (n+1) x m
    Matrix x;                         // (n+1) x d
    std::vector<std::uint8_t> jump_truth;  // length n, or empty

    int n() const { return static_cast<int>(y.rows()) - 1; }
    int dim_y() const { return static_cast<int>(y.cols()); }
    int dim_x() const { return static_cast<int>(x.cols()); }
    bool has_truth() const { return !jump_truth.empty(); }
    void validate() const;
};

struct IncrementView {
    Matrix dy;  // n x m, row j = y_{j+1} - y_j
};

IncrementView increments(const SamplePath& path);

// Parameterized block-diagonal diffusion model S = sigma sigma^T.
// Block callbacks receive the block index k (0-based), the covariate row x
// and the parameter vector theta, and return the m_k x m_k block.
// Analytic theta-derivatives of S are optional; missing orders fall back to
// central differences with step fd_step * max(1, |theta_a|).
struct ModelSpec {
    int m = 1;
    std::vector<int> blocks{1};
    int d = 1;
    int p = 1;
    Box theta_box;
    bool x_dependent = true;
    double fd_step = 1e-5;

    std::function<Matrix(int, const Vector&, const Vector&)> s;      // required
    std::function<Matrix(int, const Vector&, const Vector&)> sigma;  // for simulation
    std::function<Matrix(int, const Vector&, const Vector&, int)> ds;
    std::function<Matrix(int, const Vector&, const Vector&, int, int)> d2s;
    std::function<Matrix(int, const Vector&, const Vector&, int, int, int)> d3s;

    int n_blocks() const { return static_cast<int>(blocks.size()); }
    int block_dim(int k) const { return blocks[static_cast<size_t>(k)]; }
    int block_offset(int k) const;
    void validate() const;

    Matrix s_of(int k, const Vector& x, const Vector& theta) const;
    Matrix ds_of(int k, const Vector& x, const Vector& theta, int a) const;
    Matrix d2s_of(int k, const Vector& x, const Vector& theta, int a, int b) const;
    Matrix d3s_of(int k, const Vector& x, const Vector& theta, int a, int b, int c) const;

    // true iff theta is in the box and every block is SPD at x (Cholesky succeeds)
    bool spd_ok(const Vector& x, const Vector& theta) const;
};

// CSV interchange: header "t,y1..ym[,x1..xd][,jump]", one row per observation
// time; the jump flag on row j is the truth for the increment ending at t_j.
void write_csv(const std::string& file, const SamplePath& path);
SamplePath read_csv(const std::string& file);

}  // namespace gjf
