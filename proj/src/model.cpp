#include "gjf/model.hpp"

#include "gjf/io.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gjf {

Box Box::scalar(double l, double u) {
    Box b;
    b.lo = Vector::Constant(1, l);
    b.hi = Vector::Constant(1, u);
    return b;
}

bool Box::contains(const Vector& v, double tol) const {
    if (v.size() != lo.size()) return false;
    for (int i = 0; i < lo.size(); ++i) {
        if (v[i] < lo[i] - tol || v[i] > hi[i] + tol) return false;
    }
    return true;
}

Vector Box::project(const Vector& v) const {
    return v.cwiseMax(lo).cwiseMin(hi);
}

void Box::validate() const {
    if (lo.size() == 0 || lo.size() != hi.size())
        throw std::invalid_argument("Box: dimension mismatch");
    for (int i = 0; i < lo.size(); ++i)
        if (!(lo[i] < hi[i])) throw std::invalid_argument("Box: empty interior");
}

void SamplePath::validate() const {
    if (y.rows() < 3) throw std::invalid_argument("SamplePath: need n >= 2");
    if (!(h > 0.0)) throw std::invalid_argument("SamplePath: h must be positive");
    if (x.rows() != y.rows())
        throw std::invalid_argument("SamplePath: x and y row counts differ");
    if (!jump_truth.empty() &&
        static_cast<int>(jump_truth.size()) != n())
        throw std::invalid_argument("SamplePath: jump_truth length must be n");
}

IncrementView increments(const SamplePath& path) {
    path.validate();
    const int n = path.n();
    IncrementView view;
    view.dy = path.y.bottomRows(n) - path.y.topRows(n);
    return view;
}

int ModelSpec::block_offset(int k) const {
    return std::accumulate(blocks.begin(), blocks.begin() + k, 0);
}

void ModelSpec::validate() const {
    if (m < 1 || d < 1 || p < 1) throw std::invalid_argument("ModelSpec: bad dims");
    if (std::accumulate(blocks.begin(), blocks.end(), 0) != m)
        throw std::invalid_argument("ModelSpec: block sizes must sum to m");
    for (int mk : blocks)
        if (mk < 1) throw std::invalid_argument("ModelSpec: empty block");
    theta_box.validate();
    if (theta_box.dim() != p) throw std::invalid_argument("ModelSpec: box dim != p");
    if (!s) throw std::invalid_argument("ModelSpec: s callback missing");
}

Matrix ModelSpec::s_of(int k, const Vector& x, const Vector& theta) const {
    return s(k, x, theta);
}

namespace {
double step_for(double fd_step, double t) {
    return fd_step * std::max(1.0, std::abs(t));
}
}  // namespace

Matrix ModelSpec::ds_of(int k, const Vector& x, const Vector& theta, int a) const {
    if (ds) return ds(k, x, theta, a);
    const double ha = step_for(fd_step, theta[a]);
    Vector tp = theta, tm = theta;
    tp[a] += ha;
    tm[a] -= ha;
    return (s(k, x, tp) - s(k, x, tm)) / (2.0 * ha);
}

Matrix ModelSpec::d2s_of(int k, const Vector& x, const Vector& theta, int a, int b) const {
    if (d2s) return d2s(k, x, theta, a, b);
    // wider step: the inner difference already carries roundoff ~ eps/h
    const double hb = step_for(std::max(fd_step, 2e-4), theta[b]);
    Vector tp = theta, tm = theta;
    tp[b] += hb;
    tm[b] -= hb;
    return (ds_of(k, x, tp, a) - ds_of(k, x, tm, a)) / (2.0 * hb);
}

Matrix ModelSpec::d3s_of(int k, const Vector& x, const Vector& theta, int a, int b, int c) const {
    if (d3s) return d3s(k, x, theta, a, b, c);
    const double hc = step_for(std::max(fd_step, 2e-3), theta[c]);
    Vector tp = theta, tm = theta;
    tp[c] += hc;
    tm[c] -= hc;
    return (d2s_of(k, x, tp, a, b) - d2s_of(k, x, tm, a, b)) / (2.0 * hc);
}

bool ModelSpec::spd_ok(const Vector& x, const Vector& theta) const {
    if (!theta_box.contains(theta)) return false;
    for (int k = 0; k < n_blocks(); ++k) {
        const Matrix sk = s(k, x, theta);
        Eigen::LLT<Matrix> llt(sk);
        if (llt.info() != Eigen::Success) return false;
    }
    return true;
}

void write_csv(const std::string& file, const SamplePath& path) {
    path.validate();
    const int n = path.n();
    const int m = path.dim_y();
    const bool separate_x = path.x.cols() != path.y.cols() || path.x != path.y;

    std::ostringstream out;
    out << "t";
    for (int c = 0; c < m; ++c) out << ",y" << (c + 1);
    if (separate_x)
        for (int c = 0; c < path.dim_x(); ++c) out << ",x" << (c + 1);
    if (path.has_truth()) out << ",jump";
    out << "\n";

    for (int r = 0; r <= n; ++r) {
        out << format_double(path.t0 + r * path.h);
        for (int c = 0; c < m; ++c) out << "," << format_double(path.y(r, c));
        if (separate_x)
            for (int c = 0; c < path.dim_x(); ++c)
                out << "," << format_double(path.x(r, c));
        if (path.has_truth())
            out << "," << (r >= 1 && path.jump_truth[static_cast<size_t>(r - 1)] ? 1 : 0);
        out << "\n";
    }
    write_text_file(file, out.str());
}

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}
}  // namespace

SamplePath read_csv(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV " + file);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "t")
        throw std::runtime_error("CSV header must start with t: " + file);

    int m = 0, d = 0;
    bool has_jump = false;
    for (size_t i = 1; i < header.size(); ++i) {
        if (header[i].rfind("y", 0) == 0) ++m;
        else if (header[i].rfind("x", 0) == 0) ++d;
        else if (header[i] == "jump") has_jump = true;
        else throw std::runtime_error("unknown CSV column " + header[i]);
    }
    if (m == 0) throw std::runtime_error("CSV has no y columns: " + file);

    std::vector<double> ts;
    std::vector<std::vector<double>> rows;
    std::vector<std::uint8_t> jumps;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = split_csv_line(line);
        if (static_cast<int>(parts.size()) != 1 + m + d + (has_jump ? 1 : 0))
            throw std::runtime_error("CSV row width mismatch in " + file);
        ts.push_back(std::stod(parts[0]));
        std::vector<double> vals(static_cast<size_t>(m + d));
        for (int c = 0; c < m + d; ++c) vals[static_cast<size_t>(c)] = std::stod(parts[static_cast<size_t>(c + 1)]);
        rows.push_back(std::move(vals));
        if (has_jump) jumps.push_back(parts.back() == "1" ? 1 : 0);
    }
    const int nrows = static_cast<int>(rows.size());
    if (nrows < 3) throw std::runtime_error("CSV needs at least 3 rows: " + file);

    SamplePath path;
    path.t0 = ts.front();
    path.h = (ts.back() - ts.front()) / (nrows - 1);
    for (int r = 1; r < nrows; ++r) {
        const double step = ts[static_cast<size_t>(r)] - ts[static_cast<size_t>(r - 1)];
        if (std::abs(step - path.h) > 1e-9 * std::max(1.0, std::abs(path.h)))
            throw std::runtime_error("CSV grid is not equidistant: " + file);
    }
    path.y.resize(nrows, m);
    for (int r = 0; r < nrows; ++r)
        for (int c = 0; c < m; ++c) path.y(r, c) = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
    if (d > 0) {
        path.x.resize(nrows, d);
        for (int r = 0; r < nrows; ++r)
            for (int c = 0; c < d; ++c) path.x(r, c) = rows[static_cast<size_t>(r)][static_cast<size_t>(m + c)];
    } else {
        path.x = path.y;
    }
    if (has_jump) {
        path.jump_truth.assign(jumps.begin() + 1, jumps.end());
    }
    path.validate();
    return path;
}

}  // namespace gjf
