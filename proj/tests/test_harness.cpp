#include "gjf/harness.hpp"

#include "gjf/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace gjf;

TEST_SUITE_BEGIN("harness");

namespace {

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& name)
        : path((std::filesystem::temp_directory_path() / name).string()) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.model.n = 200;
    cfg.replicates = 6;
    cfg.threads = 2;
    cfg.base_seed = 777;
    return cfg;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        fields.push_back(cur);
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace

TEST_CASE("detection table is byte deterministic across runs and threads") {
    TempDir d1("gjf_det_a"), d2("gjf_det_b");
    ExperimentConfig cfg = small_config();
    cfg.alpha_grid = {0.01, 0.05, 0.25};
    run_detection_table(cfg, d1.path);
    cfg.threads = 1;
    run_detection_table(cfg, d2.path);
    CHECK(read_text_file(d1.path + "/rows.csv") == read_text_file(d2.path + "/rows.csv"));
    CHECK(read_text_file(d1.path + "/summary.csv") ==
          read_text_file(d2.path + "/summary.csv"));
    CHECK(std::filesystem::exists(d1.path + "/plot.dat"));
    CHECK(std::filesystem::exists(d1.path + "/plot.gp"));
}

TEST_CASE("jump-free detection flags about an alpha fraction") {
    TempDir dir("gjf_det_l0");
    ExperimentConfig cfg = small_config();
    cfg.model.lambda = 0.0;
    cfg.model.n = 500;
    cfg.replicates = 10;
    cfg.alpha_grid = {0.1, 0.25};
    const auto summary = run_detection_table(cfg, dir.path);
    CHECK(summary.mean_fn[0] == 0.0);  // no jumps: fn defined as 0
    CHECK(summary.mean_fn[1] == 0.0);
    CHECK(std::abs(summary.mean_fp[0] - 0.1) < 0.005);
    CHECK(std::abs(summary.mean_fp[1] - 0.25) < 0.005);
}

TEST_CASE("alpha sweep row accounting and recomputable aggregates") {
    TempDir dir("gjf_sweep");
    ExperimentConfig cfg = small_config();
    cfg.model.n = 300;
    cfg.replicates = 5;
    cfg.alpha_grid = {0.05, 0.2};
    const auto summary = run_alpha_sweep(cfg, dir.path);

    // 2 estimators x 2 tunings x 5 replicates
    CHECK(summary.rows.size() == 20);

    const auto csv = parse_csv(read_text_file(dir.path + "/rows.csv"));
    CHECK(csv.size() == 21);  // header + rows

    // recompute one aggregate line from the raw rows
    const auto* line = summary.find("qmle_fixed_alpha", 0.2);
    REQUIRE(line != nullptr);
    double total = 0.0;
    int count = 0;
    for (const auto& row : summary.rows) {
        if (row.estimator == "qmle_fixed_alpha" && row.tuning == 0.2 &&
            row.status.rfind("ok", 0) == 0) {
            total += row.theta_hat;
            ++count;
        }
    }
    REQUIRE(count == line->ok_count);
    CHECK(line->mean == doctest::Approx(total / count).epsilon(1e-12));

    double ss = 0.0;
    for (const auto& row : summary.rows)
        if (row.estimator == "qmle_fixed_alpha" && row.tuning == 0.2 &&
            row.status.rfind("ok", 0) == 0)
            ss += (row.theta_hat - line->mean) * (row.theta_hat - line->mean);
    CHECK(line->sd == doctest::Approx(std::sqrt(ss / (count - 1))).epsilon(1e-12));
}

TEST_CASE("failed replicates keep their rows with an error code") {
    TempDir dir("gjf_cmp_err");
    ExperimentConfig cfg = small_config();
    cfg.model.sigma = 1e6;  // every increment exceeds h^rho: local filter keeps nothing
    cfg.model.lambda = 0.0;
    cfg.model.n = 100;
    cfg.replicates = 3;
    cfg.alpha_grid = {0.1};
    cfg.rho_grid = {0.5};
    cfg.box_lo = 1.0;
    cfg.box_hi = 8.0;
    const auto summary = run_method_comparison(cfg, dir.path);
    CHECK(summary.rows.size() == 6);  // (1 rho + 1 alpha) x 3 replicates
    int errors = 0;
    for (const auto& row : summary.rows)
        if (row.estimator == "local_qmle" && row.status.rfind("error:", 0) == 0) ++errors;
    CHECK(errors == 3);
    const auto* line = summary.find("local_qmle", 0.5);
    REQUIRE(line != nullptr);
    CHECK(line->ok_count == 0);
}

TEST_CASE("rate check emits rmse lines and slopes") {
    TempDir dir("gjf_rate");
    ExperimentConfig cfg = small_config();
    cfg.replicates = 8;
    cfg.n_grid = {100, 200, 400};
    cfg.rate_lambda = 2.0;
    const auto summary = run_rate_check(cfg, dir.path);
    CHECK(summary.lines.size() == 6);
    CHECK(summary.rows.size() == 2 * 3 * 8);
    CHECK(std::isfinite(summary.slope_jump_free));
    CHECK(std::isfinite(summary.slope_with_jumps));
    CHECK(summary.slope_jump_free < 0.0);
}

TEST_CASE("config file round trip") {
    const std::string file =
        (std::filesystem::temp_directory_path() / "gjf_cfg.txt").string();
    write_text_file(file,
                    "# experiment configuration\n"
                    "eta = 0.2\n"
                    "sigma = 0.15\n"
                    "lambda = 10\n"
                    "eps = 0.02\n"
                    "n = 500\n"
                    "replicates = 42\n"
                    "alpha_grid = [0.01, 0.05, 0.1]\n"
                    "qn_mode = \"chi2\"\n"
                    "cap_scaled = false\n"
                    "base_seed = 31415\n");
    const ExperimentConfig cfg = ExperimentConfig::from_file(file);
    CHECK(cfg.model.eta == 0.2);
    CHECK(cfg.model.sigma == 0.15);
    CHECK(cfg.model.lambda == 10.0);
    CHECK(cfg.model.eps == 0.02);
    CHECK(cfg.model.n == 500);
    CHECK(cfg.replicates == 42);
    CHECK(cfg.alpha_grid == std::vector<double>{0.01, 0.05, 0.1});
    CHECK(cfg.qn_mode == "chi2");
    CHECK_FALSE(cfg.cap_scaled);
    CHECK(cfg.base_seed == 31415);
    CHECK(cfg.kappa == 4);  // untouched default
    std::remove(file.c_str());
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-17, 123456.789, -0.0, 2.5e300}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_SUITE_END();
