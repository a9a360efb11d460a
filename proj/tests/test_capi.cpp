#include "lmt/lmt.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

constexpr const char* kSmall =
    "method = lmt\nrounds = 20\nQ = 2\ntrials = 2\nseed = 3\nthreads = 1\n"
    "[topology]\nkind = ring\nn = 5\n"
    "[objective]\nkind = quadratic\np = 3\nsigma = 0.5\n"
    "[schedule]\nkind = figure1\n";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lmt_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

lmt_config_t small_config() {
  lmt_config_t cfg = nullptr;
  EXPECT_EQ(lmt_config_parse(&cfg, kSmall, nullptr), LMT_OK) << lmt_last_error();
  return cfg;
}

TEST(CApi, ErrorStrings) {
  EXPECT_STREQ(lmt_error_string(LMT_OK), "ok");
  for (int code : std::initializer_list<int>{LMT_ERROR_INVALID_TOPOLOGY, LMT_ERROR_CONFIGURATION, LMT_ERROR_NULL_POINTER,
                   LMT_ERROR_INVALID_HANDLE, LMT_ERROR_UNKNOWN, 12345}) {
    EXPECT_GT(std::string(lmt_error_string(code)).size(), 0u) << code;
  }
  EXPECT_TRUE(lmt_error_is_config(LMT_ERROR_CONFIGURATION));
  EXPECT_TRUE(lmt_error_is_config(LMT_ERROR_PARSE));
  EXPECT_FALSE(lmt_error_is_config(LMT_ERROR_RUNTIME));
  EXPECT_FALSE(lmt_error_is_config(LMT_OK));
}

TEST(CApi, RingSpectra) {
  lmt_mixing_t m = nullptr;
  ASSERT_EQ(lmt_mixing_ring(&m, 100), LMT_OK);
  int n = 0;
  ASSERT_EQ(lmt_mixing_size(m, &n), LMT_OK);
  EXPECT_EQ(n, 100);
  lmt_spectra s{};
  ASSERT_EQ(lmt_mixing_spectra(m, &s), LMT_OK);
  EXPECT_GE(s.spectral_gap, 6.27e-4);
  EXPECT_LE(s.spectral_gap, 6.93e-4);
  EXPECT_NEAR(s.lambda + s.spectral_gap, 1.0, 1e-15);
  EXPECT_EQ(s.c0, 14.0);
  EXPECT_EQ(lmt_mixing_destroy(m), LMT_OK);
}

TEST(CApi, MixingWeightsAndFileRoundTrip) {
  lmt_mixing_t m = nullptr;
  ASSERT_EQ(lmt_mixing_ring(&m, 4), LMT_OK);
  std::vector<double> w(16);
  EXPECT_EQ(lmt_mixing_weights(m, w.data(), 15), LMT_ERROR_INSUFFICIENT_BUFFER);
  ASSERT_EQ(lmt_mixing_weights(m, w.data(), w.size()), LMT_OK);
  double row = 0.0;
  for (int j = 0; j < 4; ++j) row += w[static_cast<size_t>(j)];
  EXPECT_NEAR(row, 1.0, 1e-15);
  EXPECT_EQ(w[1], w[4]);
  EXPECT_EQ(w[2], 0.0);

  const fs::path dir = scratch("mixing");
  const std::string path = (dir / "w.csv").string();
  ASSERT_EQ(lmt_mixing_save(m, path.c_str()), LMT_OK);
  lmt_mixing_t back = nullptr;
  ASSERT_EQ(lmt_mixing_load(&back, path.c_str()), LMT_OK) << lmt_last_error();
  std::vector<double> w2(16);
  ASSERT_EQ(lmt_mixing_weights(back, w2.data(), w2.size()), LMT_OK);
  EXPECT_EQ(w, w2);
  lmt_mixing_destroy(back);
  lmt_mixing_destroy(m);

  std::ofstream(dir / "bad.csv") << "1,0\n0.5,0.5\n";
  lmt_mixing_t bad = nullptr;
  EXPECT_EQ(lmt_mixing_load(&bad, (dir / "bad.csv").string().c_str()), LMT_ERROR_VALIDATION);
  EXPECT_EQ(bad, nullptr);
  EXPECT_NE(std::string(lmt_last_error()).find("symmetric"), std::string::npos);
  fs::remove_all(dir);
}

TEST(CApi, InvalidArgumentsAreReported) {
  lmt_mixing_t m = nullptr;
  EXPECT_EQ(lmt_mixing_ring(&m, 2), LMT_ERROR_INVALID_TOPOLOGY);
  EXPECT_EQ(lmt_mixing_ring(nullptr, 5), LMT_ERROR_NULL_POINTER);
  EXPECT_EQ(lmt_mixing_size(nullptr, nullptr), LMT_ERROR_NULL_POINTER);
  int bogus[8] = {};
  EXPECT_EQ(lmt_mixing_size(reinterpret_cast<lmt_mixing_t>(bogus), &bogus[0]), LMT_ERROR_INVALID_HANDLE);
  EXPECT_EQ(lmt_mixing_destroy(nullptr), LMT_OK);
  EXPECT_EQ(lmt_config_destroy(nullptr), LMT_OK);
  EXPECT_EQ(lmt_result_destroy(nullptr), LMT_OK);
  EXPECT_EQ(lmt_sweep_destroy(nullptr), LMT_OK);
}

TEST(CApi, ConfigLifecycle) {
  lmt_config_t cfg = small_config();
  char buf[32];
  size_t len = 4;
  EXPECT_EQ(lmt_config_fingerprint(cfg, buf, &len), LMT_ERROR_INSUFFICIENT_BUFFER);
  EXPECT_EQ(len, 17u);
  ASSERT_EQ(lmt_config_fingerprint(cfg, buf, &len), LMT_OK);
  const std::string fp = buf;
  EXPECT_EQ(fp.size(), 16u);

  EXPECT_EQ(lmt_config_set(cfg, "Q", "3"), LMT_OK);
  len = sizeof buf;
  ASSERT_EQ(lmt_config_fingerprint(cfg, buf, &len), LMT_OK);
  EXPECT_NE(fp, buf);

  EXPECT_EQ(lmt_config_set(cfg, "Q", "three"), LMT_ERROR_CONFIGURATION);
  EXPECT_EQ(lmt_config_set(cfg, "trials", "0"), LMT_OK);
  EXPECT_EQ(lmt_config_validate(cfg), LMT_ERROR_CONFIGURATION);
  EXPECT_NE(std::string(lmt_last_error()).find("trials"), std::string::npos);
  lmt_config_destroy(cfg);

  lmt_config_t missing = nullptr;
  EXPECT_EQ(lmt_config_load(&missing, "/nonexistent/run.cfg"), LMT_ERROR_CONFIGURATION);
}

TEST(CApi, RunAndInspectResult) {
  lmt_config_t cfg = small_config();
  lmt_result_t res = nullptr;
  ASSERT_EQ(lmt_run(cfg, &res), LMT_OK) << lmt_last_error();
  size_t rows = 0;
  ASSERT_EQ(lmt_result_rows(res, &rows), LMT_OK);
  EXPECT_EQ(rows, 20u);
  std::vector<double> mean(rows), sd(rows);
  ASSERT_EQ(lmt_result_column(res, "grad_norm_avg", 0, mean.data(), mean.size()), LMT_OK);
  ASSERT_EQ(lmt_result_column(res, "grad_norm_avg", 1, sd.data(), sd.size()), LMT_OK);
  for (size_t k = 0; k < rows; ++k) {
    EXPECT_TRUE(std::isfinite(mean[k]));
    EXPECT_GE(sd[k], 0.0);
  }
  EXPECT_EQ(lmt_result_column(res, "grad_norm_avg", 0, mean.data(), rows - 1), LMT_ERROR_INSUFFICIENT_BUFFER);
  EXPECT_EQ(lmt_result_column(res, "accuracy", 0, mean.data(), rows), LMT_ERROR_UNAVAILABLE_METRIC);

  double fw = 0.0;
  ASSERT_EQ(lmt_result_final_window_mean(res, "grad_norm_avg", &fw), LMT_OK);
  EXPECT_DOUBLE_EQ(fw, (mean[18] + mean[19]) / 2.0);

  char fp_cfg[32], fp_res[32];
  size_t a = sizeof fp_cfg, b = sizeof fp_res;
  ASSERT_EQ(lmt_config_fingerprint(cfg, fp_cfg, &a), LMT_OK);
  ASSERT_EQ(lmt_result_fingerprint(res, fp_res, &b), LMT_OK);
  EXPECT_STREQ(fp_cfg, fp_res);

  const fs::path dir = scratch("result");
  const std::string csv = (dir / "trace.csv").string();
  ASSERT_EQ(lmt_result_write_csv(res, csv.c_str()), LMT_OK);
  lmt_result_t back = nullptr;
  ASSERT_EQ(lmt_result_read_csv(&back, csv.c_str()), LMT_OK) << lmt_last_error();
  ASSERT_EQ(lmt_result_set_label(back, "lmt Q=2"), LMT_OK);
  char label[32];
  size_t ll = sizeof label;
  ASSERT_EQ(lmt_result_label(back, label, &ll), LMT_OK);
  EXPECT_STREQ(label, "lmt Q=2");
  std::vector<double> mean_back(rows);
  ASSERT_EQ(lmt_result_column(back, "grad_norm_avg", 0, mean_back.data(), rows), LMT_OK);
  EXPECT_EQ(mean, mean_back);

  const lmt_result_t tables[2] = {res, back};
  const std::string svg = (dir / "plot.svg").string();
  ASSERT_EQ(lmt_plot(tables, 2, "grad_norm_avg", svg.c_str()), LMT_OK) << lmt_last_error();
  EXPECT_GT(fs::file_size(svg), 0u);
  EXPECT_EQ(lmt_plot(tables, 0, "grad_norm_avg", svg.c_str()), LMT_ERROR_DOMAIN);

  lmt_result_destroy(back);
  lmt_result_destroy(res);
  lmt_config_destroy(cfg);
  fs::remove_all(dir);
}

TEST(CApi, SweepOverQ) {
  lmt_config_t cfg = small_config();
  const char* values[] = {"1", "2", "4"};
  lmt_sweep_t sweep = nullptr;
  ASSERT_EQ(lmt_sweep(cfg, "Q", values, 3, &sweep), LMT_OK) << lmt_last_error();
  size_t count = 0;
  ASSERT_EQ(lmt_sweep_size(sweep, &count), LMT_OK);
  EXPECT_EQ(count, 3u);
  double slope = 0.0;
  int has = 0;
  ASSERT_EQ(lmt_sweep_slope(sweep, &slope, &has), LMT_OK);
  EXPECT_EQ(has, 1);
  EXPECT_TRUE(std::isfinite(slope));
  lmt_result_t point = nullptr;
  ASSERT_EQ(lmt_sweep_point(sweep, 2, &point), LMT_OK);
  char label[32];
  size_t ll = sizeof label;
  ASSERT_EQ(lmt_result_label(point, label, &ll), LMT_OK);
  EXPECT_STREQ(label, "Q=4");
  EXPECT_EQ(lmt_sweep_point(sweep, 3, &point), LMT_ERROR_OUT_OF_RANGE);
  lmt_result_destroy(point);
  lmt_sweep_destroy(sweep);

  EXPECT_EQ(lmt_sweep(cfg, "beta", values, 3, &sweep), LMT_ERROR_CONFIGURATION);
  lmt_config_destroy(cfg);
}

TEST(CApi, QStar) {
  long q = 0;
  ASSERT_EQ(lmt_q_star(0.5, 0.0, 10, 0.1, &q), LMT_OK);
  EXPECT_EQ(q, 1);
  EXPECT_EQ(lmt_q_star(0.5, 1.0, 10, 0.0, &q), LMT_ERROR_DOMAIN);
}

}  // namespace
