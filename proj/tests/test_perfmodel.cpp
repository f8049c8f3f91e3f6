#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sdnn/perfmodel.hpp"
#include "test_support.hpp"

namespace sdnn {
namespace {

std::vector<TimingRecord> model_records(double n1, double beta, double lo, double hi,
                                        std::size_t points) {
  std::vector<TimingRecord> out;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i /
                                                         (points - 1));
    out.push_back({x, std::pow(x / n1, beta), "p" + std::to_string(i)});
  }
  return out;
}

TEST(FitPowerLaw, ExactRecoveryTypical2019) {
  auto fit = fit_power_law(model_records(1e11, 1.0, 1e9, 1e13, 12));
  EXPECT_NEAR(fit.beta, 1.0, 1e-12);
  EXPECT_NEAR(fit.n1 / 1e11, 1.0, 1e-12);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_EQ(fit.n_points, 12u);
}

TEST(FitPowerLaw, NoisyBissonModel) {
  std::mt19937_64 rng(2019);
  std::uniform_real_distribution<double> noise(0.99, 1.01);
  for (int seed = 0; seed < 200; ++seed) {
    auto recs = model_records(1e13, 0.8, 1e10, 1e14, 20);
    for (auto& r : recs) r.t_dnn *= noise(rng);
    auto fit = fit_power_law(recs);
    EXPECT_LT(std::abs(fit.beta - 0.8), 0.02);
    EXPECT_LT(std::max(fit.n1 / 1e13, 1e13 / fit.n1), 1.3);
  }
}

TEST(FitPowerLaw, TwoPointsInterpolate) {
  std::vector<TimingRecord> recs{{1e8, 0.5, "a"}, {1e10, 20.0, "b"}};
  auto fit = fit_power_law(recs);
  EXPECT_NEAR(predict(fit, 1e8), 0.5, 1e-12);
  EXPECT_NEAR(predict(fit, 1e10), 20.0, 1e-10);
  EXPECT_DOUBLE_EQ(fit.r_squared, 1.0);
}

TEST(FitPowerLaw, Errors) {
  EXPECT_THROW(fit_power_law({}), InsufficientDataError);
  EXPECT_THROW(fit_power_law({{1e9, 1.0, ""}}), InsufficientDataError);
  EXPECT_THROW(fit_power_law({{1e9, 1.0, ""}, {1e9, 2.0, ""}, {1e9, 3.0, ""}}),
               InsufficientDataError);
  EXPECT_THROW(fit_power_law({{1e9, 1e-7, ""}, {1e10, 1.0, ""}}), InvariantError);
  EXPECT_THROW(fit_power_law({{0.5, 1.0, ""}, {1e10, 1.0, ""}}), InvariantError);
}

TEST(FitPowerLaw, ExactRecoveryAcrossParameterRange) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> log_n1(6.0, 14.0), beta_d(0.5, 1.5);
  for (int trial = 0; trial < 300; ++trial) {
    const double n1 = std::pow(10.0, log_n1(rng)), beta = beta_d(rng);
    auto fit = fit_power_law(model_records(n1, beta, n1 / 100.0, n1 * 100.0, 3 + trial % 20));
    EXPECT_LT(std::abs(fit.beta - beta) / beta, 1e-10);
    EXPECT_LT(std::abs(fit.n1 - n1) / n1, 1e-10);
  }
}

TEST(FitPowerLaw, ScaleEquivariance) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> noise(0.9, 1.1);
  auto recs = model_records(3e10, 0.9, 1e8, 1e12, 15);
  for (auto& r : recs) r.t_dnn *= noise(rng);
  auto base = fit_power_law(recs);
  for (double c : {0.25, 3.0, 40.0}) {
    auto scaled = recs;
    for (auto& r : scaled) r.t_dnn *= c;
    auto fit = fit_power_law(scaled);
    EXPECT_NEAR(fit.beta, base.beta, 1e-12);
    EXPECT_NEAR(fit.n1 / (base.n1 / std::pow(c, 1.0 / base.beta)), 1.0, 1e-10);
  }
}

TEST(FitPowerLaw, ResidualsInvariantToOrder) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> noise(0.8, 1.2);
  auto recs = model_records(1e11, 1.1, 1e9, 1e12, 10);
  for (auto& r : recs) r.t_dnn *= noise(rng);
  auto fit = fit_power_law(recs);
  auto res = log_residuals(fit, recs);
  auto shuffled = recs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto fit2 = fit_power_law(shuffled);
  EXPECT_NEAR(fit2.beta, fit.beta, 1e-12);
  EXPECT_NEAR(fit2.n1 / fit.n1, 1.0, 1e-10);
  auto res2 = log_residuals(fit2, shuffled);
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    auto it = std::find_if(recs.begin(), recs.end(),
                           [&](const auto& r) { return r.label == shuffled[i].label; });
    EXPECT_NEAR(res2[i], res[static_cast<std::size_t>(it - recs.begin())], 1e-12);
  }
}

TEST(Predict, ReferenceModels) {
  EXPECT_DOUBLE_EQ(predict(1e11, 1.0, 1e11), 1.0);
  EXPECT_DOUBLE_EQ(predict(1e13, 0.8, 1e13), 1.0);
  PowerLawFit fit{4.2e9, 1.3, 1.0, 2};
  EXPECT_DOUBLE_EQ(predict(fit, 4.2e9), 1.0);
  EXPECT_NEAR(predict(1e11, 1.0, 2.359296e11), 2.359296, 1e-12);
}

TEST(ReferenceTable, Rows) {
  const auto& t = reference_table();
  ASSERT_EQ(t.size(), 6u);
  auto find = [&](const std::string& name) {
    return *std::find_if(t.begin(), t.end(), [&](const auto& r) { return r.submission == name; });
  };
  auto b = find("Bisson-Nvidia-2019");
  EXPECT_EQ(b.max_connections, 4.0e9);
  EXPECT_EQ(b.n1, 1e13);
  EXPECT_EQ(b.beta, 4.0 / 5.0);
  auto d = find("Davis-TAMU-2019");
  EXPECT_EQ(d.max_connections, 4.0e9);
  EXPECT_EQ(d.n1, 1e11);
  EXPECT_EQ(d.beta, 1.0);
  auto m = find("Mofrad-UPitt-2019");
  EXPECT_EQ(m.max_connections, 4.0e9);
  EXPECT_EQ(m.n1, 5e10);
  EXPECT_EQ(m.beta, 1.0);
  EXPECT_EQ(find("Ellis-Sandia-2019").n1, 1.5e11);
  EXPECT_EQ(find("Wang-UCDavis-2019").max_connections, 1.0e9);
  EXPECT_EQ(find("Wang-PingAn-2019").beta, 1.1);
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::istringstream in(testing::read_file(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST(EmitReport, CsvAndRefit) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> noise(0.95, 1.05);
  auto recs = model_records(2e9, 0.95, 1e7, 1e10, 9);
  for (auto& r : recs) r.t_dnn *= noise(rng);
  auto fit = fit_power_law(recs);
  auto dir = testing::scratch_dir("report");
  auto paths = emit_report(fit, recs, reference_table(), dir);

  auto rows = read_csv(paths.csv);
  ASSERT_EQ(rows.size(), recs.size() + 1);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"n_ops", "t_measured", "t_fit", "rate"}));
  std::vector<TimingRecord> refit;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 4u);
    refit.push_back({std::stod(rows[i][0]), std::stod(rows[i][2]), ""});
  }
  auto again = fit_power_law(refit);
  EXPECT_NEAR(again.beta, fit.beta, 1e-12);
  EXPECT_NEAR(again.n1 / fit.n1, 1.0, 1e-10);

  ASSERT_EQ(paths.reference_lines.size(), 6u);
  for (const auto& p : paths.reference_lines) {
    std::istringstream in(testing::read_file(p));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 1);
      ++n;
    }
    EXPECT_EQ(n, 50u);
  }
  auto summary = testing::read_file(paths.summary);
  EXPECT_NE(summary.find("Bisson-Nvidia-2019"), std::string::npos);
  EXPECT_NE(summary.find("Mofrad-UPitt-2019"), std::string::npos);
}

TEST(EmitReport, EmptyReferenceOverlay) {
  auto recs = model_records(1e11, 1.0, 1e9, 1e11, 4);
  auto dir = testing::scratch_dir("report_noref");
  auto paths = emit_report(fit_power_law(recs), recs, {}, dir);
  EXPECT_TRUE(paths.reference_lines.empty());
  EXPECT_EQ(read_csv(paths.csv).size(), 5u);
  EXPECT_TRUE(std::filesystem::exists(paths.fit_line));
}

TEST(ResultLines, ParseAndSelectMinimum) {
  std::istringstream in(
      R"({"n_ops":100000,"t_dnn_seconds":0.5,"n_neurons":64,"n_layers":2,"n_inputs":10,"representation":"sparse","workers":1}
{"n_ops":100000,"t_dnn_seconds":0.25,"n_neurons":64,"n_layers":2,"n_inputs":10,"representation":"sparse","workers":1}

{"n_ops":1000000,"t_dnn_seconds":2.0,"n_neurons":64,"n_layers":20,"n_inputs":10,"representation":"sparse","workers":1}
)");
  auto recs = parse_result_lines(in);
  ASSERT_EQ(recs.size(), 3u);
  auto best = min_per_configuration(recs);
  ASSERT_EQ(best.size(), 2u);
  EXPECT_EQ(best[0].t_dnn + best[1].t_dnn, 2.25);

  std::istringstream bad("{\"n_ops\": 5}\n");
  EXPECT_THROW(parse_result_lines(bad), ParseError);
}

}  // namespace
}  // namespace sdnn
