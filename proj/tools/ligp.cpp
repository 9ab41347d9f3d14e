#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ligp/bench.hpp"
#include "ligp/validation.hpp"

namespace {

using ligp::Matrix;
using ligp::Vector;

constexpr const char* kCsvHelp = R"(CSV files
  Training files are numeric and rectangular, with an optional header row.
  The response is the last column unless --response names it (header name
  or 0-based index); every other column is an input, in file order.
  Test files hold the same input columns, optionally plus the response
  column at the same position (it is ignored).
  predict writes one row per test row, in input order:
    x1..xd (or the input header names), mean, variance, theta_hat, nu_hat
  and a row-aligned timings file <out>.timings.csv with columns
    neighborhood, design, mle, predict (seconds).
Exit codes
  0 success, 1 bad input or configuration, 2 some bench configs failed.)";

struct PredictArgs {
  std::string train;
  std::string test;
  std::string response;
  std::string out = "predictions.csv";
  std::string method = "ligp-qnorm";
  std::string theta = "mle";
  std::string template_path;
  long m = 10;
  long n = 100;
  double g = 1e-6;
  std::uint64_t seed = 1;
  int workers = 1;
};

int cmd_predict(const PredictArgs& a) {
  const ligp::CsvTable train = ligp::load_csv(a.train, a.response);
  const Eigen::Index d = train.x.cols();
  Matrix x_test = ligp::load_csv_matrix(a.test);
  if (x_test.cols() == d + 1) {
    x_test = ligp::load_csv(a.test, a.response).x;
  } else if (x_test.cols() != d) {
    std::cerr << "error: test file has " << x_test.cols() << " columns, training inputs have " << d << "\n";
    return 1;
  }

  ligp::PredictConfig cfg;
  cfg.method = ligp::parse_method(a.method);
  cfg.m = a.m;
  cfg.n = a.n;
  cfg.theta = ligp::ThetaMode::parse(a.theta);
  cfg.g = a.g;
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  cfg.validate();
  if (cfg.n > train.x.rows()) throw ligp::InvalidArgument("n exceeds the number of training rows");

  Matrix all(train.x.rows() + x_test.rows(), d);
  all << train.x, x_test;
  const ligp::Domain domain = ligp::Domain::bounding_box(all);
  const ligp::Dataset data(train.x, train.y);

  std::optional<ligp::Template> tpl;
  if (!a.template_path.empty()) tpl = ligp::load_template(a.template_path);
  const ligp::BatchResult res = ligp::ligp_predict(cfg, x_test, data, domain, tpl ? &*tpl : nullptr);

  std::vector<std::string> header;
  for (Eigen::Index k = 0; k < d; ++k) {
    header.push_back(train.header.empty() ? "x" + std::to_string(k + 1) : train.header[static_cast<std::size_t>(k)]);
  }
  for (const char* h : {"mean", "variance", "theta_hat", "nu_hat"}) header.emplace_back(h);
  Matrix table(x_test.rows(), d + 4);
  Matrix times(x_test.rows(), 4);
  for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
    const auto& s = res.sites[static_cast<std::size_t>(i)];
    table.row(i).head(d) = x_test.row(i);
    table.row(i).tail(4) << s.moments.mean, s.moments.variance, s.theta_hat, s.nu_hat;
    times.row(i) << s.times.neighborhood, s.times.design, s.times.mle, s.times.predict;
  }
  ligp::write_csv(a.out, header, table);
  ligp::write_csv(a.out + ".timings.csv", {"neighborhood", "design", "mle", "predict"}, times);
  const std::size_t failed = res.failures();
  std::cout << "predicted " << x_test.rows() << " sites in " << res.loop_seconds + res.template_seconds << " s";
  if (failed) std::cout << " (" << failed << " failed)";
  std::cout << "\n";
  return failed ? 2 : 0;
}

int cmd_template(const std::string& train_path, const std::string& response, long m, long n,
                 const std::string& out, double g, std::uint64_t seed) {
  const ligp::CsvTable train = ligp::load_csv(train_path, response);
  if (m < 1 || n < m || n > train.x.rows()) throw ligp::InvalidArgument("template: need 1 <= m <= n <= N");
  const ligp::Dataset data(train.x, train.y);
  ligp::DesignOptions opt;
  opt.kernel.g = g;
  opt.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  const ligp::Template tpl = ligp::build_wimse_template(m, n, data, ligp::Domain::bounding_box(train.x), opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ligp::save_template(tpl, out);
  std::printf("theta0 %.10g\nbuild_seconds %.3f\n", tpl.theta0, secs);
  return 0;
}

int cmd_bench(const std::string& config, const std::string& out, int workers) {
  ligp::ExperimentSpec spec;
  try {
    spec = ligp::load_experiment(config);
  } catch (const std::exception& e) {
    std::cerr << config << ": " << e.what() << "\n";
    return 1;
  }
  if (workers > 0) spec.workers = workers;
  const ligp::MetricReport report = ligp::run_experiment(spec);
  ligp::write_report(report, out);
  for (const auto& c : report.configs) {
    const auto s = ligp::summarize(c.rmse);
    std::printf("%-28s %s rmse %.4g [%.4g, %.4g]", c.label.c_str(), c.ok ? "ok    " : "FAILED", s.mean, s.q05, s.q95);
    if (!c.ok) std::printf("  %s", c.error.c_str());
    std::printf("\n");
  }
  return report.all_ok() ? 0 : 2;
}

int cmd_validate(std::uint64_t seed) {
  bool all = true;
  for (const auto& r : ligp::validation::run_all(seed)) {
    std::cout << ligp::validation::format(r) << "\n";
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally induced Gaussian process prediction"};
  app.footer(kCsvHelp);
  app.require_subcommand(1);

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Predict at every row of a test CSV");
  predict->add_option("train", pa.train, "Training CSV")->required()->check(CLI::ExistingFile);
  predict->add_option("test", pa.test, "Test CSV")->required()->check(CLI::ExistingFile);
  predict->add_option("--response", pa.response, "Response column name or 0-based index (default: last)");
  predict->add_option("--method", pa.method,
                      "ligp-wimse-bespoke | ligp-wimse-template | ligp-chr | ligp-qnorm | lagp-nn | lagp-alc")
      ->capture_default_str();
  predict->add_option("--m", pa.m, "Inducing points per site")->capture_default_str();
  predict->add_option("--n", pa.n, "Neighborhood size")->capture_default_str();
  predict->add_option("--theta", pa.theta, "mle | fixed:<value>")->capture_default_str();
  predict->add_option("--g", pa.g, "Nugget")->capture_default_str();
  predict->add_option("--seed", pa.seed, "Seed for template LHS draws")->capture_default_str();
  predict->add_option("--workers", pa.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  predict->add_option("--template", pa.template_path, "Prebuilt wIMSE template file");
  predict->add_option("--out", pa.out, "Output CSV")->capture_default_str();

  std::string tpl_train, tpl_response, tpl_out = "template.txt";
  long tpl_m = 10, tpl_n = 100;
  double tpl_g = 1e-6;
  std::uint64_t tpl_seed = 1;
  auto* tpl = app.add_subcommand("template", "Build a wIMSE inducing-point template");
  tpl->add_option("train", tpl_train, "Training CSV")->required()->check(CLI::ExistingFile);
  tpl->add_option("--response", tpl_response, "Response column name or 0-based index (default: last)");
  tpl->add_option("--m", tpl_m, "Inducing points")->capture_default_str();
  tpl->add_option("--n", tpl_n, "Neighborhood size")->capture_default_str();
  tpl->add_option("--g", tpl_g, "Nugget")->capture_default_str();
  tpl->add_option("--seed", tpl_seed, "Multi-start seed")->capture_default_str();
  tpl->add_option("--out", tpl_out, "Template file")->capture_default_str();

  std::string bench_config, bench_out = "bench_out";
  int bench_workers = 0;
  auto* bench = app.add_subcommand("bench", "Run a JSON experiment description");
  bench->add_option("config", bench_config, "Experiment file")->required();
  bench->add_option("--out", bench_out, "Report directory")->capture_default_str();
  bench->add_option("--workers", bench_workers, "Override the worker count");

  std::uint64_t val_seed = 7;
  auto* validate = app.add_subcommand("validate", "Run the numerical oracle suites");
  validate->add_option("--seed", val_seed, "Instance seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*predict) return cmd_predict(pa);
    if (*tpl) return cmd_template(tpl_train, tpl_response, tpl_m, tpl_n, tpl_out, tpl_g, tpl_seed);
    if (*bench) return cmd_bench(bench_config, bench_out, bench_workers);
    if (*validate) return cmd_validate(val_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
