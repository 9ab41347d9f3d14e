// End-to-end acceptance run: one PASS/FAIL line per criterion.
// Usage: acceptance [output-dir]   (default: ./acceptance_out)

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ligp/bench.hpp"
#include "ligp/validation.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

ligp::ConfigEntry entry(const std::string& label, ligp::Method method, Eigen::Index m, Eigen::Index n) {
  ligp::ConfigEntry e;
  e.label = label;
  e.config.method = method;
  e.config.m = m;
  e.config.n = n;
  return e;
}

ligp::ExperimentSpec herbie_spec() {
  ligp::ExperimentSpec s;
  s.problem = ligp::Problem::Herbie;
  s.n_train = 40000;
  s.test_set = "slice";
  s.seed = 1;
  s.workers = workers();
  s.configs = {entry("ligp-wimse-bespoke", ligp::Method::WimseBespoke, 10, 100),
               entry("ligp-wimse-template", ligp::Method::WimseTemplate, 10, 100),
               entry("lagp-nn", ligp::Method::LagpNn, 0, 100)};
  return s;
}

ligp::ExperimentSpec borehole_spec() {
  ligp::ExperimentSpec s;
  s.problem = ligp::Problem::Borehole;
  s.n_train = 100000;
  s.n_test = 10000;
  s.replicates = 3;
  s.seed = 1;
  s.prescale = true;
  s.workers = workers();
  s.configs = {entry("ligp-qnorm", ligp::Method::Qnorm, 80, 150)};
  return s;
}

struct Run {
  ligp::MetricReport herbie;
  double herbie_seconds = 0.0;
  ligp::MetricReport borehole;
  double borehole_seconds = 0.0;
  ligp::GlobalPathReport global;
};

Run run_studies(const fs::path& dir) {
  Run r;
  auto t0 = Clock::now();
  r.herbie = ligp::run_experiment(herbie_spec());
  r.herbie_seconds = since(t0);
  ligp::write_report(r.herbie, (dir / "herbie").string());

  t0 = Clock::now();
  r.borehole = ligp::run_experiment(borehole_spec());
  r.borehole_seconds = since(t0);
  ligp::write_report(r.borehole, (dir / "borehole").string());

  r.global = ligp::global_alc_path({});
  ligp::write_global_path(r.global, (dir / "global_path.csv").string());
  return r;
}

const ligp::ConfigReport& config(const ligp::MetricReport& r, const std::string& label) {
  for (const auto& c : r.configs) {
    if (c.label == label) return c;
  }
  throw std::runtime_error("missing config " + label);
}

bool same_files(const fs::path& a, const fs::path& b, std::string& mismatch) {
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == "timings.json") continue;
    const fs::path rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) {
      mismatch = rel.string();
      return false;
    }
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::remove_all(out);
  fs::create_directories(out / "run1");
  fs::create_directories(out / "run2");

  namespace v = ligp::validation;
  const std::uint64_t seed = 20240601;
  {
    const v::SuiteResult q = v::quadrature_suite(100, seed);
    report(1, q.passed && q.instances == 100 && q.seconds < 60.0,
           fmt("wIMSE vs quadrature: max rel err %.3e (< 1e-5), %.0f instances, %.2f s", q.max_error, q.instances,
               q.seconds));
    const v::SuiteResult g = v::gradient_suite(50, seed + 1);
    report(2, g.passed && g.instances == 50,
           fmt("gradient vs central differences: max rel err %.3e (< 1e-4), %.0f instances", g.max_error,
               g.instances));
    const v::SuiteResult w = v::woodbury_suite(20, seed + 2);
    report(3, w.passed && w.instances == 20,
           fmt("Woodbury vs dense covariance: max err %.3e (< 1e-7), %.0f instances", w.max_error, w.instances));
    const v::SuiteResult u = v::update_suite(20, seed + 3);
    report(4, u.passed && u.instances == 20,
           fmt("sequential update vs rebuild: max rel err %.3e (< 1e-8), %.0f steps", u.max_error, u.instances));
    const v::SuiteResult f = v::reduction_suite(20, seed + 4);
    report(5, f.passed && f.instances > 0,
           fmt("full-GP reduction: max err %.3e (< 1e-6), %.0f instances", f.max_error, f.instances));
  }

  const Run a = run_studies(out / "run1");
  {
    const auto& b = config(a.herbie, "ligp-wimse-bespoke");
    const auto& nn = config(a.herbie, "lagp-nn");
    const bool ok = b.ok && nn.ok && b.rmse[0] <= 5.6e-4 && nn.rmse[0] <= 5.7e-4 && a.herbie_seconds < 900.0;
    report(6, ok,
           fmt("Herbie slice: bespoke RMSE %.3e (<= 5.6e-4), LAGP-NN RMSE %.3e (<= 5.7e-4), %.1f s (< 900)",
               b.rmse[0], nn.rmse[0], a.herbie_seconds));
  }
  {
    const auto& q = config(a.borehole, "ligp-qnorm");
    const double mean = q.ok ? ligp::summarize(q.rmse).mean : std::numeric_limits<double>::quiet_NaN();
    report(7, q.ok && mean < 0.88 && a.borehole_seconds < 1800.0,
           fmt("borehole qNorm(80,150): mean RMSE %.4f over 3 replicates (< 0.88), %.1f s (< 1800)", mean,
               a.borehole_seconds));
  }
  {
    const auto& b = config(a.herbie, "ligp-wimse-bespoke");
    const auto& t = config(a.herbie, "ligp-wimse-template");
    const double bespoke = b.loop_seconds[0] + b.template_seconds[0];
    const double tpl = t.loop_seconds[0] + t.template_seconds[0];
    report(8, t.ok && b.ok && tpl <= bespoke / 10.0,
           fmt("template %.3f s vs bespoke %.3f s: speedup %.1fx (>= 10x)", tpl, bespoke, bespoke / tpl));
  }
  {
    const auto& g = a.global;
    const double final_rmse = g.rmse.back();
    report(9, g.spearman < -0.8 && final_rmse <= 2.0 * g.full_gp_rmse,
           fmt("global ALC path M=5..85: Spearman %.3f (< -0.8), final RMSE %.4g vs full GP %.4g (<= 2x)",
               g.spearman, final_rmse, g.full_gp_rmse));
  }

  run_studies(out / "run2");
  {
    std::string mismatch;
    const bool ok = same_files(out / "run1", out / "run2", mismatch) && same_files(out / "run2", out / "run1", mismatch);
    report(10, ok, ok ? "reruns of 6-9 produced identical report files" : "report files differ: " + mismatch);
  }

  std::printf("%s: %d of 10 criteria failed\n", g_failures ? "FAIL" : "PASS", g_failures);
  return g_failures ? 1 : 0;
}
