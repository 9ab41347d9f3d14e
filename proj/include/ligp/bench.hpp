#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ligp/predictor.hpp"

namespace ligp {

/// w(x) = exp{-(x-1)^2} + exp{-0.8(x+1)^2} - 0.05 sin(8(x+0.1)).
double herbie_w(double x);
/// -w(x1) w(x2).
double herbies_tooth(const Vector& x);

/// Water flow through a borehole; x = (r_w, r, T_u, T_l, H_u, H_l, L, K_w) in natural units.
double borehole(const Vector& x);
/// Natural input ranges of the borehole function.
Domain borehole_ranges();

/// Affine map of each coordinate from `ranges` onto [0, 1], and back.
Matrix unit_scale(const Matrix& x, const Domain& ranges);
Matrix unit_unscale(const Matrix& u, const Domain& ranges);

double rmse(const Vector& pred, const Vector& truth);
/// Root mean squared relative error in percent; truth must be nonzero.
double rmspe(const Vector& pred, const Vector& truth);

struct CsvTable {
  Matrix x;
  Vector y;
  std::vector<std::string> header;  ///< empty when the file had none
};

/// Numeric CSV; the response is a column name (when a header is present) or
/// a 0-based index, and "" means the last column. A first row that fails to
/// parse as numbers is treated as a header.
CsvTable load_csv(const std::string& path, const std::string& response = "");
/// Reads every column into x (y left empty).
Matrix load_csv_matrix(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values);

/// Training design for the Herbie slice study: a 141 x 141 grid on [-2, 2]^2
/// topped up with an LHS to N points.
Matrix herbie_training_inputs(Eigen::Index total, std::uint64_t seed);
/// 99 sites at x2 = 0.6, x1 = -2 + 4 i / 100.
Matrix herbie_slice_inputs();

enum class Problem { Herbie, Borehole, Csv };

struct ConfigEntry {
  std::string label;
  PredictConfig config;
};

struct ExperimentSpec {
  Problem problem = Problem::Herbie;
  std::string csv_path;
  std::string response;
  Eigen::Index n_train = 1000;
  Eigen::Index n_test = 100;
  int replicates = 1;
  std::uint64_t seed = 1;
  /// "lhs" (fresh random test set) or "slice" (Herbie only).
  std::string test_set = "lhs";
  bool prescale = false;
  Eigen::Index prescale_subset = 1000;
  int workers = 1;
  std::vector<ConfigEntry> configs;

  void validate() const;
};

/// JSON experiment description; ParseError carries the offending line.
ExperimentSpec parse_experiment(const std::string& text);
ExperimentSpec load_experiment(const std::string& path);

struct SummaryStats {
  double mean = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
};
SummaryStats summarize(const std::vector<double>& values);

struct ConfigReport {
  std::string label;
  PredictConfig config;
  bool ok = true;
  std::string error;
  std::vector<double> rmse;
  std::vector<double> rmspe;
  std::vector<std::size_t> failed_sites;
  /// Per replicate: loop wall-clock, template build, summed per-phase site times.
  std::vector<double> loop_seconds;
  std::vector<double> template_seconds;
  std::vector<PhaseTimes> phase_totals;
  std::vector<std::uint64_t> design_builds;
  /// Per replicate, per site predictions (kept for table output).
  std::vector<Vector> means;
  std::vector<Vector> variances;
  std::vector<Vector> theta_hats;
};

struct MetricReport {
  ExperimentSpec spec;
  std::vector<ConfigReport> configs;
  std::vector<double> prescale_seconds;
  std::vector<Vector> scale_lengths;
  /// Test inputs (original units) and truth per replicate.
  std::vector<Matrix> test_inputs;
  std::vector<Vector> truth;

  bool all_ok() const;
};

MetricReport run_experiment(const ExperimentSpec& spec);

/// Writes report.json (deterministic metrics only), timings.json, and per
/// config metrics_<label>.csv and predictions_<label>.csv under `dir`.
void write_report(const MetricReport& report, const std::string& dir);
std::string report_json(const MetricReport& report);

/// Global inducing-point growth by ALC on a small Herbie design.
struct GlobalPathReport {
  std::vector<Eigen::Index> m_values;
  std::vector<double> rmse;
  double full_gp_rmse = 0.0;
  double theta = 0.0;
  double spearman = 0.0;
};

/// Global inducing set grown greedily by transductive ALC (reference set =
/// testing inputs) from an LHS candidate pool, at the full-GP MLE lengthscale.
struct GlobalPathOptions {
  Eigen::Index n_train = 100;
  Eigen::Index m_start = 5;
  Eigen::Index m_end = 85;
  Eigen::Index candidates = 100;
  Eigen::Index n_test = 1000;
  double g = 1e-4;
  double eps_k = 1e-6;
  double eps_q = 1e-5;
  std::uint64_t seed = 1;
};

GlobalPathReport global_alc_path(const GlobalPathOptions& options);
void write_global_path(const GlobalPathReport& report, const std::string& path);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ligp
