#include "ligp/bench.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ligp/linalg.hpp"

namespace ligp {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// SplitMix64 finalizer: decorrelates replicate and component seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Matrix map_to_box(const Matrix& u, const Domain& box) { return unit_unscale(u, box); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::string safe_label(const std::string& label) {
  std::string out;
  for (char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "config" : out;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json to_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

Json config_json(const PredictConfig& c) {
  Json j;
  j["method"] = method_name(c.method);
  j["m"] = c.m;
  j["n"] = c.n;
  j["theta"] = c.theta.to_string();
  j["g"] = c.g;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

double herbie_w(double x) {
  return std::exp(-(x - 1.0) * (x - 1.0)) + std::exp(-0.8 * (x + 1.0) * (x + 1.0)) - 0.05 * std::sin(8.0 * (x + 0.1));
}

double herbies_tooth(const Vector& x) {
  if (x.size() != 2) throw InvalidArgument("herbies_tooth: input must be 2-dimensional");
  return -herbie_w(x(0)) * herbie_w(x(1));
}

double borehole(const Vector& x) {
  if (x.size() != 8) throw InvalidArgument("borehole: input must be 8-dimensional");
  const double rw = x(0), r = x(1), tu = x(2), tl = x(3), hu = x(4), hl = x(5), l = x(6), kw = x(7);
  if (!(r > rw) || !(rw > 0.0)) throw InvalidArgument("borehole: need r > r_w > 0");
  const double lr = std::log(r / rw);
  return 2.0 * M_PI * tu * (hu - hl) / (lr * (1.0 + 2.0 * l * tu / (lr * rw * rw * kw) + tu / tl));
}

Domain borehole_ranges() {
  Vector lo(8), hi(8);
  lo << 0.05, 100, 63070, 63.1, 990, 700, 1120, 9855;
  hi << 0.15, 5000, 115600, 116, 1100, 820, 1680, 12045;
  return Domain(lo, hi);
}

Matrix unit_scale(const Matrix& x, const Domain& ranges) {
  ranges.validate();
  if (x.cols() != ranges.dim()) throw InvalidArgument("unit_scale: dimension mismatch");
  return (x.rowwise() - ranges.lower.transpose()).array().rowwise() / (ranges.upper - ranges.lower).transpose().array();
}

Matrix unit_unscale(const Matrix& u, const Domain& ranges) {
  ranges.validate();
  if (u.cols() != ranges.dim()) throw InvalidArgument("unit_unscale: dimension mismatch");
  return (u.array().rowwise() * (ranges.upper - ranges.lower).transpose().array()).matrix().rowwise() +
         ranges.lower.transpose();
}

double rmse(const Vector& pred, const Vector& truth) {
  if (pred.size() != truth.size() || pred.size() == 0) throw InvalidArgument("rmse: length mismatch");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

double rmspe(const Vector& pred, const Vector& truth) {
  if (pred.size() != truth.size() || pred.size() == 0) throw InvalidArgument("rmspe: length mismatch");
  if ((truth.array() == 0.0).any()) throw InvalidArgument("rmspe: truth has zero entries");
  return std::sqrt(((pred - truth).array() / truth.array()).square().mean()) * 100.0;
}

namespace {

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

RawCsv read_raw_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("load_csv: cannot open " + path);
  RawCsv raw;
  std::string line;
  std::size_t row = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    std::vector<double> vals(cells.size());
    std::size_t bad = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], vals[c]) && bad == 0) bad = c + 1;
    }
    if (first) {
      first = false;
      width = cells.size();
      if (bad) {
        raw.header = cells;
        continue;
      }
    }
    if (cells.size() != width) {
      throw ParseError("csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " columns, expected " + std::to_string(width),
                       row, 0);
    }
    if (bad) {
      throw ParseError("csv: non-numeric cell '" + cells[bad - 1] + "' at row " + std::to_string(row) + ", column " +
                           std::to_string(bad),
                       row, bad);
    }
    raw.rows.push_back(std::move(vals));
  }
  if (raw.rows.empty()) throw ParseError("csv: no data rows in " + path, row, 0);
  return raw;
}

}  // namespace

Matrix load_csv_matrix(const std::string& path) {
  const RawCsv raw = read_raw_csv(path);
  Matrix x(static_cast<Eigen::Index>(raw.rows.size()), static_cast<Eigen::Index>(raw.rows[0].size()));
  for (std::size_t i = 0; i < raw.rows.size(); ++i)
    for (std::size_t c = 0; c < raw.rows[i].size(); ++c)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = raw.rows[i][c];
  return x;
}

CsvTable load_csv(const std::string& path, const std::string& response) {
  const RawCsv raw = read_raw_csv(path);
  const std::size_t width = raw.rows[0].size();
  if (width < 2) throw InvalidArgument("load_csv: need at least one input column and a response");
  std::size_t resp = width - 1;
  if (!response.empty()) {
    const bool numeric = std::all_of(response.begin(), response.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (numeric) {
      resp = static_cast<std::size_t>(std::stoul(response));
    } else {
      const auto it = std::find(raw.header.begin(), raw.header.end(), response);
      if (it == raw.header.end()) throw InvalidArgument("load_csv: no column named '" + response + "'");
      resp = static_cast<std::size_t>(it - raw.header.begin());
    }
    if (resp >= width) throw InvalidArgument("load_csv: response column " + response + " out of range");
  }
  CsvTable t;
  const auto n = static_cast<Eigen::Index>(raw.rows.size());
  t.x.resize(n, static_cast<Eigen::Index>(width - 1));
  t.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index k = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = raw.rows[static_cast<std::size_t>(i)][c];
      if (c == resp) t.y(i) = v;
      else t.x(i, k++) = v;
    }
  }
  for (std::size_t c = 0; c < raw.header.size(); ++c)
    if (c != resp) t.header.push_back(raw.header[c]);
  if (!raw.header.empty()) t.header.push_back(raw.header[resp]);
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("write_csv: cannot open " + path);
  if (!header.empty()) {
    if (static_cast<Eigen::Index>(header.size()) != values.cols()) throw InvalidArgument("write_csv: header width mismatch");
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << '\n';
  }
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) os << (c ? "," : "") << values(i, c);
    os << '\n';
  }
  if (!os) throw InvalidArgument("write_csv: write failed for " + path);
}

Matrix herbie_training_inputs(Eigen::Index total, std::uint64_t seed) {
  if (total < 4) throw InvalidArgument("herbie_training_inputs: need at least 4 points");
  const auto side = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(total) / 2.0)));
  const Eigen::Index grid = side >= 2 ? side * side : 0;
  Matrix x(total, 2);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < side && grid > 0; ++i) {
    for (Eigen::Index j = 0; j < side; ++j) {
      x(r, 0) = -2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(side - 1);
      x(r, 1) = -2.0 + 4.0 * static_cast<double>(j) / static_cast<double>(side - 1);
      ++r;
    }
  }
  if (total > grid) x.bottomRows(total - grid) = map_to_box(lhs(total - grid, 2, seed), Domain::cube(2, -2.0, 2.0));
  return x;
}

Matrix herbie_slice_inputs() {
  Matrix x(99, 2);
  for (Eigen::Index i = 1; i <= 99; ++i) {
    x(i - 1, 0) = -2.0 + 4.0 * static_cast<double>(i) / 100.0;
    x(i - 1, 1) = 0.6;
  }
  return x;
}

void ExperimentSpec::validate() const {
  if (replicates < 1) throw InvalidArgument("experiment: replicates must be at least 1");
  if (problem != Problem::Csv && n_train < 4) throw InvalidArgument("experiment: N must be at least 4");
  if (problem != Problem::Csv && test_set != "slice" && n_test < 1) throw InvalidArgument("experiment: N_prime must be at least 1");
  if (test_set != "lhs" && test_set != "slice") throw InvalidArgument("experiment: test_set must be 'lhs' or 'slice'");
  if (test_set == "slice" && problem != Problem::Herbie) throw InvalidArgument("experiment: slice test set is Herbie-only");
  if (problem == Problem::Csv && csv_path.empty()) throw InvalidArgument("experiment: csv problem needs csv_path");
  if (configs.empty()) throw InvalidArgument("experiment: no configs");
  if (workers < 1) throw InvalidArgument("experiment: workers must be at least 1");
}

namespace {

// 1-based line of the first occurrence of "key" in the source, 0 if absent.
std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n')) + 1;
}

[[noreturn]] void fail_at(const std::string& text, const std::string& key, const std::string& msg) {
  const std::size_t line = line_of_key(text, key);
  throw ParseError("config line " + std::to_string(line) + ": " + msg, line, 0);
}

template <class T>
T get_or(const Json& j, const std::string& key, T fallback, const std::string& text) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail_at(text, key, "key '" + key + "' has the wrong type");
  }
}

void check_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& text) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      fail_at(text, it.key(), "unknown key '" + it.key() + "'");
    }
  }
}

}  // namespace

ExperimentSpec parse_experiment(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line =
        static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n')) + 1;
    throw ParseError("config line " + std::to_string(line) + ": malformed JSON (" + e.what() + ")", line, 0);
  }
  if (!j.is_object()) throw ParseError("config line 1: top level must be an object", 1, 0);
  check_keys(j,
             {"problem", "csv_path", "response", "N", "N_prime", "replicates", "seed", "test_set", "prescale",
              "prescale_subset", "workers", "configs"},
             text);

  ExperimentSpec spec;
  const std::string problem = get_or<std::string>(j, "problem", "", text);
  if (problem == "herbie") spec.problem = Problem::Herbie;
  else if (problem == "borehole") spec.problem = Problem::Borehole;
  else if (problem == "csv") spec.problem = Problem::Csv;
  else fail_at(text, "problem", "unknown problem '" + problem + "' (expected herbie, borehole or csv)");

  spec.csv_path = get_or<std::string>(j, "csv_path", "", text);
  spec.response = get_or<std::string>(j, "response", "", text);
  spec.n_train = get_or<Eigen::Index>(j, "N", spec.n_train, text);
  spec.n_test = get_or<Eigen::Index>(j, "N_prime", spec.n_test, text);
  spec.replicates = get_or<int>(j, "replicates", spec.replicates, text);
  spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed, text);
  spec.test_set = get_or<std::string>(j, "test_set", spec.test_set, text);
  spec.prescale = get_or<bool>(j, "prescale", spec.problem != Problem::Herbie, text);
  spec.prescale_subset = get_or<Eigen::Index>(j, "prescale_subset", spec.prescale_subset, text);
  spec.workers = get_or<int>(j, "workers", spec.workers, text);

  if (!j.contains("configs") || !j["configs"].is_array()) fail_at(text, "configs", "'configs' must be an array");
  for (const auto& c : j["configs"]) {
    if (!c.is_object()) fail_at(text, "configs", "each config must be an object");
    check_keys(c, {"label", "method", "m", "n", "theta", "g", "seed", "n0", "candidates", "starts", "tolerance"},
               text);
    ConfigEntry e;
    try {
      e.config.method = parse_method(get_or<std::string>(c, "method", "ligp-qnorm", text));
    } catch (const InvalidArgument& ex) {
      fail_at(text, "method", ex.what());
    }
    e.config.m = get_or<Eigen::Index>(c, "m", e.config.m, text);
    e.config.n = get_or<Eigen::Index>(c, "n", e.config.n, text);
    try {
      e.config.theta = ThetaMode::parse(get_or<std::string>(c, "theta", "mle", text));
    } catch (const InvalidArgument& ex) {
      fail_at(text, "theta", ex.what());
    }
    e.config.g = get_or<double>(c, "g", e.config.g, text);
    e.config.seed = get_or<std::uint64_t>(c, "seed", spec.seed, text);
    e.config.alc_n0 = get_or<Eigen::Index>(c, "n0", e.config.alc_n0, text);
    e.config.alc_candidates = get_or<Eigen::Index>(c, "candidates", e.config.alc_candidates, text);
    e.config.design_starts = get_or<int>(c, "starts", e.config.design_starts, text);
    e.config.design_tolerance = get_or<double>(c, "tolerance", e.config.design_tolerance, text);
    e.label = get_or<std::string>(c, "label", method_name(e.config.method) + "-m" + std::to_string(e.config.m) + "-n" +
                                                  std::to_string(e.config.n),
                                  text);
    spec.configs.push_back(std::move(e));
  }
  try {
    spec.validate();
  } catch (const InvalidArgument& ex) {
    throw ParseError(std::string("config: ") + ex.what(), 0, 0);
  }
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment(ss.str());
}

SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty()) {
    s.mean = s.q05 = s.q95 = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = std::accumulate(finite.begin(), finite.end(), 0.0) / static_cast<double>(finite.size());
  s.q05 = quantile(finite, 0.05);
  s.q95 = quantile(finite, 0.95);
  return s;
}

bool MetricReport::all_ok() const {
  return std::all_of(configs.begin(), configs.end(), [](const auto& c) { return c.ok; });
}

MetricReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  MetricReport report;
  report.spec = spec;
  report.configs.resize(spec.configs.size());
  for (std::size_t c = 0; c < spec.configs.size(); ++c) {
    report.configs[c].label = spec.configs[c].label;
    report.configs[c].config = spec.configs[c].config;
  }

  CsvTable csv;
  std::vector<Eigen::Index> fold_order;
  if (spec.problem == Problem::Csv) {
    csv = load_csv(spec.csv_path, spec.response);
    if (csv.x.rows() < 20) throw InvalidArgument("experiment: csv needs at least 20 rows for 10-fold CV");
    fold_order.resize(static_cast<std::size_t>(csv.x.rows()));
    std::iota(fold_order.begin(), fold_order.end(), Eigen::Index{0});
    std::mt19937_64 rng(spec.seed);
    std::shuffle(fold_order.begin(), fold_order.end(), rng);
  }

  for (int r = 0; r < spec.replicates; ++r) {
    const std::uint64_t rseed = mix_seed(spec.seed, static_cast<std::uint64_t>(r));
    Matrix x_train, x_test;  // original units
    Vector y_train, y_test;
    Matrix w_train, w_test;  // working units before pre-scaling
    Domain domain;
    switch (spec.problem) {
      case Problem::Herbie: {
        domain = Domain::cube(2, -2.0, 2.0);
        x_train = herbie_training_inputs(spec.n_train, mix_seed(rseed, 1));
        x_test = spec.test_set == "slice" ? herbie_slice_inputs()
                                          : map_to_box(lhs(spec.n_test, 2, mix_seed(rseed, 2)), domain);
        y_train.resize(x_train.rows());
        for (Eigen::Index i = 0; i < x_train.rows(); ++i) y_train(i) = herbies_tooth(x_train.row(i).transpose());
        y_test.resize(x_test.rows());
        for (Eigen::Index i = 0; i < x_test.rows(); ++i) y_test(i) = herbies_tooth(x_test.row(i).transpose());
        w_train = x_train;
        w_test = x_test;
        break;
      }
      case Problem::Borehole: {
        const Domain ranges = borehole_ranges();
        domain = Domain::cube(8, 0.0, 1.0);
        w_train = lhs(spec.n_train, 8, mix_seed(rseed, 1));
        w_test = lhs(spec.n_test, 8, mix_seed(rseed, 2));
        x_train = unit_unscale(w_train, ranges);
        x_test = unit_unscale(w_test, ranges);
        y_train.resize(x_train.rows());
        for (Eigen::Index i = 0; i < x_train.rows(); ++i) y_train(i) = borehole(x_train.row(i).transpose());
        y_test.resize(x_test.rows());
        for (Eigen::Index i = 0; i < x_test.rows(); ++i) y_test(i) = borehole(x_test.row(i).transpose());
        break;
      }
      case Problem::Csv: {
        const Eigen::Index total = csv.x.rows();
        const int fold = r % 10;
        const Eigen::Index begin = total * fold / 10;
        const Eigen::Index end = total * (fold + 1) / 10;
        x_train.resize(total - (end - begin), csv.x.cols());
        y_train.resize(total - (end - begin));
        x_test.resize(end - begin, csv.x.cols());
        y_test.resize(end - begin);
        Eigen::Index a = 0, b = 0;
        for (Eigen::Index i = 0; i < total; ++i) {
          const Eigen::Index row = fold_order[static_cast<std::size_t>(i)];
          if (i >= begin && i < end) {
            x_test.row(b) = csv.x.row(row);
            y_test(b++) = csv.y(row);
          } else {
            x_train.row(a) = csv.x.row(row);
            y_train(a++) = csv.y(row);
          }
        }
        domain = Domain::bounding_box(x_train);
        w_train = x_train;
        w_test = x_test;
        break;
      }
    }

    if (spec.prescale) {
      const auto t0 = Clock::now();
      const ScaledDesign sd =
          prescale(w_train, y_train, domain, std::min(spec.prescale_subset, w_train.rows()), mix_seed(rseed, 3));
      report.prescale_seconds.push_back(seconds_since(t0));
      report.scale_lengths.push_back(sd.scale_lengths);
      w_train = sd.x_scaled;
      w_test = sd.apply(w_test);
      domain = sd.scaled_domain();
    }
    report.test_inputs.push_back(x_test);
    report.truth.push_back(y_test);

    const Dataset data(w_train, y_train);
    for (std::size_t c = 0; c < spec.configs.size(); ++c) {
      ConfigReport& cr = report.configs[c];
      PredictConfig cfg = spec.configs[c].config;
      cfg.workers = spec.workers;
      cfg.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
      try {
        if (cfg.n > data.size()) throw InvalidArgument("config: n exceeds training size");
        const BatchResult batch = ligp_predict(cfg, w_test, data, domain);
        std::vector<Eigen::Index> ok_rows;
        std::size_t failed = 0;
        PhaseTimes totals;
        for (std::size_t i = 0; i < batch.sites.size(); ++i) {
          const SiteResult& s = batch.sites[i];
          if (s.ok) ok_rows.push_back(static_cast<Eigen::Index>(i));
          else ++failed;
          totals.neighborhood += s.times.neighborhood;
          totals.design += s.times.design;
          totals.mle += s.times.mle;
          totals.predict += s.times.predict;
        }
        Vector pred(static_cast<Eigen::Index>(ok_rows.size())), truth(static_cast<Eigen::Index>(ok_rows.size()));
        for (std::size_t i = 0; i < ok_rows.size(); ++i) {
          pred(static_cast<Eigen::Index>(i)) = batch.sites[static_cast<std::size_t>(ok_rows[i])].moments.mean;
          truth(static_cast<Eigen::Index>(i)) = y_test(ok_rows[i]);
        }
        const bool any = !ok_rows.empty();
        cr.rmse.push_back(any ? rmse(pred, truth) : std::numeric_limits<double>::quiet_NaN());
        const bool nonzero = any && (truth.array() != 0.0).all();
        cr.rmspe.push_back(nonzero ? rmspe(pred, truth) : std::numeric_limits<double>::quiet_NaN());
        cr.failed_sites.push_back(failed);
        cr.loop_seconds.push_back(batch.loop_seconds);
        cr.template_seconds.push_back(batch.template_seconds);
        cr.phase_totals.push_back(totals);
        cr.design_builds.push_back(batch.design_builds);
        Vector th(static_cast<Eigen::Index>(batch.sites.size()));
        for (std::size_t i = 0; i < batch.sites.size(); ++i) th(static_cast<Eigen::Index>(i)) = batch.sites[i].theta_hat;
        cr.means.push_back(batch.means());
        cr.variances.push_back(batch.variances());
        cr.theta_hats.push_back(th);
        if (failed > 0 && cr.error.empty()) {
          for (const auto& s : batch.sites) {
            if (!s.ok) {
              cr.error = "site failure: " + s.error;
              break;
            }
          }
        }
      } catch (const std::exception& e) {
        cr.ok = false;
        cr.error = e.what();
      }
    }
  }
  return report;
}

std::string report_json(const MetricReport& report) {
  const ExperimentSpec& spec = report.spec;
  Json j;
  j["problem"] = spec.problem == Problem::Herbie ? "herbie" : spec.problem == Problem::Borehole ? "borehole" : "csv";
  if (spec.problem == Problem::Csv) j["csv_path"] = spec.csv_path;
  j["N"] = spec.n_train;
  j["N_prime"] = spec.test_set == "slice" ? Eigen::Index{99} : spec.n_test;
  j["test_set"] = spec.test_set;
  j["replicates"] = spec.replicates;
  j["seed"] = spec.seed;
  j["prescale"] = spec.prescale;
  Json scales = Json::array();
  for (const auto& s : report.scale_lengths) scales.push_back(to_json(std::vector<double>(s.data(), s.data() + s.size())));
  j["scale_lengths"] = scales;
  Json cfgs = Json::array();
  for (const auto& c : report.configs) {
    Json cj;
    cj["label"] = c.label;
    cj["config"] = config_json(c.config);
    cj["status"] = c.ok ? "ok" : "failed";
    if (!c.error.empty()) cj["error"] = c.error;
    cj["rmse"] = to_json(c.rmse);
    cj["rmspe"] = to_json(c.rmspe);
    const SummaryStats a = summarize(c.rmse);
    const SummaryStats b = summarize(c.rmspe);
    cj["rmse_mean"] = number_or_null(a.mean);
    cj["rmse_q05"] = number_or_null(a.q05);
    cj["rmse_q95"] = number_or_null(a.q95);
    cj["rmspe_mean"] = number_or_null(b.mean);
    cj["rmspe_q05"] = number_or_null(b.q05);
    cj["rmspe_q95"] = number_or_null(b.q95);
    cj["failed_sites"] = c.failed_sites;
    cfgs.push_back(cj);
  }
  j["configs"] = cfgs;
  return j.dump(2) + "\n";
}

void write_report(const MetricReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream os(fs::path(dir) / "report.json");
    os << report_json(report);
    if (!os) throw InvalidArgument("write_report: cannot write report.json in " + dir);
  }
  {
    Json t;
    t["prescale_seconds"] = report.prescale_seconds;
    Json cfgs = Json::array();
    for (const auto& c : report.configs) {
      Json cj;
      cj["label"] = c.label;
      cj["loop_seconds"] = c.loop_seconds;
      cj["template_seconds"] = c.template_seconds;
      Json phases = Json::array();
      for (const auto& p : c.phase_totals) {
        phases.push_back({{"neighborhood", p.neighborhood}, {"design", p.design}, {"mle", p.mle}, {"predict", p.predict}});
      }
      cj["site_phase_totals"] = phases;
      cj["design_builds"] = c.design_builds;
      cfgs.push_back(cj);
    }
    t["configs"] = cfgs;
    std::ofstream os(fs::path(dir) / "timings.json");
    os << t.dump(2) << "\n";
  }
  for (const auto& c : report.configs) {
    const std::string label = safe_label(c.label);
    Matrix metrics(static_cast<Eigen::Index>(c.rmse.size()), 4);
    for (std::size_t r = 0; r < c.rmse.size(); ++r) {
      metrics.row(static_cast<Eigen::Index>(r)) << static_cast<double>(r), c.rmse[r], c.rmspe[r],
          static_cast<double>(c.failed_sites[r]);
    }
    write_csv((fs::path(dir) / ("metrics_" + label + ".csv")).string(), {"replicate", "rmse", "rmspe", "failed_sites"},
              metrics);

    if (c.means.empty()) continue;
    const Eigen::Index d = report.test_inputs[0].cols();
    std::vector<std::string> header{"replicate"};
    for (Eigen::Index k = 0; k < d; ++k) header.push_back("x" + std::to_string(k + 1));
    for (const char* h : {"truth", "mean", "variance", "theta_hat"}) header.emplace_back(h);
    Eigen::Index rows = 0;
    for (const auto& m : c.means) rows += m.size();
    Matrix table(rows, d + 5);
    Eigen::Index row = 0;
    for (std::size_t r = 0; r < c.means.size(); ++r) {
      const Matrix& xt = report.test_inputs[r];
      for (Eigen::Index i = 0; i < xt.rows(); ++i, ++row) {
        table(row, 0) = static_cast<double>(r);
        table.row(row).segment(1, d) = xt.row(i);
        table(row, d + 1) = report.truth[r](i);
        table(row, d + 2) = c.means[r](i);
        table(row, d + 3) = c.variances[r](i);
        table(row, d + 4) = c.theta_hats[r](i);
      }
    }
    write_csv((fs::path(dir) / ("predictions_" + label + ".csv")).string(), header, table);
  }
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("spearman: need two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const Eigen::Map<const Vector> va(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Vector> vb(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Vector ca = va.array() - va.mean();
  const Vector cb = vb.array() - vb.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

GlobalPathReport global_alc_path(const GlobalPathOptions& o) {
  if (!(o.m_start >= 1 && o.m_start <= o.m_end && o.m_end <= o.n_train)) {
    throw InvalidArgument("global_alc_path: need 1 <= m_start <= m_end <= n_train");
  }
  const Domain domain = Domain::cube(2, -2.0, 2.0);
  const Matrix x = map_to_box(lhs(o.n_train, 2, mix_seed(o.seed, 1)), domain);
  const Matrix xt = map_to_box(lhs(o.n_test, 2, mix_seed(o.seed, 2)), domain);
  Vector y(x.rows()), yt(xt.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = herbies_tooth(x.row(i).transpose());
  for (Eigen::Index i = 0; i < xt.rows(); ++i) yt(i) = herbies_tooth(xt.row(i).transpose());

  GlobalPathReport rep;
  const double th0 = theta0_quantile(x);
  rep.theta = mle_theta_dense(x, y, th0, th0 / 100.0, th0 * 100.0, o.g).theta;
  const DenseGp full = fit_dense_gp(x, y, rep.theta, o.g);
  Vector pf(xt.rows());
  for (Eigen::Index i = 0; i < xt.rows(); ++i) pf(i) = predict(full, xt.row(i).transpose()).mean;
  rep.full_gp_rmse = rmse(pf, yt);

  KernelConfig cfg;
  cfg.theta = rep.theta;
  cfg.g = o.g;
  cfg.eps_k = o.eps_k;
  cfg.eps_q = o.eps_q;
  const Matrix x_bar0 = map_to_box(lhs(o.m_start, 2, mix_seed(o.seed, 3)), domain);
  Matrix pool = map_to_box(lhs(o.candidates, 2, mix_seed(o.seed, 4)), domain);
  // Transductive ALC: variance reduction is aggregated over the testing inputs.
  const Matrix& ref = xt;
  InducedState state = build_state(x, y, x_bar0, cfg);
  std::vector<char> used(static_cast<std::size_t>(pool.rows()), 0);
  auto record = [&]() {
    Vector p(xt.rows());
    for (Eigen::Index i = 0; i < xt.rows(); ++i) p(i) = predict(state, xt.row(i).transpose()).mean;
    rep.m_values.push_back(state.m());
    rep.rmse.push_back(rmse(p, yt));
  };
  record();
  while (state.m() < o.m_end) {
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index best_c = -1;
    for (Eigen::Index c = 0; c < pool.rows(); ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      const double v = alc_global(pool.row(c).transpose(), state, ref);
      if (v > best) {
        best = v;
        best_c = c;
      }
    }
    if (best_c < 0) break;
    used[static_cast<std::size_t>(best_c)] = 1;
    state = update_add_inducing(state, pool.row(best_c).transpose()).state;
    record();
  }
  std::vector<double> ms(rep.m_values.begin(), rep.m_values.end());
  rep.spearman = spearman(ms, rep.rmse);
  return rep;
}

void write_global_path(const GlobalPathReport& report, const std::string& path) {
  Matrix t(static_cast<Eigen::Index>(report.rmse.size()), 3);
  for (std::size_t i = 0; i < report.rmse.size(); ++i) {
    t.row(static_cast<Eigen::Index>(i)) << static_cast<double>(report.m_values[i]), report.rmse[i], report.full_gp_rmse;
  }
  write_csv(path, {"m", "rmse", "full_gp_rmse"}, t);
}

}  // namespace ligp
