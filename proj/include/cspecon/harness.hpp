#pragma once

// Single runs, sweeps and offline analysis, with their on-disk artifacts.
//
// A run directory holds
//   config.echo      fully resolved configuration (key = value)
//   timeseries.csv   step,z,z_ema,removals,W,w,H,solver_iters
//   lifetimes.csv    death_step,lifetime
//   goods.csv        step,good,price,supply,demand,f_sellers,f_buyers (optional)
//   summary          run summary (JSON)
// and `analyze` adds hist_demand.csv, hist_price.csv, fcorr.csv,
// fcorr_raw.csv and summary.json. Every CSV starts with `# csp-econ v1`.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "analytics.hpp"
#include "config.hpp"
#include "dynamics.hpp"

namespace cspecon {

namespace fs = std::filesystem;

inline constexpr const char* kSchemaLine = "# csp-econ v1";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// In-memory series of a run

struct StepScalars {
  std::int64_t step = 0;
  double z = 0.0;
  double z_ema = 0.0;
  std::int64_t removals = 0;
  double total_cost = 0.0;
  double wage = 0.0;
  double hamiltonian = 0.0;
  int solver_iters = 0;
  bool solver_converged = true;
};

// Per-step, per-good observables (time x goods).
struct GoodsSeries {
  std::vector<std::int64_t> steps;
  SeriesMatrix price, supply, demand, f_sellers, f_buyers;

  std::size_t rows() const { return steps.size(); }
};

struct RunSeries {
  std::vector<StepScalars> scalars;
  std::optional<GoodsSeries> goods;
  std::vector<std::int64_t> lifetimes;
  std::vector<std::int64_t> death_steps;
  std::size_t alive = 0;
};

struct RunSummary {
  std::int64_t steps = 0;
  std::int64_t window_start = 0;
  std::size_t window_samples = 0;
  double mean_z = std::numeric_limits<double>::quiet_NaN();
  double max_z = std::numeric_limits<double>::quiet_NaN();
  double min_z = std::numeric_limits<double>::quiet_NaN();
  double mean_zema = std::numeric_limits<double>::quiet_NaN();
  double max_zema = std::numeric_limits<double>::quiet_NaN();
  double min_zema = std::numeric_limits<double>::quiet_NaN();
  std::optional<LifetimeSummary> lifetimes;
  std::optional<Regime> regime;
  std::optional<PeriodEstimate> spike_period;
  std::optional<SpikeStats> spikes;
  std::size_t solver_nonconverged = 0;
  // Only with per-good series.
  std::optional<ModeReport> demand_modes;
  std::optional<ModeReport> price_modes;
  std::optional<double> price_demand_corr;
};

// ---------------------------------------------------------------------------
// Summaries

namespace detail {

inline std::vector<double> window_column(const std::vector<StepScalars>& s, std::int64_t start,
                                         double StepScalars::*field) {
  std::vector<double> out;
  for (const auto& r : s)
    if (r.step >= start) out.push_back(r.*field);
  return out;
}

// Rows of the goods series inside the window.
inline std::pair<std::size_t, std::size_t> window_rows(const GoodsSeries& g, std::int64_t start) {
  std::size_t first = 0;
  while (first < g.rows() && g.steps[first] < start) ++first;
  return {first, g.rows()};
}

inline SeriesMatrix slice_rows(const SeriesMatrix& m, std::size_t first, std::size_t last) {
  return m.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first));
}

}  // namespace detail

inline RunSummary summarize(const RunSeries& series, const RunConfig& cfg) {
  RunSummary s;
  s.steps = static_cast<std::int64_t>(series.scalars.size());
  s.window_start = cfg.window_start();
  for (const auto& r : series.scalars) s.solver_nonconverged += r.solver_converged ? 0 : 1;

  const auto z = detail::window_column(series.scalars, s.window_start, &StepScalars::z);
  const auto ze = detail::window_column(series.scalars, s.window_start, &StepScalars::z_ema);
  s.window_samples = ze.size();
  if (!ze.empty()) {
    const auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    s.mean_z = mean(z);
    s.max_z = *std::max_element(z.begin(), z.end());
    s.min_z = *std::min_element(z.begin(), z.end());
    s.mean_zema = mean(ze);
    s.max_zema = *std::max_element(ze.begin(), ze.end());
    s.min_zema = *std::min_element(ze.begin(), ze.end());
  }
  try {
    s.lifetimes = lifetimes_summary(series.lifetimes, series.death_steps, s.window_start,
                                    series.alive);
  } catch (const AnalysisError&) {
  }
  if (ze.size() >= cfg.thresholds.min_length) {
    s.regime = classify_regime(ze, cfg.thresholds);
    s.spike_period = spike_period(ze, cfg.thresholds);
    if (s.spike_period) s.spikes = spike_stats(ze, s.spike_period->lag);
  }

  if (series.goods) {
    const auto& g = *series.goods;
    const auto [first, last] = detail::window_rows(g, s.window_start);
    if (last > first) {
      const SeriesMatrix price = detail::slice_rows(g.price, first, last);
      const SeriesMatrix demand = detail::slice_rows(g.demand, first, last);
      std::vector<double> p(price.data(), price.data() + price.size());
      std::vector<double> d(static_cast<std::size_t>(demand.size()));
      for (Eigen::Index k = 0; k < demand.size(); ++k)
        d[static_cast<std::size_t>(k)] = std::abs(demand.data()[k]);
      try {
        s.demand_modes = count_modes(d);
        s.price_modes = count_modes(p);
      } catch (const AnalysisError&) {
      }
      if (last - first >= 2) s.price_demand_corr = price_demand_correlation(price, demand).pooled;
    }
  }
  return s;
}

// Price changes and f-index rows aligned on the same steps: row k holds
// p(t) - p(t-1) and f(t) for the k-th window step t that has a predecessor.
struct AlignedFSeries {
  SeriesMatrix dp, f_sellers, f_buyers;
};

inline AlignedFSeries align_f_series(const GoodsSeries& g, std::int64_t window_start) {
  std::vector<std::size_t> rows;
  for (std::size_t k = 1; k < g.rows(); ++k)
    if (g.steps[k] >= window_start && g.steps[k - 1] == g.steps[k] - 1) rows.push_back(k);
  const auto n = g.price.cols();
  const auto t = static_cast<Eigen::Index>(rows.size());
  AlignedFSeries a{SeriesMatrix(t, n), SeriesMatrix(t, n), SeriesMatrix(t, n)};
  for (Eigen::Index r = 0; r < t; ++r) {
    const auto k = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    a.dp.row(r) = g.price.row(k) - g.price.row(k - 1);
    a.f_sellers.row(r) = g.f_sellers.row(k);
    a.f_buyers.row(r) = g.f_buyers.row(k);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Text output

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

inline std::string json_number(double v) {
  return std::isfinite(v) ? format_double(v) : std::string("null");
}

inline void write_modes(std::ostream& o, const char* key, const std::optional<ModeReport>& m) {
  o << "  \"" << key << "\": ";
  if (!m) {
    o << "\"unavailable\"";
    return;
  }
  o << "{\"count\": " << m->mode_count << ", \"locations\": [";
  for (std::size_t k = 0; k < m->modes.size(); ++k)
    o << (k ? ", " : "") << json_number(m->modes[k]);
  o << "]}";
}

}  // namespace detail

inline std::string summary_json(const RunSummary& s) {
  using detail::json_number;
  std::ostringstream o;
  o << "{\n";
  o << "  \"schema\": \"csp-econ v1\",\n";
  o << "  \"steps\": " << s.steps << ",\n";
  o << "  \"window_start\": " << s.window_start << ",\n";
  o << "  \"window_samples\": " << s.window_samples << ",\n";
  o << "  \"mean_z\": " << json_number(s.mean_z) << ",\n";
  o << "  \"max_z\": " << json_number(s.max_z) << ",\n";
  o << "  \"min_z\": " << json_number(s.min_z) << ",\n";
  o << "  \"mean_zema\": " << json_number(s.mean_zema) << ",\n";
  o << "  \"max_zema\": " << json_number(s.max_zema) << ",\n";
  o << "  \"min_zema\": " << json_number(s.min_zema) << ",\n";
  if (s.lifetimes) {
    o << "  \"mean_lifetime\": " << json_number(s.lifetimes->mean) << ",\n";
    o << "  \"completed_lifetimes\": " << s.lifetimes->completed << ",\n";
    o << "  \"censored_lifetimes\": " << s.lifetimes->censored << ",\n";
  } else {
    o << "  \"mean_lifetime\": null,\n";
  }
  o << "  \"regime\": " << (s.regime ? "\"" + to_string(*s.regime) + "\"" : "null") << ",\n";
  if (s.spike_period) {
    o << "  \"spike_period\": " << s.spike_period->lag << ",\n";
    o << "  \"spike_period_acf\": " << json_number(s.spike_period->acf) << ",\n";
  } else {
    o << "  \"spike_period\": null,\n";
  }
  if (s.spikes) {
    o << "  \"spike_peak_level\": " << json_number(s.spikes->peak_level) << ",\n";
    o << "  \"spike_baseline\": " << json_number(s.spikes->baseline) << ",\n";
  }
  o << "  \"solver_nonconverged\": " << s.solver_nonconverged << ",\n";
  o << "  \"price_demand_corr\": "
    << (s.price_demand_corr ? json_number(*s.price_demand_corr) : std::string("\"unavailable\""))
    << ",\n";
  detail::write_modes(o, "demand_modes", s.demand_modes);
  o << ",\n";
  detail::write_modes(o, "price_modes", s.price_modes);
  o << "\n}\n";
  return o.str();
}

// Writes `content` to `path` through a temporary file and a rename.
inline void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::string timeseries_csv(const std::vector<StepScalars>& rows) {
  using detail::fmt;
  std::ostringstream o;
  o << kSchemaLine << "\nstep,z,z_ema,removals,W,w,H,solver_iters\n";
  for (const auto& r : rows)
    o << r.step << ',' << fmt(r.z) << ',' << fmt(r.z_ema) << ',' << r.removals << ','
      << fmt(r.total_cost) << ',' << fmt(r.wage) << ',' << fmt(r.hamiltonian) << ','
      << r.solver_iters << '\n';
  return o.str();
}

inline std::string goods_csv(const GoodsSeries& g) {
  using detail::fmt;
  std::ostringstream o;
  o << kSchemaLine << "\nstep,good,price,supply,demand,f_sellers,f_buyers\n";
  for (std::size_t k = 0; k < g.rows(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    for (Eigen::Index i = 0; i < g.price.cols(); ++i)
      o << g.steps[k] << ',' << i << ',' << fmt(g.price(r, i)) << ',' << fmt(g.supply(r, i)) << ','
        << fmt(g.demand(r, i)) << ',' << fmt(g.f_sellers(r, i)) << ',' << fmt(g.f_buyers(r, i))
        << '\n';
  }
  return o.str();
}

inline std::string lifetimes_csv(const RunSeries& s) {
  std::ostringstream o;
  o << kSchemaLine << "\ndeath_step,lifetime\n";
  for (std::size_t k = 0; k < s.lifetimes.size(); ++k)
    o << s.death_steps[k] << ',' << s.lifetimes[k] << '\n';
  return o.str();
}

inline std::string histogram_csv(const std::optional<Histogram>& h) {
  std::ostringstream o;
  o << kSchemaLine << "\n";
  if (!h) o << "# unavailable: run was not recorded with emit_full_series\n";
  o << "bin_left,bin_right,count\n";
  if (h)
    for (std::size_t b = 0; b < h->bins(); ++b)
      o << format_double(h->left(b)) << ',' << format_double(h->right(b)) << ',' << h->counts[b]
        << '\n';
  return o.str();
}

inline std::string correlation_csv(const std::optional<CorrelationCurve>& buyers,
                                   const std::optional<CorrelationCurve>& sellers, bool normalized,
                                   const std::string& note = {}) {
  std::ostringstream o;
  o << kSchemaLine << "\n";
  if (!note.empty()) o << "# unavailable: " << note << "\n";
  o << "tau,buyers,sellers\n";
  if (buyers && sellers)
    for (std::size_t k = 0; k < buyers->tau.size(); ++k)
      o << buyers->tau[k] << ','
        << detail::fmt(normalized ? buyers->normalized[k] : buyers->unnormalized[k]) << ','
        << detail::fmt(normalized ? sellers->normalized[k] : sellers->unnormalized[k]) << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------
// Running

// Called after every step with the full record; may be empty.
using StepObserver = std::function<void(const StepRecord&, const Simulation&)>;

inline RunSeries simulate(const RunConfig& cfg, const StepObserver& observer = {},
                          bool record_pi_ema = false) {
  cfg.validate();
  DynamicsOptions opts;
  opts.update_before_trade = cfg.update_before_trade;
  opts.record_pi_ema = record_pi_ema;
  Simulation sim(cfg.model, cfg.solver, opts);

  RunSeries out;
  const auto steps = cfg.model.n_steps;
  const auto n = cfg.model.n_goods;
  out.scalars.reserve(static_cast<std::size_t>(steps));
  if (cfg.emit_full_series) {
    GoodsSeries g;
    g.price.resize(steps, n);
    g.supply.resize(steps, n);
    g.demand.resize(steps, n);
    g.f_sellers.resize(steps, n);
    g.f_buyers.resize(steps, n);
    out.goods = std::move(g);
  }
  for (std::int64_t k = 0; k < steps; ++k) {
    const StepRecord rec = sim.step();
    out.scalars.push_back({rec.step, rec.z, rec.z_ema,
                           static_cast<std::int64_t>(rec.removed.size()), rec.total_cost,
                           rec.wage, rec.hamiltonian, rec.solver.iterations,
                           rec.solver.converged});
    if (out.goods) {
      auto& g = *out.goods;
      g.steps.push_back(rec.step);
      g.price.row(k) = rec.p.transpose();
      g.supply.row(k) = rec.supply.transpose();
      g.demand.row(k) = rec.demand.transpose();
      g.f_sellers.row(k) = rec.f.sellers.transpose();
      g.f_buyers.row(k) = rec.f.buyers.transpose();
    }
    if (observer) observer(rec, sim);
  }
  const auto& ledger = sim.economy().ledger;
  out.lifetimes = ledger.lifetimes;
  out.death_steps = ledger.death_step;
  out.alive = static_cast<std::size_t>(cfg.model.n_agents);
  return out;
}

inline void prepare_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  // Probe writability before spending time on the simulation.
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

// Executes a run and writes its artifacts to cfg.out_dir.
inline RunSummary run(const RunConfig& cfg, const StepObserver& observer = {}) {
  cfg.validate();
  const fs::path dir = cfg.out_dir;
  prepare_directory(dir);
  write_atomic(dir / "config.echo", echo_config(cfg));

  const RunSeries series = simulate(cfg, observer);
  write_atomic(dir / "timeseries.csv", timeseries_csv(series.scalars));
  write_atomic(dir / "lifetimes.csv", lifetimes_csv(series));
  if (cfg.emit_full_series) write_atomic(dir / "goods.csv", goods_csv(*series.goods));
  const RunSummary summary = summarize(series, cfg);
  if (cfg.model.n_steps > 0) write_atomic(dir / "summary", summary_json(summary));
  return summary;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  double value = 0.0;
  int replicate = 0;
  std::optional<RunSummary> summary;
  std::string error;
};

inline std::string sweep_csv(const SweepConfig& sw, const std::vector<SweepRow>& rows) {
  using detail::fmt;
  std::ostringstream o;
  o << kSchemaLine << "\n"
    << sw.variable << ",replicate,mean_z,mean_zema,max_zema,min_zema,mean_lifetime,regime\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    o << fmt(r.value) << ',' << r.replicate << ',';
    if (!r.summary) {
      o << "nan,nan,nan,nan,nan,ERROR\n";
      continue;
    }
    const auto& s = *r.summary;
    o << fmt(s.mean_z) << ',' << fmt(s.mean_zema) << ',' << fmt(s.max_zema) << ','
      << fmt(s.min_zema) << ',' << fmt(s.lifetimes ? s.lifetimes->mean : nan) << ','
      << (s.regime ? to_string(*s.regime) : std::string("NA")) << '\n';
  }
  return o.str();
}

inline int threads_from_env(int fallback = 1) {
  if (const char* v = std::getenv("CSPECON_THREADS")) {
    try {
      const int k = std::stoi(v);
      if (k >= 1) return k;
    } catch (const std::exception&) {
    }
  }
  return fallback;
}

// Runs every (value, replicate) cell on `threads` workers. Each cell writes a
// full run directory under <out>/cells/; rows of sweep.csv are in grid order
// whatever the completion order. The observer, if any, is called from the
// worker threads.
inline std::vector<SweepRow> sweep(const SweepConfig& sw, int threads = 1,
                                   const StepObserver& observer = {}) {
  sw.validate();
  const fs::path dir = sw.base.out_dir;
  prepare_directory(dir);

  const auto n_cells = sw.values.size() * static_cast<std::size_t>(sw.replicates);
  std::vector<SweepRow> rows(n_cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t cell = next++; cell < n_cells; cell = next++) {
      const std::size_t vi = cell / static_cast<std::size_t>(sw.replicates);
      const int rep = static_cast<int>(cell % static_cast<std::size_t>(sw.replicates));
      SweepRow& row = rows[cell];
      row.value = sw.values[vi];
      row.replicate = rep;
      try {
        RunConfig c = sweep_cell_config(sw, vi, rep);
        c.out_dir = (dir / "cells" / (sw.variable + "_" + std::to_string(vi) + "_r" +
                                      std::to_string(rep)))
                        .string();
        row.summary = run(c, observer);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const int k = std::max(1, std::min<int>(threads, static_cast<int>(n_cells)));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  write_atomic(dir / "sweep.csv", sweep_csv(sw, rows));
  std::ostringstream errors;
  for (const auto& r : rows)
    if (!r.error.empty())
      errors << format_double(r.value) << ',' << r.replicate << ": " << r.error << '\n';
  if (!errors.str().empty()) write_atomic(dir / "sweep_errors.log", errors.str());
  return rows;
}

// ---------------------------------------------------------------------------
// Reading run directories back

namespace detail {

// Reads a csp-econ CSV: checks the schema line and header, skips further
// comment lines and returns the data rows split on commas.
inline std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                                      const std::string& header) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSchemaLine)
    throw IoError("bad schema line in " + path.string());
  bool seen_header = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != header) throw IoError("unexpected header in " + path.string());
      seen_header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (!seen_header) throw IoError("missing header in " + path.string());
  return rows;
}

inline double cell_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("corrupt number '" + s + "' in " + path.string());
  }
}

inline std::int64_t cell_int(const std::string& s, const fs::path& path) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw IoError("corrupt integer '" + s + "' in " + path.string());
  return v;
}

inline void expect_width(const std::vector<std::string>& row, std::size_t n, const fs::path& p) {
  if (row.size() != n) throw IoError("wrong column count in " + p.string());
}

}  // namespace detail

struct LoadedRun {
  RunConfig config;
  RunSeries series;
};

inline LoadedRun load_run(const fs::path& dir) {
  using namespace detail;
  LoadedRun lr;
  {
    std::ifstream in(dir / "config.echo");
    if (!in) throw IoError("missing file: " + (dir / "config.echo").string());
    try {
      lr.config = parse_run_config(in);
    } catch (const std::exception& e) {
      throw IoError(std::string("corrupt config.echo: ") + e.what());
    }
  }
  const fs::path ts = dir / "timeseries.csv";
  for (const auto& r : read_csv(ts, "step,z,z_ema,removals,W,w,H,solver_iters")) {
    expect_width(r, 8, ts);
    StepScalars s;
    s.step = cell_int(r[0], ts);
    s.z = cell_double(r[1], ts);
    s.z_ema = cell_double(r[2], ts);
    s.removals = cell_int(r[3], ts);
    s.total_cost = cell_double(r[4], ts);
    s.wage = cell_double(r[5], ts);
    s.hamiltonian = cell_double(r[6], ts);
    s.solver_iters = static_cast<int>(cell_int(r[7], ts));
    lr.series.scalars.push_back(s);
  }
  const fs::path lt = dir / "lifetimes.csv";
  if (fs::exists(lt)) {
    for (const auto& r : read_csv(lt, "death_step,lifetime")) {
      expect_width(r, 2, lt);
      lr.series.death_steps.push_back(cell_int(r[0], lt));
      lr.series.lifetimes.push_back(cell_int(r[1], lt));
    }
  }
  lr.series.alive = static_cast<std::size_t>(lr.config.model.n_agents);

  const fs::path gp = dir / "goods.csv";
  if (fs::exists(gp)) {
    const auto rows = read_csv(gp, "step,good,price,supply,demand,f_sellers,f_buyers");
    const auto n = static_cast<std::size_t>(lr.config.model.n_goods);
    if (rows.size() % n != 0) throw IoError("goods.csv row count is not a multiple of n_goods");
    const auto t = static_cast<Eigen::Index>(rows.size() / n);
    GoodsSeries g;
    for (auto* m : {&g.price, &g.supply, &g.demand, &g.f_sellers, &g.f_buyers})
      m->resize(t, static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& r = rows[k];
      expect_width(r, 7, gp);
      const auto row = static_cast<Eigen::Index>(k / n);
      const auto good = cell_int(r[1], gp);
      if (good != static_cast<std::int64_t>(k % n)) throw IoError("goods.csv rows out of order");
      if (k % n == 0) g.steps.push_back(cell_int(r[0], gp));
      g.price(row, good) = cell_double(r[2], gp);
      g.supply(row, good) = cell_double(r[3], gp);
      g.demand(row, good) = cell_double(r[4], gp);
      g.f_sellers(row, good) = cell_double(r[5], gp);
      g.f_buyers(row, good) = cell_double(r[6], gp);
    }
    lr.series.goods = std::move(g);
  }
  return lr;
}

struct Analysis {
  RunSummary summary;
  std::optional<Histogram> demand_hist;
  std::optional<Histogram> price_hist;
  std::optional<CorrelationCurve> fcorr_buyers;
  std::optional<CorrelationCurve> fcorr_sellers;
  std::string fcorr_note;
};

inline Analysis analyze_series(const RunSeries& series, const RunConfig& cfg,
                               std::size_t bins = 100) {
  Analysis a;
  a.summary = summarize(series, cfg);
  if (!series.goods) {
    a.fcorr_note = "run was not recorded with emit_full_series";
    return a;
  }
  const auto& g = *series.goods;
  const auto [first, last] = detail::window_rows(g, cfg.window_start());
  if (last > first) {
    const SeriesMatrix price = detail::slice_rows(g.price, first, last);
    const SeriesMatrix demand = detail::slice_rows(g.demand, first, last);
    std::vector<double> p(price.data(), price.data() + price.size());
    std::vector<double> d(static_cast<std::size_t>(demand.size()));
    for (Eigen::Index k = 0; k < demand.size(); ++k)
      d[static_cast<std::size_t>(k)] = std::abs(demand.data()[k]);
    a.price_hist = make_histogram(p, bins);
    a.demand_hist = make_histogram(d, bins);
  }
  const AlignedFSeries f = align_f_series(g, cfg.window_start());
  try {
    a.fcorr_buyers = lagged_correlation(f.dp, f.f_buyers, cfg.tau_min, cfg.tau_max);
    a.fcorr_sellers = lagged_correlation(f.dp, f.f_sellers, cfg.tau_min, cfg.tau_max);
  } catch (const AnalysisError& e) {
    a.fcorr_buyers.reset();
    a.fcorr_sellers.reset();
    a.fcorr_note = e.what();
  }
  return a;
}

// Reads a run directory and writes the plot-ready files next to it. Never
// touches the run's own artifacts.
inline Analysis analyze(const fs::path& dir) {
  const LoadedRun lr = load_run(dir);
  Analysis a = analyze_series(lr.series, lr.config);
  write_atomic(dir / "hist_demand.csv", histogram_csv(a.demand_hist));
  write_atomic(dir / "hist_price.csv", histogram_csv(a.price_hist));
  write_atomic(dir / "fcorr.csv", correlation_csv(a.fcorr_buyers, a.fcorr_sellers, true, a.fcorr_note));
  write_atomic(dir / "fcorr_raw.csv",
               correlation_csv(a.fcorr_buyers, a.fcorr_sellers, false, a.fcorr_note));
  write_atomic(dir / "summary.json", summary_json(a.summary));
  return a;
}

}  // namespace cspecon
