#pragma once

// Post-processing of recorded trajectories: regime statistics, lifetimes,
// pooled distributions and their modes, price/demand correlation, the
// f-index lag correlation and the profit change of survivors after
// removals.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "findex.hpp"

namespace cspecon {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Time x goods (or time x agents) series.
using SeriesMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// First step included in statistics: the EMA transient and the initial
// projection shock are discarded.
inline std::int64_t warmup_steps(double omega) {
  return std::max<std::int64_t>(100, static_cast<std::int64_t>(std::ceil(5.0 / omega)));
}

// ---------------------------------------------------------------------------
// Basic statistics

struct Pearson {
  double r = 0.0;
  bool degenerate = false;  // one side had zero variance; r reported as 0
};

inline Pearson pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw AnalysisError("pearson: length mismatch");
  const auto n = x.size();
  if (n < 2) throw AnalysisError("pearson: need at least two samples");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return {0.0, true};
  return {sxy / std::sqrt(sxx * syy), false};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw AnalysisError("median of empty series");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

// Sample autocorrelation for lags 0..max_lag. A constant series yields all
// zeros.
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  const auto n = x.size();
  std::vector<double> acf(max_lag + 1, 0.0);
  if (n == 0) return acf;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  if (!(var > 0.0)) return acf;
  for (std::size_t k = 0; k <= max_lag && k < n; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) s += (x[t] - mean) * (x[t + k] - mean);
    acf[k] = s / var;
  }
  return acf;
}

// ---------------------------------------------------------------------------
// Histograms and mode counting

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  std::size_t bins() const { return counts.size(); }
  double width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  double left(std::size_t b) const { return lo + width() * static_cast<double>(b); }
  double right(std::size_t b) const { return b + 1 == bins() ? hi : left(b + 1); }
  double center(std::size_t b) const { return lo + width() * (static_cast<double>(b) + 0.5); }
  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
};

// Equal-width histogram over [min, max] of the samples; the maximum lands in
// the last bin so every sample is counted.
inline Histogram make_histogram(std::span<const double> samples, std::size_t bins) {
  if (bins == 0) throw AnalysisError("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  if (samples.empty()) return h;
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  h.lo = *mn;
  h.hi = *mx > *mn ? *mx : *mn + 1.0;
  const double w = h.width();
  for (double v : samples) {
    auto b = static_cast<std::size_t>((v - h.lo) / w);
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

struct ModeReport {
  int mode_count = 0;
  std::vector<double> modes;  // locations, ascending
};

struct BimodalityOptions {
  std::size_t min_samples = 10000;
  std::size_t grid = 512;
  // A local maximum is a mode when its prominence is at least this fraction
  // of the global peak height.
  double prominence = 0.2;
};

// Counts modes of a binned Gaussian kernel density estimate (Silverman
// bandwidth). Prominence of a peak is its height above the higher of the two
// valleys separating it from taller peaks on either side.
inline ModeReport count_modes(std::span<const double> samples, const BimodalityOptions& opt = {}) {
  const auto n = samples.size();
  if (n < opt.min_samples)
    throw AnalysisError("mode counting needs at least " + std::to_string(opt.min_samples) +
                        " samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n - 1));
  const double iqr = sorted[(3 * n) / 4] - sorted[n / 4];
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) return {1, {sorted.front()}};
  const double bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);

  const double lo = sorted.front() - 3.0 * bw;
  const double hi = sorted.back() + 3.0 * bw;
  const std::size_t g = opt.grid;
  const double dx = (hi - lo) / static_cast<double>(g - 1);
  std::vector<double> binned(g, 0.0);
  for (double v : sorted) {
    // Linear binning onto the grid.
    const double pos = (v - lo) / dx;
    const auto k = std::min(static_cast<std::size_t>(pos), g - 2);
    const double frac = pos - static_cast<double>(k);
    binned[k] += 1.0 - frac;
    binned[k + 1] += frac;
  }
  const auto reach = static_cast<std::ptrdiff_t>(std::ceil(4.0 * bw / dx));
  std::vector<double> kernel(static_cast<std::size_t>(2 * reach + 1));
  for (std::ptrdiff_t j = -reach; j <= reach; ++j) {
    const double u = static_cast<double>(j) * dx / bw;
    kernel[static_cast<std::size_t>(j + reach)] = std::exp(-0.5 * u * u);
  }
  std::vector<double> dens(g, 0.0);
  for (std::size_t k = 0; k < g; ++k) {
    if (binned[k] == 0.0) continue;
    const auto sk = static_cast<std::ptrdiff_t>(k);
    for (std::ptrdiff_t j = -reach; j <= reach; ++j) {
      const auto t = sk + j;
      if (t < 0 || t >= static_cast<std::ptrdiff_t>(g)) continue;
      dens[static_cast<std::size_t>(t)] += binned[k] * kernel[static_cast<std::size_t>(j + reach)];
    }
  }

  // Local maxima, plateaus collapsed to their first point.
  std::vector<std::size_t> peaks;
  for (std::size_t k = 0; k < g; ++k) {
    const double left = k == 0 ? -1.0 : dens[k - 1];
    std::size_t r = k;
    while (r + 1 < g && dens[r + 1] == dens[k]) ++r;
    const double right = r + 1 == g ? -1.0 : dens[r + 1];
    if (dens[k] > left && dens[k] > right) peaks.push_back(k);
    k = r;
  }
  const double top = *std::max_element(dens.begin(), dens.end());

  ModeReport rep;
  for (std::size_t pk : peaks) {
    const double height = dens[pk];
    double valley_left = height;
    bool taller_left = false;
    for (std::size_t k = pk; k-- > 0;) {
      valley_left = std::min(valley_left, dens[k]);
      if (dens[k] > height) {
        taller_left = true;
        break;
      }
    }
    double valley_right = height;
    bool taller_right = false;
    for (std::size_t k = pk + 1; k < g; ++k) {
      valley_right = std::min(valley_right, dens[k]);
      if (dens[k] > height) {
        taller_right = true;
        break;
      }
    }
    double base = 0.0;
    if (taller_left && taller_right)
      base = std::max(valley_left, valley_right);
    else if (taller_left)
      base = valley_left;
    else if (taller_right)
      base = valley_right;
    // Without a taller peak on either side this is the global maximum.
    const double prom = (taller_left || taller_right) ? height - base : height;
    if (prom >= opt.prominence * top) {
      ++rep.mode_count;
      rep.modes.push_back(lo + dx * static_cast<double>(pk));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lifetimes

struct LifetimeSummary {
  double mean = 0.0;
  std::size_t completed = 0;
  std::size_t censored = 0;  // agents still alive at the end
  Histogram histogram;
};

// Completed lifespans of agents that died at or after `window_start`.
inline LifetimeSummary lifetimes_summary(std::span<const std::int64_t> lifetimes,
                                         std::span<const std::int64_t> death_steps,
                                         std::int64_t window_start, std::size_t alive = 0,
                                         std::size_t bins = 50) {
  if (lifetimes.size() != death_steps.size())
    throw AnalysisError("lifetimes: length mismatch");
  std::vector<double> kept;
  for (std::size_t k = 0; k < lifetimes.size(); ++k)
    if (death_steps[k] >= window_start) kept.push_back(static_cast<double>(lifetimes[k]));
  if (kept.empty()) throw AnalysisError("lifetimes: no completed lifespan in the window");
  LifetimeSummary s;
  s.completed = kept.size();
  s.censored = alive;
  s.mean = std::accumulate(kept.begin(), kept.end(), 0.0) / static_cast<double>(kept.size());
  s.histogram = make_histogram(kept, bins);
  return s;
}

// ---------------------------------------------------------------------------
// Lagged correlation between price changes and the f-index

struct CorrelationCurve {
  std::vector<int> tau;
  std::vector<double> normalized;    // goods-averaged Pearson coefficient
  std::vector<double> unnormalized;  // goods-averaged <dp(t) f(t+tau)>
  bool degenerate = false;           // some good had zero variance
};

// dp and f are aligned time x goods matrices: row t of dp is p(t) - p(t-1)
// and row t of f is the f-index recorded at the same step.
inline CorrelationCurve lagged_correlation(const SeriesMatrix& dp, const SeriesMatrix& f,
                                           int tau_min, int tau_max) {
  if (dp.rows() != f.rows() || dp.cols() != f.cols())
    throw AnalysisError("lagged_correlation: series not aligned");
  if (tau_min > tau_max) throw AnalysisError("lagged_correlation: empty lag range");
  const auto t_len = static_cast<int>(dp.rows());
  const int span = std::max(std::abs(tau_min), std::abs(tau_max));
  if (t_len - span < 3) throw AnalysisError("lagged_correlation: series too short for lag range");

  CorrelationCurve c;
  std::vector<double> x, y;
  for (int tau = tau_min; tau <= tau_max; ++tau) {
    const int t0 = std::max(0, -tau);
    const int t1 = std::min(t_len, t_len - tau);
    double norm_sum = 0.0;
    double raw_sum = 0.0;
    for (Eigen::Index i = 0; i < dp.cols(); ++i) {
      x.clear();
      y.clear();
      double raw = 0.0;
      for (int t = t0; t < t1; ++t) {
        x.push_back(dp(t, i));
        y.push_back(f(t + tau, i));
        raw += dp(t, i) * f(t + tau, i);
      }
      const Pearson p = pearson(x, y);
      c.degenerate = c.degenerate || p.degenerate;
      norm_sum += p.r;
      raw_sum += raw / static_cast<double>(t1 - t0);
    }
    c.tau.push_back(tau);
    c.normalized.push_back(norm_sum / static_cast<double>(dp.cols()));
    c.unnormalized.push_back(raw_sum / static_cast<double>(dp.cols()));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Price / demand correlation

struct PriceDemandCorrelation {
  double pooled = 0.0;
  std::vector<double> per_good;
  bool degenerate = false;
};

// Pearson correlation between p_i(t) and |D_i(t)|, pooled over all (i, t)
// and per good.
inline PriceDemandCorrelation price_demand_correlation(const SeriesMatrix& prices,
                                                       const SeriesMatrix& demand) {
  if (prices.rows() != demand.rows() || prices.cols() != demand.cols())
    throw AnalysisError("price_demand_correlation: series not aligned");
  PriceDemandCorrelation out;
  const Eigen::Index t_len = prices.rows();
  std::vector<double> p(prices.data(), prices.data() + prices.size());
  std::vector<double> d(static_cast<std::size_t>(demand.size()));
  for (Eigen::Index k = 0; k < demand.size(); ++k)
    d[static_cast<std::size_t>(k)] = std::abs(demand.data()[k]);
  const Pearson pooled = pearson(p, d);
  out.pooled = pooled.r;
  out.degenerate = pooled.degenerate;
  std::vector<double> x(static_cast<std::size_t>(t_len)), y(static_cast<std::size_t>(t_len));
  for (Eigen::Index i = 0; i < prices.cols(); ++i) {
    for (Eigen::Index t = 0; t < t_len; ++t) {
      x[static_cast<std::size_t>(t)] = prices(t, i);
      y[static_cast<std::size_t>(t)] = std::abs(demand(t, i));
    }
    const Pearson r = pearson(x, y);
    out.degenerate = out.degenerate || r.degenerate;
    out.per_good.push_back(r.r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profit change of survivors after removals

struct RemovalImpactPoint {
  std::int64_t row = 0;  // row index into the series
  double z_ema = 0.0;
  double mean_change = 0.0;  // mean over survivors of pi_ema(t+tau) - pi_ema(t)
};

struct RemovalImpactBin {
  double z_lo = 0.0;
  double z_hi = 0.0;
  std::size_t count = 0;
  double mean_change = 0.0;
};

struct RemovalImpact {
  std::vector<RemovalImpactPoint> points;
  std::vector<RemovalImpactBin> bins;  // occupied bins only
};

// pi_ema: time x agents, post-removal values of each step. removed[t] lists
// the agents replaced at row t. Survivors are agents replaced neither at t
// nor during (t, t+tau].
inline RemovalImpact removal_impact(const SeriesMatrix& pi_ema,
                                    const std::vector<std::vector<int>>& removed, int tau,
                                    std::size_t n_bins = 20) {
  if (tau < 1) throw AnalysisError("removal_impact: tau must be >= 1");
  if (static_cast<std::size_t>(pi_ema.rows()) != removed.size())
    throw AnalysisError("removal_impact: series not aligned");
  const auto m = pi_ema.cols();
  RemovalImpact out;
  std::vector<char> excluded(static_cast<std::size_t>(m));
  for (Eigen::Index t = 0; t + tau < pi_ema.rows(); ++t) {
    const auto& gone = removed[static_cast<std::size_t>(t)];
    if (gone.empty()) continue;
    std::fill(excluded.begin(), excluded.end(), 0);
    for (Eigen::Index s = t; s <= t + tau; ++s)
      for (int mu : removed[static_cast<std::size_t>(s)]) excluded[static_cast<std::size_t>(mu)] = 1;
    double sum = 0.0;
    std::size_t cnt = 0;
    for (Eigen::Index mu = 0; mu < m; ++mu) {
      if (excluded[static_cast<std::size_t>(mu)]) continue;
      sum += pi_ema(t + tau, mu) - pi_ema(t, mu);
      ++cnt;
    }
    if (cnt == 0) continue;
    out.points.push_back({t, static_cast<double>(gone.size()) / static_cast<double>(m),
                          sum / static_cast<double>(cnt)});
  }
  if (out.points.empty() || n_bins == 0) return out;

  double z_max = 0.0;
  for (const auto& pt : out.points) z_max = std::max(z_max, pt.z_ema);
  const double width = z_max / static_cast<double>(n_bins);
  std::vector<RemovalImpactBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].z_lo = width * static_cast<double>(b);
    bins[b].z_hi = width * static_cast<double>(b + 1);
  }
  for (const auto& pt : out.points) {
    auto b = static_cast<std::size_t>(pt.z_ema / width);
    b = std::min(b, n_bins - 1);
    bins[b].count++;
    bins[b].mean_change += pt.mean_change;
  }
  for (auto& b : bins) {
    if (b.count == 0) continue;
    b.mean_change /= static_cast<double>(b.count);
    out.bins.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regimes

enum class Regime { kEndogenousCrises, kStable, kUnstable };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::kEndogenousCrises: return "EC";
    case Regime::kStable: return "S";
    case Regime::kUnstable: return "U";
  }
  return "?";
}

inline std::optional<Regime> regime_from_string(const std::string& s) {
  if (s == "EC") return Regime::kEndogenousCrises;
  if (s == "S") return Regime::kStable;
  if (s == "U") return Regime::kUnstable;
  return std::nullopt;
}

struct RegimeThresholds {
  std::size_t min_length = 1000;
  double unstable_mean = 0.15;
  double acf_peak = 0.3;
  std::size_t min_period = 10;
  double spike_ratio = 3.0;
};

// Dominant period of z_ema from its autocorrelation: the first local maximum
// at lag >= min_period reaching acf_peak, else the tallest local maximum at
// such lags. Empty when the series has no local maximum there.
struct PeriodEstimate {
  std::size_t lag = 0;
  double acf = 0.0;
};

inline std::optional<PeriodEstimate> spike_period(std::span<const double> z_ema,
                                                  const RegimeThresholds& th = {}) {
  const std::size_t max_lag = z_ema.size() / 2;
  if (max_lag <= th.min_period + 1) return std::nullopt;
  const auto acf = autocorrelation(z_ema, max_lag);
  std::optional<PeriodEstimate> best;
  for (std::size_t k = th.min_period; k + 1 <= max_lag; ++k) {
    if (!(acf[k] > acf[k - 1] && acf[k] >= acf[k + 1])) continue;
    if (acf[k] >= th.acf_peak) return PeriodEstimate{k, acf[k]};
    if (!best || acf[k] > best->acf) best = PeriodEstimate{k, acf[k]};
  }
  return best;
}

inline Regime classify_regime(std::span<const double> z_ema, const RegimeThresholds& th = {}) {
  if (z_ema.size() < th.min_length)
    throw AnalysisError("classify_regime: need at least " + std::to_string(th.min_length) +
                        " post warm-up steps");
  const double mean =
      std::accumulate(z_ema.begin(), z_ema.end(), 0.0) / static_cast<double>(z_ema.size());
  if (mean > th.unstable_mean) return Regime::kUnstable;
  const auto period = spike_period(z_ema, th);
  const double peak = *std::max_element(z_ema.begin(), z_ema.end());
  const double med = median(std::vector<double>(z_ema.begin(), z_ema.end()));
  if (period && period->acf >= th.acf_peak && peak >= th.spike_ratio * med)
    return Regime::kEndogenousCrises;
  return Regime::kStable;
}

// Spike heights and baseline of a periodic z_ema series: the series is cut
// into windows of one period; the spike level is the median of the window
// maxima and the baseline is the median of all values.
struct SpikeStats {
  double peak_level = 0.0;
  double baseline = 0.0;
  std::size_t windows = 0;
};

inline SpikeStats spike_stats(std::span<const double> z_ema, std::size_t period) {
  if (period == 0 || z_ema.size() < period) throw AnalysisError("spike_stats: series too short");
  std::vector<double> maxima;
  for (std::size_t start = 0; start + period <= z_ema.size(); start += period)
    maxima.push_back(*std::max_element(z_ema.begin() + static_cast<std::ptrdiff_t>(start),
                                       z_ema.begin() + static_cast<std::ptrdiff_t>(start + period)));
  return {median(maxima), median(std::vector<double>(z_ema.begin(), z_ema.end())), maxima.size()};
}

}  // namespace cspecon
