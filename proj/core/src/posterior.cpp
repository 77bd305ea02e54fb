#include "l96cal/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace l96cal {

double Histogram::mode() const {
  if (mass.empty()) throw std::logic_error("Histogram::mode: empty histogram");
  const auto i = static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
  return 0.5 * (edges[i] + edges[i + 1]);
}

Histogram histogram(std::span<const double> samples, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  if (samples.empty()) throw std::invalid_argument("histogram: no samples");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn;
  const double hi = *mx;
  Histogram h;
  if (lo == hi) {
    h.edges = {lo, hi};
    h.mass = {1.0};
    return h;
  }
  const auto nb = static_cast<std::size_t>(bins);
  h.edges.resize(nb + 1);
  const double width = (hi - lo) / static_cast<double>(nb);
  for (std::size_t i = 0; i <= nb; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges.back() = hi;
  std::vector<std::size_t> counts(nb, 0);
  for (double x : samples) {
    auto i = static_cast<std::size_t>((x - lo) / width);
    counts[std::min(i, nb - 1)] += 1;
  }
  h.mass.resize(nb);
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < nb; ++i) h.mass[i] = static_cast<double>(counts[i]) / n;
  return h;
}

std::vector<double> column(std::span<const Params> samples, ParamId id) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& p : samples) out.push_back(p[id]);
  return out;
}

std::vector<Histogram> estimate_posterior_pdf(std::span<const Params> samples,
                                              std::span<const ParamId> ids, int bins) {
  if (samples.empty()) throw std::invalid_argument("estimate_posterior_pdf: empty sample set");
  std::vector<Histogram> out;
  for (ParamId id : ids) out.push_back(histogram(column(samples, id), bins));
  return out;
}

double quantile(std::vector<double> samples, double q) {
  if (samples.empty()) throw std::invalid_argument("quantile: no samples");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::sort(samples.begin(), samples.end());
  const double pos = q * static_cast<double>(samples.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, samples.size() - 1);
  const double frac = pos - static_cast<double>(i);
  return samples[i] + frac * (samples[j] - samples[i]);
}

MarginalSummary summarize_marginal(std::span<const double> samples, int bins) {
  if (samples.empty()) throw std::invalid_argument("summarize_marginal: no samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> v(samples.begin(), samples.end());
  return MarginalSummary{mean, sd, quantile(v, 0.05), quantile(v, 0.95),
                         histogram(samples, bins).mode()};
}

double error_norm(const Params& estimate, const Params& truth) {
  double s = 0.0;
  for (ParamId id : kAllParams) {
    const double d = estimate[id] - truth[id];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace l96cal
