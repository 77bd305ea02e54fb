#pragma once

/// Independent per-parameter priors and the constrained <-> unconstrained
/// coordinate map used by the samplers.
///
/// Normal and flat priors use the identity map; log-normal priors are walked
/// in log space, with log|d theta / d u| = u added to unconstrained densities.

#include <span>
#include <vector>

#include "l96cal/dynamics.hpp"
#include "l96cal/random.hpp"

namespace l96cal {

enum class PriorKind { normal, lognormal, flat };

struct PriorSpec {
  PriorKind kind = PriorKind::normal;
  double mu = 0.0;   ///< mean (normal) or mean of log (lognormal)
  double var = 1.0;  ///< variance (normal) or variance of log (lognormal)

  static PriorSpec normal(double mean, double variance);
  static PriorSpec lognormal(double log_mean, double log_variance);
  /// Improper uniform density; contributes zero to log densities.
  static PriorSpec flat();

  /// Throws std::invalid_argument when var <= 0 for a proper prior.
  void validate() const;

  double log_pdf(double x) const;
  double cdf(double x) const;
  double sample(Rng& rng) const;
  /// Prior mode in constrained coordinates.
  double mode() const;

  /// Throws std::domain_error outside the support.
  double to_unconstrained(double x) const;
  double from_unconstrained(double u) const;
  double log_jacobian(double u) const;
  /// Spread of the prior in unconstrained coordinates (1 for flat priors).
  double unconstrained_std() const;
};

class PriorSet {
 public:
  struct Entry {
    ParamId id;
    PriorSpec spec;
  };

  PriorSet() = default;
  explicit PriorSet(std::vector<Entry> entries);

  /// F ~ N(10, 10), h ~ N(0, 1), log c ~ N(2, 0.1), b ~ N(5, 10).
  static PriorSet defaults();
  /// The (h, c, b) subset of defaults().
  static PriorSet fast_defaults();

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<ParamId> ids() const;
  const PriorSpec* find(ParamId id) const;

  /// Sum of marginal log densities; -inf outside the support.
  double log_density(const Params& params) const;
  /// Draw calibrated entries independently; others are copied from @p base.
  Params sample(Rng& rng, const Params& base = Params::truth()) const;

  std::vector<double> to_unconstrained(const Params& params) const;
  Params from_unconstrained(std::span<const double> u, const Params& base = Params::truth()) const;
  double log_jacobian(std::span<const double> u) const;
  /// Density of the pushed-back prior in unconstrained coordinates.
  double log_density_unconstrained(std::span<const double> u) const;
  std::vector<double> unconstrained_std() const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace l96cal
