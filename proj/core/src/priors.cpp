#include "l96cal/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace l96cal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_log_pdf(double x, double mu, double var) {
  const double d = x - mu;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}

double normal_cdf(double x, double mu, double var) {
  return 0.5 * std::erfc(-(x - mu) / std::sqrt(2.0 * var));
}

}  // namespace

PriorSpec PriorSpec::normal(double mean, double variance) {
  PriorSpec p{PriorKind::normal, mean, variance};
  p.validate();
  return p;
}

PriorSpec PriorSpec::lognormal(double log_mean, double log_variance) {
  PriorSpec p{PriorKind::lognormal, log_mean, log_variance};
  p.validate();
  return p;
}

PriorSpec PriorSpec::flat() { return PriorSpec{PriorKind::flat, 0.0, 1.0}; }

void PriorSpec::validate() const {
  if (kind != PriorKind::flat && !(var > 0.0)) {
    throw std::invalid_argument("PriorSpec: variance must be > 0");
  }
  if (!std::isfinite(mu)) throw std::invalid_argument("PriorSpec: mean must be finite");
}

double PriorSpec::log_pdf(double x) const {
  switch (kind) {
    case PriorKind::normal:
      return normal_log_pdf(x, mu, var);
    case PriorKind::lognormal:
      if (!(x > 0.0)) return kNegInf;
      return normal_log_pdf(std::log(x), mu, var) - std::log(x);
    case PriorKind::flat:
      return 0.0;
  }
  return kNegInf;
}

double PriorSpec::cdf(double x) const {
  switch (kind) {
    case PriorKind::normal:
      return normal_cdf(x, mu, var);
    case PriorKind::lognormal:
      return x > 0.0 ? normal_cdf(std::log(x), mu, var) : 0.0;
    case PriorKind::flat:
      throw std::logic_error("PriorSpec::cdf: flat prior has no CDF");
  }
  return 0.0;
}

double PriorSpec::sample(Rng& rng) const {
  const double z = standard_normal(rng);
  switch (kind) {
    case PriorKind::normal:
      return mu + std::sqrt(var) * z;
    case PriorKind::lognormal:
      return std::exp(mu + std::sqrt(var) * z);
    case PriorKind::flat:
      throw std::logic_error("PriorSpec::sample: cannot sample a flat prior");
  }
  return 0.0;
}

double PriorSpec::mode() const {
  switch (kind) {
    case PriorKind::normal:
      return mu;
    case PriorKind::lognormal:
      return std::exp(mu - var);
    case PriorKind::flat:
      return 0.0;
  }
  return 0.0;
}

double PriorSpec::to_unconstrained(double x) const {
  if (kind != PriorKind::lognormal) return x;
  if (!(x > 0.0)) throw std::domain_error("PriorSpec: log-normal parameter must be > 0");
  return std::log(x);
}

double PriorSpec::from_unconstrained(double u) const {
  return kind == PriorKind::lognormal ? std::exp(u) : u;
}

double PriorSpec::log_jacobian(double u) const { return kind == PriorKind::lognormal ? u : 0.0; }

double PriorSpec::unconstrained_std() const {
  return kind == PriorKind::flat ? 1.0 : std::sqrt(var);
}

PriorSet::PriorSet(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].spec.validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[j].id == entries_[i].id) {
        throw std::invalid_argument("PriorSet: duplicate parameter " +
                                    std::string(param_name(entries_[i].id)));
      }
    }
  }
}

PriorSet PriorSet::defaults() {
  return PriorSet({{ParamId::F, PriorSpec::normal(10.0, 10.0)},
                   {ParamId::h, PriorSpec::normal(0.0, 1.0)},
                   {ParamId::c, PriorSpec::lognormal(2.0, 0.1)},
                   {ParamId::b, PriorSpec::normal(5.0, 10.0)}});
}

PriorSet PriorSet::fast_defaults() {
  return PriorSet({{ParamId::h, PriorSpec::normal(0.0, 1.0)},
                   {ParamId::c, PriorSpec::lognormal(2.0, 0.1)},
                   {ParamId::b, PriorSpec::normal(5.0, 10.0)}});
}

std::vector<ParamId> PriorSet::ids() const {
  std::vector<ParamId> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.id);
  return out;
}

const PriorSpec* PriorSet::find(ParamId id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return &e.spec;
  }
  return nullptr;
}

double PriorSet::log_density(const Params& params) const {
  double s = 0.0;
  for (const auto& e : entries_) {
    const double lp = e.spec.log_pdf(params[e.id]);
    if (lp == kNegInf) return kNegInf;
    s += lp;
  }
  return s;
}

Params PriorSet::sample(Rng& rng, const Params& base) const {
  Params p = base;
  for (const auto& e : entries_) p[e.id] = e.spec.sample(rng);
  return p;
}

std::vector<double> PriorSet::to_unconstrained(const Params& params) const {
  std::vector<double> u;
  u.reserve(entries_.size());
  for (const auto& e : entries_) u.push_back(e.spec.to_unconstrained(params[e.id]));
  return u;
}

Params PriorSet::from_unconstrained(std::span<const double> u, const Params& base) const {
  if (u.size() != entries_.size()) {
    throw std::invalid_argument("PriorSet::from_unconstrained: dimension mismatch");
  }
  Params p = base;
  for (std::size_t i = 0; i < u.size(); ++i) p[entries_[i].id] = entries_[i].spec.from_unconstrained(u[i]);
  return p;
}

double PriorSet::log_jacobian(std::span<const double> u) const {
  if (u.size() != entries_.size()) {
    throw std::invalid_argument("PriorSet::log_jacobian: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += entries_[i].spec.log_jacobian(u[i]);
  return s;
}

double PriorSet::log_density_unconstrained(std::span<const double> u) const {
  const double lp = log_density(from_unconstrained(u));
  if (lp == kNegInf) return kNegInf;
  return lp + log_jacobian(u);
}

std::vector<double> PriorSet::unconstrained_std() const {
  std::vector<double> s;
  s.reserve(entries_.size());
  for (const auto& e : entries_) s.push_back(e.spec.unconstrained_std());
  return s;
}

}  // namespace l96cal
