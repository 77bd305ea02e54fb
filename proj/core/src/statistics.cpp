#include "l96cal/statistics.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "l96cal/csv.hpp"
#include "l96cal/random.hpp"

namespace l96cal {

namespace {

constexpr std::array<std::string_view, 5> kFullBlockNames{"X", "Ybar", "X2", "XYbar", "Y2bar"};

std::size_t fast_layout_size(int J) {
  const auto j = static_cast<std::size_t>(J);
  return j + j * (j + 1) / 2;
}

}  // namespace

MomentLayout MomentLayout::full(const SystemShape& shape) {
  shape.validate();
  return MomentLayout(LayoutVariant::full, shape);
}

MomentLayout MomentLayout::fast(int J) {
  if (J < 1) throw ShapeError("MomentLayout::fast: J must be >= 1");
  return MomentLayout(LayoutVariant::fast, SystemShape{1, J});
}

std::size_t MomentLayout::size() const {
  if (variant_ == LayoutVariant::full) return 5 * shape_.slow_size();
  return fast_layout_size(shape_.J);
}

std::string MomentLayout::label(std::size_t index) const {
  if (index >= size()) throw std::out_of_range("MomentLayout::label: index out of range");
  if (variant_ == LayoutVariant::full) {
    const std::size_t K = shape_.slow_size();
    return std::string(kFullBlockNames[index / K]) + "[" + std::to_string(index % K + 1) + "]";
  }
  const std::size_t J = static_cast<std::size_t>(shape_.J);
  if (index < J) return "Y[" + std::to_string(index + 1) + "]";
  std::size_t rem = index - J;
  for (std::size_t j = 0; j < J; ++j) {
    const std::size_t row = J - j;
    if (rem < row) {
      return "YY[" + std::to_string(j + 1) + "," + std::to_string(j + rem + 1) + "]";
    }
    rem -= row;
  }
  throw std::logic_error("MomentLayout::label: unreachable");
}

std::vector<std::string> MomentLayout::labels() const {
  std::vector<std::string> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(label(i));
  return out;
}

std::optional<std::size_t> MomentLayout::index_of(const std::string& label) const {
  const auto open = label.find('[');
  if (open == std::string::npos || label.back() != ']') return std::nullopt;
  const std::string name = label.substr(0, open);
  const std::string inner = label.substr(open + 1, label.size() - open - 2);

  auto parse = [](std::string_view s) -> std::optional<std::size_t> {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v == 0) return std::nullopt;
    return v;
  };

  if (variant_ == LayoutVariant::full) {
    const std::size_t K = shape_.slow_size();
    for (std::size_t blk = 0; blk < kFullBlockNames.size(); ++blk) {
      if (name != kFullBlockNames[blk]) continue;
      const auto k = parse(inner);
      if (!k || *k > K) return std::nullopt;
      return blk * K + (*k - 1);
    }
    return std::nullopt;
  }

  const std::size_t J = static_cast<std::size_t>(shape_.J);
  if (name == "Y") {
    const auto j = parse(inner);
    if (!j || *j > J) return std::nullopt;
    return *j - 1;
  }
  if (name == "YY") {
    const auto comma = inner.find(',');
    if (comma == std::string::npos) return std::nullopt;
    const auto j = parse(std::string_view(inner).substr(0, comma));
    const auto jp = parse(std::string_view(inner).substr(comma + 1));
    if (!j || !jp || *j > J || *jp > J || *jp < *j) return std::nullopt;
    // Rows 1..j-1 contribute J, J-1, ..., J-j+2 entries.
    std::size_t offset = J;
    for (std::size_t r = 1; r < *j; ++r) offset += J - r + 1;
    return offset + (*jp - *j);
  }
  return std::nullopt;
}

void moment_f(std::span<const double> X, std::span<const double> Y, const SystemShape& shape,
              std::span<double> out) {
  const std::size_t K = shape.slow_size();
  const std::size_t J = static_cast<std::size_t>(shape.J);
  if (X.size() != K || Y.size() != K * J || out.size() != 5 * K) {
    throw ShapeError("moment_f: buffer sizes do not match shape");
  }
  const double inv_J = 1.0 / static_cast<double>(J);
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    double s2 = 0.0;
    const double* yk = Y.data() + k * J;
    for (std::size_t j = 0; j < J; ++j) {
      s += yk[j];
      s2 += yk[j] * yk[j];
    }
    const double x = X[k];
    const double ybar = s * inv_J;
    out[k] = x;
    out[K + k] = ybar;
    out[2 * K + k] = x * x;
    out[3 * K + k] = x * ybar;
    out[4 * K + k] = s2 * inv_J;
  }
}

std::vector<double> moment_f(const ModelState& state, const SystemShape& shape) {
  state.check_shape(shape);
  std::vector<double> out(5 * shape.slow_size());
  moment_f(state.X, state.Y, shape, out);
  return out;
}

void moment_g(std::span<const double> ycol, std::span<double> out) {
  const std::size_t J = ycol.size();
  if (out.size() != fast_layout_size(static_cast<int>(J))) {
    throw ShapeError("moment_g: output length does not match J + J(J+1)/2");
  }
  std::size_t n = 0;
  for (std::size_t j = 0; j < J; ++j) out[n++] = ycol[j];
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t jp = j; jp < J; ++jp) out[n++] = ycol[j] * ycol[jp];
  }
}

std::vector<double> moment_g(std::span<const double> ycol) {
  std::vector<double> out(fast_layout_size(static_cast<int>(ycol.size())));
  moment_g(ycol, out);
  return out;
}

RunningAverage::RunningAverage(MomentLayout layout, double t0, bool track_second_moment)
    : layout_(layout), t0_(t0), sum_(layout.size(), 0.0) {
  if (track_second_moment) second_sum_.assign(layout_.size(), 0.0);
}

void RunningAverage::accumulate(std::span<const double> sample, double weight) {
  if (sample.size() != sum_.size()) throw ShapeError("RunningAverage: sample length mismatch");
  if (!(weight >= 0.0)) throw std::invalid_argument("RunningAverage: negative weight");
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += weight * sample[i];
  if (!second_sum_.empty()) {
    for (std::size_t i = 0; i < sum_.size(); ++i) second_sum_[i] += weight * sample[i] * sample[i];
  }
  elapsed_ += weight;
}

void RunningAverage::merge(const RunningAverage& other) {
  if (!(other.layout_ == layout_)) throw ShapeError("RunningAverage::merge: layout mismatch");
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += other.sum_[i];
  if (!second_sum_.empty()) {
    if (other.second_sum_.empty()) {
      throw std::invalid_argument("RunningAverage::merge: other lacks second moments");
    }
    for (std::size_t i = 0; i < sum_.size(); ++i) second_sum_[i] += other.second_sum_[i];
  }
  elapsed_ += other.elapsed_;
  t0_ = std::min(t0_, other.t0_);
}

std::vector<double> RunningAverage::mean() const {
  if (!(elapsed_ > 0.0)) throw std::logic_error("RunningAverage::mean: empty window");
  std::vector<double> m(sum_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = sum_[i] / elapsed_;
  return m;
}

std::vector<double> RunningAverage::variance() const {
  if (second_sum_.empty()) {
    throw std::logic_error("RunningAverage::variance: second moments not tracked");
  }
  const auto m = mean();
  std::vector<double> v(m.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::max(0.0, second_sum_[i] / elapsed_ - m[i] * m[i]);
  }
  return v;
}

ModelState random_initial_state(const SystemShape& shape, std::uint64_t seed) {
  auto state = ModelState::zeros(shape);
  Rng rng(seed);
  for (double& x : state.X) x = standard_normal(rng);
  return state;
}

FastColumnState random_initial_column(int J, std::uint64_t seed) {
  if (J < 4) throw ShapeError("random_initial_column: J must be >= 4");
  FastColumnState col{std::vector<double>(static_cast<std::size_t>(J)), 0.0};
  Rng rng(seed);
  for (double& y : col.Y) y = standard_normal(rng);
  return col;
}

ControlRunResult control_run_variances(const Params& params_true, double duration,
                                       const MomentLayout& layout, const IntegratorConfig& cfg,
                                       std::uint64_t seed, const ControlRunOptions& opts) {
  if (!(duration > 0.0)) throw std::invalid_argument("control_run_variances: duration must be > 0");
  RunningAverage avg(layout, 0.0, true);
  std::vector<double> sample(layout.size());
  ControlRunResult result;
  result.duration = duration;

  if (layout.variant() == LayoutVariant::full) {
    const SystemShape shape = layout.shape();
    ModelState state =
        opts.initial_state ? *opts.initial_state : random_initial_state(shape, seed);
    if (opts.spinup > 0.0) state = integrate(state, params_true, shape, opts.spinup, cfg);
    result.final_state = integrate(state, params_true, shape, duration, cfg,
                                   [&](const StateView& v) {
                                     moment_f(v.X, v.Y, shape, sample);
                                     avg.accumulate(sample, cfg.dt);
                                   });
  } else {
    FastColumnState col =
        opts.initial_column ? *opts.initial_column : random_initial_column(layout.shape().J, seed);
    if (col.Y.size() != static_cast<std::size_t>(layout.shape().J)) {
      throw ShapeError("control_run_variances: initial column length mismatch");
    }
    if (opts.spinup > 0.0) col = integrate_fast(col, params_true, opts.x_fixed, opts.spinup, cfg);
    result.final_column = integrate_fast(col, params_true, opts.x_fixed, duration, cfg,
                                         [&](std::span<const double> y, double) {
                                           moment_g(y, sample);
                                           avg.accumulate(sample, cfg.dt);
                                         });
  }
  result.mean = avg.mean();
  result.variance = avg.variance();
  return result;
}

PooledMoments pool_full(std::span<const double> means, const SystemShape& shape) {
  const std::size_t K = shape.slow_size();
  if (means.size() != 5 * K) throw ShapeError("pool_full: expected a full-layout vector");
  std::array<double, 5> blk{};
  for (std::size_t b = 0; b < 5; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += means[b * K + k];
    blk[b] = s / static_cast<double>(K);
  }
  return PooledMoments{blk[0], blk[1], blk[2], blk[3], blk[4]};
}

std::vector<double> pool_block_variances(std::span<const double> variances,
                                         const MomentLayout& layout) {
  if (layout.variant() != LayoutVariant::full) {
    throw std::invalid_argument("pool_block_variances: only full layouts have k-blocks");
  }
  if (variances.size() != layout.size()) throw ShapeError("pool_block_variances: size mismatch");
  const std::size_t K = layout.shape().slow_size();
  std::vector<double> out(variances.size());
  for (std::size_t b = 0; b < 5; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += variances[b * K + k];
    for (std::size_t k = 0; k < K; ++k) out[b * K + k] = s / static_cast<double>(K);
  }
  return out;
}

SteadyStateResiduals steady_state_residuals(std::span<const double> means, const Params& params,
                                            const SystemShape& shape) {
  const auto m = pool_full(means, shape);
  SteadyStateResiduals r{};
  r.r_slow = m.X2 - params.F * m.X + params.h * params.c * m.XYbar;
  r.r_fast = m.Y2bar - params.h / static_cast<double>(shape.J) * m.XYbar;
  r.rel_slow = m.X2 != 0.0 ? std::abs(r.r_slow) / std::abs(m.X2) : std::abs(r.r_slow);
  r.rel_fast = m.Y2bar != 0.0 ? std::abs(r.r_fast) / std::abs(m.Y2bar) : std::abs(r.r_fast);
  return r;
}

void write_moment_csv(std::ostream& os, const MomentLayout& layout,
                      const std::vector<std::vector<double>>& rows,
                      const std::vector<std::string>& row_names) {
  const bool named = !row_names.empty();
  if (named && row_names.size() != rows.size()) {
    throw std::invalid_argument("write_moment_csv: row name count mismatch");
  }
  CsvWriter w(os);
  std::vector<std::string> header;
  if (named) header.emplace_back("row");
  for (auto& l : layout.labels()) header.push_back(std::move(l));
  w.header(header);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != layout.size()) throw ShapeError("write_moment_csv: row length mismatch");
    if (named) w.field(row_names[r]);
    for (double v : rows[r]) w.field(v);
    w.end_row();
  }
}

MomentTable read_moment_csv(std::istream& is, const MomentLayout& layout, bool named_rows) {
  const auto table = read_csv(is);
  if (table.header.empty()) throw std::runtime_error("read_moment_csv: missing header");
  const std::size_t offset = named_rows ? 1 : 0;
  if (table.header.size() != layout.size() + offset) {
    throw std::runtime_error("read_moment_csv: header width does not match layout");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto idx = layout.index_of(table.header[i + offset]);
    if (!idx || *idx != i) {
      throw std::runtime_error("read_moment_csv: unexpected column '" + table.header[i + offset] +
                               "'");
    }
  }
  MomentTable out;
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::runtime_error("read_moment_csv: ragged row");
    if (named_rows) out.row_names.push_back(row[0]);
    std::vector<double> values;
    values.reserve(layout.size());
    for (std::size_t i = offset; i < row.size(); ++i) values.push_back(parse_double(row[i]));
    out.rows.push_back(std::move(values));
  }
  return out;
}

}  // namespace l96cal
