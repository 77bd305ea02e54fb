#include "l96cal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "l96cal/csv.hpp"
#include "l96cal/random.hpp"
#include "l96cal/validation.hpp"

namespace l96cal {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::ostream& log_of(const RunContext& ctx) {
  static std::ostream null_stream(nullptr);
  return ctx.log ? *ctx.log : null_stream;
}

std::string r_label(double r) { return format_double(r); }

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Tracks output files for the manifest inventory.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    out << content;
    files_.push_back({name, content.size(), fnv1a64(content)});
  }

  template <class Fn>
  void write_with(const std::string& name, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    write(name, os.str());
  }

  json inventory() const {
    json arr = json::array();
    for (const auto& f : files_) {
      arr.push_back({{"file", f.name}, {"bytes", f.bytes}, {"fnv1a64", hex64(f.hash)}});
    }
    return arr;
  }

  const fs::path& dir() const { return dir_; }

 private:
  struct File {
    std::string name;
    std::size_t bytes;
    std::uint64_t hash;
  };
  fs::path dir_;
  std::vector<File> files_;
};

void write_manifest(const RunContext& ctx, const SeedBook& seeds, const OutputSet& outputs,
                    double wall_seconds, int exit_code) {
  json cfg = json::object();
  for (const auto& [k, v] : ctx.settings.values()) cfg[k] = v;
  json sub = json::object();
  for (const auto& [k, v] : seeds.derived()) sub[k] = v;
  json m = {{"command", ctx.command},
            {"profile", profile_name(ctx.profile)},
            {"master_seed", seeds.master()},
            {"config", cfg},
            {"sub_seeds", sub},
            {"code_version", kVersion},
            {"wall_clock_seconds", wall_seconds},
            {"exit_code", exit_code},
            {"outputs", outputs.inventory()}};
  if (ctx.inject_tendency_fault) m["inject_fault"] = "tendency-sign";
  std::ofstream out(outputs.dir() / "manifest.json");
  out << m.dump(2) << '\n';
}

void write_control(OutputSet& out, const std::string& name, const MomentLayout& layout,
                   const ControlRunResult& control) {
  out.write_with(name, [&](std::ostream& os) {
    write_moment_csv(os, layout, {control.mean, control.variance}, {"mean", "variance"});
  });
}

template <class Body>
int timed_command(RunContext& ctx, Body&& body) {
  const auto start = std::chrono::steady_clock::now();
  SeedBook seeds(ctx.config.seed);
  OutputSet outputs(ctx.out_dir);
  const int code = body(seeds, outputs);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(ctx, seeds, outputs, secs, code);
  return code;
}

json params_json(const Params& p) {
  return json{{"F", p.F}, {"h", p.h}, {"c", p.c}, {"b", p.b}};
}

json array4(const std::array<double, 4>& a) {
  return json{{"F", a[0]}, {"h", a[1]}, {"c", a[2]}, {"b", a[3]}};
}

std::vector<double> variances_for(const ExperimentConfig& cfg, const MomentLayout& layout,
                                  const ControlRunResult& control) {
  if (cfg.pooled_variances && layout.variant() == LayoutVariant::full) {
    return pool_block_variances(control.variance, layout);
  }
  return control.variance;
}

}  // namespace

std::uint64_t SeedBook::derive(const std::string& label) {
  const auto s = derive_seed(master_, label);
  derived_[label] = s;
  return s;
}

RunContext make_context(const std::string& command, Profile profile,
                        const std::optional<std::string>& config_path,
                        const std::vector<std::pair<std::string, std::string>>& overrides,
                        std::optional<std::uint64_t> seed, const fs::path& out_dir) {
  RunContext ctx;
  ctx.command = command;
  ctx.profile = profile;
  ctx.settings = Settings::defaults(profile);
  if (config_path) ctx.settings.load_file(*config_path);
  for (const auto& [k, v] : overrides) ctx.settings.set(k, v);
  if (seed) ctx.settings.set("seed", std::to_string(*seed));
  ctx.config = ExperimentConfig::from_settings(ctx.settings);
  ctx.config.profile = profile;
  ctx.out_dir = out_dir;
  return ctx;
}

RunContext context_from_manifest(const fs::path& manifest, const fs::path& out_dir) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open manifest '" + manifest.string() + "'");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& [k, v] : m.at("config").items()) overrides.emplace_back(k, v.get<std::string>());
  auto ctx = make_context(m.at("command").get<std::string>(),
                          profile_from_name(m.at("profile").get<std::string>()), std::nullopt,
                          overrides, std::nullopt, out_dir);
  ctx.inject_tendency_fault = m.contains("inject_fault");
  return ctx;
}

ControlRunResult run_full_control(const ExperimentConfig& cfg, SeedBook& seeds) {
  ControlRunOptions opts;
  opts.spinup = cfg.control_spinup;
  return control_run_variances(cfg.truth, cfg.control_duration, MomentLayout::full(cfg.shape),
                               cfg.integrator, seeds.derive("control.full"), opts);
}

ControlRunResult run_fast_control(const ExperimentConfig& cfg, SeedBook& seeds) {
  ControlRunOptions opts;
  opts.spinup = cfg.control_spinup;
  opts.x_fixed = cfg.x_fixed;
  return control_run_variances(cfg.truth, cfg.fast_control_duration,
                               MomentLayout::fast(cfg.shape.J), cfg.integrator,
                               seeds.derive("control.fast"), opts);
}

CalibrationTarget make_full_target(const ExperimentConfig& cfg, const ControlRunResult& control,
                                   double r, double window) {
  const auto layout = MomentLayout::full(cfg.shape);
  CalibrationTarget t{layout, control.mean, NoiseModel(r, variances_for(cfg, layout, control)),
                      window, FullForward{}};
  t.validate();
  return t;
}

CalibrationTarget make_fast_target(const ExperimentConfig& cfg, const ControlRunResult& control,
                                   double r) {
  const auto layout = MomentLayout::fast(cfg.shape.J);
  CalibrationTarget t{layout, control.mean, NoiseModel(r, control.variance), cfg.window_fast,
                      FastForward{cfg.x_fixed}};
  t.validate();
  return t;
}

EkiCell run_eki_cell(const ExperimentConfig& cfg, const ControlRunResult& control, double r, int M,
                     SeedBook& seeds) {
  const auto target = make_full_target(cfg, control, r, cfg.window);
  const auto model = MomentForwardModel::for_target(target, cfg.integrator);
  EKIConfig ec = cfg.eki;
  ec.ensemble_size = M;
  ec.seed = seeds.derive("eki/r=" + r_label(r) + "/M=" + std::to_string(M));
  auto record = run_eki(ec, model, target, PriorSet::defaults(), control.final_state, cfg.truth,
                        cfg.truth);
  return EkiCell{r, M, std::move(record)};
}

namespace {

McmcRun finish_mcmc(const ExperimentConfig& cfg, McmcRun run) {
  const auto retained = run.chain.retained_params();
  run.histograms = estimate_posterior_pdf(retained, run.ids, cfg.bins);
  for (ParamId id : run.ids) run.marginals.push_back(summarize_marginal(column(retained, id), cfg.bins));
  return run;
}

Params eki_warm_start(const ExperimentConfig& cfg, const ForwardModel& model,
                      const CalibrationTarget& target, const PriorSet& priors,
                      const TrajectoryState& init, std::uint64_t seed) {
  EKIConfig ec = cfg.eki;
  ec.ensemble_size = cfg.warm_start_ensemble;
  ec.max_iter = cfg.warm_start_iter;
  ec.seed = seed;
  return run_eki(ec, model, target, priors, init, cfg.truth).final().mean;
}

}  // namespace

McmcRun run_full_mcmc(const ExperimentConfig& cfg, const ControlRunResult& control,
                      SeedBook& seeds, const std::optional<Params>& warm_start) {
  const auto target = make_full_target(cfg, control, cfg.noise_r, cfg.window);
  const auto model = MomentForwardModel::for_target(target, cfg.integrator);
  const auto priors = PriorSet::defaults();
  McmcRun run;
  run.ids = priors.ids();
  const std::uint64_t ws_seed = seeds.derive("mcmc.warm_start");
  if (warm_start) {
    run.warm_start = *warm_start;
  } else if (cfg.warm_start == "eki") {
    run.warm_start = eki_warm_start(cfg, model, target, priors, control.final_state, ws_seed);
  } else if (cfg.warm_start == "prior") {
    Rng rng(ws_seed);
    run.warm_start = priors.sample(rng, cfg.truth);
  } else {
    run.warm_start = cfg.truth;
  }
  MCMCConfig mc = cfg.mcmc;
  mc.seed = seeds.derive("mcmc.chain");
  run.chain = run_mcmc(mc, model, target, priors, run.warm_start, control.final_state);
  for (const auto& rec : run.chain.records) {
    if (!std::isfinite(rec.proposal_U)) ++run.blow_ups;
  }
  return finish_mcmc(cfg, std::move(run));
}

McmcRun run_fast_mcmc(const ExperimentConfig& cfg, const ControlRunResult& fast_control,
                      SeedBook& seeds) {
  const auto target = make_fast_target(cfg, fast_control, cfg.noise_r_fast);
  const auto model = MomentForwardModel::for_target(target, cfg.integrator);
  const auto priors = PriorSet::fast_defaults();
  McmcRun run;
  run.ids = priors.ids();
  const std::uint64_t ws_seed = seeds.derive("fast.warm_start");
  if (cfg.warm_start == "eki") {
    run.warm_start = eki_warm_start(cfg, model, target, priors, fast_control.final_column, ws_seed);
  } else if (cfg.warm_start == "prior") {
    Rng rng(ws_seed);
    run.warm_start = priors.sample(rng, cfg.truth);
  } else {
    run.warm_start = cfg.truth;
  }
  MCMCConfig mc = cfg.mcmc;
  mc.seed = seeds.derive("fast.chain");
  run.chain = run_mcmc(mc, model, target, priors, run.warm_start, fast_control.final_column);
  for (const auto& rec : run.chain.records) {
    if (!std::isfinite(rec.proposal_U)) ++run.blow_ups;
  }
  return finish_mcmc(cfg, std::move(run));
}

std::vector<ScanPoint> run_scan(const ExperimentConfig& cfg, const ControlRunResult& control,
                                ParamId param, const std::vector<double>& grid) {
  const auto priors = PriorSet::defaults();
  const auto base_target = make_full_target(cfg, control, 1.0, cfg.window_scan);
  const auto model = MomentForwardModel::for_target(base_target, cfg.integrator);
  std::vector<ScanPoint> out;
  for (double v : grid) {
    Params p = cfg.truth;
    p[param] = v;
    const double log_prior = priors.log_density(p);
    std::optional<std::vector<double>> moments;
    if (log_prior != -kInf) {
      auto fwd = model.run(p, control.final_state);
      if (fwd.status == EvalStatus::ok) moments = std::move(fwd.moments);
    }
    for (double r : cfg.noise_levels) {
      double U = kInf;
      if (moments) {
        const auto noise = base_target.noise.with_level(r);
        U = potential_energy(p, weighted_misfit(*moments, base_target.mean, noise), priors);
      }
      out.push_back({v, r, U});
    }
  }
  return out;
}

void write_eki_summary(std::ostream& os, const std::vector<EkiCell>& cells) {
  CsvWriter w(os);
  w.header({"r", "M", "iter", "theta_mean_F", "theta_mean_h", "theta_mean_c", "theta_mean_b",
            "theta_std_F", "theta_std_h", "theta_std_c", "theta_std_b", "error_norm",
            "collapsed"});
  for (const auto& cell : cells) {
    for (const auto& it : cell.record.iterations) {
      w.field(cell.r).field(cell.M).field(it.iter);
      for (double v : it.mean.values()) w.field(v);
      for (double v : it.std) w.field(v);
      w.field(it.error_norm).field(it.collapsed);
      w.end_row();
    }
  }
}

void write_eki_table(std::ostream& os, const std::vector<EkiCell>& cells) {
  CsvWriter w(os);
  w.header({"r", "M", "theta_mean_F", "theta_mean_h", "theta_mean_c", "theta_mean_b",
            "theta_std_F", "theta_std_h", "theta_std_c", "theta_std_b", "error_norm",
            "collapsed"});
  for (const auto& cell : cells) {
    const auto& it = cell.record.final();
    w.field(cell.r).field(cell.M);
    for (double v : it.mean.values()) w.field(v);
    for (double v : it.std) w.field(v);
    w.field(it.error_norm).field(cell.record.collapsed);
    w.end_row();
  }
}

void write_eki_members(std::ostream& os, const std::vector<EkiCell>& cells) {
  CsvWriter w(os);
  w.header({"r", "M", "iter", "member", "F", "h", "c", "b", "blown"});
  for (const auto& cell : cells) {
    for (const auto& it : cell.record.iterations) {
      for (std::size_t j = 0; j < it.members.size(); ++j) {
        w.field(cell.r).field(cell.M).field(it.iter).field(j);
        for (double v : it.members[j].values()) w.field(v);
        w.field(j < it.blown.size() && it.blown[j]);
        w.end_row();
      }
    }
  }
}

void write_eki_iqr(std::ostream& os, const std::vector<EkiCell>& cells) {
  CsvWriter w(os);
  w.header({"r", "M", "iter", "q25_F", "q25_h", "q25_c", "q25_b", "q75_F", "q75_h", "q75_c",
            "q75_b"});
  for (const auto& cell : cells) {
    for (const auto& it : cell.record.iterations) {
      w.field(cell.r).field(cell.M).field(it.iter);
      for (double v : it.q25) w.field(v);
      for (double v : it.q75) w.field(v);
      w.end_row();
    }
  }
}

void write_chain(std::ostream& os, const Chain& chain) {
  CsvWriter w(os);
  w.header({"iter", "F", "h", "c", "b", "U", "accepted"});
  for (const auto& rec : chain.records) {
    w.field(rec.iter);
    for (double v : rec.params.values()) w.field(v);
    w.field(rec.U).field(rec.accepted);
    w.end_row();
  }
}

void write_histogram(std::ostream& os, const Histogram& h) {
  CsvWriter w(os);
  w.header({"bin_lo", "bin_hi", "mass"});
  for (std::size_t i = 0; i < h.bins(); ++i) {
    w.field(h.edges[i]).field(h.edges[i + 1]).field(h.mass[i]);
    w.end_row();
  }
}

void write_scan(std::ostream& os, const std::vector<ScanPoint>& points) {
  CsvWriter w(os);
  w.header({"value", "r", "U"});
  for (const auto& p : points) {
    w.field(p.value).field(p.r).field(p.U);
    w.end_row();
  }
}

namespace {

void write_mcmc_outputs(OutputSet& out, const McmcRun& run, const std::string& label) {
  out.write_with("chain.csv", [&](std::ostream& os) { write_chain(os, run.chain); });
  json marg = json::object();
  for (std::size_t i = 0; i < run.ids.size(); ++i) {
    const std::string name(param_name(run.ids[i]));
    out.write_with("hist_" + name + ".csv",
                   [&](std::ostream& os) { write_histogram(os, run.histograms[i]); });
    const auto& m = run.marginals[i];
    marg[name] = {{"mean", m.mean}, {"std", m.std}, {"q05", m.q05}, {"q95", m.q95},
                  {"mode", m.mode}};
  }
  json summary = {{"experiment", label},
                  {"warm_start", params_json(run.warm_start)},
                  {"acceptance_rate", run.chain.acceptance_rate},
                  {"iterations", run.chain.records.size()},
                  {"post_burn_in", run.chain.post_burn_in.size()},
                  {"retained", run.chain.retained.size()},
                  {"blow_ups", run.blow_ups},
                  {"final_proposal_scale", run.chain.final_scale},
                  {"marginals", marg}};
  out.write("summary.json", summary.dump(2) + "\n");
}

}  // namespace

int cmd_simulate(RunContext& ctx) {
  return timed_command(ctx, [&](SeedBook& seeds, OutputSet& out) {
    const auto& cfg = ctx.config;
    const SystemShape shape = cfg.shape;
    const auto layout = MomentLayout::full(shape);
    const auto state0 = random_initial_state(shape, seeds.derive("simulate.init"));
    RunningAverage avg(layout, 0.0, true);
    std::vector<double> sample(layout.size());
    const long long every =
        std::max<long long>(1, std::llround(cfg.simulate_sample_interval / cfg.integrator.dt));
    long long step = 0;

    std::ostringstream traj;
    CsvWriter w(traj);
    w.header({"t", "X[1]", "Y[1,1]", "mean_X", "mean_Ybar", "mean_X2", "mean_XYbar",
              "mean_Y2bar", "r_slow_rel", "r_fast_rel"});
    int code = kExitOk;
    try {
      integrate(state0, cfg.truth, shape, cfg.simulate_duration, cfg.integrator,
                [&](const StateView& v) {
                  moment_f(v.X, v.Y, shape, sample);
                  avg.accumulate(sample, cfg.integrator.dt);
                  if (++step % every != 0) return;
                  const auto means = avg.mean();
                  const auto pooled = pool_full(means, shape);
                  const auto res = steady_state_residuals(means, cfg.truth, shape);
                  w.field(v.t).field(v.X[0]).field(v.Y[0]);
                  w.field(pooled.X).field(pooled.Ybar).field(pooled.X2).field(pooled.XYbar);
                  w.field(pooled.Y2bar).field(res.rel_slow).field(res.rel_fast);
                  w.end_row();
                });
    } catch (const IntegrationBlowUp& e) {
      log_of(ctx) << "error: " << e.what() << '\n';
      code = kExitBlowUp;
    }
    out.write("trajectory.csv", traj.str());
    if (code == kExitOk && avg.elapsed() > 0.0) {
      out.write_with("moments.csv", [&](std::ostream& os) {
        write_moment_csv(os, layout, {avg.mean(), avg.variance()}, {"mean", "variance"});
      });
      const auto res = steady_state_residuals(avg.mean(), cfg.truth, shape);
      log_of(ctx) << "steady-state residuals: slow " << res.rel_slow << ", fast " << res.rel_fast
                  << '\n';
    }
    return code;
  });
}

int cmd_scan(RunContext& ctx) {
  return timed_command(ctx, [&](SeedBook& seeds, OutputSet& out) {
    const auto& cfg = ctx.config;
    const ParamId param = *param_from_name(cfg.scan_param);
    log_of(ctx) << "control run (" << cfg.control_duration << " days)\n";
    const auto control = run_full_control(cfg, seeds);
    write_control(out, "control.csv", MomentLayout::full(cfg.shape), control);
    const auto points = run_scan(cfg, control, param, cfg.scan_grid);
    out.write_with("scan_" + cfg.scan_param + ".csv",
                   [&](std::ostream& os) { write_scan(os, points); });
    return kExitOk;
  });
}

int cmd_eki(RunContext& ctx) {
  return timed_command(ctx, [&](SeedBook& seeds, OutputSet& out) {
    const auto& cfg = ctx.config;
    log_of(ctx) << "control run (" << cfg.control_duration << " days)\n";
    const auto control = run_full_control(cfg, seeds);
    write_control(out, "control.csv", MomentLayout::full(cfg.shape), control);
    std::vector<EkiCell> cells;
    for (double r : cfg.noise_levels) {
      for (int M : cfg.ensemble_sizes) {
        log_of(ctx) << "eki r=" << r << " M=" << M << '\n';
        cells.push_back(run_eki_cell(cfg, control, r, M, seeds));
        const auto& fin = cells.back().record.final();
        log_of(ctx) << "  mean " << to_string(fin.mean) << " error " << fin.error_norm
                    << (cells.back().record.collapsed ? " (collapsed)" : "") << '\n';
      }
    }
    out.write_with("eki_summary.csv", [&](std::ostream& os) { write_eki_summary(os, cells); });
    out.write_with("eki_table.csv", [&](std::ostream& os) { write_eki_table(os, cells); });
    out.write_with("eki_members.csv", [&](std::ostream& os) { write_eki_members(os, cells); });
    out.write_with("eki_iqr.csv", [&](std::ostream& os) { write_eki_iqr(os, cells); });
    json arr = json::array();
    for (const auto& c : cells) {
      const auto& fin = c.record.final();
      json norms = json::array();
      for (const auto& it : c.record.iterations) norms.push_back(it.error_norm);
      arr.push_back({{"r", c.r},
                     {"M", c.M},
                     {"mean", params_json(fin.mean)},
                     {"std", array4(fin.std)},
                     {"error_norms", norms},
                     {"collapsed", c.record.collapsed},
                     {"collapse_iter", c.record.collapse_iter},
                     {"blow_ups", c.record.blow_ups}});
    }
    out.write("summary.json", json{{"cells", arr}}.dump(2) + "\n");
    return kExitOk;
  });
}

int cmd_mcmc(RunContext& ctx) {
  return timed_command(ctx, [&](SeedBook& seeds, OutputSet& out) {
    const auto& cfg = ctx.config;
    log_of(ctx) << "control run (" << cfg.control_duration << " days)\n";
    const auto control = run_full_control(cfg, seeds);
    write_control(out, "control.csv", MomentLayout::full(cfg.shape), control);
    const auto run = run_full_mcmc(cfg, control, seeds);
    log_of(ctx) << "acceptance rate " << run.chain.acceptance_rate << '\n';
    write_mcmc_outputs(out, run, "full");
    return kExitOk;
  });
}

int cmd_fast(RunContext& ctx) {
  return timed_command(ctx, [&](SeedBook& seeds, OutputSet& out) {
    const auto& cfg = ctx.config;
    log_of(ctx) << "fast control run (" << cfg.fast_control_duration << " days, X1=" << cfg.x_fixed
                << ")\n";
    const auto control = run_fast_control(cfg, seeds);
    write_control(out, "control_fast.csv", MomentLayout::fast(cfg.shape.J), control);
    const auto run = run_fast_mcmc(cfg, control, seeds);
    log_of(ctx) << "acceptance rate " << run.chain.acceptance_rate << '\n';
    write_mcmc_outputs(out, run, "fast");
    return kExitOk;
  });
}

int cmd_validate(RunContext& ctx) {
  return timed_command(ctx, [&](SeedBook& seeds, OutputSet& out) {
    const auto& cfg = ctx.config;
    ValidationOptions opts;
    opts.shape = cfg.shape;
    opts.truth = cfg.truth;
    opts.integrator = cfg.integrator;
    opts.identity_days = cfg.validate_identity_days;
    opts.mcmc_steps = cfg.validate_mcmc_steps;
    opts.eki_members = cfg.validate_eki_members;
    opts.seed = seeds.derive("validate");
    opts.corrupt_tendency = ctx.inject_tendency_fault;
    const auto checks =
        run_validation(opts, [&](const CheckResult& c) { log_of(ctx) << format_check(c) << '\n'; });
    bool ok = true;
    out.write_with("validation_report.csv", [&](std::ostream& os) {
      CsvWriter w(os);
      w.header({"check", "measured", "relation", "threshold", "threshold_hi", "passed"});
      for (const auto& c : checks) {
        w.field(c.name).field(c.measured).field(c.relation).field(c.threshold);
        w.field(c.threshold_hi).field(c.passed);
        w.end_row();
        ok = ok && c.passed;
      }
    });
    return ok ? kExitOk : kExitValidationFailure;
  });
}

int run_command(RunContext& ctx) {
  try {
    if (ctx.command == "simulate") return cmd_simulate(ctx);
    if (ctx.command == "scan") return cmd_scan(ctx);
    if (ctx.command == "eki") return cmd_eki(ctx);
    if (ctx.command == "mcmc") return cmd_mcmc(ctx);
    if (ctx.command == "fast") return cmd_fast(ctx);
    if (ctx.command == "validate") return cmd_validate(ctx);
    log_of(ctx) << "error: unknown command '" << ctx.command << "'\n";
    return kExitConfigError;
  } catch (const ConfigError& e) {
    log_of(ctx) << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const IntegrationBlowUp& e) {
    log_of(ctx) << "blow-up: " << e.what() << '\n';
    return kExitBlowUp;
  }
}

}  // namespace l96cal
