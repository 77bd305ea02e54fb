#pragma once

/// Experiment orchestration behind the `l96cal` subcommands.
///
/// Every command writes its CSV outputs plus a `manifest.json` into the output
/// directory. Re-running a command from that manifest reproduces the CSVs
/// byte for byte.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "l96cal/config.hpp"
#include "l96cal/eki.hpp"
#include "l96cal/mcmc.hpp"
#include "l96cal/objective.hpp"
#include "l96cal/posterior.hpp"
#include "l96cal/statistics.hpp"

namespace l96cal {

inline constexpr const char* kVersion = "l96cal 0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitValidationFailure = 2,
  kExitBlowUp = 3,
  kExitConfigError = 4,
};

/// Sub-seed bookkeeping: every derived stream is recorded for the manifest.
class SeedBook {
 public:
  explicit SeedBook(std::uint64_t master) : master_(master) {}
  std::uint64_t master() const { return master_; }
  std::uint64_t derive(const std::string& label);
  const std::map<std::string, std::uint64_t>& derived() const { return derived_; }

 private:
  std::uint64_t master_;
  std::map<std::string, std::uint64_t> derived_;
};

struct RunContext {
  std::string command;
  Profile profile = Profile::paper;
  Settings settings;
  ExperimentConfig config;
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;
  bool inject_tendency_fault = false;
};

/// Build a context from profile defaults, an optional config file and
/// dotted overrides (applied in that order). Throws ConfigError.
RunContext make_context(const std::string& command, Profile profile,
                        const std::optional<std::string>& config_path,
                        const std::vector<std::pair<std::string, std::string>>& overrides,
                        std::optional<std::uint64_t> seed, const std::filesystem::path& out_dir);

/// Rebuild a context from a manifest written by a previous run.
RunContext context_from_manifest(const std::filesystem::path& manifest,
                                 const std::filesystem::path& out_dir);

// Experiment building blocks.

ControlRunResult run_full_control(const ExperimentConfig& cfg, SeedBook& seeds);
ControlRunResult run_fast_control(const ExperimentConfig& cfg, SeedBook& seeds);

CalibrationTarget make_full_target(const ExperimentConfig& cfg, const ControlRunResult& control,
                                   double r, double window);
CalibrationTarget make_fast_target(const ExperimentConfig& cfg, const ControlRunResult& control,
                                   double r);

struct EkiCell {
  double r;
  int M;
  EnsembleRecord record;
};

EkiCell run_eki_cell(const ExperimentConfig& cfg, const ControlRunResult& control, double r, int M,
                     SeedBook& seeds);

struct McmcRun {
  Params warm_start;
  Chain chain;
  std::vector<ParamId> ids;
  std::vector<Histogram> histograms;
  std::vector<MarginalSummary> marginals;
  long long blow_ups = 0;
};

McmcRun run_full_mcmc(const ExperimentConfig& cfg, const ControlRunResult& control,
                      SeedBook& seeds, const std::optional<Params>& warm_start = std::nullopt);
McmcRun run_fast_mcmc(const ExperimentConfig& cfg, const ControlRunResult& fast_control,
                      SeedBook& seeds);

struct ScanPoint {
  double value;
  double r;
  double U;
};
std::vector<ScanPoint> run_scan(const ExperimentConfig& cfg, const ControlRunResult& control,
                                ParamId param, const std::vector<double>& grid);

// Output writers (schemas are fixed).
void write_eki_summary(std::ostream& os, const std::vector<EkiCell>& cells);
void write_eki_table(std::ostream& os, const std::vector<EkiCell>& cells);
void write_eki_members(std::ostream& os, const std::vector<EkiCell>& cells);
void write_eki_iqr(std::ostream& os, const std::vector<EkiCell>& cells);
void write_chain(std::ostream& os, const Chain& chain);
void write_histogram(std::ostream& os, const Histogram& h);
void write_scan(std::ostream& os, const std::vector<ScanPoint>& points);

// Subcommands; each returns an ExitCode.
int cmd_simulate(RunContext& ctx);
int cmd_scan(RunContext& ctx);
int cmd_eki(RunContext& ctx);
int cmd_mcmc(RunContext& ctx);
int cmd_fast(RunContext& ctx);
int cmd_validate(RunContext& ctx);

/// Dispatch by ctx.command, mapping blow-ups and config errors to exit codes.
int run_command(RunContext& ctx);

}  // namespace l96cal
