#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gradsim/config.hpp"
#include "gradsim/metrics.hpp"
#include "gradsim/problem.hpp"

namespace gradsim {

struct RunResult {
  std::vector<IterationRecord> records;
  RunSummary summary;
};

// Aborts (diverged flag + reason, loop stops) once the mean model violates
// either of these.
inline constexpr double kDivergenceNormSq = 1e16;

// Seed used for repeat r of a master seed; repeat 0 is the master itself so
// a single run and the first repeat of a multi-repeat run coincide.
std::uint64_t repeat_seed(std::uint64_t master, std::uint32_t r);

Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed);

// One trajectory with the config's algorithm. Tracks the virtual-sequence
// deviation for the server-compensated method (scaled by max(1, ||xbar||_inf))
// and stops early on divergence.
RunResult run_single(const ExperimentConfig& cfg, std::uint64_t seed);

// run_single plus metrics.csv and summary.json inside dir.
RunResult run_and_write(const ExperimentConfig& cfg, std::uint64_t seed,
                        const std::filesystem::path& dir);

struct ExperimentOutcome {
  std::vector<RunSummary> summaries;
  std::filesystem::path algorithm_dir;
  bool any_diverged = false;
};

// cfg.repeats trajectories under <out>/<algorithm>/<seed>/, plus the
// aggregate <out>/<algorithm>/summary.json.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

// Scaling sweep: worker count n runs base.iterations / n rounds; a constant
// step size is scaled by n (the horizon-aware schedule is simply recomputed).
// Each point is averaged over base.repeats repeats of the same master seed.
struct SweepRow {
  std::uint32_t workers = 0;
  std::uint64_t iterations = 0;
  double eta = 0.0;
  double mean_tail_loss = 0.0;
  double mean_final_loss = 0.0;
  bool diverged = false;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double spread = 0.0;  // (max - min) / min of mean_tail_loss across rows
  double tolerance = 0.2;
  bool agree = true;  // spread <= tolerance (trivially true for < 2 rows)
};

SweepReport run_speedup_sweep(const ExperimentConfig& base,
                              const std::vector<std::uint32_t>& worker_counts);
std::string sweep_report_json(const SweepReport& rep, const ExperimentConfig& base);

// Self-checks of the runtime invariants on fixed small workloads. Each entry
// reports the observed worst case against its limit.
struct ContractEntry {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct ContractReport {
  std::vector<ContractEntry> entries;
  bool all_pass = false;
};

struct ContractOptions {
  std::uint64_t seed = 2026;
  // > 0: contraction factor to use in the server-error bound check instead
  // of the true one. Lets tests prove the monitor trips on a wrong premise.
  double server_error_delta_override = 0.0;
};

ContractReport run_contract_suite(const ContractOptions& opts = {});
std::string contract_report_json(const ContractReport& rep);

}  // namespace gradsim
