#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gradsim/channel.hpp"
#include "gradsim/compressor.hpp"
#include "gradsim/problem.hpp"
#include "gradsim/schedule.hpp"

namespace gradsim {

// Invalid or unknown configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class AlgorithmKind { psgd, liec, memsgd, doublesqueeze };

const char* algorithm_name(AlgorithmKind a);
AlgorithmKind parse_algorithm(std::string_view s);

struct ExperimentConfig {
  AlgorithmKind algorithm = AlgorithmKind::liec;
  ProblemKind problem = ProblemKind::quadratic;
  std::uint32_t dim = 100;
  std::uint32_t workers = 8;
  bool heterogeneous = true;
  double sigma = 1.0;                     // quadratic
  double condition = 10.0;                // quadratic
  std::uint32_t samples_per_worker = 64;  // logistic
  CompressorSpec comp_worker;
  CompressorSpec comp_server;
  ScheduleSpec schedule{ScheduleKind::constant, 0.01};
  std::uint32_t period = 0;  // 0: floor(1/nominal_delta) where delta is known
  std::uint64_t iterations = 1000;
  std::uint64_t seed = 1;
  std::uint32_t repeats = 1;
  Fidelity fidelity = Fidelity::lossless;
  std::string out_dir = "results";
  std::uint32_t threads = 1;
  bool wall_timing = true;
  double sweep_tolerance = 0.2;
};

// Flat "key = value" text, '#' comments, schema_version pinned to 1.
// Unknown keys are hard errors naming the key. Compressor values use
// "identity" | "topk:K" | "randk:K" | "sign[:DELTA]" | "blocksign:B[:DELTA]";
// schedule uses "constant:ETA" | "theory".
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

CompressorSpec parse_compressor(std::string_view s, std::uint32_t dim);

// Sync period actually used by a run: the configured value, else
// floor(1/nominal_delta) for operators whose delta is exact (identity,
// random-k). For top-k and the sign family the period must be configured.
std::uint32_t resolve_period(const ExperimentConfig& cfg);

}  // namespace gradsim
