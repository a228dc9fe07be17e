#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gradsim {

// State of the run after completing round t (0-based) plus that round's
// communication and timing. err_sq is the algorithm's own error-memory
// magnitude: ||e||^2 for the server-compensated method, ||mean_i e_i||^2 for
// worker-memory feedback, ||mean_i e_i + e||^2 for doubly compressed
// feedback, and 0 where no memory exists.
struct IterationRecord {
  std::uint64_t t = 0;
  double loss = 0.0;
  double grad_sq = 0.0;       // ||full gradient at mean model||^2
  double err_sq = 0.0;
  double disagreement = 0.0;  // mean_i ||xbar - x_i||^2
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
  std::uint64_t avg_bytes = 0;  // model-averaging traffic, both directions
  double round_ms = 0.0;

  // Monitor inputs, not serialized to CSV:
  double max_grad_sq = 0.0;         // max_i ||g_t^i||^2 this round
  double server_err_sq = 0.0;       // ||e||^2 component
  double worker_residual_sq = 0.0;  // ||mean_i e_i||^2 component
};

inline constexpr char kCsvHeader[] =
    "t,loss,grad_sq,err_sq,disagreement,uplink_bytes,downlink_bytes,"
    "avg_bytes,round_ms";

// Doubles are printed with %.17g, so a parse of the file recovers the exact
// in-memory values and any statistic recomputed from the CSV matches the one
// computed before writing, bit for bit.
void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const IterationRecord> records);
std::vector<IterationRecord> read_metrics_csv(const std::filesystem::path& path);

struct RunSummary {
  std::uint64_t iterations = 0;
  bool diverged = false;
  std::string abort_reason;  // empty on a clean run
  double final_loss = 0.0;
  double tail_mean_loss = 0.0;  // mean loss over the last quarter of rounds
  double min_grad_sq = 0.0;
  double peak_err_sq = 0.0;
  std::uint64_t total_uplink = 0;
  std::uint64_t total_downlink = 0;
  std::uint64_t total_model_bytes = 0;
  // Runner-level extras (not derivable from the CSV):
  double max_virtual_gap = 0.0;  // scaled virtual-sequence deviation, if tracked
  double eta = 0.0;
  std::uint64_t seed = 0;
};

// Fills exactly the fields derivable from CSV rows.
RunSummary summarize(std::span<const IterationRecord> records);

std::string summary_to_json(const RunSummary& s, const std::string& algorithm,
                            const std::string& extra_note = "");
void write_summary_json(const std::filesystem::path& path, const RunSummary& s,
                        const std::string& algorithm,
                        const std::string& extra_note = "");

// mean and sample std over repeats for the CSV-derivable statistics; the
// exact JSON string is pinned so it can be recomputed from the per-repeat
// CSVs and compared byte for byte.
std::string aggregate_to_json(std::span<const RunSummary> summaries,
                              const std::string& algorithm);

// Round-trip-exact double formatting used in the CSV.
std::string format_double(double v);

}  // namespace gradsim
