#include "gradsim/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gradsim {

namespace {

using ordered_json = nlohmann::ordered_json;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

ordered_json stat_pair(const std::vector<double>& v) {
  const double m = mean_of(v);
  return ordered_json{{"mean", m}, {"std", sample_std(v, m)}};
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const IterationRecord> records) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (f == nullptr) {
    throw std::runtime_error("write_metrics_csv: cannot open " + path.string());
  }
  std::fprintf(f, "%s\n", kCsvHeader);
  for (const IterationRecord& r : records) {
    std::fprintf(f, "%" PRIu64 ",%s,%s,%s,%s,%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%s\n",
                 r.t, format_double(r.loss).c_str(),
                 format_double(r.grad_sq).c_str(),
                 format_double(r.err_sq).c_str(),
                 format_double(r.disagreement).c_str(), r.uplink_bytes,
                 r.downlink_bytes, r.avg_bytes,
                 format_double(r.round_ms).c_str());
  }
  if (std::fclose(f) != 0) {
    throw std::runtime_error("write_metrics_csv: close failed for " + path.string());
  }
}

std::vector<IterationRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_metrics_csv: cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("read_metrics_csv: bad header in " + path.string());
  }
  std::vector<IterationRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) {
      throw std::runtime_error("read_metrics_csv: line " + std::to_string(lineno) +
                               " has " + std::to_string(cells.size()) + " fields");
    }
    IterationRecord r;
    r.t = std::stoull(cells[0]);
    r.loss = std::stod(cells[1]);
    r.grad_sq = std::stod(cells[2]);
    r.err_sq = std::stod(cells[3]);
    r.disagreement = std::stod(cells[4]);
    r.uplink_bytes = std::stoull(cells[5]);
    r.downlink_bytes = std::stoull(cells[6]);
    r.avg_bytes = std::stoull(cells[7]);
    r.round_ms = std::stod(cells[8]);
    out.push_back(r);
  }
  return out;
}

RunSummary summarize(std::span<const IterationRecord> records) {
  RunSummary s;
  s.iterations = records.size();
  if (records.empty()) return s;
  s.final_loss = records.back().loss;
  s.min_grad_sq = records.front().grad_sq;
  s.peak_err_sq = 0.0;
  for (const IterationRecord& r : records) {
    s.min_grad_sq = std::min(s.min_grad_sq, r.grad_sq);
    s.peak_err_sq = std::max(s.peak_err_sq, r.err_sq);
    s.total_uplink += r.uplink_bytes;
    s.total_downlink += r.downlink_bytes;
    s.total_model_bytes += r.avg_bytes;
  }
  const std::size_t tail = (records.size() + 3) / 4;
  double acc = 0.0;
  for (std::size_t i = records.size() - tail; i < records.size(); ++i) {
    acc += records[i].loss;
  }
  s.tail_mean_loss = acc / static_cast<double>(tail);
  return s;
}

namespace {

ordered_json summary_json_obj(const RunSummary& s, const std::string& algorithm,
                              const std::string& extra_note) {
  ordered_json j;
  j["algorithm"] = algorithm;
  j["iterations"] = s.iterations;
  j["seed"] = s.seed;
  j["eta"] = s.eta;
  j["diverged"] = s.diverged;
  j["abort_reason"] = s.abort_reason;
  j["final_loss"] = s.final_loss;
  j["tail_mean_loss"] = s.tail_mean_loss;
  j["min_grad_sq"] = s.min_grad_sq;
  j["peak_err_sq"] = s.peak_err_sq;
  j["total_uplink_bytes"] = s.total_uplink;
  j["total_downlink_bytes"] = s.total_downlink;
  j["total_model_avg_bytes"] = s.total_model_bytes;
  j["max_virtual_gap"] = s.max_virtual_gap;
  if (!extra_note.empty()) j["note"] = extra_note;
  return j;
}

}  // namespace

std::string summary_to_json(const RunSummary& s, const std::string& algorithm,
                            const std::string& extra_note) {
  return summary_json_obj(s, algorithm, extra_note).dump(2) + "\n";
}

void write_summary_json(const std::filesystem::path& path, const RunSummary& s,
                        const std::string& algorithm,
                        const std::string& extra_note) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("write_summary_json: cannot open " + path.string());
  }
  out << summary_to_json(s, algorithm, extra_note);
}

std::string aggregate_to_json(std::span<const RunSummary> summaries,
                              const std::string& algorithm) {
  if (summaries.empty()) {
    throw std::invalid_argument("aggregate_to_json: no summaries");
  }
  ordered_json j;
  j["algorithm"] = algorithm;
  j["repeats"] = summaries.size();
  ordered_json seeds = ordered_json::array();
  std::size_t diverged = 0;
  std::vector<double> final_loss, tail_loss, min_grad, peak_err, up, down, model;
  for (const RunSummary& s : summaries) {
    seeds.push_back(s.seed);
    if (s.diverged) ++diverged;
    final_loss.push_back(s.final_loss);
    tail_loss.push_back(s.tail_mean_loss);
    min_grad.push_back(s.min_grad_sq);
    peak_err.push_back(s.peak_err_sq);
    up.push_back(static_cast<double>(s.total_uplink));
    down.push_back(static_cast<double>(s.total_downlink));
    model.push_back(static_cast<double>(s.total_model_bytes));
  }
  j["seeds"] = seeds;
  j["diverged_count"] = diverged;
  j["final_loss"] = stat_pair(final_loss);
  j["tail_mean_loss"] = stat_pair(tail_loss);
  j["min_grad_sq"] = stat_pair(min_grad);
  j["peak_err_sq"] = stat_pair(peak_err);
  j["total_uplink_bytes"] = stat_pair(up);
  j["total_downlink_bytes"] = stat_pair(down);
  j["total_model_avg_bytes"] = stat_pair(model);
  return j.dump(2) + "\n";
}

}  // namespace gradsim
