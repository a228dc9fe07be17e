#include <doctest.h>

#include <stdexcept>

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradsim/metrics.hpp"

using namespace gradsim;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

IterationRecord record(std::uint64_t t, double loss, double grad_sq,
                       double err_sq) {
  IterationRecord r;
  r.t = t;
  r.loss = loss;
  r.grad_sq = grad_sq;
  r.err_sq = err_sq;
  r.disagreement = 0.5 * loss;
  r.uplink_bytes = 100 + t;
  r.downlink_bytes = 200 + t;
  r.avg_bytes = t % 3 == 0 ? 50 : 0;
  r.round_ms = 0.25 * static_cast<double>(t);
  return r;
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

TEST_CASE("format_double round-trips doubles exactly") {
  for (double v : {0.1, -1.0 / 3.0, 3.141592653589793, 1e-308, 5e-324,
                   9007199254740993.0, -0.0, 1e308, 0.0}) {
    // strtod, not stod: stod raises out_of_range for subnormals like 5e-324.
    CHECK(same_bits(std::strtod(format_double(v).c_str(), nullptr), v));
  }
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("CSV write/read round-trips every field bit for bit") {
  std::vector<IterationRecord> recs;
  recs.push_back(record(0, 0.1, 1.0 / 3.0, 1e-300));
  recs.push_back(record(1, 3.141592653589793, 2e-5, 0.0));
  recs.push_back(record(2, std::numeric_limits<double>::infinity(), 1.0, 2.0));

  const auto path = temp_file("gradsim_metrics_roundtrip.csv");
  write_metrics_csv(path, recs);
  const auto back = read_metrics_csv(path);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].t == recs[i].t);
    CHECK(same_bits(back[i].loss, recs[i].loss));
    CHECK(same_bits(back[i].grad_sq, recs[i].grad_sq));
    CHECK(same_bits(back[i].err_sq, recs[i].err_sq));
    CHECK(same_bits(back[i].disagreement, recs[i].disagreement));
    CHECK(back[i].uplink_bytes == recs[i].uplink_bytes);
    CHECK(back[i].downlink_bytes == recs[i].downlink_bytes);
    CHECK(back[i].avg_bytes == recs[i].avg_bytes);
    CHECK(same_bits(back[i].round_ms, recs[i].round_ms));
  }
  std::filesystem::remove(path);
}

TEST_CASE("empty run writes a header-only file and reads back empty") {
  const auto path = temp_file("gradsim_metrics_empty.csv");
  write_metrics_csv(path, {});
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == kCsvHeader);
  CHECK_FALSE(std::getline(in, line));
  CHECK(read_metrics_csv(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("read_metrics_csv rejects alien files") {
  const auto path = temp_file("gradsim_metrics_bad.csv");
  {
    std::ofstream out(path);
    out << "time,loss\n1,2\n";
  }
  CHECK_THROWS_AS(read_metrics_csv(path), std::runtime_error);
  {
    std::ofstream out(path);
    out << kCsvHeader << "\n1,2,3\n";
  }
  CHECK_THROWS_AS(read_metrics_csv(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("summarize aggregates the documented statistics") {
  std::vector<IterationRecord> recs;
  const double losses[8] = {10.0, 8.0, 7.0, 5.0, 4.0, 3.5, 3.0, 2.5};
  const double grads[8] = {9.0, 7.0, 8.0, 2.0, 3.0, 2.5, 6.0, 4.0};
  const double errs[8] = {0.0, 1.0, 4.0, 2.0, 3.0, 0.5, 0.25, 0.125};
  for (int t = 0; t < 8; ++t)
    recs.push_back(record(static_cast<std::uint64_t>(t), losses[t], grads[t], errs[t]));

  const RunSummary s = summarize(recs);
  CHECK(s.iterations == 8);
  CHECK(s.final_loss == 2.5);
  CHECK(s.min_grad_sq == 2.0);
  CHECK(s.peak_err_sq == 4.0);
  CHECK(s.tail_mean_loss == (3.0 + 2.5) / 2.0);  // last ceil(8/4) = 2 rows
  CHECK(s.total_uplink == 8 * 100 + 28);
  CHECK(s.total_downlink == 8 * 200 + 28);
  CHECK(s.total_model_bytes == 3 * 50);

  // five records: tail is ceil(5/4) = 2 as well
  const RunSummary s5 = summarize(std::span(recs).subspan(0, 5));
  CHECK(s5.tail_mean_loss == (5.0 + 4.0) / 2.0);

  const RunSummary s0 = summarize({});
  CHECK(s0.iterations == 0);
  CHECK(s0.final_loss == 0.0);
}

TEST_CASE("summary recomputed from the CSV file matches the original bitwise") {
  std::vector<IterationRecord> recs;
  for (int t = 0; t < 13; ++t)
    recs.push_back(record(static_cast<std::uint64_t>(t), 1.0 / (t + 1.0),
                          0.3 * t, 0.01 * t * t));
  const auto path = temp_file("gradsim_metrics_recompute.csv");
  write_metrics_csv(path, recs);
  const RunSummary a = summarize(recs);
  const RunSummary b = summarize(read_metrics_csv(path));
  CHECK(same_bits(a.final_loss, b.final_loss));
  CHECK(same_bits(a.tail_mean_loss, b.tail_mean_loss));
  CHECK(same_bits(a.min_grad_sq, b.min_grad_sq));
  CHECK(same_bits(a.peak_err_sq, b.peak_err_sq));
  CHECK(a.total_uplink == b.total_uplink);
  std::filesystem::remove(path);
}

TEST_CASE("summary JSON carries the run header fields") {
  RunSummary s;
  s.iterations = 4;
  s.final_loss = 0.125;
  s.tail_mean_loss = 0.25;
  s.eta = 0.05;
  s.seed = 99;
  s.diverged = false;
  const std::string body = summary_to_json(s, "memsgd");
  CHECK(body.back() == '\n');
  const auto j = nlohmann::json::parse(body);
  CHECK(j["algorithm"] == "memsgd");
  CHECK(j["iterations"] == 4);
  CHECK(j["final_loss"] == 0.125);
  CHECK(j["eta"] == 0.05);
  CHECK(j["seed"] == 99);
  CHECK(j["diverged"] == false);
  CHECK_FALSE(j.contains("note"));
  const auto j2 =
      nlohmann::json::parse(summary_to_json(s, "memsgd", "negative control"));
  CHECK(j2["note"] == "negative control");
}

TEST_CASE("aggregate JSON reports sample statistics over repeats") {
  RunSummary a, b;
  a.iterations = b.iterations = 10;
  a.final_loss = 1.0;
  b.final_loss = 3.0;
  a.tail_mean_loss = 2.0;
  b.tail_mean_loss = 2.0;
  a.seed = 1;
  b.seed = 2;
  const auto j = nlohmann::json::parse(
      aggregate_to_json(std::vector<RunSummary>{a, b}, "psgd"));
  CHECK(j["algorithm"] == "psgd");
  CHECK(j["repeats"] == 2);
  CHECK(j["seeds"] == nlohmann::json::array({1, 2}));
  CHECK(j["diverged_count"] == 0);
  CHECK(j["final_loss"]["mean"] == 2.0);
  CHECK(j["final_loss"]["std"] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(j["tail_mean_loss"]["std"] == 0.0);

  const auto j1 = nlohmann::json::parse(
      aggregate_to_json(std::vector<RunSummary>{a}, "psgd"));
  CHECK(j1["final_loss"]["std"] == 0.0);
}
