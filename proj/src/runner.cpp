#include "gradsim/runner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gradsim/algorithm.hpp"
#include "gradsim/channel.hpp"
#include "gradsim/rng.hpp"
#include "gradsim/schedule.hpp"
#include "gradsim/vector_ops.hpp"

namespace gradsim {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

std::uint64_t repeat_seed(std::uint64_t master, std::uint32_t r) {
  if (r == 0) return master;
  return mix64(master ^ mix64(0x7265706561740000ull + r));
}

Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  switch (cfg.problem) {
    case ProblemKind::quadratic:
      return Problem::make_quadratic(cfg.dim, cfg.workers, cfg.condition,
                                     cfg.sigma, seed, cfg.heterogeneous);
    case ProblemKind::logistic:
      return Problem::make_logistic(cfg.dim, cfg.workers, cfg.samples_per_worker,
                                    seed, cfg.heterogeneous);
  }
  throw std::logic_error("unreachable problem kind");
}

RunResult run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
  Problem problem = build_problem(cfg, seed);

  RoundOptions opts;
  opts.eta = resolve_eta(cfg.schedule, cfg.iterations, cfg.workers,
                         problem.smoothness(), cfg.comp_worker.nominal_delta);
  opts.worker_comp = cfg.comp_worker;
  opts.server_comp = cfg.comp_server;
  opts.period = resolve_period(cfg);
  opts.threads = cfg.threads;
  opts.wall_timing = cfg.wall_timing;

  Channel ch(cfg.fidelity);
  std::vector<WorkerState> workers = make_workers(problem);
  ServerState server;
  VirtualSequence vs;
  const bool liec = cfg.algorithm == AlgorithmKind::liec;
  if (liec) vs.xhat.assign(problem.dim(), 0.0);

  RunResult out;
  out.records.reserve(static_cast<std::size_t>(
      std::min<std::uint64_t>(cfg.iterations, 1u << 20)));
  double max_gap = 0.0;
  bool diverged = false;
  std::string reason;

  for (std::uint64_t t = 0; t < cfg.iterations; ++t) {
    IterationRecord rec;
    switch (cfg.algorithm) {
      case AlgorithmKind::psgd:
        rec = psgd_iteration(problem, workers, server, ch, opts);
        break;
      case AlgorithmKind::liec:
        rec = liec_iteration(problem, workers, server, &vs, ch, opts);
        break;
      case AlgorithmKind::memsgd:
        rec = memsgd_iteration(problem, workers, server, ch, opts);
        break;
      case AlgorithmKind::doublesqueeze:
        rec = doublesqueeze_iteration(problem, workers, server, ch, opts);
        break;
    }
    out.records.push_back(rec);

    ModelVector xbar = mean_model(workers);
    if (liec) {
      double gap = virtual_check(vs, xbar, server.error, opts.eta);
      max_gap = std::max(max_gap, gap / std::max(1.0, linf_norm(xbar)));
    }
    if (!all_finite(xbar) || !std::isfinite(rec.loss)) {
      diverged = true;
      reason = "non-finite model state at round " + std::to_string(t);
      break;
    }
    if (sq_norm(xbar) > kDivergenceNormSq) {
      diverged = true;
      reason = "mean model norm left the trust region at round " + std::to_string(t);
      break;
    }
  }

  out.summary = summarize(out.records);
  out.summary.diverged = diverged;
  out.summary.abort_reason = reason;
  out.summary.max_virtual_gap = max_gap;
  out.summary.eta = opts.eta;
  out.summary.seed = seed;
  return out;
}

RunResult run_and_write(const ExperimentConfig& cfg, std::uint64_t seed,
                        const std::filesystem::path& dir) {
  RunResult res = run_single(cfg, seed);
  std::filesystem::create_directories(dir);
  write_metrics_csv(dir / "metrics.csv", res.records);
  write_summary_json(dir / "summary.json", res.summary,
                     algorithm_name(cfg.algorithm));
  return res;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  out.algorithm_dir =
      std::filesystem::path(cfg.out_dir) / algorithm_name(cfg.algorithm);
  for (std::uint32_t r = 0; r < cfg.repeats; ++r) {
    std::uint64_t seed = repeat_seed(cfg.seed, r);
    RunResult res = run_and_write(cfg, seed, out.algorithm_dir / std::to_string(seed));
    out.any_diverged = out.any_diverged || res.summary.diverged;
    out.summaries.push_back(res.summary);
  }
  std::filesystem::create_directories(out.algorithm_dir);
  std::string agg = aggregate_to_json(out.summaries, algorithm_name(cfg.algorithm));
  std::filesystem::path agg_path = out.algorithm_dir / "summary.json";
  std::FILE* f = std::fopen(agg_path.string().c_str(), "wb");
  if (f == nullptr)
    throw std::runtime_error("cannot write " + agg_path.string());
  std::fwrite(agg.data(), 1, agg.size(), f);
  std::fclose(f);
  return out;
}

SweepReport run_speedup_sweep(const ExperimentConfig& base,
                              const std::vector<std::uint32_t>& worker_counts) {
  if (worker_counts.empty())
    throw ConfigError("sweep needs at least one worker count");
  SweepReport rep;
  rep.tolerance = base.sweep_tolerance;
  for (std::uint32_t n : worker_counts) {
    if (n == 0) throw ConfigError("sweep worker counts must be positive");
    ExperimentConfig cfg = base;
    cfg.workers = n;
    cfg.iterations = std::max<std::uint64_t>(1, base.iterations / n);
    if (cfg.schedule.kind == ScheduleKind::constant)
      cfg.schedule.eta = base.schedule.eta * static_cast<double>(n);

    SweepRow row;
    row.workers = n;
    row.iterations = cfg.iterations;
    std::vector<double> tails, finals;
    for (std::uint32_t r = 0; r < base.repeats; ++r) {
      RunResult res = run_single(cfg, repeat_seed(base.seed, r));
      row.eta = res.summary.eta;
      row.diverged = row.diverged || res.summary.diverged;
      tails.push_back(res.summary.tail_mean_loss);
      finals.push_back(res.summary.final_loss);
    }
    row.mean_tail_loss = mean_of(tails);
    row.mean_final_loss = mean_of(finals);
    rep.rows.push_back(row);
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const SweepRow& row : rep.rows) {
    lo = std::min(lo, row.mean_tail_loss);
    hi = std::max(hi, row.mean_tail_loss);
  }
  if (rep.rows.size() < 2 || hi == lo) {
    rep.spread = 0.0;
  } else if (lo > 0.0) {
    rep.spread = (hi - lo) / lo;
  } else {
    rep.spread = std::numeric_limits<double>::infinity();
  }
  rep.agree = rep.rows.size() < 2 || rep.spread <= rep.tolerance;
  return rep;
}

std::string sweep_report_json(const SweepReport& rep, const ExperimentConfig& base) {
  nlohmann::ordered_json j;
  j["algorithm"] = algorithm_name(base.algorithm);
  j["base_seed"] = base.seed;
  j["repeats"] = base.repeats;
  j["base_iterations"] = base.iterations;
  j["rows"] = nlohmann::ordered_json::array();
  for (const SweepRow& row : rep.rows) {
    nlohmann::ordered_json r;
    r["workers"] = row.workers;
    r["iterations"] = row.iterations;
    r["eta"] = row.eta;
    r["mean_tail_loss"] = row.mean_tail_loss;
    r["mean_final_loss"] = row.mean_final_loss;
    r["diverged"] = row.diverged;
    j["rows"].push_back(r);
  }
  j["tail_loss_spread"] = rep.spread;
  j["tolerance"] = rep.tolerance;
  j["agree"] = rep.agree;
  return j.dump(2) + "\n";
}

namespace {

// Worst observed ratio rec_value / bound(running max grad) over a trace.
struct BoundScan {
  double worst_ratio = 0.0;
  std::uint64_t violations = 0;
};

template <typename BoundFn, typename ValueFn>
BoundScan scan_bound(const std::vector<IterationRecord>& recs, BoundFn bound,
                     ValueFn value) {
  BoundScan s;
  double m = 0.0;
  for (const IterationRecord& rec : recs) {
    m = std::max(m, rec.max_grad_sq);
    double b = bound(m);
    double v = value(rec);
    if (b > 0.0) s.worst_ratio = std::max(s.worst_ratio, v / b);
    if (v > b) ++s.violations;
  }
  return s;
}

}  // namespace

ContractReport run_contract_suite(const ContractOptions& opts) {
  ContractReport rep;

  // Shared compensated run: quarter rand-k on both ends over a noisy
  // heterogeneous quadratic; default period 4.
  ExperimentConfig cfg;
  cfg.algorithm = AlgorithmKind::liec;
  cfg.problem = ProblemKind::quadratic;
  cfg.dim = 64;
  cfg.workers = 8;
  cfg.heterogeneous = true;
  cfg.sigma = 1.0;
  cfg.condition = 10.0;
  cfg.comp_worker = CompressorSpec::random_k(16, 64);
  cfg.comp_server = CompressorSpec::random_k(16, 64);
  cfg.schedule = ScheduleSpec{ScheduleKind::constant, 0.02};
  cfg.period = 0;
  cfg.iterations = 600;
  cfg.seed = opts.seed;
  cfg.fidelity = Fidelity::lossless;
  const double delta = cfg.comp_worker.nominal_delta;

  RunResult res = run_single(cfg, opts.seed);

  rep.entries.push_back(
      {"virtual-sequence-identity",
       !res.summary.diverged && res.summary.max_virtual_gap <= kVirtualGapTolerance,
       res.summary.max_virtual_gap, kVirtualGapTolerance,
       "scaled || xbar - xhat - eta e ||_inf over the run"});

  {
    double bdelta = opts.server_error_delta_override > 0.0
                        ? opts.server_error_delta_override
                        : delta;
    BoundScan s = scan_bound(
        res.records,
        [&](double m) { return server_error_bound(bdelta, cfg.workers, m); },
        [](const IterationRecord& r) { return r.server_err_sq; });
    rep.entries.push_back({"server-error-bound", s.violations == 0, s.worst_ratio,
                           1.0,
                           "||e||^2 vs bound at delta " + format_double(bdelta) +
                               ", " + std::to_string(s.violations) + " violations"});
  }

  {
    BoundScan s = scan_bound(
        res.records,
        [&](double m) { return disagreement_bound(delta, res.summary.eta, m); },
        [](const IterationRecord& r) { return r.disagreement; });
    rep.entries.push_back({"disagreement-bound", s.violations == 0, s.worst_ratio,
                           1.0,
                           "mean_i ||xbar - x_i||^2 vs bound, " +
                               std::to_string(s.violations) + " violations"});
  }

  {
    double got = measure_delta(CompressorSpec::random_k(16, 64), 64, 20000,
                               RngStream{opts.seed, 7, StreamPurpose::compressor});
    rep.entries.push_back({"contraction-randk", std::abs(got - 0.25) <= 0.01,
                           got, 0.25,
                           "empirical contraction of quarter rand-k, tolerance 0.01"});
  }
  {
    double got = measure_delta(CompressorSpec::top_k(16, 64), 64, 20000,
                               RngStream{opts.seed, 8, StreamPurpose::compressor});
    rep.entries.push_back({"contraction-topk", got >= 0.25 && got < 1.0, got,
                           0.25,
                           "top-k must contract at least as hard as rand-k"});
  }

  {
    // With identity operators every method collapses onto plain parallel
    // SGD; compare the loss traces and the final worker models bit for bit.
    ExperimentConfig c2;
    c2.problem = ProblemKind::quadratic;
    c2.dim = 16;
    c2.workers = 4;
    c2.heterogeneous = true;
    c2.sigma = 1.0;
    c2.condition = 10.0;
    c2.schedule = ScheduleSpec{ScheduleKind::constant, 0.05};
    c2.iterations = 150;
    c2.seed = opts.seed;
    c2.fidelity = Fidelity::lossless;
    c2.wall_timing = false;

    std::uint64_t mismatches = 0;
    RunResult ref;
    const AlgorithmKind kinds[] = {AlgorithmKind::psgd, AlgorithmKind::liec,
                                   AlgorithmKind::memsgd,
                                   AlgorithmKind::doublesqueeze};
    for (AlgorithmKind k : kinds) {
      ExperimentConfig c = c2;
      c.algorithm = k;
      RunResult r = run_single(c, opts.seed);
      if (k == AlgorithmKind::psgd) {
        ref = std::move(r);
        continue;
      }
      if (r.records.size() != ref.records.size()) {
        mismatches += 1;
        continue;
      }
      for (std::size_t t = 0; t < r.records.size(); ++t) {
        if (!same_bits(r.records[t].loss, ref.records[t].loss)) ++mismatches;
        if (!same_bits(r.records[t].grad_sq, ref.records[t].grad_sq)) ++mismatches;
      }
    }
    rep.entries.push_back({"identity-collapse", mismatches == 0,
                           static_cast<double>(mismatches), 0.0,
                           "loss/grad traces of all methods under identity "
                           "compression vs plain parallel SGD"});
  }

  {
    double worst = 0.0;
    const std::uint32_t period = resolve_period(cfg);
    for (const IterationRecord& rec : res.records) {
      if ((rec.t + 1) % period != 0) continue;
      worst = std::max(worst, rec.server_err_sq);
      worst = std::max(worst, rec.disagreement);
    }
    rep.entries.push_back({"sync-round-invariants", worst == 0.0, worst, 0.0,
                           "server memory and model disagreement at "
                           "model-averaging rounds must vanish exactly"});
  }

  rep.all_pass = true;
  for (const ContractEntry& e : rep.entries) rep.all_pass = rep.all_pass && e.pass;
  return rep;
}

std::string contract_report_json(const ContractReport& rep) {
  nlohmann::ordered_json j;
  j["entries"] = nlohmann::ordered_json::array();
  for (const ContractEntry& e : rep.entries) {
    nlohmann::ordered_json je;
    je["name"] = e.name;
    je["pass"] = e.pass;
    je["observed"] = e.observed;
    je["limit"] = e.limit;
    je["detail"] = e.detail;
    j["entries"].push_back(je);
  }
  j["all_pass"] = rep.all_pass;
  return j.dump(2) + "\n";
}

}  // namespace gradsim
