// Command-line front end for the distributed-optimization laboratory.
//
// Verbs:
//   run <config>            one experiment (repeats, CSV + JSON summaries)
//   sweep <config>          scaling sweep over worker counts
//   contracts               runtime invariant self-checks
//   measure-delta <spec>    empirical contraction factor of a compressor
//
// Exit codes: 0 success, 1 usage/configuration error, 2 runtime invariant
// failure or divergence.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradsim/compressor.hpp"
#include "gradsim/config.hpp"
#include "gradsim/metrics.hpp"
#include "gradsim/rng.hpp"
#include "gradsim/runner.hpp"

namespace {

struct CommonOverrides {
  std::string seed;
  std::string out;
  std::string fidelity;
  std::string threads;
  std::string timing;
  std::string repeats;
};

void add_overrides(CLI::App* cmd, CommonOverrides& ov) {
  cmd->add_option("--seed", ov.seed, "override the master seed");
  cmd->add_option("--out", ov.out, "override the output directory");
  cmd->add_option("--fidelity", ov.fidelity, "override fidelity: lossless|wire");
  cmd->add_option("--threads", ov.threads, "override gradient worker threads");
  cmd->add_option("--timing", ov.timing, "override timing column: wall|zero");
  cmd->add_option("--repeats", ov.repeats, "override the repeat count");
}

// Route overrides through the config parser so validation stays in one place.
gradsim::ExperimentConfig load_config(const std::string& path,
                                      const CommonOverrides& ov) {
  std::string text;
  {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (f == nullptr) throw gradsim::ConfigError("cannot open config file " + path);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    std::fclose(f);
  }
  auto append = [&text](const char* key, const std::string& value) {
    if (!value.empty()) text += "\n" + std::string(key) + " = " + value + "\n";
  };
  // Later duplicate keys are rejected by the parser, so strip any line the
  // override replaces first.
  auto drop_key = [&text](const char* key) {
    std::string out;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      std::string line = text.substr(start, end - start);
      std::size_t k = line.find_first_not_of(" \t");
      bool is_key = false;
      if (k != std::string::npos) {
        std::string rest = line.substr(k);
        std::string prefix = std::string(key);
        if (rest.compare(0, prefix.size(), prefix) == 0) {
          std::size_t after = k + prefix.size();
          std::size_t eq = line.find_first_not_of(" \t", after);
          is_key = eq != std::string::npos && line[eq] == '=';
        }
      }
      if (!is_key) {
        out += line;
        out += '\n';
      }
      if (end == text.size()) break;
      start = end + 1;
    }
    text = out;
  };
  if (!ov.seed.empty()) drop_key("seed");
  if (!ov.out.empty()) drop_key("out");
  if (!ov.fidelity.empty()) drop_key("fidelity");
  if (!ov.threads.empty()) drop_key("threads");
  if (!ov.timing.empty()) drop_key("timing");
  if (!ov.repeats.empty()) drop_key("repeats");
  append("seed", ov.seed);
  append("out", ov.out);
  append("fidelity", ov.fidelity);
  append("threads", ov.threads);
  append("timing", ov.timing);
  append("repeats", ov.repeats);
  try {
    return gradsim::parse_config_text(text);
  } catch (const gradsim::ConfigError& e) {
    throw gradsim::ConfigError(path + ": " + e.what());
  }
}

std::vector<std::uint32_t> parse_worker_list(const std::string& s) {
  std::vector<std::uint32_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    std::string tok = s.substr(start, end - start);
    if (tok.empty()) throw gradsim::ConfigError("empty entry in worker list");
    char* e = nullptr;
    unsigned long v = std::strtoul(tok.c_str(), &e, 10);
    if (e != tok.c_str() + tok.size() || v == 0 || v > 0xffffffffUL)
      throw gradsim::ConfigError("bad worker count \"" + tok + "\"");
    out.push_back(static_cast<std::uint32_t>(v));
    if (end == s.size()) break;
    start = end + 1;
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (f == nullptr) throw std::runtime_error("cannot write " + path.string());
  std::fwrite(body.data(), 1, body.size(), f);
  std::fclose(f);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulated worker/parameter-server optimization laboratory"};
  app.require_subcommand(1);

  std::string run_config, sweep_config, sweep_workers = "1,2,4,8";
  std::string md_spec;
  std::uint32_t md_dim = 1024;
  std::uint32_t md_samples = 20000;
  std::uint64_t contracts_seed = 2026;
  CommonOverrides run_ov, sweep_ov;

  CLI::App* run_cmd = app.add_subcommand("run", "execute one configured experiment");
  run_cmd->add_option("config", run_config, "experiment config file")->required();
  add_overrides(run_cmd, run_ov);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "scaling sweep over worker counts");
  sweep_cmd->add_option("config", sweep_config, "experiment config file")->required();
  sweep_cmd->add_option("--workers", sweep_workers,
                        "comma-separated worker counts (default 1,2,4,8)");
  add_overrides(sweep_cmd, sweep_ov);

  CLI::App* contracts_cmd =
      app.add_subcommand("contracts", "run the invariant self-check suite");
  contracts_cmd->add_option("--seed", contracts_seed, "suite seed");

  CLI::App* md_cmd = app.add_subcommand(
      "measure-delta", "estimate a compressor's contraction factor");
  md_cmd->add_option("spec", md_spec,
                     "compressor spec, e.g. topk:64 | randk:64 | sign | blocksign:8")
      ->required();
  md_cmd->add_option("--dim", md_dim, "probe dimension (default 1024)");
  md_cmd->add_option("--samples", md_samples, "Gaussian probes (default 20000)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd) {
      gradsim::ExperimentConfig cfg = load_config(run_config, run_ov);
      gradsim::ExperimentOutcome out = gradsim::run_experiment(cfg);
      std::printf("wrote %zu run(s) under %s\n", out.summaries.size(),
                  out.algorithm_dir.string().c_str());
      for (const gradsim::RunSummary& s : out.summaries) {
        std::printf("  seed %llu: final_loss %s%s\n",
                    static_cast<unsigned long long>(s.seed),
                    gradsim::format_double(s.final_loss).c_str(),
                    s.diverged ? "  [diverged]" : "");
      }
      if (out.any_diverged) {
        std::fprintf(stderr, "error: at least one repeat diverged\n");
        return 2;
      }
      return 0;
    }
    if (*sweep_cmd) {
      gradsim::ExperimentConfig cfg = load_config(sweep_config, sweep_ov);
      std::vector<std::uint32_t> counts = parse_worker_list(sweep_workers);
      gradsim::SweepReport rep = gradsim::run_speedup_sweep(cfg, counts);
      std::string body = gradsim::sweep_report_json(rep, cfg);
      std::filesystem::path path =
          std::filesystem::path(cfg.out_dir) / "speedup.json";
      write_text(path, body);
      std::printf("%s", body.c_str());
      std::printf("wrote %s\n", path.string().c_str());
      bool diverged = false;
      for (const gradsim::SweepRow& row : rep.rows) diverged = diverged || row.diverged;
      if (diverged || !rep.agree) {
        std::fprintf(stderr, "error: %s\n",
                     diverged ? "a sweep point diverged"
                              : "tail losses spread beyond tolerance");
        return 2;
      }
      return 0;
    }
    if (*contracts_cmd) {
      gradsim::ContractOptions opts;
      opts.seed = contracts_seed;
      gradsim::ContractReport rep = gradsim::run_contract_suite(opts);
      std::printf("%s", gradsim::contract_report_json(rep).c_str());
      return rep.all_pass ? 0 : 2;
    }
    if (*md_cmd) {
      gradsim::CompressorSpec spec = gradsim::parse_compressor(md_spec, md_dim);
      double got = gradsim::measure_delta(
          spec, md_dim, md_samples,
          gradsim::RngStream{1, 0, gradsim::StreamPurpose::compressor});
      std::printf("compressor %s  dim %u  samples %u  delta %s\n",
                  md_spec.c_str(), md_dim, md_samples,
                  gradsim::format_double(got).c_str());
      return 0;
    }
  } catch (const gradsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
