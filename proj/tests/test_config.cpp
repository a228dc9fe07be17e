#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "gradsim/config.hpp"

using namespace gradsim;

namespace {

// Every key the grammar accepts, each set away from its default.
constexpr const char* kFullConfig = R"(
schema_version = 1
algorithm = doublesqueeze     # trailing comment
problem = logistic
dim = 40
workers = 3
heterogeneous = false
sigma = 0.5
condition = 4.5
samples_per_worker = 17

compressor.worker = topk:5
compressor.server = randk:8
schedule = constant:0.125
period = 6
iterations = 250
seed = 99
repeats = 2
fidelity = wire
out = /tmp/somewhere
threads = 4
timing = zero
sweep_tolerance = 0.35
)";

bool mentions(const ConfigError& e, const std::string& needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("full config text sets every field") {
  ExperimentConfig cfg = parse_config_text(kFullConfig);
  CHECK(cfg.algorithm == AlgorithmKind::doublesqueeze);
  CHECK(cfg.problem == ProblemKind::logistic);
  CHECK(cfg.dim == 40);
  CHECK(cfg.workers == 3);
  CHECK(cfg.heterogeneous == false);
  CHECK(cfg.sigma == 0.5);
  CHECK(cfg.condition == 4.5);
  CHECK(cfg.samples_per_worker == 17);
  CHECK(cfg.comp_worker.kind == CompressorKind::top_k);
  CHECK(cfg.comp_worker.k == 5);
  CHECK(cfg.comp_worker.nominal_delta == doctest::Approx(5.0 / 40.0));
  CHECK(cfg.comp_server.kind == CompressorKind::random_k);
  CHECK(cfg.comp_server.k == 8);
  CHECK(cfg.schedule.kind == ScheduleKind::constant);
  CHECK(cfg.schedule.eta == 0.125);
  CHECK(cfg.period == 6);
  CHECK(cfg.iterations == 250);
  CHECK(cfg.seed == 99);
  CHECK(cfg.repeats == 2);
  CHECK(cfg.fidelity == Fidelity::wire);
  CHECK(cfg.out_dir == "/tmp/somewhere");
  CHECK(cfg.threads == 4);
  CHECK(cfg.wall_timing == false);
  CHECK(cfg.sweep_tolerance == 0.35);
}

TEST_CASE("empty text yields the documented defaults") {
  ExperimentConfig cfg = parse_config_text("");
  CHECK(cfg.algorithm == AlgorithmKind::liec);
  CHECK(cfg.problem == ProblemKind::quadratic);
  CHECK(cfg.dim == 100);
  CHECK(cfg.workers == 8);
  CHECK(cfg.heterogeneous == true);
  CHECK(cfg.sigma == 1.0);
  CHECK(cfg.condition == 10.0);
  CHECK(cfg.comp_worker.kind == CompressorKind::identity);
  CHECK(cfg.comp_server.kind == CompressorKind::identity);
  CHECK(cfg.schedule.kind == ScheduleKind::constant);
  CHECK(cfg.schedule.eta == 0.01);
  CHECK(cfg.period == 0);
  CHECK(resolve_period(cfg) == 1);  // identity: floor(1/1)
  CHECK(cfg.iterations == 1000);
  CHECK(cfg.seed == 1);
  CHECK(cfg.repeats == 1);
  CHECK(cfg.fidelity == Fidelity::lossless);
  CHECK(cfg.threads == 1);
  CHECK(cfg.wall_timing == true);
  CHECK(cfg.sweep_tolerance == 0.2);
}

TEST_CASE("comments and blank lines are ignored") {
  ExperimentConfig cfg = parse_config_text(
      "# leading comment\n"
      "\n"
      "   \t  \n"
      "dim = 7   # trailing\n"
      "#workers = 99\n");
  CHECK(cfg.dim == 7);
  CHECK(cfg.workers == 8);  // commented-out line must not apply
}

TEST_CASE("unknown key is a hard error naming the key") {
  CHECK_THROWS_WITH_AS(parse_config_text("learning_rate = 0.1\n"),
                       doctest::Contains("learning_rate"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("dim = 4\ncompresor = identity\n"),
                       doctest::Contains("compresor"), ConfigError);
}

TEST_CASE("duplicate key is rejected") {
  try {
    parse_config_text("dim = 4\ndim = 5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "duplicate"));
    CHECK(mentions(e, "dim"));
  }
}

TEST_CASE("malformed line reports its number") {
  try {
    parse_config_text("dim = 4\nthis is not a pair\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "line 2"));
  }
}

TEST_CASE("bad values name the offending key") {
  struct Case {
    const char* text;
    const char* key;
  };
  const Case cases[] = {
      {"dim = zero\n", "dim"},
      {"dim = 0\n", "dim"},
      {"workers = 0\n", "workers"},
      {"workers = -3\n", "workers"},
      {"sigma = -1\n", "sigma"},
      {"sigma = nan\n", "sigma"},
      {"condition = 0.5\n", "condition"},
      {"samples_per_worker = 0\n", "samples_per_worker"},
      {"heterogeneous = maybe\n", "heterogeneous"},
      {"schedule = constant\n", "schedule"},
      {"schedule = constant:-1\n", "schedule"},
      {"schedule = theory:3\n", "schedule"},
      {"schedule = linear:0.1\n", "schedule"},
      {"iterations = 0\n", "iterations"},
      {"repeats = 0\n", "repeats"},
      {"fidelity = float16\n", "fidelity"},
      {"threads = 0\n", "threads"},
      {"timing = fast\n", "timing"},
      {"sweep_tolerance = 0\n", "sweep_tolerance"},
      {"algorithm = sgd\n", "sgd"},  // message echoes the unknown name
  };
  for (const Case& c : cases) {
    CAPTURE(c.text);
    try {
      parse_config_text(c.text);
      FAIL_CHECK("expected ConfigError for: " << c.text);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(mentions(e, c.key), e.what());
    }
  }
}

TEST_CASE("schema_version other than 1 is refused") {
  CHECK_THROWS_WITH_AS(parse_config_text("schema_version = 2\n"),
                       doctest::Contains("schema_version"), ConfigError);
  CHECK_NOTHROW(parse_config_text("schema_version = 1\n"));
}

TEST_CASE("parse_compressor covers every operator form") {
  CompressorSpec s = parse_compressor("identity", 10);
  CHECK(s.kind == CompressorKind::identity);
  CHECK(s.nominal_delta == 1.0);

  s = parse_compressor("topk:5", 10);
  CHECK(s.kind == CompressorKind::top_k);
  CHECK(s.k == 5);
  CHECK(s.nominal_delta == 0.5);

  s = parse_compressor("randk:3", 12);
  CHECK(s.kind == CompressorKind::random_k);
  CHECK(s.k == 3);
  CHECK(s.nominal_delta == 0.25);

  s = parse_compressor("sign", 10);
  CHECK(s.kind == CompressorKind::sign);
  CHECK(s.num_blocks == 1);
  CHECK(s.nominal_delta == kDefaultSignDelta);

  s = parse_compressor("sign:0.5", 10);
  CHECK(s.nominal_delta == 0.5);

  s = parse_compressor("blocksign:4", 10);
  CHECK(s.kind == CompressorKind::blockwise_sign);
  CHECK(s.num_blocks == 4);
  CHECK(s.nominal_delta == kDefaultSignDelta);

  s = parse_compressor("blocksign:4:0.6", 10);
  CHECK(s.num_blocks == 4);
  CHECK(s.nominal_delta == 0.6);
}

TEST_CASE("parse_compressor rejects malformed or impossible specs") {
  const char* bad[] = {
      "", "identity:1", "topk", "topk:0", "topk:11", "topk:x",
      "randk:", "randk:0", "randk:99", "sign:0", "sign:1.5", "sign:0.2:0.3",
      "blocksign", "blocksign:0", "blocksign:11", "blocksign:2:0", "gzip",
  };
  for (const char* s : bad) {
    CAPTURE(s);
    CHECK_THROWS_AS(parse_compressor(s, 10), ConfigError);
  }
}

TEST_CASE("shared compressor key sets both ends; per-side keys override") {
  ExperimentConfig cfg = parse_config_text("dim = 20\ncompressor = randk:5\n");
  CHECK(cfg.comp_worker.kind == CompressorKind::random_k);
  CHECK(cfg.comp_server.kind == CompressorKind::random_k);
  CHECK(cfg.comp_server.k == 5);

  cfg = parse_config_text(
      "dim = 20\ncompressor = randk:5\ncompressor.server = topk:2\n");
  CHECK(cfg.comp_worker.kind == CompressorKind::random_k);
  CHECK(cfg.comp_worker.k == 5);
  CHECK(cfg.comp_server.kind == CompressorKind::top_k);
  CHECK(cfg.comp_server.k == 2);
}

TEST_CASE("compressor incompatible with dim fails at parse time") {
  // k larger than the model dimension.
  CHECK_THROWS_AS(parse_config_text("dim = 4\ncompressor = topk:9\n"),
                  ConfigError);
  // More sign blocks than coordinates.
  CHECK_THROWS_AS(parse_config_text("dim = 4\ncompressor = blocksign:5\n"),
                  ConfigError);
}

TEST_CASE("resolve_period defaults and failure modes") {
  // Exact-ratio operator: floor(1 / (16/64)) = 4.
  ExperimentConfig cfg =
      parse_config_text("algorithm = liec\ndim = 64\ncompressor = randk:16\n");
  CHECK(resolve_period(cfg) == 4);

  // Configured period always wins.
  cfg = parse_config_text(
      "algorithm = liec\ndim = 64\ncompressor = randk:16\nperiod = 9\n");
  CHECK(resolve_period(cfg) == 9);

  // Non-periodic algorithms synchronize every round regardless.
  cfg = parse_config_text("algorithm = memsgd\ndim = 64\ncompressor = topk:4\n");
  CHECK(resolve_period(cfg) == 1);

  // Operators without an exact ratio cannot default the period, and this
  // surfaces already at parse time.
  CHECK_THROWS_WITH_AS(
      parse_config_text("algorithm = liec\ndim = 64\ncompressor = topk:4\n"),
      doctest::Contains("period"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text("algorithm = liec\ndim = 64\ncompressor = sign\n"),
      ConfigError);
  // ...but an explicit period makes the same combination fine.
  CHECK_NOTHROW(parse_config_text(
      "algorithm = liec\ndim = 64\ncompressor = topk:4\nperiod = 8\n"));
}

TEST_CASE("parse_config_file reads files and prefixes errors with the path") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "gradsim_cfg_test";
  fs::create_directories(dir);

  fs::path good = dir / "good.cfg";
  {
    std::ofstream out(good);
    out << "dim = 6\nworkers = 2\n";
  }
  ExperimentConfig cfg = parse_config_file(good);
  CHECK(cfg.dim == 6);
  CHECK(cfg.workers == 2);

  fs::path bad = dir / "bad.cfg";
  {
    std::ofstream out(bad);
    out << "bogus_key = 1\n";
  }
  try {
    parse_config_file(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, bad.string()));
    CHECK(mentions(e, "bogus_key"));
  }

  CHECK_THROWS_AS(parse_config_file(dir / "does_not_exist.cfg"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("algorithm names round-trip through the parser") {
  for (AlgorithmKind a : {AlgorithmKind::psgd, AlgorithmKind::liec,
                          AlgorithmKind::memsgd, AlgorithmKind::doublesqueeze}) {
    CHECK(parse_algorithm(algorithm_name(a)) == a);
  }
}
