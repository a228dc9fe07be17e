#include "gradsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace gradsim {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(std::string(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& hint) {
  throw ConfigError("invalid value \"" + value + "\" for key \"" + key +
                    "\": " + hint);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-') bad_value(key, v, "expected unsigned integer");
  char* end = nullptr;
  errno = 0;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size())
    bad_value(key, v, "expected unsigned integer");
  return static_cast<std::uint64_t>(x);
}

std::uint32_t parse_u32(const std::string& key, const std::string& v) {
  std::uint64_t x = parse_u64(key, v);
  if (x > 0xffffffffull) bad_value(key, v, "value out of range");
  return static_cast<std::uint32_t>(x);
}

double parse_f64(const std::string& key, const std::string& v) {
  if (v.empty()) bad_value(key, v, "expected number");
  char* end = nullptr;
  errno = 0;
  double x = std::strtod(v.c_str(), &end);
  if (errno != 0 || end != v.c_str() + v.size() || !std::isfinite(x))
    bad_value(key, v, "expected finite number");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "expected true|false");
}

ScheduleSpec parse_schedule(const std::string& key, const std::string& v) {
  auto parts = split(v, ':');
  if (parts[0] == "theory") {
    if (parts.size() != 1) bad_value(key, v, "theory takes no parameter");
    return ScheduleSpec{ScheduleKind::theory, 0.0};
  }
  if (parts[0] == "constant") {
    if (parts.size() != 2) bad_value(key, v, "expected constant:ETA");
    double eta = parse_f64(key, parts[1]);
    if (eta <= 0.0) bad_value(key, v, "step size must be positive");
    return ScheduleSpec{ScheduleKind::constant, eta};
  }
  bad_value(key, v, "expected constant:ETA or theory");
}

}  // namespace

const char* algorithm_name(AlgorithmKind a) {
  switch (a) {
    case AlgorithmKind::psgd: return "psgd";
    case AlgorithmKind::liec: return "liec";
    case AlgorithmKind::memsgd: return "memsgd";
    case AlgorithmKind::doublesqueeze: return "doublesqueeze";
  }
  throw std::logic_error("unreachable algorithm kind");
}

AlgorithmKind parse_algorithm(std::string_view s) {
  if (s == "psgd") return AlgorithmKind::psgd;
  if (s == "liec") return AlgorithmKind::liec;
  if (s == "memsgd") return AlgorithmKind::memsgd;
  if (s == "doublesqueeze") return AlgorithmKind::doublesqueeze;
  throw ConfigError("unknown algorithm \"" + std::string(s) +
                    "\": expected psgd|liec|memsgd|doublesqueeze");
}

CompressorSpec parse_compressor(std::string_view s, std::uint32_t dim) {
  const std::string key = "compressor";
  auto parts = split(s, ':');
  const std::string& head = parts[0];
  try {
    if (head == "identity") {
      if (parts.size() != 1) bad_value(key, std::string(s), "identity takes no parameter");
      return CompressorSpec::identity();
    }
    if (head == "topk" || head == "randk") {
      if (parts.size() != 2) bad_value(key, std::string(s), "expected " + head + ":K");
      std::uint32_t k = parse_u32(key, parts[1]);
      return head == "topk" ? CompressorSpec::top_k(k, dim)
                            : CompressorSpec::random_k(k, dim);
    }
    if (head == "sign") {
      if (parts.size() > 2) bad_value(key, std::string(s), "expected sign[:DELTA]");
      double delta = parts.size() == 2 ? parse_f64(key, parts[1]) : kDefaultSignDelta;
      CompressorSpec spec = CompressorSpec::sign(delta);
      spec.validate(dim);
      return spec;
    }
    if (head == "blocksign") {
      if (parts.size() < 2 || parts.size() > 3)
        bad_value(key, std::string(s), "expected blocksign:B[:DELTA]");
      std::uint32_t blocks = parse_u32(key, parts[1]);
      double delta = parts.size() == 3 ? parse_f64(key, parts[2]) : kDefaultSignDelta;
      CompressorSpec spec = CompressorSpec::blockwise_sign(blocks, delta);
      spec.validate(dim);
      return spec;
    }
  } catch (const std::invalid_argument& e) {
    bad_value(key, std::string(s), e.what());
  }
  bad_value(key, std::string(s),
            "expected identity|topk:K|randk:K|sign[:DELTA]|blocksign:B[:DELTA]");
}

ExperimentConfig parse_config_text(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value, got \"" + t + "\"");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw ConfigError("duplicate key \"" + key + "\"");
  }

  auto take = [&kv](const char* key) -> std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  if (std::string* v = take("schema_version")) {
    if (*v != "1") bad_value("schema_version", *v, "this build understands version 1");
  }

  ExperimentConfig cfg;
  if (std::string* v = take("algorithm")) cfg.algorithm = parse_algorithm(*v);
  if (std::string* v = take("problem")) {
    if (*v == "quadratic") cfg.problem = ProblemKind::quadratic;
    else if (*v == "logistic") cfg.problem = ProblemKind::logistic;
    else bad_value("problem", *v, "expected quadratic|logistic");
  }
  if (std::string* v = take("dim")) {
    cfg.dim = parse_u32("dim", *v);
    if (cfg.dim == 0) bad_value("dim", *v, "dimension must be positive");
  }
  if (std::string* v = take("workers")) {
    cfg.workers = parse_u32("workers", *v);
    if (cfg.workers == 0) bad_value("workers", *v, "need at least one worker");
  }
  if (std::string* v = take("heterogeneous"))
    cfg.heterogeneous = parse_bool("heterogeneous", *v);
  if (std::string* v = take("sigma")) {
    cfg.sigma = parse_f64("sigma", *v);
    if (cfg.sigma < 0.0) bad_value("sigma", *v, "noise level must be >= 0");
  }
  if (std::string* v = take("condition")) {
    cfg.condition = parse_f64("condition", *v);
    if (cfg.condition < 1.0) bad_value("condition", *v, "condition number must be >= 1");
  }
  if (std::string* v = take("samples_per_worker")) {
    cfg.samples_per_worker = parse_u32("samples_per_worker", *v);
    if (cfg.samples_per_worker == 0)
      bad_value("samples_per_worker", *v, "need at least one sample");
  }

  // "compressor" sets both ends; per-side keys override it.
  bool have_shared = false;
  if (std::string* v = take("compressor")) {
    cfg.comp_worker = parse_compressor(*v, cfg.dim);
    cfg.comp_server = cfg.comp_worker;
    have_shared = true;
  }
  if (std::string* v = take("compressor.worker"))
    cfg.comp_worker = parse_compressor(*v, cfg.dim);
  else if (!have_shared)
    cfg.comp_worker = CompressorSpec::identity();
  if (std::string* v = take("compressor.server"))
    cfg.comp_server = parse_compressor(*v, cfg.dim);
  else if (!have_shared)
    cfg.comp_server = CompressorSpec::identity();

  if (std::string* v = take("schedule")) cfg.schedule = parse_schedule("schedule", *v);
  if (std::string* v = take("period")) cfg.period = parse_u32("period", *v);
  if (std::string* v = take("iterations")) {
    cfg.iterations = parse_u64("iterations", *v);
    if (cfg.iterations == 0) bad_value("iterations", *v, "need at least one iteration");
  }
  if (std::string* v = take("seed")) cfg.seed = parse_u64("seed", *v);
  if (std::string* v = take("repeats")) {
    cfg.repeats = parse_u32("repeats", *v);
    if (cfg.repeats == 0) bad_value("repeats", *v, "need at least one repeat");
  }
  if (std::string* v = take("fidelity")) {
    if (*v == "lossless") cfg.fidelity = Fidelity::lossless;
    else if (*v == "wire") cfg.fidelity = Fidelity::wire;
    else bad_value("fidelity", *v, "expected lossless|wire");
  }
  if (std::string* v = take("out")) cfg.out_dir = *v;
  if (std::string* v = take("threads")) {
    cfg.threads = parse_u32("threads", *v);
    if (cfg.threads == 0) bad_value("threads", *v, "need at least one thread");
  }
  if (std::string* v = take("timing")) {
    if (*v == "wall") cfg.wall_timing = true;
    else if (*v == "zero") cfg.wall_timing = false;
    else bad_value("timing", *v, "expected wall|zero");
  }
  if (std::string* v = take("sweep_tolerance")) {
    cfg.sweep_tolerance = parse_f64("sweep_tolerance", *v);
    if (cfg.sweep_tolerance <= 0.0)
      bad_value("sweep_tolerance", *v, "tolerance must be positive");
  }

  static const char* known[] = {
      "schema_version", "algorithm", "problem", "dim", "workers",
      "heterogeneous", "sigma", "condition", "samples_per_worker",
      "compressor", "compressor.worker", "compressor.server", "schedule",
      "period", "iterations", "seed", "repeats", "fidelity", "out",
      "threads", "timing", "sweep_tolerance"};
  for (const auto& [key, value] : kv) {
    (void)value;
    if (std::find_if(std::begin(known), std::end(known),
                     [&key](const char* k) { return key == k; }) == std::end(known))
      throw ConfigError("unknown key \"" + key + "\"");
  }

  // Surface impossible compressor/dim combinations at parse time.
  try {
    cfg.comp_worker.validate(cfg.dim);
    cfg.comp_server.validate(cfg.dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("compressor incompatible with dim: ") + e.what());
  }

  resolve_period(cfg);  // fail fast when the period cannot be defaulted
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::uint32_t resolve_period(const ExperimentConfig& cfg) {
  if (cfg.algorithm != AlgorithmKind::liec) return 1;
  if (cfg.period != 0) return cfg.period;
  const CompressorSpec& c = cfg.comp_worker;
  if (c.kind == CompressorKind::identity || c.kind == CompressorKind::random_k) {
    double delta = c.nominal_delta;
    if (delta <= 0.0 || delta > 1.0)
      throw ConfigError("cannot default period: compression ratio out of range");
    return static_cast<std::uint32_t>(std::max(1.0, std::floor(1.0 / delta)));
  }
  throw ConfigError(
      "period must be set explicitly for compressor \"" +
      std::string(compressor_kind_name(c.kind)) +
      "\" (no exact compression ratio to derive it from)");
}

}  // namespace gradsim
