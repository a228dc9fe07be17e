#include "gradsim/algorithm.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "parallel.hpp"

namespace gradsim {

namespace {

using clock_t_ = std::chrono::steady_clock;

double elapsed_ms(clock_t_::time_point start) {
  return std::chrono::duration<double, std::milli>(clock_t_::now() - start).count();
}

void check_states(const Problem& p, std::vector<WorkerState>& workers,
                  ServerState& server) {
  if (workers.size() != p.workers()) {
    throw std::invalid_argument("iteration: worker count mismatch");
  }
  for (WorkerState& w : workers) {
    if (w.x.size() != p.dim()) {
      throw std::invalid_argument("iteration: model dimension mismatch");
    }
    if (w.residual.empty()) w.residual.assign(p.dim(), 0.0);
  }
  if (server.error.empty()) server.error.assign(p.dim(), 0.0);
  if (server.error.size() != p.dim()) {
    throw std::invalid_argument("iteration: server error dimension mismatch");
  }
}

// x -= eta * v. Every algorithm applies its step through this one helper so
// that runs which agree on v agree on the trajectory bitwise.
void apply_step(ModelVector& x, double eta, const ModelVector& v) {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] -= eta * v[j];
}

// Raw stochastic gradients for the round, striped over threads. Slot i is a
// pure function of (seed, i, t), so the schedule cannot affect the values.
std::vector<GradientSample> round_gradients(const Problem& p,
                                            const std::vector<WorkerState>& workers,
                                            std::uint64_t t, std::uint32_t threads) {
  std::vector<GradientSample> out(p.workers());
  detail::for_each_worker(p.workers(), threads, [&](std::uint32_t i) {
    out[i] = p.stoch_grad(i, workers[i].x, t);
  });
  return out;
}

double max_grad_sq(const std::vector<GradientSample>& gs) {
  double m = 0.0;
  for (const GradientSample& g : gs) m = std::max(m, sq_norm(g.grad));
  return m;
}

std::mt19937_64 worker_comp_engine(const Problem& p, std::uint32_t i, std::uint64_t t) {
  return RngStream{p.seed(), i, StreamPurpose::compressor}.engine_at(t);
}

std::mt19937_64 server_comp_engine(const Problem& p, std::uint64_t t) {
  return RngStream{p.seed(), kServerMember, StreamPurpose::compressor}.engine_at(t);
}

// Post-round metrics at the mean model.
void fill_state_metrics(IterationRecord& r, const Problem& p,
                        const std::vector<WorkerState>& workers) {
  const ModelVector xbar = mean_model(workers);
  r.loss = p.loss(xbar);
  r.grad_sq = sq_norm(p.full_grad(xbar));
  double acc = 0.0;
  for (const WorkerState& w : workers) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < xbar.size(); ++j) {
      const double d = xbar[j] - w.x[j];
      d2 += d * d;
    }
    acc += d2;
  }
  r.disagreement = acc / static_cast<double>(workers.size());
}

void fill_channel_bytes(IterationRecord& r, const Channel& ch) {
  r.uplink_bytes = ch.round_uplink();
  r.downlink_bytes = ch.round_downlink();
  r.avg_bytes = ch.round_model_bytes();
}

ModelVector mean_residual(const std::vector<WorkerState>& workers) {
  std::vector<const ModelVector*> ptrs(workers.size());
  for (std::size_t i = 0; i < workers.size(); ++i) ptrs[i] = &workers[i].residual;
  return mean_reduce(ptrs);
}

}  // namespace

std::vector<WorkerState> make_workers(const Problem& p) {
  std::vector<WorkerState> out(p.workers());
  for (WorkerState& w : out) {
    w.x.assign(p.dim(), 0.0);
    w.residual.assign(p.dim(), 0.0);
  }
  return out;
}

ModelVector mean_model(const std::vector<WorkerState>& workers) {
  std::vector<const ModelVector*> ptrs(workers.size());
  for (std::size_t i = 0; i < workers.size(); ++i) ptrs[i] = &workers[i].x;
  return mean_reduce(ptrs);
}

IterationRecord psgd_iteration(const Problem& p, std::vector<WorkerState>& workers,
                               ServerState& server, Channel& ch,
                               const RoundOptions& opts) {
  const auto start = clock_t_::now();
  check_states(p, workers, server);
  const std::uint64_t t = server.t;
  const std::uint32_t n = p.workers();
  ch.begin_round();

  auto gs = round_gradients(p, workers, t, opts.threads);
  std::vector<ModelVector> received(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const CompressedPayload up = ch.send(Direction::uplink, DensePayload{gs[i].grad});
    received[i] = decompress(up, p.dim());
  }
  const ModelVector avg = mean_reduce(received);
  const CompressedPayload down =
      ch.broadcast(Direction::downlink, DensePayload{avg}, n);
  const ModelVector dir = decompress(down, p.dim());
  for (std::uint32_t i = 0; i < n; ++i) apply_step(workers[i].x, opts.eta, dir);

  server.t = t + 1;
  IterationRecord r;
  r.t = t;
  r.max_grad_sq = max_grad_sq(gs);
  fill_state_metrics(r, p, workers);
  fill_channel_bytes(r, ch);
  r.round_ms = opts.wall_timing ? elapsed_ms(start) : 0.0;
  return r;
}

IterationRecord liec_iteration(const Problem& p, std::vector<WorkerState>& workers,
                               ServerState& server, VirtualSequence* vs,
                               Channel& ch, const RoundOptions& opts) {
  const auto start = clock_t_::now();
  check_states(p, workers, server);
  if (opts.period == 0) {
    throw std::invalid_argument("liec_iteration: period must be >= 1");
  }
  const std::uint64_t t = server.t;
  const std::uint32_t n = p.workers();
  const std::uint32_t d = p.dim();
  const bool sync = ((t + 1) % opts.period) == 0;
  ch.begin_round();

  auto gs = round_gradients(p, workers, t, opts.threads);

  if (!sync) {
    // Compressed round. Each worker keeps the residual of its own upload and
    // folds it into this round's step; nothing persists on the worker.
    std::vector<ModelVector> received(n);
    std::vector<ModelVector> local_residual(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      auto eng = worker_comp_engine(p, i, t);
      const CompressedPayload sent = compress(opts.worker_comp, gs[i].grad, &eng);
      const CompressedPayload up = ch.send(Direction::uplink, sent);
      received[i] = decompress(up, d);
      ModelVector& res = local_residual[i];
      res.resize(d);
      for (std::uint32_t j = 0; j < d; ++j) res[j] = gs[i].grad[j] - received[i][j];
    }
    ModelVector v = mean_reduce(received);
    for (std::uint32_t j = 0; j < d; ++j) v[j] += server.error[j];
    auto seng = server_comp_engine(p, t);
    const CompressedPayload packed = compress(opts.server_comp, v, &seng);
    const CompressedPayload down = ch.broadcast(Direction::downlink, packed, n);
    const ModelVector dir = decompress(down, d);
    for (std::uint32_t j = 0; j < d; ++j) server.error[j] = v[j] - dir[j];
    ModelVector step(d);
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < d; ++j) step[j] = dir[j] + local_residual[i][j];
      apply_step(workers[i].x, opts.eta, step);
    }
  } else {
    // Uncompressed round with model averaging; the server memory empties by
    // construction (it ships v in full), so it is reset to exact zero.
    std::vector<ModelVector> received(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const CompressedPayload up = ch.send(Direction::uplink, DensePayload{gs[i].grad});
      received[i] = decompress(up, d);
      ch.send_model(Direction::uplink, DensePayload{workers[i].x});
    }
    ModelVector v = mean_reduce(received);
    for (std::uint32_t j = 0; j < d; ++j) v[j] += server.error[j];
    const CompressedPayload down =
        ch.broadcast(Direction::downlink, DensePayload{v}, n);
    const ModelVector dir = decompress(down, d);
    const ModelVector xavg = mean_model(workers);
    const CompressedPayload davg =
        ch.broadcast_model(Direction::downlink, DensePayload{xavg}, n);
    const ModelVector anchor = decompress(davg, d);
    server.error.assign(d, 0.0);
    for (std::uint32_t i = 0; i < n; ++i) {
      ModelVector& x = workers[i].x;
      for (std::uint32_t j = 0; j < d; ++j) x[j] = anchor[j] - opts.eta * dir[j];
    }
  }

  if (vs != nullptr) {
    if (vs->xhat.size() != d) {
      throw std::invalid_argument("liec_iteration: virtual sequence dimension");
    }
    std::vector<const ModelVector*> raw(n);
    for (std::uint32_t i = 0; i < n; ++i) raw[i] = &gs[i].grad;
    apply_step(vs->xhat, opts.eta, mean_reduce(raw));
  }

  server.t = t + 1;
  IterationRecord r;
  r.t = t;
  r.max_grad_sq = max_grad_sq(gs);
  r.server_err_sq = sq_norm(server.error);
  r.err_sq = r.server_err_sq;
  fill_state_metrics(r, p, workers);
  fill_channel_bytes(r, ch);
  r.round_ms = opts.wall_timing ? elapsed_ms(start) : 0.0;
  return r;
}

namespace {

// Worker half shared by the worker-feedback baselines: send C_w(g + e_i),
// keep e_i <- (g + e_i) - delivered, return the decompressed uploads.
std::vector<ModelVector> feedback_uplink(const Problem& p,
                                         std::vector<WorkerState>& workers,
                                         const std::vector<GradientSample>& gs,
                                         std::uint64_t t, Channel& ch,
                                         const RoundOptions& opts) {
  const std::uint32_t n = p.workers();
  const std::uint32_t d = p.dim();
  std::vector<ModelVector> received(n);
  ModelVector acc(d);
  for (std::uint32_t i = 0; i < n; ++i) {
    ModelVector& res = workers[i].residual;
    for (std::uint32_t j = 0; j < d; ++j) acc[j] = gs[i].grad[j] + res[j];
    auto eng = worker_comp_engine(p, i, t);
    const CompressedPayload sent = compress(opts.worker_comp, acc, &eng);
    const CompressedPayload up = ch.send(Direction::uplink, sent);
    received[i] = decompress(up, d);
    for (std::uint32_t j = 0; j < d; ++j) res[j] = acc[j] - received[i][j];
  }
  return received;
}

}  // namespace

IterationRecord memsgd_iteration(const Problem& p, std::vector<WorkerState>& workers,
                                 ServerState& server, Channel& ch,
                                 const RoundOptions& opts) {
  const auto start = clock_t_::now();
  check_states(p, workers, server);
  const std::uint64_t t = server.t;
  const std::uint32_t n = p.workers();
  ch.begin_round();

  auto gs = round_gradients(p, workers, t, opts.threads);
  auto received = feedback_uplink(p, workers, gs, t, ch, opts);
  const ModelVector avg = mean_reduce(received);
  const CompressedPayload down =
      ch.broadcast(Direction::downlink, DensePayload{avg}, n);
  const ModelVector dir = decompress(down, p.dim());
  for (std::uint32_t i = 0; i < n; ++i) apply_step(workers[i].x, opts.eta, dir);

  server.t = t + 1;
  IterationRecord r;
  r.t = t;
  r.max_grad_sq = max_grad_sq(gs);
  r.worker_residual_sq = sq_norm(mean_residual(workers));
  r.err_sq = r.worker_residual_sq;
  fill_state_metrics(r, p, workers);
  fill_channel_bytes(r, ch);
  r.round_ms = opts.wall_timing ? elapsed_ms(start) : 0.0;
  return r;
}

IterationRecord doublesqueeze_iteration(const Problem& p,
                                        std::vector<WorkerState>& workers,
                                        ServerState& server, Channel& ch,
                                        const RoundOptions& opts) {
  const auto start = clock_t_::now();
  check_states(p, workers, server);
  const std::uint64_t t = server.t;
  const std::uint32_t n = p.workers();
  const std::uint32_t d = p.dim();
  ch.begin_round();

  auto gs = round_gradients(p, workers, t, opts.threads);
  auto received = feedback_uplink(p, workers, gs, t, ch, opts);
  ModelVector v = mean_reduce(received);
  for (std::uint32_t j = 0; j < d; ++j) v[j] += server.error[j];
  auto seng = server_comp_engine(p, t);
  const CompressedPayload packed = compress(opts.server_comp, v, &seng);
  const CompressedPayload down = ch.broadcast(Direction::downlink, packed, n);
  const ModelVector dir = decompress(down, d);
  for (std::uint32_t j = 0; j < d; ++j) server.error[j] = v[j] - dir[j];
  for (std::uint32_t i = 0; i < n; ++i) apply_step(workers[i].x, opts.eta, dir);

  server.t = t + 1;
  IterationRecord r;
  r.t = t;
  r.max_grad_sq = max_grad_sq(gs);
  r.server_err_sq = sq_norm(server.error);
  const ModelVector mres = mean_residual(workers);
  r.worker_residual_sq = sq_norm(mres);
  double combined = 0.0;
  for (std::uint32_t j = 0; j < d; ++j) {
    const double c = mres[j] + server.error[j];
    combined += c * c;
  }
  r.err_sq = combined;
  fill_state_metrics(r, p, workers);
  fill_channel_bytes(r, ch);
  r.round_ms = opts.wall_timing ? elapsed_ms(start) : 0.0;
  return r;
}

double virtual_check(const VirtualSequence& vs, const ModelVector& xbar,
                     const ModelVector& server_error, double eta) {
  if (vs.xhat.size() != xbar.size() || server_error.size() != xbar.size()) {
    throw std::invalid_argument("virtual_check: dimension mismatch");
  }
  double m = 0.0;
  for (std::size_t j = 0; j < xbar.size(); ++j) {
    m = std::max(m, std::abs(xbar[j] - vs.xhat[j] - eta * server_error[j]));
  }
  return m;
}

double server_error_bound(double delta, std::uint32_t workers, double m_sq) {
  const double n = static_cast<double>(workers);
  return 4.0 * (1.0 - delta) * (2.0 * (2.0 - delta) + delta * delta * (n - 1.0)) *
         m_sq / (delta * delta * n);
}

double disagreement_bound(double delta, double eta, double m_sq) {
  return (1.0 - delta) * (1.0 - delta + delta * delta) * eta * eta * m_sq /
         (delta * delta);
}

double memsgd_residual_bound(double delta, double m_sq) {
  return 4.0 * (1.0 - delta) * m_sq / (delta * delta);
}

double doublesqueeze_residual_bound(double delta, double m_sq) {
  return 8.0 * (1.0 - delta) * m_sq / (delta * delta) *
         (1.0 + 16.0 / (delta * delta));
}

}  // namespace gradsim
