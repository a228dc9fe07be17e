#pragma once

#include <cstdint>
#include <vector>

#include "gradsim/channel.hpp"
#include "gradsim/compressor.hpp"
#include "gradsim/metrics.hpp"
#include "gradsim/problem.hpp"
#include "gradsim/vector_ops.hpp"

namespace gradsim {

struct WorkerState {
  ModelVector x;
  ModelVector residual;  // worker error memory (worker-feedback baselines)
};

struct ServerState {
  ModelVector error;  // server error memory e_t
  std::uint64_t t = 0;
};

// Shadow trajectory of uncompressed parallel SGD driven by the very same
// stochastic gradients. Under lossless delivery the gap between the real mean
// model and this sequence equals eta * e_t exactly at every step; the update
// is xhat -= eta * mean_i g_t^i with the raw (pre-compression) gradients.
struct VirtualSequence {
  ModelVector xhat;
};

struct RoundOptions {
  double eta = 0.01;
  CompressorSpec worker_comp;
  CompressorSpec server_comp;
  // Sync period H: rounds with (t+1) % H == 0 skip compression and average
  // the worker models (server-compensated method only).
  std::uint32_t period = 1;
  std::uint32_t threads = 1;
  bool wall_timing = true;  // false: report round_ms = 0 for bit-stable output
};

std::vector<WorkerState> make_workers(const Problem& p);

// Elementwise mean of the worker models (ascending index, anchored).
ModelVector mean_model(const std::vector<WorkerState>& workers);

// One round of each algorithm. All return the record for the round, with
// loss/gradient/error columns evaluated at the post-round state. Gradient
// computation may be striped over opts.threads; every reduction runs in
// ascending worker order, so results do not depend on the thread count.

// Fully synchronous SGD on the mean gradient; dense frames both ways.
IterationRecord psgd_iteration(const Problem& p, std::vector<WorkerState>& workers,
                               ServerState& server, Channel& ch,
                               const RoundOptions& opts);

// Bidirectional compression with local immediate compensation: workers send
// C_w(g), the server holds error memory e, returns C_s(e + mean C_w(g)), and
// each worker folds its own residual g - C_w(g) back into its update in the
// same round. Every H-th round is uncompressed and additionally averages the
// worker models, which resets e to zero exactly.
IterationRecord liec_iteration(const Problem& p, std::vector<WorkerState>& workers,
                               ServerState& server, VirtualSequence* vs,
                               Channel& ch, const RoundOptions& opts);

// Worker-side error feedback: workers send C_w(g + e_i) and keep the
// residual; the server averages and broadcasts dense. All models identical.
IterationRecord memsgd_iteration(const Problem& p, std::vector<WorkerState>& workers,
                                 ServerState& server, Channel& ch,
                                 const RoundOptions& opts);

// Error feedback on both sides: worker side as above, server additionally
// compresses its average through its own memory.
IterationRecord doublesqueeze_iteration(const Problem& p,
                                        std::vector<WorkerState>& workers,
                                        ServerState& server, Channel& ch,
                                        const RoundOptions& opts);

// || xbar - xhat - eta * e ||_inf; the runner checks it against
// 1e-10 * max(1, ||xbar||_inf).
double virtual_check(const VirtualSequence& vs, const ModelVector& xbar,
                     const ModelVector& server_error, double eta);

inline constexpr double kVirtualGapTolerance = 1e-10;

// Monitor bounds. m_sq is the running max of the squared stochastic-gradient
// norms observed so far; delta the compressor contraction factor.
//
// Server error of the server-compensated method:
//   ||e_t||^2 <= 4 (1-delta) (2(2-delta) + delta^2 (N-1)) m_sq / (delta^2 N)
double server_error_bound(double delta, std::uint32_t workers, double m_sq);
// Model disagreement across workers:
//   mean_i ||xbar - x_i||^2 <= (1-delta)(1-delta+delta^2) eta^2 m_sq / delta^2
double disagreement_bound(double delta, double eta, double m_sq);
// Worker-feedback baselines' averaged error memories:
//   ||mean_i e_i||^2 <= 4 (1-delta) m_sq / delta^2
double memsgd_residual_bound(double delta, double m_sq);
//   ||mean_i e_i + e||^2 <= 8 (1-delta) m_sq / delta^2 * (1 + 16 / delta^2)
double doublesqueeze_residual_bound(double delta, double m_sq);

}  // namespace gradsim
