#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "deepalloc/features.hpp"
#include "deepalloc/policy_net.hpp"
#include "deepalloc/random.hpp"

namespace deepalloc {

enum class TrainObjective {
  kNetPerformance,  // prod(1 + r_t) - 1
  kSharpe,          // sqrt(252) * mean / std of step returns
  kSortino,         // sqrt(252) * mean / downside deviation
};

std::string_view objective_name(TrainObjective o);
TrainObjective parse_objective(std::string_view name);

struct TrainConfig {
  double learning_rate = 0.01;
  double noise_std = 0.002;
  int max_iterations = 500;
  int early_stop_patience = 50;
  double policy_prob = 0.9;  // probability of acting with the policy rather than at random
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  TrainObjective objective = TrainObjective::kNetPerformance;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Historical replay over a contiguous run of decision rows. Step i observes
/// `observations` entry i (row t_i) and earns `next_returns` row i (r_{t_i + 1}).
struct EpisodeWindow {
  ObservationBatch observations;
  Panel next_returns;
  std::vector<Date> dates;  // decision dates

  std::size_t steps() const { return observations.size(); }
};

/// Decision rows [first, last]; requires last + 1 < returns.rows().
EpisodeWindow make_episode_window(const ReturnFrame& returns, const VolFrame& vols,
                                  const SeriesFrame& context, const LagSet& lags,
                                  const LagSet& context_lags, std::size_t first, std::size_t last);

InputShape input_shape(const EpisodeWindow& window);

/// One rollout: (o_i, a_i, o_{i+1}) records plus the terminal reward.
struct EpisodeBuffer {
  tensor::Tensor asset;    // (N, 2m, L) observations as seen, noise included
  tensor::Tensor context;  // (N, p, Lc)
  Eigen::MatrixXd weights;      // (N, m) actions taken
  Eigen::VectorXd leverage;     // (N)
  std::vector<bool> random;     // action i was drawn at random
  Panel next_returns;           // (N, m) true returns, never perturbed
  double reward = 0.0;          // P_T / P_0 - 1

  std::size_t size() const { return random.size(); }
  void clear();
};

EpisodeBuffer run_episode(const PolicyParameters& params, const EpisodeWindow& window, double noise_std,
                          double policy_prob, Rng& rng);

struct ObjectiveResult {
  double objective = 0.0;  // J - L2
  double reward = 0.0;     // J
  double penalty = 0.0;    // L2
  std::vector<tensor::Tensor> gradient;  // one per parameter tensor, same order
};

/// Objective of a recorded rollout. Policy steps are differentiated; random
/// steps enter as constant factors.
ObjectiveResult buffer_objective(const PolicyParameters& params, const EpisodeBuffer& buffer,
                                 TrainObjective objective = TrainObjective::kNetPerformance);

/// Noise-free, policy-only objective over the window.
ObjectiveResult episode_objective(const PolicyParameters& params, const EpisodeWindow& window,
                                  TrainObjective objective = TrainObjective::kNetPerformance);

struct AdamState {
  std::vector<tensor::Tensor> m;
  std::vector<tensor::Tensor> v;
  long step = 0;

  static AdamState zeros_like(const PolicyParameters& params);
};

/// Ascent step: theta += lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(AdamState& state, PolicyParameters& params, const std::vector<tensor::Tensor>& grads,
               const TrainConfig& cfg);

struct TrainLogRow {
  int iteration = 0;
  double objective = 0.0;       // clean objective of the parameters entering this iteration
  double best_objective = 0.0;
  double gradient_norm = 0.0;
};

struct TrainedPolicy {
  PolicyParameters params;  // best seen, not last
  std::vector<TrainLogRow> log;
  int best_iteration = 0;
  double best_objective = 0.0;
  bool early_stopped = false;
};

TrainedPolicy train(const EpisodeWindow& window, const NetworkArch& arch, const TrainConfig& cfg);

std::string format_train_log(const std::vector<TrainLogRow>& log);

}  // namespace deepalloc
