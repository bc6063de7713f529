#include "deepalloc/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"

namespace deepalloc {

namespace {

using tensor::Shape;
using tensor::Tensor;

constexpr double kDaysPerYear = 252.0;
constexpr double kRatioFloor = 1e-12;  // keeps sqrt differentiable on flat windows

Tensor to_tensor(const Eigen::VectorXd& v) {
  return Tensor(Shape{static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

ad::Var objective_on_tape(ad::Var step, TrainObjective objective) {
  switch (objective) {
    case TrainObjective::kNetPerformance:
      return ad::add_scalar(ad::product(ad::add_scalar(step, 1.0)), -1.0);
    case TrainObjective::kSharpe: {
      const auto mean = ad::mean(step);
      const auto var = ad::sub(ad::mean(ad::square(step)), ad::square(mean));
      const auto sd = ad::sqrt(ad::add_scalar(ad::relu(var), kRatioFloor));
      return ad::scale(ad::div(mean, sd), std::sqrt(kDaysPerYear));
    }
    case TrainObjective::kSortino: {
      const auto mean = ad::mean(step);
      const auto down = ad::relu(ad::scale(step, -1.0));
      const auto dd = ad::sqrt(ad::add_scalar(ad::mean(ad::square(down)), kRatioFloor));
      return ad::scale(ad::div(mean, dd), std::sqrt(kDaysPerYear));
    }
  }
  throw UsageError("unknown objective");
}

double objective_value(const Eigen::VectorXd& step, TrainObjective objective) {
  const auto n = static_cast<double>(step.size());
  switch (objective) {
    case TrainObjective::kNetPerformance: {
      double p = 1.0;
      for (double r : step) p *= 1.0 + r;
      return p - 1.0;
    }
    case TrainObjective::kSharpe: {
      const double mean = step.sum() / n;
      const double var = std::max(step.squaredNorm() / n - mean * mean, 0.0);
      return std::sqrt(kDaysPerYear) * mean / std::sqrt(var + kRatioFloor);
    }
    case TrainObjective::kSortino: {
      const double mean = step.sum() / n;
      const double dd = step.cwiseMin(0.0).squaredNorm() / n;
      return std::sqrt(kDaysPerYear) * mean / std::sqrt(dd + kRatioFloor);
    }
  }
  throw UsageError("unknown objective");
}

Eigen::VectorXd step_returns(const Eigen::MatrixXd& weights, const Eigen::VectorXd& leverage,
                             const Panel& next_returns) {
  return leverage.cwiseProduct(weights.cwiseProduct(next_returns).rowwise().sum());
}

bool all_finite(const std::vector<Tensor>& ts) {
  for (const auto& t : ts) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double gradient_norm(const std::vector<Tensor>& ts) {
  double s = 0.0;
  for (const auto& t : ts) {
    for (double v : t.values()) s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace

std::string_view objective_name(TrainObjective o) {
  switch (o) {
    case TrainObjective::kNetPerformance: return "net";
    case TrainObjective::kSharpe: return "sharpe";
    case TrainObjective::kSortino: return "sortino";
  }
  return "net";
}

TrainObjective parse_objective(std::string_view name) {
  if (name == "net") return TrainObjective::kNetPerformance;
  if (name == "sharpe") return TrainObjective::kSharpe;
  if (name == "sortino") return TrainObjective::kSortino;
  throw UsageError(fmt::format("unknown objective '{}' (valid: net, sharpe, sortino)", name));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(noise_std >= 0.0)) throw UsageError("noise std must be >= 0");
  if (max_iterations < 1) throw UsageError("max iterations must be >= 1");
  if (early_stop_patience < 1) throw UsageError("early stop patience must be >= 1");
  if (!(policy_prob >= 0.0 && policy_prob <= 1.0)) throw UsageError("policy probability must be in [0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw UsageError("adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw UsageError("adam epsilon must be > 0");
}

EpisodeWindow make_episode_window(const ReturnFrame& returns, const VolFrame& vols,
                                  const SeriesFrame& context, const LagSet& lags,
                                  const LagSet& context_lags, std::size_t first, std::size_t last) {
  if (first > last || last + 1 >= returns.rows()) {
    throw DataError(DataError::Kind::kInsufficientHistory,
                    fmt::format("window too short: decision rows [{}, {}] need returns through row {} "
                                "but the frame has {} rows",
                                first, last, last + 1, returns.rows()));
  }
  EpisodeWindow w;
  w.observations = build_observation_batch(returns, vols, context, lags, context_lags, first, last);
  w.next_returns = returns.returns.middleRows(static_cast<Eigen::Index>(first + 1),
                                              static_cast<Eigen::Index>(last - first + 1));
  w.dates.assign(returns.dates.begin() + static_cast<std::ptrdiff_t>(first),
                 returns.dates.begin() + static_cast<std::ptrdiff_t>(last + 1));
  return w;
}

InputShape input_shape(const EpisodeWindow& window) {
  const auto& a = window.observations.asset.shape();
  const auto& c = window.observations.context.shape();
  return InputShape{a.at(1) / 2, a.at(2), c.at(1), c.at(2)};
}

void EpisodeBuffer::clear() {
  asset = Tensor();
  context = Tensor();
  weights.resize(0, 0);
  leverage.resize(0);
  random.clear();
  next_returns.resize(0, 0);
  reward = 0.0;
}

EpisodeBuffer run_episode(const PolicyParameters& params, const EpisodeWindow& window, double noise_std,
                          double policy_prob, Rng& rng) {
  const std::size_t n = window.steps();
  if (n == 0) throw DataError(DataError::Kind::kInsufficientHistory, "window too short: no observations");
  const std::size_t m = params.input.assets;
  EpisodeBuffer buf;
  buf.asset = window.observations.asset;
  buf.context = window.observations.context;
  buf.next_returns = window.next_returns;
  buf.random.assign(n, false);
  buf.weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  buf.leverage.resize(static_cast<Eigen::Index>(n));

  const std::size_t asset_stride = buf.asset.size() / n;
  const std::size_t context_stride = n > 0 ? buf.context.size() / n : 0;
  const std::size_t lags = params.input.lags;
  std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::VectorXd random_w(static_cast<Eigen::Index>(m));

  for (std::size_t i = 0; i < n; ++i) {
    // o_i for i >= 1 is the previous step's o', which is stored perturbed.
    if (i > 0 && noise_std > 0.0) {
      double* a = buf.asset.data() + i * asset_stride;
      for (std::size_t k = 0; k < asset_stride; ++k) {
        a[k] += noise(rng);
        if (k >= m * lags) a[k] = std::max(a[k], 0.0);  // volatility channel
      }
      double* c = buf.context.data() + i * context_stride;
      for (std::size_t k = 0; k < context_stride; ++k) c[k] += noise(rng);
    }
    if (policy_prob < 1.0 && uni(rng) >= policy_prob) {
      buf.random[i] = true;
      sample_simplex(rng, random_w);
      buf.weights.row(static_cast<Eigen::Index>(i)) = random_w.transpose();
      buf.leverage(static_cast<Eigen::Index>(i)) = uni(rng) * params.arch.max_leverage;
    }
  }

  const auto policy = forward_batch(params, buf.asset, buf.context);
  for (std::size_t i = 0; i < n; ++i) {
    if (buf.random[i]) continue;
    const auto r = static_cast<Eigen::Index>(i);
    buf.weights.row(r) = policy.weights.row(r);
    buf.leverage(r) = policy.leverage(r);
  }
  buf.reward = objective_value(step_returns(buf.weights, buf.leverage, buf.next_returns),
                               TrainObjective::kNetPerformance);
  return buf;
}

ObjectiveResult buffer_objective(const PolicyParameters& params, const EpisodeBuffer& buffer,
                                 TrainObjective objective) {
  const std::size_t n = buffer.size();
  if (n == 0) throw DataError(DataError::Kind::kInsufficientHistory, "window too short: empty episode");
  const std::size_t m = params.input.assets;

  ad::Tape tape;
  const auto vars = bind_parameters(tape, params);
  const auto out = forward(params, vars, tape.constant(buffer.asset), tape.constant(buffer.context));

  Tensor returns(Shape{n, m});
  Eigen::Map<Panel>(returns.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) =
      buffer.next_returns;
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const Eigen::VectorXd taken = step_returns(buffer.weights, buffer.leverage, buffer.next_returns);
  for (std::size_t i = 0; i < n; ++i) {
    if (!buffer.random[i]) continue;
    mask(static_cast<Eigen::Index>(i)) = 0.0;
    fixed(static_cast<Eigen::Index>(i)) = taken(static_cast<Eigen::Index>(i));
  }

  const auto gross = ad::sum_last(ad::mul(out.weights, tape.constant(returns)));
  const auto policy_step = ad::mul(out.leverage, gross);
  const auto step = ad::add(ad::mul(policy_step, tape.constant(to_tensor(mask))), tape.constant(to_tensor(fixed)));
  const auto reward = objective_on_tape(step, objective);
  const auto penalty = l2_penalty(params, vars);
  const auto total = ad::sub(reward, penalty);
  tape.backward(total);

  ObjectiveResult res;
  res.objective = total.value().item();
  res.reward = reward.value().item();
  res.penalty = penalty.value().item();
  res.gradient.reserve(vars.size());
  for (const auto& v : vars) res.gradient.push_back(tape.grad(v));
  return res;
}

ObjectiveResult episode_objective(const PolicyParameters& params, const EpisodeWindow& window,
                                  TrainObjective objective) {
  Rng unused(0);
  return buffer_objective(params, run_episode(params, window, 0.0, 1.0, unused), objective);
}

AdamState AdamState::zeros_like(const PolicyParameters& params) {
  AdamState s;
  for (const auto& [_, t] : params.tensors) {
    s.m.emplace_back(t.shape(), 0.0);
    s.v.emplace_back(t.shape(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, PolicyParameters& params, const std::vector<Tensor>& grads,
               const TrainConfig& cfg) {
  if (state.m.size() != params.tensors.size() || grads.size() != params.tensors.size()) {
    throw UsageError("adam state, gradients and parameters disagree in count");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    auto& theta = params.tensors[k].second;
    if (grads[k].shape() != theta.shape() || state.m[k].shape() != theta.shape()) {
      throw UsageError(fmt::format("adam shape mismatch on '{}'", params.tensors[k].first));
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grads[k][i];
      state.m[k][i] = cfg.beta1 * state.m[k][i] + (1.0 - cfg.beta1) * g;
      state.v[k][i] = cfg.beta2 * state.v[k][i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = state.m[k][i] / c1;
      const double vhat = state.v[k][i] / c2;
      theta[i] += cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

TrainedPolicy train(const EpisodeWindow& window, const NetworkArch& arch, const TrainConfig& cfg) {
  cfg.validate();
  if (window.steps() == 0) throw DataError(DataError::Kind::kInsufficientHistory, "window too short");
  PolicyParameters params = init_network(arch, input_shape(window), derive_seed(cfg.seed, 1));
  Rng rng(derive_seed(cfg.seed, 2));
  AdamState adam = AdamState::zeros_like(params);
  const bool clean_rollouts = cfg.noise_std == 0.0 && cfg.policy_prob == 1.0;

  TrainedPolicy result;
  result.params = params;
  result.best_objective = -std::numeric_limits<double>::infinity();
  EpisodeBuffer buffer;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    buffer.clear();
    buffer = run_episode(params, window, cfg.noise_std, cfg.policy_prob, rng);
    const auto step = buffer_objective(params, buffer, cfg.objective);
    const double clean = clean_rollouts ? step.objective
                                        : episode_objective(params, window, cfg.objective).objective;
    if (!std::isfinite(clean) || !std::isfinite(step.objective) || !all_finite(step.gradient)) {
      throw NumericError(fmt::format(
          "training diverged at iteration {}: non-finite objective or gradient (objective {}, "
          "learning rate {})",
          it, clean, cfg.learning_rate));
    }
    if (clean > result.best_objective) {
      result.best_objective = clean;
      result.best_iteration = it;
      result.params = params;
    }
    const double gnorm = gradient_norm(step.gradient);
    result.log.push_back({it, clean, result.best_objective, gnorm});
    adam_step(adam, params, step.gradient, cfg);
    if (it - result.best_iteration >= cfg.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

std::string format_train_log(const std::vector<TrainLogRow>& log) {
  std::string out = "iteration,objective,best_objective,gradient_norm\n";
  for (const auto& r : log) {
    out += fmt::format("{},{},{},{}\n", r.iteration, io::format_number(r.objective),
                       io::format_number(r.best_objective), io::format_number(r.gradient_norm));
  }
  return out;
}

}  // namespace deepalloc
