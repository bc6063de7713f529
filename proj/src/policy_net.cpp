#include "deepalloc/policy_net.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <charconv>
#include <cmath>
#include <random>

#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"

namespace deepalloc {

namespace {

using tensor::Shape;
using tensor::Tensor;

struct LayerPlan {
  std::string name;
  Shape weight_shape;
  std::size_t bias_size = 0;
  std::size_t fan_in = 0;
  bool zero_init = false;
};

std::size_t context_flat_size(const NetworkArch& arch, const InputShape& in) {
  if (in.context_series == 0) return 0;
  return arch.context_conv.filters * (in.context_lags - arch.context_conv.kernel + 1);
}

// Layer shapes implied by (arch, input). Also the single place that checks
// the valid-convolution arithmetic.
std::vector<LayerPlan> plan_layers(const NetworkArch& arch, const InputShape& in) {
  if (in.assets == 0 || in.lags == 0) throw UsageError("policy input needs assets >= 1 and lags >= 1");
  if (arch.asset_conv.empty()) throw UsageError("asset branch needs at least one convolution layer");
  if (!(arch.max_leverage > 0.0)) throw UsageError("max_leverage must be > 0");
  if (!(arch.l2_coeff >= 0.0)) throw UsageError("l2 coefficient must be >= 0");

  std::vector<LayerPlan> plan;
  const bool grid = arch.asset_mode == AssetConvMode::kGrid2D;
  std::size_t channels = grid ? 2 : 2 * in.assets;
  std::size_t rows = grid ? in.assets : 1;
  std::size_t extent = in.lags;
  std::vector<std::size_t> trace{extent};
  for (std::size_t i = 0; i < arch.asset_conv.size(); ++i) {
    const auto& layer = arch.asset_conv[i];
    const std::size_t kr = grid ? arch.asset_kernel_rows : 1;
    if (layer.filters == 0 || layer.kernel == 0 || kr == 0) {
      throw UsageError("convolution filters and kernels must be > 0");
    }
    if (layer.kernel > extent || kr > rows) {
      trace.push_back(0);
      throw UsageError(fmt::format(
          "kernel too large for the lag axis: asset conv layer {} (kernel {}) on extent {} (lag extents {})",
          i, layer.kernel, extent, fmt::join(trace, "->")));
    }
    LayerPlan p;
    p.name = fmt::format("asset_conv{}", i);
    p.weight_shape = grid ? Shape{layer.filters, channels, kr, layer.kernel}
                          : Shape{layer.filters, channels, layer.kernel};
    p.bias_size = layer.filters;
    p.fan_in = channels * kr * layer.kernel;
    plan.push_back(p);
    channels = layer.filters;
    extent = extent - layer.kernel + 1;
    rows = rows - kr + 1;
    trace.push_back(extent);
  }
  std::size_t features = channels * rows * extent;
  if (in.context_series > 0) {
    const auto& c = arch.context_conv;
    if (c.filters == 0 || c.kernel == 0) throw UsageError("context filters and kernel must be > 0");
    if (c.kernel > in.context_lags) {
      throw UsageError(fmt::format("kernel too large for the context lag axis: kernel {} on {} lags",
                                   c.kernel, in.context_lags));
    }
    plan.push_back(LayerPlan{"context_conv", Shape{c.filters, in.context_series, c.kernel}, c.filters,
                             in.context_series * c.kernel, false});
    features += context_flat_size(arch, in);
  }
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
    if (arch.hidden[i] == 0) throw UsageError("hidden layer sizes must be > 0");
    plan.push_back(LayerPlan{fmt::format("hidden{}", i), Shape{arch.hidden[i], features},
                             arch.hidden[i], features, false});
    features = arch.hidden[i];
  }
  plan.push_back(LayerPlan{"weights_head", Shape{in.assets, features}, in.assets, features, true});
  plan.push_back(LayerPlan{"leverage_head", Shape{1, features}, 1, features, true});
  return plan;
}

std::size_t index_of(const PolicyParameters& p, const std::string& name) {
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (p.tensors[i].first == name) return i;
  }
  throw UsageError(fmt::format("policy has no parameter '{}'", name));
}

std::string mode_name(AssetConvMode m) { return m == AssetConvMode::kGrid2D ? "grid2d" : "lags1d"; }

std::size_t parse_count(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  s = io::trim(s);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw UsageError(fmt::format("invalid {} '{}'", what, s));
  }
  return v;
}

}  // namespace

std::string format_conv_layers(const std::vector<ConvLayerSpec>& layers) {
  std::vector<std::string> parts;
  for (const auto& l : layers) parts.push_back(fmt::format("{}x{}", l.filters, l.kernel));
  return fmt::format("{}", fmt::join(parts, ","));
}

std::vector<ConvLayerSpec> parse_conv_layers(std::string_view text) {
  std::vector<ConvLayerSpec> out;
  for (const auto& part : io::split(text, ',')) {
    const auto cell = io::trim(part);
    const auto x = cell.find('x');
    if (x == std::string_view::npos) {
      throw UsageError(fmt::format("conv layer '{}' must be FILTERSxKERNEL", cell));
    }
    out.push_back({parse_count(cell.substr(0, x), "filter count"),
                   parse_count(cell.substr(x + 1), "kernel size")});
  }
  return out;
}

Tensor& PolicyParameters::get(const std::string& name) { return tensors[index_of(*this, name)].second; }
const Tensor& PolicyParameters::get(const std::string& name) const {
  return tensors[index_of(*this, name)].second;
}

std::size_t PolicyParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors) n += t.size();
  return n;
}

void validate_arch(const NetworkArch& arch, const InputShape& input) { (void)plan_layers(arch, input); }

bool is_weight_tensor(const std::string& name) {
  return name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
}

PolicyParameters init_network(const NetworkArch& arch, const InputShape& input, std::uint64_t seed) {
  PolicyParameters params;
  params.arch = arch;
  params.input = input;
  params.seed = seed;
  std::mt19937_64 rng(seed);
  for (const auto& layer : plan_layers(arch, input)) {
    Tensor w(layer.weight_shape, 0.0);
    if (!layer.zero_init) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.fan_in));
      std::uniform_real_distribution<double> uni(-bound, bound);
      for (auto& v : w.values()) v = uni(rng);
    }
    params.tensors.emplace_back(layer.name + ".weight", std::move(w));
    params.tensors.emplace_back(layer.name + ".bias", Tensor(Shape{layer.bias_size}, 0.0));
  }
  return params;
}

std::vector<ad::Var> bind_parameters(ad::Tape& tape, const PolicyParameters& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors.size());
  for (const auto& [_, t] : params.tensors) vars.push_back(tape.variable(t));
  return vars;
}

PolicyOutputs forward(const PolicyParameters& params, const std::vector<ad::Var>& vars, ad::Var asset,
                      ad::Var context) {
  if (vars.size() != params.tensors.size()) throw UsageError("parameter variables do not match the policy");
  const auto& in = params.input;
  const auto& a_shape = asset.shape();
  if (a_shape.size() != 3 || a_shape[1] != 2 * in.assets || a_shape[2] != in.lags) {
    throw UsageError(fmt::format("shape mismatch: asset batch {} does not match [N,{},{}]",
                                 tensor::shape_string(a_shape), 2 * in.assets, in.lags));
  }
  const std::size_t n = a_shape[0];
  const auto& c_shape = context.shape();
  if (c_shape.size() != 3 || c_shape[0] != n || c_shape[1] != in.context_series ||
      c_shape[2] != in.context_lags) {
    throw UsageError(fmt::format("shape mismatch: context batch {} does not match [{},{},{}]",
                                 tensor::shape_string(c_shape), n, in.context_series, in.context_lags));
  }
  auto var = [&](const std::string& name) { return vars[index_of(params, name)]; };

  const bool grid = params.arch.asset_mode == AssetConvMode::kGrid2D;
  ad::Var h = grid ? ad::reshape(asset, Shape{n, 2, in.assets, in.lags}) : asset;
  for (std::size_t i = 0; i < params.arch.asset_conv.size(); ++i) {
    const auto w = var(fmt::format("asset_conv{}.weight", i));
    const auto b = var(fmt::format("asset_conv{}.bias", i));
    h = ad::relu(grid ? ad::conv2d(h, w, b) : ad::conv1d(h, w, b));
  }
  ad::Var features = ad::flatten(h);
  if (in.context_series > 0) {
    const auto c = ad::relu(ad::conv1d(context, var("context_conv.weight"), var("context_conv.bias")));
    features = ad::concat(features, ad::flatten(c));
  }
  for (std::size_t i = 0; i < params.arch.hidden.size(); ++i) {
    features = ad::relu(ad::dense(features, var(fmt::format("hidden{}.weight", i)),
                                  var(fmt::format("hidden{}.bias", i))));
  }
  PolicyOutputs out;
  out.weights = ad::softmax(ad::dense(features, var("weights_head.weight"), var("weights_head.bias")));
  const auto lev = ad::dense(features, var("leverage_head.weight"), var("leverage_head.bias"));
  out.leverage = ad::reshape(ad::scale(ad::sigmoid(lev), params.arch.max_leverage), Shape{n});
  return out;
}

ActionBatch forward_batch(const PolicyParameters& params, const Tensor& asset, const Tensor& context) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& [_, t] : params.tensors) vars.push_back(tape.constant(t));
  const auto out = forward(params, vars, tape.constant(asset), tape.constant(context));
  const auto& w = out.weights.value();
  const auto& lev = out.leverage.value();
  const auto n = static_cast<Eigen::Index>(lev.size());
  const auto m = static_cast<Eigen::Index>(params.input.assets);
  ActionBatch batch;
  batch.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      w.data(), n, m);
  batch.leverage = Eigen::Map<const Eigen::VectorXd>(lev.data(), n);
  return batch;
}

Action forward(const PolicyParameters& params, const Observation& obs) {
  const auto& in = params.input;
  const Tensor asset = obs.asset.reshaped(Shape{1, 2 * in.assets, obs.asset.size() / (2 * in.assets)});
  const Tensor context = obs.context.reshaped(
      Shape{1, in.context_series, in.context_series > 0 ? obs.context.size() / in.context_series : in.context_lags});
  const auto batch = forward_batch(params, asset, context);
  return Action{batch.weights.row(0).transpose(), batch.leverage(0)};
}

double l2_penalty(const PolicyParameters& params) {
  double total = 0.0;
  for (const auto& [name, t] : params.tensors) {
    if (!is_weight_tensor(name)) continue;
    for (double v : t.values()) total += v * v;
  }
  return params.arch.l2_coeff * total;
}

ad::Var l2_penalty(const PolicyParameters& params, const std::vector<ad::Var>& vars) {
  std::optional<ad::Var> total;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (!is_weight_tensor(params.tensors[i].first)) continue;
    const auto sq = ad::sum_squares(vars[i]);
    total = total ? ad::add(*total, sq) : sq;
  }
  if (!total) throw UsageError("policy has no weight tensors");
  return ad::scale(*total, params.arch.l2_coeff);
}

TensorContainer to_container(const PolicyParameters& params) {
  TensorContainer c;
  const auto& a = params.arch;
  c.meta["kind"] = "policy";
  c.meta["asset_conv"] = format_conv_layers(a.asset_conv);
  c.meta["asset_mode"] = mode_name(a.asset_mode);
  c.meta["asset_kernel_rows"] = fmt::format("{}", a.asset_kernel_rows);
  c.meta["context_conv"] = format_conv_layers({a.context_conv});
  c.meta["hidden"] = a.hidden.empty() ? "-" : fmt::format("{}", fmt::join(a.hidden, ","));
  c.meta["max_leverage"] = io::format_number(a.max_leverage);
  c.meta["l2_coeff"] = io::format_number(a.l2_coeff);
  c.meta["assets"] = fmt::format("{}", params.input.assets);
  c.meta["lags"] = fmt::format("{}", params.input.lags);
  c.meta["context_series"] = fmt::format("{}", params.input.context_series);
  c.meta["context_lags"] = fmt::format("{}", params.input.context_lags);
  c.meta["seed"] = fmt::format("{}", params.seed);
  c.tensors = params.tensors;
  return c;
}

PolicyParameters from_container(const TensorContainer& c, const std::optional<NetworkArch>& expected) {
  auto meta = [&](const std::string& key) -> const std::string& {
    const auto it = c.meta.find(key);
    if (it == c.meta.end()) {
      throw DataError(DataError::Kind::kParse, fmt::format("checkpoint missing meta '{}'", key));
    }
    return it->second;
  };
  if (meta("kind") != "policy") throw DataError(DataError::Kind::kParse, "checkpoint is not a policy");
  NetworkArch arch;
  InputShape in;
  std::uint64_t seed = 0;
  try {
    arch.asset_conv = parse_conv_layers(meta("asset_conv"));
    arch.asset_mode = meta("asset_mode") == "grid2d" ? AssetConvMode::kGrid2D : AssetConvMode::kLags1D;
    arch.asset_kernel_rows = parse_count(meta("asset_kernel_rows"), "kernel rows");
    arch.context_conv = parse_conv_layers(meta("context_conv")).at(0);
    if (meta("hidden") != "-") {
      for (const auto& h : io::split(meta("hidden"), ',')) arch.hidden.push_back(parse_count(h, "hidden size"));
    }
    arch.max_leverage = io::parse_double(meta("max_leverage"));
    arch.l2_coeff = io::parse_double(meta("l2_coeff"));
    in.assets = parse_count(meta("assets"), "asset count");
    in.lags = parse_count(meta("lags"), "lag count");
    in.context_series = parse_count(meta("context_series"), "context count");
    in.context_lags = parse_count(meta("context_lags"), "context lag count");
    seed = parse_count(meta("seed"), "seed");
  } catch (const UsageError& e) {
    throw DataError(DataError::Kind::kParse, fmt::format("checkpoint architecture: {}", e.what()));
  }
  if (expected && !(*expected == arch)) {
    throw UsageError("checkpoint architecture does not match the configured architecture");
  }
  PolicyParameters params = init_network(arch, in, seed);
  if (c.tensors.size() != params.tensors.size()) {
    throw DataError(DataError::Kind::kParse,
                    fmt::format("checkpoint has {} tensors, architecture needs {}", c.tensors.size(),
                                params.tensors.size()));
  }
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const auto& [name, t] = c.tensors[i];
    if (name != params.tensors[i].first || t.shape() != params.tensors[i].second.shape()) {
      throw DataError(DataError::Kind::kParse,
                      fmt::format("checkpoint tensor '{}' {} does not match architecture ('{}' {})", name,
                                  tensor::shape_string(t.shape()), params.tensors[i].first,
                                  tensor::shape_string(params.tensors[i].second.shape())));
    }
    params.tensors[i].second = t;
  }
  return params;
}

void save_policy(const PolicyParameters& params, const std::filesystem::path& path) {
  save_container(to_container(params), path);
}

PolicyParameters load_policy(const std::filesystem::path& path, const std::optional<NetworkArch>& expected) {
  return from_container(load_container(path), expected);
}

}  // namespace deepalloc
