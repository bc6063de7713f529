#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepalloc/autodiff.hpp"
#include "deepalloc/checkpoint.hpp"
#include "deepalloc/features.hpp"

namespace deepalloc {

struct ConvLayerSpec {
  std::size_t filters = 1;
  std::size_t kernel = 1;  // extent along the lag axis

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

/// How the asset branch convolves the (2 x m x L) tensor.
enum class AssetConvMode {
  kLags1D,  // 2m input channels, 1-D convolution over lags
  kGrid2D,  // 2 input channels, 2-D convolution over (assets x lags)
};

/// Two-branch, two-head policy architecture.
struct NetworkArch {
  std::vector<ConvLayerSpec> asset_conv{{5, 3}, {10, 3}};
  ConvLayerSpec context_conv{3, 3};
  std::vector<std::size_t> hidden;  // optional dense layers after the concatenation
  double max_leverage = 3.0;
  double l2_coeff = 1e-8;
  AssetConvMode asset_mode = AssetConvMode::kLags1D;
  std::size_t asset_kernel_rows = 1;  // kGrid2D only: kernel extent along assets

  friend bool operator==(const NetworkArch&, const NetworkArch&) = default;
};

struct InputShape {
  std::size_t assets = 0;
  std::size_t lags = 0;
  std::size_t context_series = 0;
  std::size_t context_lags = 0;

  friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct PolicyParameters {
  NetworkArch arch;
  InputShape input;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, tensor::Tensor>> tensors;

  tensor::Tensor& get(const std::string& name);
  const tensor::Tensor& get(const std::string& name) const;
  std::size_t parameter_count() const;
};

/// Final allocation is leverage * weights.
struct Action {
  Eigen::VectorXd weights;
  double leverage = 0.0;
};

/// Batched actions: weights (N x m), leverage (N).
struct ActionBatch {
  Eigen::MatrixXd weights;
  Eigen::VectorXd leverage;
};

/// Throws UsageError if the architecture cannot consume inputs of this shape.
void validate_arch(const NetworkArch& arch, const InputShape& input);

/// Fan-in scaled uniform initialization; both output heads start at zero.
PolicyParameters init_network(const NetworkArch& arch, const InputShape& input, std::uint64_t seed);

/// Records every parameter tensor as a tape variable, in `params.tensors` order.
std::vector<ad::Var> bind_parameters(ad::Tape& tape, const PolicyParameters& params);

struct PolicyOutputs {
  ad::Var weights;   // (N, m), rows on the simplex
  ad::Var leverage;  // (N), in [0, max_leverage]
};

/// Differentiable batched forward pass. `asset` is (N, 2m, L), `context` (N, p, Lc).
PolicyOutputs forward(const PolicyParameters& params, const std::vector<ad::Var>& vars,
                      ad::Var asset, ad::Var context);

ActionBatch forward_batch(const PolicyParameters& params, const tensor::Tensor& asset,
                          const tensor::Tensor& context);
Action forward(const PolicyParameters& params, const Observation& obs);

/// l2_coeff * sum of squared weights (biases excluded).
double l2_penalty(const PolicyParameters& params);
ad::Var l2_penalty(const PolicyParameters& params, const std::vector<ad::Var>& vars);

/// Whether the named tensor is a weight (penalized) rather than a bias.
bool is_weight_tensor(const std::string& name);

TensorContainer to_container(const PolicyParameters& params);
/// Rebuilds parameters; fails if shapes disagree with the recorded architecture
/// or, when given, with `expected` architecture.
PolicyParameters from_container(const TensorContainer& c,
                                const std::optional<NetworkArch>& expected = std::nullopt);
void save_policy(const PolicyParameters& params, const std::filesystem::path& path);
PolicyParameters load_policy(const std::filesystem::path& path,
                             const std::optional<NetworkArch>& expected = std::nullopt);

std::string format_conv_layers(const std::vector<ConvLayerSpec>& layers);
std::vector<ConvLayerSpec> parse_conv_layers(std::string_view text);

}  // namespace deepalloc
