#include <gtest/gtest.h>

#include <cmath>

#include "deepalloc/errors.hpp"
#include "deepalloc/policy_net.hpp"
#include "fixtures.hpp"

namespace deepalloc {
namespace {

using tensor::Tensor;

const InputShape kShape{4, 7, 3, 7};

Tensor random_tensor(tensor::Shape shape, Rng& rng, double scale = 0.02) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = n(rng);
  return t;
}

// Heads start at zero; give them values so the output depends on the input.
void randomize(PolicyParameters& p, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& [name, t] : p.tensors)
    for (double& v : t.values()) v = u(rng);
}

TEST(InitNetwork, DeterministicAndZeroHeads) {
  const auto a = init_network(NetworkArch{}, kShape, 5);
  const auto b = init_network(NetworkArch{}, kShape, 5);
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) EXPECT_EQ(a.tensors[i], b.tensors[i]);
  for (const char* name : {"weights_head.weight", "weights_head.bias", "leverage_head.weight", "leverage_head.bias"}) {
    for (double v : a.get(name).values()) EXPECT_EQ(v, 0.0) << name;
  }
  const auto c = init_network(NetworkArch{}, kShape, 6);
  EXPECT_NE(a.get("asset_conv0.weight"), c.get("asset_conv0.weight"));
  // Input channels 2m = 8, kernel 3: fan-in 24.
  const double bound = 1.0 / std::sqrt(24.0);
  for (double v : a.get("asset_conv0.weight").values()) EXPECT_LE(std::abs(v), bound);
  EXPECT_EQ(a.get("asset_conv0.weight").shape(), (tensor::Shape{5, 8, 3}));
  EXPECT_EQ(a.get("asset_conv1.weight").shape(), (tensor::Shape{10, 5, 3}));
  // 10 filters x 3 remaining lags + 3 filters x 5 remaining context lags.
  EXPECT_EQ(a.get("weights_head.weight").shape(), (tensor::Shape{4, 45}));
}

TEST(InitNetwork, KernelTooLarge) {
  NetworkArch arch;
  arch.asset_conv = {{5, 5}, {10, 4}};
  try {
    init_network(arch, kShape, 1);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("kernel too large"), std::string::npos);
  }
  arch.asset_conv = {{5, 3}};
  arch.context_conv = {3, 8};
  EXPECT_THROW(init_network(arch, kShape, 1), UsageError);
}

TEST(Forward, ZeroHeadsGiveUniformMidLeverage) {
  const auto p = init_network(NetworkArch{}, kShape, 3);
  Rng rng(1);
  const auto out = forward_batch(p, random_tensor({6, 8, 7}, rng), random_tensor({6, 3, 7}, rng));
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(out.weights(i, k), 0.25);
    EXPECT_DOUBLE_EQ(out.leverage(i), 1.5);
  }
}

TEST(Forward, OutputInvariantsForRandomParameters) {
  for (auto mode : {AssetConvMode::kLags1D, AssetConvMode::kGrid2D}) {
    NetworkArch arch;
    arch.asset_mode = mode;
    arch.asset_kernel_rows = mode == AssetConvMode::kGrid2D ? 2 : 1;
    arch.hidden = {6};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto p = init_network(arch, kShape, seed);
      randomize(p, seed + 100, 3.0);
      Rng rng(seed);
      const auto out = forward_batch(p, random_tensor({5, 8, 7}, rng, 1.0), random_tensor({5, 3, 7}, rng, 1.0));
      for (Eigen::Index i = 0; i < 5; ++i) {
        EXPECT_NEAR(out.weights.row(i).sum(), 1.0, 1e-12);
        EXPECT_GE(out.weights.row(i).minCoeff(), 0.0);
        EXPECT_GE(out.leverage(i), 0.0);
        EXPECT_LE(out.leverage(i), 3.0);
      }
    }
  }
}

TEST(Forward, BatchMatchesSingleObservation) {
  auto p = init_network(NetworkArch{}, kShape, 9);
  randomize(p, 10);
  Rng rng(2);
  const auto asset = random_tensor({3, 8, 7}, rng, 0.01);
  const auto ctx = random_tensor({3, 3, 7}, rng, 0.01);
  const auto batch = forward_batch(p, asset, ctx);
  Observation obs;
  obs.asset = Tensor({2, 4, 7});
  obs.context = Tensor({3, 7});
  std::copy_n(asset.data() + 56, 56, obs.asset.data());
  std::copy_n(ctx.data() + 21, 21, obs.context.data());
  const auto single = forward(p, obs);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(single.weights(k), batch.weights(1, k), 1e-15);
  EXPECT_NEAR(single.leverage, batch.leverage(1), 1e-15);
}

TEST(Forward, ShapeMismatch) {
  const auto p = init_network(NetworkArch{}, kShape, 1);
  EXPECT_THROW(forward_batch(p, Tensor({2, 6, 7}), Tensor({2, 3, 7})), UsageError);
  EXPECT_THROW(forward_batch(p, Tensor({2, 8, 7}), Tensor({2, 2, 7})), UsageError);
}

TEST(Forward, DataOutsideTheLagSetIsIgnored) {
  Rng rng(4);
  std::normal_distribution<double> n(0.0, 0.01);
  Panel r(120, 4);
  for (Eigen::Index t = 0; t < r.rows(); ++t)
    for (Eigen::Index k = 0; k < 4; ++k) r(t, k) = n(rng);
  const auto lags = LagSet::default_lags();
  auto p = init_network(NetworkArch{}, kShape, 2);
  randomize(p, 3);
  auto action_at = [&](const Panel& panel, std::size_t t) {
    const auto d = testing::dataset_from_returns(panel, 2, lags, lags);
    return forward(p, build_observation(d.returns, d.vols, d.context, lags, lags, t));
  };
  const std::size_t t = 100;
  const auto base = action_at(r, t);
  // With a 2-row vol window, return row t-10 only reaches vols at rows t-10 and t-9.
  auto off_lag = r;
  off_lag(static_cast<Eigen::Index>(t) - 10, 1) += 0.05;
  const auto same = action_at(off_lag, t);
  EXPECT_EQ(same.weights, base.weights);
  EXPECT_EQ(same.leverage, base.leverage);
  auto on_lag = r;
  on_lag(static_cast<Eigen::Index>(t) - 20, 1) += 0.05;
  EXPECT_NE(action_at(on_lag, t).weights, base.weights);
}

TEST(L2Penalty, Examples) {
  auto p = init_network(NetworkArch{}, kShape, 1);
  for (auto& [name, t] : p.tensors) t.fill(0.0);
  EXPECT_EQ(l2_penalty(p), 0.0);
  auto& w = p.get("leverage_head.weight");
  w[0] = 1.0;
  w[1] = 2.0;
  p.get("leverage_head.bias")[0] = 100.0;  // biases are not penalized
  EXPECT_NEAR(l2_penalty(p), 5e-8, 1e-22);

  auto q = init_network(NetworkArch{}, kShape, 1);
  const double base = l2_penalty(q);
  for (auto& [name, t] : q.tensors)
    for (double& v : t.values()) v *= 2.0;
  EXPECT_NEAR(l2_penalty(q), 4.0 * base, 1e-12 * base);

  ad::Tape tape;
  const auto vars = bind_parameters(tape, q);
  EXPECT_NEAR(l2_penalty(q, vars).value().item(), l2_penalty(q), 1e-20);
  EXPECT_TRUE(is_weight_tensor("hidden0.weight"));
  EXPECT_FALSE(is_weight_tensor("hidden0.bias"));
}

TEST(Checkpoint, RoundTrip) {
  NetworkArch arch;
  arch.hidden = {4, 3};
  arch.asset_mode = AssetConvMode::kGrid2D;
  arch.asset_kernel_rows = 2;
  arch.max_leverage = 2.5;
  auto p = init_network(arch, kShape, 77);
  randomize(p, 78);
  const auto dir = testing::fresh_dir("ckpt");
  save_policy(p, dir / "p.ckpt");
  const auto q = load_policy(dir / "p.ckpt", arch);
  EXPECT_EQ(q.arch, p.arch);
  EXPECT_EQ(q.input, p.input);
  EXPECT_EQ(q.seed, 77u);
  ASSERT_EQ(q.tensors.size(), p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    EXPECT_EQ(q.tensors[i].first, p.tensors[i].first);
    EXPECT_EQ(q.tensors[i].second, p.tensors[i].second);
  }
}

TEST(Checkpoint, ArchitectureMismatchFailsLoudly) {
  const auto p = init_network(NetworkArch{}, kShape, 1);
  const auto dir = testing::fresh_dir("ckpt_mismatch");
  save_policy(p, dir / "p.ckpt");
  NetworkArch other;
  other.asset_conv = {{6, 3}, {10, 3}};
  EXPECT_THROW(load_policy(dir / "p.ckpt", other), UsageError);

  auto c = to_container(p);
  c.tensors[0].second = Tensor({1, 1, 1});
  EXPECT_THROW(from_container(c), DataError);
  EXPECT_THROW(load_policy(dir / "missing.ckpt"), DataError);
}

TEST(ConvLayers, FormatAndParse) {
  const std::vector<ConvLayerSpec> layers{{5, 3}, {10, 2}};
  EXPECT_EQ(format_conv_layers(layers), "5x3,10x2");
  EXPECT_EQ(parse_conv_layers("5x3,10x2"), layers);
  EXPECT_THROW(parse_conv_layers("5by3"), UsageError);
}

}  // namespace
}  // namespace deepalloc
