#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "roiloc/error.hpp"
#include "roiloc/nn/checkpoint.hpp"
#include "roiloc/nn/gradient_check.hpp"
#include "roiloc/nn/network.hpp"
#include "roiloc/nn/sgd.hpp"
#include "test_util.hpp"

using namespace roiloc;
using namespace roiloc::nn;

namespace {

template <typename T>
Tensor<T> random_input(const Index3& shape, int batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<T> t({batch, shape[2], shape[1], shape[0], 1});
  for (T& v : t.data) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
Tensor<T> random_target(int batch, int outputs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<T> t({batch, outputs});
  for (T& v : t.data) v = static_cast<T>(u(rng));
  return t;
}

NetworkSpec tiny(std::vector<LayerSpec> layers, const Index3& shape, int outputs, Head head = Head::Navigation) {
  NetworkSpec s;
  s.head = head;
  s.input_shape = shape;
  s.layers = std::move(layers);
  s.output_size = outputs;
  return s;
}

// Loosened away from zero so relu kinks and pooling ties are unlikely to
// straddle a finite-difference step.
constexpr double kGradTol = 1e-4;

}  // namespace

TEST(Gradients, ConvAlone) {
  const Index3 shape{4, 5, 3};
  auto net = Network<double>::build(
      tiny({{LayerKind::Conv3d, 3, 1, 2}, {LayerKind::Dense, 0, 4 * 5 * 3 * 2, 3}}, shape, 3), 11);
  const auto r = check_gradients(net, random_input<double>(shape, 2, 1), random_target<double>(2, 3, 2));
  EXPECT_LT(r.max_relative_error, kGradTol) << r.worst_parameter;
  EXPECT_GT(r.checked, 0u);
}

TEST(Gradients, BatchNorm) {
  const Index3 shape{3, 3, 3};
  auto net = Network<double>::build(tiny({{LayerKind::Conv3d, 3, 1, 2},
                                          {LayerKind::BatchNorm, 0, 2, 2},
                                          {LayerKind::Dense, 0, 27 * 2, 2}},
                                         shape, 2),
                                    12);
  // Non-trivial gamma/beta.
  net.params().layers[1].weight = {1.3, 0.7};
  net.params().layers[1].bias = {0.2, -0.1};
  const auto r = check_gradients(net, random_input<double>(shape, 3, 3), random_target<double>(3, 2, 4));
  EXPECT_LT(r.max_relative_error, kGradTol) << r.worst_parameter;
}

TEST(Gradients, ReluAndPool) {
  const Index3 shape{4, 4, 4};
  auto net = Network<double>::build(tiny({{LayerKind::Conv3d, 3, 1, 2},
                                          {LayerKind::Relu},
                                          {LayerKind::MaxPool3d},
                                          {LayerKind::Dense, 0, 8 * 2, 3}},
                                         shape, 3),
                                    13);
  const auto r = check_gradients(net, random_input<double>(shape, 2, 5), random_target<double>(2, 3, 6));
  EXPECT_LT(r.max_relative_error, kGradTol) << r.worst_parameter;
}

TEST(Gradients, DenseSoftmax) {
  const Index3 shape{2, 2, 2};
  auto net = Network<double>::build(
      tiny({{LayerKind::Dense, 0, 8, 5}, {LayerKind::Softmax}}, shape, 5), 14);
  const auto r = check_gradients(net, random_input<double>(shape, 3, 7), random_target<double>(3, 5, 8));
  EXPECT_LT(r.max_relative_error, kGradTol) << r.worst_parameter;
}

class FullNetworkGradients : public ::testing::TestWithParam<std::tuple<int, Head>> {};

TEST_P(FullNetworkGradients, MatchFiniteDifferences) {
  const auto [arch, head] = GetParam();
  const Index3 shape{4, 4, 4};
  const auto spec = make_network_spec(arch, head, shape, {2, 2, 2});
  auto net = Network<double>::build(spec, 100 + arch);
  const auto r = check_gradients(net, random_input<double>(shape, 2, 9), random_target<double>(2, spec.output_size, 10),
                                 1e-5, 6);
  EXPECT_LT(r.max_relative_error, 1e-3) << r.worst_parameter;
}

INSTANTIATE_TEST_SUITE_P(AllSix, FullNetworkGradients,
                         ::testing::Combine(::testing::Values(1, 2, 3),
                                            ::testing::Values(Head::Navigation, Head::BBox)),
                         [](const auto& info) {
                           return "arch" + std::to_string(std::get<0>(info.param)) + "_" +
                                  std::string(to_string(std::get<1>(info.param)));
                         });

TEST(Network, SpecsFollowTheStacks) {
  const Index3 shape{8, 8, 8};
  const auto a1 = make_network_spec(1, Head::Navigation, shape, {4, 8, 8});
  const auto a2 = make_network_spec(2, Head::Navigation, shape, {4, 8, 8});
  const auto a3 = make_network_spec(3, Head::BBox, shape, {4, 8, 8});
  auto convs = [](const NetworkSpec& s) {
    std::vector<int> k;
    for (const auto& l : s.layers) if (l.kind == LayerKind::Conv3d) k.push_back(l.kernel);
    return k;
  };
  EXPECT_EQ(convs(a1), (std::vector<int>{7, 5, 3}));
  EXPECT_EQ(convs(a2), (std::vector<int>{7, 7, 5, 5, 3, 3}));
  EXPECT_EQ(convs(a3), (std::vector<int>{9, 7, 5, 3}));
  EXPECT_EQ(a1.layers.back().kind, LayerKind::Softmax);
  EXPECT_EQ(a3.layers.back().kind, LayerKind::Relu);
  EXPECT_EQ(a3.output_size, 4);
  EXPECT_THROW(make_network_spec(4, Head::BBox, shape), Error);
  EXPECT_THROW(make_network_spec(2, Head::BBox, {3, 8, 8}), Error);
}

TEST(Network, SoftmaxRowsSumToOneAndBBoxNonNegative) {
  const Index3 shape{6, 6, 6};
  for (int arch = 1; arch <= 3; ++arch) {
    const auto nav = Network<float>::build(make_network_spec(arch, Head::Navigation, shape, {2, 3, 3}), arch);
    const auto out = nav.infer(random_input<float>(shape, 4, arch));
    ASSERT_EQ(out.shape, (std::vector<int>{4, 19}));
    for (int b = 0; b < 4; ++b) {
      double s = 0;
      for (float v : out.sample(b)) {
        EXPECT_GE(v, 0.0f);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-5);
    }
    const auto bb = Network<float>::build(make_network_spec(arch, Head::BBox, shape, {2, 3, 3}), arch);
    for (float v : bb.infer(random_input<float>(shape, 3, arch)).data) EXPECT_GE(v, 0.0f);
  }
}

TEST(Network, InferIsPerSample) {
  const Index3 shape{6, 6, 6};
  auto net = Network<float>::build(make_network_spec(1, Head::Navigation, shape, {2, 2, 2}), 3);
  ForwardCache<float> cache;
  net.forward_train(random_input<float>(shape, 4, 1), cache);  // moves running stats off the identity
  const auto batch = random_input<float>(shape, 3, 2);
  const auto all = net.infer(batch);
  for (int b = 0; b < 3; ++b) {
    Tensor<float> one({1, shape[2], shape[1], shape[0], 1});
    std::copy(batch.sample(b).begin(), batch.sample(b).end(), one.data.begin());
    const auto single = net.infer(one);
    for (std::size_t i = 0; i < single.data.size(); ++i) EXPECT_FLOAT_EQ(single.data[i], all.sample(b)[i]);
  }
}

TEST(Network, RejectsWrongInputShape) {
  const auto net = Network<float>::build(make_network_spec(1, Head::Navigation, {6, 6, 6}, {2, 2, 2}), 1);
  EXPECT_THROW(net.infer(random_input<float>({6, 6, 5}, 1, 1)), Error);
}

TEST(Network, BuildIsDeterministic) {
  const auto spec = make_network_spec(3, Head::BBox, {6, 6, 6}, {2, 2, 2});
  EXPECT_EQ(serialize_checkpoint(Network<float>::build(spec, 5)), serialize_checkpoint(Network<float>::build(spec, 5)));
  EXPECT_NE(serialize_checkpoint(Network<float>::build(spec, 5)), serialize_checkpoint(Network<float>::build(spec, 6)));
}

TEST(Sgd, MomentumUpdateByHand) {
  Params<double> p;
  p.layers.resize(1);
  p.layers[0].weight = {1.0};
  p.layers[0].bias = {0.0};
  Gradients<double> g = p;
  g.layers[0].weight = {0.5};
  g.layers[0].bias = {-1.0};
  SgdMomentum<double> opt(0.1, 0.9);
  opt.step(p, g);
  EXPECT_DOUBLE_EQ(p.layers[0].weight[0], 1.0 - 0.1 * 0.5);
  opt.step(p, g);
  // v = 0.9 * 0.5 + 0.5
  EXPECT_DOUBLE_EQ(p.layers[0].weight[0], 1.0 - 0.05 - 0.1 * 0.95);
  EXPECT_DOUBLE_EQ(p.layers[0].bias[0], 0.1 + 0.19);
}

TEST(Sgd, NonFiniteGradientLeavesParamsUntouched) {
  Params<float> p;
  p.layers.resize(1);
  p.layers[0].weight = {1.0f, 2.0f};
  p.layers[0].bias = {3.0f};
  Gradients<float> g = p;
  g.layers[0].weight = {0.1f, std::numeric_limits<float>::quiet_NaN()};
  SgdMomentum<float> opt(0.1, 0.9);
  EXPECT_THROW(opt.step(p, g), Error);
  EXPECT_EQ(p.layers[0].weight, (std::vector<float>{1.0f, 2.0f}));
  EXPECT_EQ(p.layers[0].bias, (std::vector<float>{3.0f}));
}

TEST(Training, ToyProblemLossDrops) {
  // Two classes: bright vs dark patches.
  const Index3 shape{4, 4, 4};
  auto net = Network<float>::build(make_network_spec(1, Head::Navigation, shape, {4, 4, 4}), 21);
  SgdMomentum<float> opt(0.05, 0.9);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 0.3f);
  auto batch = [&](Tensor<float>& x, Tensor<float>& y) {
    x = Tensor<float>({8, 4, 4, 4, 1});
    y = Tensor<float>({8, 19});
    for (int b = 0; b < 8; ++b) {
      const bool bright = b % 2 == 0;
      for (float& v : x.sample(b)) v = u(rng) + (bright ? 0.7f : 0.0f);
      y.sample(b)[bright ? 0 : 18] = 1.0f;
    }
  };
  Tensor<float> x, y, grad;
  double first = 0, last = 0;
  for (int it = 0; it < 200; ++it) {
    batch(x, y);
    ForwardCache<float> cache;
    const auto out = net.forward_train(x, cache);
    const double loss = mse_loss(out, y, &grad);
    if (it == 0) first = loss;
    last = loss;
    opt.step(net.params(), net.backward(cache, grad));
  }
  EXPECT_LT(last, first * 0.05);
}

TEST(Checkpoint, RoundTripIsExact) {
  TempDir dir;
  auto net = Network<float>::build(make_network_spec(2, Head::BBox, {8, 8, 8}, {2, 3, 4}), 9);
  ForwardCache<float> cache;
  net.forward_train(random_input<float>({8, 8, 8}, 2, 3), cache);
  const auto path = dir.path() / "n.ckpt";
  save_checkpoint(net, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.spec(), net.spec());
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(net));
  const auto in = random_input<float>({8, 8, 8}, 2, 4);
  EXPECT_EQ(back.infer(in).data, net.infer(in).data);
}

TEST(Checkpoint, CorruptInputsAreRejected) {
  const auto net = Network<float>::build(make_network_spec(1, Head::Navigation, {4, 4, 4}, {1, 1, 1}), 1);
  const std::string good = serialize_checkpoint(net);
  ASSERT_EQ(good.substr(0, 8), "ROILOCNN");
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), Error);
  EXPECT_THROW(deserialize_checkpoint(good.substr(0, good.size() - 4)), Error);
  EXPECT_THROW(deserialize_checkpoint(good + "xx"), Error);
  EXPECT_THROW(deserialize_checkpoint(""), Error);
}
