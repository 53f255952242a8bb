#include <benchmark/benchmark.h>

#include <random>

#include "roiloc/fusion.hpp"
#include "roiloc/inference.hpp"
#include "roiloc/metrics.hpp"
#include "roiloc/nn/network.hpp"
#include "roiloc/phantom.hpp"
#include "roiloc/train.hpp"

using namespace roiloc;

namespace {

nn::Tensor<float> input(const Index3& s, int batch) {
  nn::Tensor<float> t({batch, s[2], s[1], s[0], 1});
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0, 1);
  for (float& v : t.data) v = u(rng);
  return t;
}

void BM_Iou(benchmark::State& state) {
  const BoundingBox a{{3, 4, 5}, {20, 18, 22}}, b{{10, 2, 9}, {15, 30, 12}};
  for (auto _ : state) benchmark::DoNotOptimize(iou(a, b));
}
BENCHMARK(BM_Iou);

void BM_Infer(benchmark::State& state) {
  const int arch = static_cast<int>(state.range(0));
  const Index3 shape{8, 8, 8};
  const auto net = nn::Network<float>::build(nn::make_network_spec(arch, nn::Head::Navigation, shape, {4, 8, 8}), 1);
  const auto x = input(shape, 1);
  for (auto _ : state) benchmark::DoNotOptimize(net.infer(x));
}
BENCHMARK(BM_Infer)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  const int arch = static_cast<int>(state.range(0));
  const Index3 shape{8, 8, 8};
  auto net = nn::Network<float>::build(nn::make_network_spec(arch, nn::Head::Navigation, shape, {4, 8, 8}), 1);
  const auto x = input(shape, 16);
  nn::Tensor<float> y({16, 19}), grad;
  for (auto _ : state) {
    nn::ForwardCache<float> cache;
    const auto out = net.forward_train(x, cache);
    nn::mse_loss(out, y, &grad);
    benchmark::DoNotOptimize(net.backward(cache, grad));
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Localize(benchmark::State& state) {
  const auto [vol, ann] = generate_phantom(PhantomConfig{});
  TrainConfig tc;
  tc.input_shape = {8, 8, 8};
  tc.channel_widths = {4, 8, 8};
  const auto bundle = initial_bundle(tc, ann.gt_box.size);
  for (auto _ : state) benchmark::DoNotOptimize(localize(vol, bundle, {}));
}
BENCHMARK(BM_Localize)->Unit(benchmark::kMillisecond);

void BM_Fuse(benchmark::State& state) {
  std::vector<Candidate> c(6);
  for (int k = 0; k < 6; ++k) {
    c[k].arch_id = k / 2 + 1;
    c[k].confidence = 0.1 * k;
    c[k].box = {{10 + k, 12 - k, 9}, {20, 22 + k, 18}};
  }
  for (auto _ : state) benchmark::DoNotOptimize(fuse(c, {}, {64, 64, 64}));
}
BENCHMARK(BM_Fuse);

}  // namespace
BENCHMARK_MAIN();
