#include <benchmark/benchmark.h>

#include "reid/attention.hpp"
#include "reid/evaluation.hpp"
#include "reid/losses.hpp"
#include "reid/rng.hpp"

namespace {

reid::Tensor random_tensor(reid::Shape shape, uint64_t seed) {
  reid::Tensor t(std::move(shape));
  reid::Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal();
  return t;
}

reid::Model tiny_model(int classes) {
  reid::ModelConfig mc;
  mc.preset = "tiny";
  mc.num_classes = classes;
  mc.head_hidden = 32;
  mc.seed = 7;
  return reid::Model(mc);
}

void ForwardTiny(benchmark::State& state) {
  reid::Model model = tiny_model(8);
  reid::Tensor images = random_tensor({4, 3, 64, 32}, 1);
  for (auto _ : state) {
    auto fb = model.extract_features(images);
    benchmark::DoNotOptimize(fb.vector.value().data());
  }
}
BENCHMARK(ForwardTiny);

void TotalLossBackwardTiny(benchmark::State& state) {
  reid::Model model = tiny_model(4);
  reid::Tensor a = random_tensor({2, 3, 32, 16}, 2);
  reid::Tensor b = random_tensor({2, 3, 32, 16}, 3);
  reid::TotalLossOptions opts;
  auto params = model.named_params();
  std::vector<reid::Var> vars;
  for (auto& [name, v] : params) vars.push_back(v);
  for (auto _ : state) {
    auto res = reid::total_loss(model, a, b, {0, 1}, {0, 2}, {1, 0}, opts);
    auto grads = reid::grad(res.total, vars, false);
    benchmark::DoNotOptimize(grads.front().value().data());
  }
}
BENCHMARK(TotalLossBackwardTiny);

void GradCamTiny(benchmark::State& state) {
  reid::Model model = tiny_model(8);
  reid::Tensor images = random_tensor({1, 3, 64, 32}, 4);
  for (auto _ : state) {
    auto fb = model.extract_features(images);
    reid::Var score = reid::sum(fb.vector);
    reid::Var m = reid::grad_cam(score, fb.maps, false);
    benchmark::DoNotOptimize(m.value().data());
  }
}
BENCHMARK(GradCamTiny);

void CmcLarge(benchmark::State& state) {
  reid::Rng rng(11);
  reid::DistanceMatrix dm;
  dm.q = 100;
  dm.g = 1000;
  dm.values.resize(static_cast<size_t>(dm.q) * dm.g);
  for (auto& v : dm.values) v = rng.uniform();
  for (int i = 0; i < dm.q; ++i) {
    dm.query_ids.push_back(i % 50);
    dm.query_cams.push_back(0);
  }
  for (int j = 0; j < dm.g; ++j) {
    dm.gallery_ids.push_back(j % 50);
    dm.gallery_cams.push_back(1);
  }
  for (auto _ : state) {
    auto curve = reid::cmc(dm, 10);
    benchmark::DoNotOptimize(curve.curve.data());
  }
}
BENCHMARK(CmcLarge);

}  // namespace

BENCHMARK_MAIN();
