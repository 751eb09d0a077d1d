#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "reid/losses.hpp"
#include "reid/rng.hpp"

using namespace reid;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

Model tiny_model(int classes, uint64_t seed = 7) {
  ModelConfig mc;
  mc.preset = "tiny";
  mc.num_classes = classes;
  mc.head_hidden = 8;
  mc.seed = seed;
  return Model(mc);
}

double loop_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  int n = logits.dim(0), c = logits.dim(1);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    double denom = 0;
    for (int j = 0; j < c; ++j) denom += std::exp(logits.data()[i * c + j]);
    total -= std::log(std::exp(logits.data()[i * c + labels[i]]) / denom);
  }
  return total;
}

}  // namespace

TEST_CASE("ide loss closed forms and loop oracle") {
  Tensor uniform = Tensor::zeros({1, 4});
  CHECK(ide_loss(Var::constant(uniform), {2}).item() == doctest::Approx(std::log(4.0)));

  Tensor dominant = Tensor::zeros({1, 4});
  dominant.data()[1] = 1000.0;
  CHECK(ide_loss(Var::constant(dominant), {1}).item() == doctest::Approx(0.0).epsilon(1e-9));

  Tensor batch = random_tensor({3, 5}, 1, -2, 2);
  std::vector<int> labels{4, 0, 2};
  CHECK(ide_loss(Var::constant(batch), labels).item() ==
        doctest::Approx(loop_cross_entropy(batch, labels)).epsilon(1e-9));

  CHECK_THROWS_AS(ide_loss(Var::constant(batch), {0, 1, 5}), DataError);
}

TEST_CASE("bce loss closed forms and loop oracle") {
  Tensor equal = Tensor::zeros({1, 2});
  CHECK(bce_loss(Var::constant(equal), {1}).item() == doctest::Approx(std::log(2.0)));

  Tensor dominant = Tensor::zeros({1, 2});
  dominant.data()[0] = 1000.0;
  CHECK(bce_loss(Var::constant(dominant), {0}).item() == doctest::Approx(0.0).epsilon(1e-9));

  Tensor batch = random_tensor({4, 2}, 2, -3, 3);
  std::vector<int> labels{1, 0, 0, 1};
  CHECK(bce_loss(Var::constant(batch), labels).item() ==
        doctest::Approx(loop_cross_entropy(batch, labels)).epsilon(1e-9));

  CHECK_THROWS_AS(bce_loss(Var::constant(batch), {1, 0, 2, 1}), DataError);
}

TEST_CASE("losses are permutation invariant (summed form)") {
  Rng rng(3);
  Tensor batch = random_tensor({6, 4}, 4, -2, 2);
  std::vector<int> labels{0, 1, 2, 3, 1, 0};
  double base = ide_loss(Var::constant(batch), labels).item();

  std::vector<int> perm{5, 2, 0, 4, 1, 3};
  Tensor shuffled({6, 4});
  std::vector<int> shuffled_labels(6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) shuffled.data()[i * 4 + j] = batch.data()[perm[i] * 4 + j];
    shuffled_labels[i] = labels[perm[i]];
  }
  double permuted = ide_loss(Var::constant(shuffled), shuffled_labels).item();
  CHECK(permuted == doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("siamese attention loss composition") {
  Model model = tiny_model(4, 11);
  LossWeights weights;  // sa_alpha = 0.2
  Tensor img1 = random_tensor({1, 3, 32, 16}, 5);
  Tensor img2 = random_tensor({1, 3, 32, 16}, 6);

  SUBCASE("identical images as a positive pair: spatial term vanishes") {
    FeatureBundle fb1 = model.extract_features(img1);
    FeatureBundle fb2 = model.extract_features(img1);
    SiameseLossResult res =
        siamese_attention_loss(model, fb1, fb2, {1}, weights, 0.5, 8, false);
    CHECK(res.spatial.value().data()[0] <= 1e-8);
    CHECK(res.mean.item() == doctest::Approx(res.bce_sum.item()).epsilon(1e-9));
  }

  SUBCASE("negative pair: exactly the bce loss") {
    FeatureBundle fb1 = model.extract_features(img1);
    FeatureBundle fb2 = model.extract_features(img2);
    SiameseLossResult res =
        siamese_attention_loss(model, fb1, fb2, {0}, weights, 0.5, 8, false);
    CHECK(res.positive_rows.empty());
    CHECK(res.mean.item() == res.bce_sum.item());  // bitwise: no spatial branch
  }

  SUBCASE("positive pair equals hand-composed bce + alpha * spatial") {
    FeatureBundle fb1 = model.extract_features(img1);
    FeatureBundle fb2 = model.extract_features(img2);
    SiameseLossResult res =
        siamese_attention_loss(model, fb1, fb2, {1}, weights, 0.5, 8, false);

    // Independent composition from the component operations.
    FeatureBundle ib1 = model.extract_features(img1);
    FeatureBundle ib2 = model.extract_features(img2);
    Var z = model.bce_logits(sub(ib1.vector, ib2.vector));
    double bce = bce_loss(z, {1}).item();
    SiameseAttention sam = siamese_attention_maps(model, ib1, ib2, false);
    auto [v1, v2] =
        trim_and_align(attention_profile(sam.m1), attention_profile(sam.m2), 0.5, 8);
    double sp = 0;
    for (int j = 0; j < 8; ++j) {
      double d = v1.value().data()[j] - v2.value().data()[j];
      sp += d * d;
    }
    sp = std::sqrt(sp);
    CHECK(res.mean.item() == doctest::Approx(bce + 0.2 * sp).epsilon(1e-6));
  }
}

TEST_CASE("total loss: ablation switches and component sum") {
  Model model = tiny_model(4, 13);
  Tensor a = random_tensor({2, 3, 32, 16}, 7);
  Tensor b = random_tensor({2, 3, 32, 16}, 8);
  std::vector<int> la{0, 1}, lb{0, 2}, pair{1, 0};

  TotalLossOptions opts;
  opts.weights = LossWeights{0.0, 0.0, 0.2};
  TotalLossResult zero_w = total_loss(model, a, b, la, lb, pair, opts);
  CHECK(zero_w.total.item() == zero_w.ide);  // bitwise: adding exact zeros

  TotalLossOptions base;
  base.enable_ia = false;
  base.enable_sa = false;
  TotalLossResult switched = total_loss(model, a, b, la, lb, pair, base);
  CHECK(switched.total.item() == switched.ide);
  CHECK(switched.total.item() == doctest::Approx(zero_w.ide).epsilon(1e-12));

  TotalLossOptions ia_only;
  ia_only.enable_sa = false;
  ia_only.weights = LossWeights{0.5, 0.0, 0.2};
  TotalLossResult plus_ia = total_loss(model, a, b, la, lb, pair, ia_only);
  CHECK(plus_ia.total.item() ==
        doctest::Approx(plus_ia.ide + 0.5 * plus_ia.ia).epsilon(1e-12));

  TotalLossOptions full;
  TotalLossResult res = total_loss(model, a, b, la, lb, pair, full);

  // Component-sum oracle from independently computed pieces.
  std::vector<int> labels_all{0, 1, 0, 2};
  Var images = Var::constant(concat_batch(a, b));
  FeatureBundle fb = model.extract_features(images);
  double ide = ide_loss(model.ide_logits(fb.vector), labels_all).item() / 4.0;
  IdentificationAttention ia =
      identification_attention_loss(model, images, labels_all, MaskParams{}, false);
  double ia_mean = mean(ia.probs).item();
  FeatureBundle fb1 = model.extract_features(a);
  FeatureBundle fb2 = model.extract_features(b);
  int l_align = fb1.maps.value().dim(2);
  SiameseLossResult sa =
      siamese_attention_loss(model, fb1, fb2, pair, full.weights, full.trim_t, l_align, false);
  double want = ide + 0.5 * ia_mean + 0.05 * sa.mean.item();
  CHECK(res.total.item() == doctest::Approx(want).epsilon(1e-6));
  CHECK(res.n_positive == 1);
}

TEST_CASE("total loss backward is finite for every parameter") {
  Model model = tiny_model(3, 17);
  Tensor a = random_tensor({2, 3, 16, 8}, 9);
  Tensor b = random_tensor({2, 3, 16, 8}, 10);
  TotalLossOptions opts;
  TotalLossResult res = total_loss(model, a, b, {0, 1}, {0, 2}, {1, 0}, opts);
  NamedParams params = model.named_params();
  std::vector<Var> vars;
  for (auto& [name, v] : params) vars.push_back(v);
  auto grads = grad(res.total, vars, false, Var(), true);
  for (size_t i = 0; i < grads.size(); ++i) CHECK(grads[i].value().all_finite());
}

TEST_CASE("loss weights validate") {
  LossWeights bad{-0.1, 0, 0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  LossWeights ok;
  CHECK_NOTHROW(ok.validate());
}
