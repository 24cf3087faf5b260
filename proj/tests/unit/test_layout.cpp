#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "hpgm/dataset.hpp"
#include "hpgm/layout.hpp"
#include "hpgm/numcore/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/texts.hpp"

using namespace hpgm;
using namespace hpgm::layout;

namespace {

const text::Vocabularies& vocab() {
  static const text::Vocabularies v = text::Vocabularies::defaults();
  return v;
}

nc::Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v) { return nc::Tensor({r, c}, std::move(v)); }

GcLpnParams random_params(std::size_t d, std::size_t h, std::uint64_t seed) {
  // Larger spread than the 0.02 init so that every path carries signal.
  return GcLpnParams::init(d, h, 0.5, seed);
}

std::vector<double> values(const nc::Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Gcn, SingleRoomGivesUniformSoftmax) {
  const auto p = random_params(5, 4, 1);
  const auto x = matrix(1, 5, {1, 0, 0.3, 0, 1});
  const auto s = gcn_forward(x, matrix(1, 1, {0}), p);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(s[j], x[j] + 0.2, 1e-15);
}

TEST(Gcn, HandComputedTwoRoomCase) {
  // A swaps rows; W0 = diag(1, -1) lets ReLU drop the second column; W1 = diag(2, 1).
  GcLpnParams p = GcLpnParams::init(2, 3, 0.02, 0);
  p.w0 = matrix(2, 2, {1, 0, 0, -1});
  p.w1 = matrix(2, 2, {2, 0, 0, 1});
  const auto x = matrix(2, 2, {1, 0, 0, 2});
  const auto s = gcn_forward(x, matrix(2, 2, {0, 1, 1, 0}), p);
  // A X W0 = [[0,-2],[1,0]] -> ReLU [[0,0],[1,0]]; A H W1 = [[2,0],[0,0]].
  const double e2 = std::exp(2.0);
  const std::vector<double> expected{1 + e2 / (e2 + 1), 1 / (e2 + 1), 0.5, 2.5};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s[i], expected[i], 1e-14);
}

TEST(Gcn, SoftmaxAblationIsIdentity) {
  GcLpnParams p = GcLpnParams::init(2, 3, 0.02, 0);
  p.w0 = matrix(2, 2, {1, 0, 0, -1});
  p.w1 = matrix(2, 2, {2, 0, 0, 1});
  const auto x = matrix(2, 2, {1, 0, 0, 2});
  const auto s = gcn_forward(x, matrix(2, 2, {0, 1, 1, 0}), p, false);
  EXPECT_EQ(values(s), (std::vector<double>{3, 0, 0, 2}));
}

TEST(Gcn, PermutationEquivariance) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + trial % 7, d = 6;
    const auto p = random_params(d, 8, static_cast<std::uint64_t>(trial));
    nc::Tensor x({n, d}), a({n, n});
    std::uniform_real_distribution<double> u(-1, 1);
    for (double& v : x.data()) v = u(rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = a[j * n + i] = (rng() % 2) ? 1.0 : 0.0;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    nc::Tensor px({n, d}), pa({n, n});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) px[i * d + k] = x[perm[i] * d + k];
      for (std::size_t j = 0; j < n; ++j) pa[i * n + j] = a[perm[i] * n + perm[j]];
    }
    const auto out = predict_boxes(gcn_forward(x, a, p), p);
    const auto pout = predict_boxes(gcn_forward(px, pa, p), p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(pout[i * 4 + k], out[perm[i] * 4 + k], 1e-12);
  }
}

TEST(Boxes, ZeroFinalLayerYieldsBias) {
  GcLpnParams p = random_params(4, 5, 2);
  p.mlp_w2 = nc::Tensor({5, 4}, 0.0);
  p.mlp_b2 = nc::Tensor({4}, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  const auto boxes = tensor_to_boxes(predict_boxes(nc::Tensor({3, 4}, 0.7), p));
  ASSERT_EQ(boxes.size(), 3u);
  for (const auto& b : boxes) EXPECT_EQ(b, (BBox{0.1, 0.2, 0.3, 0.4}));
}

TEST(Loss, ReferenceValues) {
  const BBox z{0, 0, 0, 0};
  EXPECT_EQ(layout_loss(std::vector<BBox>{z}, std::vector<BBox>{z}), 0.0);
  EXPECT_EQ(layout_loss(std::vector<BBox>{{1, 0, 0, 0}}, std::vector<BBox>{z}), 1.0);
  EXPECT_EQ(layout_loss(std::vector<BBox>{{1, 0, 0, 0}, {0, 2, 0, 0}}, std::vector<BBox>{z, z}), 2.5);
  EXPECT_THROW(layout_loss(std::vector<BBox>{z}, std::vector<BBox>{z, z}), LengthMismatch);
}

TEST(Loss, FullModelGradientMatchesFiniteDifferences) {
  const auto spec = text::parse_house(testkit::kText2, vocab());
  auto [x, a] = text::encode_layout_features(spec, vocab());
  const auto p = random_params(x.width(), 6, 4);
  nc::Tensor truth({spec.rooms.size(), 4}, 0.25);
  auto f = [&](const std::vector<nc::Tensor>& in) {
    GcLpnParams q;
    q.w0 = in[0], q.w1 = in[1], q.mlp_w1 = in[2], q.mlp_b1 = in[3], q.mlp_w2 = in[4], q.mlp_b2 = in[5];
    return layout_loss(predict_boxes(gcn_forward(x.values, a.values, q), q), truth);
  };
  const auto r = testkit::check_gradients(f, {p.w0, p.w1, p.mlp_w1, p.mlp_b1, p.mlp_w2, p.mlp_b2}, 9, 1e-5);
  EXPECT_LT(r.rel_err, 1e-4);
}

TEST(Clamp, Examples) {
  EXPECT_EQ(clamp_box({0.3, 0.3, 0.1, 0.5}), (BBox{0.1, 0.3, 0.3, 0.5}));
  EXPECT_EQ(clamp_box({-0.1, 0, 0.5, 0.5}), (BBox{0, 0, 0.5, 0.5}));
  const BBox ok{0.2, 0.1, 0.6, 0.9};
  EXPECT_EQ(clamp_box(ok), ok);
}

TEST(Clamp, IdempotentAndNeverEmpty) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int i = 0; i < 1000; ++i) {
    BBox b{u(rng), u(rng), u(rng), u(rng)};
    if (i % 10 == 0) b.x1 = b.x0;
    const auto c = clamp_box(b);
    EXPECT_EQ(clamp_box(c), c);
    EXPECT_GT(c.area(), 0.0);
    EXPECT_GE(c.x0, 0.0);
    EXPECT_LE(c.x1, 1.0);
  }
}

TEST(Mlg, SquareAtAnchor) {
  const auto b = mlg_box(0.5, 0.5, 16, 1.0);
  EXPECT_NEAR(b.width() * 18, 4.0, 1e-12);
  EXPECT_NEAR(b.height() * 18, 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(b.cx(), 0.5);
  EXPECT_DOUBLE_EQ(b.cy(), 0.5);
}

TEST(Mlg, AreasEncodeSizesAndCentresSitOnAnchors) {
  const auto spec = text::parse_house(testkit::kText2, vocab());
  const auto boxes = mlg_baseline(spec, vocab(), 3);
  ASSERT_EQ(boxes.size(), spec.rooms.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    EXPECT_NEAR(boxes[i].area() * 324, spec.rooms[i].size_sqm, 1e-9);
    const auto [ax, ay] = position_anchor(vocab().positions[spec.rooms[i].position]);
    EXPECT_NEAR(boxes[i].cx(), ax, 1e-12);
    EXPECT_NEAR(boxes[i].cy(), ay, 1e-12);
    const double rho = boxes[i].width() / boxes[i].height();
    EXPECT_GE(rho, 2.0 / 3.0 - 1e-12);
    EXPECT_LE(rho, 1.5 + 1e-12);
  }
  EXPECT_EQ(mlg_baseline(spec, vocab(), 3), boxes);
}

TEST(Clpn, IgnoresAdjacency) {
  const auto p = random_params(5, 4, 6);
  GcLpnConfig cfg;
  cfg.gcn_on = false;
  const FeatureMatrix x{matrix(3, 5, {1, 0, 0, 0.1, 0, 0, 1, 0, 0.2, 1, 0, 0, 1, 0.3, 0})};
  const auto dense = forward(x, AdjacencyMatrix{matrix(3, 3, {0, 1, 1, 1, 0, 1, 1, 1, 0})}, p, cfg);
  const auto empty = forward(x, AdjacencyMatrix{nc::Tensor({3, 3}, 0.0)}, p, cfg);
  EXPECT_EQ(values(dense), values(empty));
  EXPECT_EQ(values(dense), values(predict_boxes(x.values, p)));
}

TEST(Mirror, DoubleFlipRestoresHouse) {
  const auto h = data::generate_layout(6, 4, vocab());
  const auto [s1, b1] = mirror_house(h.spec, h.gt_boxes, vocab(), true, true);
  const auto [s2, b2] = mirror_house(s1, b1, vocab(), true, true);
  EXPECT_EQ(s2, h.spec);
  for (std::size_t i = 0; i < b2.size(); ++i) {
    EXPECT_NEAR(b2[i].x0, h.gt_boxes[i].x0, 1e-15);
    EXPECT_NEAR(b2[i].y1, h.gt_boxes[i].y1, 1e-15);
  }
  const auto [sx, bx] = mirror_house(h.spec, h.gt_boxes, vocab(), true, false);
  for (std::size_t i = 0; i < bx.size(); ++i) {
    EXPECT_DOUBLE_EQ(bx[i].x0, 1 - h.gt_boxes[i].x1);
    EXPECT_EQ(bx[i].y0, h.gt_boxes[i].y0);
  }
  const auto text1 = text::parse_house(testkit::kText1, vocab());
  const auto flipped = mirror_house(text1, std::vector<BBox>(4, BBox{0, 0, 1, 1}), vocab(), true, false).first;
  EXPECT_EQ(vocab().positions[flipped.rooms[0].position], "northwest");  // washroom1 was northeast
  EXPECT_EQ(vocab().positions[flipped.rooms[2].position], "center");
}

class Training : public ::testing::Test {
 protected:
  static std::vector<Sample> corpus(int n) {
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
      const auto h = data::generate_layout(4 + i % 5, static_cast<std::uint64_t>(i), vocab());
      out.push_back(make_sample(h.spec, h.gt_boxes, vocab()));
    }
    return out;
  }
};

TEST_F(Training, ZeroLearningRateLeavesParametersUnchanged) {
  GcLpnConfig cfg;
  cfg.lr = 0;
  cfg.epochs = 3;
  const auto res = train_gclpn(corpus(12), cfg);
  const auto init = GcLpnParams::init(17, cfg.hidden, cfg.init_std, cfg.seed);
  EXPECT_EQ(nc::checksum(res.params.named()), nc::checksum(init.named()));
}

TEST_F(Training, MemorisesSingleSample) {
  GcLpnConfig cfg;
  cfg.epochs = 1500;
  const auto res = train_gclpn(corpus(1), cfg);
  EXPECT_LT(res.loss_trace.back(), 1e-3);
}

TEST_F(Training, LossDropsFivefoldOnTwoHundredLayouts) {
  GcLpnConfig cfg;
  const auto res = train_gclpn(corpus(200), cfg);
  ASSERT_EQ(res.loss_trace.size(), 300u);
  EXPECT_LT(res.loss_trace.back(), res.loss_trace.front() / 5);
}

TEST_F(Training, DeterministicPerSeed) {
  GcLpnConfig cfg;
  cfg.epochs = 5;
  const auto data = corpus(20);
  EXPECT_EQ(nc::checksum(train_gclpn(data, cfg).params.named()), nc::checksum(train_gclpn(data, cfg).params.named()));
  cfg.gcn_on = false;
  EXPECT_EQ(nc::checksum(train_gclpn(data, cfg).params.named()), nc::checksum(train_gclpn(data, cfg).params.named()));
}

TEST_F(Training, HoldOutKeepsBestEpoch) {
  GcLpnConfig cfg;
  cfg.epochs = 20;
  cfg.validation_fraction = 0.25;
  const auto res = train_gclpn(corpus(20), cfg);
  ASSERT_EQ(res.validation_trace.size(), 20u);
  const auto best = std::min_element(res.validation_trace.begin(), res.validation_trace.end());
  EXPECT_EQ(res.best_epoch, best - res.validation_trace.begin());
}

TEST_F(Training, EmptyDatasetThrows) { EXPECT_THROW(train_gclpn({}, GcLpnConfig{}), EmptyDataset); }

TEST_F(Training, TrainingSetMirrorsFourfold) {
  const auto h = data::generate_layout(5, 1, vocab());
  GcLpnConfig cfg;
  EXPECT_EQ(training_set({h.spec}, {h.gt_boxes}, vocab(), cfg).size(), 4u);
  cfg.mirror_augment = false;
  EXPECT_EQ(training_set({h.spec}, {h.gt_boxes}, vocab(), cfg).size(), 1u);
}

TEST(Model, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "hpgm_layout_model";
  std::filesystem::remove_all(dir);
  LayoutModel m{GcLpnConfig{}, random_params(17, 64, 8)};
  m.save(dir);
  const auto back = LayoutModel::load(dir);
  const auto spec = text::parse_house(testkit::kText1, vocab());
  EXPECT_EQ(back.predict(spec, vocab()), m.predict(spec, vocab()));
  EXPECT_EQ(nc::checksum(back.params.named()), nc::checksum(m.params.named()));
  std::filesystem::remove_all(dir);
}
