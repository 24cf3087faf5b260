#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hpgm/dataset.hpp"
#include "hpgm/eval.hpp"
#include "support/msssim_reference.hpp"

using namespace hpgm;
using namespace hpgm::eval;

namespace {

Image random_image(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  Image img(size, size);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(u(rng));
  return img;
}

Image constant_image(int size, std::uint8_t v) {
  Image img(size, size);
  std::fill(img.rgb.begin(), img.rgb.end(), v);
  return img;
}

Image negative(const Image& img) {
  Image out = img;
  for (auto& v : out.rgb) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

double reference_ms_ssim(const Image& a, const Image& b) {
  auto to_array = [](const Image& img) {
    testkit::ref::Array2 g(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const auto* p = img.at(x, y);
        g(y, x) = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
      }
    return g;
  };
  return testkit::ref::multiscale_ssim(testkit::ref::resize(to_array(a), 64, 64), testkit::ref::resize(to_array(b), 64, 64));
}

TextureCondition cond(int m, int c) {
  TextureCondition t;
  t.p.assign(tex::kMaterials, 0.0);
  t.q.assign(tex::kColours, 0.0);
  t.p[static_cast<std::size_t>(m)] = 1;
  t.q[static_cast<std::size_t>(c)] = 1;
  return t;
}

}  // namespace

TEST(Iou, Examples) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0);
  EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(iou({0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 0, 4, 1}), iou({1, 0, 4, 1}, {0, 0, 2, 2}));
}

TEST(Iou, MeanMatchesBruteForce) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<BBox>> pred, truth;
  double total = 0;
  int n = 0;
  for (int h = 0; h < 10; ++h) {
    pred.emplace_back();
    truth.emplace_back();
    for (int r = 0; r < 3 + h % 4; ++r) {
      const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
      const BBox t{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
      const BBox p{0.25, 0.25, 0.75, 0.75};
      pred.back().push_back(p);
      truth.back().push_back(t);
      const double ix = std::max(0.0, std::min(p.x1, t.x1) - std::max(p.x0, t.x0));
      const double iy = std::max(0.0, std::min(p.y1, t.y1) - std::max(p.y0, t.y0));
      total += ix * iy / (p.area() + t.area() - ix * iy);
      ++n;
    }
  }
  EXPECT_NEAR(mean_iou(pred, truth), total / n, 1e-12);
  EXPECT_DOUBLE_EQ(mean_iou(truth, truth), 1.0);
  EXPECT_THROW(mean_iou(pred, {}), std::invalid_argument);
}

TEST(MsSsim, IdenticalImagesScoreExactlyOne) {
  const Image a = random_image(32, 1);
  EXPECT_EQ(ms_ssim(a, a), 1.0);
  EXPECT_EQ(ms_ssim(constant_image(48, 90), constant_image(48, 90)), 1.0);
}

TEST(MsSsim, NegativeOfStructuredImageIsDissimilar) {
  const Image a = data::render_texture(3, 4, 64, 2);
  EXPECT_LT(ms_ssim(a, negative(a)), 0.2);
}

TEST(MsSsim, MatchesReference) {
  for (int i = 0; i < 20; ++i) {
    const int size = i % 2 ? 32 : 64;
    const Image a = i % 3 ? data::render_texture(i % 19, i % 12, size, static_cast<std::uint64_t>(i)) : random_image(size, static_cast<std::uint64_t>(i));
    const Image b = data::render_texture((i + 5) % 19, i % 12, size, static_cast<std::uint64_t>(100 + i));
    EXPECT_NEAR(ms_ssim(a, b), reference_ms_ssim(a, b), 1e-6) << i;
  }
}

TEST(MsSsim, SymmetricAndShiftTolerant) {
  const Image a = data::render_texture(1, 2, 32, 3), b = data::render_texture(7, 2, 32, 4);
  EXPECT_NEAR(ms_ssim(a, b), ms_ssim(b, a), 1e-12);
  Image a1 = a, b1 = b;
  for (auto& v : a1.rgb) v = static_cast<std::uint8_t>(std::min(255, v + 1));
  for (auto& v : b1.rgb) v = static_cast<std::uint8_t>(std::min(255, v + 1));
  EXPECT_LT(std::abs(ms_ssim(a1, b1) - ms_ssim(a, b)), 1e-3);
}

TEST(MsSsim, ShapeErrors) {
  EXPECT_THROW(ms_ssim(random_image(16, 1), random_image(16, 2)), TooSmall);
  EXPECT_THROW(ms_ssim(random_image(32, 1), random_image(64, 2)), std::invalid_argument);
  Image wide(64, 32);
  EXPECT_THROW(ms_ssim(wide, wide), std::invalid_argument);
}

TEST(MsSsim, GaussianWindowPath) {
  // Without resizing, 32 x 32 images run levels of 32, 16, 8, 4 and 2 pixels.
  MsSsimOptions opt;
  opt.resize_to = 0;
  const Image a = random_image(32, 5), b = random_image(32, 6);
  const double s = ms_ssim(to_gray(a), to_gray(b), opt);
  EXPECT_GE(s, 0.0);
  EXPECT_LE(s, 1.0);
}

TEST(Diversity, CollapsedGeneratorScoresOne) {
  tex::LctGanConfig cfg;
  cfg.base_width = 2;
  cfg.noise_dim = 3;
  tex::LctGanModel m = tex::LctGanModel::init(cfg);
  // Zero the noise channels of the first convolution: the output ignores Z'.
  auto& w = m.g.conv_w[0];
  const std::size_t in = w.dim(1), k2 = 25;
  for (std::size_t o = 0; o < w.dim(0); ++o)
    for (std::size_t c = 0; c < cfg.noise_dim; ++c)
      for (std::size_t k = 0; k < k2; ++k) w[(o * in + c) * k2 + k] = 0;
  EXPECT_DOUBLE_EQ(diversity_score(m, cond(1, 2), 4, 9), 1.0);
  EXPECT_THROW(diversity_score(m, cond(1, 2), 1, 9), std::invalid_argument);
}

TEST(Diversity, PermutationInvariant) {
  std::vector<Image> imgs{data::render_texture(0, 0, 32, 1), data::render_texture(5, 3, 32, 2),
                          data::render_texture(9, 7, 32, 3)};
  const double a = mean_pairwise_ms_ssim(imgs);
  std::swap(imgs[0], imgs[2]);
  EXPECT_NEAR(mean_pairwise_ms_ssim(imgs), a, 1e-12);
  EXPECT_NEAR(mean_pairwise_ms_ssim({imgs[0], imgs[1]}), ms_ssim(imgs[0], imgs[1]), 1e-15);
}

TEST(Probe, UntrainedProbeRefuses) {
  const ProbeClassifier p = ProbeClassifier::init({});
  EXPECT_THROW(p.predict(random_image(32, 1)), UntrainedProbe);
  const tex::LctGanModel m = tex::LctGanModel::init({});
  EXPECT_THROW(alignment_accuracy(m, {{0, 0}}, p, 1), UntrainedProbe);
}

TEST(Probe, LearnsColourQuickly) {
  ProbeConfig cfg;
  cfg.width = 8;
  cfg.epochs = 6;
  const auto train = probe_corpus(1, 32, 1);
  const auto test = probe_corpus(1, 32, 2);
  const ProbeClassifier p = train_probe(train, test, cfg);
  EXPECT_TRUE(p.trained);
  EXPECT_GT(p.test_colour_acc, 2.0 / 12.0);
  const auto dir = std::filesystem::temp_directory_path() / "hpgm_probe_ckpt";
  std::filesystem::remove_all(dir);
  p.save(dir);
  const ProbeClassifier back = ProbeClassifier::load(dir);
  EXPECT_EQ(back.predict(test[5].image), p.predict(test[5].image));
  EXPECT_EQ(back.test_colour_acc, p.test_colour_acc);
  std::filesystem::remove_all(dir);
}

TEST(Report, JsonFields) {
  EvalReport r;
  r.mean_iou = 0.5;
  r.per_room_iou = {0.4, 0.6};
  r.n_samples = 2;
  const auto j = r.to_json();
  EXPECT_EQ(j["mean_iou"], 0.5);
  EXPECT_EQ(j["per_room_iou"].size(), 2u);
  EXPECT_TRUE(j["fid"].is_null());
  EXPECT_NE(r.table().find("mean IoU"), std::string::npos);
}
