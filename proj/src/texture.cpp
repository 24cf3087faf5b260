#include "hpgm/texture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

namespace hpgm::tex {

namespace {

constexpr std::size_t kKernel = 5;

void require_condition(const TextureCondition& c) {
  if (c.p.size() != kMaterials || c.q.size() != kColours)
    throw nc::ShapeMismatch("texture condition must have " + std::to_string(kMaterials) + " material and " +
                            std::to_string(kColours) + " colour entries");
}

nc::Tensor trainable(nc::Tensor t) {
  t.set_requires_grad();
  return t;
}

std::vector<std::size_t> generator_widths(std::size_t in, std::size_t f) { return {in, 8 * f, 4 * f, 2 * f, f, 3}; }
std::vector<std::size_t> discriminator_widths(std::size_t f) { return {3, f, 2 * f, 4 * f, 8 * f, 8 * f}; }

int argmax_row(const nc::Tensor& t, std::size_t row) {
  const std::size_t k = t.dim(1);
  int best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (t[row * k + j] > t[row * k + static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  return best;
}

}  // namespace

nlohmann::json LctGanConfig::to_json() const {
  return {{"base_width", base_width},
          {"noise_dim", noise_dim},
          {"input_w", input_w},
          {"input_h", input_h},
          {"lr", lr},
          {"beta1", beta1},
          {"batch", batch},
          {"iterations", iterations},
          {"lambda_material", lambda_material},
          {"lambda_colour", lambda_colour},
          {"init_std", init_std},
          {"seed", seed}};
}

LctGanConfig LctGanConfig::from_json(const nlohmann::json& j) {
  LctGanConfig c;
  c.base_width = j.value("base_width", c.base_width);
  c.noise_dim = j.value("noise_dim", c.noise_dim);
  c.input_w = j.value("input_w", c.input_w);
  c.input_h = j.value("input_h", c.input_h);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.batch = j.value("batch", c.batch);
  c.iterations = j.value("iterations", c.iterations);
  c.lambda_material = j.value("lambda_material", c.lambda_material);
  c.lambda_colour = j.value("lambda_colour", c.lambda_colour);
  c.init_std = j.value("init_std", c.init_std);
  c.seed = j.value("seed", c.seed);
  if (c.lambda_material < 0 || c.lambda_colour < 0) throw std::invalid_argument("loss weights must be >= 0");
  return c;
}

nc::Tensor sample_noise(std::size_t w, std::size_t h, std::size_t noise_dim, std::uint64_t seed) {
  if (w < 1 || h < 1) throw std::invalid_argument("noise grid must be at least 1 x 1");
  return nc::init_normal({1, noise_dim, h, w}, 0.0, 1.0, seed);
}

nc::Tensor build_input(const TextureCondition& cond, const nc::Tensor& noise) {
  require_condition(cond);
  if (noise.rank() != 4 || noise.dim(0) != 1) throw nc::ShapeMismatch("noise must be (1, d1, h, w)");
  const std::size_t d1 = noise.dim(1), h = noise.dim(2), w = noise.dim(3), plane = h * w;
  nc::Tensor z({1, d1 + kMaterials + kColours, h, w});
  auto out = z.data();
  std::copy(noise.data().begin(), noise.data().end(), out.begin());
  for (std::size_t k = 0; k < kMaterials; ++k)
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((d1 + k) * plane), plane, cond.p[k]);
  for (std::size_t k = 0; k < kColours; ++k)
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((d1 + kMaterials + k) * plane), plane, cond.q[k]);
  return z;
}

nc::Tensor build_input(const TextureCondition& cond, std::size_t w, std::size_t h, std::size_t noise_dim,
                       std::uint64_t seed) {
  return build_input(cond, sample_noise(w, h, noise_dim, seed));
}

GeneratorParams GeneratorParams::init(std::size_t in_channels, std::size_t f, double stddev, std::uint64_t seed) {
  GeneratorParams g;
  const auto widths = generator_widths(in_channels, f);
  for (std::size_t k = 0; k < kUpsampleBlocks; ++k) {
    const std::string tag = "g.conv" + std::to_string(k);
    g.conv_w.push_back(trainable(
        nc::init_normal({widths[k + 1], widths[k], kKernel, kKernel}, 0.0, stddev, nc::derive_seed(seed, tag))));
    g.conv_b.push_back(trainable(nc::Tensor({widths[k + 1]}, 0.0)));
    if (k + 1 < kUpsampleBlocks) {
      g.bn_gamma.push_back(
          trainable(nc::init_normal({widths[k + 1]}, 1.0, stddev, nc::derive_seed(seed, "g.bn" + std::to_string(k)))));
      g.bn_beta.push_back(trainable(nc::Tensor({widths[k + 1]}, 0.0)));
      g.bn_stats.emplace_back(widths[k + 1]);
    }
  }
  return g;
}

nc::ParameterSet GeneratorParams::named() const {
  nc::ParameterSet out;
  for (std::size_t k = 0; k < conv_w.size(); ++k) {
    out.push_back({"g.conv" + std::to_string(k) + ".w", conv_w[k]});
    out.push_back({"g.conv" + std::to_string(k) + ".b", conv_b[k]});
    if (k < bn_gamma.size()) {
      out.push_back({"g.bn" + std::to_string(k) + ".gamma", bn_gamma[k]});
      out.push_back({"g.bn" + std::to_string(k) + ".beta", bn_beta[k]});
    }
  }
  return out;
}

nc::ParameterSet GeneratorParams::state() const {
  nc::ParameterSet out = named();
  for (std::size_t k = 0; k < bn_stats.size(); ++k) {
    out.push_back({"g.bn" + std::to_string(k) + ".running_mean", bn_stats[k].running_mean});
    out.push_back({"g.bn" + std::to_string(k) + ".running_var", bn_stats[k].running_var});
  }
  return out;
}

DiscriminatorParams DiscriminatorParams::init(std::size_t f, double stddev, std::uint64_t seed) {
  DiscriminatorParams d;
  const auto widths = discriminator_widths(f);
  for (std::size_t k = 0; k < kUpsampleBlocks; ++k) {
    d.conv_w.push_back(trainable(nc::init_normal({widths[k + 1], widths[k], kKernel, kKernel}, 0.0, stddev,
                                                 nc::derive_seed(seed, "d.conv" + std::to_string(k)))));
    d.conv_b.push_back(trainable(nc::Tensor({widths[k + 1]}, 0.0)));
  }
  const std::size_t feat = widths.back();
  d.real_w = trainable(nc::init_normal({feat, 1}, 0.0, stddev, nc::derive_seed(seed, "d.real")));
  d.real_b = trainable(nc::Tensor({1}, 0.0));
  d.material_w = trainable(nc::init_normal({feat, kMaterials}, 0.0, stddev, nc::derive_seed(seed, "d.material")));
  d.material_b = trainable(nc::Tensor({kMaterials}, 0.0));
  d.colour_w = trainable(nc::init_normal({feat, kColours}, 0.0, stddev, nc::derive_seed(seed, "d.colour")));
  d.colour_b = trainable(nc::Tensor({kColours}, 0.0));
  return d;
}

nc::ParameterSet DiscriminatorParams::named() const {
  nc::ParameterSet out;
  for (std::size_t k = 0; k < conv_w.size(); ++k) {
    out.push_back({"d.conv" + std::to_string(k) + ".w", conv_w[k]});
    out.push_back({"d.conv" + std::to_string(k) + ".b", conv_b[k]});
  }
  out.push_back({"d.real.w", real_w});
  out.push_back({"d.real.b", real_b});
  out.push_back({"d.material.w", material_w});
  out.push_back({"d.material.b", material_b});
  out.push_back({"d.colour.w", colour_w});
  out.push_back({"d.colour.b", colour_b});
  return out;
}

namespace {

nc::Tensor generator_body(const nc::Tensor& z, const GeneratorParams& g, std::vector<nc::BatchNormStats>& stats,
                          nc::BatchNormMode mode) {
  if (z.rank() != 4 || z.dim(1) != g.conv_w.front().dim(1))
    throw nc::ShapeMismatch("generator input must be (N, " + std::to_string(g.conv_w.front().dim(1)) + ", h, w)");
  nc::Tensor h = z;
  for (std::size_t k = 0; k < kUpsampleBlocks; ++k) {
    h = nc::conv2d(nc::upsample2x_nearest(h), g.conv_w[k], g.conv_b[k], {1, 2});
    if (k + 1 < kUpsampleBlocks) h = nc::relu(nc::batchnorm2d(h, g.bn_gamma[k], g.bn_beta[k], stats[k], mode));
    else h = nc::tanh(h);
  }
  return h;
}

}  // namespace

nc::Tensor generator_forward(const nc::Tensor& z, GeneratorParams& g, nc::BatchNormMode mode) {
  return generator_body(z, g, g.bn_stats, mode);
}

nc::Tensor generator_forward_scratch(const nc::Tensor& z, const GeneratorParams& g) {
  std::vector<nc::BatchNormStats> scratch;
  for (const auto& s : g.bn_stats) {
    nc::BatchNormStats copy(s.running_mean.size());
    copy.running_mean = s.running_mean.clone();
    copy.running_var = s.running_var.clone();
    copy.momentum = s.momentum;
    copy.eps = s.eps;
    scratch.push_back(copy);
  }
  return generator_body(z, g, scratch, nc::BatchNormMode::kTrain);
}

DiscriminatorOutput discriminator_forward(const nc::Tensor& x, const DiscriminatorParams& d) {
  if (x.rank() != 4 || x.dim(1) != 3) throw nc::ShapeMismatch("discriminator input must be (N, 3, H, W)");
  nc::Tensor h = x;
  for (std::size_t k = 0; k < d.conv_w.size(); ++k) h = nc::leaky_relu(nc::conv2d(h, d.conv_w[k], d.conv_b[k], {2, 2}), 0.2);
  const nc::Tensor feat = nc::global_avg_pool(h);
  DiscriminatorOutput out;
  out.real = nc::sigmoid(nc::add(nc::matmul(feat, d.real_w), d.real_b));
  out.material_logits = nc::add(nc::matmul(feat, d.material_w), d.material_b);
  out.colour_logits = nc::add(nc::matmul(feat, d.colour_w), d.colour_b);
  return out;
}

nc::Tensor loss_d_adv(const nc::Tensor& d_real, const nc::Tensor& d_fake) {
  return nc::add(nc::bce_loss(d_real, nc::Tensor(d_real.shape(), 1.0)),
                 nc::bce_loss(d_fake, nc::Tensor(d_fake.shape(), 0.0)));
}

nc::Tensor loss_g_adv(const nc::Tensor& d_fake) { return nc::bce_loss(d_fake, nc::Tensor(d_fake.shape(), 1.0)); }

nc::Tensor loss_class(const nc::Tensor& logits_real, const nc::Tensor& logits_fake, const std::vector<int>& labels) {
  return nc::add(nc::softmax_cross_entropy(logits_real, labels), nc::softmax_cross_entropy(logits_fake, labels));
}

nc::Tensor loss_total(const nc::Tensor& adv, const nc::Tensor& mat, const nc::Tensor& col, double lambda_m,
                      double lambda_c) {
  return nc::add(adv, nc::add(nc::scale(mat, lambda_m), nc::scale(col, lambda_c)));
}

nc::Tensor image_to_tensor(const Image& img) {
  const std::size_t w = static_cast<std::size_t>(img.width), h = static_cast<std::size_t>(img.height);
  nc::Tensor t({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        t[(c * h + y) * w + x] = img.rgb[(y * w + x) * 3 + c] / 127.5 - 1.0;
  return t;
}

Image tensor_to_image(const nc::Tensor& t, std::size_t index) {
  const bool batched = t.rank() == 4;
  if (!(batched || t.rank() == 3)) throw nc::ShapeMismatch("image tensor must be (3, H, W) or (N, 3, H, W)");
  const std::size_t c0 = batched ? 1 : 0;
  if (t.dim(c0) != 3) throw nc::ShapeMismatch("image tensor must have 3 channels");
  const std::size_t h = t.dim(c0 + 1), w = t.dim(c0 + 2);
  const std::size_t base = batched ? index * 3 * h * w : 0;
  Image img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp((t[base + (c * h + y) * w + x] + 1.0) * 127.5, 0.0, 255.0);
        img.rgb[(y * w + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
      }
  return img;
}

LctGanModel LctGanModel::init(const LctGanConfig& config) {
  LctGanModel m;
  m.config = config;
  m.g = GeneratorParams::init(config.input_channels(), config.base_width, config.init_std, nc::derive_seed(config.seed, "generator"));
  m.d = DiscriminatorParams::init(config.base_width, config.init_std, nc::derive_seed(config.seed, "discriminator"));
  return m;
}

Image LctGanModel::generate_from_noise(const TextureCondition& cond, const nc::Tensor& noise) const {
  std::vector<nc::BatchNormStats> stats = g.bn_stats;  // shares storage; inference mode only reads
  return tensor_to_image(generator_body(build_input(cond, noise), g, stats, nc::BatchNormMode::kInference));
}

Image LctGanModel::generate(const TextureCondition& cond, std::size_t w, std::size_t h, std::uint64_t seed) const {
  return generate_from_noise(cond, sample_noise(w, h, config.noise_dim, seed));
}

std::string LctGanModel::checksum() const {
  nc::ParameterSet all = g.state();
  for (auto& p : d.named()) all.push_back(p);
  return nc::checksum(all);
}

void LctGanModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nc::ParameterSet all = g.state();
  for (auto& p : d.named()) all.push_back(p);
  nc::save_checkpoint(dir / "texture.ckpt", all);
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [m, c] : seen_pairs) pairs.push_back({m, c});
  nlohmann::json manifest{{"config", config.to_json()}, {"checksum", checksum()}, {"seen_pairs", pairs}};
  std::ofstream(dir / "texture.json") << manifest.dump(2) << "\n";
}

LctGanModel LctGanModel::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "texture.json");
  if (!is) throw nc::CheckpointError("missing " + (dir / "texture.json").string());
  const auto manifest = nlohmann::json::parse(is);
  LctGanModel m = init(LctGanConfig::from_json(manifest.at("config")));
  nc::ParameterSet all = m.g.state();
  for (auto& p : m.d.named()) all.push_back(p);
  nc::assign_parameters(all, nc::load_checkpoint(dir / "texture.ckpt"));
  for (const auto& n : all) n.tensor.impl()->requires_grad = false;
  for (const auto& pair : manifest.value("seen_pairs", nlohmann::json::array()))
    m.seen_pairs.insert({pair.at(0).get<int>(), pair.at(1).get<int>()});
  return m;
}

namespace {

nc::Tensor condition_batch(const LctGanConfig& config, const std::vector<int>& materials,
                           const std::vector<int>& colours, std::size_t w, std::size_t h, std::uint64_t seed) {
  const std::size_t n = materials.size();
  const std::size_t c = config.input_channels(), plane = w * h;
  const nc::Tensor noise = nc::init_normal({n, config.noise_dim, h, w}, 0.0, 1.0, seed);
  nc::Tensor z({n, c, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = z.data().begin() + static_cast<std::ptrdiff_t>(i * c * plane);
    std::copy_n(noise.data().begin() + static_cast<std::ptrdiff_t>(i * config.noise_dim * plane),
                config.noise_dim * plane, dst);
    std::fill_n(dst + static_cast<std::ptrdiff_t>((config.noise_dim + static_cast<std::size_t>(materials[i])) * plane),
                plane, 1.0);
    std::fill_n(dst + static_cast<std::ptrdiff_t>((config.noise_dim + kMaterials + static_cast<std::size_t>(colours[i])) * plane),
                plane, 1.0);
  }
  return z;
}

}  // namespace

TrainStep train_iteration(LctGanModel& model, nc::Adam& opt_g, nc::Adam& opt_d, const nc::Tensor& real,
                          const std::vector<int>& materials, const std::vector<int>& colours, std::uint64_t seed) {
  const LctGanConfig& cfg = model.config;
  const std::size_t w = real.dim(3) / kScale, h = real.dim(2) / kScale;
  TrainStep step;

  // D-step: generated batch without gradient to G, running statistics untouched.
  {
    const nc::Tensor fake = generator_forward_scratch(condition_batch(cfg, materials, colours, w, h,
                                                                      nc::derive_seed(seed, "d-noise")),
                                                      model.g)
                                .detach();
    nc::Tape tape;
    const auto r = discriminator_forward(real, model.d);
    const auto f = discriminator_forward(fake, model.d);
    const nc::Tensor adv = loss_d_adv(r.real, f.real);
    const nc::Tensor lm = loss_class(r.material_logits, f.material_logits, materials);
    const nc::Tensor lc = loss_class(r.colour_logits, f.colour_logits, colours);
    const nc::Tensor total = loss_total(adv, lm, lc, cfg.lambda_material, cfg.lambda_colour);
    opt_d.zero_grad();
    tape.backward(total);
    opt_d.step();
    step.loss_d = total.item();
    step.loss_material = lm.item();
    step.loss_colour = lc.item();
    std::size_t hit_m = 0, hit_c = 0;
    for (std::size_t i = 0; i < materials.size(); ++i) {
      hit_m += argmax_row(r.material_logits, i) == materials[i];
      hit_c += argmax_row(r.colour_logits, i) == colours[i];
    }
    step.real_material_acc = static_cast<double>(hit_m) / static_cast<double>(materials.size());
    step.real_colour_acc = static_cast<double>(hit_c) / static_cast<double>(colours.size());
  }

  // G-step: fresh noise, the real-batch classifier terms are constant in G.
  {
    nc::Tape tape;
    const nc::Tensor fake = generator_forward(
        condition_batch(cfg, materials, colours, w, h, nc::derive_seed(seed, "g-noise")), model.g,
        nc::BatchNormMode::kTrain);
    const auto f = discriminator_forward(fake, model.d);
    const nc::Tensor total =
        loss_total(loss_g_adv(f.real), nc::softmax_cross_entropy(f.material_logits, materials),
                   nc::softmax_cross_entropy(f.colour_logits, colours), cfg.lambda_material, cfg.lambda_colour);
    opt_g.zero_grad();
    tape.backward(total);
    opt_g.step();
    opt_d.zero_grad();
    step.loss_g = total.item();
  }
  return step;
}

TrainOutcome train_lctgan(const std::vector<TextureSample>& data, const LctGanConfig& config,
                          const std::function<void(int, const TrainStep&)>& on_step) {
  if (data.empty()) throw EmptyDataset("texture training set is empty");
  const nc::Shape shape = data.front().image.shape();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i].image.shape();
    if (s.size() != 3 || s[0] != 3 || s[1] != s[2] || s[1] % kScale != 0 || s[1] == 0 || s != shape)
      throw NonConformingImage("texture " + std::to_string(i) + " is not a square RGB image whose side is a multiple of 32 and matches the rest");
    if (data[i].material < 0 || data[i].material >= static_cast<int>(kMaterials) || data[i].colour < 0 ||
        data[i].colour >= static_cast<int>(kColours))
      throw std::invalid_argument("texture " + std::to_string(i) + " has an invalid condition");
  }
  TrainOutcome out;
  out.model = LctGanModel::init(config);
  for (const auto& s : data) out.model.seen_pairs.insert({s.material, s.colour});
  nc::Adam opt_g(out.model.g.named(), {config.lr, config.beta1, 0.999, 1e-8});
  nc::Adam opt_d(out.model.d.named(), {config.lr, config.beta1, 0.999, 1e-8});

  std::mt19937_64 rng(nc::derive_seed(config.seed, "batches"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const std::size_t batch = static_cast<std::size_t>(std::max(1, config.batch));
  const std::size_t per = data.front().image.size();
  for (int it = 0; it < config.iterations; ++it) {
    nc::Tensor real({batch, 3, shape[1], shape[2]});
    std::vector<int> materials, colours;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const TextureSample& s = data[order[cursor++]];
      std::copy(s.image.data().begin(), s.image.data().end(), real.data().begin() + static_cast<std::ptrdiff_t>(b * per));
      materials.push_back(s.material);
      colours.push_back(s.colour);
    }
    const TrainStep step = train_iteration(out.model, opt_g, opt_d, real, materials, colours,
                                           nc::derive_seed(config.seed, "iteration" + std::to_string(it)));
    out.trace.push_back(step);
    if (on_step) on_step(it, step);
  }
  return out;
}

std::vector<Image> interpolate_conditions(const LctGanModel& model, const TextureCondition& a,
                                          const TextureCondition& b, int steps, std::size_t w, std::size_t h,
                                          std::uint64_t seed) {
  if (steps < 2) throw std::invalid_argument("interpolation needs at least 2 steps");
  require_condition(a);
  require_condition(b);
  const nc::Tensor noise = sample_noise(w, h, model.config.noise_dim, seed);
  std::vector<Image> out;
  for (int s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / (steps - 1);
    TextureCondition c;
    for (std::size_t k = 0; k < kMaterials; ++k) c.p.push_back((1 - t) * a.p[k] + t * b.p[k]);
    for (std::size_t k = 0; k < kColours; ++k) c.q.push_back((1 - t) * a.q[k] + t * b.q[k]);
    if (s == 0) c = a;
    if (s == steps - 1) c = b;
    out.push_back(model.generate_from_noise(c, noise));
  }
  return out;
}

NovelResult generate_novel(const LctGanModel& model, const TextureCondition& cond, std::size_t w, std::size_t h,
                           std::uint64_t seed) {
  NovelResult r;
  r.image = model.generate(cond, w, h, seed);
  r.out_of_distribution = !model.seen_pairs.count({cond.material(), cond.colour()});
  return r;
}

}  // namespace hpgm::tex
