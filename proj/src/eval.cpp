#include "hpgm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "hpgm/dataset.hpp"
#include "hpgm/numcore/ops.hpp"

namespace hpgm::eval {

double iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double uni = std::max(0.0, a.area()) + std::max(0.0, b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double mean_iou(const std::vector<std::vector<BBox>>& predicted, const std::vector<std::vector<BBox>>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("mean_iou: layout counts differ");
  double total = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != truth[i].size())
      throw std::invalid_argument("mean_iou: layout " + std::to_string(i) + " has mismatched room counts");
    for (std::size_t j = 0; j < truth[i].size(); ++j, ++n) total += iou(predicted[i][j], truth[i][j]);
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

GrayImage to_gray(const Image& img) {
  GrayImage g{img.width, img.height, std::vector<double>(static_cast<std::size_t>(img.width) * img.height)};
  for (std::size_t i = 0; i < g.values.size(); ++i)
    g.values[i] = 0.299 * img.rgb[i * 3] + 0.587 * img.rgb[i * 3 + 1] + 0.114 * img.rgb[i * 3 + 2];
  return g;
}

GrayImage resize_bilinear(const GrayImage& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  GrayImage out{width, height, std::vector<double>(static_cast<std::size_t>(width) * height)};
  const double sx = static_cast<double>(img.width) / width, sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - x0;
      const double top = img.at(x0, y0) * (1 - tx) + img.at(x1, y0) * tx;
      const double bottom = img.at(x0, y1) * (1 - tx) + img.at(x1, y1) * tx;
      out.values[static_cast<std::size_t>(y) * width + x] = top * (1 - ty) + bottom * ty;
    }
  }
  return out;
}

namespace {

// Normalised Gaussian window; even sizes are centred between pixels.
std::vector<double> gaussian_window(int size, double sigma) {
  const double offset = size % 2 == 0 ? 0.5 : 0.0;
  const int radius = size / 2;
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  double total = 0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double x = offset - radius + i, y = offset - radius + j;
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>(i) * size + j] = v;
      total += v;
    }
  for (double& v : w) v /= total;
  return w;
}

std::pair<double, double> ssim_level(const GrayImage& a, const GrayImage& b, const MsSsimOptions& opt) {
  const int size = std::min({opt.filter_size, a.width, a.height});
  const double sigma = size * opt.filter_sigma / opt.filter_size;
  const auto win = gaussian_window(size, sigma);
  const double c1 = std::pow(opt.k1 * opt.max_val, 2), c2 = std::pow(opt.k2 * opt.max_val, 2);
  const int ow = a.width - size + 1, oh = a.height - size + 1;
  double ssim_sum = 0, cs_sum = 0;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double mu1 = 0, mu2 = 0, e11 = 0, e22 = 0, e12 = 0;
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
          const double w = win[static_cast<std::size_t>(i) * size + j];
          const double p = a.at(x + j, y + i), q = b.at(x + j, y + i);
          mu1 += w * p;
          mu2 += w * q;
          e11 += w * p * p;
          e22 += w * q * q;
          e12 += w * p * q;
        }
      const double s11 = e11 - mu1 * mu1, s22 = e22 - mu2 * mu2, s12 = e12 - mu1 * mu2;
      const double v1 = 2.0 * s12 + c2, v2 = s11 + s22 + c2;
      ssim_sum += ((2.0 * mu1 * mu2 + c1) * v1) / ((mu1 * mu1 + mu2 * mu2 + c1) * v2);
      cs_sum += v1 / v2;
    }
  const double n = static_cast<double>(ow) * oh;
  return {ssim_sum / n, cs_sum / n};
}

// 2 x 2 mean with edge reflection, keeping every second sample.
GrayImage downsample(const GrayImage& img) {
  const int w = (img.width + 1) / 2, h = (img.height + 1) / 2;
  GrayImage out{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int x0 = 2 * x, y0 = 2 * y;
      const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
      out.values[static_cast<std::size_t>(y) * w + x] =
          0.25 * (img.at(x0, y0) + img.at(x1, y0) + img.at(x0, y1) + img.at(x1, y1));
    }
  return out;
}

}  // namespace

double ms_ssim(const GrayImage& a, const GrayImage& b, const MsSsimOptions& opt) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("ms_ssim: image sizes differ");
  GrayImage x = opt.resize_to > 0 ? resize_bilinear(a, opt.resize_to, opt.resize_to) : a;
  GrayImage y = opt.resize_to > 0 ? resize_bilinear(b, opt.resize_to, opt.resize_to) : b;
  if (x.width < 16 || x.height < 16) throw TooSmall("ms_ssim needs at least 16 x 16 pixels after resizing");
  double result = 1.0;
  constexpr int levels = 5;
  for (int l = 0; l < levels; ++l) {
    const auto [ssim, cs] = ssim_level(x, y, opt);
    const double term = l + 1 < levels ? cs : ssim;
    result *= std::pow(std::max(0.0, term), kMsSsimWeights[l]);
    if (l + 1 < levels) {
      x = downsample(x);
      y = downsample(y);
    }
  }
  return result;
}

double ms_ssim(const Image& a, const Image& b, const MsSsimOptions& opt) {
  if (a.width != b.width || a.height != b.height || a.width != a.height)
    throw std::invalid_argument("ms_ssim: images must be square and of equal size");
  if (a.width < 32) throw TooSmall("ms_ssim: images must be at least 32 x 32");
  return ms_ssim(to_gray(a), to_gray(b), opt);
}

double mean_pairwise_ms_ssim(const std::vector<Image>& images) {
  if (images.size() < 2) throw std::invalid_argument("mean_pairwise_ms_ssim needs at least two images");
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t j = i + 1; j < images.size(); ++j, ++pairs) total += ms_ssim(images[i], images[j]);
  return total / static_cast<double>(pairs);
}

double diversity_score(const tex::LctGanModel& model, const TextureCondition& cond, int n, std::uint64_t seed,
                       std::size_t w, std::size_t h) {
  if (n < 2) throw std::invalid_argument("diversity_score needs n >= 2");
  std::vector<Image> images;
  for (int i = 0; i < n; ++i) images.push_back(model.generate(cond, w, h, nc::derive_seed(seed, "sample" + std::to_string(i))));
  return mean_pairwise_ms_ssim(images);
}

namespace {

nc::Tensor trainable(nc::Tensor t) {
  t.set_requires_grad();
  return t;
}

Image resize_rgb(const Image& img, int size) {
  if (img.width == size && img.height == size) return img;
  Image out(size, size);
  for (int c = 0; c < 3; ++c) {
    GrayImage plane{img.width, img.height, std::vector<double>(static_cast<std::size_t>(img.width) * img.height)};
    for (std::size_t i = 0; i < plane.values.size(); ++i) plane.values[i] = img.rgb[i * 3 + static_cast<std::size_t>(c)];
    const GrayImage r = resize_bilinear(plane, size, size);
    for (std::size_t i = 0; i < r.values.size(); ++i)
      out.rgb[i * 3 + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(std::clamp(r.values[i], 0.0, 255.0)));
  }
  return out;
}

nc::Tensor batch_tensor(const std::vector<const Image*>& images, std::size_t size) {
  const std::size_t per = 3 * size * size;
  nc::Tensor t({images.size(), 3, size, size});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const nc::Tensor one = tex::image_to_tensor(resize_rgb(*images[i], static_cast<int>(size)));
    std::copy(one.data().begin(), one.data().end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return t;
}

int argmax_row(const nc::Tensor& t, std::size_t row) {
  const std::size_t k = t.dim(1);
  int best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (t[row * k + j] > t[row * k + static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  return best;
}

}  // namespace

ProbeClassifier ProbeClassifier::init(const ProbeConfig& config) {
  ProbeClassifier p;
  p.config = config;
  const std::size_t f = config.width;
  const std::size_t widths[] = {3, f, 2 * f, 4 * f};
  for (std::size_t k = 0; k < 3; ++k) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(widths[k] * 25));
    p.conv_w.push_back(trainable(nc::init_normal({widths[k + 1], widths[k], 5, 5}, 0.0, stddev,
                                                 nc::derive_seed(config.seed, "probe.conv" + std::to_string(k)))));
    p.conv_b.push_back(trainable(nc::Tensor({widths[k + 1]}, 0.0)));
  }
  const double head_std = std::sqrt(1.0 / static_cast<double>(4 * f));
  p.material_w = trainable(nc::init_normal({4 * f, tex::kMaterials}, 0.0, head_std, nc::derive_seed(config.seed, "probe.material")));
  p.material_b = trainable(nc::Tensor({tex::kMaterials}, 0.0));
  p.colour_w = trainable(nc::init_normal({4 * f, tex::kColours}, 0.0, head_std, nc::derive_seed(config.seed, "probe.colour")));
  p.colour_b = trainable(nc::Tensor({tex::kColours}, 0.0));
  return p;
}

nc::ParameterSet ProbeClassifier::named() const {
  nc::ParameterSet out;
  for (std::size_t k = 0; k < conv_w.size(); ++k) {
    out.push_back({"probe.conv" + std::to_string(k) + ".w", conv_w[k]});
    out.push_back({"probe.conv" + std::to_string(k) + ".b", conv_b[k]});
  }
  out.push_back({"probe.material.w", material_w});
  out.push_back({"probe.material.b", material_b});
  out.push_back({"probe.colour.w", colour_w});
  out.push_back({"probe.colour.b", colour_b});
  return out;
}

std::pair<nc::Tensor, nc::Tensor> ProbeClassifier::forward(const nc::Tensor& x) const {
  nc::Tensor h = x;
  for (std::size_t k = 0; k < conv_w.size(); ++k) h = nc::leaky_relu(nc::conv2d(h, conv_w[k], conv_b[k], {2, 2}), 0.2);
  const nc::Tensor feat = nc::global_avg_pool(h);
  return {nc::add(nc::matmul(feat, material_w), material_b), nc::add(nc::matmul(feat, colour_w), colour_b)};
}

std::pair<int, int> ProbeClassifier::predict(const Image& img) const {
  if (!trained) throw UntrainedProbe();
  const auto [m, c] = forward(batch_tensor({&img}, config.input_size));
  return {argmax_row(m, 0), argmax_row(c, 0)};
}

std::pair<double, double> ProbeClassifier::accuracy(const std::vector<Image>& images, const std::vector<int>& materials,
                                                    const std::vector<int>& colours) const {
  if (!trained) throw UntrainedProbe();
  if (images.empty()) return {0, 0};
  std::size_t hm = 0, hc = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto [m, c] = predict(images[i]);
    hm += m == materials[i];
    hc += c == colours[i];
  }
  const double n = static_cast<double>(images.size());
  return {hm / n, hc / n};
}

void ProbeClassifier::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nc::save_checkpoint(dir / "probe.ckpt", named());
  nlohmann::json manifest{{"width", config.width},
                          {"input_size", config.input_size},
                          {"trained", trained},
                          {"test_material_acc", test_material_acc},
                          {"test_colour_acc", test_colour_acc},
                          {"checksum", nc::checksum(named())}};
  std::ofstream(dir / "probe.json") << manifest.dump(2) << "\n";
}

ProbeClassifier ProbeClassifier::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "probe.json");
  if (!is) throw nc::CheckpointError("missing " + (dir / "probe.json").string());
  const auto manifest = nlohmann::json::parse(is);
  ProbeConfig cfg;
  cfg.width = manifest.at("width").get<std::size_t>();
  cfg.input_size = manifest.at("input_size").get<std::size_t>();
  ProbeClassifier p = init(cfg);
  auto named = p.named();
  nc::assign_parameters(named, nc::load_checkpoint(dir / "probe.ckpt"));
  for (const auto& n : named) n.tensor.impl()->requires_grad = false;
  p.trained = manifest.at("trained").get<bool>();
  p.test_material_acc = manifest.value("test_material_acc", 0.0);
  p.test_colour_acc = manifest.value("test_colour_acc", 0.0);
  return p;
}

ProbeClassifier train_probe(const std::vector<LabelledImage>& train, const std::vector<LabelledImage>& test,
                            const ProbeConfig& config) {
  if (train.empty()) throw std::invalid_argument("probe training set is empty");
  ProbeClassifier p = ProbeClassifier::init(config);
  nc::Adam opt(p.named(), {config.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 rng(nc::derive_seed(config.seed, "probe.batches"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(std::max(1, config.batch));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<const Image*> imgs;
      std::vector<int> mats, cols;
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) {
        imgs.push_back(&train[order[k]].image);
        mats.push_back(train[order[k]].material);
        cols.push_back(train[order[k]].colour);
      }
      nc::Tape tape;
      const auto [m, c] = p.forward(batch_tensor(imgs, config.input_size));
      const nc::Tensor loss = nc::add(nc::softmax_cross_entropy(m, mats), nc::softmax_cross_entropy(c, cols));
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
    }
  }
  for (const auto& n : p.named()) n.tensor.impl()->requires_grad = false;
  p.trained = true;
  std::vector<Image> imgs;
  std::vector<int> mats, cols;
  for (const auto& s : test) {
    imgs.push_back(s.image);
    mats.push_back(s.material);
    cols.push_back(s.colour);
  }
  std::tie(p.test_material_acc, p.test_colour_acc) = p.accuracy(imgs, mats, cols);
  return p;
}

std::vector<LabelledImage> probe_corpus(int per_pair, int size, std::uint64_t seed) {
  std::vector<LabelledImage> out;
  for (int m = 0; m < static_cast<int>(tex::kMaterials); ++m)
    for (int c = 0; c < static_cast<int>(tex::kColours); ++c)
      for (int k = 0; k < per_pair; ++k) {
        const std::uint64_t s =
            nc::derive_seed(seed, "probe" + std::to_string(m) + "/" + std::to_string(c) + "/" + std::to_string(k));
        out.push_back({data::render_texture(m, c, size, s), m, c});
      }
  return out;
}

Alignment alignment_accuracy(const tex::LctGanModel& model, const std::vector<std::pair<int, int>>& conditions,
                             const ProbeClassifier& probe, std::uint64_t seed, std::size_t w, std::size_t h) {
  if (!probe.trained) throw UntrainedProbe();
  Alignment a;
  std::size_t hm = 0, hc = 0;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    const auto [m, c] = conditions[i];
    TextureCondition cond;
    cond.p.assign(tex::kMaterials, 0.0);
    cond.q.assign(tex::kColours, 0.0);
    cond.p[static_cast<std::size_t>(m)] = 1.0;
    cond.q[static_cast<std::size_t>(c)] = 1.0;
    const Image img = model.generate(cond, w, h, nc::derive_seed(seed, "align" + std::to_string(i)));
    const auto [pm, pc] = probe.predict(img);
    hm += pm == m;
    hc += pc == c;
  }
  a.n = conditions.size();
  if (a.n) {
    a.material_acc = static_cast<double>(hm) / static_cast<double>(a.n);
    a.colour_acc = static_cast<double>(hc) / static_cast<double>(a.n);
  }
  return a;
}

nlohmann::json EvalReport::to_json() const {
  return {{"mean_iou", mean_iou},
          {"per_room_iou", per_room_iou},
          {"ms_ssim", ms_ssim},
          {"material_acc", material_acc},
          {"colour_acc", colour_acc},
          {"probe_material_acc", probe_material_acc},
          {"probe_colour_acc", probe_colour_acc},
          {"n_samples", n_samples},
          {"fid", nullptr},
          {"fid_note", "FID is not computed; it needs a pretrained Inception network"}};
}

std::string EvalReport::table() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "Layout\n  mean IoU            %.4f  (%zu rooms)\n"
                "Texture\n  MS-SSIM             %.4f\n  material alignment  %.4f  (probe ceiling %.4f)\n"
                "  colour alignment    %.4f  (probe ceiling %.4f)\n  FID                 not computed\n",
                mean_iou, per_room_iou.size(), ms_ssim, material_acc, probe_material_acc, colour_acc,
                probe_colour_acc);
  return buf;
}

}  // namespace hpgm::eval
