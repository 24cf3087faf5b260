#include "hpgm/layout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "hpgm/numcore/ops.hpp"

namespace hpgm::layout {

nlohmann::json GcLpnConfig::to_json() const {
  return {{"hidden", hidden}, {"gcn_on", gcn_on}, {"softmax_on", softmax_on}, {"lr", lr},          {"epochs", epochs},
          {"batch", batch},   {"init_std", init_std}, {"seed", seed}, {"validation_fraction", validation_fraction},
          {"mirror_augment", mirror_augment}};
}

GcLpnConfig GcLpnConfig::from_json(const nlohmann::json& j) {
  GcLpnConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.gcn_on = j.value("gcn_on", c.gcn_on);
  c.softmax_on = j.value("softmax_on", c.softmax_on);
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.init_std = j.value("init_std", c.init_std);
  c.seed = j.value("seed", c.seed);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.mirror_augment = j.value("mirror_augment", c.mirror_augment);
  if (c.hidden == 0 || c.epochs < 0 || c.batch < 1 || c.lr < 0 || c.validation_fraction < 0 ||
      c.validation_fraction >= 1)
    throw std::invalid_argument("layout config: hidden, epochs, batch and lr must be positive");
  return c;
}

GcLpnParams GcLpnParams::init(std::size_t d, std::size_t hidden, double stddev, std::uint64_t seed) {
  GcLpnParams p;
  p.w0 = nc::init_normal({d, d}, 0.0, stddev, nc::derive_seed(seed, "w0"));
  p.w1 = nc::init_normal({d, d}, 0.0, stddev, nc::derive_seed(seed, "w1"));
  p.mlp_w1 = nc::init_normal({d, hidden}, 0.0, stddev, nc::derive_seed(seed, "mlp_w1"));
  p.mlp_b1 = nc::Tensor({hidden}, 0.0);
  p.mlp_w2 = nc::init_normal({hidden, 4}, 0.0, stddev, nc::derive_seed(seed, "mlp_w2"));
  p.mlp_b2 = nc::Tensor({4}, 0.0);
  for (auto* t : {&p.w0, &p.w1, &p.mlp_w1, &p.mlp_b1, &p.mlp_w2, &p.mlp_b2}) t->set_requires_grad();
  return p;
}

nc::ParameterSet GcLpnParams::named() const {
  return {{"w0", w0}, {"w1", w1}, {"mlp_w1", mlp_w1}, {"mlp_b1", mlp_b1}, {"mlp_w2", mlp_w2}, {"mlp_b2", mlp_b2}};
}

nc::ParameterSet GcLpnParams::trainable(const GcLpnConfig& config) const {
  auto all = named();
  if (config.gcn_on) return all;
  return {all.begin() + 2, all.end()};
}

nc::Tensor gcn_forward(const nc::Tensor& x, const nc::Tensor& a, const GcLpnParams& p, bool softmax_on) {
  const nc::Tensor hidden = nc::relu(nc::matmul(nc::matmul(a, x), p.w0));
  const nc::Tensor logits = nc::matmul(nc::matmul(a, hidden), p.w1);
  const nc::Tensor y = softmax_on ? nc::softmax(logits, 1) : logits;
  return nc::add(x, y);
}

nc::Tensor predict_boxes(const nc::Tensor& s, const GcLpnParams& p) {
  const nc::Tensor h = nc::relu(nc::add(nc::matmul(s, p.mlp_w1), p.mlp_b1));
  return nc::add(nc::matmul(h, p.mlp_w2), p.mlp_b2);
}

nc::Tensor clpn_forward(const nc::Tensor& x, const GcLpnParams& p) { return predict_boxes(x, p); }

nc::Tensor forward(const FeatureMatrix& x, const AdjacencyMatrix& a, const GcLpnParams& p, const GcLpnConfig& config) {
  if (!config.gcn_on) return clpn_forward(x.values, p);
  return predict_boxes(gcn_forward(x.values, a.values, p, config.softmax_on), p);
}

nc::Tensor layout_loss(const nc::Tensor& pred, const nc::Tensor& truth) {
  if (pred.shape() != truth.shape()) throw LengthMismatch("layout_loss: prediction and truth differ in shape");
  if (pred.rank() != 2 || pred.dim(1) != 4 || pred.dim(0) == 0)
    throw LengthMismatch("layout_loss: expected N x 4 boxes");
  const nc::Tensor d = nc::sub(pred, truth);
  return nc::scale(nc::sum(nc::mul(d, d)), 1.0 / static_cast<double>(pred.dim(0)));
}

double layout_loss(const std::vector<BBox>& pred, const std::vector<BBox>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw LengthMismatch("layout_loss: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " truths");
  return layout_loss(boxes_to_tensor(pred), boxes_to_tensor(truth)).item();
}

nc::Tensor boxes_to_tensor(const std::vector<BBox>& boxes) {
  nc::Tensor t({boxes.size(), 4});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    t[i * 4 + 0] = boxes[i].x0;
    t[i * 4 + 1] = boxes[i].y0;
    t[i * 4 + 2] = boxes[i].x1;
    t[i * 4 + 3] = boxes[i].y1;
  }
  return t;
}

std::vector<BBox> tensor_to_boxes(const nc::Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 4) throw nc::ShapeMismatch("tensor_to_boxes expects N x 4, got " + nc::to_string(t.shape()));
  std::vector<BBox> out(t.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {t[i * 4], t[i * 4 + 1], t[i * 4 + 2], t[i * 4 + 3]};
  return out;
}

BBox clamp_box(const BBox& b) {
  const double px = 1.0 / kCanvasPixels;
  auto fix = [px](double lo, double hi, double& out_lo, double& out_hi) {
    if (lo > hi) std::swap(lo, hi);
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    if (hi - lo < px) {
      if (lo + px <= 1.0) hi = lo + px;
      else lo = hi - px;
    }
    out_lo = lo;
    out_hi = hi;
  };
  BBox out;
  fix(b.x0, b.x1, out.x0, out.x1);
  fix(b.y0, b.y1, out.y0, out.y1);
  return out;
}

BBox mlg_box(double cx, double cy, double size_sqm, double rho) {
  const double area = size_sqm / kCanvasArea;
  const double w = std::sqrt(area * rho), h = std::sqrt(area / rho);
  return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

std::vector<BBox> mlg_baseline(const text::HouseSpec& spec, const text::Vocabularies& vocab, std::uint64_t seed) {
  std::mt19937_64 rng(nc::derive_seed(seed, "mlg"));
  std::uniform_real_distribution<double> rho(2.0 / 3.0, 1.5);
  std::vector<BBox> out;
  for (const auto& r : spec.rooms) {
    const auto [cx, cy] = position_anchor(vocab.positions.at(static_cast<std::size_t>(r.position)));
    out.push_back(mlg_box(cx, cy, r.size_sqm, rho(rng)));
  }
  return out;
}

Sample make_sample(const text::HouseSpec& spec, const std::vector<BBox>& truth, const text::Vocabularies& vocab) {
  if (truth.size() != spec.rooms.size()) throw LengthMismatch("make_sample: one box per room required");
  auto [x, a] = text::encode_layout_features(spec, vocab);
  return Sample{std::move(x), std::move(a), boxes_to_tensor(truth)};
}

std::pair<text::HouseSpec, std::vector<BBox>> mirror_house(const text::HouseSpec& spec, const std::vector<BBox>& boxes,
                                                           const text::Vocabularies& vocab, bool flip_x, bool flip_y) {
  if (boxes.size() != spec.rooms.size()) throw LengthMismatch("mirror_house: one box per room required");
  auto out = std::make_pair(spec, boxes);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    auto& b = out.second[i];
    if (flip_x) b = {1 - boxes[i].x1, b.y0, 1 - boxes[i].x0, b.y1};
    if (flip_y) b = {b.x0, 1 - boxes[i].y1, b.x1, 1 - boxes[i].y0};
    auto [ax, ay] = position_anchor(vocab.positions.at(static_cast<std::size_t>(spec.rooms[i].position)));
    if (flip_x) ax = 1 - ax;
    if (flip_y) ay = 1 - ay;
    int match = -1;
    for (std::size_t k = 0; k < vocab.positions.size() && match < 0; ++k) {
      const auto [kx, ky] = position_anchor(vocab.positions[k]);
      if (std::fabs(kx - ax) < 1e-12 && std::fabs(ky - ay) < 1e-12) match = static_cast<int>(k);
    }
    if (match < 0) throw std::invalid_argument("mirror_house: no reflected position word");
    out.first.rooms[i].position = match;
  }
  return out;
}

std::vector<Sample> mirrored_samples(const text::HouseSpec& spec, const std::vector<BBox>& boxes,
                                     const text::Vocabularies& vocab) {
  std::vector<Sample> out;
  for (int f = 0; f < 4; ++f) {
    const auto [s, b] = mirror_house(spec, boxes, vocab, f & 1, f & 2);
    out.push_back(make_sample(s, b, vocab));
  }
  return out;
}

std::vector<Sample> training_set(const std::vector<text::HouseSpec>& specs, const std::vector<std::vector<BBox>>& boxes,
                                 const text::Vocabularies& vocab, const GcLpnConfig& config) {
  if (specs.size() != boxes.size()) throw LengthMismatch("training_set: one box list per house required");
  std::vector<Sample> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (config.mirror_augment) {
      for (auto& s : mirrored_samples(specs[i], boxes[i], vocab)) out.push_back(std::move(s));
    } else {
      out.push_back(make_sample(specs[i], boxes[i], vocab));
    }
  }
  return out;
}

double dataset_loss(const std::vector<Sample>& data, const GcLpnParams& p, const GcLpnConfig& config) {
  if (data.empty()) throw EmptyDataset("dataset_loss: no samples");
  double total = 0;
  for (const auto& s : data) total += layout_loss(forward(s.x, s.a, p, config), s.truth).item();
  return total / static_cast<double>(data.size());
}

TrainResult train_gclpn(const std::vector<Sample>& data, const GcLpnConfig& config) {
  if (data.empty()) throw EmptyDataset("train_gclpn: no samples");
  const std::size_t d = data.front().x.width();
  for (const auto& s : data)
    if (s.x.width() != d) throw nc::ShapeMismatch("train_gclpn: samples disagree on feature width");

  TrainResult result{GcLpnParams::init(d, config.hidden, config.init_std, config.seed), {}, {}, -1};
  nc::Adam adam(result.params.trainable(config), nc::AdamConfig{config.lr, 0.5, 0.999, 1e-8});
  std::mt19937_64 rng(nc::derive_seed(config.seed, "batches"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Sample> held_out;
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(data.size())));
  if (data.size() >= 10 && n_val > 0) {
    for (std::size_t k = 0; k < n_val; ++k) held_out.push_back(data[order[k]]);
    order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  }
  nc::ParameterSet best;
  double best_loss = 0;

  const std::size_t batch = static_cast<std::size_t>(config.batch);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      nc::Tape tape;
      nc::Tensor total;
      for (std::size_t k = start; k < end; ++k) {
        const auto& s = data[order[k]];
        nc::Tensor l = layout_loss(forward(s.x, s.a, result.params, config), s.truth);
        epoch_loss += l.item();
        total = total.defined() ? nc::add(total, l) : l;
      }
      tape.backward(nc::scale(total, 1.0 / static_cast<double>(end - start)));
      adam.step();
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(order.size()));
    if (!held_out.empty()) {
      const double v = dataset_loss(held_out, result.params, config);
      result.validation_trace.push_back(v);
      if (best.empty() || v < best_loss) {
        best_loss = v;
        result.best_epoch = epoch;
        best.clear();
        for (const auto& n : result.params.named()) best.push_back({n.name, n.tensor.detach()});
      }
    }
  }
  if (!best.empty()) {
    auto named = result.params.named();
    nc::assign_parameters(named, best);
  } else {
    result.best_epoch = config.epochs - 1;
  }
  return result;
}

std::vector<BBox> LayoutModel::predict(const text::HouseSpec& spec, const text::Vocabularies& vocab) const {
  const auto [x, a] = text::encode_layout_features(spec, vocab);
  if (x.width() != params.feature_width())
    throw nc::ShapeMismatch("layout model expects feature width " + std::to_string(params.feature_width()) +
                            ", vocabulary gives " + std::to_string(x.width()));
  return tensor_to_boxes(forward(x, a, params, config));
}

void LayoutModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nc::save_checkpoint(dir / "layout.ckpt", params.named());
  nlohmann::json manifest{{"config", config.to_json()}, {"checksum", nc::checksum(params.named())}};
  std::ofstream(dir / "layout.json") << manifest.dump(2) << "\n";
}

LayoutModel LayoutModel::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "layout.json");
  if (!is) throw nc::CheckpointError("missing " + (dir / "layout.json").string());
  const auto manifest = nlohmann::json::parse(is);
  LayoutModel m;
  m.config = GcLpnConfig::from_json(manifest.at("config"));
  const auto loaded = nc::load_checkpoint(dir / "layout.ckpt");
  const auto w0 = std::find_if(loaded.begin(), loaded.end(), [](const auto& n) { return n.name == "w0"; });
  if (w0 == loaded.end()) throw nc::CheckpointError("layout checkpoint lacks w0");
  m.params = GcLpnParams::init(w0->tensor.dim(0), m.config.hidden, m.config.init_std, 0);
  auto named = m.params.named();
  nc::assign_parameters(named, loaded);
  for (const auto& n : named) n.tensor.impl()->requires_grad = false;
  return m;
}

}  // namespace hpgm::layout
