#include "hpgm/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hpgm/numcore/optim.hpp"
#include "hpgm/serialize.hpp"

namespace hpgm::data {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
template <class T>
const T& choose(Rng& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(v.size()) - 1))];
}

// Pixel rectangle [x0, x1) x [y0, y1) on the 512 grid.
struct PixRect {
  int x0, y0, x1, y1;
  int w() const { return x1 - x0; }
  int h() const { return y1 - y0; }
  long area() const { return static_cast<long>(w()) * h(); }
};

std::optional<std::vector<PixRect>> try_split(int n, int min_side, Rng& rng) {
  std::vector<PixRect> rects{{0, 0, static_cast<int>(kCanvasPixels), static_cast<int>(kCanvasPixels)}};
  while (static_cast<int>(rects.size()) < n) {
    std::vector<double> weights;
    for (const auto& r : rects) {
      const bool splittable = std::max(r.w(), r.h()) >= 2 * min_side;
      weights.push_back(splittable ? static_cast<double>(r.area()) : 0.0);
    }
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0; })) return std::nullopt;
    const auto k = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
    const PixRect r = rects[k];
    bool vertical_cut = r.w() >= r.h();
    if (uniform(rng, 0, 1) < 0.2) vertical_cut = !vertical_cut;
    const int extent = vertical_cut ? r.w() : r.h();
    if (extent < 2 * min_side) vertical_cut = !vertical_cut;
    const int ext = vertical_cut ? r.w() : r.h();
    const int lo = std::max(min_side, static_cast<int>(std::lround(ext * 0.3)));
    const int hi = std::min(ext - min_side, static_cast<int>(std::lround(ext * 0.7)));
    if (lo > hi) return std::nullopt;
    const int cut = uniform_int(rng, lo, hi);
    PixRect a = r, b = r;
    if (vertical_cut) {
      a.x1 = r.x0 + cut;
      b.x0 = r.x0 + cut;
    } else {
      a.y1 = r.y0 + cut;
      b.y0 = r.y0 + cut;
    }
    rects[k] = a;
    rects.push_back(b);
  }
  return rects;
}

double overlap(double a0, double a1, double b0, double b1) { return std::min(a1, b1) - std::max(a0, b0); }

const char* number_word(int n) {
  static const char* words[] = {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"};
  return n >= 0 && n <= 10 ? words[n] : nullptr;
}

std::string format_size(double size) {
  if (size == std::floor(size)) return std::to_string(static_cast<long long>(size));
  std::ostringstream os;
  os << size;
  return os.str();
}

std::string spaced(std::string word) {
  std::replace(word.begin(), word.end(), '_', ' ');
  return word;
}

}  // namespace

std::vector<std::pair<int, int>> shared_boundary_pairs(const std::vector<BBox>& boxes, double min_len) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const auto& a = boxes[i];
      const auto& b = boxes[j];
      double shared = 0;
      if (a.x1 == b.x0 || b.x1 == a.x0) shared = std::max(shared, overlap(a.y0, a.y1, b.y0, b.y1));
      if (a.y1 == b.y0 || b.y1 == a.y0) shared = std::max(shared, overlap(a.x0, a.x1, b.x0, b.x1));
      if (shared >= min_len) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return out;
}

int nearest_position(const text::Vocabularies& vocab, double x, double y) {
  int best = -1;
  double best_d = 0;
  for (std::size_t i = 0; i < vocab.positions.size(); ++i) {
    const auto [ax, ay] = position_anchor(vocab.positions[i]);
    const double d = (ax - x) * (ax - x) + (ay - y) * (ay - y);
    if (best < 0 || d < best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  return best;
}

SyntheticHouse generate_layout(int n_rooms, std::uint64_t seed, const text::Vocabularies& vocab,
                               const LayoutOptions& opt) {
  if (n_rooms < 3 || n_rooms > 10) throw std::invalid_argument("generate_layout: n_rooms must be in [3, 10]");
  const auto living = vocab.room_type_index("livingroom");
  if (!living) throw std::invalid_argument("vocabulary lacks livingroom");
  Rng rng(nc::derive_seed(seed, "layout"));
  const int min_side = static_cast<int>(std::ceil(opt.min_side_m / kMetersPerPixel));

  std::optional<std::vector<PixRect>> rects;
  for (int attempt = 0; !rects; ++attempt) {
    if (attempt > 100) throw std::runtime_error("generate_layout: could not split canvas");
    rects = try_split(n_rooms, min_side, rng);
  }
  std::shuffle(rects->begin(), rects->end(), rng);

  // Other room types, weighted towards bedrooms.
  std::vector<int> other_types;
  for (const char* t : {"bedroom", "bedroom", "washroom", "kitchen", "balcony", "study", "storage"})
    if (auto idx = vocab.room_type_index(t)) other_types.push_back(*idx);
  for (std::size_t i = 0; i < vocab.room_types.size(); ++i)
    if (static_cast<int>(i) != *living &&
        std::find(other_types.begin(), other_types.end(), static_cast<int>(i)) == other_types.end())
      other_types.push_back(static_cast<int>(i));

  std::size_t largest = 0;
  for (std::size_t i = 1; i < rects->size(); ++i)
    if ((*rects)[i].area() > (*rects)[largest].area()) largest = i;

  SyntheticHouse house;
  std::map<int, int> counters;
  for (std::size_t i = 0; i < rects->size(); ++i) {
    const auto& r = (*rects)[i];
    BBox box{r.x0 / kCanvasPixels, r.y0 / kCanvasPixels, r.x1 / kCanvasPixels, r.y1 / kCanvasPixels};
    text::RoomSpec room;
    room.room_type = i == largest ? *living : choose(rng, other_types);
    room.id = vocab.room_types[static_cast<std::size_t>(room.room_type)] + std::to_string(++counters[room.room_type]);
    room.position = nearest_position(vocab, box.cx(), box.cy());
    room.size_sqm = std::max(1.0, std::round(box.area() * kCanvasArea));
    room.floor_material = uniform_int(rng, 0, static_cast<int>(vocab.materials.size()) - 1);
    room.floor_colour = uniform_int(rng, 0, static_cast<int>(vocab.colours.size()) - 1);
    room.wall_material = uniform_int(rng, 0, static_cast<int>(vocab.materials.size()) - 1);
    room.wall_colour = uniform_int(rng, 0, static_cast<int>(vocab.colours.size()) - 1);
    house.spec.rooms.push_back(std::move(room));
    house.gt_boxes.push_back(box);
  }
  house.spec.adjacency = shared_boundary_pairs(house.gt_boxes, opt.min_shared_m / kCanvasMeters);
  house.description = render_description(house.spec, vocab, nc::derive_seed(seed, "description"));
  return house;
}

std::string render_description(const text::HouseSpec& spec, const text::Vocabularies& vocab, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream os;

  // Opening inventory sentence; it carries no room identifiers.
  std::vector<std::pair<int, int>> counts;  // (type, count) in first-mention order
  for (const auto& r : spec.rooms) {
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == r.room_type; });
    if (it == counts.end()) counts.emplace_back(r.room_type, 1);
    else ++it->second;
  }
  os << (uniform_int(rng, 0, 1) ? "The house has " : "The building contains ");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto [type, n] = counts[i];
    if (i > 0) os << (i + 1 == counts.size() ? ", and " : ", ");
    const char* w = number_word(n);
    os << (w ? std::string(w) : std::to_string(n)) << ' ' << vocab.room_types[static_cast<std::size_t>(type)]
       << (n > 1 ? "s" : "");
  }
  os << '.';

  static const char* connectives[] = {"Specifically, ", "Besides, ", "In practice, ", "Moreover, "};
  for (const auto& r : spec.rooms) {
    const std::string size = format_size(r.size_sqm);
    const std::string& pos = vocab.positions[static_cast<std::size_t>(r.position)];
    os << ' ';
    if (uniform_int(rng, 0, 4) == 0) os << connectives[uniform_int(rng, 0, 3)];
    switch (uniform_int(rng, 0, 3)) {
      case 0: os << r.id << " has " << size << " squares in " << pos << '.'; break;
      case 1: os << r.id << " has " << size << " square meters in " << pos << '.'; break;
      case 2: os << r.id << " covers " << size << " square meters located in " << pos << '.'; break;
      default: os << r.id << " is in " << pos << " with " << size << " square meters."; break;
    }
    if (!r.has_textures()) continue;
    const std::string fm = vocab.materials[static_cast<std::size_t>(*r.floor_material)];
    const std::string fc = vocab.colours[static_cast<std::size_t>(*r.floor_colour)];
    const std::string wm = vocab.materials[static_cast<std::size_t>(*r.wall_material)];
    const std::string wc = vocab.colours[static_cast<std::size_t>(*r.wall_colour)];
    os << ' ';
    switch (uniform_int(rng, 0, 7)) {
      case 0: os << r.id << " has " << fc << ' ' << fm << " floor, and wall is " << wm << " and " << wc << '.'; break;
      case 1: os << r.id << " has " << fc << ' ' << fm << " floor as well as has " << wc << ' ' << wm << " wall."; break;
      case 2: os << r.id << " wall is " << wc << ' ' << wm << " while uses " << fc << ' ' << fm << " for floor."; break;
      case 3: os << r.id << " floor is " << fc << ' ' << fm << ", and has " << wc << ' ' << wm << " wall."; break;
      case 4: os << "wall of " << r.id << " is " << wm << " and " << wc << ", and has " << fc << ' ' << fm << " floor."; break;
      case 5: {
        // Multi-word names may be spelled with spaces, except where a part
        // would read as the surface keyword itself.
        auto loose = [](const std::string& w) {
          const std::string s = spaced(w);
          return s.find("Wall ") == std::string::npos && s.find("Floor ") == std::string::npos ? s : w;
        };
        os << r.id << " uses " << loose(fc) << ' ' << loose(fm) << " for floor, and wall is " << wc << ' ' << wm << '.';
        break;
      }
      case 6: os << "floor of " << r.id << " is " << fm << " and " << fc << ", and wall is " << wc << ' ' << wm << '.'; break;
      default: os << r.id << " has " << wc << ' ' << wm << " wall as well as has " << fc << ' ' << fm << " floor."; break;
    }
  }

  // Adjacency: repeatedly take the room with most unstated pairs as hub.
  std::vector<std::pair<int, int>> remaining = spec.adjacency;
  while (!remaining.empty()) {
    std::vector<int> degree(spec.rooms.size(), 0);
    for (auto [a, b] : remaining) ++degree[static_cast<std::size_t>(a)], ++degree[static_cast<std::size_t>(b)];
    const int hub = static_cast<int>(std::max_element(degree.begin(), degree.end()) - degree.begin());
    std::vector<int> partners;
    std::vector<std::pair<int, int>> rest;
    for (auto p : remaining) {
      if (p.first == hub) partners.push_back(p.second);
      else if (p.second == hub) partners.push_back(p.first);
      else rest.push_back(p);
    }
    remaining = std::move(rest);
    std::shuffle(partners.begin(), partners.end(), rng);
    auto list = [&](const std::vector<int>& ids, const char* last_sep) {
      std::string s;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) s += (i + 1 == ids.size()) ? last_sep : ", ";
        s += spec.rooms[static_cast<std::size_t>(ids[i])].id;
      }
      return s;
    };
    const std::string& hub_id = spec.rooms[static_cast<std::size_t>(hub)].id;
    os << ' ';
    switch (uniform_int(rng, 0, 2)) {
      case 0: os << hub_id << " is adjacent to " << list(partners, ", ") << '.'; break;
      case 1: os << hub_id << " is next to " << list(partners, ", ") << '.'; break;
      default: {
        std::vector<int> ids = partners;
        ids.push_back(hub);
        os << list(ids, " and ") << " are connected.";
        break;
      }
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Textures

namespace {

enum class Pattern { kStripesH, kStripesV, kDiagonal, kGrid, kChecker, kDots, kNoise };

struct MaterialStyle {
  Pattern pattern;
  double period;  // pixels at 32 px resolution
};

// One distinct style per material index; wraps for larger vocabularies.
MaterialStyle material_style(int m) {
  static const std::array<MaterialStyle, 19> styles{{
      {Pattern::kGrid, 16},      {Pattern::kStripesH, 8},  {Pattern::kNoise, 4},     {Pattern::kStripesV, 8},
      {Pattern::kNoise, 16},     {Pattern::kStripesH, 4},  {Pattern::kStripesV, 4},  {Pattern::kChecker, 16},
      {Pattern::kGrid, 4},       {Pattern::kGrid, 8},      {Pattern::kChecker, 8},   {Pattern::kDots, 8},
      {Pattern::kDots, 4},       {Pattern::kDiagonal, 8},  {Pattern::kStripesH, 16}, {Pattern::kDots, 16},
      {Pattern::kDiagonal, 4},   {Pattern::kDiagonal, 16}, {Pattern::kChecker, 4},
  }};
  return styles[static_cast<std::size_t>(m) % styles.size()];
}

struct Tone {
  double lo, hi;
};

// Brightness range per material: overall level and pattern contrast both vary.
Tone material_tone(int m) {
  const int k = m % 19;
  const double level = 0.45 + 0.5 * ((k * 7) % 19) / 18.0;
  const double contrast = 0.15 + 0.75 * ((k * 11) % 19) / 18.0;
  return {std::max(0.05, level - contrast / 2), std::min(1.15, level + contrast / 2)};
}

// Hue (degrees), saturation, value per colour index.
Hsv colour_style(int c) {
  static const std::array<Hsv, 12> styles{{
      {223, 0.75, 0.80},  // Blue
      {0, 0.0, 0.95},     // White
      {33, 0.55, 0.70},   // Wood_color
      {55, 0.85, 0.90},   // Yellow
      {20, 0.60, 0.40},   // Earth_color
      {0, 0.0, 0.15},     // Black
      {28, 0.95, 0.95},   // Orange
      {330, 0.40, 0.95},  // Pink
      {0, 0.85, 0.80},    // Red
      {120, 0.70, 0.60},  // Green
      {0, 0.0, 0.55},     // Gray
      {280, 0.60, 0.60},  // Purple
  }};
  return styles[static_cast<std::size_t>(c) % styles.size()];
}

double pattern_value(const MaterialStyle& st, double x, double y, double phase, const std::vector<double>& noise,
                     int size) {
  const double p = st.period * size / 32.0;
  auto frac = [](double v) { return v - std::floor(v); };
  switch (st.pattern) {
    case Pattern::kStripesH: return frac((y + phase) / p) < 0.5 ? 1.0 : 0.0;
    case Pattern::kStripesV: return frac((x + phase) / p) < 0.5 ? 1.0 : 0.0;
    case Pattern::kDiagonal: return frac((x + y + phase) / p) < 0.5 ? 1.0 : 0.0;
    case Pattern::kGrid: {
      const double fx = frac((x + phase) / p), fy = frac((y + phase) / p);
      const double line = 1.5 / p;
      return (fx < line || fy < line) ? 0.0 : 1.0;
    }
    case Pattern::kChecker:
      return (static_cast<long>(std::floor((x + phase) / p)) + static_cast<long>(std::floor((y + phase) / p))) % 2 ? 1.0
                                                                                                                  : 0.0;
    case Pattern::kDots: {
      const double fx = frac((x + phase) / p) - 0.5, fy = frac((y + phase) / p) - 0.5;
      return fx * fx + fy * fy < 0.09 ? 0.0 : 1.0;
    }
    case Pattern::kNoise: {
      // Blocky value noise at the style's period.
      const int cells = std::max(1, static_cast<int>(std::ceil(size / p)) + 1);
      const int cx = static_cast<int>((x + phase) / p) % cells, cy = static_cast<int>((y + phase) / p) % cells;
      return noise[static_cast<std::size_t>(cy * cells + cx) % noise.size()];
    }
  }
  return 0.0;
}

}  // namespace

Image render_texture(int material, int colour, int size, std::uint64_t seed) {
  if (size < 1) throw std::invalid_argument("render_texture: size must be positive");
  Rng rng(seed);
  const MaterialStyle st = material_style(material);
  const Hsv base = colour_style(colour);
  const Tone tone = material_tone(material);
  const double phase = uniform(rng, 0, st.period * size / 32.0);
  std::vector<double> noise(4096);
  for (auto& v : noise) v = uniform(rng, 0, 1);
  std::normal_distribution<double> jitter(0.0, 0.03);
  Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double pat = pattern_value(st, x, y, phase, noise, size);
      Hsv px = base;
      px.v = std::clamp(base.v * (tone.lo + (tone.hi - tone.lo) * pat) + jitter(rng), 0.0, 1.0);
      double r, g, b;
      hsv_to_rgb(px, r, g, b);
      auto* out = img.at(x, y);
      out[0] = static_cast<std::uint8_t>(std::lround(r * 255));
      out[1] = static_cast<std::uint8_t>(std::lround(g * 255));
      out[2] = static_cast<std::uint8_t>(std::lround(b * 255));
    }
  }
  return img;
}

std::vector<TextureSample> generate_texture_corpus(int k, int size, std::uint64_t seed,
                                                   const text::Vocabularies& vocab) {
  if (k < 1) throw std::invalid_argument("generate_texture_corpus: k must be positive");
  Rng rng(nc::derive_seed(seed, "texture-corpus"));
  const int n_mat = static_cast<int>(vocab.materials.size()), n_col = static_cast<int>(vocab.colours.size());
  std::vector<TextureSample> out;
  for (int i = 0; i < k; ++i) {
    TextureSample s;
    s.material = i % n_mat;
    s.colour = uniform_int(rng, 0, n_col - 1);
    char name[32];
    std::snprintf(name, sizeof name, "%04d.png", i);
    s.file = name;
    s.image = render_texture(s.material, s.colour, size, nc::derive_seed(seed, "texture-" + std::to_string(i)));
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus on disk

CorpusSplit make_split(int n_train, int n_test, std::uint64_t seed) {
  if (n_train < 0 || n_test < 0) throw std::invalid_argument("make_split: negative size");
  std::vector<int> idx(static_cast<std::size_t>(n_train + n_test));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(nc::derive_seed(seed, "split"));
  std::shuffle(idx.begin(), idx.end(), rng);
  CorpusSplit s;
  s.seed = seed;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.test.assign(idx.begin() + n_train, idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

SyntheticHouse corpus_house(const CorpusConfig& config, int index, const text::Vocabularies& vocab) {
  const std::uint64_t s = nc::derive_seed(config.seed, "house-" + std::to_string(index));
  Rng rng(s);
  const int n = uniform_int(rng, config.min_rooms, config.max_rooms);
  return generate_layout(n, s, vocab);
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return Json::parse(is);
}

}  // namespace

void write_corpus(const std::filesystem::path& dir, const CorpusConfig& config, const text::Vocabularies& vocab) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "houses");
  fs::create_directories(dir / "textures");
  const int total = config.n_train + config.n_test;
  for (int i = 0; i < total; ++i) {
    const auto house = corpus_house(config, i, vocab);
    Json j{{"spec", house_spec_to_json(house.spec, vocab)},
           {"gt_boxes", boxes_to_json(house.gt_boxes)},
           {"description", house.description}};
    char name[32];
    std::snprintf(name, sizeof name, "%04d.json", i);
    write_text(dir / "houses" / name, j.dump(2) + "\n");
  }
  Json index = Json::object();
  for (const auto& t : generate_texture_corpus(config.textures, config.texture_size, config.seed, vocab)) {
    write_png(dir / "textures" / t.file, t.image);
    index[t.file] = {{"material", vocab.materials[static_cast<std::size_t>(t.material)]},
                     {"colour", vocab.colours[static_cast<std::size_t>(t.colour)]}};
  }
  write_text(dir / "textures" / "index.json", index.dump(2) + "\n");
  const auto split = make_split(config.n_train, config.n_test, config.seed);
  write_text(dir / "split.json", Json{{"train", split.train}, {"test", split.test}, {"seed", split.seed}}.dump(2) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir, const text::Vocabularies& vocab) {
  namespace fs = std::filesystem;
  Corpus c;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "houses"))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const Json j = read_json(f);
    SyntheticHouse h;
    h.spec = house_spec_from_json(j.at("spec"), vocab);
    h.gt_boxes = boxes_from_json(j.at("gt_boxes"));
    h.description = j.at("description").get<std::string>();
    if (h.gt_boxes.size() != h.spec.rooms.size()) throw std::runtime_error(f.string() + ": box/room count mismatch");
    c.houses.push_back(std::move(h));
  }
  const Json s = read_json(dir / "split.json");
  c.split.train = s.at("train").get<std::vector<int>>();
  c.split.test = s.at("test").get<std::vector<int>>();
  c.split.seed = s.at("seed").get<std::uint64_t>();
  for (int i : c.split.train)
    if (i < 0 || static_cast<std::size_t>(i) >= c.houses.size()) throw std::runtime_error("split index out of range");
  for (int i : c.split.test)
    if (i < 0 || static_cast<std::size_t>(i) >= c.houses.size()) throw std::runtime_error("split index out of range");
  return c;
}

std::vector<TextureSample> load_texture_corpus(const std::filesystem::path& dir, const text::Vocabularies& vocab) {
  const Json index = read_json(dir / "index.json");
  std::vector<TextureSample> out;
  for (const auto& [file, label] : index.items()) {
    TextureSample s;
    s.file = file;
    const auto m = label.at("material").get<std::string>();
    const auto c = label.at("colour").get<std::string>();
    const auto mi = vocab.material_index(m);
    const auto ci = vocab.colour_index(c);
    if (!mi || !ci) throw std::runtime_error("texture index: unknown label for " + file);
    s.material = *mi;
    s.colour = *ci;
    s.image = read_png(dir / file);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hpgm::data
