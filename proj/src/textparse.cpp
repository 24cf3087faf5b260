#include "hpgm/textparse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

namespace hpgm::text {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<int> index_of(const std::vector<std::string>& list, std::string_view word) {
  const std::string w = lower(word);
  for (std::size_t i = 0; i < list.size(); ++i)
    if (lower(list[i]) == w) return static_cast<int>(i);
  return std::nullopt;
}

bool is_number(std::string_view s) {
  if (s.empty()) return false;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : sentence) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
      cur.push_back(c);
    } else {
      flush();
      if (c == ',' || c == ';') out.emplace_back(",");
    }
  }
  flush();
  return out;
}

// Splits "bedroom12" into ("bedroom", "12"); empty digits when none.
std::pair<std::string, std::string> split_room_id(std::string_view token) {
  std::size_t k = token.size();
  while (k > 0 && std::isdigit(static_cast<unsigned char>(token[k - 1]))) --k;
  return {std::string(token.substr(0, k)), std::string(token.substr(k))};
}

bool is_room_id(std::string_view token, const Vocabularies& vocab) {
  auto [stem, digits] = split_room_id(token);
  return !digits.empty() && !stem.empty() && vocab.room_type_index(stem).has_value();
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words{
      "has", "have", "is", "are", "uses", "use", "used", "for", "and", "of", "the", "a", "an",
      "with", "as", "well", "while", "wall", "walls", "floor", "floors", "in", "at", "on", "to",
      "located", "covers", "cover", "its", "it", "which", "that", "also", "whose", "made",
      "squares", "square", "meters", "metres", "sqm", "m2", "by", "from", "be", "being"};
  return words;
}

bool is_size_unit(const std::vector<std::string>& low, std::size_t i) {
  if (i >= low.size()) return false;
  return low[i] == "squares" || low[i] == "square" || low[i] == "sqm" || low[i] == "m2";
}

// Size phrase starting at a number token, e.g. "21 square meters".
std::optional<std::string> size_phrase(const std::vector<std::string>& tok, const std::vector<std::string>& low,
                                       std::size_t i) {
  if (!is_number(tok[i]) || !is_size_unit(low, i + 1)) return std::nullopt;
  std::string phrase = tok[i] + " " + low[i + 1];
  if (low[i + 1] == "square" && i + 2 < low.size() && (low[i + 2] == "meters" || low[i + 2] == "metres"))
    phrase += " " + low[i + 2];
  return phrase;
}

std::optional<double> parse_size(std::string_view attribute) {
  const auto space = attribute.find(' ');
  if (space == std::string_view::npos) return std::nullopt;
  const std::string_view num = attribute.substr(0, space);
  const std::string unit = lower(attribute.substr(space + 1));
  if (unit != "squares" && unit != "square" && unit != "square meters" && unit != "square metres" &&
      unit != "sqm" && unit != "m2")
    return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
  if (ec != std::errc() || ptr != num.data() + num.size()) return std::nullopt;
  return v;
}

// Greedy longest match of up to three tokens against the texture vocabulary,
// joining with '_' so that "Wood Veneer" reads as Wood_Veneer.
std::vector<std::string> join_texture_words(const std::vector<std::string>& words, const Vocabularies& vocab) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < words.size();) {
    bool matched = false;
    for (std::size_t len = std::min<std::size_t>(3, words.size() - i); len >= 1 && !matched; --len) {
      std::string joined = words[i];
      for (std::size_t k = 1; k < len; ++k) joined += "_" + words[i + k];
      if (auto m = vocab.material_index(joined)) {
        out.push_back(vocab.materials[*m]);
        i += len;
        matched = true;
      } else if (auto c = vocab.colour_index(joined)) {
        out.push_back(vocab.colours[*c]);
        i += len;
        matched = true;
      }
      if (len == 1) break;
    }
    if (!matched) out.push_back(words[i++]);
  }
  return out;
}

class GraphBuilder {
 public:
  std::size_t node(const std::string& object, int sentence) {
    graph_.nodes.push_back(SceneNode{object, {}, {sentence}});
    return graph_.nodes.size() - 1;
  }
  SceneNode& at(std::size_t i) { return graph_.nodes[i]; }
  void edge(std::size_t s, std::string rel, std::optional<std::size_t> o) {
    graph_.edges.push_back(SceneEdge{s, std::move(rel), o});
  }
  SceneGraph take() { return std::move(graph_); }

 private:
  SceneGraph graph_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Vocabularies

Vocabularies Vocabularies::defaults() {
  Vocabularies v;
  v.room_types = {"washroom", "bedroom", "livingroom", "kitchen", "balcony", "study", "storage"};
  v.positions = {"center", "north", "northeast", "east", "southeast", "south", "southwest", "west", "northwest"};
  // First ten appear in real descriptions; the rest pad the list to 19.
  v.materials = {"Marble",  "Log",          "Wall_Cloth", "Pure_Color_Wood", "Coating", "Wood_Veneer", "Wood_Grain",
                 "Jade",    "Mosaic",       "Stone_Brick", "Ceramic_Tile",   "Granite", "Terrazzo",    "Parquet",
                 "Bamboo",  "Cork",         "Carpet",     "Wallpaper",       "Brick"};
  // First eight appear in real descriptions; the rest pad the list to 12.
  v.colours = {"Blue", "White", "Wood_color", "Yellow", "Earth_color", "Black",
               "Orange", "Pink", "Red", "Green", "Gray", "Purple"};
  return v;
}

Vocabularies Vocabularies::parse(std::string_view text) {
  Vocabularies v;
  std::vector<std::string>* section = nullptr;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    std::string entry = line.substr(b, e - b + 1);
    if (entry.front() == '[') {
      if (entry == "[room_types]") section = &v.room_types;
      else if (entry == "[positions]") section = &v.positions;
      else if (entry == "[materials]") section = &v.materials;
      else if (entry == "[colours]") section = &v.colours;
      else throw std::invalid_argument("vocabulary line " + std::to_string(lineno) + ": unknown section " + entry);
      continue;
    }
    if (!section) throw std::invalid_argument("vocabulary line " + std::to_string(lineno) + ": entry before any section");
    section->push_back(entry);
  }
  v.validate();
  return v;
}

Vocabularies Vocabularies::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot read vocabulary file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string Vocabularies::serialize() const {
  std::ostringstream os;
  auto section = [&](const char* name, const std::vector<std::string>& list) {
    os << '[' << name << "]\n";
    for (const auto& s : list) os << s << '\n';
  };
  section("room_types", room_types);
  section("positions", positions);
  section("materials", materials);
  section("colours", colours);
  return os.str();
}

void Vocabularies::validate() const {
  if (materials.size() != 19)
    throw std::invalid_argument("materials vocabulary needs 19 entries, has " + std::to_string(materials.size()));
  if (colours.size() != 12)
    throw std::invalid_argument("colours vocabulary needs 12 entries, has " + std::to_string(colours.size()));
  if (room_types.empty() || positions.empty()) throw std::invalid_argument("empty room type or position vocabulary");
  for (const auto* list : {&room_types, &positions, &materials, &colours}) {
    std::set<std::string> seen;
    for (const auto& s : *list)
      if (!seen.insert(lower(s)).second) throw std::invalid_argument("duplicate vocabulary entry " + s);
  }
}

std::optional<int> Vocabularies::room_type_index(std::string_view w) const { return index_of(room_types, w); }
std::optional<int> Vocabularies::position_index(std::string_view w) const { return index_of(positions, w); }
std::optional<int> Vocabularies::material_index(std::string_view w) const { return index_of(materials, w); }
std::optional<int> Vocabularies::colour_index(std::string_view w) const { return index_of(colours, w); }

// ---------------------------------------------------------------------------
// Errors

UnparsableSentence::UnparsableSentence(int index, std::string sentence)
    : ParseError("sentence " + std::to_string(index) + " matches no known pattern: \"" + sentence + "\""),
      index_(index),
      sentence_(std::move(sentence)) {}

MissingAttribute::MissingAttribute(std::string room, std::string kind)
    : ParseError(room + " is missing its " + kind), room_(std::move(room)), kind_(std::move(kind)) {}

UnknownWord::UnknownWord(std::string word)
    : ParseError("\"" + word + "\" is neither a material nor a colour"), word_(std::move(word)) {}

ConflictingAttribute::ConflictingAttribute(const std::string& room, const std::string& kind)
    : ParseError(room + " has conflicting " + kind + " values") {}

// ---------------------------------------------------------------------------
// Scene graph

std::optional<std::size_t> SceneGraph::find(std::string_view object) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].object == object) return i;
  return std::nullopt;
}

SceneGraph merge_nodes(const SceneGraph& graph) {
  SceneGraph out;
  std::vector<std::size_t> remap(graph.nodes.size());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    auto [it, fresh] = index.emplace(n.object, out.nodes.size());
    if (fresh) {
      out.nodes.push_back(n);
    } else {
      auto& target = out.nodes[it->second];
      target.attributes.insert(n.attributes.begin(), n.attributes.end());
      for (int s : n.sentences)
        if (std::find(target.sentences.begin(), target.sentences.end(), s) == target.sentences.end())
          target.sentences.push_back(s);
    }
    remap[i] = it->second;
  }
  for (const auto& e : graph.edges) {
    SceneEdge m{remap[e.subject], e.relation, e.object ? std::optional(remap[*e.object]) : std::nullopt};
    bool dup = std::any_of(out.edges.begin(), out.edges.end(), [&](const SceneEdge& x) {
      return x.subject == m.subject && x.relation == m.relation && x.object == m.object;
    });
    if (!dup) out.edges.push_back(std::move(m));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool terminal = (c == '.' || c == '!' || c == '?') &&
                          (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])));
    if (terminal) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  std::vector<std::string> trimmed;
  for (auto& s : out) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) continue;
    auto e = s.find_last_not_of(" \t\r\n");
    trimmed.push_back(s.substr(b, e - b + 1));
  }
  return trimmed;
}

SceneGraph parse_scene_graph(std::string_view text, const Vocabularies& vocab) {
  const auto sentences = split_sentences(text);
  if (sentences.empty()) throw UnparsableSentence(0, std::string(text));
  GraphBuilder g;
  bool any_fact = false;

  for (std::size_t si = 0; si < sentences.size(); ++si) {
    const int sidx = static_cast<int>(si);
    const auto tok = tokenize(sentences[si]);
    std::vector<std::string> low;
    for (const auto& t : tok) low.push_back(lower(t));

    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < tok.size(); ++i)
      if (is_room_id(low[i], vocab)) ids.push_back(i);
    if (ids.empty()) continue;  // filler, e.g. "The house has three bedrooms."

    auto fail = [&] { throw UnparsableSentence(sidx, sentences[si]); };
    auto has = [&](const char* w) { return std::find(low.begin(), low.end(), w) != low.end(); };

    if (has("adjacent") || has("next")) {
      const auto kw = static_cast<std::size_t>(
          std::find_if(low.begin(), low.end(), [](const std::string& w) { return w == "adjacent" || w == "next"; }) -
          low.begin());
      const std::string relation = low[kw] == "adjacent" ? "is adjacent" : "is next";
      std::vector<std::size_t> before, after;
      for (std::size_t i : ids) (i < kw ? before : after).push_back(i);
      if (before.size() != 1 || after.empty()) fail();
      const std::size_t subject = g.node(low[before[0]], sidx);
      for (std::size_t i : after) g.edge(subject, relation, g.node(low[i], sidx));
      any_fact = true;
      continue;
    }
    if (has("connected")) {
      if (ids.size() < 2) fail();
      const std::size_t hub = g.node(low[ids.back()], sidx);
      for (std::size_t k = 0; k + 1 < ids.size(); ++k) g.edge(g.node(low[ids[k]], sidx), "are connected", hub);
      any_fact = true;
      continue;
    }

    // Attribute sentence about exactly one room.
    const std::string room = low[ids[0]];
    for (std::size_t i : ids)
      if (low[i] != room) fail();
    const std::size_t room_node = g.node(room, sidx);
    bool fact = false;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (auto p = vocab.position_index(low[i])) {
        g.at(room_node).attributes.insert(vocab.positions[*p]);
        fact = true;
      } else if (auto s = size_phrase(tok, low, i)) {
        g.at(room_node).attributes.insert(*s);
        fact = true;
      }
    }

    // Clauses split at commas, "while" and "as well as".
    std::vector<std::vector<std::size_t>> clauses(1);
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (low[i] == "," || low[i] == "while") {
        clauses.emplace_back();
      } else if (low[i] == "as" && i + 2 < tok.size() && low[i + 1] == "well" && low[i + 2] == "as") {
        clauses.emplace_back();
        i += 2;
      } else {
        clauses.back().push_back(i);
      }
    }
    for (const auto& clause : clauses) {
      bool floor = false, wall = false;
      std::vector<std::string> words;
      for (std::size_t i : clause) {
        if (low[i] == "floor" || low[i] == "floors") floor = true;
        if (low[i] == "wall" || low[i] == "walls") wall = true;
        if (stopwords().count(low[i]) || is_room_id(low[i], vocab) || vocab.position_index(low[i]) ||
            is_number(low[i]))
          continue;
        words.push_back(tok[i]);
      }
      if (!floor && !wall) continue;
      if (floor && wall) fail();
      if (words.empty()) fail();
      const std::size_t surface = g.node(room + (floor ? "/floor" : "/wall"), sidx);
      for (auto& w : join_texture_words(words, vocab)) g.at(surface).attributes.insert(w);
      g.edge(room_node, "have", surface);
      fact = true;
    }
    if (!fact) fail();
    any_fact = true;
  }
  if (!any_fact) throw UnparsableSentence(0, sentences.front());
  return merge_nodes(g.take());
}

// ---------------------------------------------------------------------------
// HouseSpec

std::vector<std::pair<int, int>> normalize_pairs(std::vector<std::pair<int, int>> pairs) {
  std::vector<std::pair<int, int>> out;
  for (auto [a, b] : pairs) {
    if (a == b) continue;
    out.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void HouseSpec::validate(const Vocabularies& vocab) const {
  const int n = static_cast<int>(rooms.size());
  auto in = [](std::optional<int> v, std::size_t bound) { return !v || (*v >= 0 && static_cast<std::size_t>(*v) < bound); };
  for (const auto& r : rooms) {
    if (r.id.empty()) throw std::invalid_argument("room with empty id");
    if (!(r.size_sqm > 0)) throw std::invalid_argument(r.id + ": size must be positive");
    if (r.room_type < 0 || static_cast<std::size_t>(r.room_type) >= vocab.room_types.size())
      throw std::invalid_argument(r.id + ": room type index out of range");
    if (r.position < 0 || static_cast<std::size_t>(r.position) >= vocab.positions.size())
      throw std::invalid_argument(r.id + ": position index out of range");
    if (!in(r.floor_material, vocab.materials.size()) || !in(r.wall_material, vocab.materials.size()) ||
        !in(r.floor_colour, vocab.colours.size()) || !in(r.wall_colour, vocab.colours.size()))
      throw std::invalid_argument(r.id + ": texture index out of range");
  }
  for (auto [a, b] : adjacency) {
    if (a < 0 || b < 0 || a >= n || b >= n) throw std::invalid_argument("adjacency index out of range");
    if (a >= b) throw std::invalid_argument("adjacency pairs must be normalised (i < j)");
  }
  if (normalize_pairs(adjacency) != adjacency) throw std::invalid_argument("adjacency pairs not sorted/unique");
}

std::optional<std::size_t> HouseSpec::find(std::string_view id) const {
  for (std::size_t i = 0; i < rooms.size(); ++i)
    if (rooms[i].id == id) return i;
  return std::nullopt;
}

HouseSpec extract_house_spec(const SceneGraph& graph, const Vocabularies& vocab, ExtractOptions opt) {
  HouseSpec spec;
  std::map<std::size_t, int> room_of_node;
  for (std::size_t ni = 0; ni < graph.nodes.size(); ++ni) {
    const auto& node = graph.nodes[ni];
    if (node.object.find('/') != std::string::npos) continue;
    RoomSpec room;
    room.id = node.object;
    const auto type = vocab.room_type_index(split_room_id(node.object).first);
    if (!type) throw UnknownWord(node.object);
    room.room_type = *type;
    std::optional<int> position;
    std::optional<double> size;
    for (const auto& attr : node.attributes) {
      if (auto p = vocab.position_index(attr)) {
        if (position && *position != *p) throw ConflictingAttribute(room.id, "position");
        position = *p;
      } else if (auto s = parse_size(attr)) {
        if (size && *size != *s) throw ConflictingAttribute(room.id, "size");
        size = *s;
      } else {
        throw UnknownWord(attr);
      }
    }
    if (!position) throw MissingAttribute(room.id, "position");
    if (!size) throw MissingAttribute(room.id, "size");
    room.position = *position;
    room.size_sqm = *size;

    for (const char* surface : {"floor", "wall"}) {
      std::optional<int> material, colour;
      if (auto sn = graph.find(room.id + "/" + surface)) {
        for (const auto& attr : graph.nodes[*sn].attributes) {
          if (auto m = vocab.material_index(attr)) {
            if (material && *material != *m) throw ConflictingAttribute(room.id, std::string(surface) + " material");
            material = *m;
          } else if (auto c = vocab.colour_index(attr)) {
            if (colour && *colour != *c) throw ConflictingAttribute(room.id, std::string(surface) + " colour");
            colour = *c;
          } else {
            throw UnknownWord(attr);
          }
        }
      }
      if (opt.require_textures && !material) throw MissingAttribute(room.id, std::string(surface) + " material");
      if (opt.require_textures && !colour) throw MissingAttribute(room.id, std::string(surface) + " colour");
      if (std::string(surface) == "floor") {
        room.floor_material = material;
        room.floor_colour = colour;
      } else {
        room.wall_material = material;
        room.wall_colour = colour;
      }
    }
    room_of_node[ni] = static_cast<int>(spec.rooms.size());
    spec.rooms.push_back(std::move(room));
  }

  std::vector<std::pair<int, int>> pairs;
  for (const auto& e : graph.edges) {
    if (!e.object) continue;
    if (e.relation != "is adjacent" && e.relation != "is next" && e.relation != "are connected") continue;
    auto a = room_of_node.find(e.subject), b = room_of_node.find(*e.object);
    if (a == room_of_node.end() || b == room_of_node.end()) continue;
    pairs.emplace_back(a->second, b->second);
  }
  spec.adjacency = normalize_pairs(std::move(pairs));
  return spec;
}

HouseSpec parse_house(std::string_view text, const Vocabularies& vocab, ExtractOptions opt) {
  return extract_house_spec(parse_scene_graph(text, vocab), vocab, opt);
}

// ---------------------------------------------------------------------------
// Encodings

std::pair<FeatureMatrix, AdjacencyMatrix> encode_layout_features(const HouseSpec& spec, const Vocabularies& vocab) {
  spec.validate(vocab);
  const std::size_t n = spec.rooms.size(), t = vocab.room_types.size(), d = vocab.layout_width();
  if (n == 0) throw std::invalid_argument("house has no rooms");
  nc::Tensor x(nc::Shape{n, d}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = spec.rooms[i];
    x[i * d + static_cast<std::size_t>(r.room_type)] = 1.0;
    x[i * d + t] = r.size_sqm / kCanvasArea;
    x[i * d + t + 1 + static_cast<std::size_t>(r.position)] = 1.0;
  }
  nc::Tensor a(nc::Shape{n, n}, 0.0);
  for (auto [i, j] : spec.adjacency) {
    a[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] = 1.0;
    a[static_cast<std::size_t>(j) * n + static_cast<std::size_t>(i)] = 1.0;
  }
  return {FeatureMatrix{x}, AdjacencyMatrix{a}};
}

TextureCondition make_condition(const Vocabularies& vocab, int material, int colour) {
  TextureCondition c;
  c.p.assign(vocab.materials.size(), 0.0);
  c.q.assign(vocab.colours.size(), 0.0);
  c.p.at(static_cast<std::size_t>(material)) = 1.0;
  c.q.at(static_cast<std::size_t>(colour)) = 1.0;
  return c;
}

std::vector<TextureCondition> encode_texture_features(const HouseSpec& spec, const Vocabularies& vocab) {
  std::vector<TextureCondition> out;
  for (const auto& r : spec.rooms) {
    if (!r.floor_material) throw MissingAttribute(r.id, "floor material");
    if (!r.floor_colour) throw MissingAttribute(r.id, "floor colour");
    if (!r.wall_material) throw MissingAttribute(r.id, "wall material");
    if (!r.wall_colour) throw MissingAttribute(r.id, "wall colour");
    out.push_back(make_condition(vocab, *r.floor_material, *r.floor_colour));
    out.push_back(make_condition(vocab, *r.wall_material, *r.wall_colour));
  }
  return out;
}

}  // namespace hpgm::text
