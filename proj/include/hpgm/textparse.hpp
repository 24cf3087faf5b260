#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hpgm/types.hpp"

namespace hpgm::text {

/// Word lists that give every categorical attribute its index.
struct Vocabularies {
  std::vector<std::string> room_types;
  std::vector<std::string> positions;
  std::vector<std::string> materials;
  std::vector<std::string> colours;

  static Vocabularies defaults();
  /// Plain-text format: sections `[room_types]`, `[positions]`, `[materials]`,
  /// `[colours]`, one entry per line; blank lines and `#` comments ignored.
  static Vocabularies parse(std::string_view text);
  static Vocabularies load(const std::filesystem::path& path);
  std::string serialize() const;

  /// Throws std::invalid_argument unless materials has 19 entries, colours 12,
  /// and no list contains duplicates.
  void validate() const;

  std::optional<int> room_type_index(std::string_view word) const;
  std::optional<int> position_index(std::string_view word) const;
  std::optional<int> material_index(std::string_view word) const;
  std::optional<int> colour_index(std::string_view word) const;

  /// Layout feature width: |room_types| + 1 + |positions|.
  std::size_t layout_width() const { return room_types.size() + 1 + positions.size(); }
};

struct SceneNode {
  std::string object;
  std::set<std::string> attributes;
  std::vector<int> sentences;  // indices of sentences that mention the object
};

struct SceneEdge {
  std::size_t subject = 0;
  std::string relation;
  std::optional<std::size_t> object;
};

struct SceneGraph {
  std::vector<SceneNode> nodes;
  std::vector<SceneEdge> edges;

  std::optional<std::size_t> find(std::string_view object) const;
};

/// Merges nodes that share an object identifier (attribute union, first
/// occurrence keeps its position) and rewires edges. Idempotent.
SceneGraph merge_nodes(const SceneGraph& graph);

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnparsableSentence : public ParseError {
 public:
  UnparsableSentence(int index, std::string sentence);
  int index() const { return index_; }
  const std::string& sentence() const { return sentence_; }

 private:
  int index_;
  std::string sentence_;
};

class MissingAttribute : public ParseError {
 public:
  MissingAttribute(std::string room, std::string kind);
  const std::string& room() const { return room_; }
  const std::string& kind() const { return kind_; }

 private:
  std::string room_, kind_;
};

class UnknownWord : public ParseError {
 public:
  explicit UnknownWord(std::string word);
  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

class ConflictingAttribute : public ParseError {
 public:
  ConflictingAttribute(const std::string& room, const std::string& kind);
};

/// Splits a description into sentences at '.', '!' or '?' followed by
/// whitespace or the end of the text. Empty sentences are dropped.
std::vector<std::string> split_sentences(std::string_view text);

/// Rule-based scene-graph extraction. Room objects are identifiers such as
/// "bedroom2"; floor/wall descriptions become "<room>/floor" and "<room>/wall"
/// nodes linked to their room by a "have" edge. Adjacency phrases produce
/// "is adjacent", "is next" and "are connected" edges; in "A, B and C are
/// connected" the last listed room is the hub linked to each other room.
SceneGraph parse_scene_graph(std::string_view text, const Vocabularies& vocab);

struct RoomSpec {
  std::string id;
  int room_type = 0;
  int position = 0;
  double size_sqm = 0;
  std::optional<int> floor_material, wall_material;
  std::optional<int> floor_colour, wall_colour;

  bool has_textures() const {
    return floor_material && wall_material && floor_colour && wall_colour;
  }
  bool operator==(const RoomSpec&) const = default;
};

struct HouseSpec {
  std::vector<RoomSpec> rooms;
  std::vector<std::pair<int, int>> adjacency;  // i < j, sorted, unique

  /// Throws std::invalid_argument on out-of-range indices, self pairs,
  /// unnormalised pairs or non-positive sizes.
  void validate(const Vocabularies& vocab) const;
  std::optional<std::size_t> find(std::string_view id) const;
  bool operator==(const HouseSpec&) const = default;
};

/// Sorts pairs into (min, max), drops self pairs and duplicates.
std::vector<std::pair<int, int>> normalize_pairs(std::vector<std::pair<int, int>> pairs);

struct ExtractOptions {
  bool require_textures = false;
};

HouseSpec extract_house_spec(const SceneGraph& graph, const Vocabularies& vocab, ExtractOptions opt = {});

/// parse_scene_graph followed by extract_house_spec.
HouseSpec parse_house(std::string_view text, const Vocabularies& vocab, ExtractOptions opt = {});

/// Builds X (N x D) and the symmetric adjacency A. Sizes are divided by the
/// 324 m^2 canvas area.
std::pair<FeatureMatrix, AdjacencyMatrix> encode_layout_features(const HouseSpec& spec, const Vocabularies& vocab);

/// 2N conditions: floor then wall for each room in order.
std::vector<TextureCondition> encode_texture_features(const HouseSpec& spec, const Vocabularies& vocab);

TextureCondition make_condition(const Vocabularies& vocab, int material, int colour);

}  // namespace hpgm::text
