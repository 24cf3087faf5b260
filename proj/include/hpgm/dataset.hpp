#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hpgm/image.hpp"
#include "hpgm/textparse.hpp"
#include "hpgm/types.hpp"

namespace hpgm::data {

struct SyntheticHouse {
  text::HouseSpec spec;
  std::vector<BBox> gt_boxes;  // canvas-normalised, aligned with spec.rooms
  std::string description;
};

struct LayoutOptions {
  double min_side_m = 2.0;    // smallest room extent
  double min_shared_m = 0.5;  // shared boundary that makes two rooms adjacent
};

/// Recursively splits the whole canvas into n_rooms pixel-aligned rectangles.
/// The largest becomes the living room; positions come from the nearest
/// anchor, sizes from the rounded area, textures are drawn uniformly.
SyntheticHouse generate_layout(int n_rooms, std::uint64_t seed, const text::Vocabularies& vocab,
                               const LayoutOptions& opt = {});

/// Pairs (i < j) of boxes whose common boundary is at least min_len long
/// (canvas-normalised units).
std::vector<std::pair<int, int>> shared_boundary_pairs(const std::vector<BBox>& boxes, double min_len);

/// Index of the position word whose anchor is closest to (x, y); ties go to
/// the earlier vocabulary entry.
int nearest_position(const text::Vocabularies& vocab, double x, double y);

/// Template description that re-parses to `spec` field for field. Requires
/// complete texture attributes.
std::string render_description(const text::HouseSpec& spec, const text::Vocabularies& vocab, std::uint64_t seed);

/// Procedural texture: a material-specific pattern modulating the value
/// channel of the colour's hue/saturation.
Image render_texture(int material, int colour, int size, std::uint64_t seed);

struct TextureSample {
  std::string file;
  int material = 0;
  int colour = 0;
  Image image;
};

/// k labelled textures; materials cycle so every material is represented.
std::vector<TextureSample> generate_texture_corpus(int k, int size, std::uint64_t seed,
                                                   const text::Vocabularies& vocab);

struct CorpusSplit {
  std::vector<int> train;
  std::vector<int> test;
  std::uint64_t seed = 0;
};

CorpusSplit make_split(int n_train, int n_test, std::uint64_t seed);

struct CorpusConfig {
  int n_train = 200;
  int n_test = 50;
  int min_rooms = 4;
  int max_rooms = 8;
  int textures = 64;
  int texture_size = 32;
  std::uint64_t seed = 1;
};

/// Generation of house `index` inside a corpus (derived seed and room count).
SyntheticHouse corpus_house(const CorpusConfig& config, int index, const text::Vocabularies& vocab);

/// Writes houses/NNNN.json, textures/*.png with textures/index.json, and
/// split.json under `dir`.
void write_corpus(const std::filesystem::path& dir, const CorpusConfig& config, const text::Vocabularies& vocab);

struct Corpus {
  std::vector<SyntheticHouse> houses;
  CorpusSplit split;
};

Corpus load_corpus(const std::filesystem::path& dir, const text::Vocabularies& vocab);
std::vector<TextureSample> load_texture_corpus(const std::filesystem::path& dir, const text::Vocabularies& vocab);

}  // namespace hpgm::data
