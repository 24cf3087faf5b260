#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hpgm/image.hpp"
#include "hpgm/layout.hpp"
#include "hpgm/postproc.hpp"
#include "hpgm/texture.hpp"
#include "hpgm/textparse.hpp"
#include "json.hpp"

namespace hpgm::svc {

inline constexpr std::uint64_t kDefaultSeed = 7;

/// Frozen models shared by the CLI and the HTTP API.
struct Models {
  text::Vocabularies vocab;
  layout::LayoutModel layout;
  tex::LctGanModel texture;

  /// Loads <dir>/layout and <dir>/texture, plus <dir>/vocab.txt when present.
  static Models load(const std::filesystem::path& dir);
  nlohmann::json checksums() const;
};

struct GenerateOptions {
  std::uint64_t seed = kDefaultSeed;
  std::size_t texture_cells = 1;  // noise grid side; images are 32 * cells pixels
  post::PostprocConfig postproc;
};

struct TextureArtifact {
  std::string room_id;
  std::string surface;  // "floor" or "wall"
  int material = 0, colour = 0;
  bool assumed = false;             // not stated in the text
  bool out_of_distribution = false;  // (material, colour) unseen in training
  std::string file;                 // relative path of the PNG
  Image image;
};

struct GenerationResult {
  text::HouseSpec spec;
  std::vector<BBox> boxes;
  post::FloorPlan plan;
  std::string plan_json;  // serialized, newline terminated
  std::string plan_svg;   // top view
  std::vector<TextureArtifact> textures;
  std::string obj, mtl;
  std::vector<std::string> notes;
  nlohmann::json timing_ms;  // per stage; not written to the deterministic files
};

/// Rooms without stated textures get a material and colour drawn from the
/// seed; each such choice is recorded in the notes.
GenerationResult generate(const Models& models, std::string_view text, const GenerateOptions& options = {});
/// Same pipeline from an already parsed spec.
GenerationResult generate(const Models& models, const text::HouseSpec& spec, const GenerateOptions& options = {});

/// Writes plan.json, plan.svg, house.obj, house.mtl, spec.json, boxes.json,
/// textures/*.png with a JSON sidecar each, and timing.json.
void write_result(const GenerationResult& result, const text::Vocabularies& vocab, const std::filesystem::path& dir);

/// Sidecar metadata of one texture.
nlohmann::json texture_json(const TextureArtifact& t, const text::Vocabularies& vocab);

}  // namespace hpgm::svc
