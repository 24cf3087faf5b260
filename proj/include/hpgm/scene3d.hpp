#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpgm/image.hpp"
#include "hpgm/postproc.hpp"
#include "hpgm/textparse.hpp"

namespace hpgm::scene {

inline constexpr double kMetersPerPixel = kCanvasMeters / kCanvasPixels;

struct SceneConfig {
  double wall_height = 2.85;
  double interior_thickness = 0.12;
  double exterior_thickness = 0.24;
  double door_height = 2.0;
  double window_sill = 0.9;
  double window_head = 2.1;
};

struct Vec2 {
  double x = 0, y = 0;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

/// Canvas pixel position to plan meters, y pointing north (canvas y flipped).
Vec2 to_meters(double px, double py);

/// Rectangular cutout in a wall, measured along the wall from its start.
struct WallOpening {
  post::OpeningKind kind = post::OpeningKind::kDoor;
  double offset = 0;  // start along the wall, meters
  double width = 0;
  double sill = 0;    // bottom above the floor
  double height = 0;
};

/// Straight wall of constant thickness. `a`..`b` is the centre line; the
/// left normal of a->b points to `left_room`, the other face to `right_room`
/// (-1 for the outside).
struct WallSegment {
  Vec2 a, b;
  double thickness = 0;
  double height = 0;
  int left_room = -1, right_room = -1;
  std::vector<WallOpening> openings;

  double length() const;
  bool exterior() const { return left_room < 0 || right_room < 0; }
};

/// One interior wall per shared boundary, exterior walls pushed outward so
/// room areas are kept; plan openings move onto their walls.
std::vector<WallSegment> build_walls(const post::FloorPlan& plan, const SceneConfig& config = {});

struct Triangle {
  std::array<int, 3> v{};   // vertex indices
  std::array<int, 3> uv{};  // texture coordinate indices
  int material = 0;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Vec2> uvs;
  std::vector<Triangle> triangles;
  std::vector<std::string> materials;

  int material_index(const std::string& name);
  /// Throws std::logic_error on out-of-range indices or zero-area triangles.
  void validate() const;
};

class OpeningOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingMaterial : public std::runtime_error {
 public:
  explicit MissingMaterial(const std::string& name) : std::runtime_error("no material named " + name), name(name) {}
  std::string name;
};

std::string floor_material(const post::PlanRoom& room);
std::string wall_material(const post::PlanRoom& room);
inline constexpr const char* kExteriorMaterial = "exterior";
inline constexpr const char* kCapMaterial = "wall_cap";

/// Closed cuboid pieces around the openings of each wall.
Mesh extrude_walls(const std::vector<WallSegment>& walls, const post::FloorPlan& plan);
/// Walls plus one floor slab per room at z = 0.
Mesh extrude(const std::vector<WallSegment>& walls, const post::FloorPlan& plan);

/// Flat colour, optionally with a texture written next to the MTL file.
struct Material {
  std::string name;
  std::array<double, 3> kd{0.8, 0.8, 0.8};
  std::optional<Image> texture;
  std::string texture_file() const { return "textures/" + name + ".png"; }
};

struct RoomTextures {
  Image floor, wall;
};

/// Materials for every room (textured when `textures` has the room id, flat
/// type colour otherwise) plus the exterior and cap colours.
std::vector<Material> house_materials(const post::FloorPlan& plan, const std::map<std::string, RoomTextures>& textures);

struct ObjExport {
  std::string obj, mtl;
  std::map<std::string, Image> textures;  // relative path -> image
};

/// OBJ with v / vt / usemtl / f records and its MTL. UVs tile one texture
/// image per meter.
ObjExport export_obj(const Mesh& mesh, const std::vector<Material>& materials,
                     const std::string& mtl_name = "house.mtl");

/// Top view: rooms filled with texture thumbnails (`floor_hrefs` by room id)
/// or type colours, walls as strokes, openings as gaps and door arcs.
std::string render_topview_svg(const post::FloorPlan& plan, const text::Vocabularies& vocab,
                               const std::map<std::string, std::string>& floor_hrefs = {},
                               const SceneConfig& config = {});

}  // namespace hpgm::scene
