#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpgm/textparse.hpp"
#include "hpgm/types.hpp"
#include "json.hpp"

namespace hpgm::post {

/// Millimetres per canvas pixel (18 m over 512 px).
inline constexpr double kMmPerPixel = kCanvasMeters * 1000.0 / kCanvasPixels;
inline constexpr double kDoorWidthMm = 900.0;
inline constexpr double kWindowFraction = 0.3;

enum class Axis { kHorizontal, kVertical };

/// Axis-aligned segment in canvas pixels. Horizontal segments sit at y = fixed
/// and span x in [lo, hi]; vertical ones sit at x = fixed and span y.
struct Segment {
  Axis axis = Axis::kHorizontal;
  double fixed = 0;
  double lo = 0, hi = 0;
  std::vector<int> sources;  // box * 4 + side (0 left, 1 top, 2 right, 3 bottom)

  double length() const { return hi - lo; }
  bool same_geometry(const Segment& o) const {
    return axis == o.axis && fixed == o.fixed && lo == o.lo && hi == o.hi;
  }
};

struct Point {
  double x = 0, y = 0;
  bool operator==(const Point&) const = default;
};

/// Closed rectilinear polygon; the closing edge back to vertices[0] is implied.
/// Orientation: positive shoelace area in canvas pixel coordinates.
struct RectiPolygon {
  std::vector<Point> vertices;

  double signed_area() const;
  double area() const { return signed_area(); }
  /// Alternating horizontal / vertical edges, no zero-length edges, no
  /// self-intersection or touching, positive orientation.
  bool is_valid() const;
};

/// Axis-aligned rectangle in pixels, [x0, x1] x [y0, y1].
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double area() const { return (x1 - x0) * (y1 - y0); }
};

/// Slab decomposition of a rectilinear polygon into disjoint rectangles.
std::vector<Rect> decompose(const RectiPolygon& poly);

/// Gaussian weight parameters: centre and half extents in pixels.
struct GaussianWeightSpec {
  double cx = 0, cy = 0, w = 1, h = 1;
  static GaussianWeightSpec from_box(const BBox& canvas_box);
};

/// Integral of exp(-((x-cx)/w)^2 - ((y-cy)/h)^2) / (w h) over a rectangle, in
/// closed form via error functions.
double rect_weight(const GaussianWeightSpec& g, const Rect& r);
double polygon_weight(const GaussianWeightSpec& g, const RectiPolygon& poly);
double region_weight(const GaussianWeightSpec& g, const std::vector<Rect>& region);

class DegenerateLayout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NoLivingRoom : public std::runtime_error {
 public:
  NoLivingRoom() : std::runtime_error("the plan has no living room") {}
};
class SharedWallTooShort : public std::runtime_error {
 public:
  SharedWallTooShort(const std::string& a, const std::string& b, double length_mm);
};

/// Step (a): four pixel-quantised segments per box.
std::vector<Segment> extract_boundaries(const std::vector<BBox>& boxes);

/// Step (b): unions collinear same-axis segments whose fixed coordinates
/// differ by at most tol_px and whose spans overlap or touch. The merged
/// coordinate is the length-weighted mean. Output is sorted and has no
/// mergeable pair left.
std::vector<Segment> merge_segments(const std::vector<Segment>& segs, double tol_px);

/// Step (c): single-linkage clustering of parallel fixed coordinates (gap at
/// most snap_px), snapping to the length-weighted cluster mean, then moving
/// endpoints onto the nearest perpendicular snapped line within snap_px.
/// Throws DegenerateLayout when some box's two opposite sides coincide.
std::vector<Segment> align_segments(const std::vector<Segment>& segs, double snap_px, std::size_t box_count = 0);

/// Faces of the segment arrangement that are enclosed (not connected to the
/// outside), each as a list of disjoint rectangles.
struct Arrangement {
  std::vector<double> xs, ys;                 // grid lines
  std::vector<int> face_of_cell;              // (xs.size()-1) * (ys.size()-1), -1 for outside
  std::vector<std::vector<Rect>> faces;       // enclosed faces
  std::size_t cols() const { return xs.size() - 1; }
  std::size_t rows() const { return ys.size() - 1; }
};
Arrangement build_arrangement(const std::vector<Segment>& segs);

/// Step (d): index of the room with maximum weight for each region (ties go
/// to the smaller index).
std::vector<int> assign_regions(const std::vector<std::vector<Rect>>& regions,
                                const std::vector<GaussianWeightSpec>& rooms);
int assign_polygon(const RectiPolygon& cell, const std::vector<GaussianWeightSpec>& rooms);

enum class OpeningKind { kDoor, kOpenWall, kWindow, kEntrance };
const char* to_string(OpeningKind k);

/// Opening centred at `center` along the wall portion `wall`.
struct Opening {
  OpeningKind kind = OpeningKind::kDoor;
  int room_a = -1;  // owning room (living room for doors)
  int room_b = -1;  // other room, -1 for exterior
  Segment wall;     // wall portion the opening lies on
  double center = 0;
  double width_mm = 0;

  double width_px() const { return width_mm / kMmPerPixel; }
};

struct PlanRoom {
  std::string id;
  int room_type = 0;
  int spec_index = 0;  // index into the HouseSpec rooms
  RectiPolygon polygon;
};

struct FloorPlan {
  std::vector<PlanRoom> rooms;
  std::vector<Opening> doors;  // doors and open walls
  std::vector<Opening> windows;
  std::optional<Opening> entrance;
  std::vector<std::string> notes;  // rooms without windows, dropped rooms, snap retries
};

/// Maximal wall portions of room `a` shared with room `b` (b = -1 gives the
/// portions bordering no other room).
std::vector<Segment> shared_walls(const FloorPlan& plan, int a, int b);

struct OpeningOptions {
  bool strict = false;  // throw SharedWallTooShort instead of opening the wall
};

/// Step (e): doors between each living room and every room it shares a wall
/// with, one window per room on its longest exterior wall (30% of it), and
/// the entrance on the biggest living room.
void add_openings(FloorPlan& plan, const text::Vocabularies& vocab, const OpeningOptions& opt = {});

struct PostprocConfig {
  double tol_px = 4;
  double snap_px = 8;
  bool strict_doors = false;
};

struct PostprocResult {
  FloorPlan plan;
  Arrangement arrangement;
  std::vector<int> face_room;  // room (spec index) per enclosed face
};

/// Steps (a) to (e) for predicted boxes (canvas-normalised, one per room).
PostprocResult postprocess(const std::vector<BBox>& boxes, const text::HouseSpec& spec,
                           const text::Vocabularies& vocab, const PostprocConfig& config = {});

/// Fill colour (#rrggbb) per room type.
const char* room_colour(int type);

nlohmann::json plan_to_json(const FloorPlan& plan, const text::Vocabularies& vocab);
std::string plan_to_svg(const FloorPlan& plan, const text::Vocabularies& vocab);

}  // namespace hpgm::post
