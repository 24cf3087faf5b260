#include "hpgm/scene3d.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hpgm::scene {

namespace {

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 cross(Vec3 a, Vec3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec2 to_pixels(Vec2 m) { return {m.x / kMetersPerPixel, kCanvasPixels - m.y / kMetersPerPixel}; }

bool room_contains(const post::PlanRoom& room, Vec2 px) {
  for (const post::Rect& r : post::decompose(room.polygon))
    if (px.x > r.x0 && px.x < r.x1 && px.y > r.y0 && px.y < r.y1) return true;
  return false;
}

int room_at(const post::FloorPlan& plan, Vec2 px) {
  for (std::size_t r = 0; r < plan.rooms.size(); ++r)
    if (room_contains(plan.rooms[r], px)) return static_cast<int>(r);
  return -1;
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return out;
}

std::string num(double v, const char* f) {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

std::string n6(double v) { return num(v, "%.6f"); }
std::string n2(double v) { return num(v, "%.2f"); }

struct PixelWall {
  post::Segment seg;
  int room_a = -1, room_b = -1;
};

Vec2 seg_point(const post::Segment& s, double t) {
  return s.axis == post::Axis::kHorizontal ? Vec2{t, s.fixed} : Vec2{s.fixed, t};
}

bool wall_matches(const PixelWall& w, const post::Opening& o) {
  if (w.seg.axis != o.wall.axis || w.seg.fixed != o.wall.fixed) return false;
  if (o.center < w.seg.lo || o.center > w.seg.hi) return false;
  const bool has_a = w.room_a == o.room_a || w.room_b == o.room_a;
  if (!has_a) return false;
  if (o.room_b < 0) return true;
  return w.room_a == o.room_b || w.room_b == o.room_b;
}

}  // namespace

Vec2 to_meters(double px, double py) { return {px * kMetersPerPixel, (kCanvasPixels - py) * kMetersPerPixel}; }

double WallSegment::length() const { return std::hypot(b.x - a.x, b.y - a.y); }

std::vector<WallSegment> build_walls(const post::FloorPlan& plan, const SceneConfig& config) {
  const int n = static_cast<int>(plan.rooms.size());
  std::vector<PixelWall> pix;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b)
      for (const post::Segment& s : post::shared_walls(plan, a, b)) pix.push_back({s, a, b});
    for (const post::Segment& s : post::shared_walls(plan, a, -1)) pix.push_back({s, a, -1});
  }

  std::vector<const post::Opening*> openings;
  for (const post::Opening& o : plan.doors) openings.push_back(&o);
  for (const post::Opening& o : plan.windows) openings.push_back(&o);
  if (plan.entrance) openings.push_back(&*plan.entrance);

  std::vector<WallSegment> walls;
  std::vector<double> extends;
  for (const PixelWall& pw : pix) {
    WallSegment w;
    w.a = to_meters(seg_point(pw.seg, pw.seg.lo).x, seg_point(pw.seg, pw.seg.lo).y);
    w.b = to_meters(seg_point(pw.seg, pw.seg.hi).x, seg_point(pw.seg, pw.seg.hi).y);
    w.height = config.wall_height;
    const double len = w.length();
    const Vec2 d = (1.0 / len) * (w.b - w.a);
    const Vec2 left{-d.y, d.x};
    const Vec2 mid = 0.5 * (w.a + w.b);
    const double probe = 0.5 * kMetersPerPixel;
    const int on_left = room_at(plan, to_pixels(mid + probe * left));
    const bool exterior = pw.room_b < 0;
    double extend = 0;
    if (exterior) {
      w.thickness = config.exterior_thickness;
      w.left_room = on_left == pw.room_a ? pw.room_a : -1;
      w.right_room = on_left == pw.room_a ? -1 : pw.room_a;
      // Push the centre line away from the room and close the outer corners.
      const double side = w.left_room >= 0 ? -1.0 : 1.0;
      const Vec2 shift = (side * 0.5 * w.thickness) * left;
      extend = w.thickness;
      w.a = w.a + shift - extend * d;
      w.b = w.b + shift + extend * d;
    } else {
      w.thickness = config.interior_thickness;
      w.left_room = on_left == pw.room_b ? pw.room_b : pw.room_a;
      w.right_room = w.left_room == pw.room_a ? pw.room_b : pw.room_a;
    }

    extends.push_back(extend);
    walls.push_back(std::move(w));
  }

  for (const post::Opening* o : openings) {
    for (std::size_t i = 0; i < walls.size(); ++i) {
      if (!wall_matches(pix[i], *o)) continue;
      WallSegment& w = walls[i];
      const double extend = extends[i], len = w.length() - 2 * extend;
      WallOpening wo;
      wo.kind = o->kind;
      wo.width = std::min(o->width_mm / 1000.0, len);
      wo.offset = extend + (o->center - pix[i].seg.lo) * kMetersPerPixel - 0.5 * wo.width;
      wo.offset = std::clamp(wo.offset, extend, extend + len - wo.width);
      switch (o->kind) {
        case post::OpeningKind::kWindow:
          wo.sill = config.window_sill;
          wo.height = config.window_head - config.window_sill;
          break;
        case post::OpeningKind::kOpenWall:
          wo.sill = 0;
          wo.height = config.wall_height;
          break;
        default:
          wo.sill = 0;
          wo.height = config.door_height;
      }
      w.openings.push_back(wo);
      break;
    }
  }
  for (WallSegment& w : walls)
    std::sort(w.openings.begin(), w.openings.end(),
              [](const WallOpening& x, const WallOpening& y) { return x.offset < y.offset; });
  return walls;
}

int Mesh::material_index(const std::string& name) {
  const auto it = std::find(materials.begin(), materials.end(), name);
  if (it != materials.end()) return static_cast<int>(it - materials.begin());
  materials.push_back(name);
  return static_cast<int>(materials.size()) - 1;
}

void Mesh::validate() const {
  const int nv = static_cast<int>(vertices.size()), nt = static_cast<int>(uvs.size());
  const int nm = static_cast<int>(materials.size());
  for (const Triangle& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      if (t.v[k] < 0 || t.v[k] >= nv) throw std::logic_error("mesh: vertex index out of range");
      if (t.uv[k] < 0 || t.uv[k] >= nt) throw std::logic_error("mesh: uv index out of range");
    }
    if (t.material < 0 || t.material >= nm) throw std::logic_error("mesh: material index out of range");
    const Vec3 c = cross(vertices[static_cast<std::size_t>(t.v[1])] - vertices[static_cast<std::size_t>(t.v[0])],
                         vertices[static_cast<std::size_t>(t.v[2])] - vertices[static_cast<std::size_t>(t.v[0])]);
    if (dot(c, c) <= 1e-24) throw std::logic_error("mesh: degenerate triangle");
  }
}

std::string floor_material(const post::PlanRoom& room) { return sanitize(room.id) + "_floor"; }
std::string wall_material(const post::PlanRoom& room) { return sanitize(room.id) + "_wall"; }

namespace {

// Quad from four vertex indices in loop order, wound so its normal follows `outward`.
void add_quad(Mesh& m, std::array<int, 4> v, std::array<Vec2, 4> uv, Vec3 outward, int material) {
  const auto p = [&](int i) { return m.vertices[static_cast<std::size_t>(v[static_cast<std::size_t>(i)])]; };
  if (dot(cross(p(1) - p(0), p(2) - p(0)), outward) < 0) {
    std::swap(v[1], v[3]);
    std::swap(uv[1], uv[3]);
  }
  const int base = static_cast<int>(m.uvs.size());
  m.uvs.insert(m.uvs.end(), uv.begin(), uv.end());
  m.triangles.push_back({{v[0], v[1], v[2]}, {base, base + 1, base + 2}, material});
  m.triangles.push_back({{v[0], v[2], v[3]}, {base, base + 2, base + 3}, material});
}

void add_cuboid(Mesh& m, const WallSegment& w, double u0, double u1, double z0, double z1, int left_mat,
                int right_mat, int cap_mat) {
  const double len = w.length();
  const Vec2 d = (1.0 / len) * (w.b - w.a);
  const Vec2 left{-d.y, d.x};
  const double t = 0.5 * w.thickness;
  const int base = static_cast<int>(m.vertices.size());
  // Index = du * 4 + dn * 2 + dz.
  for (int du = 0; du < 2; ++du)
    for (int dn = 0; dn < 2; ++dn)
      for (int dz = 0; dz < 2; ++dz) {
        const Vec2 p = w.a + (du ? u1 : u0) * d + (dn ? t : -t) * left;
        m.vertices.push_back({p.x, p.y, dz ? z1 : z0});
      }
  const auto id = [&](int du, int dn, int dz) { return base + du * 4 + dn * 2 + dz; };
  const Vec3 n3{left.x, left.y, 0}, d3{d.x, d.y, 0};
  const double tw = w.thickness;
  for (int dn = 0; dn < 2; ++dn)
    add_quad(m, {id(0, dn, 0), id(1, dn, 0), id(1, dn, 1), id(0, dn, 1)}, {{{u0, z0}, {u1, z0}, {u1, z1}, {u0, z1}}},
             dn ? n3 : Vec3{-n3.x, -n3.y, 0}, dn ? left_mat : right_mat);
  for (int du = 0; du < 2; ++du)
    add_quad(m, {id(du, 0, 0), id(du, 1, 0), id(du, 1, 1), id(du, 0, 1)}, {{{0, z0}, {tw, z0}, {tw, z1}, {0, z1}}},
             du ? d3 : Vec3{-d3.x, -d3.y, 0}, cap_mat);
  for (int dz = 0; dz < 2; ++dz)
    add_quad(m, {id(0, 0, dz), id(1, 0, dz), id(1, 1, dz), id(0, 1, dz)}, {{{u0, 0}, {u1, 0}, {u1, tw}, {u0, tw}}},
             Vec3{0, 0, dz ? 1.0 : -1.0}, cap_mat);
}

}  // namespace

Mesh extrude_walls(const std::vector<WallSegment>& walls, const post::FloorPlan& plan) {
  Mesh m;
  constexpr double eps = 1e-9;
  const auto face_material = [&](int room) {
    return m.material_index(room < 0 ? std::string(kExteriorMaterial)
                                     : wall_material(plan.rooms.at(static_cast<std::size_t>(room))));
  };
  for (const WallSegment& w : walls) {
    const double len = w.length(), h = w.height;
    std::vector<WallOpening> ops = w.openings;
    std::sort(ops.begin(), ops.end(), [](const WallOpening& a, const WallOpening& b) { return a.offset < b.offset; });
    double cursor = 0;
    for (const WallOpening& o : ops) {
      if (o.width <= 0 || o.height <= 0 || o.sill < 0) throw OpeningOverflow("opening with empty extent");
      if (o.offset < cursor - eps) throw OpeningOverflow("openings overlap or start before the wall");
      if (o.offset + o.width > len + eps || o.sill + o.height > h + eps)
        throw OpeningOverflow("opening exceeds its wall");
      cursor = o.offset + o.width;
    }
    const int lm = face_material(w.left_room), rm = face_material(w.right_room);
    const int cm = m.material_index(kCapMaterial);
    cursor = 0;
    for (const WallOpening& o : ops) {
      if (o.offset > cursor + eps) add_cuboid(m, w, cursor, o.offset, 0, h, lm, rm, cm);
      const double u0 = std::max(cursor, o.offset), u1 = std::min(len, o.offset + o.width);
      if (o.sill > eps) add_cuboid(m, w, u0, u1, 0, o.sill, lm, rm, cm);
      if (o.sill + o.height < h - eps) add_cuboid(m, w, u0, u1, o.sill + o.height, h, lm, rm, cm);
      cursor = u1;
    }
    if (len > cursor + eps) add_cuboid(m, w, cursor, len, 0, h, lm, rm, cm);
  }
  return m;
}

Mesh extrude(const std::vector<WallSegment>& walls, const post::FloorPlan& plan) {
  Mesh m = extrude_walls(walls, plan);
  for (const post::PlanRoom& room : plan.rooms) {
    const int mat = m.material_index(floor_material(room));
    for (const post::Rect& r : post::decompose(room.polygon)) {
      const Vec2 p0 = to_meters(r.x0, r.y1), p1 = to_meters(r.x1, r.y1), p2 = to_meters(r.x1, r.y0),
                 p3 = to_meters(r.x0, r.y0);
      const int base = static_cast<int>(m.vertices.size());
      for (const Vec2& p : {p0, p1, p2, p3}) m.vertices.push_back({p.x, p.y, 0});
      add_quad(m, {base, base + 1, base + 2, base + 3}, {{p0, p1, p2, p3}}, Vec3{0, 0, 1}, mat);
    }
  }
  return m;
}

std::vector<Material> house_materials(const post::FloorPlan& plan, const std::map<std::string, RoomTextures>& textures) {
  const auto colour = [](const char* hex) {
    unsigned r = 0, g = 0, b = 0;
    std::sscanf(hex, "#%02x%02x%02x", &r, &g, &b);
    return std::array<double, 3>{r / 255.0, g / 255.0, b / 255.0};
  };
  std::vector<Material> out;
  for (const post::PlanRoom& room : plan.rooms) {
    Material f{floor_material(room), colour(post::room_colour(room.room_type)), std::nullopt};
    Material w{wall_material(room), {0.9, 0.9, 0.88}, std::nullopt};
    const auto it = textures.find(room.id);
    if (it != textures.end()) {
      f.kd = w.kd = {1, 1, 1};
      f.texture = it->second.floor;
      w.texture = it->second.wall;
    }
    out.push_back(std::move(f));
    out.push_back(std::move(w));
  }
  out.push_back({kExteriorMaterial, {0.78, 0.76, 0.72}, std::nullopt});
  out.push_back({kCapMaterial, {0.85, 0.85, 0.85}, std::nullopt});
  return out;
}

ObjExport export_obj(const Mesh& mesh, const std::vector<Material>& materials, const std::string& mtl_name) {
  std::vector<const Material*> used;
  for (const std::string& name : mesh.materials) {
    const auto it = std::find_if(materials.begin(), materials.end(), [&](const Material& x) { return x.name == name; });
    if (it == materials.end()) throw MissingMaterial(name);
    used.push_back(&*it);
  }
  ObjExport ex;
  std::ostringstream obj, mtl;
  obj << "# hpgm house\nmtllib " << mtl_name << "\no house\n";
  for (const Vec3& v : mesh.vertices) obj << "v " << n6(v.x) << ' ' << n6(v.y) << ' ' << n6(v.z) << '\n';
  for (const Vec2& t : mesh.uvs) obj << "vt " << n6(t.x) << ' ' << n6(t.y) << '\n';
  int current = -1;
  for (const Triangle& t : mesh.triangles) {
    if (t.material != current) {
      current = t.material;
      obj << "usemtl " << mesh.materials.at(static_cast<std::size_t>(current)) << '\n';
    }
    obj << 'f';
    for (int k = 0; k < 3; ++k) obj << ' ' << t.v[k] + 1 << '/' << t.uv[k] + 1;
    obj << '\n';
  }
  mtl << "# hpgm house materials\n";
  for (const Material* m : used) {
    mtl << "\nnewmtl " << m->name << "\nKa 0 0 0\nKd " << n6(m->kd[0]) << ' ' << n6(m->kd[1]) << ' ' << n6(m->kd[2])
        << "\nKs 0 0 0\nd 1\nillum 1\n";
    if (m->texture) {
      mtl << "map_Kd " << m->texture_file() << '\n';
      ex.textures[m->texture_file()] = *m->texture;
    }
  }
  ex.obj = obj.str();
  ex.mtl = mtl.str();
  return ex;
}

std::string render_topview_svg(const post::FloorPlan& plan, const text::Vocabularies& vocab,
                               const std::map<std::string, std::string>& floor_hrefs, const SceneConfig& config) {
  const double tile = 1.0 / kMetersPerPixel;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" viewBox=\"0 0 "
    << kCanvasPixels << ' ' << kCanvasPixels << "\" width=\"" << kCanvasPixels << "\" height=\"" << kCanvasPixels
    << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  s << "<defs>\n";
  for (const post::PlanRoom& r : plan.rooms) {
    const auto it = floor_hrefs.find(r.id);
    if (it == floor_hrefs.end()) continue;
    s << "<pattern id=\"floor-" << sanitize(r.id) << "\" patternUnits=\"userSpaceOnUse\" width=\"" << n2(tile)
      << "\" height=\"" << n2(tile) << "\"><image xlink:href=\"" << it->second << "\" width=\"" << n2(tile)
      << "\" height=\"" << n2(tile) << "\"/></pattern>\n";
  }
  s << "</defs>\n";
  for (const post::PlanRoom& r : plan.rooms) {
    const bool textured = floor_hrefs.count(r.id) > 0;
    s << "<path class=\"room " << vocab.room_types.at(static_cast<std::size_t>(r.room_type)) << "\" fill=\""
      << (textured ? "url(#floor-" + sanitize(r.id) + ")" : std::string(post::room_colour(r.room_type))) << "\" d=\"";
    for (std::size_t i = 0; i < r.polygon.vertices.size(); ++i)
      s << (i ? " L " : "M ") << n2(r.polygon.vertices[i].x) << ' ' << n2(r.polygon.vertices[i].y);
    s << " Z\"/>\n";
  }
  const auto walls = build_walls(plan, config);
  const auto line = [&](Vec2 a, Vec2 b, const char* cls, const char* colour, double width) {
    const Vec2 pa = to_pixels(a), pb = to_pixels(b);
    s << "<line class=\"" << cls << "\" x1=\"" << n2(pa.x) << "\" y1=\"" << n2(pa.y) << "\" x2=\"" << n2(pb.x)
      << "\" y2=\"" << n2(pb.y) << "\" stroke=\"" << colour << "\" stroke-width=\"" << n2(width) << "\"/>\n";
  };
  for (const WallSegment& w : walls) line(w.a, w.b, "wall", "#333333", w.thickness * tile);
  for (const WallSegment& w : walls) {
    const Vec2 d = (1.0 / w.length()) * (w.b - w.a);
    const Vec2 left{-d.y, d.x};
    for (const WallOpening& o : w.openings) {
      const Vec2 p0 = w.a + o.offset * d, p1 = w.a + (o.offset + o.width) * d;
      const bool window = o.kind == post::OpeningKind::kWindow;
      line(p0, p1, post::to_string(o.kind), window ? "#9ecae1" : "#ffffff", w.thickness * tile + 1);
      if (o.kind != post::OpeningKind::kDoor && o.kind != post::OpeningKind::kEntrance) continue;
      // Leaf drawn open towards the left face, with its swing arc.
      const Vec2 leaf = p0 + o.width * left;
      const Vec2 h = to_pixels(p0), l = to_pixels(leaf), e = to_pixels(p1);
      const Vec2 a = to_pixels(p0 + d), b = to_pixels(p0 + left);
      const double turn = (a.x - h.x) * (b.y - h.y) - (a.y - h.y) * (b.x - h.x);
      s << "<path class=\"swing\" fill=\"none\" stroke=\"#666666\" stroke-width=\"1\" d=\"M " << n2(h.x) << ' '
        << n2(h.y) << " L " << n2(l.x) << ' ' << n2(l.y) << " A " << n2(o.width * tile) << ' ' << n2(o.width * tile)
        << " 0 0 " << (turn > 0 ? 0 : 1) << ' ' << n2(e.x) << ' ' << n2(e.y) << "\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace hpgm::scene
