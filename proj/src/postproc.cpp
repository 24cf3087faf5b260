#include "hpgm/postproc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include "hpgm/layout.hpp"

namespace hpgm::post {

namespace {

bool spans_meet(const Segment& a, const Segment& b) { return std::max(a.lo, b.lo) <= std::min(a.hi, b.hi); }

bool segment_less(const Segment& a, const Segment& b) {
  if (a.axis != b.axis) return a.axis < b.axis;
  if (a.fixed != b.fixed) return a.fixed < b.fixed;
  if (a.lo != b.lo) return a.lo < b.lo;
  return a.hi < b.hi;
}

void union_sources(std::vector<int>& into, const std::vector<int>& from) {
  into.insert(into.end(), from.begin(), from.end());
  std::sort(into.begin(), into.end());
  into.erase(std::unique(into.begin(), into.end()), into.end());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

}  // namespace

double RectiPolygon::signed_area() const {
  double s = 0;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = vertices[i];
    const Point& q = vertices[(i + 1) % n];
    s += p.x * q.y - q.x * p.y;
  }
  return 0.5 * s;
}

bool RectiPolygon::is_valid() const {
  const std::size_t n = vertices.size();
  if (n < 4 || n % 2 != 0) return false;
  std::vector<Segment> edges;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = vertices[i];
    const Point& q = vertices[(i + 1) % n];
    Segment e;
    if (p.y == q.y && p.x != q.x) {
      e = {Axis::kHorizontal, p.y, std::min(p.x, q.x), std::max(p.x, q.x), {}};
    } else if (p.x == q.x && p.y != q.y) {
      e = {Axis::kVertical, p.x, std::min(p.y, q.y), std::max(p.y, q.y), {}};
    } else {
      return false;
    }
    if (!edges.empty() && edges.back().axis == e.axis) return false;
    edges.push_back(e);
  }
  if (edges.front().axis == edges.back().axis) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      const Segment& a = edges[i];
      const Segment& b = edges[j];
      if (a.axis == b.axis) {
        if (a.fixed == b.fixed && spans_meet(a, b)) return false;
      } else {
        const Segment& h = a.axis == Axis::kHorizontal ? a : b;
        const Segment& v = a.axis == Axis::kHorizontal ? b : a;
        if (h.fixed >= v.lo && h.fixed <= v.hi && v.fixed >= h.lo && v.fixed <= h.hi) return false;
      }
    }
  }
  return signed_area() > 0;
}

std::vector<Rect> decompose(const RectiPolygon& poly) {
  std::vector<double> xs;
  for (const Point& p : poly.vertices) xs.push_back(p.x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<Rect> out;
  const std::size_t n = poly.vertices.size();
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double xm = 0.5 * (xs[k] + xs[k + 1]);
    std::vector<double> ys;
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p = poly.vertices[i];
      const Point& q = poly.vertices[(i + 1) % n];
      if (p.y == q.y && std::min(p.x, q.x) < xm && std::max(p.x, q.x) > xm) ys.push_back(p.y);
    }
    std::sort(ys.begin(), ys.end());
    for (std::size_t i = 0; i + 1 < ys.size(); i += 2) out.push_back({xs[k], ys[i], xs[k + 1], ys[i + 1]});
  }
  return out;
}

GaussianWeightSpec GaussianWeightSpec::from_box(const BBox& b) {
  const double s = kCanvasPixels;
  return {b.cx() * s, b.cy() * s, std::max(0.5 * b.width() * s, 1e-9), std::max(0.5 * b.height() * s, 1e-9)};
}

double rect_weight(const GaussianWeightSpec& g, const Rect& r) {
  const double ex = std::erf((r.x1 - g.cx) / g.w) - std::erf((r.x0 - g.cx) / g.w);
  const double ey = std::erf((r.y1 - g.cy) / g.h) - std::erf((r.y0 - g.cy) / g.h);
  return 0.25 * std::numbers::pi * ex * ey;
}

double region_weight(const GaussianWeightSpec& g, const std::vector<Rect>& region) {
  double s = 0;
  for (const Rect& r : region) s += rect_weight(g, r);
  return s;
}

double polygon_weight(const GaussianWeightSpec& g, const RectiPolygon& poly) { return region_weight(g, decompose(poly)); }

SharedWallTooShort::SharedWallTooShort(const std::string& a, const std::string& b, double length_mm)
    : std::runtime_error("shared wall between " + a + " and " + b + " is " + fmt(length_mm) +
                         " mm, shorter than a door") {}

std::vector<Segment> extract_boundaries(const std::vector<BBox>& boxes) {
  std::vector<Segment> out;
  const double s = kCanvasPixels;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BBox& b = boxes[i];
    double x0 = std::round(std::min(b.x0, b.x1) * s), x1 = std::round(std::max(b.x0, b.x1) * s);
    double y0 = std::round(std::min(b.y0, b.y1) * s), y1 = std::round(std::max(b.y0, b.y1) * s);
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    const int base = static_cast<int>(i) * 4;
    out.push_back({Axis::kVertical, x0, y0, y1, {base + 0}});
    out.push_back({Axis::kHorizontal, y0, x0, x1, {base + 1}});
    out.push_back({Axis::kVertical, x1, y0, y1, {base + 2}});
    out.push_back({Axis::kHorizontal, y1, x0, x1, {base + 3}});
  }
  return out;
}

std::vector<Segment> merge_segments(const std::vector<Segment>& segs, double tol_px) {
  std::vector<Segment> s = segs;
  std::sort(s.begin(), s.end(), segment_less);
  for (;;) {
    bool merged = false;
    for (std::size_t i = 0; i < s.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        if (s[i].axis != s[j].axis || std::abs(s[i].fixed - s[j].fixed) > tol_px || !spans_meet(s[i], s[j])) continue;
        Segment m = s[i];
        const double li = s[i].length(), lj = s[j].length();
        if (s[i].fixed != s[j].fixed)
          m.fixed = li + lj > 0 ? (s[i].fixed * li + s[j].fixed * lj) / (li + lj) : 0.5 * (s[i].fixed + s[j].fixed);
        m.lo = std::min(s[i].lo, s[j].lo);
        m.hi = std::max(s[i].hi, s[j].hi);
        union_sources(m.sources, s[j].sources);
        s.erase(s.begin() + static_cast<std::ptrdiff_t>(j));
        s[i] = m;
        merged = true;
        break;
      }
    }
    if (!merged) break;
    std::sort(s.begin(), s.end(), segment_less);
  }
  return s;
}

namespace {

void check_degenerate(const std::vector<Segment>& segs, std::size_t box_count) {
  std::vector<double> side(box_count * 4, std::nan(""));
  for (const Segment& s : segs)
    for (int src : s.sources)
      if (static_cast<std::size_t>(src) < side.size()) side[static_cast<std::size_t>(src)] = s.fixed;
  for (std::size_t b = 0; b < box_count; ++b) {
    if (side[b * 4 + 0] == side[b * 4 + 2] || side[b * 4 + 1] == side[b * 4 + 3])
      throw DegenerateLayout("snapping collapses room " + std::to_string(b) + " to zero area");
  }
}

// Clusters of sorted coordinates (single linkage); returns the target value for
// each input index.
struct Clusters {
  std::vector<double> members;  // sorted member coordinates
  std::vector<double> targets;  // target per member
  double snap(double v, double radius) const {
    if (members.empty()) return v;
    auto it = std::lower_bound(members.begin(), members.end(), v);
    std::size_t best = members.size();
    double best_d = radius;
    if (it != members.end()) {
      const std::size_t k = static_cast<std::size_t>(it - members.begin());
      if (std::abs(members[k] - v) <= best_d) best = k, best_d = std::abs(members[k] - v);
    }
    if (it != members.begin()) {
      const std::size_t k = static_cast<std::size_t>(it - members.begin()) - 1;
      if (std::abs(members[k] - v) < best_d || (best == members.size() && std::abs(members[k] - v) <= best_d))
        best = k, best_d = std::abs(members[k] - v);
    }
    return best == members.size() ? v : targets[best];
  }
};

Clusters cluster_axis(std::vector<Segment>& segs, Axis axis, double snap_px) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < segs.size(); ++i)
    if (segs[i].axis == axis) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (segs[a].fixed != segs[b].fixed) return segs[a].fixed < segs[b].fixed;
    return a < b;
  });
  Clusters c;
  std::size_t start = 0;
  while (start < idx.size()) {
    std::size_t end = start + 1;
    while (end < idx.size() && segs[idx[end]].fixed - segs[idx[end - 1]].fixed <= snap_px) ++end;
    double wsum = 0, lsum = 0, plain = 0;
    for (std::size_t k = start; k < end; ++k) {
      wsum += segs[idx[k]].fixed * segs[idx[k]].length();
      lsum += segs[idx[k]].length();
      plain += segs[idx[k]].fixed;
    }
    const double target = lsum > 0 ? wsum / lsum : plain / static_cast<double>(end - start);
    for (std::size_t k = start; k < end; ++k) {
      c.members.push_back(segs[idx[k]].fixed);
      c.targets.push_back(target);
      segs[idx[k]].fixed = target;
    }
    start = end;
  }
  return c;
}

}  // namespace

namespace {

std::vector<Segment> align_once(const std::vector<Segment>& segs, double snap_px) {
  std::vector<Segment> s = segs;
  const Clusters horiz = cluster_axis(s, Axis::kHorizontal, snap_px);
  const Clusters vert = cluster_axis(s, Axis::kVertical, snap_px);
  std::vector<Segment> out;
  for (Segment seg : s) {
    const Clusters& perp = seg.axis == Axis::kHorizontal ? vert : horiz;
    seg.lo = perp.snap(seg.lo, snap_px);
    seg.hi = perp.snap(seg.hi, snap_px);
    if (seg.hi > seg.lo) out.push_back(std::move(seg));
  }
  return merge_segments(out, 0.0);
}

bool same_geometry(const std::vector<Segment>& a, const std::vector<Segment>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].same_geometry(b[i])) return false;
  return true;
}

}  // namespace

std::vector<Segment> align_segments(const std::vector<Segment>& segs, double snap_px, std::size_t box_count) {
  // Dropping collapsed segments can expose new snaps, so repeat to a fixpoint.
  std::vector<Segment> out = align_once(segs, snap_px);
  for (int i = 0; i < 16; ++i) {
    auto again = align_once(out, snap_px);
    if (same_geometry(again, out)) break;
    out = std::move(again);
  }
  if (box_count) check_degenerate(out, box_count);
  return out;
}

Arrangement build_arrangement(const std::vector<Segment>& segs) {
  Arrangement a;
  for (const Segment& s : segs) {
    if (s.axis == Axis::kVertical) {
      a.xs.push_back(s.fixed);
      a.ys.push_back(s.lo);
      a.ys.push_back(s.hi);
    } else {
      a.ys.push_back(s.fixed);
      a.xs.push_back(s.lo);
      a.xs.push_back(s.hi);
    }
  }
  if (a.xs.empty()) a.xs = {0, 1};
  if (a.ys.empty()) a.ys = {0, 1};
  for (auto* v : {&a.xs, &a.ys}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
    v->insert(v->begin(), v->front() - 16);
    v->push_back(v->back() + 16);
  }
  const std::size_t cols = a.cols(), rows = a.rows();
  // vblock[k * rows + j]: vertical wall at xs[k] covering row j.
  std::vector<char> vblock(a.xs.size() * rows, 0), hblock(a.ys.size() * cols, 0);
  auto index_of = [](const std::vector<double>& v, double x) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  for (const Segment& s : segs) {
    if (s.axis == Axis::kVertical) {
      const std::size_t k = index_of(a.xs, s.fixed);
      for (std::size_t j = index_of(a.ys, s.lo); j < index_of(a.ys, s.hi); ++j) vblock[k * rows + j] = 1;
    } else {
      const std::size_t k = index_of(a.ys, s.fixed);
      for (std::size_t i = index_of(a.xs, s.lo); i < index_of(a.xs, s.hi); ++i) hblock[k * cols + i] = 1;
    }
  }
  std::vector<int> comp(cols * rows, -2);
  std::vector<std::vector<std::size_t>> members;
  std::vector<bool> outside;
  for (std::size_t start = 0; start < comp.size(); ++start) {
    if (comp[start] != -2) continue;
    const int id = static_cast<int>(members.size());
    members.emplace_back();
    outside.push_back(false);
    std::queue<std::size_t> q;
    q.push(start);
    comp[start] = id;
    while (!q.empty()) {
      const std::size_t c = q.front();
      q.pop();
      members.back().push_back(c);
      const std::size_t i = c % cols, j = c / cols;
      if (i == 0 || j == 0 || i + 1 == cols || j + 1 == rows) outside.back() = true;
      auto visit = [&](std::size_t n) {
        if (comp[n] == -2) {
          comp[n] = id;
          q.push(n);
        }
      };
      if (i > 0 && !vblock[i * rows + j]) visit(c - 1);
      if (i + 1 < cols && !vblock[(i + 1) * rows + j]) visit(c + 1);
      if (j > 0 && !hblock[j * cols + i]) visit(c - cols);
      if (j + 1 < rows && !hblock[(j + 1) * cols + i]) visit(c + cols);
    }
  }
  a.face_of_cell.assign(cols * rows, -1);
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (outside[m]) continue;
    const int face = static_cast<int>(a.faces.size());
    std::vector<std::size_t> cells = members[m];
    std::sort(cells.begin(), cells.end());
    std::vector<Rect> rects;
    for (std::size_t c : cells) {
      a.face_of_cell[c] = face;
      const std::size_t i = c % cols, j = c / cols;
      rects.push_back({a.xs[i], a.ys[j], a.xs[i + 1], a.ys[j + 1]});
    }
    a.faces.push_back(std::move(rects));
  }
  return a;
}

std::vector<int> assign_regions(const std::vector<std::vector<Rect>>& regions,
                                const std::vector<GaussianWeightSpec>& rooms) {
  std::vector<int> out;
  out.reserve(regions.size());
  for (const auto& region : regions) {
    int best = -1;
    double best_w = -1;
    for (std::size_t r = 0; r < rooms.size(); ++r) {
      const double w = region_weight(rooms[r], region);
      if (w > best_w) {
        best_w = w;
        best = static_cast<int>(r);
      }
    }
    out.push_back(best);
  }
  return out;
}

int assign_polygon(const RectiPolygon& cell, const std::vector<GaussianWeightSpec>& rooms) {
  return assign_regions({decompose(cell)}, rooms).front();
}

const char* to_string(OpeningKind k) {
  switch (k) {
    case OpeningKind::kDoor: return "door";
    case OpeningKind::kOpenWall: return "open_wall";
    case OpeningKind::kWindow: return "window";
    case OpeningKind::kEntrance: return "entrance";
  }
  return "?";
}

namespace {

std::vector<Segment> polygon_edges(const RectiPolygon& p) {
  std::vector<Segment> out;
  const std::size_t n = p.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = p.vertices[i];
    const Point& b = p.vertices[(i + 1) % n];
    if (a.y == b.y) out.push_back({Axis::kHorizontal, a.y, std::min(a.x, b.x), std::max(a.x, b.x), {}});
    else out.push_back({Axis::kVertical, a.x, std::min(a.y, b.y), std::max(a.y, b.y), {}});
  }
  return out;
}

// Pieces of `s` covered by `cuts` (or not covered when `keep_uncovered`).
std::vector<Segment> split_by(const Segment& s, const std::vector<Segment>& cuts, bool keep_uncovered) {
  std::vector<std::pair<double, double>> cover;
  for (const Segment& c : cuts) {
    if (c.axis != s.axis || c.fixed != s.fixed) continue;
    const double lo = std::max(s.lo, c.lo), hi = std::min(s.hi, c.hi);
    if (hi > lo) cover.emplace_back(lo, hi);
  }
  std::sort(cover.begin(), cover.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& iv : cover) {
    if (!merged.empty() && iv.first <= merged.back().second) merged.back().second = std::max(merged.back().second, iv.second);
    else merged.push_back(iv);
  }
  std::vector<Segment> out;
  if (!keep_uncovered) {
    for (const auto& [lo, hi] : merged) out.push_back({s.axis, s.fixed, lo, hi, {}});
    return out;
  }
  double cur = s.lo;
  for (const auto& [lo, hi] : merged) {
    if (lo > cur) out.push_back({s.axis, s.fixed, cur, lo, {}});
    cur = std::max(cur, hi);
  }
  if (s.hi > cur) out.push_back({s.axis, s.fixed, cur, s.hi, {}});
  return out;
}

const Segment* longest(const std::vector<Segment>& segs) {
  const Segment* best = nullptr;
  for (const Segment& s : segs)
    if (!best || s.length() > best->length()) best = &s;
  return best;
}

Opening make_opening(OpeningKind kind, int a, int b, const Segment& wall, double center, double width_mm) {
  Opening o;
  o.kind = kind;
  o.room_a = a;
  o.room_b = b;
  o.wall = wall;
  o.wall.sources.clear();
  o.center = center;
  o.width_mm = width_mm;
  return o;
}

}  // namespace

std::vector<Segment> shared_walls(const FloorPlan& plan, int a, int b) {
  const auto edges_a = polygon_edges(plan.rooms.at(static_cast<std::size_t>(a)).polygon);
  std::vector<Segment> cuts;
  if (b >= 0) {
    cuts = polygon_edges(plan.rooms.at(static_cast<std::size_t>(b)).polygon);
  } else {
    for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
      if (static_cast<int>(r) == a) continue;
      auto e = polygon_edges(plan.rooms[r].polygon);
      cuts.insert(cuts.end(), e.begin(), e.end());
    }
  }
  std::vector<Segment> out;
  for (const Segment& e : edges_a) {
    auto pieces = split_by(e, cuts, b < 0);
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return merge_segments(out, 0.0);
}

void add_openings(FloorPlan& plan, const text::Vocabularies& vocab, const OpeningOptions& opt) {
  plan.doors.clear();
  plan.windows.clear();
  plan.entrance.reset();
  const auto living = vocab.room_type_index("livingroom");
  std::vector<int> livings;
  for (std::size_t r = 0; r < plan.rooms.size(); ++r)
    if (living && plan.rooms[r].room_type == *living) livings.push_back(static_cast<int>(r));
  if (livings.empty()) throw NoLivingRoom();
  const double door_px = kDoorWidthMm / kMmPerPixel;

  std::set<std::pair<int, int>> done;
  for (int l : livings) {
    for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
      const int o = static_cast<int>(r);
      if (o == l || done.count({std::min(l, o), std::max(l, o)})) continue;
      const auto walls = shared_walls(plan, l, o);
      const Segment* w = longest(walls);
      if (!w) continue;
      done.insert({std::min(l, o), std::max(l, o)});
      const double mid = 0.5 * (w->lo + w->hi);
      if (w->length() >= door_px) {
        plan.doors.push_back(make_opening(OpeningKind::kDoor, l, o, *w, mid, kDoorWidthMm));
      } else {
        if (opt.strict) throw SharedWallTooShort(plan.rooms[static_cast<std::size_t>(l)].id, plan.rooms[r].id,
                                                 w->length() * kMmPerPixel);
        plan.doors.push_back(make_opening(OpeningKind::kOpenWall, l, o, *w, mid, w->length() * kMmPerPixel));
      }
    }
  }

  std::vector<std::vector<Segment>> exterior(plan.rooms.size());
  for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
    exterior[r] = shared_walls(plan, static_cast<int>(r), -1);
    std::stable_sort(exterior[r].begin(), exterior[r].end(),
                     [](const Segment& a, const Segment& b) { return a.length() > b.length(); });
    if (exterior[r].empty()) {
      plan.notes.push_back("room " + plan.rooms[r].id + " has no exterior wall and gets no window");
      continue;
    }
    const Segment& w = exterior[r].front();
    plan.windows.push_back(make_opening(OpeningKind::kWindow, static_cast<int>(r), -1, w, 0.5 * (w.lo + w.hi),
                                        kWindowFraction * w.length() * kMmPerPixel));
  }

  int main_living = livings.front();
  for (int l : livings)
    if (plan.rooms[static_cast<std::size_t>(l)].polygon.area() >
        plan.rooms[static_cast<std::size_t>(main_living)].polygon.area())
      main_living = l;
  const auto& ext = exterior[static_cast<std::size_t>(main_living)];
  if (ext.size() > 1 && ext[1].length() >= door_px) {
    plan.entrance = make_opening(OpeningKind::kEntrance, main_living, -1, ext[1], 0.5 * (ext[1].lo + ext[1].hi),
                                 kDoorWidthMm);
  } else if (!ext.empty() && 0.5 * (1 - kWindowFraction) * ext[0].length() >= door_px) {
    const double free = 0.5 * (1 - kWindowFraction) * ext[0].length();
    plan.entrance = make_opening(OpeningKind::kEntrance, main_living, -1, ext[0], ext[0].lo + 0.5 * free, kDoorWidthMm);
  } else if (!ext.empty()) {
    // The window gives way to the entrance on a short facade.
    const Segment& w = ext[0];
    plan.entrance = make_opening(OpeningKind::kEntrance, main_living, -1, w, 0.5 * (w.lo + w.hi),
                                 std::min(kDoorWidthMm, w.length() * kMmPerPixel));
    plan.windows.erase(std::remove_if(plan.windows.begin(), plan.windows.end(),
                                      [&](const Opening& o) { return o.room_a == main_living; }),
                       plan.windows.end());
    plan.notes.push_back("entrance replaces the window of " + plan.rooms[static_cast<std::size_t>(main_living)].id);
  } else {
    const auto walls = shared_walls(plan, main_living, -1);
    std::vector<Segment> all = polygon_edges(plan.rooms[static_cast<std::size_t>(main_living)].polygon);
    const Segment* w = longest(walls.empty() ? all : walls);
    plan.entrance = make_opening(OpeningKind::kEntrance, main_living, -1, *w, 0.5 * (w->lo + w->hi),
                                 std::min(kDoorWidthMm, w->length() * kMmPerPixel));
    plan.notes.push_back("living room " + plan.rooms[static_cast<std::size_t>(main_living)].id +
                         " has no exterior wall; entrance placed on an interior wall");
  }
}

namespace {

// Grid-cell labelling with repairs so that each room is one simple polygon.
struct Labels {
  std::size_t cols, rows;
  std::vector<double> xs, ys;
  std::vector<int> label;

  double cell_area(std::size_t c) const {
    const std::size_t i = c % cols, j = c / cols;
    return (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
  }
  std::vector<std::size_t> neighbours(std::size_t c) const {
    std::vector<std::size_t> n;
    const std::size_t i = c % cols, j = c / cols;
    if (i > 0) n.push_back(c - 1);
    if (i + 1 < cols) n.push_back(c + 1);
    if (j > 0) n.push_back(c - cols);
    if (j + 1 < rows) n.push_back(c + cols);
    return n;
  }
  double edge_length(std::size_t a, std::size_t b) const {
    const std::size_t ia = a % cols, ja = a / cols;
    if (ia != b % cols) return ys[ja + 1] - ys[ja];
    return xs[ia + 1] - xs[ia];
  }
  // 4-connected components of cells with label == r.
  std::vector<std::vector<std::size_t>> components(int r) const {
    std::vector<std::vector<std::size_t>> out;
    std::vector<char> seen(label.size(), 0);
    for (std::size_t s = 0; s < label.size(); ++s) {
      if (label[s] != r || seen[s]) continue;
      out.emplace_back();
      std::queue<std::size_t> q;
      q.push(s);
      seen[s] = 1;
      while (!q.empty()) {
        const std::size_t c = q.front();
        q.pop();
        out.back().push_back(c);
        for (std::size_t n : neighbours(c))
          if (label[n] == r && !seen[n]) seen[n] = 1, q.push(n);
      }
    }
    return out;
  }
};

bool fix_components(Labels& g, int r, std::vector<std::string>& notes, const std::vector<std::string>& names) {
  auto comps = g.components(r);
  if (comps.size() <= 1) return false;
  std::size_t keep = 0;
  double keep_area = -1;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    double a = 0;
    for (std::size_t c : comps[k]) a += g.cell_area(c);
    if (a > keep_area) keep_area = a, keep = k;
  }
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (k == keep) continue;
    std::map<int, double> border;
    for (std::size_t c : comps[k])
      for (std::size_t n : g.neighbours(c))
        if (g.label[n] >= 0 && g.label[n] != r) border[g.label[n]] += g.edge_length(c, n);
    int to = -1;
    double best = 0;
    for (const auto& [room, len] : border)
      if (len > best) best = len, to = room;
    if (to < 0) notes.push_back("detached fragment of " + names[static_cast<std::size_t>(r)] + " removed");
    for (std::size_t c : comps[k]) g.label[c] = to;
  }
  return true;
}

bool fix_holes(Labels& g, int r) {
  std::vector<char> reached(g.label.size(), 0);
  std::queue<std::size_t> q;
  q.push(0);
  reached[0] = 1;
  while (!q.empty()) {
    const std::size_t c = q.front();
    q.pop();
    for (std::size_t n : g.neighbours(c))
      if (g.label[n] != r && !reached[n]) reached[n] = 1, q.push(n);
  }
  for (std::size_t h = 0; h < g.label.size(); ++h) {
    if (g.label[h] == r || reached[h]) continue;
    if (g.label[h] < 0) {
      g.label[h] = r;
      return true;
    }
    // Cut the shortest straight strip of r cells from the hole to the outside.
    const long di[4] = {0, 0, -1, 1}, dj[4] = {-1, 1, 0, 0};
    std::vector<std::size_t> best_path;
    bool have = false;
    for (int d = 0; d < 4; ++d) {
      long i = static_cast<long>(h % g.cols), j = static_cast<long>(h / g.cols);
      std::vector<std::size_t> path;
      bool ok = false;
      for (;;) {
        i += di[d];
        j += dj[d];
        if (i < 0 || j < 0 || i >= static_cast<long>(g.cols) || j >= static_cast<long>(g.rows)) break;
        const std::size_t c = static_cast<std::size_t>(j) * g.cols + static_cast<std::size_t>(i);
        if (reached[c]) {
          ok = true;
          break;
        }
        if (g.label[c] == r) path.push_back(c);
      }
      if (ok && (!have || path.size() < best_path.size())) best_path = path, have = true;
    }
    for (std::size_t c : best_path) g.label[c] = g.label[h];
    return true;
  }
  return false;
}

bool fix_pinches(Labels& g) {
  auto count = [&](int r) { return std::count(g.label.begin(), g.label.end(), r); };
  for (std::size_t j = 0; j + 1 < g.rows; ++j) {
    for (std::size_t i = 0; i + 1 < g.cols; ++i) {
      const std::size_t tl = j * g.cols + i, tr = tl + 1, bl = tl + g.cols, br = bl + 1;
      std::size_t a1, a2, b1, b2;
      if (g.label[tl] == g.label[br] && g.label[tl] >= 0 && g.label[tr] != g.label[tl] && g.label[bl] != g.label[tl]) {
        a1 = tl, a2 = br, b1 = tr, b2 = bl;
      } else if (g.label[tr] == g.label[bl] && g.label[tr] >= 0 && g.label[tl] != g.label[tr] &&
                 g.label[br] != g.label[tr]) {
        a1 = tr, a2 = bl, b1 = tl, b2 = br;
      } else {
        continue;
      }
      const int a = g.label[a1];
      std::size_t pick = g.label.size();
      for (std::size_t c : {b1, b2}) {
        if (g.label[c] >= 0 && count(g.label[c]) <= 1) continue;
        if (pick == g.label.size() || g.cell_area(c) < g.cell_area(pick)) pick = c;
      }
      if (pick != g.label.size()) {
        g.label[pick] = a;
      } else {
        g.label[g.cell_area(a1) <= g.cell_area(a2) ? a1 : a2] = g.label[b1];
      }
      return true;
    }
  }
  return false;
}

RectiPolygon trace(const Labels& g, int r) {
  // Directed boundary edges on grid vertices (vi, vj), interior on the
  // positive-orientation side.
  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::size_t, std::size_t>> next;
  for (std::size_t c = 0; c < g.label.size(); ++c) {
    if (g.label[c] != r) continue;
    const std::size_t i = c % g.cols, j = c / g.cols;
    auto lab = [&](long ii, long jj) {
      if (ii < 0 || jj < 0 || ii >= static_cast<long>(g.cols) || jj >= static_cast<long>(g.rows)) return -1;
      return g.label[static_cast<std::size_t>(jj) * g.cols + static_cast<std::size_t>(ii)];
    };
    const long li = static_cast<long>(i), lj = static_cast<long>(j);
    if (lab(li, lj - 1) != r) next[{i, j}] = {i + 1, j};
    if (lab(li + 1, lj) != r) next[{i + 1, j}] = {i + 1, j + 1};
    if (lab(li, lj + 1) != r) next[{i + 1, j + 1}] = {i, j + 1};
    if (lab(li - 1, lj) != r) next[{i, j + 1}] = {i, j};
  }
  std::vector<std::pair<std::size_t, std::size_t>> loop;
  if (next.empty()) return {};
  auto start = next.begin()->first;
  auto cur = start;
  do {
    loop.push_back(cur);
    cur = next.at(cur);
  } while (cur != start && loop.size() <= next.size());
  RectiPolygon poly;
  const std::size_t n = loop.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto& p = loop[(k + n - 1) % n];
    const auto& c = loop[k];
    const auto& q = loop[(k + 1) % n];
    const bool collinear = (p.first == c.first && c.first == q.first) || (p.second == c.second && c.second == q.second);
    if (!collinear) poly.vertices.push_back({g.xs[c.first], g.ys[c.second]});
  }
  return poly;
}

PostprocResult run(const std::vector<BBox>& clamped, const text::HouseSpec& spec, const text::Vocabularies& vocab,
                   double tol, double snap, bool strict) {
  PostprocResult res;
  auto segs = merge_segments(extract_boundaries(clamped), tol);
  check_degenerate(segs, clamped.size());
  segs = align_segments(segs, snap, clamped.size());
  res.arrangement = build_arrangement(segs);
  std::vector<GaussianWeightSpec> weights;
  for (const BBox& b : clamped) weights.push_back(GaussianWeightSpec::from_box(b));
  res.face_room = assign_regions(res.arrangement.faces, weights);

  Labels g{res.arrangement.cols(), res.arrangement.rows(), res.arrangement.xs, res.arrangement.ys, {}};
  g.label.assign(g.cols * g.rows, -1);
  for (std::size_t c = 0; c < g.label.size(); ++c) {
    const int f = res.arrangement.face_of_cell[c];
    if (f >= 0) g.label[c] = res.face_room[static_cast<std::size_t>(f)];
  }
  std::vector<std::string> names;
  for (const auto& r : spec.rooms) names.push_back(r.id);
  const int n = static_cast<int>(spec.rooms.size());
  for (int iter = 0;; ++iter) {
    if (iter > 1000) throw DegenerateLayout("room outlines could not be made simple");
    bool changed = false;
    for (int r = 0; r < n && !changed; ++r) changed = fix_components(g, r, res.plan.notes, names);
    for (int r = 0; r < n && !changed; ++r) changed = fix_holes(g, r);
    if (!changed) changed = fix_pinches(g);
    if (!changed) break;
  }
  for (int r = 0; r < n; ++r) {
    RectiPolygon poly = trace(g, r);
    if (poly.vertices.empty()) {
      res.plan.notes.push_back("room " + names[static_cast<std::size_t>(r)] + " received no area");
      continue;
    }
    res.plan.rooms.push_back({names[static_cast<std::size_t>(r)], spec.rooms[static_cast<std::size_t>(r)].room_type, r,
                              std::move(poly)});
  }
  add_openings(res.plan, vocab, {strict});
  return res;
}

}  // namespace

PostprocResult postprocess(const std::vector<BBox>& boxes, const text::HouseSpec& spec,
                           const text::Vocabularies& vocab, const PostprocConfig& config) {
  if (boxes.size() != spec.rooms.size())
    throw std::invalid_argument("postprocess: " + std::to_string(boxes.size()) + " boxes for " +
                                std::to_string(spec.rooms.size()) + " rooms");
  std::vector<BBox> clamped;
  for (const BBox& b : boxes) clamped.push_back(layout::clamp_box(b));
  double tol = config.tol_px, snap = config.snap_px;
  std::vector<std::string> retries;
  for (;;) {
    try {
      PostprocResult res = run(clamped, spec, vocab, tol, snap, config.strict_doors);
      res.plan.notes.insert(res.plan.notes.begin(), retries.begin(), retries.end());
      return res;
    } catch (const DegenerateLayout&) {
      if (tol == 0 && snap == 0) throw;
      tol = tol > 0.5 ? tol / 2 : 0;
      snap = snap > 0.5 ? snap / 2 : 0;
      retries.push_back("snapping retried with tol " + fmt(tol) + " px and snap " + fmt(snap) + " px");
    }
  }
}

namespace {

nlohmann::json segment_json(const Segment& s) {
  if (s.axis == Axis::kHorizontal) return {s.lo, s.fixed, s.hi, s.fixed};
  return {s.fixed, s.lo, s.fixed, s.hi};
}

nlohmann::json opening_json(const Opening& o) {
  const double cx = o.wall.axis == Axis::kHorizontal ? o.center : o.wall.fixed;
  const double cy = o.wall.axis == Axis::kHorizontal ? o.wall.fixed : o.center;
  return {{"kind", to_string(o.kind)},
          {"rooms", {o.room_a, o.room_b}},
          {"wall", segment_json(o.wall)},
          {"center", {cx, cy}},
          {"width_mm", o.width_mm}};
}

std::array<double, 4> opening_line(const Opening& o) {
  const double h = 0.5 * o.width_px();
  if (o.wall.axis == Axis::kHorizontal) return {o.center - h, o.wall.fixed, o.center + h, o.wall.fixed};
  return {o.wall.fixed, o.center - h, o.wall.fixed, o.center + h};
}

}  // namespace

const char* room_colour(int type) {
  static const char* palette[] = {"#9ecae1", "#fdd0a2", "#c7e9c0", "#fcbba1", "#dadaeb", "#fee391", "#d9d9d9"};
  return palette[static_cast<std::size_t>(type) % (sizeof palette / sizeof *palette)];
}

nlohmann::json plan_to_json(const FloorPlan& plan, const text::Vocabularies& vocab) {
  nlohmann::json rooms = nlohmann::json::array();
  const double sqm_per_px = (kCanvasMeters / kCanvasPixels) * (kCanvasMeters / kCanvasPixels);
  for (const PlanRoom& r : plan.rooms) {
    nlohmann::json poly = nlohmann::json::array();
    for (const Point& p : r.polygon.vertices) poly.push_back({p.x, p.y});
    rooms.push_back({{"id", r.id},
                     {"type", vocab.room_types.at(static_cast<std::size_t>(r.room_type))},
                     {"spec_index", r.spec_index},
                     {"polygon", poly},
                     {"area_sqm", r.polygon.area() * sqm_per_px}});
  }
  nlohmann::json doors = nlohmann::json::array(), windows = nlohmann::json::array();
  for (const Opening& o : plan.doors) doors.push_back(opening_json(o));
  for (const Opening& o : plan.windows) windows.push_back(opening_json(o));
  return {{"canvas", {{"pixels", kCanvasPixels}, {"meters", kCanvasMeters}}},
          {"rooms", rooms},
          {"doors", doors},
          {"windows", windows},
          {"entrance", plan.entrance ? opening_json(*plan.entrance) : nlohmann::json(nullptr)},
          {"notes", plan.notes}};
}

std::string plan_to_svg(const FloorPlan& plan, const text::Vocabularies& vocab) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kCanvasPixels << ' ' << kCanvasPixels
    << "\" width=\"" << kCanvasPixels << "\" height=\"" << kCanvasPixels << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (const PlanRoom& r : plan.rooms) {
    s << "<path id=\"" << r.id << "\" class=\"room " << vocab.room_types.at(static_cast<std::size_t>(r.room_type))
      << "\" fill=\"" << room_colour(r.room_type) << "\" stroke=\"#333333\" stroke-width=\"3\" d=\"";
    for (std::size_t i = 0; i < r.polygon.vertices.size(); ++i)
      s << (i ? " L " : "M ") << fmt(r.polygon.vertices[i].x) << ' ' << fmt(r.polygon.vertices[i].y);
    s << " Z\"/>\n";
  }
  auto line = [&](const Opening& o, const char* colour, double width) {
    const auto l = opening_line(o);
    s << "<line class=\"" << to_string(o.kind) << "\" x1=\"" << fmt(l[0]) << "\" y1=\"" << fmt(l[1]) << "\" x2=\""
      << fmt(l[2]) << "\" y2=\"" << fmt(l[3]) << "\" stroke=\"" << colour << "\" stroke-width=\"" << fmt(width)
      << "\"/>\n";
  };
  for (const Opening& o : plan.doors) line(o, "#ffffff", 5);
  for (const Opening& o : plan.windows) line(o, "#3182bd", 5);
  if (plan.entrance) line(*plan.entrance, "#e6550d", 6);
  for (const PlanRoom& r : plan.rooms) {
    const auto rects = decompose(r.polygon);
    const Rect* big = nullptr;
    for (const Rect& q : rects)
      if (!big || q.area() > big->area()) big = &q;
    if (!big) continue;
    s << "<text x=\"" << fmt(0.5 * (big->x0 + big->x1)) << "\" y=\"" << fmt(0.5 * (big->y0 + big->y1))
      << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#222222\">" << r.id << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace hpgm::post
