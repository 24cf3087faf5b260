#pragma once

// Independent checks of a post-processed floor plan. Geometry here uses
// point-in-polygon sampling on the compressed coordinate grid, not the
// library's rectangle decomposition.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "hpgm/postproc.hpp"

namespace testkit {

using hpgm::post::FloorPlan;
using hpgm::post::Point;
using hpgm::post::RectiPolygon;

inline bool inside(const RectiPolygon& poly, double x, double y) {
  bool in = false;
  const auto& v = poly.vertices;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > y) != (v[j].y > y) && x < (v[j].x - v[i].x) * (y - v[i].y) / (v[j].y - v[i].y) + v[i].x) in = !in;
  }
  return in;
}

// Length of the collinear overlap between the boundaries of two polygons.
inline double shared_boundary(const RectiPolygon& a, const RectiPolygon& b) {
  double total = 0;
  const auto& va = a.vertices;
  const auto& vb = b.vertices;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const Point p = va[i], q = va[(i + 1) % va.size()];
    for (std::size_t j = 0; j < vb.size(); ++j) {
      const Point r = vb[j], s = vb[(j + 1) % vb.size()];
      if (p.y == q.y && r.y == s.y && p.y == r.y) {
        total += std::max(0.0, std::min(std::max(p.x, q.x), std::max(r.x, s.x)) -
                                   std::max(std::min(p.x, q.x), std::min(r.x, s.x)));
      } else if (p.x == q.x && r.x == s.x && p.x == r.x) {
        total += std::max(0.0, std::min(std::max(p.y, q.y), std::max(r.y, s.y)) -
                                   std::max(std::min(p.y, q.y), std::min(r.y, s.y)));
      }
    }
  }
  return total;
}

inline bool on_boundary(const RectiPolygon& poly, double x, double y) {
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point p = v[i], q = v[(i + 1) % v.size()];
    if (p.y == q.y && y == p.y && x >= std::min(p.x, q.x) && x <= std::max(p.x, q.x)) return true;
    if (p.x == q.x && x == p.x && y >= std::min(p.y, q.y) && y <= std::max(p.y, q.y)) return true;
  }
  return false;
}

struct OpeningEnds {
  double x0, y0, x1, y1;
};

inline OpeningEnds ends(const hpgm::post::Opening& o) {
  const double h = 0.5 * o.width_px();
  if (o.wall.axis == hpgm::post::Axis::kHorizontal) return {o.center - h, o.wall.fixed, o.center + h, o.wall.fixed};
  return {o.wall.fixed, o.center - h, o.wall.fixed, o.center + h};
}

// Every violation of the plan rules; empty when the plan is sound.
inline std::vector<std::string> plan_violations(const hpgm::post::PostprocResult& res,
                                                const hpgm::text::Vocabularies& vocab) {
  std::vector<std::string> out;
  const FloorPlan& plan = res.plan;
  for (const auto& r : plan.rooms)
    if (!r.polygon.is_valid()) out.push_back("room " + r.id + " is not a closed simple rectilinear polygon");

  // Disjointness and full assignment on the compressed grid of all coordinates.
  std::vector<double> xs = res.arrangement.xs, ys = res.arrangement.ys;
  for (const auto& r : plan.rooms)
    for (const auto& p : r.polygon.vertices) xs.push_back(p.x), ys.push_back(p.y);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  std::vector<RectiPolygon> faces;
  const auto& arr = res.arrangement;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const double cx = 0.5 * (xs[i] + xs[i + 1]), cy = 0.5 * (ys[j] + ys[j + 1]);
      int covering = 0;
      for (const auto& r : plan.rooms) covering += inside(r.polygon, cx, cy) ? 1 : 0;
      const std::size_t ai = static_cast<std::size_t>(
          std::upper_bound(arr.xs.begin(), arr.xs.end(), cx) - arr.xs.begin() - 1);
      const std::size_t aj = static_cast<std::size_t>(
          std::upper_bound(arr.ys.begin(), arr.ys.end(), cy) - arr.ys.begin() - 1);
      const bool enclosed = ai < arr.cols() && aj < arr.rows() && arr.face_of_cell[aj * arr.cols() + ai] >= 0;
      if (covering > 1) out.push_back("rooms overlap near (" + std::to_string(cx) + ", " + std::to_string(cy) + ")");
      if (enclosed && covering == 0)
        out.push_back("enclosed cell near (" + std::to_string(cx) + ", " + std::to_string(cy) + ") is unassigned");
    }
  }

  const auto living = vocab.room_type_index("livingroom");
  std::vector<int> livings;
  for (std::size_t r = 0; r < plan.rooms.size(); ++r)
    if (plan.rooms[r].room_type == *living) livings.push_back(static_cast<int>(r));
  if (livings.empty()) {
    out.push_back("no living room");
    return out;
  }
  std::set<std::pair<int, int>> door_pairs;
  for (const auto& d : plan.doors) {
    door_pairs.insert({std::min(d.room_a, d.room_b), std::max(d.room_a, d.room_b)});
    const auto e = ends(d);
    const auto& pa = plan.rooms.at(static_cast<std::size_t>(d.room_a)).polygon;
    const auto& pb = plan.rooms.at(static_cast<std::size_t>(d.room_b)).polygon;
    const double mx = 0.5 * (e.x0 + e.x1), my = 0.5 * (e.y0 + e.y1);
    if (!on_boundary(pa, mx, my) || !on_boundary(pb, mx, my)) out.push_back("door off the shared wall");
    if (d.kind == hpgm::post::OpeningKind::kDoor && std::abs(d.width_mm - 900.0) > 1e-9)
      out.push_back("door width is not 900 mm");
    if (d.width_px() > d.wall.length() + 1e-9) out.push_back("door wider than its wall");
  }
  for (int l : livings) {
    for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
      if (static_cast<int>(r) == l) continue;
      const bool adjacent = shared_boundary(plan.rooms[static_cast<std::size_t>(l)].polygon, plan.rooms[r].polygon) > 0;
      const bool has_door = door_pairs.count({std::min<int>(l, static_cast<int>(r)), std::max<int>(l, static_cast<int>(r))});
      if (adjacent && !has_door) out.push_back("no door between " + plan.rooms[static_cast<std::size_t>(l)].id + " and " + plan.rooms[r].id);
    }
  }
  if (!plan.entrance) {
    out.push_back("no entrance");
  } else {
    int biggest = livings.front();
    for (int l : livings)
      if (plan.rooms[static_cast<std::size_t>(l)].polygon.signed_area() >
          plan.rooms[static_cast<std::size_t>(biggest)].polygon.signed_area())
        biggest = l;
    const auto e = ends(*plan.entrance);
    if (plan.entrance->room_a != biggest) out.push_back("entrance not on the biggest living room");
    if (!on_boundary(plan.rooms[static_cast<std::size_t>(biggest)].polygon, 0.5 * (e.x0 + e.x1), 0.5 * (e.y0 + e.y1)))
      out.push_back("entrance off the living room boundary");
  }
  for (const auto& w : plan.windows) {
    const auto e = ends(w);
    const double mx = 0.5 * (e.x0 + e.x1), my = 0.5 * (e.y0 + e.y1);
    for (std::size_t r = 0; r < plan.rooms.size(); ++r)
      if (static_cast<int>(r) != w.room_a && on_boundary(plan.rooms[r].polygon, mx, my))
        out.push_back("window of " + plan.rooms[static_cast<std::size_t>(w.room_a)].id + " on an interior wall");
  }
  return out;
}

}  // namespace testkit
